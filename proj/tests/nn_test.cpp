// Copyright 2026 The kforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "kforge/nn/models.hpp"

namespace kforge::nn {
namespace {

constexpr int kSeeds = 20;
constexpr double kTol = 1e-4;

graph::SkeletonSpec chain3() {
  graph::SkeletonSpec s;
  s.name = "chain3";
  s.joint_names = {"a", "b", "c"};
  s.edges = {{0, 1}, {1, 2}};
  return s;
}

Tensor<double> rand_tensor(const Shape& shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed, Stream::kTest, {0xabc});
  return randn<double>(shape, rng, scale);
}

/// Scalar loss sum(out * R) with a fixed random R.
Tensor<double> probe(const Tensor<double>& out, std::uint64_t seed) {
  return sum(mul(out, rand_tensor(out.shape(), seed + 999)));
}

void randomize(ParameterList<double>& params, std::uint64_t seed) {
  for (auto* p : params) {
    if (!p->trainable) continue;
    Rng rng(seed, Stream::kTest, {name_hash(p->name)});
    auto v = p->value.mutable_data();
    const bool mask = p->name.size() > 5 && p->name.ends_with(".mask");
    for (auto& x : v) x = mask ? rng.uniform(0.5, 1.5) : 0.5 * rng.normal();
  }
}

ModelConfig tiny_config(const std::string& pyramid, Index frames, Index doublings, std::vector<Index> widths,
                        Index channels = 3) {
  ModelConfig c;
  c.pyramid = pyramid;
  c.frames = frames;
  c.channels = channels;
  c.num_classes = 3;
  c.latent_dim = 4;
  c.mapping_depth = 2;
  c.mapping_width = 5;
  c.embed_dim = 2;
  c.time_doublings = doublings;
  c.widths = std::move(widths);
  c.temporal_kernel = 3;
  return c;
}

void expect_grad_ok(const std::function<Tensor<double>()>& fn, const std::vector<Tensor<double>>& leaves,
                    const std::string& what, int seed) {
  const auto r = grad_check_detailed<double>(fn, leaves);
  EXPECT_LE(r.max_error, kTol) << what << " seed " << seed << ": worst " << r.worst_leaf << "[" << r.worst_index
                               << "] analytic " << r.analytic << " numeric " << r.numeric;
}

// ---------------------------------------------------------------------------
// Spatial graph convolution.

TEST(SpatialGCN, UnitMaskReducesToFixedNormalization) {
  const auto adj = graph::GraphPyramid::bundled("ntu25").level(3).adjacency;
  SpatialGCN<double> layer("gcn", adj, 3, 4, 1);
  const auto x = rand_tensor({2, 5, 25, 3}, 2);
  EXPECT_EQ(layer(x, true).values(), layer(x, false).values());
}

TEST(SpatialGCN, ZeroMaskZeroBiasGivesZero) {
  SpatialGCN<double> layer("gcn", graph::partition_and_normalize(chain3()), 2, 3, 1);
  std::fill(layer.mask().value.mutable_data().begin(), layer.mask().value.mutable_data().end(), 0.0);
  const auto y = layer(rand_tensor({1, 4, 3, 2}, 3));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(SpatialGCN, ChainMatchesDenseProduct) {
  const auto adj = graph::partition_and_normalize(chain3());
  SpatialGCN<double> layer("gcn", adj, 1, 1, 1);
  std::fill(layer.weight().value.mutable_data().begin(), layer.weight().value.mutable_data().end(), 1.0);
  const auto x = rand_tensor({1, 2, 3, 1}, 4);
  const auto y = layer(x);
  for (Index t = 0; t < 2; ++t)
    for (Index i = 0; i < 3; ++i) {
      double expect = 0.0;
      for (Index p = 0; p < 3; ++p)
        for (Index j = 0; j < 3; ++j) expect += adj.normalized[p](i, j) * x.at({0, t, j, 0});
      EXPECT_NEAR(y.at({0, t, i, 0}), expect, 1e-14);
    }
}

TEST(SpatialGCN, MaskRenormalizesByMaskedDegree) {
  const auto adj = graph::partition_and_normalize(chain3());
  SpatialGCN<double> layer("gcn", adj, 1, 1, 1);
  auto m = layer.mask().value.mutable_data();
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 + 0.25 * static_cast<double>(i);
  const auto a = layer.normalized_adjacency();
  for (Index p = 0; p < 3; ++p) {
    graph::Matrix masked(3, 3);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j) masked(i, j) = adj.raw[p](i, j) * m[i * 3 + j];
    const auto expect = graph::normalize_adjacency(masked);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j) EXPECT_NEAR(a.at({p * 3 + i, j}), expect(i, j), 1e-14);
  }
}

TEST(SpatialGCN, RejectsWrongShape) {
  SpatialGCN<double> layer("gcn", graph::partition_and_normalize(chain3()), 2, 3, 1);
  EXPECT_THROW(layer(rand_tensor({1, 4, 4, 2}, 1)), ShapeError);
  EXPECT_THROW(layer(rand_tensor({1, 4, 3, 3}, 1)), ShapeError);
}

TEST(SpatialGCN, GradientMatchesFiniteDifferences) {
  const auto adj = graph::GraphPyramid::bundled("h36m15").level(2).adjacency;
  for (int s = 0; s < kSeeds; ++s) {
    SpatialGCN<double> layer("gcn", adj, 2, 3, s);
    ParameterList<double> params;
    layer.collect(params);
    randomize(params, s);
    auto x = rand_tensor({2, 3, 7, 2}, s);
    x.set_requires_grad(true);
    auto leaves = params.tensors();
    leaves.push_back(x);
    expect_grad_ok([&] { return probe(layer(x), s); }, leaves, "spatial gcn", s);
  }
}

// ---------------------------------------------------------------------------
// Temporal convolution.

TEST(TemporalConv, CenteredDeltaIsIdentity) {
  TemporalConv<double> conv("t", 2, 2, 9, 1);
  std::fill(conv.weight().value.mutable_data().begin(), conv.weight().value.mutable_data().end(), 0.0);
  for (Index c = 0; c < 2; ++c) conv.tap(4, c, c) = 1.0;
  const auto x = rand_tensor({2, 6, 3, 2}, 5);
  EXPECT_EQ(conv(x).values(), x.values());
}

TEST(TemporalConv, BoxKernelOnThreeFrames) {
  TemporalConv<double> conv("t", 1, 1, 3, 1);
  for (Index k = 0; k < 3; ++k) conv.tap(k, 0, 0) = 1.0 / 3.0;
  const Tensor<double> x({1, 3, 1, 1}, {0.0, 3.0, 6.0});
  EXPECT_NEAR(conv(x).at({0, 1, 0, 0}), 3.0, 1e-15);
}

TEST(TemporalConv, ConstantInputSumOneKernel) {
  TemporalConv<double> conv("t", 1, 1, 9, 1);
  const double w[9] = {0.1, 0.05, 0.2, 0.1, 0.15, 0.1, 0.05, 0.15, 0.1};
  for (Index k = 0; k < 9; ++k) conv.tap(k, 0, 0) = w[k];
  const auto y = conv(Tensor<double>::full({1, 7, 2, 1}, 2.5));
  EXPECT_EQ(y.shape(), (Shape{1, 7, 2, 1}));
  for (double v : y.values()) EXPECT_NEAR(v, 2.5, 1e-14);
}

TEST(TemporalConv, FrameCountPreserved) {
  TemporalConv<double> conv("t", 3, 4, 9, 1);
  for (Index frames : {1, 2, 5, 16}) EXPECT_EQ(conv(rand_tensor({2, frames, 3, 3}, 1)).dim(1), frames);
  EXPECT_THROW(conv(rand_tensor({2, 4, 3, 2}, 1)), ShapeError);
  EXPECT_THROW(TemporalConv<double>("t", 1, 1, 4, 1), ConfigError);
}

TEST(TemporalConv, GradientMatchesFiniteDifferences) {
  for (int s = 0; s < kSeeds; ++s) {
    TemporalConv<double> conv("t", 2, 3, 5, s);
    ParameterList<double> params;
    conv.collect(params);
    randomize(params, s);
    auto x = rand_tensor({2, 4, 3, 2}, s);
    x.set_requires_grad(true);
    auto leaves = params.tensors();
    leaves.push_back(x);
    expect_grad_ok([&] { return probe(conv(x), s); }, leaves, "temporal conv", s);
  }
}

// ---------------------------------------------------------------------------
// Noise, batch norm, linear, embedding.

TEST(NoiseInjection, ZeroWeightsPassThrough) {
  NoiseInjection<double> noise("n", 4, 0);
  const auto x = rand_tensor({2, 3, 5, 4}, 8);
  EXPECT_EQ(noise(x, 123).values(), x.values());
}

TEST(NoiseInjection, DeterministicPerSeedAndPerJoint) {
  NoiseInjection<double> noise("n", 2, 0);
  noise.weight().value.mutable_data()[0] = 1.0;
  noise.weight().value.mutable_data()[1] = -2.0;
  const auto x = Tensor<double>::zeros({1, 2, 3, 2});
  const auto a = noise(x, 5), b = noise(x, 5), c = noise(x, 6);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_NE(a.values(), c.values());
  for (Index t = 0; t < 2; ++t)
    for (Index n = 0; n < 3; ++n) EXPECT_EQ(a.at({0, t, n, 1}), -2.0 * a.at({0, t, n, 0}));
}

TEST(NoiseInjection, GradientMatchesFiniteDifferences) {
  for (int s = 0; s < kSeeds; ++s) {
    NoiseInjection<double> noise("n", 3, s);
    ParameterList<double> params;
    noise.collect(params);
    randomize(params, s);
    auto x = rand_tensor({2, 2, 3, 3}, s);
    x.set_requires_grad(true);
    expect_grad_ok([&] { return probe(noise(x, 77), s); }, {params[0].value, x}, "noise", s);
  }
}

TEST(BatchNorm, NormalizesPerChannelAndTracksStats) {
  BatchNorm<double> bn("bn", 2);
  const auto x = rand_tensor({4, 3, 2, 2}, 9, 3.0);
  const auto y = bn(x, true);
  for (Index c = 0; c < 2; ++c) {
    double m = 0.0, v = 0.0;
    for (Index i = 0; i < y.numel() / 2; ++i) m += y.values()[i * 2 + c];
    m /= static_cast<double>(y.numel() / 2);
    for (Index i = 0; i < y.numel() / 2; ++i) v += std::pow(y.values()[i * 2 + c] - m, 2);
    v /= static_cast<double>(y.numel() / 2);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-3);
  }
  ParameterList<double> params;
  bn.collect(params);
  EXPECT_NE(params.find("bn.running_mean")->value.values(), std::vector<double>(2, 0.0));
  EXPECT_FALSE(params.find("bn.running_mean")->trainable);
}

TEST(BatchNorm, GradientMatchesFiniteDifferences) {
  for (int s = 0; s < kSeeds; ++s) {
    BatchNorm<double> bn("bn", 3);
    ParameterList<double> params;
    bn.collect(params);
    randomize(params, s);
    auto x = rand_tensor({2, 3, 2, 3}, s);
    x.set_requires_grad(true);
    auto leaves = params.trainable().tensors();
    leaves.push_back(x);
    expect_grad_ok([&] { return probe(bn(x, true), s); }, leaves, "batch norm", s);
  }
}

TEST(Linear, GradientMatchesFiniteDifferences) {
  for (int s = 0; s < kSeeds; ++s) {
    Linear<double> lin("fc", 4, 3, s);
    ParameterList<double> params;
    lin.collect(params);
    randomize(params, s);
    auto x = rand_tensor({5, 4}, s);
    x.set_requires_grad(true);
    auto leaves = params.tensors();
    leaves.push_back(x);
    expect_grad_ok([&] { return probe(lin(x), s); }, leaves, "linear", s);
  }
}

TEST(ClassEmbedding, LookupAndRange) {
  ClassEmbedding<double> e("e", 4, 3, 1);
  const auto a = e({2, 0, 2});
  EXPECT_EQ(a.shape(), (Shape{3, 3}));
  for (Index k = 0; k < 3; ++k) EXPECT_EQ(a.at({0, k}), a.at({2, k}));
  EXPECT_EQ(e({1}).values(), e({1}).values());
  EXPECT_THROW(e({4}), ArgumentError);
  EXPECT_THROW(e({-1}), ArgumentError);
}

// ---------------------------------------------------------------------------
// Mapping network.

TEST(MappingNetwork, DepthZeroIsAffine) {
  MappingNetwork<double> f("m", 4, 6, 0, 3);
  const auto x = rand_tensor({3, 4}, 1);
  const auto w = f(x);
  const auto& W = f.layer(0).weight().value;
  auto& b = f.layer(0).bias().value;
  auto bias = b.mutable_data();
  bias[0] = 0.5;
  const auto w2 = f(x);
  for (Index i = 0; i < 3; ++i)
    for (Index o = 0; o < 6; ++o) {
      double acc = b.values()[o];
      for (Index k = 0; k < 4; ++k) acc += x.at({i, k}) * W.at({k, o});
      EXPECT_NEAR(w2.at({i, o}), acc, 1e-14);
    }
  EXPECT_EQ(w.shape(), (Shape{3, 6}));
}

TEST(MappingNetwork, SameInputSameOutputAndClassesDiffer) {
  ModelConfig c = tiny_config("toy2", 4, 2, {3, 2});
  const auto p = load_pyramid(c.pyramid);
  Generator<double> g(c, p);
  const auto z = rand_tensor({1, c.latent_dim}, 3);
  const auto a = g.map(z, {0}), b = g.map(z, {0}), d = g.map(z, {1});
  EXPECT_EQ(a.shape(), (Shape{1, c.mapping_width}));
  EXPECT_EQ(a.values(), b.values());
  double dist = 0.0;
  for (Index i = 0; i < a.numel(); ++i) dist += std::pow(a.values()[i] - d.values()[i], 2);
  EXPECT_GT(dist, 0.0);
  EXPECT_THROW(g.map(z, {3}), ArgumentError);
  EXPECT_THROW(g.map(rand_tensor({1, 5}, 1), {0}), ShapeError);
}

TEST(MappingNetwork, GradientMatchesFiniteDifferences) {
  for (int s = 0; s < kSeeds; ++s) {
    MappingNetwork<double> f("m", 4, 5, 3, s);
    ParameterList<double> params;
    f.collect(params);
    randomize(params, s);
    auto x = rand_tensor({3, 4}, s);
    x.set_requires_grad(true);
    auto leaves = params.tensors();
    leaves.push_back(x);
    expect_grad_ok([&] { return probe(f(x), s); }, leaves, "mapping", s);
  }
}

// ---------------------------------------------------------------------------
// Blocks.

TEST(GeneratorBlock, IdentityConfiguredOutputBlockDoublesUpsampledInput) {
  const auto p = graph::GraphPyramid::bundled("toy2");
  const Stage in{0, 1, 2, 2}, out{1, 2, 4, 2};
  GeneratorBlock<double> block("b", in, out, p, 3, true, false, 0, 1);
  auto& gw = block.gcn().weight().value;
  std::fill(gw.mutable_data().begin(), gw.mutable_data().end(), 0.0);
  for (Index c = 0; c < 2; ++c) gw.mutable_data()[c * 2 + c] = 1.0;
  for (auto* conv : {&block.tconv(), &block.skip()}) {
    std::fill(conv->weight().value.mutable_data().begin(), conv->weight().value.mutable_data().end(), 0.0);
    for (Index c = 0; c < 2; ++c) conv->tap(1, c, c) = 1.0;
  }
  const auto x = rand_tensor({3, 2, 1, 2}, 4);
  const auto y = block(x, 11, false);
  const auto u = block.upsample(x);
  ASSERT_EQ(y.shape(), (Shape{3, 4, 2, 2}));
  for (Index i = 0; i < y.numel(); ++i) EXPECT_EQ(y.values()[i], 2.0 * u.values()[i]);
}

TEST(GeneratorBlock, DeterministicForFixedSeed) {
  const auto p = graph::GraphPyramid::bundled("h36m15");
  GeneratorBlock<double> block("b", Stage{1, 2, 2, 3}, Stage{2, 7, 4, 2}, p, 9, false, false, 1, 5);
  block.noise().weight().value.mutable_data()[0] = 0.7;
  const auto x = rand_tensor({2, 2, 2, 3}, 2);
  EXPECT_EQ(block(x, 3, false).values(), block(x, 3, false).values());
  EXPECT_NE(block(x, 3, false).values(), block(x, 4, false).values());
  EXPECT_THROW(block(rand_tensor({2, 2, 7, 3}, 2), 3, false), ShapeError);
}

TEST(GeneratorBlock, GradientMatchesFiniteDifferences) {
  const auto p = graph::GraphPyramid::bundled("h36m15");
  for (int s = 0; s < kSeeds; ++s) {
    GeneratorBlock<double> block("b", Stage{1, 2, 2, 2}, Stage{2, 7, 4, 2}, p, 3, s % 2 == 0, false, 0, s);
    ParameterList<double> params;
    block.collect(params);
    randomize(params, s);
    auto x = rand_tensor({2, 2, 2, 2}, s);
    x.set_requires_grad(true);
    auto leaves = params.trainable().tensors();
    leaves.push_back(x);
    expect_grad_ok([&] { return probe(block(x, 9, true), s); }, leaves, "generator block", s);
  }
}

TEST(GeneratorBlock, GradientWithBatchNormMatchesFiniteDifferences) {
  const auto p = graph::GraphPyramid::bundled("h36m15");
  for (int s = 0; s < kSeeds; ++s) {
    GeneratorBlock<double> block("b", Stage{3, 15, 2, 2}, Stage{3, 15, 4, 2}, p, 3, false, true, 0, s);
    ParameterList<double> params;
    block.collect(params);
    randomize(params, s);
    auto x = rand_tensor({2, 2, 15, 2}, s);
    x.set_requires_grad(true);
    auto leaves = params.trainable().tensors();
    leaves.push_back(x);
    expect_grad_ok([&] { return probe(block(x, 9, true), s); }, leaves, "generator block with bn", s);
  }
}

TEST(DiscriminatorBlock, ZeroInputZeroBiasGivesZero) {
  const auto p = graph::GraphPyramid::bundled("ntu25");
  DiscriminatorBlock<double> block("d", Stage{3, 25, 8, 3}, Stage{2, 11, 4, 5}, p, 9, 1);
  const auto y = block(Tensor<double>::zeros({2, 8, 25, 3}));
  EXPECT_EQ(y.shape(), (Shape{2, 4, 11, 5}));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(DiscriminatorBlock, GradientMatchesFiniteDifferences) {
  const auto p = graph::GraphPyramid::bundled("h36m15");
  for (int s = 0; s < kSeeds; ++s) {
    DiscriminatorBlock<double> block("d", Stage{2, 7, 4, 2}, Stage{1, 2, 2, 3}, p, 3, s);
    ParameterList<double> params;
    block.collect(params);
    randomize(params, s);
    auto x = rand_tensor({2, 4, 7, 2}, s);
    x.set_requires_grad(true);
    auto leaves = params.tensors();
    leaves.push_back(x);
    expect_grad_ok([&] { return probe(block(x), s); }, leaves, "discriminator block", s);
  }
}

// ---------------------------------------------------------------------------
// Full models.

TEST(Schedule, FollowsPyramidAndDoubling) {
  ModelConfig c;
  const auto ntu = generator_schedule(c, graph::GraphPyramid::bundled("ntu25"));
  ASSERT_EQ(ntu.size(), 5u);
  const std::vector<std::pair<Index, Index>> expect{{1, 4}, {5, 8}, {11, 16}, {25, 32}, {25, 64}};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(ntu[i].joints, expect[i].first);
    EXPECT_EQ(ntu[i].frames, expect[i].second);
  }
  EXPECT_EQ(ntu.back().channels, 3);
  c.frames = 50;
  const auto h36 = generator_schedule(c, graph::GraphPyramid::bundled("h36m15"));
  EXPECT_EQ(h36.back().frames, 50);
  EXPECT_EQ(h36.back().joints, 15);
  c.widths = {8, 8};
  EXPECT_THROW(generator_schedule(c, graph::GraphPyramid::bundled("ntu25")), ConfigError);
}

TEST(Generator, FullSizeOutputShapes) {
  ModelConfig ntu;
  ntu.num_classes = 4;
  const auto pn = load_pyramid("ntu25");
  Generator<float> gn(ntu, pn);
  const auto z = sample_latents<float>(2, 512, 1, {});
  EXPECT_EQ(gn(z, {0, 3}, 1).shape(), (Shape{2, 3, 64, 25}));

  ModelConfig h36 = ntu;
  h36.pyramid = "h36m15";
  h36.frames = 50;
  h36.channels = 2;
  const auto ph = load_pyramid("h36m15");
  Generator<float> gh(h36, ph);
  EXPECT_EQ(gh(z, {1, 2}, 1).shape(), (Shape{2, 2, 50, 15}));
}

TEST(Generator, ShapeContractAllBatchSizes) {
  const std::vector<ModelConfig> configs{tiny_config("ntu25", 16, 4, {4, 4, 3, 3}),
                                         tiny_config("h36m15", 12, 2, {4, 3, 3}, 2),
                                         tiny_config("toy2", 4, 2, {3, 3})};
  for (const auto& c : configs) {
    const auto p = load_pyramid(c.pyramid);
    Generator<double> g(c, p);
    Discriminator<double> d(c, p);
    for (Index b = 1; b <= 8; ++b) {
      std::vector<Index> labels(static_cast<std::size_t>(b));
      for (Index i = 0; i < b; ++i) labels[i] = i % c.num_classes;
      const auto x = g(rand_tensor({b, c.latent_dim}, b), labels, 3);
      EXPECT_EQ(x.shape(), g.output_shape(b)) << c.pyramid;
      EXPECT_EQ(x.shape(), (Shape{b, c.channels, c.frames, p.finest().joint_count()}));
      EXPECT_EQ(d(x, labels).shape(), (Shape{b}));
    }
  }
}

TEST(Generator, NoiseVariationFollowsWeights) {
  const auto c = tiny_config("h36m15", 8, 3, {4, 3, 3});
  const auto p = load_pyramid(c.pyramid);
  Generator<double> g(c, p);
  const auto w = g.map(rand_tensor({1, c.latent_dim}, 1), {1});
  auto joint_std = [&] {
    std::vector<std::vector<double>> runs;
    for (std::uint64_t seed = 0; seed < 100; ++seed) runs.push_back(g.synthesize(w, seed).values());
    std::vector<double> sd(runs[0].size());
    for (std::size_t i = 0; i < sd.size(); ++i) {
      // Shifted by the first run so identical realizations give exactly 0.
      double m = 0.0, v = 0.0;
      for (const auto& r : runs) m += r[i] - runs[0][i];
      m /= 100.0;
      for (const auto& r : runs) v += (r[i] - runs[0][i] - m) * (r[i] - runs[0][i] - m);
      sd[i] = std::sqrt(v / 99.0);
    }
    return sd;
  };
  for (double s : joint_std()) EXPECT_EQ(s, 0.0);
  for (Index k = 0; k < g.block_count(); ++k)
    for (auto& v : g.block(k).noise().weight().value.mutable_data()) v = 0.3;
  for (double s : joint_std()) {
    EXPECT_TRUE(std::isfinite(s));
    EXPECT_GT(s, 0.0);
  }
  EXPECT_EQ(g.synthesize(w, 5).values(), g.synthesize(w, 5).values());
}

TEST(Generator, GradientMatchesFiniteDifferences) {
  const auto c = tiny_config("h36m15", 8, 3, {3, 2, 2});
  const auto p = load_pyramid(c.pyramid);
  for (int s = 0; s < kSeeds; ++s) {
    auto cs = c;
    cs.init_seed = s;
    cs.batch_norm = s % 2 ? BatchNormPolicy::kAll : BatchNormPolicy::kNonUpsampling;
    Generator<double> g(cs, p);
    auto params = g.parameters();
    randomize(params, s);
    const auto z = rand_tensor({2, cs.latent_dim}, s);
    expect_grad_ok([&] { return probe(g(z, {0, 2}, 17, true), s); }, params.trainable().tensors(), "generator", s);
  }
}

TEST(Discriminator, ZeroHeadScoresZero) {
  const auto c = tiny_config("ntu25", 16, 4, {4, 4, 3, 3});
  const auto p = load_pyramid(c.pyramid);
  Discriminator<double> d(c, p);
  for (auto& v : d.head().weight().value.mutable_data()) v = 0.0;
  const auto scores = d(rand_tensor({3, 3, 16, 25}, 1), {0, 1, 2});
  for (double v : scores.values()) EXPECT_EQ(v, 0.0);
}

TEST(Discriminator, BatchPermutationPermutesScores) {
  const auto c = tiny_config("h36m15", 8, 3, {4, 3, 3});
  const auto p = load_pyramid(c.pyramid);
  Discriminator<double> d(c, p);
  const auto x = rand_tensor({4, 3, 8, 15}, 2);
  const std::vector<Index> labels{0, 1, 2, 1};
  const std::vector<Index> perm{2, 0, 3, 1};
  std::vector<Index> plabels;
  for (Index i : perm) plabels.push_back(labels[i]);
  const auto a = d(x, labels);
  const auto b = d(index_select(x, perm), plabels);
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(b.values()[i], a.values()[perm[i]]);
  EXPECT_THROW(d(x, {0, 1, 2, 3}), ArgumentError);
  EXPECT_THROW(d(rand_tensor({4, 3, 7, 15}, 2), labels), ShapeError);
}

TEST(Discriminator, BlockOutputsFollowReversedSchedule) {
  const auto c = tiny_config("ntu25", 16, 4, {4, 4, 3, 3});
  const auto p = load_pyramid(c.pyramid);
  Discriminator<double> d(c, p);
  const std::vector<std::pair<Index, Index>> expect{{25, 8}, {11, 4}, {5, 2}, {1, 1}};
  for (Index i = 0; i < d.block_count(); ++i) {
    EXPECT_EQ(d.block(i).output_stage().joints, expect[i].first);
    EXPECT_EQ(d.block(i).output_stage().frames, expect[i].second);
  }
}

TEST(Discriminator, GradientMatchesFiniteDifferences) {
  const auto c = tiny_config("h36m15", 8, 3, {3, 2, 2});
  const auto p = load_pyramid(c.pyramid);
  for (int s = 0; s < kSeeds; ++s) {
    auto cs = c;
    cs.init_seed = s;
    Discriminator<double> d(cs, p);
    auto params = d.parameters();
    randomize(params, s);
    auto x = rand_tensor({2, 3, 8, 15}, s);
    x.set_requires_grad(true);
    auto leaves = params.tensors();
    leaves.push_back(x);
    expect_grad_ok([&] { return probe(d(x, {1, 0}), s); }, leaves, "discriminator", s);
  }
}

TEST(Discriminator, InputGradientIsDifferentiable) {
  const auto c = tiny_config("toy2", 4, 2, {3, 2});
  const auto p = load_pyramid(c.pyramid);
  Discriminator<double> d(c, p);
  auto x = rand_tensor({2, 3, 4, 2}, 1);
  x.set_requires_grad(true);
  const auto g = grad(sum(d(x, {0, 1})), {x}, GradOptions{true, false})[0];
  EXPECT_TRUE(g.requires_grad());
  EXPECT_EQ(g.shape(), x.shape());
}

// ---------------------------------------------------------------------------
// Truncation.

TEST(Truncation, EndpointsAndScaling) {
  TruncationCenter<double> center{Tensor<double>({2, 3}, {0.5, -1.0, 2.0, 1.0, 1.0, 1.0}), 1000};
  const Tensor<double> w({2, 3}, {1.5, -1.0, 3.0, 1.25, 0.75, 1.5});
  const std::vector<Index> labels{0, 1};
  EXPECT_EQ(truncate(w, labels, center, 1.0).values(), w.values());
  const auto t0 = truncate(w, labels, center, 0.0);
  EXPECT_EQ(t0.values(), center.centers.values());
  const auto t = truncate(w, labels, center, 0.95);
  const std::vector<double> u{1.0, 0.0, 1.0, 0.25, -0.25, 0.5};
  for (Index i = 0; i < 6; ++i) EXPECT_EQ(t.values()[i], center.centers.values()[i] + 0.95 * u[i]);
  EXPECT_THROW(truncate(w, labels, center, 1.5), ArgumentError);
  EXPECT_THROW(truncate(w, labels, center, -0.1), ArgumentError);
}

TEST(Truncation, IsAffine) {
  const auto c = tiny_config("toy2", 4, 2, {3, 2});
  const auto p = load_pyramid(c.pyramid);
  Generator<double> g(c, p);
  const auto center = compute_truncation_center(g, 3);
  EXPECT_EQ(center.samples, 1000);
  EXPECT_EQ(center.centers.shape(), (Shape{c.num_classes, c.mapping_width}));
  const std::vector<Index> labels{0, 2};
  for (int s = 0; s < kSeeds; ++s) {
    const auto w1 = rand_tensor({2, c.mapping_width}, s);
    const auto w2 = rand_tensor({2, c.mapping_width}, s + 100);
    const double a = 0.05 * s, psi = 0.1 + 0.04 * s;
    const auto lhs = truncate(add(mul_scalar(w1, a), mul_scalar(w2, 1 - a)), labels, center, psi);
    const auto rhs =
        add(mul_scalar(truncate(w1, labels, center, psi), a), mul_scalar(truncate(w2, labels, center, psi), 1 - a));
    for (Index i = 0; i < lhs.numel(); ++i) EXPECT_NEAR(lhs.values()[i], rhs.values()[i], 1e-12);
  }
}

TEST(Truncation, CenterIsMeanOfMappedLatents) {
  const auto c = tiny_config("toy2", 4, 2, {3, 2});
  const auto p = load_pyramid(c.pyramid);
  Generator<double> g(c, p);
  const auto center = compute_truncation_center(g, 7, 50);
  const auto z = sample_latents<double>(50, c.latent_dim, 7, {0x7c3e, 1});
  const auto w = g.map(z, std::vector<Index>(50, 1));
  for (Index k = 0; k < c.mapping_width; ++k) {
    double m = 0.0;
    for (Index i = 0; i < 50; ++i) m += w.at({i, k});
    EXPECT_NEAR(center.centers.at({1, k}), m / 50.0, 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Configuration and audit.

TEST(ModelConfig, JsonRoundTripAndValidation) {
  ModelConfig c = tiny_config("h36m15", 12, 2, {4, 3, 3}, 2);
  c.batch_norm = BatchNormPolicy::kNone;
  const auto back = ModelConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  auto j = c.to_json();
  j["unknown"] = 1;
  EXPECT_THROW(ModelConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["batch_norm"] = "sometimes";
  EXPECT_THROW(ModelConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["frames"] = "many";
  EXPECT_THROW(ModelConfig::from_json(j), ConfigError);
  c.channels = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(load_pyramid("no-such-pyramid"), ConfigError);
}

TEST(Audit, DefaultPolicyPassesAndAllPolicyFails) {
  for (const std::string pyr : {"ntu25", "h36m15"}) {
    auto c = tiny_config(pyr, 16, 4, {4, 4, 3, 3});
    const auto p = load_pyramid(pyr);
    {
      Generator<double> g(c, p);
      Discriminator<double> d(c, p);
      const auto a = audit_models(g, d);
      EXPECT_TRUE(a.ok());
      EXPECT_EQ(a.blocks.size(), 8u);
    }
    c.batch_norm = BatchNormPolicy::kAll;
    Generator<double> g(c, p);
    Discriminator<double> d(c, p);
    const auto a = audit_models(g, d);
    EXPECT_FALSE(a.ok());
    EXPECT_EQ(a.violations.size(), 3u);
  }
}

TEST(Audit, NonUpsamplingPolicyPlacesNormOnlyInTimeOnlyBlocks) {
  auto c = tiny_config("toy2", 16, 4, {4, 4, 3, 3});
  const auto p = load_pyramid("toy2");
  Generator<double> g(c, p);
  Discriminator<double> d(c, p);
  EXPECT_FALSE(g.block(0).has_batch_norm());
  EXPECT_TRUE(g.block(1).has_batch_norm());
  EXPECT_TRUE(g.block(2).has_batch_norm());
  EXPECT_FALSE(g.block(3).has_batch_norm());
  EXPECT_TRUE(audit_models(g, d).ok());
}

TEST(Parameters, NamesUniqueAndCheckpointRoundTrip) {
  const auto c = tiny_config("h36m15", 8, 3, {4, 3, 3});
  const auto p = load_pyramid(c.pyramid);
  Generator<double> g(c, p);
  Discriminator<double> d(c, p);
  ParameterList<double> all;
  g.collect(all);
  d.collect(all);
  Checkpoint ckpt;
  ckpt.add_parameters(all);
  const auto before = all.fingerprint();
  randomize(all, 5);
  EXPECT_NE(all.fingerprint(), before);
  ckpt.load_parameters(all);
  EXPECT_EQ(all.fingerprint(), before);
}

}  // namespace
}  // namespace kforge::nn
