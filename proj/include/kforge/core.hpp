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

#pragma once

#include "kforge/error.hpp"
#include "kforge/tensor/adam.hpp"
#include "kforge/tensor/autograd.hpp"
#include "kforge/tensor/checkpoint.hpp"
#include "kforge/tensor/gradcheck.hpp"
#include "kforge/tensor/ops.hpp"
#include "kforge/tensor/parameter.hpp"
#include "kforge/tensor/rng.hpp"
#include "kforge/tensor/tensor.hpp"
