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

// Bundled pyramid definition tables. Kept byte-identical to data/pyramids/*.json
// (checked by graph_test).

#pragma once

#include <string_view>

namespace kforge::graph::tables {

inline constexpr std::string_view kNtu25 = R"json({
  "skeleton_name": "ntu25",
  "level_sizes": [1, 5, 11, 25],
  "joint_names": [
    ["torso"],
    ["torso", "l_hand", "r_hand", "l_foot", "r_foot"],
    ["spine_base", "spine_shoulder", "head", "l_elbow", "l_hand", "r_elbow", "r_hand", "l_knee", "l_foot", "r_knee", "r_foot"],
    ["spine_base", "spine_mid", "neck", "head", "l_shoulder", "l_elbow", "l_wrist", "l_hand", "r_shoulder", "r_elbow",
     "r_wrist", "r_hand", "l_hip", "l_knee", "l_ankle", "l_foot", "r_hip", "r_knee", "r_ankle", "r_foot",
     "spine_shoulder", "l_hand_tip", "l_thumb", "r_hand_tip", "r_thumb"]
  ],
  "edges": [
    [],
    [[0, 1], [0, 2], [0, 3], [0, 4]],
    [[0, 1], [1, 2], [1, 3], [3, 4], [1, 5], [5, 6], [0, 7], [7, 8], [0, 9], [9, 10]],
    [[0, 1], [1, 20], [2, 20], [3, 2], [4, 20], [5, 4], [6, 5], [7, 6], [8, 20], [9, 8], [10, 9], [11, 10],
     [12, 0], [13, 12], [14, 13], [15, 14], [16, 0], [17, 16], [18, 17], [19, 18], [21, 22], [22, 7], [23, 24], [24, 11]]
  ],
  "center_joint": [0, 0, 1, 20],
  "root_joint": [0, 0, 0, 1],
  "up_maps": [
    [[0], [0], [0], [0], [0]],
    [[0], [0], [0], [0, 1], [1], [0, 2], [2], [0, 3], [3], [0, 4], [4]],
    [[0], [0, 1], [1, 2], [2], [1, 3], [3], [3, 4], [4], [1, 5], [5], [5, 6], [6], [0, 7], [7], [7, 8], [8],
     [0, 9], [9], [9, 10], [10], [1], [4], [4], [6], [6]]
  ],
  "keep_lists": [
    [0],
    [1, 4, 6, 8, 10],
    [0, 20, 3, 5, 7, 9, 11, 13, 15, 17, 19]
  ]
}
)json";

inline constexpr std::string_view kH36m15 = R"json({
  "skeleton_name": "h36m15",
  "level_sizes": [1, 2, 7, 15],
  "joint_names": [
    ["pelvis"],
    ["pelvis", "thorax"],
    ["pelvis", "r_ankle", "l_ankle", "thorax", "head", "l_wrist", "r_wrist"],
    ["pelvis", "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee", "l_ankle", "thorax", "head", "l_shoulder",
     "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist"]
  ],
  "edges": [
    [],
    [[0, 1]],
    [[0, 1], [0, 2], [0, 3], [3, 4], [3, 5], [3, 6]],
    [[0, 1], [1, 2], [2, 3], [0, 4], [4, 5], [5, 6], [0, 7], [7, 8], [7, 9], [9, 10], [10, 11], [7, 12], [12, 13],
     [13, 14]]
  ],
  "center_joint": [0, 0, 0, 0],
  "root_joint": [0, 0, 0, 0],
  "up_maps": [
    [[0], [0]],
    [[0], [0], [0], [1], [1], [1], [1]],
    [[0], [0], [0, 1], [1], [0], [0, 2], [2], [3], [4], [3], [3, 5], [5], [3], [3, 6], [6]]
  ],
  "keep_lists": [
    [0],
    [0, 3],
    [0, 3, 6, 7, 8, 11, 14]
  ]
}
)json";

inline constexpr std::string_view kToy2 = R"json({
  "skeleton_name": "toy2",
  "level_sizes": [1, 2],
  "joint_names": [["body"], ["joint_a", "joint_b"]],
  "edges": [[], [[0, 1]]],
  "center_joint": [0, 0],
  "root_joint": [0, 0],
  "up_maps": [[[0], [0]]],
  "keep_lists": [[0]]
}
)json";

}  // namespace kforge::graph::tables
