// Copyright 2026 The FaceVSR Authors
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

#ifndef FACEVSR_CHECKPOINT_HPP_
#define FACEVSR_CHECKPOINT_HPP_

#include <map>
#include <string>

#include <json.hpp>

#include "facevsr/tensor.hpp"

namespace facevsr::models {

/// Named-array archive (<base>.bin) plus a JSON sidecar (<base>.json)
/// carrying {config_hash, stage, epoch, metrics}. Loading in strict mode
/// requires a matching config hash; partial mode filters names by prefix
/// (the front-end transfer path).
struct Checkpoint {
  std::map<std::string, Tensor> arrays;
  std::string config_hash;
  std::string stage;
  int epoch = 0;
  nlohmann::json metrics = nlohmann::json::object();

  void save(const std::string& path_base) const;
  static Checkpoint load(const std::string& path_base);
};

}  // namespace facevsr::models

#endif  // FACEVSR_CHECKPOINT_HPP_
