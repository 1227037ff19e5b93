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

#ifndef FACEVSR_PNG_IO_HPP_
#define FACEVSR_PNG_IO_HPP_

#include <string>

#include "facevsr/tensor.hpp"

namespace facevsr {

/// Reads an 8-bit PNG into an H×W×C tensor scaled to [0,1]. Grayscale stays
/// C=1, anything with color is expanded to C=3 (alpha is dropped).
/// Throws UnreadableFrame on any decode problem.
Tensor read_png(const std::string& path);

/// Writes an H×W×C tensor in [0,1] as an 8-bit PNG (C must be 1 or 3).
/// Values are clamped and rounded; encoding settings are fixed so identical
/// pixels give byte-identical files.
void write_png(const std::string& path, const Tensor& image);

}  // namespace facevsr

#endif  // FACEVSR_PNG_IO_HPP_
