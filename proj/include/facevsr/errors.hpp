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

#ifndef FACEVSR_ERRORS_HPP_
#define FACEVSR_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace facevsr {

/// Base class for all library errors. Every error carries a stable
/// `code()` string suitable for structured CLI output.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

#define FACEVSR_DEFINE_ERROR(NAME)                        \
  class NAME : public Error {                             \
   public:                                                \
    explicit NAME(const std::string& msg)                 \
        : Error(#NAME, std::string(#NAME) + ": " + msg) {} \
  }

// data
FACEVSR_DEFINE_ERROR(MalformedEntry);
FACEVSR_DEFINE_ERROR(DuplicateClipId);
FACEVSR_DEFINE_ERROR(MissingLabelAndTranscript);
FACEVSR_DEFINE_ERROR(FrameCountMismatch);
FACEVSR_DEFINE_ERROR(UnreadableFrame);

// geometry
FACEVSR_DEFINE_ERROR(DegenerateConfiguration);
FACEVSR_DEFINE_ERROR(RegionOutOfFrame);

// augment
FACEVSR_DEFINE_ERROR(PatchLargerThanFrame);
FACEVSR_DEFINE_ERROR(CropLargerThanFrame);

// models / train
FACEVSR_DEFINE_ERROR(ShapeMismatch);
FACEVSR_DEFINE_ERROR(ConfigMismatch);
FACEVSR_DEFINE_ERROR(DivergenceDetected);
FACEVSR_DEFINE_ERROR(UnknownLayer);

// eval
FACEVSR_DEFINE_ERROR(EmptyReference);
FACEVSR_DEFINE_ERROR(MissingYaw);

// generic
FACEVSR_DEFINE_ERROR(InvalidArgument);
FACEVSR_DEFINE_ERROR(IoError);

#undef FACEVSR_DEFINE_ERROR

}  // namespace facevsr

#endif  // FACEVSR_ERRORS_HPP_
