# Copyright 2026 The FaceVSR Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Face-based visual speech recognition toolkit.

The heavy lifting lives in the C++ extension; this package re-exports it.
"""

from ._core import (  # noqa: F401
    CharNGramLM,
    FacevsrError,
    SentenceModel,
    WordModel,
    align_face,
    apply_similarity,
    center_crop,
    cer,
    crop_roi,
    ctc_beam_search,
    ctc_greedy,
    cutout,
    edit_ops,
    fit_similarity,
    generate_synthetic,
    hflip,
    load_clip_arrays,
    load_manifest,
    random_crop_consistent,
    sentence_config_default,
    smooth_landmarks,
    synthetic_layout,
    temporal_jitter,
    wer,
    word_config_compact,
    word_config_default,
)

__all__ = [
    "CharNGramLM",
    "FacevsrError",
    "SentenceModel",
    "WordModel",
    "align_face",
    "apply_similarity",
    "center_crop",
    "cer",
    "crop_roi",
    "ctc_beam_search",
    "ctc_greedy",
    "cutout",
    "edit_ops",
    "fit_similarity",
    "generate_synthetic",
    "hflip",
    "load_clip_arrays",
    "load_manifest",
    "random_crop_consistent",
    "sentence_config_default",
    "smooth_landmarks",
    "synthetic_layout",
    "temporal_jitter",
    "wer",
    "word_config_compact",
    "word_config_default",
]
