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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "facevsr/augment.hpp"
#include "facevsr/checkpoint.hpp"
#include "facevsr/diagnose.hpp"
#include "facevsr/eval.hpp"
#include "facevsr/geometry.hpp"
#include "facevsr/synthetic.hpp"
#include "facevsr/train.hpp"

namespace py = pybind11;
using namespace facevsr;

namespace {

Tensor tensor_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<int64_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<size_t>(i)] = a.shape(i);
  Tensor t(shape);
  std::copy(a.data(), a.data() + a.size(), t.data());
  return t;
}

py::array_t<double> array_from(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> a(shape);
  std::copy(t.data(), t.data() + t.numel(), a.mutable_data());
  return a;
}

geometry::SimilarityTransform transform_from(const py::dict& d) {
  geometry::SimilarityTransform t;
  t.scale = d["scale"].cast<double>();
  t.rotation = d["rotation"].cast<double>();
  t.tx = d["tx"].cast<double>();
  t.ty = d["ty"].cast<double>();
  return t;
}

py::dict transform_to(const geometry::SimilarityTransform& t) {
  py::dict d;
  d["scale"] = t.scale;
  d["rotation"] = t.rotation;
  d["tx"] = t.tx;
  d["ty"] = t.ty;
  return d;
}

std::vector<geometry::Point> points_from(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(1) != 2)
    throw InvalidArgument("expected an Nx2 point array");
  std::vector<geometry::Point> pts(static_cast<size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    pts[static_cast<size_t>(i)] = {a.at(i, 0), a.at(i, 1)};
  return pts;
}

nlohmann::json json_from(const py::object& obj) {
  const std::string dumped =
      py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return nlohmann::json::parse(dumped);
}

py::object json_to(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Face-based visual speech recognition toolkit (C++ core)";

  py::register_exception<Error>(m, "FacevsrError");

  // ---------------------------------------------------------------- data
  m.def(
      "generate_synthetic",
      [](const py::object& spec, const std::string& out_dir) {
        const auto ds =
            data::generate_synthetic(data::SyntheticSpec::from_json(json_from(spec)), out_dir);
        py::dict d;
        d["manifest"] = ds.manifest_path;
        d["root"] = ds.root;
        d["classes"] = ds.class_names;
        d["layout"] = json_to(ds.layout.to_json());
        return d;
      },
      py::arg("spec"), py::arg("out_dir"),
      "Render a deterministic synthetic talking-face corpus");

  m.def("synthetic_layout", [](const py::object& spec) {
    return json_to(data::synthetic_layout(data::SyntheticSpec::from_json(json_from(spec))).to_json());
  });

  m.def("load_manifest", [](const std::string& path) {
    const auto manifest = data::load_manifest(path);
    py::list entries;
    for (const auto& e : manifest.entries) {
      py::dict d;
      d["clip_id"] = e.clip_id;
      d["frames_path"] = e.resolved_frames_path();
      d["landmarks_path"] = e.resolved_landmarks_path();
      if (e.label) d["label"] = *e.label;
      if (e.transcript) d["transcript"] = *e.transcript;
      d["split"] = data::to_string(e.split);
      if (e.yaw_deg) d["yaw_deg"] = *e.yaw_deg;
      d["duration_frames"] = e.duration_frames;
      entries.append(d);
    }
    return entries;
  });

  m.def("load_clip_arrays", [](const std::string& manifest_path, const std::string& clip_id) {
    const auto manifest = data::load_manifest(manifest_path);
    for (const auto& e : manifest.entries) {
      if (e.clip_id != clip_id) continue;
      auto [clip, track] = data::load_clip(e);
      return py::make_tuple(array_from(clip.pixels), array_from(track.points));
    }
    throw InvalidArgument("clip_id not in manifest: " + clip_id);
  });

  // ------------------------------------------------------------- geometry
  m.def(
      "fit_similarity",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& src,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& dst) {
        return transform_to(geometry::fit_similarity(points_from(src), points_from(dst)));
      },
      py::arg("src"), py::arg("dst"),
      "Least-squares similarity transform (no reflection)");

  m.def("apply_similarity",
        [](const py::dict& t,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& pts) {
          const auto tr = transform_from(t);
          auto out = py::array_t<double>({pts.shape(0), py::ssize_t{2}});
          for (py::ssize_t i = 0; i < pts.shape(0); ++i) {
            const auto p = tr.apply({pts.at(i, 0), pts.at(i, 1)});
            out.mutable_at(i, 0) = p.x;
            out.mutable_at(i, 1) = p.y;
          }
          return out;
        });

  m.def(
      "smooth_landmarks",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& points,
         double sigma) {
        data::LandmarkTrack track;
        track.points = tensor_from(points);
        track.confidence.assign(static_cast<size_t>(track.frames()), 1.0);
        return array_from(geometry::smooth_landmarks(track, sigma).points);
      },
      py::arg("points"), py::arg("sigma") = 0.5,
      "Temporal Gaussian smoothing of a TxLx2 landmark track");

  m.def(
      "align_face",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& frame,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& landmarks,
         int out_h, int out_w) {
        const auto aligned = geometry::align_face(
            tensor_from(frame), tensor_from(landmarks),
            geometry::FaceTemplate::canonical(out_h, out_w));
        return py::make_tuple(array_from(aligned.image), transform_to(aligned.transform));
      },
      py::arg("frame"), py::arg("landmarks"), py::arg("out_h"), py::arg("out_w"));

  m.def("crop_roi",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& landmarks,
           const py::object& spec) {
          return array_from(geometry::crop_roi(tensor_from(image), tensor_from(landmarks),
                                               geometry::RoISpec::from_json(json_from(spec))));
        });

  // -------------------------------------------------------------- augment
  m.def(
      "cutout",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& clip,
         int patch_h, int patch_w, uint64_t seed, double apply_prob, double fill) {
        augment::CutoutConfig cfg{patch_h, patch_w, apply_prob, fill};
        Rng rng(seed);
        return array_from(augment::cutout(tensor_from(clip), cfg, rng));
      },
      py::arg("clip"), py::arg("patch_h"), py::arg("patch_w"), py::arg("seed") = 0,
      py::arg("apply_prob") = 1.0, py::arg("fill") = 0.0,
      "Zero one patch at the same position in every frame");

  m.def("random_crop_consistent",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& clip,
           int out_h, int out_w, uint64_t seed) {
          Rng rng(seed);
          return array_from(augment::random_crop_consistent(tensor_from(clip), out_h, out_w, rng));
        });
  m.def("center_crop",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& clip,
           int out_h, int out_w) {
          return array_from(augment::center_crop(tensor_from(clip), out_h, out_w));
        });
  m.def("hflip",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& clip,
           double prob, uint64_t seed) {
          Rng rng(seed);
          return array_from(augment::hflip(tensor_from(clip), rng, prob));
        });
  m.def("temporal_jitter",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& clip,
           double per_frame_prob, uint64_t seed) {
          Rng rng(seed);
          return array_from(augment::temporal_jitter(tensor_from(clip), per_frame_prob, rng));
        });

  // ----------------------------------------------------------------- eval
  m.def("edit_ops", [](const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    const auto ops = eval::edit_ops(ref, hyp);
    return py::make_tuple(ops.substitutions, ops.deletions, ops.insertions);
  });
  m.def("wer", [](const std::string& ref, const std::string& hyp) { return eval::wer(ref, hyp); });
  m.def("cer", &eval::cer);

  m.def(
      "ctc_greedy",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& post,
         const std::string& alphabet) {
        eval::Alphabet ab;
        ab.chars = alphabet;
        return eval::ctc_greedy(tensor_from(post), ab);
      },
      py::arg("posteriors"), py::arg("alphabet") = "abcdefghijklmnopqrstuvwxyz ");

  py::class_<eval::CharNGramLM>(m, "CharNGramLM")
      .def(py::init([](const std::vector<std::string>& corpus, int order, double add_k,
                       const std::string& alphabet) {
             eval::Alphabet ab;
             ab.chars = alphabet;
             return eval::fit_char_lm(corpus, order, add_k, ab);
           }),
           py::arg("corpus"), py::arg("order") = 5, py::arg("add_k") = 0.1,
           py::arg("alphabet") = "abcdefghijklmnopqrstuvwxyz ")
      .def("log_prob",
           [](const eval::CharNGramLM& lm, const std::string& ctx, const std::string& next) {
             if (next.size() != 1) throw InvalidArgument("next must be one character");
             return lm.log_prob(ctx, next[0]);
           })
      .def("sequence_log_prob", &eval::CharNGramLM::sequence_log_prob)
      .def("perplexity", &eval::CharNGramLM::perplexity);

  m.def(
      "ctc_beam_search",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& post,
         int beam_width, const eval::CharNGramLM* lm, double alpha, double beta,
         const std::string& alphabet) {
        eval::Alphabet ab;
        ab.chars = alphabet;
        const auto r = eval::ctc_beam_search(tensor_from(post), beam_width, lm, alpha, beta, ab);
        py::dict d;
        d["hypothesis"] = r.hypothesis;
        d["score"] = r.score;
        d["alternatives"] = r.alternatives;
        return d;
      },
      py::arg("posteriors"), py::arg("beam_width") = 100, py::arg("lm") = nullptr,
      py::arg("alpha") = 0.5, py::arg("beta") = 0.1,
      py::arg("alphabet") = "abcdefghijklmnopqrstuvwxyz ",
      "Prefix beam search with an optional character n-gram LM");

  // --------------------------------------------------------------- models
  py::class_<models::WordModel>(m, "WordModel")
      .def(py::init([](const py::object& config, uint64_t seed) {
             return models::WordModel(models::WordModelConfig::from_json(json_from(config)), seed);
           }),
           py::arg("config"), py::arg("seed") = 0)
      .def("forward",
           [](models::WordModel& self,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& clip) {
             models::Context ctx;
             Tensor t = tensor_from(clip);
             if (t.rank() == 4) {
               const auto& s = t.shape();
               t = t.reshaped({1, s[0], s[1], s[2], s[3]});
             }
             return array_from(models::softmax(self.forward(t, ctx)));
           },
           "Class probabilities for a TxHxWxC clip (or a NxTxHxWxC batch)")
      .def("frontend_features",
           [](models::WordModel& self,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& clip) {
             models::Context ctx;
             Tensor t = tensor_from(clip);
             if (t.rank() == 4) {
               const auto& s = t.shape();
               t = t.reshaped({1, s[0], s[1], s[2], s[3]});
             }
             return array_from(self.frontend_features(t, ctx));
           })
      .def("load_checkpoint",
           [](models::WordModel& self, const std::string& path_base) {
             self.load_state(models::Checkpoint::load(path_base).arrays, true);
           })
      .def("parameter_count",
           [](models::WordModel& self) { return self.config().parameter_count(); })
      .def("saliency",
           [](models::WordModel& self,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& clip,
              int target_class) {
             return array_from(
                 diagnose::guided_backprop_saliency(self, tensor_from(clip), target_class).values);
           });

  py::class_<models::SentenceModel>(m, "SentenceModel")
      .def(py::init([](const py::object& config, uint64_t seed) {
             return models::SentenceModel(
                 models::SentenceModelConfig::from_json(json_from(config)), seed);
           }),
           py::arg("config"), py::arg("seed") = 0)
      .def("forward",
           [](models::SentenceModel& self,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& clip) {
             models::Context ctx;
             Tensor t = tensor_from(clip);
             if (t.rank() == 4) {
               const auto& s = t.shape();
               t = t.reshaped({1, s[0], s[1], s[2], s[3]});
             }
             Tensor logits = self.forward(t, ctx);
             return array_from(models::softmax(logits.reshaped({logits.dim(1), logits.dim(2)})));
           },
           "Per-step distributions over alphabet+blank for one clip")
      .def("load_checkpoint",
           [](models::SentenceModel& self, const std::string& path_base) {
             self.load_state(models::Checkpoint::load(path_base).arrays, true);
           });

  m.def("word_config_default", [](int vocab) {
    return json_to(models::WordModelConfig::paper_default(vocab).to_json());
  });
  m.def("word_config_compact", [](int vocab, int input_h, int input_w, int channels, int hidden) {
    return json_to(
        models::WordModelConfig::compact(vocab, input_h, input_w, channels, hidden).to_json());
  }, py::arg("vocab"), py::arg("input_h"), py::arg("input_w"), py::arg("channels") = 8,
     py::arg("hidden") = 32);
  m.def("sentence_config_default", [](int alphabet) {
    return json_to(models::SentenceModelConfig::paper_default(alphabet).to_json());
  });
}
