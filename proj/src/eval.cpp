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

#include "facevsr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "facevsr/ctc.hpp"

namespace facevsr::eval {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

// ------------------------------------------------------------ edit metrics

EditOps edit_ops(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const int64_t n = static_cast<int64_t>(ref.size());
  const int64_t m = static_cast<int64_t>(hyp.size());

  // dp cell: (distance, substitutions in the preferred minimal script)
  struct Cell {
    int64_t dist, subs;
  };
  auto better = [](const Cell& a, const Cell& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.subs > b.subs;
  };

  std::vector<Cell> prev(static_cast<size_t>(m + 1)), cur(prev);
  for (int64_t j = 0; j <= m; ++j) prev[static_cast<size_t>(j)] = {j, 0};
  for (int64_t i = 1; i <= n; ++i) {
    cur[0] = {i, 0};
    for (int64_t j = 1; j <= m; ++j) {
      Cell best;
      if (ref[static_cast<size_t>(i - 1)] == hyp[static_cast<size_t>(j - 1)]) {
        best = prev[static_cast<size_t>(j - 1)];
      } else {
        best = {prev[static_cast<size_t>(j - 1)].dist + 1,
                prev[static_cast<size_t>(j - 1)].subs + 1};
      }
      const Cell del{prev[static_cast<size_t>(j)].dist + 1, prev[static_cast<size_t>(j)].subs};
      const Cell ins{cur[static_cast<size_t>(j - 1)].dist + 1, cur[static_cast<size_t>(j - 1)].subs};
      if (better(del, best)) best = del;
      if (better(ins, best)) best = ins;
      cur[static_cast<size_t>(j)] = best;
    }
    std::swap(prev, cur);
  }

  const Cell final = prev[static_cast<size_t>(m)];
  EditOps ops;
  ops.substitutions = final.subs;
  // D - I = len(ref) - len(hyp) for every script; D + I = dist - S.
  ops.deletions = (final.dist - final.subs + (n - m)) / 2;
  ops.insertions = (final.dist - final.subs - (n - m)) / 2;
  return ops;
}

EditOps edit_ops_chars(const std::string& ref, const std::string& hyp) {
  std::vector<std::string> r, h;
  for (char c : ref) r.emplace_back(1, c);
  for (char c : hyp) h.emplace_back(1, c);
  return edit_ops(r, h);
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
  if (ref.empty()) throw EmptyReference("WER needs a nonempty reference");
  return static_cast<double>(edit_ops(ref, hyp).total()) / static_cast<double>(ref.size());
}

double wer(const std::string& ref_sentence, const std::string& hyp_sentence) {
  const auto r = tokenize(ref_sentence);
  const auto h = tokenize(hyp_sentence);
  return wer(r, h);
}

double cer(const std::string& ref, const std::string& hyp) {
  if (ref.empty()) throw EmptyReference("CER needs a nonempty reference");
  return static_cast<double>(edit_ops_chars(ref, hyp).total()) /
         static_cast<double>(ref.size());
}

// ------------------------------------------------------------ CTC decoding

Alphabet Alphabet::lowercase_and_space() {
  Alphabet a;
  a.chars = "abcdefghijklmnopqrstuvwxyz ";
  return a;
}

std::string ctc_greedy(const Tensor& posteriors, const Alphabet& alphabet) {
  if (posteriors.rank() != 2 || posteriors.dim(1) != alphabet.size() + 1)
    throw ShapeMismatch("posteriors must be Tx(|V|+1)");
  const int64_t t_len = posteriors.dim(0), a = posteriors.dim(1);
  std::string out;
  int prev = alphabet.blank();
  for (int64_t t = 0; t < t_len; ++t) {
    int arg = 0;
    for (int64_t c = 1; c < a; ++c)
      if (posteriors.at({t, c}) > posteriors.at({t, arg})) arg = static_cast<int>(c);
    if (arg != alphabet.blank() && arg != prev)
      out += alphabet.chars[static_cast<size_t>(arg)];
    prev = arg;
  }
  return out;
}

// ------------------------------------------------------------- CharNGramLM

CharNGramLM::CharNGramLM(Alphabet alphabet, int order, double add_k)
    : alphabet_(std::move(alphabet)), order_(order), add_k_(add_k) {
  if (order_ < 1) throw InvalidArgument("LM order must be >= 1");
  counts_.resize(static_cast<size_t>(order_));
  totals_.resize(static_cast<size_t>(order_));
}

void CharNGramLM::fit(const std::vector<std::string>& corpus) {
  if (corpus.empty()) throw InvalidArgument("LM corpus is empty");
  const char begin = '\x02';
  for (const auto& seq : corpus) {
    const std::string padded = std::string(static_cast<size_t>(order_ - 1), begin) + seq +
                               std::string(1, kEnd);
    for (size_t pos = static_cast<size_t>(order_ - 1); pos < padded.size(); ++pos) {
      for (int k = 0; k < order_; ++k) {
        const std::string ctx = padded.substr(pos - static_cast<size_t>(k), static_cast<size_t>(k));
        counts_[static_cast<size_t>(k)][ctx][padded[pos]] += 1;
        totals_[static_cast<size_t>(k)][ctx] += 1;
      }
    }
  }
}

double CharNGramLM::prob_order(const std::string& padded_context, char next, int k) const {
  // Interpolated add-k: each order mixes its counts with the next shorter
  // context; the base case is uniform over alphabet + end marker.
  const double vocab = static_cast<double>(alphabet_.size() + 1);
  const double d = add_k_ * vocab;
  if (k < 0) return 1.0 / vocab;

  const std::string ctx = padded_context.substr(padded_context.size() - static_cast<size_t>(k));
  const auto& ctx_counts = counts_[static_cast<size_t>(k)];
  const auto& ctx_totals = totals_[static_cast<size_t>(k)];
  const auto tot_it = ctx_totals.find(ctx);
  const double total = tot_it == ctx_totals.end() ? 0.0 : static_cast<double>(tot_it->second);
  double count = 0.0;
  if (const auto it = ctx_counts.find(ctx); it != ctx_counts.end())
    if (const auto jt = it->second.find(next); jt != it->second.end())
      count = static_cast<double>(jt->second);
  return (count + d * prob_order(padded_context, next, k - 1)) / (total + d);
}

double CharNGramLM::log_prob(const std::string& context, char next) const {
  const char begin = '\x02';
  std::string padded = context;
  if (static_cast<int>(padded.size()) < order_ - 1)
    padded = std::string(static_cast<size_t>(order_ - 1) - padded.size(), begin) + padded;
  return std::log(prob_order(padded, next, order_ - 1));
}

double CharNGramLM::sequence_log_prob(const std::string& seq) const {
  double lp = 0.0;
  for (size_t i = 0; i < seq.size(); ++i) lp += log_prob(seq.substr(0, i), seq[i]);
  lp += log_prob(seq, kEnd);
  return lp;
}

double CharNGramLM::perplexity(const std::vector<std::string>& corpus) const {
  double lp = 0.0;
  int64_t events = 0;
  for (const auto& seq : corpus) {
    lp += sequence_log_prob(seq);
    events += static_cast<int64_t>(seq.size()) + 1;
  }
  return std::exp(-lp / static_cast<double>(events));
}

CharNGramLM fit_char_lm(const std::vector<std::string>& corpus, int order, double add_k,
                        Alphabet alphabet) {
  CharNGramLM lm(std::move(alphabet), order, add_k);
  lm.fit(corpus);
  return lm;
}

// --------------------------------------------------------- prefix beam

namespace {

struct BeamEntry {
  double lp_b = kNegInf;   // log Σ p over alignments ending in blank
  double lp_nb = kNegInf;  // … ending in the last symbol
  double vit_b = kNegInf;  // best single alignment, same split
  double vit_nb = kNegInf;
  double lm = 0.0;  // Σ log p_LM over the prefix characters
};

double total_log(const BeamEntry& e) { return models::log_add(e.lp_b, e.lp_nb); }
double viterbi_log(const BeamEntry& e) { return std::max(e.vit_b, e.vit_nb); }

}  // namespace

DecodeResult ctc_beam_search(const Tensor& posteriors, int beam_width,
                             const CharNGramLM* lm, double alpha, double beta,
                             const Alphabet& alphabet) {
  if (beam_width < 1) throw InvalidArgument("beam_width must be >= 1");
  if (posteriors.rank() != 2 || posteriors.dim(1) != alphabet.size() + 1)
    throw ShapeMismatch("posteriors must be Tx(|V|+1)");
  const int64_t t_len = posteriors.dim(0);
  const int a = alphabet.size();

  std::unordered_map<std::string, BeamEntry> beam;
  beam[""] = BeamEntry{0.0, kNegInf, 0.0, kNegInf, 0.0};

  auto lm_step = [&](const std::string& prefix, char c) {
    return lm ? lm->log_prob(prefix, c) : 0.0;
  };

  for (int64_t t = 0; t < t_len; ++t) {
    std::vector<double> lp(static_cast<size_t>(a) + 1);
    for (int c = 0; c <= a; ++c) {
      const double p = posteriors.at({t, c});
      lp[static_cast<size_t>(c)] = p > 0 ? std::log(p) : kNegInf;
    }
    const double lp_blank = lp[static_cast<size_t>(a)];

    std::unordered_map<std::string, BeamEntry> next;
    next.reserve(beam.size() * (static_cast<size_t>(a) + 1));

    for (const auto& [prefix, e] : beam) {
      // blank keeps the labeling
      {
        BeamEntry& ne = next[prefix];
        ne.lm = e.lm;
        ne.lp_b = models::log_add(ne.lp_b, total_log(e) + lp_blank);
        ne.vit_b = std::max(ne.vit_b, viterbi_log(e) + lp_blank);
      }
      for (int c = 0; c < a; ++c) {
        const char ch = alphabet.chars[static_cast<size_t>(c)];
        const double lpc = lp[static_cast<size_t>(c)];
        if (lpc == kNegInf) continue;
        const bool repeat = !prefix.empty() && prefix.back() == ch;
        if (repeat) {
          // same symbol again extends the last emission, labeling unchanged
          BeamEntry& ne = next[prefix];
          ne.lm = e.lm;
          ne.lp_nb = models::log_add(ne.lp_nb, e.lp_nb + lpc);
          ne.vit_nb = std::max(ne.vit_nb, e.vit_nb + lpc);
          // a new occurrence needs a blank in between
          BeamEntry& ng = next[prefix + ch];
          ng.lm = e.lm + lm_step(prefix, ch);
          ng.lp_nb = models::log_add(ng.lp_nb, e.lp_b + lpc);
          ng.vit_nb = std::max(ng.vit_nb, e.vit_b + lpc);
        } else {
          BeamEntry& ng = next[prefix + ch];
          ng.lm = e.lm + lm_step(prefix, ch);
          ng.lp_nb = models::log_add(ng.lp_nb, total_log(e) + lpc);
          ng.vit_nb = std::max(ng.vit_nb, viterbi_log(e) + lpc);
        }
      }
    }

    if (static_cast<int>(next.size()) > beam_width) {
      std::vector<std::pair<double, std::string>> ranked;
      ranked.reserve(next.size());
      for (const auto& [prefix, e] : next)
        ranked.emplace_back(viterbi_log(e) + alpha * e.lm +
                                beta * static_cast<double>(prefix.size()),
                            prefix);
      std::partial_sort(ranked.begin(), ranked.begin() + beam_width, ranked.end(),
                        [](const auto& x, const auto& y) {
                          return x.first != y.first ? x.first > y.first
                                                    : x.second < y.second;
                        });
      std::unordered_map<std::string, BeamEntry> pruned;
      for (int i = 0; i < beam_width; ++i)
        pruned.emplace(ranked[static_cast<size_t>(i)].second,
                       next[ranked[static_cast<size_t>(i)].second]);
      beam = std::move(pruned);
    } else {
      beam = std::move(next);
    }
  }

  // Final ranking uses the marginal probability plus the LM end transition.
  std::vector<std::pair<std::string, double>> finals;
  finals.reserve(beam.size());
  for (const auto& [prefix, e] : beam) {
    double score = total_log(e) + beta * static_cast<double>(prefix.size());
    if (lm) score += alpha * (e.lm + lm->log_prob(prefix, CharNGramLM::kEnd));
    finals.emplace_back(prefix, score);
  }
  std::sort(finals.begin(), finals.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second > y.second : x.first < y.first;
  });

  DecodeResult result;
  result.hypothesis = finals.front().first;
  result.score = finals.front().second;
  const size_t keep = std::min<size_t>(finals.size(), static_cast<size_t>(beam_width));
  result.alternatives.assign(finals.begin(), finals.begin() + static_cast<int64_t>(keep));
  result.per_step_posteriors = posteriors;
  return result;
}

// ---------------------------------------------------------------- reports

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["task"] = task;
  j["num_clips"] = num_clips;
  if (task == "word") j["accuracy"] = accuracy;
  if (task == "sentence") {
    j["wer"] = wer;
    j["cer"] = cer;
  }
  auto stat_list = [](const std::vector<ClassStat>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : v)
      out.push_back({{"name", s.name}, {"correct", s.correct}, {"total", s.total},
                     {"accuracy", s.accuracy()}});
    return out;
  };
  j["per_class"] = stat_list(per_class);
  j["best_classes"] = stat_list(best_classes);
  j["worst_classes"] = stat_list(worst_classes);
  nlohmann::json conf = nlohmann::json::array();
  for (const auto& c : confusions)
    conf.push_back({{"target", c.target}, {"predicted", c.predicted}, {"count", c.count}});
  j["confusions"] = conf;
  auto bucket_list = [](const std::vector<BucketStat>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& b : v)
      out.push_back({{"label", b.label}, {"metric", b.metric}, {"count", b.count}});
    return out;
  };
  if (!pose_bins.empty()) {
    j["pose_bins"] = bucket_list(pose_bins);
    j["pose_nested"] = bucket_list(pose_nested);
  }
  return j;
}

void EvalReport::write_confusion_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << "target,predicted,count\n";
  for (const auto& c : confusions)
    f << c.target << "," << c.predicted << "," << c.count << "\n";
}

namespace {

void fill_pose_buckets(EvalReport& report,
                       const std::vector<std::optional<double>>& yaw,
                       const std::vector<double>& per_clip_metric,
                       const PoseBucketConfig& cfg, bool metric_is_error) {
  for (size_t i = 0; i < yaw.size(); ++i)
    if (!yaw[i]) throw MissingYaw("pose buckets requested but clip " +
                                  std::to_string(i) + " has no yaw_deg");
  auto thresholds = cfg.thresholds;
  std::sort(thresholds.begin(), thresholds.end());

  auto aggregate = [&](auto pred) -> std::pair<double, int64_t> {
    double acc = 0;
    int64_t n = 0;
    for (size_t i = 0; i < yaw.size(); ++i)
      if (pred(*yaw[i])) {
        acc += per_clip_metric[i];
        ++n;
      }
    return {n ? acc / static_cast<double>(n) : 0.0, n};
  };

  // disjoint exhaustive bins
  double lo = 0.0;
  for (size_t k = 0; k <= thresholds.size(); ++k) {
    const double hi = k < thresholds.size() ? thresholds[k]
                                            : std::numeric_limits<double>::infinity();
    const auto [m, n] = aggregate([&](double y) { return y >= lo && y < hi; });
    std::ostringstream label;
    if (k < thresholds.size())
      label << "[" << lo << "," << hi << ")";
    else
      label << ">=" << lo;
    report.pose_bins.push_back({label.str(), m, n});
    lo = hi;
  }

  // nested view with the conventional difficulty labels
  static const char* kNames[3] = {"easy", "medium", "hard"};
  for (size_t k = 0; k < thresholds.size() && k < 3; ++k) {
    const double th = thresholds[k];
    const auto [m, n] = aggregate([&](double y) { return y >= th; });
    std::ostringstream label;
    label << kNames[k] << "(yaw>=" << th << ")";
    report.pose_nested.push_back({label.str(), m, n});
  }
  const auto [m_all, n_all] = aggregate([](double) { return true; });
  report.pose_nested.push_back({"all", m_all, n_all});
  (void)metric_is_error;
}

}  // namespace

EvalReport report_word(const std::vector<std::string>& targets,
                       const std::vector<std::string>& predictions,
                       const std::vector<std::optional<double>>& yaw,
                       const std::optional<PoseBucketConfig>& buckets) {
  if (targets.size() != predictions.size())
    throw InvalidArgument("targets/predictions size mismatch");
  EvalReport report;
  report.task = "word";
  report.num_clips = static_cast<int64_t>(targets.size());

  std::map<std::string, ClassStat> stats;
  std::map<std::pair<std::string, std::string>, int64_t> conf;
  int64_t correct = 0;
  std::vector<double> per_clip;
  per_clip.reserve(targets.size());
  for (size_t i = 0; i < targets.size(); ++i) {
    auto& s = stats[targets[i]];
    s.name = targets[i];
    ++s.total;
    const bool ok = targets[i] == predictions[i];
    if (ok) {
      ++s.correct;
      ++correct;
    } else {
      ++conf[{targets[i], predictions[i]}];
    }
    per_clip.push_back(ok ? 1.0 : 0.0);
  }
  report.accuracy = targets.empty() ? 0.0 : static_cast<double>(correct) / targets.size();

  for (auto& [name, s] : stats) report.per_class.push_back(s);
  auto by_acc = report.per_class;
  std::stable_sort(by_acc.begin(), by_acc.end(), [](const auto& a, const auto& b) {
    return a.accuracy() > b.accuracy();
  });
  const size_t k = std::min<size_t>(5, by_acc.size());
  report.best_classes.assign(by_acc.begin(), by_acc.begin() + static_cast<int64_t>(k));
  report.worst_classes.assign(by_acc.end() - static_cast<int64_t>(k), by_acc.end());
  std::reverse(report.worst_classes.begin(), report.worst_classes.end());

  for (const auto& [pair, count] : conf)
    report.confusions.push_back({pair.first, pair.second, count});
  std::stable_sort(report.confusions.begin(), report.confusions.end(),
                   [](const auto& a, const auto& b) { return a.count > b.count; });

  if (buckets) fill_pose_buckets(report, yaw, per_clip, *buckets, false);
  return report;
}

EvalReport report_sentence(const std::vector<std::string>& refs,
                           const std::vector<std::string>& hyps,
                           const std::vector<std::optional<double>>& yaw,
                           const std::optional<PoseBucketConfig>& buckets) {
  if (refs.size() != hyps.size()) throw InvalidArgument("refs/hyps size mismatch");
  EvalReport report;
  report.task = "sentence";
  report.num_clips = static_cast<int64_t>(refs.size());

  int64_t word_err = 0, word_len = 0, char_err = 0, char_len = 0;
  std::vector<double> per_clip;
  per_clip.reserve(refs.size());
  for (size_t i = 0; i < refs.size(); ++i) {
    const auto r = tokenize(refs[i]);
    const auto h = tokenize(hyps[i]);
    const EditOps w_ops = edit_ops(r, h);
    const EditOps c_ops = edit_ops_chars(refs[i], hyps[i]);
    word_err += w_ops.total();
    word_len += static_cast<int64_t>(r.size());
    char_err += c_ops.total();
    char_len += static_cast<int64_t>(refs[i].size());
    per_clip.push_back(r.empty() ? 0.0
                                 : static_cast<double>(w_ops.total()) / r.size());
  }
  report.wer = word_len ? static_cast<double>(word_err) / word_len : 0.0;
  report.cer = char_len ? static_cast<double>(char_err) / char_len : 0.0;

  if (buckets) fill_pose_buckets(report, yaw, per_clip, *buckets, true);
  return report;
}

nlohmann::json DecodeConfig::to_json() const {
  return {{"greedy", greedy}, {"beam_width", beam_width}, {"alpha", alpha}, {"beta", beta}};
}

DecodeConfig DecodeConfig::from_json(const nlohmann::json& j) {
  DecodeConfig d;
  d.greedy = j.value("greedy", false);
  d.beam_width = j.value("beam_width", 100);
  d.alpha = j.value("alpha", 0.5);
  d.beta = j.value("beta", 0.1);
  if (d.beam_width < 1) throw InvalidArgument("beam_width must be >= 1");
  return d;
}

std::vector<int> predict_word_labels(models::WordModel& model,
                                     const data::PreparedDataset& dataset,
                                     data::Split split) {
  models::Context ctx;
  ctx.mode = models::Mode::kEval;
  std::vector<int> out;
  for (int64_t idx : dataset.split_indices(split)) {
    const auto& clip = dataset.clips[static_cast<size_t>(idx)];
    const auto& s = clip.pixels.shape();
    Tensor batch = clip.pixels.reshaped({1, s[0], s[1], s[2], s[3]});
    const Tensor logits = model.forward(batch, ctx);
    int arg = 0;
    for (int64_t c = 1; c < logits.dim(1); ++c)
      if (logits.at({0, c}) > logits.at({0, arg})) arg = static_cast<int>(c);
    out.push_back(arg);
  }
  return out;
}

EvalReport evaluate_word_model(models::WordModel& model,
                               const data::PreparedDataset& dataset, data::Split split,
                               const std::optional<PoseBucketConfig>& buckets) {
  const auto indices = dataset.split_indices(split);
  const auto preds = predict_word_labels(model, dataset, split);
  std::vector<std::string> targets, predictions;
  std::vector<std::optional<double>> yaw;
  for (size_t i = 0; i < indices.size(); ++i) {
    const auto& clip = dataset.clips[static_cast<size_t>(indices[i])];
    targets.push_back(clip.target);
    predictions.push_back(dataset.class_names[static_cast<size_t>(preds[i])]);
    yaw.push_back(clip.yaw_deg);
  }
  return report_word(targets, predictions, yaw, buckets);
}

EvalReport evaluate_sentence_model(models::SentenceModel& model,
                                   const data::PreparedDataset& dataset, data::Split split,
                                   const DecodeConfig& decode, const CharNGramLM* lm,
                                   const std::optional<PoseBucketConfig>& buckets) {
  models::Context ctx;
  ctx.mode = models::Mode::kEval;
  const Alphabet alphabet = Alphabet::lowercase_and_space();

  std::vector<std::string> refs, hyps;
  std::vector<std::optional<double>> yaw;
  for (int64_t idx : dataset.split_indices(split)) {
    const auto& clip = dataset.clips[static_cast<size_t>(idx)];
    const auto& s = clip.pixels.shape();
    Tensor batch = clip.pixels.reshaped({1, s[0], s[1], s[2], s[3]});
    Tensor logits = model.forward(batch, ctx);
    Tensor post = models::softmax(logits.reshaped({logits.dim(1), logits.dim(2)}));
    std::string hyp;
    if (decode.greedy) {
      hyp = ctc_greedy(post, alphabet);
    } else {
      hyp = ctc_beam_search(post, decode.beam_width, lm, decode.alpha, decode.beta, alphabet)
                .hypothesis;
    }
    refs.push_back(clip.target);
    hyps.push_back(hyp);
    yaw.push_back(clip.yaw_deg);
  }
  return report_sentence(refs, hyps, yaw, buckets);
}

}  // namespace facevsr::eval
