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

#ifndef FACEVSR_EVAL_HPP_
#define FACEVSR_EVAL_HPP_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "facevsr/dataset.hpp"
#include "facevsr/models.hpp"

namespace facevsr::eval {

// ------------------------------------------------------------ edit metrics

struct EditOps {
  int64_t substitutions = 0;
  int64_t deletions = 0;
  int64_t insertions = 0;
  int64_t total() const { return substitutions + deletions + insertions; }
  bool operator==(const EditOps&) const = default;
};

/// Minimal-edit-distance alignment counts. Among all minimal scripts the
/// one with the most substitutions is reported (a substitution is preferred
/// over an insert+delete pair).
EditOps edit_ops(std::span<const std::string> ref, std::span<const std::string> hyp);
EditOps edit_ops_chars(const std::string& ref, const std::string& hyp);

std::vector<std::string> tokenize(const std::string& s);

/// (S+D+I)/len(ref); may exceed 1. Throws EmptyReference.
double wer(std::span<const std::string> ref, std::span<const std::string> hyp);
double wer(const std::string& ref_sentence, const std::string& hyp_sentence);
double cer(const std::string& ref, const std::string& hyp);

// ------------------------------------------------------------ CTC decoding

struct Alphabet {
  std::string chars;  // token index -> character; blank is index chars.size()
  int size() const { return static_cast<int>(chars.size()); }
  int blank() const { return size(); }
  static Alphabet lowercase_and_space();
};

/// Per-step argmax, collapse adjacent repeats, drop blanks.
/// posteriors: T×(|V|+1), rows are distributions, blank last.
std::string ctc_greedy(const Tensor& posteriors, const Alphabet& alphabet);

/// Character n-gram model with interpolated add-k smoothing: each order
/// backs off to the next shorter context, so every conditional distribution
/// over (alphabet ∪ end-marker) sums to one exactly.
class CharNGramLM {
 public:
  static constexpr char kEnd = '\x03';

  CharNGramLM() = default;
  CharNGramLM(Alphabet alphabet, int order, double add_k);

  void fit(const std::vector<std::string>& corpus);

  int order() const { return order_; }
  const Alphabet& alphabet() const { return alphabet_; }

  /// log p(next | context); context is the raw preceding text (it is
  /// truncated/padded internally). `next` may be kEnd.
  double log_prob(const std::string& context, char next) const;
  /// Σ log p over the sequence including the end-marker transition.
  double sequence_log_prob(const std::string& seq) const;
  double perplexity(const std::vector<std::string>& corpus) const;

 private:
  double prob_order(const std::string& padded_context, char next, int k) const;

  Alphabet alphabet_;
  int order_ = 5;
  double add_k_ = 0.1;
  // context-string -> (next-char -> count), per order
  std::vector<std::map<std::string, std::map<char, int64_t>>> counts_;
  std::vector<std::map<std::string, int64_t>> totals_;
};

CharNGramLM fit_char_lm(const std::vector<std::string>& corpus, int order = 5,
                        double add_k = 0.1, Alphabet alphabet = Alphabet::lowercase_and_space());

struct DecodeResult {
  std::string hypothesis;
  double score = 0.0;  // log p_CTC + alpha·log p_LM + beta·|tokens|
  std::vector<std::pair<std::string, double>> alternatives;  // sorted desc
  Tensor per_step_posteriors;  // retained for saliency targets
};

/// Prefix beam search merging blank/non-blank probabilities per labeling.
/// Pruning ranks prefixes by their best single alignment (plus the LM and
/// length terms), so a width-1 beam degenerates to the greedy path; final
/// ranking uses the full marginal score. With a width that saturates the
/// prefix count the result is the exact argmax over labelings.
DecodeResult ctc_beam_search(const Tensor& posteriors, int beam_width,
                             const CharNGramLM* lm, double alpha, double beta,
                             const Alphabet& alphabet);

// ---------------------------------------------------------------- reports

struct ClassStat {
  std::string name;
  int64_t correct = 0;
  int64_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

struct ConfusionPair {
  std::string target, predicted;
  int64_t count = 0;
};

struct BucketStat {
  std::string label;
  double metric = 0.0;  // accuracy (word) or WER (sentence)
  int64_t count = 0;
};

struct EvalReport {
  std::string task;  // "word" | "sentence"
  int64_t num_clips = 0;
  double accuracy = 0.0;           // word task
  double wer = 0.0, cer = 0.0;     // sentence task
  std::vector<ClassStat> per_class;
  std::vector<ClassStat> best_classes, worst_classes;
  std::vector<ConfusionPair> confusions;  // sorted by count desc
  std::vector<BucketStat> pose_bins;      // disjoint, exhaustive
  std::vector<BucketStat> pose_nested;    // easy/medium/hard/all view

  nlohmann::json to_json() const;
  void write_confusion_csv(const std::string& path) const;
};

struct PoseBucketConfig {
  std::vector<double> thresholds{20.0, 40.0, 60.0};
};

/// Builds the word-task report from (target, prediction) pairs.
EvalReport report_word(const std::vector<std::string>& targets,
                       const std::vector<std::string>& predictions,
                       const std::vector<std::optional<double>>& yaw,
                       const std::optional<PoseBucketConfig>& buckets);

EvalReport report_sentence(const std::vector<std::string>& refs,
                           const std::vector<std::string>& hyps,
                           const std::vector<std::optional<double>>& yaw,
                           const std::optional<PoseBucketConfig>& buckets);

struct DecodeConfig {
  bool greedy = false;
  int beam_width = 100;
  double alpha = 0.5;
  double beta = 0.1;

  nlohmann::json to_json() const;
  static DecodeConfig from_json(const nlohmann::json& j);
};

/// Deterministic single pass of a model over one split.
EvalReport evaluate_word_model(models::WordModel& model,
                               const data::PreparedDataset& dataset, data::Split split,
                               const std::optional<PoseBucketConfig>& buckets);

EvalReport evaluate_sentence_model(models::SentenceModel& model,
                                   const data::PreparedDataset& dataset, data::Split split,
                                   const DecodeConfig& decode, const CharNGramLM* lm,
                                   const std::optional<PoseBucketConfig>& buckets);

/// Word-model predictions for one split (index into dataset.class_names).
std::vector<int> predict_word_labels(models::WordModel& model,
                                     const data::PreparedDataset& dataset,
                                     data::Split split);

}  // namespace facevsr::eval

#endif  // FACEVSR_EVAL_HPP_
