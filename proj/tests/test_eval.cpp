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

#include <doctest.h>

#include <cmath>

#include "facevsr/eval.hpp"
#include "facevsr/rng.hpp"
#include "oracles.hpp"

using namespace facevsr;
using eval::Alphabet;

namespace {

std::vector<std::string> random_tokens(Rng& rng, int max_len, int alphabet) {
  const int len = static_cast<int>(rng.uniform_int(0, max_len));
  std::vector<std::string> out;
  for (int i = 0; i < len; ++i)
    out.emplace_back(1, static_cast<char>('a' + rng.uniform_int(0, alphabet - 1)));
  return out;
}

Tensor random_posteriors(Rng& rng, int t, int symbols) {
  Tensor post({t, symbols});
  for (int64_t r = 0; r < t; ++r) {
    double z = 0;
    for (int64_t c = 0; c < symbols; ++c) {
      post.at({r, c}) = -std::log(1.0 - rng.uniform());  // Exp(1) -> Dirichlet(1)
      z += post.at({r, c});
    }
    for (int64_t c = 0; c < symbols; ++c) post.at({r, c}) /= z;
  }
  return post;
}

Alphabet tiny_alphabet(int v) {
  Alphabet a;
  a.chars = std::string("abc").substr(0, static_cast<size_t>(v));
  return a;
}

}  // namespace

TEST_CASE("edit_ops: basic cases") {
  const std::vector<std::string> a{"x", "y", "z"};
  CHECK(eval::edit_ops(a, a) == eval::EditOps{0, 0, 0});

  const std::vector<std::string> empty;
  CHECK(eval::edit_ops(a, empty) == eval::EditOps{0, 3, 0});
  CHECK(eval::edit_ops(empty, a) == eval::EditOps{0, 0, 3});
  CHECK(eval::edit_ops(empty, empty) == eval::EditOps{0, 0, 0});
}

TEST_CASE("edit_ops: paper transcript spot check") {
  const auto ref = eval::tokenize("lay white in u four now");
  const auto hyp = eval::tokenize("lay white at o four now");
  const auto ops = eval::edit_ops(ref, hyp);
  CHECK(ops == eval::EditOps{2, 0, 0});  // two substituted words
  CHECK(eval::wer("lay white in u four now", "lay white at o four now") ==
        doctest::Approx(2.0 / 6.0));
}

TEST_CASE("edit_ops: substitutions preferred over insert+delete pairs") {
  const std::vector<std::string> ref{"a", "b"};
  const std::vector<std::string> hyp{"b", "a"};
  // distance 2 either as 2 subs or as delete+insert; subs win
  CHECK(eval::edit_ops(ref, hyp) == eval::EditOps{2, 0, 0});
}

TEST_CASE("edit_ops: matches the exhaustive edit-script oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto ref = random_tokens(rng, 8, 3);
    const auto hyp = random_tokens(rng, 8, 3);
    const auto got = eval::edit_ops(ref, hyp);
    const auto want = oracles::edit_script_search(ref, hyp);
    CHECK(got.total() == want.total());
    CHECK(got.substitutions == want.subs);
    CHECK(got.deletions == want.dels);
    CHECK(got.insertions == want.ins);
  }
}

TEST_CASE("edit_ops: symmetry and triangle inequality") {
  Rng rng(55);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_tokens(rng, 6, 3);
    const auto b = random_tokens(rng, 6, 3);
    const auto c = random_tokens(rng, 6, 3);
    const auto ab = eval::edit_ops(a, b);
    const auto ba = eval::edit_ops(b, a);
    CHECK(ab.substitutions == ba.substitutions);  // S symmetric
    CHECK(ab.deletions == ba.insertions);         // D and I swap roles
    CHECK(ab.insertions == ba.deletions);
    CHECK(eval::edit_ops(a, c).total() <= ab.total() + eval::edit_ops(b, c).total());
  }
}

TEST_CASE("wer: edge cases") {
  CHECK(eval::wer("a b c d", "") == doctest::Approx(1.0));  // all deletions
  CHECK(eval::wer("a b", "a b x y") == doctest::Approx(1.0));  // 2 insertions / 2
  CHECK_THROWS_AS(eval::wer("", "something"), EmptyReference);

  // single-word task: Acc = 1 - WER exactly
  int correct = 0;
  const std::vector<std::pair<std::string, std::string>> pairs{
      {"bin", "bin"}, {"bin", "lay"}, {"set", "set"}, {"red", "blue"}};
  double wer_sum = 0;
  for (const auto& [r, h] : pairs) {
    wer_sum += eval::wer(r, h);
    if (r == h) ++correct;
  }
  const double acc = static_cast<double>(correct) / pairs.size();
  CHECK(acc == doctest::Approx(1.0 - wer_sum / pairs.size()));
}

TEST_CASE("ctc_greedy: collapse rules") {
  Alphabet ab = tiny_alphabet(2);
  // argmax path [a, a, blank, b] -> "ab"
  Tensor post({4, 3});
  post.fill(0.1);
  post.at({0, 0}) = 0.8;
  post.at({1, 0}) = 0.8;
  post.at({2, 2}) = 0.8;
  post.at({3, 1}) = 0.8;
  CHECK(eval::ctc_greedy(post, ab) == "ab");

  Tensor blanks({3, 3});
  blanks.fill(0.0);
  for (int t = 0; t < 3; ++t) blanks.at({t, 2}) = 1.0;
  CHECK(eval::ctc_greedy(blanks, ab) == "");
}

TEST_CASE("ctc_beam_search: width 1 equals greedy on random posteriors") {
  Rng rng(99);
  const Alphabet ab = tiny_alphabet(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor post = random_posteriors(rng, 5, 4);
    const auto beam = eval::ctc_beam_search(post, 1, nullptr, 0.0, 0.0, ab);
    CHECK(beam.hypothesis == eval::ctc_greedy(post, ab));
  }
}

TEST_CASE("ctc_beam_search: saturating width equals exhaustive maximization") {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int v = 2 + static_cast<int>(rng.uniform_int(0, 1));
    const int t = 3 + static_cast<int>(rng.uniform_int(0, 3));
    const Alphabet ab = tiny_alphabet(v);
    const Tensor post = random_posteriors(rng, t, v + 1);

    int width = 0;  // saturate: more than the number of labelings
    for (int l = 0, p = 1; l <= t; ++l, p *= v) width += p;
    const auto beam = eval::ctc_beam_search(post, width + 8, nullptr, 0.0, 0.0, ab);
    const auto [best, best_score] = oracles::exhaustive_ctc_best(post, ab, nullptr, 0.0, 0.0);
    CHECK(beam.hypothesis == best);
    CHECK(beam.score == doctest::Approx(best_score).epsilon(1e-9));
  }
}

TEST_CASE("ctc_beam_search: exhaustive equivalence with an LM in the score") {
  Rng rng(13);
  const Alphabet ab = tiny_alphabet(3);
  const std::vector<std::string> corpus{"abc", "abca", "bca", "cab", "abc", "bc"};
  const auto lm = eval::fit_char_lm(corpus, 3, 0.1, ab);

  for (int trial = 0; trial < 25; ++trial) {
    const Tensor post = random_posteriors(rng, 5, 4);
    const auto beam = eval::ctc_beam_search(post, 4096, &lm, 0.7, 0.3, ab);
    const auto [best, best_score] = oracles::exhaustive_ctc_best(post, ab, &lm, 0.7, 0.3);
    CHECK(beam.hypothesis == best);
    CHECK(beam.score == doctest::Approx(best_score).epsilon(1e-9));
  }
}

TEST_CASE("ctc_beam_search: hypothesis score >= greedy score, monotone in width") {
  Rng rng(31);
  const Alphabet ab = tiny_alphabet(3);
  for (int trial = 0; trial < 40; ++trial) {
    const Tensor post = random_posteriors(rng, 6, 4);
    const std::string greedy = eval::ctc_greedy(post, ab);

    double prev_score = -1e300;
    double greedy_score = 0;
    {
      // score the greedy hypothesis under the sum-semiring scoring function
      const auto probs = oracles::ctc_labeling_probs(post, ab);
      const auto it = probs.find(greedy);
      greedy_score = it == probs.end() || it->second <= 0 ? -1e300 : std::log(it->second);
    }
    for (int width : {1, 2, 4, 8, 32, 4096}) {
      const auto r = eval::ctc_beam_search(post, width, nullptr, 0.0, 0.0, ab);
      CHECK(r.score >= prev_score - 1e-12);  // widening never lowers the best score
      prev_score = r.score;
    }
    CHECK(prev_score >= greedy_score - 1e-12);
  }
}

TEST_CASE("ctc_beam_search: alternatives are sorted and led by the hypothesis") {
  Rng rng(77);
  const Alphabet ab = tiny_alphabet(2);
  const Tensor post = random_posteriors(rng, 4, 3);
  const auto r = eval::ctc_beam_search(post, 16, nullptr, 0.0, 0.0, ab);
  REQUIRE(!r.alternatives.empty());
  CHECK(r.alternatives.front().first == r.hypothesis);
  for (size_t i = 1; i < r.alternatives.size(); ++i)
    CHECK(r.alternatives[i - 1].second >= r.alternatives[i].second);
}

TEST_CASE("char LM: single-sequence direction and normalization") {
  const Alphabet ab = tiny_alphabet(3);
  const auto lm = eval::fit_char_lm({"ab"}, 5, 0.1, ab);

  // after 'a', 'b' is the most probable continuation
  const double pb = lm.log_prob("a", 'b');
  for (char c : std::string("ac"))
    CHECK(pb > lm.log_prob("a", c));

  // every context's conditional sums to one (alphabet + end marker)
  for (const std::string ctx : {"", "a", "ab", "ba", "bbbb", "abab"}) {
    double sum = 0;
    for (char c : ab.chars) sum += std::exp(lm.log_prob(ctx, c));
    sum += std::exp(lm.log_prob(ctx, eval::CharNGramLM::kEnd));
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("char LM: 5-gram beats unigram perplexity on grammar text") {
  // tiny fixed-grammar corpus in the GRID spirit
  const std::vector<std::string> grammar{
      "bin blue at a one now", "lay red by b two please", "set green at c three now",
      "bin white by d four please", "lay blue at e five now", "set red by f six please",
      "bin green at g seven now", "lay white by h eight please"};
  std::vector<std::string> train(grammar.begin(), grammar.begin() + 6);
  std::vector<std::string> held(grammar.begin() + 6, grammar.end());

  const auto lm5 = eval::fit_char_lm(train, 5, 0.1);
  const auto lm1 = eval::fit_char_lm(train, 1, 0.1);
  CHECK(lm5.perplexity(held) < lm1.perplexity(held));
}

TEST_CASE("uniform LM shifts scores without changing fixed-length ranking") {
  Rng rng(404);
  const Alphabet ab = tiny_alphabet(2);
  // a uniform LM: fit on text containing every symbol equally, order 1,
  // huge smoothing -> near-uniform conditionals
  const auto uniform = eval::fit_char_lm({"ab", "ba"}, 1, 1e9, ab);

  for (int trial = 0; trial < 20; ++trial) {
    const Tensor post = random_posteriors(rng, 4, 3);
    const auto plain = oracles::ctc_labeling_probs(post, ab);

    // among labelings of one fixed length, argmax must agree with alpha=0
    for (size_t len : {size_t{1}, size_t{2}}) {
      std::string best_plain, best_lm;
      double bp = -1e300, bl = -1e300;
      for (const auto& [label, p] : plain) {
        if (label.size() != len || p <= 0) continue;
        const double s0 = std::log(p);
        const double s1 = std::log(p) + 0.8 * uniform.sequence_log_prob(label);
        if (s0 > bp) {
          bp = s0;
          best_plain = label;
        }
        if (s1 > bl) {
          bl = s1;
          best_lm = label;
        }
      }
      CHECK(best_plain == best_lm);
    }
  }
}

TEST_CASE("report_word: perfect, constant, and confusion accounting") {
  const std::vector<std::string> targets{"a", "a", "b", "b", "c", "c", "d", "d"};
  std::vector<std::optional<double>> yaw(8, 10.0);

  const auto perfect = eval::report_word(targets, targets, yaw, std::nullopt);
  CHECK(perfect.accuracy == doctest::Approx(1.0));
  CHECK(perfect.confusions.empty());

  const std::vector<std::string> constant(8, "a");
  const auto chance = eval::report_word(targets, constant, yaw, std::nullopt);
  CHECK(chance.accuracy == doctest::Approx(0.25));

  const std::vector<std::string> mixed{"a", "b", "b", "c", "c", "c", "d", "a"};
  const auto rep = eval::report_word(targets, mixed, yaw, std::nullopt);
  int64_t conf_total = 0;
  for (const auto& c : rep.confusions) conf_total += c.count;
  const int64_t errors = static_cast<int64_t>(std::llround((1.0 - rep.accuracy) * 8));
  CHECK(conf_total == errors);  // confusion counts sum to total errors
}

TEST_CASE("report_word: pose buckets partition the set") {
  const std::vector<std::string> targets{"a", "a", "a", "a", "a", "a"};
  const std::vector<std::string> preds{"a", "b", "a", "b", "a", "b"};
  const std::vector<std::optional<double>> yaw{5.0, 25.0, 45.0, 65.0, 30.0, 10.0};
  eval::PoseBucketConfig buckets;  // thresholds 20/40/60

  const auto rep = eval::report_word(targets, preds, yaw, buckets);
  REQUIRE(rep.pose_bins.size() == 4);
  int64_t covered = 0;
  for (const auto& b : rep.pose_bins) covered += b.count;
  CHECK(covered == 6);  // disjoint and exhaustive
  CHECK(rep.pose_nested.back().label == "all");
  CHECK(rep.pose_nested.back().count == 6);

  const std::vector<std::optional<double>> missing{5.0, std::nullopt, 45.0, 65.0, 30.0, 10.0};
  CHECK_THROWS_AS(eval::report_word(targets, preds, missing, buckets), MissingYaw);
}

TEST_CASE("report_sentence: corpus WER/CER aggregation") {
  const std::vector<std::string> refs{"bin blue at a one now", "lay red by b two please"};
  const std::vector<std::string> hyps{"bin blue at a one now", "lay red by b two please"};
  const auto perfect = eval::report_sentence(refs, hyps, {std::nullopt, std::nullopt}, std::nullopt);
  CHECK(perfect.wer == doctest::Approx(0.0));
  CHECK(perfect.cer == doctest::Approx(0.0));

  const std::vector<std::string> wrong{"bin blue at a one now", "lay red by b two soon"};
  const auto rep = eval::report_sentence(refs, wrong, {std::nullopt, std::nullopt}, std::nullopt);
  CHECK(rep.wer == doctest::Approx(1.0 / 12.0));
}
