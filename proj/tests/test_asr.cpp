#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>

#include "scrubkit/asr.hpp"
#include "scrubkit/errors.hpp"
#include "test_util.hpp"

using namespace scrubkit;
using scrubkit::testing::TempDir;

namespace {

using Words = std::vector<std::string>;

// Memoized recursion over suffixes.
std::size_t levenshtein_oracle(const Words& a, const Words& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    if (auto it = memo.find({i, j}); it != memo.end()) return it->second;
    std::size_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    return memo[{i, j}] = best;
  };
  return go(0, 0);
}

// Collapse runs with std::unique, then drop blanks.
std::vector<std::size_t> collapse_oracle(std::vector<std::size_t> path, std::size_t blank) {
  path.erase(std::unique(path.begin(), path.end()), path.end());
  path.erase(std::remove(path.begin(), path.end(), blank), path.end());
  return path;
}

Words random_words(Rng& rng, std::size_t max_len) {
  static const Words pool = {"a", "b", "c", "d", "e"};
  Words w(rng.below(max_len + 1));
  for (auto& s : w) s = pool[rng.below(pool.size())];
  return w;
}

Matrix one_hot_logits(const std::vector<std::size_t>& path, std::size_t v) {
  Matrix m(path.size(), v);
  for (std::size_t t = 0; t < path.size(); ++t) m(t, path[t]) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("wer examples") {
  CHECK(wer({"a", "b", "c"}, {"a", "b", "c"}) == 0.0);
  CHECK(wer({"a", "b", "c"}, {"a", "x", "c"}) == doctest::Approx(1.0 / 3.0));
  CHECK(wer({"a"}, {"a", "b", "c"}) == 2.0);
  CHECK(wer({"a", "b"}, {}) == 1.0);
  CHECK_THROWS_AS(wer({}, {"a"}), Error);
}

TEST_CASE("edit distance matches recursion oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const Words a = random_words(rng, 15), b = random_words(rng, 15);
    CHECK(edit_distance(a, b) == levenshtein_oracle(a, b));
    CHECK(edit_distance(a, b) == edit_distance(b, a));
  }
}

TEST_CASE("ctc greedy decode") {
  CHECK(ctc_greedy_decode(one_hot_logits({1, 1, 0, 2}, 3), 0) == std::vector<std::size_t>{1, 2});
  CHECK(ctc_greedy_decode(one_hot_logits({0, 0, 0}, 3), 0).empty());
  CHECK(ctc_greedy_decode(one_hot_logits({1, 0, 1}, 3), 0) == std::vector<std::size_t>{1, 1});
  CHECK(ctc_greedy_decode(one_hot_logits({2, 2, 2}, 3), 2).empty());
  CHECK_THROWS_AS(ctc_greedy_decode(Matrix(0, 3), 0), Error);
  CHECK_THROWS_AS(ctc_greedy_decode(Matrix(2, 1), 0), Error);
  CHECK_THROWS_AS(ctc_greedy_decode(Matrix(2, 3), 3), Error);

  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t v = 2 + rng.below(6), blank = rng.below(v);
    Matrix logits(20, v);
    for (double& x : logits.data()) x = rng.normal();
    std::vector<std::size_t> path(20);
    for (std::size_t t = 0; t < 20; ++t) {
      const auto row = logits.row(t);
      path[t] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    const auto out = ctc_greedy_decode(logits, blank);
    CHECK(out == collapse_oracle(path, blank));
    CHECK(std::find(out.begin(), out.end(), blank) == out.end());
  }
}

TEST_CASE("symbols to words") {
  const Words vocab = {"<pad>", "|", "h", "i", "o"};
  CHECK(symbols_to_words({2, 3, 1, 4, 1}, vocab, "|") == Words{"hi", "o"});
  CHECK(symbols_to_words({1, 1, 2}, vocab, "|") == Words{"h"});
  CHECK(symbols_to_words({2, 3}, vocab, "") == Words{"h", "i"});
}

TEST_CASE("ridge head decodes separable frames and round trips") {
  Rng rng(2);
  const std::size_t h = 6, v = 4;
  std::vector<EmbeddingSequence> seqs;
  std::vector<std::vector<std::size_t>> targets;
  for (int u = 0; u < 30; ++u) {
    std::vector<std::size_t> sym;
    for (int t = 0; t < 25; ++t) sym.push_back(t % 5 == 0 ? 0 : 1 + (static_cast<std::size_t>(t) / 5 + u) % 3);
    Matrix x(sym.size(), h);
    for (std::size_t t = 0; t < sym.size(); ++t) {
      for (std::size_t d = 0; d < h; ++d) x(t, d) = rng.normal(0.0, 0.2);
      x(t, sym[t]) += 3.0;
    }
    seqs.push_back({"u" + std::to_string(u), 0, x});
    targets.push_back(sym);
  }
  const LinearHead head = fit_ridge_head(seqs, targets, {"<blank>", "x", "y", "z"}, 0);
  CHECK(head.vocab_size() == v);
  for (std::size_t u = 0; u < seqs.size(); ++u) {
    Words ref;
    for (auto s : collapse_oracle(targets[u], 0)) ref.push_back(head.vocabulary[s]);
    CHECK(head.transcribe(seqs[u].frames) == ref);
  }

  TempDir tmp("asr");
  save_head(head, tmp / "head.tensor");
  const LinearHead back = load_head(tmp / "head.tensor");
  CHECK(scrubkit::testing::max_diff(back.weight, head.weight) == 0.0);
  CHECK(back.bias == head.bias);
  CHECK(back.vocabulary == head.vocabulary);
  CHECK(back.blank == head.blank);
  CHECK_THROWS_AS(head.logits(Matrix(3, h + 1)), ShapeError);
}
