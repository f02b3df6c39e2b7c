#pragma once

// Rank-correlation evaluation against word-similarity benchmarks: average
// ranks, Spearman correlation, a permutation significance test, and
// deterministic k-fold index partitions.

#include <numeric>
#include <unordered_set>

#include "defframe/basis_store.hpp"
#include "defframe/corpus.hpp"
#include "defframe/core.hpp"

namespace defframe {

// Average ranks in [1, n]: ties receive the mean of the rank positions they
// would occupy.
inline std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share the mean rank of (i+1)..(j+1).
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

namespace detail {

// Pearson correlation of two equal-length vectors; nullopt if either side
// has zero variance.
inline std::optional<double> pearson(std::span<const double> x,
                                     std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

// Spearman rank correlation: Pearson correlation of average ranks. Returns
// nullopt when either side is constant (zero rank variance).
inline std::optional<double> spearman(std::span<const double> x,
                                      std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("spearman: length mismatch");
  }
  if (x.size() < 3) {
    throw std::invalid_argument("spearman: need at least 3 observations");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return detail::pearson(rx, ry);
}

// Two-sided permutation test for Spearman correlation. Permuting y and
// re-ranking equals permuting y's precomputed ranks, so each iteration is a
// shuffle plus one Pearson pass. Degenerate inputs give p = 1.
inline double permutation_pvalue(std::span<const double> x,
                                 std::span<const double> y,
                                 std::size_t n_perm, std::uint64_t seed) {
  if (n_perm < 1000) {
    throw std::invalid_argument("permutation_pvalue: need at least 1000 permutations");
  }
  const auto observed = spearman(x, y);
  if (!observed) return 1.0;
  const double threshold = std::abs(*observed);

  const auto rx = average_ranks(x);
  std::vector<double> ry = average_ranks(y);
  Rng rng(seed);
  std::size_t hits = 0;
  for (std::size_t p = 0; p < n_perm; ++p) {
    rng.shuffle(ry);
    const auto rho = detail::pearson(rx, ry);
    if (rho && std::abs(*rho) >= threshold) ++hits;
  }
  return static_cast<double>(1 + hits) / static_cast<double>(n_perm + 1);
}

// ---------------------------------------------------------------------------
// K-fold cross-validation partitions

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Deterministic k-fold partition of [0, n). The first n % k folds hold one
// extra test index. Every index appears in exactly one test set.
inline std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error("kfold: need at least 2 folds");
  if (n < k) {
    throw Error("kfold: need at least " + std::to_string(k) + " items, got " +
                std::to_string(n));
  }
  const auto order = shuffled_indices(n, seed);
  std::vector<Fold> folds(k);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) {
      folds[f].test.push_back(order[pos + i]);
    }
    pos += size;
  }
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t g = 0; g < k; ++g) {
      if (g == f) continue;
      folds[f].train.insert(folds[f].train.end(), folds[g].test.begin(),
                            folds[g].test.end());
    }
  }
  return folds;
}

// Datasets below this size produce unstable correlation estimates and are
// excluded from transform fitting by default.
inline bool min_size_gate(std::size_t n_pairs, std::size_t threshold = 100) {
  return n_pairs >= threshold;
}

// ---------------------------------------------------------------------------
// Representers
//
// A representer scores a word pair; evaluation code is agnostic to whether
// the score comes from raw basis vectors or encoded frames.

class Representer {
 public:
  virtual ~Representer() = default;
  virtual bool has(const std::string& word) const = 0;
  // Similarity score, or nullopt when the pair is degenerate for this
  // representation (e.g. both sides have zero norm).
  virtual std::optional<double> score(const std::string& word1,
                                      const std::string& word2) const = 0;
  virtual std::string name() const = 0;
};

// Cosine over raw basis vectors (multi-word terms average their tokens).
class BasisRepresenter : public Representer {
 public:
  explicit BasisRepresenter(const BasisStore& basis) : basis_(basis) {}

  bool has(const std::string& word) const override {
    return basis_.lookup_term(word).has_value();
  }

  std::optional<double> score(const std::string& word1,
                              const std::string& word2) const override {
    const auto v1 = basis_.lookup_term(word1);
    const auto v2 = basis_.lookup_term(word2);
    if (!v1 || !v2) return std::nullopt;
    const auto cos = cosine(*v1, *v2);
    if (!cos) return std::nullopt;
    return *cos;
  }

  std::string name() const override { return "basis"; }

 private:
  const BasisStore& basis_;
};

// ---------------------------------------------------------------------------
// Benchmark evaluation

struct EvalOptions {
  std::size_t n_perm = 10000;
  std::uint64_t seed = 0;
};

struct EvalResult {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n_pairs = 0;    // pairs actually scored
  std::size_t n_skipped = 0;  // pairs dropped (missing words or degenerate)
  bool degenerate = false;    // correlation undefined on the surviving pairs
};

// Scores every pair the representer covers and correlates against the
// normalized gold scores. Pairs with a missing word on either side are
// dropped symmetrically; an optional vocabulary filter drops pairs whose
// words are absent from it (used to intersect vocabularies across
// representers). Fewer than 3 surviving pairs is an error.
inline EvalResult evaluate(const std::vector<SimPair>& pairs,
                           const Representer& rep,
                           const std::unordered_set<std::string>* vocab_filter,
                           const EvalOptions& opts = {}) {
  std::vector<double> predicted;
  std::vector<double> gold;
  EvalResult result;
  for (const auto& pair : pairs) {
    if (vocab_filter &&
        (!vocab_filter->count(pair.word1) || !vocab_filter->count(pair.word2))) {
      ++result.n_skipped;
      continue;
    }
    const auto score = rep.score(pair.word1, pair.word2);
    if (!score) {
      ++result.n_skipped;
      continue;
    }
    predicted.push_back(*score);
    gold.push_back(pair.gold_norm);
  }
  result.n_pairs = predicted.size();
  if (predicted.size() < 3) {
    throw Error("evaluate: only " + std::to_string(predicted.size()) +
                " scorable pairs; need at least 3");
  }
  const auto rho = spearman(predicted, gold);
  if (!rho) {
    result.degenerate = true;
    result.rho = 0.0;
    result.p_value = 1.0;
    return result;
  }
  result.rho = *rho;
  result.p_value = permutation_pvalue(predicted, gold, opts.n_perm, opts.seed);
  return result;
}

}  // namespace defframe
