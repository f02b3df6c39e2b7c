#pragma once

// Immutable word-embedding space ("Basis"). Loaded once from a plain-text
// vector file, then served read-only to the tagger, the frame encoder, and
// the similarity harness.

#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "defframe/core.hpp"

namespace defframe {

struct ScoredTerm {
  std::string term;
  double score = 0.0;

  bool operator==(const ScoredTerm&) const = default;
};

class BasisStore {
 public:
  struct LoadReport {
    std::size_t entries = 0;
    std::size_t duplicates = 0;  // later occurrences dropped, first wins
  };

  // Text format: one entry per line, `token v1 .. vd`, single UTF-8 file.
  // A first line of exactly two integers is a count/dim header and skipped.
  static BasisStore load(const std::string& path, bool lowercase = true,
                         LoadReport* report = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open embeddings file: " + path);

    BasisStore store;
    store.lowercase_ = lowercase;
    LoadReport local;
    std::string line;
    std::size_t line_no = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
      ++line_no;
      strip_trailing_cr(line);
      if (line.empty()) continue;
      auto fields = split_whitespace(line);
      if (first_content_line && fields.size() == 2 &&
          parse_integer(fields[0]) && parse_integer(fields[1])) {
        first_content_line = false;
        continue;  // optional count/dim header
      }
      first_content_line = false;
      if (fields.size() < 2) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": expected token followed by vector values");
      }
      const std::size_t d = fields.size() - 1;
      if (store.dim_ == 0) {
        store.dim_ = d;
      } else if (d != store.dim_) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": inconsistent vector length " + std::to_string(d) +
                          " (expected " + std::to_string(store.dim_) + ")");
      }
      std::string token = lowercase ? ascii_lower(fields[0]) : fields[0];
      if (store.index_.count(token) > 0) {
        ++local.duplicates;
        continue;
      }
      store.index_.emplace(token, store.tokens_.size());
      store.tokens_.push_back(std::move(token));
      store.data_.reserve(store.data_.size() + store.dim_);
      for (std::size_t i = 1; i < fields.size(); ++i) {
        auto value = parse_double(fields[i]);
        if (!value) {
          throw FormatError(path + ":" + std::to_string(line_no) +
                            ": bad vector value '" + fields[i] + "'");
        }
        store.data_.push_back(*value);
      }
      ++local.entries;
    }
    if (store.tokens_.empty()) {
      throw FormatError(path + ": no embedding entries found");
    }
    store.norms_.resize(store.tokens_.size());
    for (std::size_t r = 0; r < store.tokens_.size(); ++r) {
      store.norms_[r] = std::sqrt(squared_norm(store.row(r)));
    }
    if (report) *report = local;
    return store;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  bool lowercased() const { return lowercase_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool contains(std::string_view token) const {
    return index_.count(normalize(token)) > 0;
  }

  std::span<const double> vector_of(std::string_view token) const {
    auto it = index_.find(normalize(token));
    if (it == index_.end()) return {};
    return row(it->second);
  }

  // Single-token terms map to their stored vector; multiword terms to the
  // componentwise mean of their in-vocabulary tokens. Absent when no token
  // is known.
  std::optional<std::vector<double>> lookup_term(std::string_view term) const {
    auto parts = split_whitespace(term);
    std::vector<double> sum(dim_, 0.0);
    std::size_t found = 0;
    for (const auto& part : parts) {
      auto v = vector_of(part);
      if (v.empty()) continue;
      for (std::size_t i = 0; i < dim_; ++i) sum[i] += v[i];
      ++found;
    }
    if (found == 0) return std::nullopt;
    if (found > 1) {
      for (double& x : sum) x /= static_cast<double>(found);
    }
    return sum;
  }

  // The k vocabulary terms most cosine-similar to v, ties broken by term
  // order. Terms stored as all-zero vectors are excluded; a zero query has
  // no defined cosine and is rejected.
  std::vector<ScoredTerm> nearest_terms(std::span<const double> v,
                                        std::size_t k) const {
    if (v.size() != dim_) {
      throw std::invalid_argument("nearest_terms: query dimension mismatch");
    }
    if (k == 0) throw std::invalid_argument("nearest_terms: k must be >= 1");
    const double vnorm = std::sqrt(squared_norm(v));
    if (vnorm == 0.0) {
      throw Error("nearest_terms: cosine undefined for all-zero query");
    }
    std::vector<ScoredTerm> scored;
    scored.reserve(tokens_.size());
    for (std::size_t r = 0; r < tokens_.size(); ++r) {
      if (norms_[r] == 0.0) continue;
      scored.push_back({tokens_[r], dot(v, row(r)) / (vnorm * norms_[r])});
    }
    std::sort(scored.begin(), scored.end(),
              [](const ScoredTerm& a, const ScoredTerm& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.term < b.term;
              });
    if (scored.size() > k) scored.resize(k);
    return scored;
  }

  bool operator==(const BasisStore& other) const {
    return dim_ == other.dim_ && lowercase_ == other.lowercase_ &&
           tokens_ == other.tokens_ && data_ == other.data_;
  }

 private:
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * dim_, dim_};
  }

  std::string normalize(std::string_view token) const {
    return lowercase_ ? ascii_lower(token) : std::string(token);
  }

  std::size_t dim_ = 0;
  bool lowercase_ = true;
  std::vector<std::string> tokens_;  // insertion order
  std::vector<double> data_;         // size * dim, row-major
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace defframe
