#pragma once

// Shared vocabulary for the defframe toolkit: the definitional relation
// schema, BIO tag helpers, deterministic randomness, and the small numeric
// and string utilities everything else builds on.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace defframe {

inline constexpr std::string_view kToolkitVersion = "defframe/1.0.0";

// Runtime failure in toolkit code (bad data at a contract boundary).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Messages name the file and line where known.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Bad configuration value; the CLI maps this to a usage error exit.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Definitional relations

// Schema order is fixed and load-bearing: row layouts, label sets, and file
// formats all index by it.
enum class Relation : int { IsA, PartOf, HasA, MadeOf, UsedFor, Cause };

inline constexpr std::array<Relation, 6> kAllRelations = {
    Relation::IsA,   Relation::PartOf,  Relation::HasA,
    Relation::MadeOf, Relation::UsedFor, Relation::Cause};

inline constexpr std::size_t kNumRelations = kAllRelations.size();

// Cause stays in the schema but never appears in training corpora.
inline constexpr std::size_t kNumTrainingRelations = 5;

inline std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::IsA:     return "IsA";
    case Relation::PartOf:  return "PartOf";
    case Relation::HasA:    return "HasA";
    case Relation::MadeOf:  return "MadeOf";
    case Relation::UsedFor: return "UsedFor";
    case Relation::Cause:   return "Cause";
  }
  return "?";
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline std::optional<Relation> parse_relation(std::string_view name) {
  const std::string lowered = ascii_lower(name);
  for (Relation r : kAllRelations) {
    if (lowered == ascii_lower(relation_name(r))) return r;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// BIO tags over the relation set

struct BioTag {
  enum Kind { Outside, Begin, Inside };
  Kind kind = Outside;
  Relation rel = Relation::IsA;  // meaningful only when kind != Outside

  bool operator==(const BioTag&) const = default;
};

inline std::string bio_string(const BioTag& tag) {
  if (tag.kind == BioTag::Outside) return "O";
  std::string out = (tag.kind == BioTag::Begin) ? "B-" : "I-";
  out += relation_name(tag.rel);
  return out;
}

inline std::optional<BioTag> parse_bio(std::string_view label) {
  if (label == "O") return BioTag{};
  if (label.size() < 3 || label[1] != '-') return std::nullopt;
  BioTag tag;
  if (label[0] == 'B') {
    tag.kind = BioTag::Begin;
  } else if (label[0] == 'I') {
    tag.kind = BioTag::Inside;
  } else {
    return std::nullopt;
  }
  auto rel = parse_relation(label.substr(2));
  if (!rel) return std::nullopt;
  tag.rel = *rel;
  return tag;
}

// Canonical label set: O first, then B-X/I-X per relation in schema order.
inline std::vector<std::string> bio_label_set(
    std::size_t num_relations = kNumTrainingRelations) {
  std::vector<std::string> labels = {"O"};
  for (std::size_t i = 0; i < num_relations && i < kNumRelations; ++i) {
    const auto name = std::string(relation_name(kAllRelations[i]));
    labels.push_back("B-" + name);
    labels.push_back("I-" + name);
  }
  return labels;
}

// Checks the BIO chain rule: every I-X follows a B-X or I-X of the same X.
inline bool bio_valid(const std::vector<std::string>& labels) {
  BioTag prev;
  for (const auto& label : labels) {
    auto tag = parse_bio(label);
    if (!tag) return false;
    if (tag->kind == BioTag::Inside &&
        (prev.kind == BioTag::Outside || prev.rel != tag->rel)) {
      return false;
    }
    prev = *tag;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Deterministic randomness
//
// mt19937_64 is fully specified by the standard; the distributions are
// hand-rolled because the std ones are implementation-defined, and results
// here must be reproducible across platforms.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is irrelevant at these scales.
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(gen_() % static_cast<std::uint64_t>(n));
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

inline std::vector<std::size_t> shuffled_indices(std::size_t n,
                                                 std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  return idx;
}

// ---------------------------------------------------------------------------
// Small vector numerics

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> v) { return dot(v, v); }

inline bool all_zero(std::span<const double> v) {
  for (double x : v) {
    if (x != 0.0) return false;
  }
  return true;
}

// Cosine similarity; absent when either vector has zero norm.
inline std::optional<double> cosine(std::span<const double> a,
                                    std::span<const double> b) {
  const double na = squared_norm(a);
  const double nb = squared_norm(b);
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return dot(a, b) / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------
// String helpers

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline void strip_trailing_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

// Strict full-string double parse.
inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* begin = s.c_str();
  char* end = nullptr;
  double value = std::strtod(begin, &end);
  if (end != begin + s.size()) return std::nullopt;
  return value;
}

inline std::optional<long long> parse_integer(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* begin = s.c_str();
  char* end = nullptr;
  long long value = std::strtoll(begin, &end, 10);
  if (end != begin + s.size()) return std::nullopt;
  return value;
}

// 17 significant digits round-trips IEEE doubles exactly; all persisted
// float64 values go through this.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// FNV-1a 64-bit; used for feature hashing and manifest digests.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : std::string_view(s)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace defframe
