#pragma once

// Definition frames: per-concept sets of definitionally related terms keyed
// by relation, their fixed-schema matrix encoding over a basis vocabulary,
// similarity between encodings, and decoding back to vocabulary terms.

#include <unordered_map>

#include <json.hpp>

#include "defframe/basis_store.hpp"
#include "defframe/core.hpp"
#include "defframe/corpus.hpp"
#include "defframe/sim_eval.hpp"
#include "defframe/tagger.hpp"

namespace defframe {

// Row 0 holds the concept itself; rows 1..6 follow the relation order. The
// Cause row exists in every encoding but no retriever is ever trained to
// fill it, so it stays structurally zero until external knowledge sets it.
inline constexpr std::size_t kSchemaRows = 1 + kNumRelations;

inline std::string_view schema_row_name(std::size_t row) {
  if (row == 0) return "self";
  if (row >= kSchemaRows) throw std::invalid_argument("schema row out of range");
  return relation_name(kAllRelations[row - 1]);
}

inline std::size_t schema_row_of(Relation rel) {
  return 1 + static_cast<std::size_t>(rel);
}

// ---------------------------------------------------------------------------
// Frames

struct DefinitionFrame {
  std::string concept_name;
  std::array<std::vector<std::string>, kNumRelations> relations;

  const std::vector<std::string>& terms(Relation rel) const {
    return relations[static_cast<std::size_t>(rel)];
  }

  // Appends preserving first-appearance order; duplicates are dropped.
  void add_term(Relation rel, const std::string& term) {
    auto& set = relations[static_cast<std::size_t>(rel)];
    if (std::find(set.begin(), set.end(), term) == set.end()) {
      set.push_back(term);
    }
  }

  bool empty() const {
    for (const auto& set : relations) {
      if (!set.empty()) return false;
    }
    return true;
  }

  bool operator==(const DefinitionFrame&) const = default;
};

struct EncodedFrame {
  std::string concept_name;
  std::size_t dim = 0;
  std::vector<double> data;  // kSchemaRows × dim, row-major

  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * dim, dim};
  }
  std::span<double> row(std::size_t r) { return {data.data() + r * dim, dim}; }

  bool operator==(const EncodedFrame&) const = default;
};

// ---------------------------------------------------------------------------
// Row masks

// Selects which schema rows participate in similarity or transforms.
struct RowMask {
  std::array<bool, kSchemaRows> rows{};

  static RowMask all() {
    RowMask m;
    m.rows.fill(true);
    return m;
  }

  // Concept vector plus the IsA row.
  static RowMask basic() {
    RowMask m;
    m.rows[0] = true;
    m.rows[schema_row_of(Relation::IsA)] = true;
    return m;
  }

  // "DF_all", "DF_basic", or "custom:<row,row,...>" with row names from the
  // schema ("self", "IsA", ...).
  static RowMask parse(std::string_view spec) {
    if (spec == "DF_all") return all();
    if (spec == "DF_basic") return basic();
    const std::string_view prefix = "custom:";
    if (spec.substr(0, prefix.size()) == prefix) {
      RowMask m;
      bool any = false;
      for (const auto& name : split_on(std::string(spec.substr(prefix.size())), ',')) {
        bool matched = false;
        for (std::size_t r = 0; r < kSchemaRows; ++r) {
          if (name == schema_row_name(r)) {
            m.rows[r] = true;
            any = true;
            matched = true;
            break;
          }
        }
        if (!matched) {
          throw ConfigError("unknown schema row '" + name + "' in mask");
        }
      }
      if (!any) throw ConfigError("mask selects no rows");
      return m;
    }
    throw ConfigError("bad mask '" + std::string(spec) +
                      "' (expected DF_all, DF_basic, or custom:<rows>)");
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (bool b : rows) n += b ? 1 : 0;
    return n;
  }

  std::string to_string() const {
    if (*this == all()) return "DF_all";
    if (*this == basic()) return "DF_basic";
    std::string out = "custom:";
    bool first = true;
    for (std::size_t r = 0; r < kSchemaRows; ++r) {
      if (!rows[r]) continue;
      if (!first) out += ',';
      out += std::string(schema_row_name(r));
      first = false;
    }
    return out;
  }

  bool operator==(const RowMask&) const = default;
};

// ---------------------------------------------------------------------------
// Extraction

struct ExtractResult {
  DefinitionFrame frame;
  bool concept_found = false;  // query span located in the sentence
};

// Runs the retriever over one definition sentence. The sentence is tokenized
// and tagged with the heuristic rules, the concept's leftmost token-sequence
// occurrence is marked as the query span, and predicted spans become frame
// terms (tokens joined with single spaces).
inline ExtractResult extract_frame(const TaggerModel& model,
                                   const BasisStore& basis,
                                   const std::string& concept_name,
                                   const std::string& sentence) {
  ExtractResult result;
  result.frame.concept_name = concept_name;
  TaggedSentence tagged;
  tagged.concept_name = concept_name;
  for (auto& surface : tokenize(sentence)) {
    tagged.tokens.push_back({std::move(surface), "X", "O", false});
  }
  if (tagged.tokens.empty()) return result;
  heuristic_tag(tagged.tokens);

  const auto lowered = detail::lowered_surfaces(tagged.tokens);
  const auto concept_tokens = tokenize(ascii_lower(concept_name));
  if (auto span = find_token_span(lowered, concept_tokens)) {
    result.concept_found = true;
    for (std::size_t i = span->first; i < span->second; ++i) {
      tagged.tokens[i].is_query = true;
    }
  }

  const auto labels = model.predict(tagged, basis);
  for (const Span& span : label_spans(labels)) {
    std::string term = tagged.tokens[span.begin].surface;
    for (std::size_t i = span.begin + 1; i < span.end; ++i) {
      term += ' ';
      term += tagged.tokens[i].surface;
    }
    result.frame.add_term(span.rel, term);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Encoding

struct EncodeResult {
  EncodedFrame frame;
  std::vector<std::string> unresolved;  // terms with no basis coverage
};

// Row 0 is the concept's own vector; each relation row is the componentwise
// mean of its resolvable term vectors. Rows with nothing to resolve stay
// zero.
inline EncodeResult encode_frame(const DefinitionFrame& frame,
                                 const BasisStore& basis) {
  EncodeResult result;
  result.frame.concept_name = frame.concept_name;
  result.frame.dim = basis.dim();
  result.frame.data.assign(kSchemaRows * basis.dim(), 0.0);

  if (auto v = basis.lookup_term(frame.concept_name)) {
    std::copy(v->begin(), v->end(), result.frame.row(0).begin());
  } else {
    result.unresolved.push_back(frame.concept_name);
  }
  for (Relation rel : kAllRelations) {
    auto row = result.frame.row(schema_row_of(rel));
    std::size_t resolved = 0;
    for (const auto& term : frame.terms(rel)) {
      const auto v = basis.lookup_term(term);
      if (!v) {
        result.unresolved.push_back(term);
        continue;
      }
      for (std::size_t i = 0; i < basis.dim(); ++i) row[i] += (*v)[i];
      ++resolved;
    }
    if (resolved > 1) {
      for (double& x : row) x /= static_cast<double>(resolved);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Similarity

struct SimilarityValue {
  double value = 0.0;
  bool degenerate = false;  // a masked side had zero norm
};

// Cosine of the masked rows laid end to end. When either side's masked
// content is all zero the cosine is undefined; the value is pinned to 0 and
// flagged instead.
inline SimilarityValue frame_similarity(const EncodedFrame& a,
                                        const EncodedFrame& b,
                                        const RowMask& mask) {
  if (a.dim != b.dim) {
    throw std::invalid_argument("frame_similarity: dimension mismatch");
  }
  if (mask.count() == 0) {
    throw std::invalid_argument("frame_similarity: empty mask");
  }
  double dot_ab = 0.0, na2 = 0.0, nb2 = 0.0;
  for (std::size_t r = 0; r < kSchemaRows; ++r) {
    if (!mask.rows[r]) continue;
    const auto ra = a.row(r);
    const auto rb = b.row(r);
    for (std::size_t i = 0; i < a.dim; ++i) {
      dot_ab += ra[i] * rb[i];
      na2 += ra[i] * ra[i];
      nb2 += rb[i] * rb[i];
    }
  }
  if (na2 == 0.0 || nb2 == 0.0) return {0.0, true};
  return {dot_ab / (std::sqrt(na2) * std::sqrt(nb2)), false};
}

// ---------------------------------------------------------------------------
// Decoding

// Maps each schema row back to the k nearest vocabulary terms by cosine.
// Zero rows decode to nothing.
inline std::vector<std::pair<std::string, std::vector<ScoredTerm>>>
decode_frame(const EncodedFrame& enc, const BasisStore& basis, std::size_t k) {
  if (enc.dim != basis.dim()) {
    throw std::invalid_argument("decode_frame: dimension mismatch");
  }
  std::vector<std::pair<std::string, std::vector<ScoredTerm>>> out;
  out.reserve(kSchemaRows);
  for (std::size_t r = 0; r < kSchemaRows; ++r) {
    const auto row = enc.row(r);
    if (all_zero(row)) {
      out.emplace_back(std::string(schema_row_name(r)), std::vector<ScoredTerm>{});
    } else {
      out.emplace_back(std::string(schema_row_name(r)), basis.nearest_terms(row, k));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frame file (JSON lines)

// One object per line: {"concept": ..., "relations": {"IsA": [...], ...}}.
// Only nonempty relation sets are written.
inline void write_frames(const std::string& path,
                         const std::vector<DefinitionFrame>& frames) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write frames file: " + path);
  for (const auto& frame : frames) {
    nlohmann::ordered_json obj;
    obj["concept"] = frame.concept_name;
    obj["relations"] = nlohmann::ordered_json::object();
    for (Relation rel : kAllRelations) {
      const auto& terms = frame.terms(rel);
      if (!terms.empty()) {
        obj["relations"][std::string(relation_name(rel))] = terms;
      }
    }
    out << obj.dump() << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

inline std::vector<DefinitionFrame> read_frames(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open frames file: " + path);
  std::vector<DefinitionFrame> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_trailing_cr(line);
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("concept") ||
        !obj["concept"].is_string()) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected an object with a \"concept\" string");
    }
    DefinitionFrame frame;
    frame.concept_name = obj["concept"].get<std::string>();
    if (obj.contains("relations")) {
      if (!obj["relations"].is_object()) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": \"relations\" must be an object");
      }
      for (const auto& [key, value] : obj["relations"].items()) {
        const auto rel = parse_relation(key);
        if (!rel) {
          throw FormatError(path + ":" + std::to_string(line_no) +
                            ": unknown relation '" + key + "'");
        }
        if (!value.is_array()) {
          throw FormatError(path + ":" + std::to_string(line_no) +
                            ": relation '" + key + "' must hold an array");
        }
        for (const auto& term : value) {
          if (!term.is_string()) {
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": relation '" + key + "' holds a non-string");
          }
          frame.add_term(*rel, term.get<std::string>());
        }
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Encoded frame file
//
// Header `defframe-enc/1 k d`, then per frame one concept line followed by
// k rows of d values. Values round-trip exactly.

inline void write_encoded(const std::string& path,
                          const std::vector<EncodedFrame>& frames,
                          std::size_t dim_hint = 0) {
  if (frames.empty() && dim_hint == 0) {
    throw std::invalid_argument(
        "write_encoded: empty frame list needs an explicit dimension");
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write encoded frames file: " + path);
  const std::size_t dim = frames.empty() ? dim_hint : frames.front().dim;
  out << "defframe-enc/1 " << kSchemaRows << ' ' << dim << '\n';
  for (const auto& frame : frames) {
    if (frame.dim != dim || frame.data.size() != kSchemaRows * dim) {
      throw std::invalid_argument("write_encoded: inconsistent frame shape");
    }
    out << frame.concept_name << '\n';
    for (std::size_t r = 0; r < kSchemaRows; ++r) {
      const auto row = frame.row(r);
      for (std::size_t i = 0; i < dim; ++i) {
        if (i > 0) out << ' ';
        out << format_double(row[i]);
      }
      out << '\n';
    }
  }
  if (!out) throw Error("write failed: " + path);
}

inline std::vector<EncodedFrame> read_encoded(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open encoded frames file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw FormatError(path + ": empty file");
  strip_trailing_cr(header);
  const auto fields = split_whitespace(header);
  if (fields.size() != 3 || fields[0] != "defframe-enc/1") {
    throw FormatError(path + ": bad header '" + header + "'");
  }
  const auto k = parse_integer(fields[1]);
  const auto d = parse_integer(fields[2]);
  if (!k || !d || *k <= 0 || *d <= 0) {
    throw FormatError(path + ": bad header dimensions");
  }
  if (static_cast<std::size_t>(*k) != kSchemaRows) {
    throw FormatError(path + ": expected " + std::to_string(kSchemaRows) +
                      " schema rows, file declares " + fields[1]);
  }
  const std::size_t dim = static_cast<std::size_t>(*d);

  std::vector<EncodedFrame> frames;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_trailing_cr(line);
    if (line.empty()) continue;
    EncodedFrame frame;
    frame.concept_name = line;
    frame.dim = dim;
    frame.data.reserve(kSchemaRows * dim);
    for (std::size_t r = 0; r < kSchemaRows; ++r) {
      if (!std::getline(in, line)) {
        throw FormatError(path + ": truncated frame '" + frame.concept_name + "'");
      }
      ++line_no;
      strip_trailing_cr(line);
      const auto values = split_whitespace(line);
      if (values.size() != dim) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(dim) + " values, found " +
                          std::to_string(values.size()));
      }
      for (const auto& v : values) {
        const auto value = parse_double(v);
        if (!value) {
          throw FormatError(path + ":" + std::to_string(line_no) +
                            ": bad value '" + v + "'");
        }
        frame.data.push_back(*value);
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

// Concept-keyed index over encoded frames; lookups are case-insensitive and
// the first frame wins on duplicates.
inline std::unordered_map<std::string, EncodedFrame> index_frames(
    const std::vector<EncodedFrame>& frames) {
  std::unordered_map<std::string, EncodedFrame> index;
  for (const auto& frame : frames) {
    index.emplace(ascii_lower(frame.concept_name), frame);
  }
  return index;
}

// ---------------------------------------------------------------------------
// Benchmark representer over encoded frames

class FrameRepresenter : public Representer {
 public:
  FrameRepresenter(const std::unordered_map<std::string, EncodedFrame>& frames,
                   RowMask mask, std::string name = "frames")
      : frames_(frames), mask_(mask), name_(std::move(name)) {}

  bool has(const std::string& word) const override {
    return frames_.count(ascii_lower(word)) > 0;
  }

  std::optional<double> score(const std::string& word1,
                              const std::string& word2) const override {
    const auto it1 = frames_.find(ascii_lower(word1));
    const auto it2 = frames_.find(ascii_lower(word2));
    if (it1 == frames_.end() || it2 == frames_.end()) return std::nullopt;
    const auto sim = frame_similarity(it1->second, it2->second, mask_);
    if (sim.degenerate) return std::nullopt;
    return sim.value;
  }

  std::string name() const override { return name_; }

 private:
  const std::unordered_map<std::string, EncodedFrame>& frames_;
  RowMask mask_;
  std::string name_;
};

}  // namespace defframe
