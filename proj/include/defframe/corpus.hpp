#pragma once

// Corpus construction and file formats: BIO-labeled sentences aligned from
// relation triples, deterministic corpus splits, similarity benchmarks, and
// per-concept definition sentences.

#include <array>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "defframe/core.hpp"

namespace defframe {

struct Token {
  std::string surface;
  std::string pos = "X";
  std::string chunk = "O";
  bool is_query = false;

  bool operator==(const Token&) const = default;
};

struct TaggedSentence {
  std::string concept_name;
  std::vector<Token> tokens;
  std::vector<std::string> labels;  // BIO, same length as tokens

  bool operator==(const TaggedSentence&) const = default;
};

struct RelationTriple {
  std::string concept_name;
  Relation relation = Relation::IsA;
  std::string term;
  std::string sentence;
};

struct SimPair {
  std::string word1;
  std::string word2;
  double gold = 0.0;
  double gold_norm = 0.0;
};

// ---------------------------------------------------------------------------
// Tokenization

namespace detail {

inline bool is_punct_char(char c) {
  static const std::string punct = ".,;:!?\"()[]{}<>/\\|";
  return punct.find(c) != std::string::npos;
}

}  // namespace detail

// Whitespace-and-punctuation tokenizer. Punctuation marks become their own
// tokens; apostrophes and hyphens stay word-internal.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) {
        out.push_back(std::move(current));
        current.clear();
      }
    } else if (detail::is_punct_char(c)) {
      if (!current.empty()) {
        out.push_back(std::move(current));
        current.clear();
      }
      out.push_back(std::string(1, c));
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

// ---------------------------------------------------------------------------
// Fallback POS/chunk tagger
//
// A closed lexicon plus suffix rules. The tags are consumed downstream as
// opaque categorical features, so coverage matters more than accuracy.

namespace detail {

inline std::string heuristic_pos(const std::string& word, bool sentence_initial) {
  static const std::set<std::string> determiners = {"a", "an", "the", "this",
                                                    "that", "these", "those"};
  static const std::set<std::string> prepositions = {
      "of", "in", "on", "for", "with", "at", "by", "from", "as", "into",
      "about", "between", "through", "during", "under", "over", "within"};
  static const std::set<std::string> conjunctions = {"and", "or", "but", "nor"};
  static const std::set<std::string> pronouns = {"it", "its", "he", "she",
                                                 "they", "them", "we", "you",
                                                 "i", "his", "her", "their",
                                                 "our"};
  static const std::set<std::string> adverbs = {"not", "very", "also", "often",
                                                "usually", "typically",
                                                "sometimes", "mainly"};
  if (word.size() == 1 && is_punct_char(word[0])) return word;
  const std::string lower = ascii_lower(word);
  bool numeric = true;
  for (char c : word) {
    if (!std::isdigit(static_cast<unsigned char>(c)) && c != '.' && c != ',') {
      numeric = false;
      break;
    }
  }
  if (numeric) return "CD";
  if (lower == "is" || lower == "has") return "VBZ";
  if (lower == "are" || lower == "have" || lower == "do") return "VBP";
  if (lower == "was" || lower == "were" || lower == "did" || lower == "had")
    return "VBD";
  if (lower == "be" || lower == "been" || lower == "being") return "VB";
  if (lower == "to") return "TO";
  if (lower == "which" || lower == "who" || lower == "whom") return "WP";
  if (determiners.count(lower)) return "DT";
  if (prepositions.count(lower)) return "IN";
  if (conjunctions.count(lower)) return "CC";
  if (pronouns.count(lower)) return "PRP";
  if (adverbs.count(lower)) return "RB";
  auto ends_with = [&lower](std::string_view suffix) {
    return lower.size() > suffix.size() &&
           lower.compare(lower.size() - suffix.size(), suffix.size(),
                         suffix) == 0;
  };
  if (ends_with("ly")) return "RB";
  if (ends_with("ing")) return "VBG";
  if (ends_with("ed")) return "VBD";
  if (ends_with("tion") || ends_with("sion") || ends_with("ment") ||
      ends_with("ness") || ends_with("ity") || ends_with("ism"))
    return "NN";
  if (ends_with("ous") || ends_with("ful") || ends_with("ive") ||
      ends_with("ical") || ends_with("al") || ends_with("ic"))
    return "JJ";
  if (!sentence_initial && std::isupper(static_cast<unsigned char>(word[0])))
    return "NNP";
  if (ends_with("s")) return "NNS";
  return "NN";
}

inline bool np_pos(const std::string& pos) {
  return pos == "DT" || pos == "JJ" || pos == "CD" || pos == "PRP" ||
         pos.compare(0, 2, "NN") == 0;
}

inline bool vp_pos(const std::string& pos) {
  return pos.compare(0, 2, "VB") == 0;
}

}  // namespace detail

// Fills the POS and chunk columns in place from the heuristic rules.
inline void heuristic_tag(std::vector<Token>& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    tokens[i].pos = detail::heuristic_pos(tokens[i].surface, i == 0);
  }
  std::string prev_chunk = "O";
  for (auto& token : tokens) {
    std::string chunk = "O";
    if (detail::np_pos(token.pos)) {
      chunk = (prev_chunk == "B-NP" || prev_chunk == "I-NP") ? "I-NP" : "B-NP";
    } else if (detail::vp_pos(token.pos)) {
      chunk = (prev_chunk == "B-VP" || prev_chunk == "I-VP") ? "I-VP" : "B-VP";
    } else if (token.pos == "IN" || token.pos == "TO") {
      chunk = "B-PP";
    } else if (token.pos == "RB") {
      chunk = "B-ADVP";
    }
    token.chunk = chunk;
    prev_chunk = chunk;
  }
}

// ---------------------------------------------------------------------------
// Triple-to-sentence alignment

struct AlignReport {
  std::size_t aligned = 0;
  std::size_t concept_not_found = 0;
  std::size_t term_not_found = 0;
  std::size_t overlapping = 0;

  std::size_t skipped() const {
    return concept_not_found + term_not_found + overlapping;
  }
};

enum class SkipReason { ConceptNotFound, TermNotFound, Overlapping };

inline std::string_view skip_reason_name(SkipReason reason) {
  switch (reason) {
    case SkipReason::ConceptNotFound: return "concept-not-found";
    case SkipReason::TermNotFound: return "term-not-found";
    case SkipReason::Overlapping: return "overlapping-span";
  }
  return "unknown";
}

struct SkippedTriple {
  std::size_t index = 0;  // position in the input triple list
  SkipReason reason = SkipReason::ConceptNotFound;
};

struct AlignResult {
  std::vector<TaggedSentence> sentences;
  AlignReport report;
  std::vector<SkippedTriple> skipped;
};

// Leftmost case-insensitive match of `target` as a token subsequence,
// searching surfaces in [from, end). Returns [begin, end) or nullopt.
inline std::optional<std::pair<std::size_t, std::size_t>> find_token_span(
    const std::vector<std::string>& lowered_surfaces,
    const std::vector<std::string>& lowered_target, std::size_t from = 0) {
  if (lowered_target.empty() ||
      lowered_target.size() > lowered_surfaces.size()) {
    return std::nullopt;
  }
  for (std::size_t i = from;
       i + lowered_target.size() <= lowered_surfaces.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < lowered_target.size(); ++j) {
      if (lowered_surfaces[i + j] != lowered_target[j]) {
        match = false;
        break;
      }
    }
    if (match) return std::make_pair(i, i + lowered_target.size());
  }
  return std::nullopt;
}

namespace detail {

// Pre-tagged sentences carry `surface|POS|chunk` fields; detected when every
// whitespace field splits into exactly three parts.
inline bool looks_pretagged(const std::vector<std::string>& fields) {
  if (fields.empty()) return false;
  for (const auto& f : fields) {
    if (split_on(f, '|').size() != 3) return false;
  }
  return true;
}

inline std::vector<Token> sentence_tokens(const std::string& sentence,
                                          bool tagger_fallback) {
  std::vector<Token> tokens;
  auto fields = split_whitespace(sentence);
  if (looks_pretagged(fields)) {
    for (const auto& f : fields) {
      auto parts = split_on(f, '|');
      tokens.push_back({parts[0], parts[1], parts[2], false});
    }
    return tokens;
  }
  for (auto& surface : tokenize(sentence)) {
    tokens.push_back({std::move(surface), "X", "O", false});
  }
  if (tagger_fallback) heuristic_tag(tokens);
  return tokens;
}

inline std::vector<std::string> lowered_surfaces(
    const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(ascii_lower(t.surface));
  return out;
}

}  // namespace detail

// Builds BIO-labeled sentences from relation triples. Triples sharing a
// (concept, sentence) pair merge into one sentence with multiple spans; a
// triple whose concept or term cannot be located, or whose term span would
// overlap an already-labeled span or the query span, is skipped and counted.
inline AlignResult align_triples(const std::vector<RelationTriple>& triples,
                                 bool tagger_fallback = false) {
  AlignResult result;
  // Group by (concept, sentence) preserving first-appearance order.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const std::string key = triples[i].concept_name + '\x1f' + triples[i].sentence;
    bool found = false;
    for (auto& [gkey, members] : groups) {
      if (gkey == key) {
        members.push_back(i);
        found = true;
        break;
      }
    }
    if (!found) groups.push_back({key, {i}});
  }

  for (const auto& [key, members] : groups) {
    const RelationTriple& head = triples[members.front()];
    auto skip_group = [&](SkipReason reason) {
      result.report.concept_not_found += members.size();
      for (std::size_t idx : members) result.skipped.push_back({idx, reason});
    };
    if (head.sentence.empty()) {
      skip_group(SkipReason::ConceptNotFound);
      continue;
    }
    TaggedSentence sentence;
    sentence.concept_name = head.concept_name;
    sentence.tokens = detail::sentence_tokens(head.sentence, tagger_fallback);
    const auto lowered = detail::lowered_surfaces(sentence.tokens);

    const auto concept_tokens = tokenize(ascii_lower(head.concept_name));
    auto query_span = find_token_span(lowered, concept_tokens);
    if (!query_span) {
      skip_group(SkipReason::ConceptNotFound);
      continue;
    }
    for (std::size_t i = query_span->first; i < query_span->second; ++i) {
      sentence.tokens[i].is_query = true;
    }
    sentence.labels.assign(sentence.tokens.size(), "O");

    auto occupied = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        if (sentence.tokens[i].is_query || sentence.labels[i] != "O")
          return true;
      }
      return false;
    };

    bool any_aligned = false;
    for (std::size_t idx : members) {
      const RelationTriple& triple = triples[idx];
      const auto term_tokens = tokenize(ascii_lower(triple.term));
      // Leftmost occurrence that does not overlap the query span or an
      // already-labeled span.
      std::optional<std::pair<std::size_t, std::size_t>> placed;
      bool saw_occurrence = false;
      std::size_t from = 0;
      while (auto span = find_token_span(lowered, term_tokens, from)) {
        saw_occurrence = true;
        if (!occupied(span->first, span->second)) {
          placed = span;
          break;
        }
        from = span->first + 1;
      }
      if (!placed) {
        if (saw_occurrence) {
          ++result.report.overlapping;
          result.skipped.push_back({idx, SkipReason::Overlapping});
        } else {
          ++result.report.term_not_found;
          result.skipped.push_back({idx, SkipReason::TermNotFound});
        }
        continue;
      }
      const auto rel_name = std::string(relation_name(triple.relation));
      sentence.labels[placed->first] = "B-" + rel_name;
      for (std::size_t i = placed->first + 1; i < placed->second; ++i) {
        sentence.labels[i] = "I-" + rel_name;
      }
      ++result.report.aligned;
      any_aligned = true;
    }
    if (any_aligned) result.sentences.push_back(std::move(sentence));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Corpus splitting

struct SplitSizes {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
};

// Dev and test take the floor of their ratios; the remainder goes to train.
inline SplitSizes split_sizes(std::size_t n, std::array<double, 3> ratios) {
  for (double r : ratios) {
    if (r <= 0.0) throw std::invalid_argument("split ratios must be positive");
  }
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  SplitSizes sizes;
  sizes.dev = static_cast<std::size_t>(ratios[1] * static_cast<double>(n));
  sizes.test = static_cast<std::size_t>(ratios[2] * static_cast<double>(n));
  sizes.train = n - sizes.dev - sizes.test;
  return sizes;
}

struct CorpusSplit {
  std::vector<TaggedSentence> train;
  std::vector<TaggedSentence> dev;
  std::vector<TaggedSentence> test;
};

inline CorpusSplit split_corpus(const std::vector<TaggedSentence>& sentences,
                                std::array<double, 3> ratios,
                                std::uint64_t seed) {
  if (sentences.size() < 3) {
    throw Error("split_corpus: need at least 3 sentences, got " +
                std::to_string(sentences.size()));
  }
  const SplitSizes sizes = split_sizes(sentences.size(), ratios);
  const auto order = shuffled_indices(sentences.size(), seed);
  CorpusSplit split;
  split.train.reserve(sizes.train);
  split.dev.reserve(sizes.dev);
  split.test.reserve(sizes.test);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const TaggedSentence& s = sentences[order[i]];
    if (i < sizes.train) {
      split.train.push_back(s);
    } else if (i < sizes.train + sizes.dev) {
      split.dev.push_back(s);
    } else {
      split.test.push_back(s);
    }
  }
  return split;
}

// ---------------------------------------------------------------------------
// Benchmark and definition files

// `word1 TAB word2 TAB score` (comma-separated for .csv). gold_norm is the
// min-max normalization over the file; a degenerate range maps to 0.5.
inline std::vector<SimPair> parse_similarity(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open similarity file: " + path);
  const bool csv = path.size() > 4 && path.compare(path.size() - 4, 4, ".csv") == 0;

  std::vector<SimPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_trailing_cr(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = split_on(line, csv ? ',' : '\t');
    if (fields.size() != 3) fields = split_whitespace(line);
    if (fields.size() != 3) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected word1, word2, score");
    }
    auto score = parse_double(fields[2]);
    if (!score) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": non-numeric score '" + fields[2] + "'");
    }
    pairs.push_back({fields[0], fields[1], *score, 0.0});
  }
  if (!pairs.empty()) {
    double lo = pairs.front().gold, hi = pairs.front().gold;
    for (const auto& p : pairs) {
      lo = std::min(lo, p.gold);
      hi = std::max(hi, p.gold);
    }
    for (auto& p : pairs) {
      p.gold_norm = (hi == lo) ? 0.5 : (p.gold - lo) / (hi - lo);
    }
  }
  return pairs;
}

// `concept TAB sentence`, split at the first TAB only.
inline std::vector<std::pair<std::string, std::string>> parse_definitions(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open definitions file: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_trailing_cr(line);
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected `concept TAB sentence`");
    }
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

// `concept TAB relation TAB term TAB sentence`. Cause triples violate the
// training-corpus contract and are rejected.
inline std::vector<RelationTriple> parse_triples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open triples file: " + path);
  std::vector<RelationTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_trailing_cr(line);
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_on(line, '\t');
    if (fields.size() < 4) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected concept, relation, term, sentence");
    }
    auto rel = parse_relation(fields[1]);
    if (!rel) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": unknown relation '" + fields[1] + "'");
    }
    if (*rel == Relation::Cause) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": Cause is excluded from training triples");
    }
    RelationTriple t;
    t.concept_name = fields[0];
    t.relation = *rel;
    t.term = fields[2];
    // Joins any further TAB-containing tail back into the sentence.
    t.sentence = fields[3];
    for (std::size_t i = 4; i < fields.size(); ++i) {
      t.sentence += '\t';
      t.sentence += fields[i];
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CoNLL-style tagged corpus format
//
// One token per line: `surface POS chunk query_flag bio_label` separated by
// TABs; a `# concept = <string>` line precedes each sentence; sentences are
// separated by a blank line.

inline void write_conll(std::ostream& out,
                        const std::vector<TaggedSentence>& sentences) {
  for (const auto& s : sentences) {
    out << "# concept = " << s.concept_name << '\n';
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const Token& t = s.tokens[i];
      out << t.surface << '\t' << t.pos << '\t' << t.chunk << '\t'
          << (t.is_query ? '1' : '0') << '\t' << s.labels[i] << '\n';
    }
    out << '\n';
  }
}

inline void write_conll(const std::string& path,
                        const std::vector<TaggedSentence>& sentences) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write corpus file: " + path);
  write_conll(out, sentences);
}

inline std::vector<TaggedSentence> read_conll(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path);
  std::vector<TaggedSentence> sentences;
  TaggedSentence current;
  bool in_sentence = false;
  std::string line;
  std::size_t line_no = 0;
  const std::string concept_prefix = "# concept = ";

  auto flush = [&]() {
    if (in_sentence && !current.tokens.empty()) {
      sentences.push_back(std::move(current));
    }
    current = TaggedSentence{};
    in_sentence = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    strip_trailing_cr(line);
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.compare(0, concept_prefix.size(), concept_prefix) == 0) {
      flush();
      current.concept_name = line.substr(concept_prefix.size());
      in_sentence = true;
      continue;
    }
    auto fields = split_on(line, '\t');
    if (fields.size() != 5) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected 5 TAB-separated columns");
    }
    if (fields[3] != "0" && fields[3] != "1") {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": query flag must be 0 or 1");
    }
    if (!parse_bio(fields[4])) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": bad BIO label '" + fields[4] + "'");
    }
    current.tokens.push_back({fields[0], fields[1], fields[2], fields[3] == "1"});
    current.labels.push_back(fields[4]);
    in_sentence = true;
  }
  flush();
  return sentences;
}

}  // namespace defframe
