#pragma once

// Relation retriever: a bidirectional LSTM sequence tagger over definition
// sentences. Inputs are frozen basis vectors passed through a trainable
// linear layer, plus hashed POS/chunk embeddings and a query-marker
// embedding. Per-token softmax over BIO labels, greedy decoding with a
// chain-repair pass, span-level micro-averaged scoring.

#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "defframe/basis_store.hpp"
#include "defframe/corpus.hpp"
#include "defframe/core.hpp"

namespace defframe {

inline constexpr std::size_t kPosBuckets = 64;
inline constexpr std::size_t kChunkBuckets = 32;

struct TaggerConfig {
  std::size_t hidden_size = 100;
  std::size_t pos_embed_dim = 16;
  std::size_t chunk_embed_dim = 16;
  std::size_t query_embed_dim = 4;
  double learning_rate = 1e-3;
  std::size_t epochs = 30;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;

  bool operator==(const TaggerConfig&) const = default;

  void validate() const {
    if (hidden_size == 0) throw ConfigError("hidden_size must be >= 1");
    if (pos_embed_dim == 0 || chunk_embed_dim == 0 || query_embed_dim == 0) {
      throw ConfigError("embedding dimensions must be >= 1");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
  }
};

// A named view into the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
};

namespace detail {

// y += M x   (M row-major rows×cols, x: cols, y: rows)
inline void matvec_add(std::span<const double> M, std::size_t rows,
                       std::size_t cols, std::span<const double> x,
                       std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* mrow = M.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += mrow[c] * x[c];
    y[r] += acc;
  }
}

// y += Mᵀ x   (x: rows, y: cols)
inline void matvec_t_add(std::span<const double> M, std::size_t rows,
                         std::size_t cols, std::span<const double> x,
                         std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* mrow = M.data() + r * cols;
    const double xr = x[r];
    for (std::size_t c = 0; c < cols; ++c) y[c] += mrow[c] * xr;
  }
}

// M += a ⊗ b   (a: rows, b: cols)
inline void outer_add(std::span<double> M, std::span<const double> a,
                      std::span<const double> b) {
  for (std::size_t r = 0; r < a.size(); ++r) {
    double* mrow = M.data() + r * b.size();
    const double ar = a[r];
    for (std::size_t c = 0; c < b.size(); ++c) mrow[c] += ar * b[c];
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Whitespace-token reader for checkpoint files, with keyword validation.
struct TokenReader {
  std::istream& in;
  const std::string& path;

  TokenReader(std::istream& stream, const std::string& p) : in(stream), path(p) {}

  std::string next() {
    std::string tok;
    if (!(in >> tok)) throw FormatError(path + ": truncated checkpoint");
    return tok;
  }

  void expect(std::string_view keyword) {
    const std::string tok = next();
    if (tok != keyword) {
      throw FormatError(path + ": expected '" + std::string(keyword) +
                        "', found '" + tok + "'");
    }
  }

  std::size_t read_size(const char* keyword, bool with_keyword = true) {
    if (with_keyword && keyword) expect(keyword);
    const std::string tok = next();
    auto value = parse_integer(tok);
    if (!value || *value < 0) {
      throw FormatError(path + ": bad integer '" + tok + "'");
    }
    return static_cast<std::size_t>(*value);
  }

  double read_value(const char* keyword) {
    if (keyword) expect(keyword);
    const std::string tok = next();
    auto value = parse_double(tok);
    if (!value) throw FormatError(path + ": bad value '" + tok + "'");
    return *value;
  }
};

// Per-position activations of one LSTM direction, indexed by token position.
struct LstmTrace {
  std::vector<std::vector<double>> i, f, o, g, c, tanhc, h;

  void resize(std::size_t n, std::size_t hidden) {
    for (auto* v : {&i, &f, &o, &g, &c, &tanhc, &h}) {
      v->assign(n, std::vector<double>(hidden, 0.0));
    }
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Span extraction and scoring

struct Span {
  std::size_t begin = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  Relation rel = Relation::IsA;

  bool operator==(const Span&) const = default;
  bool operator<(const Span& other) const {
    return std::tie(begin, end, rel) <
           std::tie(other.begin, other.end, other.rel);
  }
};

// Decodes BIO labels into spans. An I-X without a preceding B-X/I-X opens a
// new span, so raw (unrepaired) sequences still decode.
inline std::vector<Span> label_spans(const std::vector<std::string>& labels) {
  std::vector<Span> spans;
  std::optional<Span> open;
  auto close = [&]() {
    if (open) {
      spans.push_back(*open);
      open.reset();
    }
  };
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const auto tag = parse_bio(labels[t]);
    if (!tag) throw Error("label_spans: bad BIO label '" + labels[t] + "'");
    if (tag->kind == BioTag::Outside) {
      close();
    } else if (tag->kind == BioTag::Begin ||
               (open && open->rel != tag->rel) || !open) {
      close();
      open = Span{t, t + 1, tag->rel};
    } else {
      open->end = t + 1;
    }
  }
  close();
  return spans;
}

struct SpanScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold spans
};

struct SpanEval {
  SpanScore micro;
  std::map<Relation, SpanScore> per_relation;
};

namespace detail {

struct SpanCounts {
  std::size_t tp = 0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;

  // No predictions and no gold spans counts as a perfect score; an empty
  // prediction set against nonempty gold scores zero precision.
  SpanScore score() const {
    if (n_pred == 0 && n_gold == 0) return {1.0, 1.0, 1.0, 0};
    SpanScore s;
    s.support = n_gold;
    s.precision = n_pred == 0 ? 0.0
                              : static_cast<double>(tp) /
                                    static_cast<double>(n_pred);
    s.recall = n_gold == 0 ? 0.0
                           : static_cast<double>(tp) /
                                 static_cast<double>(n_gold);
    s.f1 = (s.precision + s.recall) == 0.0
               ? 0.0
               : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
  }
};

}  // namespace detail

// Micro-averaged exact-match span scores over a corpus: a predicted span
// counts only when both boundaries and the relation match a gold span.
inline SpanEval score_spans(
    const std::vector<std::vector<std::string>>& gold,
    const std::vector<std::vector<std::string>>& predicted) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("score_spans: corpus size mismatch");
  }
  detail::SpanCounts micro;
  std::map<Relation, detail::SpanCounts> per_rel;
  for (Relation rel : kAllRelations) per_rel[rel];  // stable key set
  for (std::size_t s = 0; s < gold.size(); ++s) {
    auto gold_spans = label_spans(gold[s]);
    auto pred_spans = label_spans(predicted[s]);
    std::sort(gold_spans.begin(), gold_spans.end());
    std::sort(pred_spans.begin(), pred_spans.end());
    for (const Span& span : pred_spans) {
      ++micro.n_pred;
      ++per_rel[span.rel].n_pred;
      if (std::binary_search(gold_spans.begin(), gold_spans.end(), span)) {
        ++micro.tp;
        ++per_rel[span.rel].tp;
      }
    }
    for (const Span& span : gold_spans) {
      ++micro.n_gold;
      ++per_rel[span.rel].n_gold;
    }
  }
  SpanEval eval;
  eval.micro = micro.score();
  for (const auto& [rel, counts] : per_rel) {
    eval.per_relation[rel] = counts.score();
  }
  return eval;
}

// ---------------------------------------------------------------------------
// Model

class TaggerModel {
 public:
  // Builds an initialized model. Weights are Glorot-uniform per block
  // (biases use their own length for both fans), then the forget-gate bias
  // segments are set to 1 so memory cells start out retentive.
  static TaggerModel create(const TaggerConfig& config, std::size_t basis_dim,
                            std::vector<std::string> labels = bio_label_set()) {
    config.validate();
    if (basis_dim == 0) throw ConfigError("basis_dim must be >= 1");
    if (labels.empty()) throw ConfigError("label set must be nonempty");
    TaggerModel m;
    m.config_ = config;
    m.basis_dim_ = basis_dim;
    m.labels_ = std::move(labels);
    for (std::size_t i = 0; i < m.labels_.size(); ++i) {
      if (!m.label_index_.emplace(m.labels_[i], i).second) {
        throw ConfigError("duplicate label '" + m.labels_[i] + "'");
      }
    }
    m.register_blocks();
    m.init_params();
    return m;
  }

  const TaggerConfig& config() const { return config_; }
  std::size_t basis_dim() const { return basis_dim_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  std::span<const double> block_values(std::string_view name) const {
    const ParamBlock& b = block(name);
    return {params_.data() + b.offset, b.size()};
  }

  // Per-token label distributions for one sentence.
  std::vector<std::vector<double>> probabilities(const TaggedSentence& sentence,
                                                 const BasisStore& basis) const {
    Trace trace;
    forward(sentence, basis, trace);
    return trace.probs;
  }

  // Mean per-token cross-entropy of the gold labels.
  double loss(const TaggedSentence& sentence, const BasisStore& basis) const {
    check_labeled(sentence);
    Trace trace;
    forward(sentence, basis, trace);
    double total = 0.0;
    for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
      total -= std::log(trace.probs[t][gold_index(sentence.labels[t])]);
    }
    return total / static_cast<double>(sentence.tokens.size());
  }

  // Loss plus exact analytic gradients, accumulated into `grads` (same
  // layout as params(); caller zeroes).
  double loss_and_grads(const TaggedSentence& sentence, const BasisStore& basis,
                        std::vector<double>& grads) const {
    check_labeled(sentence);
    if (grads.size() != params_.size()) {
      throw std::invalid_argument("loss_and_grads: gradient buffer size mismatch");
    }
    Trace trace;
    forward(sentence, basis, trace);
    const std::size_t n = sentence.tokens.size();
    const std::size_t h = config_.hidden_size;
    const std::size_t L = labels_.size();

    double total = 0.0;
    // dL/dh for each direction, fed by the output layer.
    std::vector<std::vector<double>> dh_fwd(n, std::vector<double>(h, 0.0));
    std::vector<std::vector<double>> dh_bwd(n, std::vector<double>(h, 0.0));
    const ParamBlock& out_W = block("out_W");
    const ParamBlock& out_b = block("out_b");
    std::vector<double> dz(L);
    std::vector<double> h2(2 * h);
    std::vector<double> dh2(2 * h);
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t gold = gold_index(sentence.labels[t]);
      total -= std::log(trace.probs[t][gold]);
      for (std::size_t l = 0; l < L; ++l) {
        dz[l] = (trace.probs[t][l] - (l == gold ? 1.0 : 0.0)) /
                static_cast<double>(n);
      }
      std::copy(trace.fwd.h[t].begin(), trace.fwd.h[t].end(), h2.begin());
      std::copy(trace.bwd.h[t].begin(), trace.bwd.h[t].end(), h2.begin() + h);
      detail::outer_add(grad_span(grads, out_W), dz, h2);
      for (std::size_t l = 0; l < L; ++l) grads[out_b.offset + l] += dz[l];
      std::fill(dh2.begin(), dh2.end(), 0.0);
      detail::matvec_t_add(param_span(out_W), L, 2 * h, dz, dh2);
      std::copy(dh2.begin(), dh2.begin() + h, dh_fwd[t].begin());
      std::copy(dh2.begin() + h, dh2.end(), dh_bwd[t].begin());
    }

    // dL/dx accumulated from both directions, then routed to the input
    // layers.
    std::vector<std::vector<double>> dx(n, std::vector<double>(in_dim(), 0.0));
    backprop_direction(trace, trace.fwd, dh_fwd, /*reverse=*/false, grads, dx);
    backprop_direction(trace, trace.bwd, dh_bwd, /*reverse=*/true, grads, dx);

    const ParamBlock& word_W = block("word_W");
    const ParamBlock& word_b = block("word_b");
    const ParamBlock& embed_pos = block("embed_pos");
    const ParamBlock& embed_chunk = block("embed_chunk");
    const ParamBlock& embed_query = block("embed_query");
    const std::size_t bd = basis_dim_;
    const std::size_t pd = config_.pos_embed_dim;
    const std::size_t cd = config_.chunk_embed_dim;
    const std::size_t qd = config_.query_embed_dim;
    for (std::size_t t = 0; t < n; ++t) {
      std::span<const double> dxt(dx[t]);
      const auto dxw = dxt.subspan(0, bd);
      detail::outer_add(grad_span(grads, word_W), dxw, trace.word[t]);
      for (std::size_t i = 0; i < bd; ++i) grads[word_b.offset + i] += dxw[i];
      double* prow = grads.data() + embed_pos.offset + trace.pos_row[t] * pd;
      for (std::size_t i = 0; i < pd; ++i) prow[i] += dxt[bd + i];
      double* crow = grads.data() + embed_chunk.offset + trace.chunk_row[t] * cd;
      for (std::size_t i = 0; i < cd; ++i) crow[i] += dxt[bd + pd + i];
      double* qrow = grads.data() + embed_query.offset + trace.query_row[t] * qd;
      for (std::size_t i = 0; i < qd; ++i) qrow[i] += dxt[bd + pd + cd + i];
    }
    return total / static_cast<double>(n);
  }

  // Greedy per-token argmax followed by a repair pass: an I-X that does not
  // continue a B-X/I-X becomes B-X, so outputs are always valid chains.
  std::vector<std::string> predict(const TaggedSentence& sentence,
                                   const BasisStore& basis) const {
    const auto probs = probabilities(sentence, basis);
    std::vector<std::string> out;
    out.reserve(probs.size());
    for (const auto& p : probs) {
      std::size_t best = 0;
      for (std::size_t l = 1; l < p.size(); ++l) {
        if (p[l] > p[best]) best = l;
      }
      out.push_back(labels_[best]);
    }
    for (std::size_t t = 0; t < out.size(); ++t) {
      auto tag = parse_bio(out[t]);
      if (tag->kind != BioTag::Inside) continue;
      bool chained = false;
      if (t > 0) {
        auto prev = parse_bio(out[t - 1]);
        chained = prev->kind != BioTag::Outside && prev->rel == tag->rel;
      }
      if (!chained) out[t] = "B-" + std::string(relation_name(tag->rel));
    }
    return out;
  }

  // -------------------------------------------------------------------------
  // Checkpoint IO (text, value-exact round trip)

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write tagger checkpoint: " + path);
    out << "defframe-tagger/1\n";
    out << "hidden_size " << config_.hidden_size << '\n';
    out << "pos_embed_dim " << config_.pos_embed_dim << '\n';
    out << "chunk_embed_dim " << config_.chunk_embed_dim << '\n';
    out << "query_embed_dim " << config_.query_embed_dim << '\n';
    out << "learning_rate " << format_double(config_.learning_rate) << '\n';
    out << "epochs " << config_.epochs << '\n';
    out << "clip_norm " << format_double(config_.clip_norm) << '\n';
    out << "seed " << config_.seed << '\n';
    out << "basis_dim " << basis_dim_ << '\n';
    out << "labels " << labels_.size();
    for (const auto& label : labels_) out << ' ' << label;
    out << '\n';
    out << "params " << blocks_.size() << '\n';
    for (const ParamBlock& b : blocks_) {
      out << "param " << b.name << ' ' << b.rows << ' ' << b.cols << '\n';
      for (std::size_t r = 0; r < b.rows; ++r) {
        for (std::size_t c = 0; c < b.cols; ++c) {
          if (c > 0) out << ' ';
          out << format_double(params_[b.offset + r * b.cols + c]);
        }
        out << '\n';
      }
    }
    if (!out) throw Error("write failed: " + path);
  }

  static TaggerModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open tagger checkpoint: " + path);
    std::string magic;
    if (!std::getline(in, magic)) throw FormatError(path + ": empty file");
    strip_trailing_cr(magic);
    if (magic != "defframe-tagger/1") {
      throw FormatError(path + ": unrecognized checkpoint format '" + magic + "'");
    }
    detail::TokenReader reader(in, path);
    TaggerConfig config;
    config.hidden_size = reader.read_size("hidden_size");
    config.pos_embed_dim = reader.read_size("pos_embed_dim");
    config.chunk_embed_dim = reader.read_size("chunk_embed_dim");
    config.query_embed_dim = reader.read_size("query_embed_dim");
    config.learning_rate = reader.read_value("learning_rate");
    config.epochs = reader.read_size("epochs");
    config.clip_norm = reader.read_value("clip_norm");
    config.seed = reader.read_size("seed");
    const std::size_t basis_dim = reader.read_size("basis_dim");
    const std::size_t n_labels = reader.read_size("labels");
    std::vector<std::string> labels;
    labels.reserve(n_labels);
    for (std::size_t i = 0; i < n_labels; ++i) labels.push_back(reader.next());
    TaggerModel m = create(config, basis_dim, std::move(labels));
    const std::size_t n_blocks = reader.read_size("params");
    if (n_blocks != m.blocks_.size()) {
      throw FormatError(path + ": expected " + std::to_string(m.blocks_.size()) +
                        " parameter blocks, found " + std::to_string(n_blocks));
    }
    for (const ParamBlock& b : m.blocks_) {
      reader.expect("param");
      reader.expect(b.name);
      if (reader.read_size("rows", false) != b.rows ||
          reader.read_size("cols", false) != b.cols) {
        throw FormatError(path + ": shape mismatch for block '" + b.name + "'");
      }
      for (std::size_t i = 0; i < b.size(); ++i) {
        m.params_[b.offset + i] = reader.read_value(nullptr);
      }
    }
    return m;
  }

  bool operator==(const TaggerModel& other) const {
    return config_ == other.config_ && basis_dim_ == other.basis_dim_ &&
           labels_ == other.labels_ && params_ == other.params_;
  }

 private:
  // Per-sentence forward activations.
  struct Trace {
    std::vector<std::vector<double>> word;  // raw basis vectors
    std::vector<std::size_t> pos_row, chunk_row, query_row;
    std::vector<std::vector<double>> x;  // assembled inputs
    detail::LstmTrace fwd, bwd;
    std::vector<std::vector<double>> probs;
  };

  std::size_t in_dim() const {
    return basis_dim_ + config_.pos_embed_dim + config_.chunk_embed_dim +
           config_.query_embed_dim;
  }

  const ParamBlock& block(std::string_view name) const {
    for (const ParamBlock& b : blocks_) {
      if (b.name == name) return b;
    }
    throw Error("unknown parameter block '" + std::string(name) + "'");
  }

  std::span<const double> param_span(const ParamBlock& b) const {
    return {params_.data() + b.offset, b.size()};
  }

  static std::span<double> grad_span(std::vector<double>& grads,
                                     const ParamBlock& b) {
    return {grads.data() + b.offset, b.size()};
  }

  void register_blocks() {
    const std::size_t h = config_.hidden_size;
    auto add = [this](std::string name, std::size_t rows, std::size_t cols) {
      const std::size_t offset = blocks_.empty()
                                     ? 0
                                     : blocks_.back().offset +
                                           blocks_.back().size();
      blocks_.push_back({std::move(name), offset, rows, cols});
    };
    add("embed_pos", kPosBuckets, config_.pos_embed_dim);
    add("embed_chunk", kChunkBuckets, config_.chunk_embed_dim);
    add("embed_query", 2, config_.query_embed_dim);
    add("word_W", basis_dim_, basis_dim_);
    add("word_b", 1, basis_dim_);
    add("fwd_W", 4 * h, in_dim());
    add("fwd_U", 4 * h, h);
    add("fwd_b", 1, 4 * h);
    add("bwd_W", 4 * h, in_dim());
    add("bwd_U", 4 * h, h);
    add("bwd_b", 1, 4 * h);
    add("out_W", labels_.size(), 2 * h);
    add("out_b", 1, labels_.size());
    params_.assign(blocks_.back().offset + blocks_.back().size(), 0.0);
  }

  void init_params() {
    Rng rng(config_.seed);
    for (const ParamBlock& b : blocks_) {
      // Bias rows use their own length for both fans.
      const double fan_in = static_cast<double>(b.cols);
      const double fan_out =
          b.rows == 1 ? static_cast<double>(b.cols) : static_cast<double>(b.rows);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (std::size_t i = 0; i < b.size(); ++i) {
        params_[b.offset + i] = (2.0 * rng.uniform() - 1.0) * limit;
      }
    }
    // Forget-gate biases start at exactly 1.
    const std::size_t h = config_.hidden_size;
    for (const char* name : {"fwd_b", "bwd_b"}) {
      const ParamBlock& b = block(name);
      for (std::size_t i = h; i < 2 * h; ++i) params_[b.offset + i] = 1.0;
    }
  }

  std::size_t gold_index(const std::string& label) const {
    auto it = label_index_.find(label);
    if (it == label_index_.end()) {
      throw Error("label '" + label + "' is outside the model's label set");
    }
    return it->second;
  }

  static void check_labeled(const TaggedSentence& sentence) {
    if (sentence.tokens.empty()) {
      throw std::invalid_argument("empty sentence");
    }
    if (sentence.labels.size() != sentence.tokens.size()) {
      throw std::invalid_argument("sentence labels do not match tokens");
    }
  }

  void forward(const TaggedSentence& sentence, const BasisStore& basis,
               Trace& trace) const {
    if (sentence.tokens.empty()) {
      throw std::invalid_argument("empty sentence");
    }
    if (basis.dim() != basis_dim_) {
      throw std::invalid_argument("basis dimension does not match model");
    }
    const std::size_t n = sentence.tokens.size();
    const std::size_t h = config_.hidden_size;
    const std::size_t bd = basis_dim_;
    const std::size_t pd = config_.pos_embed_dim;
    const std::size_t cd = config_.chunk_embed_dim;
    const std::size_t qd = config_.query_embed_dim;

    trace.word.assign(n, std::vector<double>(bd, 0.0));
    trace.pos_row.resize(n);
    trace.chunk_row.resize(n);
    trace.query_row.resize(n);
    trace.x.assign(n, std::vector<double>(in_dim(), 0.0));

    const ParamBlock& word_W = block("word_W");
    const ParamBlock& word_b = block("word_b");
    const ParamBlock& embed_pos = block("embed_pos");
    const ParamBlock& embed_chunk = block("embed_chunk");
    const ParamBlock& embed_query = block("embed_query");
    for (std::size_t t = 0; t < n; ++t) {
      const Token& tok = sentence.tokens[t];
      auto v = basis.vector_of(tok.surface);
      if (!v.empty()) {
        std::copy(v.begin(), v.end(), trace.word[t].begin());
      }
      trace.pos_row[t] = fnv1a64(tok.pos) % kPosBuckets;
      trace.chunk_row[t] = fnv1a64(tok.chunk) % kChunkBuckets;
      trace.query_row[t] = tok.is_query ? 1 : 0;

      std::span<double> x(trace.x[t]);
      auto xw = x.subspan(0, bd);
      for (std::size_t i = 0; i < bd; ++i) {
        xw[i] = params_[word_b.offset + i];
      }
      detail::matvec_add(param_span(word_W), bd, bd, trace.word[t], xw);
      const double* prow =
          params_.data() + embed_pos.offset + trace.pos_row[t] * pd;
      for (std::size_t i = 0; i < pd; ++i) x[bd + i] = prow[i];
      const double* crow =
          params_.data() + embed_chunk.offset + trace.chunk_row[t] * cd;
      for (std::size_t i = 0; i < cd; ++i) x[bd + pd + i] = crow[i];
      const double* qrow =
          params_.data() + embed_query.offset + trace.query_row[t] * qd;
      for (std::size_t i = 0; i < qd; ++i) x[bd + pd + cd + i] = qrow[i];
    }

    run_direction(trace, trace.fwd, /*reverse=*/false);
    run_direction(trace, trace.bwd, /*reverse=*/true);

    const ParamBlock& out_W = block("out_W");
    const ParamBlock& out_b = block("out_b");
    const std::size_t L = labels_.size();
    trace.probs.assign(n, std::vector<double>(L, 0.0));
    std::vector<double> h2(2 * h);
    for (std::size_t t = 0; t < n; ++t) {
      std::copy(trace.fwd.h[t].begin(), trace.fwd.h[t].end(), h2.begin());
      std::copy(trace.bwd.h[t].begin(), trace.bwd.h[t].end(), h2.begin() + h);
      std::vector<double>& p = trace.probs[t];
      for (std::size_t l = 0; l < L; ++l) p[l] = params_[out_b.offset + l];
      detail::matvec_add(param_span(out_W), L, 2 * h, h2, p);
      // Max-subtracted softmax.
      double zmax = p[0];
      for (double z : p) zmax = std::max(zmax, z);
      double total = 0.0;
      for (double& z : p) {
        z = std::exp(z - zmax);
        total += z;
      }
      for (double& z : p) z /= total;
    }
  }

  // Runs one LSTM direction over the assembled inputs. Gate order in the
  // packed pre-activations is [input, forget, output, candidate].
  void run_direction(Trace& trace, detail::LstmTrace& lt, bool reverse) const {
    const std::size_t n = trace.x.size();
    const std::size_t h = config_.hidden_size;
    const ParamBlock& W = block(reverse ? "bwd_W" : "fwd_W");
    const ParamBlock& U = block(reverse ? "bwd_U" : "fwd_U");
    const ParamBlock& B = block(reverse ? "bwd_b" : "fwd_b");
    lt.resize(n, h);
    std::vector<double> pre(4 * h);
    std::vector<double> h_prev(h, 0.0);
    std::vector<double> c_prev(h, 0.0);
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t t = reverse ? n - 1 - step : step;
      for (std::size_t j = 0; j < 4 * h; ++j) pre[j] = params_[B.offset + j];
      detail::matvec_add(param_span(W), 4 * h, in_dim(), trace.x[t], pre);
      detail::matvec_add(param_span(U), 4 * h, h, h_prev, pre);
      for (std::size_t j = 0; j < h; ++j) {
        const double iv = detail::sigmoid(pre[j]);
        const double fv = detail::sigmoid(pre[h + j]);
        const double ov = detail::sigmoid(pre[2 * h + j]);
        const double gv = std::tanh(pre[3 * h + j]);
        const double cv = fv * c_prev[j] + iv * gv;
        const double tc = std::tanh(cv);
        lt.i[t][j] = iv;
        lt.f[t][j] = fv;
        lt.o[t][j] = ov;
        lt.g[t][j] = gv;
        lt.c[t][j] = cv;
        lt.tanhc[t][j] = tc;
        lt.h[t][j] = ov * tc;
      }
      h_prev = lt.h[t];
      c_prev = lt.c[t];
    }
  }

  // Reverse-mode pass through one direction. dh_extra carries the output
  // layer's gradient per position; dx accumulates input gradients.
  void backprop_direction(const Trace& trace, const detail::LstmTrace& lt,
                          const std::vector<std::vector<double>>& dh_extra,
                          bool reverse, std::vector<double>& grads,
                          std::vector<std::vector<double>>& dx) const {
    const std::size_t n = trace.x.size();
    const std::size_t h = config_.hidden_size;
    const ParamBlock& W = block(reverse ? "bwd_W" : "fwd_W");
    const ParamBlock& U = block(reverse ? "bwd_U" : "fwd_U");
    const ParamBlock& B = block(reverse ? "bwd_b" : "fwd_b");
    std::vector<double> dh_carry(h, 0.0);
    std::vector<double> dc_carry(h, 0.0);
    std::vector<double> dpre(4 * h);
    std::vector<double> dh(h);
    const std::vector<double> zeros(h, 0.0);
    for (std::size_t step = 0; step < n; ++step) {
      // Iterate positions in reverse processing order.
      const std::size_t t = reverse ? step : n - 1 - step;
      const bool has_prev = step + 1 < n;
      const std::size_t t_prev = reverse ? t + 1 : t - 1;
      const std::vector<double>& c_prev = has_prev ? lt.c[t_prev] : zeros;
      const std::vector<double>& h_prev = has_prev ? lt.h[t_prev] : zeros;
      for (std::size_t j = 0; j < h; ++j) {
        dh[j] = dh_extra[t][j] + dh_carry[j];
        const double tc = lt.tanhc[t][j];
        const double dov = dh[j] * tc;
        const double dcv = dc_carry[j] + dh[j] * lt.o[t][j] * (1.0 - tc * tc);
        const double div = dcv * lt.g[t][j];
        const double dfv = dcv * c_prev[j];
        const double dgv = dcv * lt.i[t][j];
        dc_carry[j] = dcv * lt.f[t][j];
        dpre[j] = div * lt.i[t][j] * (1.0 - lt.i[t][j]);
        dpre[h + j] = dfv * lt.f[t][j] * (1.0 - lt.f[t][j]);
        dpre[2 * h + j] = dov * lt.o[t][j] * (1.0 - lt.o[t][j]);
        dpre[3 * h + j] = dgv * (1.0 - lt.g[t][j] * lt.g[t][j]);
      }
      detail::outer_add(grad_span(grads, W), dpre, trace.x[t]);
      detail::outer_add(grad_span(grads, U), dpre, h_prev);
      for (std::size_t j = 0; j < 4 * h; ++j) grads[B.offset + j] += dpre[j];
      detail::matvec_t_add(param_span(W), 4 * h, in_dim(), dpre, dx[t]);
      std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
      detail::matvec_t_add(param_span(U), 4 * h, h, dpre, dh_carry);
    }
  }

  TaggerConfig config_;
  std::size_t basis_dim_ = 0;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> label_index_;
  std::vector<ParamBlock> blocks_;
  std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// Evaluation and training

inline SpanEval evaluate_spans(const TaggerModel& model,
                               const std::vector<TaggedSentence>& sentences,
                               const BasisStore& basis) {
  std::vector<std::vector<std::string>> gold;
  std::vector<std::vector<std::string>> predicted;
  gold.reserve(sentences.size());
  predicted.reserve(sentences.size());
  for (const auto& s : sentences) {
    gold.push_back(s.labels);
    predicted.push_back(model.predict(s, basis));
  }
  return score_spans(gold, predicted);
}

struct EpochStats {
  double train_loss = 0.0;
  double dev_f1 = 0.0;
};

struct TrainResult {
  TaggerModel model;  // snapshot with the best dev F1 (earliest on ties)
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 means the initial model
  double best_dev_f1 = 0.0;
};

// Single-sentence SGD with global-norm gradient clipping. After every epoch
// the dev set is scored and the best-scoring snapshot is kept.
inline TrainResult train_tagger(const TaggerConfig& config,
                                const std::vector<TaggedSentence>& train,
                                const std::vector<TaggedSentence>& dev,
                                const BasisStore& basis) {
  config.validate();
  if (train.empty()) throw Error("train_tagger: empty training set");
  TaggerModel model = TaggerModel::create(config, basis.dim());

  TrainResult result{model, {}, 0, 0.0};
  result.best_dev_f1 = -1.0;

  // Distinct stream from parameter initialization.
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grads(model.params().size(), 0.0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      std::fill(grads.begin(), grads.end(), 0.0);
      epoch_loss += model.loss_and_grads(train[idx], basis, grads);
      const double norm = std::sqrt(squared_norm(grads));
      const double scale =
          norm > config.clip_norm ? config.clip_norm / norm : 1.0;
      auto& params = model.params();
      for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= config.learning_rate * scale * grads[i];
      }
    }
    EpochStats stats;
    stats.train_loss = epoch_loss / static_cast<double>(train.size());
    stats.dev_f1 = evaluate_spans(model, dev, basis).micro.f1;
    result.epochs.push_back(stats);
    if (stats.dev_f1 > result.best_dev_f1) {
      result.best_dev_f1 = stats.dev_f1;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  if (result.best_dev_f1 < 0.0) {
    // No epochs ran; keep the freshly initialized model.
    result.best_dev_f1 = 0.0;
  }
  return result;
}

}  // namespace defframe
