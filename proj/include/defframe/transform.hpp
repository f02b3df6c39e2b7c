#pragma once

// Linear transforms over encoded representations: Y = W·X + b where X is
// either a frame's masked row block (row-mixing W) or a single basis vector.
// Fitting minimizes the squared gap between transformed-cosine scores and
// normalized gold similarities with full-batch gradient descent under
// k-fold cross-validation, always reporting the identity baseline on the
// same folds.

#include <fstream>
#include <unordered_map>

#include "defframe/basis_store.hpp"
#include "defframe/core.hpp"
#include "defframe/frames.hpp"
#include "defframe/sim_eval.hpp"

namespace defframe {

class LinearTransform {
 public:
  enum class Mode { Frame, Basis };

  LinearTransform() = default;
  LinearTransform(Mode mode, std::size_t rows, std::size_t cols)
      : mode_(mode), rows_(rows), cols_(cols), W_(rows * rows, 0.0),
        b_(rows * cols, 0.0) {
    if (rows == 0 || cols == 0) {
      throw std::invalid_argument("LinearTransform: empty shape");
    }
  }

  static LinearTransform identity(Mode mode, std::size_t rows,
                                  std::size_t cols) {
    LinearTransform t(mode, rows, cols);
    for (std::size_t r = 0; r < rows; ++r) t.W_[r * rows + r] = 1.0;
    return t;
  }

  Mode mode() const { return mode_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::vector<double>& W() { return W_; }
  const std::vector<double>& W() const { return W_; }
  std::vector<double>& b() { return b_; }
  const std::vector<double>& b() const { return b_; }

  // Y[r,c] = Σ_k W[r,k]·X[k,c] + b[r,c] over the flattened row-major view.
  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != rows_ * cols_) {
      throw std::invalid_argument("LinearTransform::apply: size mismatch");
    }
    std::vector<double> y(rows_ * cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t k = 0; k < rows_; ++k) {
        const double w = W_[r * rows_ + k];
        const double* xrow = x.data() + k * cols_;
        double* yrow = y.data() + r * cols_;
        for (std::size_t c = 0; c < cols_; ++c) yrow[c] += w * xrow[c];
      }
      for (std::size_t c = 0; c < cols_; ++c) {
        y[r * cols_ + c] += b_[r * cols_ + c];
      }
    }
    return y;
  }

  // Inverse map X = W⁻¹·(Y − b), i.e. {W⁻¹, −W⁻¹·b}. Absent when W is
  // singular or too ill-conditioned to invert reliably.
  std::optional<LinearTransform> invert() const {
    const std::size_t n = rows_;
    // Gauss-Jordan with partial pivoting on [W | I].
    std::vector<double> a(W_);
    std::vector<double> inv(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
    double max_abs = 0.0;
    for (double v : a) max_abs = std::max(max_abs, std::abs(v));
    if (max_abs == 0.0) return std::nullopt;
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t pivot = col;
      for (std::size_t r = col + 1; r < n; ++r) {
        if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
      }
      const double pv = a[pivot * n + col];
      if (std::abs(pv) < 1e-12 * max_abs) return std::nullopt;
      if (pivot != col) {
        for (std::size_t c = 0; c < n; ++c) {
          std::swap(a[pivot * n + c], a[col * n + c]);
          std::swap(inv[pivot * n + c], inv[col * n + c]);
        }
      }
      const double scale = 1.0 / a[col * n + col];
      for (std::size_t c = 0; c < n; ++c) {
        a[col * n + c] *= scale;
        inv[col * n + c] *= scale;
      }
      for (std::size_t r = 0; r < n; ++r) {
        if (r == col) continue;
        const double factor = a[r * n + col];
        if (factor == 0.0) continue;
        for (std::size_t c = 0; c < n; ++c) {
          a[r * n + c] -= factor * a[col * n + c];
          inv[r * n + c] -= factor * inv[col * n + c];
        }
      }
    }
    LinearTransform out(mode_, rows_, cols_);
    out.W_ = std::move(inv);
    // b' = −W⁻¹·b
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < n; ++k) {
        const double w = out.W_[r * n + k];
        for (std::size_t c = 0; c < cols_; ++c) {
          out.b_[r * cols_ + c] -= w * b_[k * cols_ + c];
        }
      }
    }
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write transform file: " + path);
    out << "defframe-lt/1 " << (mode_ == Mode::Frame ? "frame" : "basis") << ' '
        << rows_ << ' ' << cols_ << '\n';
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < rows_; ++c) {
        if (c > 0) out << ' ';
        out << format_double(W_[r * rows_ + c]);
      }
      out << '\n';
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) {
        if (c > 0) out << ' ';
        out << format_double(b_[r * cols_ + c]);
      }
      out << '\n';
    }
    if (!out) throw Error("write failed: " + path);
  }

  static LinearTransform load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open transform file: " + path);
    std::string header;
    if (!std::getline(in, header)) throw FormatError(path + ": empty file");
    strip_trailing_cr(header);
    const auto fields = split_whitespace(header);
    if (fields.size() != 4 || fields[0] != "defframe-lt/1") {
      throw FormatError(path + ": bad header '" + header + "'");
    }
    Mode mode;
    if (fields[1] == "frame") {
      mode = Mode::Frame;
    } else if (fields[1] == "basis") {
      mode = Mode::Basis;
    } else {
      throw FormatError(path + ": unknown mode '" + fields[1] + "'");
    }
    const auto rows = parse_integer(fields[2]);
    const auto cols = parse_integer(fields[3]);
    if (!rows || !cols || *rows <= 0 || *cols <= 0) {
      throw FormatError(path + ": bad header dimensions");
    }
    LinearTransform t(mode, static_cast<std::size_t>(*rows),
                      static_cast<std::size_t>(*cols));
    auto read_matrix = [&](std::vector<double>& m, std::size_t r_count,
                           std::size_t c_count) {
      std::string line;
      for (std::size_t r = 0; r < r_count; ++r) {
        if (!std::getline(in, line)) throw FormatError(path + ": truncated");
        strip_trailing_cr(line);
        const auto values = split_whitespace(line);
        if (values.size() != c_count) {
          throw FormatError(path + ": expected " + std::to_string(c_count) +
                            " values per row");
        }
        for (std::size_t c = 0; c < c_count; ++c) {
          const auto v = parse_double(values[c]);
          if (!v) throw FormatError(path + ": bad value '" + values[c] + "'");
          m[r * c_count + c] = *v;
        }
      }
    };
    read_matrix(t.W_, t.rows_, t.rows_);
    read_matrix(t.b_, t.rows_, t.cols_);
    return t;
  }

  bool operator==(const LinearTransform&) const = default;

 private:
  Mode mode_ = Mode::Frame;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> W_;  // rows × rows
  std::vector<double> b_;  // rows × cols
};

// Maps a frame's masked rows through the transform; unmasked rows pass
// through unchanged.
inline EncodedFrame apply_to_frame(const LinearTransform& t,
                                   const EncodedFrame& frame,
                                   const RowMask& mask) {
  if (t.mode() != LinearTransform::Mode::Frame) {
    throw std::invalid_argument("apply_to_frame: transform is not frame-mode");
  }
  if (t.rows() != mask.count() || t.cols() != frame.dim) {
    throw std::invalid_argument("apply_to_frame: shape mismatch with mask");
  }
  std::vector<double> x;
  x.reserve(t.rows() * t.cols());
  for (std::size_t r = 0; r < kSchemaRows; ++r) {
    if (!mask.rows[r]) continue;
    const auto row = frame.row(r);
    x.insert(x.end(), row.begin(), row.end());
  }
  const auto y = t.apply(x);
  EncodedFrame out = frame;
  std::size_t block = 0;
  for (std::size_t r = 0; r < kSchemaRows; ++r) {
    if (!mask.rows[r]) continue;
    auto row = out.row(r);
    std::copy(y.begin() + block * frame.dim, y.begin() + (block + 1) * frame.dim,
              row.begin());
    ++block;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fitting data

// One benchmark pair as two flat representations plus its normalized gold
// score.
struct RepPair {
  std::vector<double> a;
  std::vector<double> b;
  double gold = 0.0;
};

struct FitDataset {
  LinearTransform::Mode mode = LinearTransform::Mode::Frame;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<RepPair> pairs;
  std::size_t skipped_pairs = 0;  // benchmark pairs without representations
};

// Builds fitting data from encoded frames: each pair's representations are
// the masked row blocks of the two concepts' frames. Pairs with a missing
// frame on either side are dropped and counted.
inline FitDataset frame_fit_dataset(
    const std::vector<SimPair>& pairs,
    const std::unordered_map<std::string, EncodedFrame>& frames,
    const RowMask& mask) {
  if (mask.count() == 0) throw std::invalid_argument("empty row mask");
  FitDataset ds;
  ds.mode = LinearTransform::Mode::Frame;
  ds.rows = mask.count();
  auto masked_rows = [&](const EncodedFrame& frame) {
    std::vector<double> x;
    x.reserve(mask.count() * frame.dim);
    for (std::size_t r = 0; r < kSchemaRows; ++r) {
      if (!mask.rows[r]) continue;
      const auto row = frame.row(r);
      x.insert(x.end(), row.begin(), row.end());
    }
    return x;
  };
  for (const auto& pair : pairs) {
    const auto it1 = frames.find(ascii_lower(pair.word1));
    const auto it2 = frames.find(ascii_lower(pair.word2));
    if (it1 == frames.end() || it2 == frames.end()) {
      ++ds.skipped_pairs;
      continue;
    }
    if (ds.cols == 0) ds.cols = it1->second.dim;
    if (it1->second.dim != ds.cols || it2->second.dim != ds.cols) {
      throw Error("frame_fit_dataset: inconsistent frame dimensions");
    }
    ds.pairs.push_back({masked_rows(it1->second), masked_rows(it2->second),
                        pair.gold_norm});
  }
  return ds;
}

// Basis-mode fitting data: representations are raw term vectors (rows = dim,
// a single column).
inline FitDataset basis_fit_dataset(const std::vector<SimPair>& pairs,
                                    const BasisStore& basis) {
  FitDataset ds;
  ds.mode = LinearTransform::Mode::Basis;
  ds.rows = basis.dim();
  ds.cols = 1;
  for (const auto& pair : pairs) {
    auto v1 = basis.lookup_term(pair.word1);
    auto v2 = basis.lookup_term(pair.word2);
    if (!v1 || !v2) {
      ++ds.skipped_pairs;
      continue;
    }
    ds.pairs.push_back({std::move(*v1), std::move(*v2), pair.gold_norm});
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Objective

struct Objective {
  double mse = 0.0;
  std::size_t degenerate = 0;  // pairs whose transformed cosine is undefined
};

namespace detail {

// Cosine of the transformed pair; a zero-norm side pins the score to 0.
inline double pair_score(const LinearTransform& t, const RepPair& pair,
                         bool* degenerate) {
  const auto ya = t.apply(pair.a);
  const auto yb = t.apply(pair.b);
  const auto cos = cosine(ya, yb);
  if (degenerate) *degenerate = !cos.has_value();
  return cos.value_or(0.0);
}

}  // namespace detail

// Mean squared gap between transformed-cosine scores and gold. Degenerate
// pairs contribute (0 − gold)² and no gradient.
inline Objective objective(const LinearTransform& t,
                           const std::vector<RepPair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("objective: no pairs");
  Objective result;
  for (const auto& pair : pairs) {
    bool degenerate = false;
    const double score = detail::pair_score(t, pair, &degenerate);
    if (degenerate) ++result.degenerate;
    const double gap = score - pair.gold;
    result.mse += gap * gap;
  }
  result.mse /= static_cast<double>(pairs.size());
  return result;
}

// Objective plus analytic gradients. grad_W and grad_b are resized and
// zeroed. For each pair with cosine s = ya·yb/(‖ya‖‖yb‖):
//   ∂s/∂ya = yb/(‖ya‖‖yb‖) − (s/‖ya‖²)·ya
// routed through Y = W·X + b, i.e. ∂L/∂W += dY·Xᵀ and ∂L/∂b += dY.
inline Objective objective_and_grads(const LinearTransform& t,
                                     const std::vector<RepPair>& pairs,
                                     std::vector<double>& grad_W,
                                     std::vector<double>& grad_b) {
  if (pairs.empty()) throw std::invalid_argument("objective: no pairs");
  const std::size_t r = t.rows();
  const std::size_t c = t.cols();
  grad_W.assign(r * r, 0.0);
  grad_b.assign(r * c, 0.0);
  Objective result;
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  std::vector<double> dya(r * c), dyb(r * c);
  for (const auto& pair : pairs) {
    const auto ya = t.apply(pair.a);
    const auto yb = t.apply(pair.b);
    const double na2 = squared_norm(ya);
    const double nb2 = squared_norm(yb);
    if (na2 == 0.0 || nb2 == 0.0) {
      ++result.degenerate;
      const double gap = 0.0 - pair.gold;
      result.mse += gap * gap;
      continue;
    }
    const double na = std::sqrt(na2);
    const double nb = std::sqrt(nb2);
    const double s = dot(ya, yb) / (na * nb);
    const double gap = s - pair.gold;
    result.mse += gap * gap;
    const double dl_ds = 2.0 * gap * inv_n;
    const double denom = 1.0 / (na * nb);
    for (std::size_t i = 0; i < r * c; ++i) {
      dya[i] = dl_ds * (denom * yb[i] - (s / na2) * ya[i]);
      dyb[i] = dl_ds * (denom * ya[i] - (s / nb2) * yb[i]);
    }
    // dW[p,k] += Σ_c dY[p,c]·X[k,c] for both sides; db += dY.
    for (std::size_t p = 0; p < r; ++p) {
      for (std::size_t k = 0; k < r; ++k) {
        double acc = 0.0;
        const double* da = dya.data() + p * c;
        const double* db = dyb.data() + p * c;
        const double* xa = pair.a.data() + k * c;
        const double* xb = pair.b.data() + k * c;
        for (std::size_t j = 0; j < c; ++j) acc += da[j] * xa[j] + db[j] * xb[j];
        grad_W[p * r + k] += acc;
      }
      for (std::size_t j = 0; j < c; ++j) {
        grad_b[p * c + j] += dya[p * c + j] + dyb[p * c + j];
      }
    }
  }
  result.mse *= inv_n;
  return result;
}

// ---------------------------------------------------------------------------
// Cross-validated fitting

struct FitConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  double init_noise = 0.0;  // uniform perturbation around the identity
  std::size_t early_stop_patience = 25;
  std::size_t n_perm = 10000;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (init_noise < 0.0) throw ConfigError("init_noise must be >= 0");
    if (early_stop_patience == 0) {
      throw ConfigError("early_stop_patience must be >= 1");
    }
  }
};

struct FitReport {
  std::vector<std::optional<double>> fold_rho;           // fitted, per fold
  std::vector<std::optional<double>> fold_rho_baseline;  // identity, per fold
  double mean_rho = 0.0;
  double baseline_mean_rho = 0.0;
  double gain = 0.0;  // mean_rho − baseline_mean_rho
  double p_value = 1.0;
  std::size_t degenerate_folds = 0;  // folds without a defined correlation
  std::size_t degenerate_pairs = 0;  // test pairs scored as degenerate
  LinearTransform transform;  // fitted on all pairs (final full-data pass)
};

namespace detail {

// Full-batch descent with a halving backoff: a step is taken only if it does
// not increase the training MSE, so the final MSE never exceeds the initial
// one. Held-out MSE drives early stopping and snapshot selection.
inline LinearTransform fit_single(const FitDataset& ds,
                                  const std::vector<std::size_t>& train_idx,
                                  const std::vector<std::size_t>* heldout_idx,
                                  const FitConfig& config, Rng& rng) {
  std::vector<RepPair> train;
  train.reserve(train_idx.size());
  for (std::size_t i : train_idx) train.push_back(ds.pairs[i]);
  std::vector<RepPair> heldout;
  if (heldout_idx) {
    heldout.reserve(heldout_idx->size());
    for (std::size_t i : *heldout_idx) heldout.push_back(ds.pairs[i]);
  }

  LinearTransform t = LinearTransform::identity(ds.mode, ds.rows, ds.cols);
  if (config.init_noise > 0.0) {
    for (double& w : t.W()) {
      w += (2.0 * rng.uniform() - 1.0) * config.init_noise;
    }
    for (double& b : t.b()) {
      b += (2.0 * rng.uniform() - 1.0) * config.init_noise;
    }
  }

  LinearTransform best = t;
  double best_heldout = heldout.empty()
                            ? 0.0
                            : objective(t, heldout).mse;
  std::size_t since_improvement = 0;
  double lr = config.learning_rate;
  double train_mse = objective(t, train).mse;
  std::vector<double> grad_W, grad_b;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    objective_and_grads(t, train, grad_W, grad_b);
    LinearTransform stepped = t;
    bool accepted = false;
    for (int halving = 0; halving <= 20; ++halving) {
      for (std::size_t i = 0; i < grad_W.size(); ++i) {
        stepped.W()[i] = t.W()[i] - lr * grad_W[i];
      }
      for (std::size_t i = 0; i < grad_b.size(); ++i) {
        stepped.b()[i] = t.b()[i] - lr * grad_b[i];
      }
      const double stepped_mse = objective(stepped, train).mse;
      if (stepped_mse <= train_mse) {
        t = stepped;
        train_mse = stepped_mse;
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;  // no usable step size left
    if (!heldout.empty()) {
      const double heldout_mse = objective(t, heldout).mse;
      if (heldout_mse < best_heldout) {
        best_heldout = heldout_mse;
        best = t;
        since_improvement = 0;
      } else if (++since_improvement >= config.early_stop_patience) {
        break;
      }
    }
  }
  return heldout.empty() ? t : best;
}

}  // namespace detail

// Fits one transform per fold on its training pairs, scores the held-out
// pairs, and compares against the identity baseline on the same folds. The
// significance test runs on the pooled held-out predictions. Folds whose
// correlation is undefined on either side are counted and excluded from both
// means. The returned transform is refit on all pairs.
inline FitReport fit_transform(const FitDataset& ds,
                               const std::vector<Fold>& folds,
                               const FitConfig& config) {
  config.validate();
  if (ds.pairs.empty()) throw Error("fit_transform: no pairs to fit");
  if (folds.empty()) throw Error("fit_transform: no folds");

  FitReport report;
  const LinearTransform baseline =
      LinearTransform::identity(ds.mode, ds.rows, ds.cols);
  std::vector<double> pooled_pred;
  std::vector<double> pooled_gold;
  double sum_rho = 0.0, sum_base = 0.0;
  std::size_t counted = 0;

  for (std::size_t f = 0; f < folds.size(); ++f) {
    Rng rng(config.seed + 0x9e3779b97f4a7c15ULL * (f + 1));
    const LinearTransform fitted =
        detail::fit_single(ds, folds[f].train, &folds[f].test, config, rng);

    std::vector<double> pred, base, gold;
    for (std::size_t i : folds[f].test) {
      bool degenerate = false;
      pred.push_back(detail::pair_score(fitted, ds.pairs[i], &degenerate));
      if (degenerate) ++report.degenerate_pairs;
      base.push_back(detail::pair_score(baseline, ds.pairs[i], nullptr));
      gold.push_back(ds.pairs[i].gold);
      pooled_pred.push_back(pred.back());
      pooled_gold.push_back(gold.back());
    }
    std::optional<double> rho, base_rho;
    if (gold.size() >= 3) {
      rho = spearman(pred, gold);
      base_rho = spearman(base, gold);
    }
    report.fold_rho.push_back(rho);
    report.fold_rho_baseline.push_back(base_rho);
    if (rho && base_rho) {
      sum_rho += *rho;
      sum_base += *base_rho;
      ++counted;
    } else {
      ++report.degenerate_folds;
    }
  }
  if (counted > 0) {
    report.mean_rho = sum_rho / static_cast<double>(counted);
    report.baseline_mean_rho = sum_base / static_cast<double>(counted);
  }
  report.gain = report.mean_rho - report.baseline_mean_rho;
  if (pooled_pred.size() >= 3) {
    report.p_value =
        permutation_pvalue(pooled_pred, pooled_gold, config.n_perm, config.seed);
  }

  // Final transform over everything, early-stopped against nothing.
  Rng rng(config.seed + 0x9e3779b97f4a7c15ULL * (folds.size() + 1));
  std::vector<std::size_t> all(ds.pairs.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  report.transform = detail::fit_single(ds, all, nullptr, config, rng);
  return report;
}

inline FitReport fit_transform(const FitDataset& ds, std::size_t k_folds,
                               const FitConfig& config) {
  return fit_transform(ds, kfold(ds.pairs.size(), k_folds, config.seed),
                       config);
}

// Concatenates compatible datasets (same mode and shape) and fits them
// jointly.
inline FitDataset merge_datasets(const std::vector<FitDataset>& groups) {
  if (groups.empty()) throw Error("merge_datasets: nothing to merge");
  FitDataset merged;
  merged.mode = groups.front().mode;
  merged.rows = groups.front().rows;
  merged.cols = groups.front().cols;
  for (const auto& ds : groups) {
    if (ds.mode != merged.mode || ds.rows != merged.rows ||
        ds.cols != merged.cols) {
      throw Error("merge_datasets: incompatible dataset shapes");
    }
    merged.pairs.insert(merged.pairs.end(), ds.pairs.begin(), ds.pairs.end());
    merged.skipped_pairs += ds.skipped_pairs;
  }
  return merged;
}

}  // namespace defframe
