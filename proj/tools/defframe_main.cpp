// defframe: pipeline driver for the definition-frames toolkit.
//
// Subcommands cover every stage: align (triples → BIO corpus), train-tagger,
// extract (definitions → frames), encode (frames → matrices), eval-sim
// (benchmark correlations), fit-transform (cross-validated linear maps), and
// decode (matrices → nearest vocabulary terms). Every output file gets a
// `<name>.manifest.json` recording resolved options, input digests, seed,
// toolkit version, and wall-clock duration.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "defframe/defframe.hpp"

namespace {

using namespace defframe;

// ---------------------------------------------------------------------------
// Small utilities

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string file_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open input for digest: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  char hex[32];
  std::snprintf(hex, sizeof(hex), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(buffer.str())));
  return hex;
}

// Flat key=value config files; blank lines and # comments are skipped.
std::map<std::string, std::string> read_kv_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_trailing_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    }
    kv[key] = value;
  }
  return kv;
}

std::size_t config_size(const std::map<std::string, std::string>& kv,
                        const std::string& key, std::size_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const auto v = parse_integer(it->second);
  if (!v || *v < 0) throw ConfigError("config: bad integer for " + key);
  return static_cast<std::size_t>(*v);
}

double config_value(const std::map<std::string, std::string>& kv,
                    const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const auto v = parse_double(it->second);
  if (!v) throw ConfigError("config: bad value for " + key);
  return *v;
}

void reject_unknown_keys(const std::map<std::string, std::string>& kv,
                         const std::set<std::string>& known) {
  for (const auto& [key, value] : kv) {
    if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
}

// ---------------------------------------------------------------------------
// Run manifests

class Manifest {
 public:
  explicit Manifest(std::string subcommand)
      : subcommand_(std::move(subcommand)),
        start_(std::chrono::steady_clock::now()) {}

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }
  void set(const std::string& key, std::size_t value) {
    values_[key] = std::to_string(value);
  }
  void set_flag(const std::string& key, bool value) {
    values_[key] = value ? "true" : "false";
  }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  void add_input(const std::string& path) {
    inputs_[path] = digest_file(path);
  }

  // Writes `<output>.manifest.json` next to the named output file.
  void write_for(const std::string& output_path) const {
    const auto elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_);
    nlohmann::ordered_json doc;
    doc["subcommand"] = subcommand_;
    doc["version"] = std::string(kToolkitVersion);
    doc["seed"] = seed_;
    doc["values"] = values_;
    doc["inputs"] = inputs_;
    doc["duration_seconds"] = elapsed.count();
    const std::string path = output_path + ".manifest.json";
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest: " + path);
    out << doc.dump(2) << '\n';
  }

 private:
  std::string subcommand_;
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> inputs_;
  std::uint64_t seed_ = 0;
  std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Report tables (TSV, optional markdown rendering)

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string tsv() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i > 0) out += '\t';
      out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0) out += '\t';
        out += row[i];
      }
      out += '\n';
    }
    return out;
  }

  std::string markdown() const {
    auto line = [](const std::vector<std::string>& cells) {
      std::string out = "|";
      for (const auto& c : cells) {
        out += ' ';
        out += c;
        out += " |";
      }
      return out + '\n';
    };
    std::string out = line(header);
    std::vector<std::string> rule(header.size(), "---");
    out += line(rule);
    for (const auto& row : rows) out += line(row);
    return out;
  }
};

void emit_table(const Table& table, const std::string& out_path,
                const std::string& markdown_path, Manifest& manifest) {
  if (out_path.empty() || out_path == "-") {
    std::cout << table.tsv();
  } else {
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write report: " + out_path);
    out << table.tsv();
    out.close();
    manifest.write_for(out_path);
  }
  if (!markdown_path.empty()) {
    std::ofstream md(markdown_path);
    if (!md) throw Error("cannot write markdown report: " + markdown_path);
    md << table.markdown();
    md.close();
    manifest.write_for(markdown_path);
  }
}

// ---------------------------------------------------------------------------
// align

struct AlignOpts {
  std::string triples;
  std::string out;
  bool fallback_tagger = false;
};

void run_align(const AlignOpts& opt) {
  Manifest manifest("align");
  manifest.set("triples", opt.triples);
  manifest.set("out", opt.out);
  manifest.set_flag("fallback_tagger", opt.fallback_tagger);
  manifest.add_input(opt.triples);

  const auto triples = parse_triples(opt.triples);
  const auto result = align_triples(triples, opt.fallback_tagger);
  write_conll(opt.out, result.sentences);
  manifest.write_for(opt.out);

  const std::string skips_path = opt.out + ".skips.tsv";
  {
    std::ofstream skips(skips_path);
    if (!skips) throw Error("cannot write skip report: " + skips_path);
    skips << "index\tconcept\trelation\tterm\treason\n";
    for (const auto& skip : result.skipped) {
      const RelationTriple& t = triples[skip.index];
      skips << skip.index << '\t' << t.concept_name << '\t'
            << relation_name(t.relation) << '\t' << t.term << '\t'
            << skip_reason_name(skip.reason) << '\n';
    }
  }
  manifest.write_for(skips_path);

  std::cerr << "aligned " << result.report.aligned << " spans in "
            << result.sentences.size() << " sentences; skipped "
            << result.report.skipped() << " triples (concept-not-found "
            << result.report.concept_not_found << ", term-not-found "
            << result.report.term_not_found << ", overlapping "
            << result.report.overlapping << ")\n";
}

// ---------------------------------------------------------------------------
// train-tagger

struct TrainOpts {
  std::string corpus;
  std::string dev;
  std::string basis;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

TaggerConfig tagger_config_from(const std::map<std::string, std::string>& kv) {
  reject_unknown_keys(kv, {"hidden_size", "pos_embed_dim", "chunk_embed_dim",
                           "query_embed_dim", "learning_rate", "epochs",
                           "clip_norm", "seed"});
  TaggerConfig config;
  config.hidden_size = config_size(kv, "hidden_size", config.hidden_size);
  config.pos_embed_dim = config_size(kv, "pos_embed_dim", config.pos_embed_dim);
  config.chunk_embed_dim =
      config_size(kv, "chunk_embed_dim", config.chunk_embed_dim);
  config.query_embed_dim =
      config_size(kv, "query_embed_dim", config.query_embed_dim);
  config.learning_rate = config_value(kv, "learning_rate", config.learning_rate);
  config.epochs = config_size(kv, "epochs", config.epochs);
  config.clip_norm = config_value(kv, "clip_norm", config.clip_norm);
  config.seed = config_size(kv, "seed", 0);
  return config;
}

void run_train_tagger(const TrainOpts& opt) {
  Manifest manifest("train-tagger");
  manifest.set("corpus", opt.corpus);
  manifest.set("dev", opt.dev);
  manifest.set("basis", opt.basis);
  manifest.set("config", opt.config);
  manifest.set("out", opt.out);
  for (const auto& path : {opt.corpus, opt.dev, opt.basis, opt.config}) {
    manifest.add_input(path);
  }

  TaggerConfig config = tagger_config_from(read_kv_config(opt.config));
  if (opt.seed_given) config.seed = opt.seed;
  config.validate();
  manifest.set_seed(config.seed);

  const auto train = read_conll(opt.corpus);
  const auto dev = read_conll(opt.dev);
  const auto basis = BasisStore::load(opt.basis);
  const auto result = train_tagger(config, train, dev, basis);
  for (std::size_t e = 0; e < result.epochs.size(); ++e) {
    std::cout << "epoch " << (e + 1) << " train_loss "
              << fmt6(result.epochs[e].train_loss) << " dev_f1 "
              << fmt6(result.epochs[e].dev_f1) << '\n';
  }
  std::cout << "best epoch " << result.best_epoch << " dev_f1 "
            << fmt6(result.best_dev_f1) << '\n';
  result.model.save(opt.out);
  manifest.write_for(opt.out);
}

// ---------------------------------------------------------------------------
// extract

struct ExtractOpts {
  std::string model;
  std::string definitions;
  std::string basis;
  std::string out;
};

void run_extract(const ExtractOpts& opt) {
  Manifest manifest("extract");
  manifest.set("model", opt.model);
  manifest.set("definitions", opt.definitions);
  manifest.set("basis", opt.basis);
  manifest.set("out", opt.out);
  for (const auto& path : {opt.model, opt.definitions, opt.basis}) {
    manifest.add_input(path);
  }

  const auto model = TaggerModel::load(opt.model);
  const auto basis = BasisStore::load(opt.basis);
  if (model.basis_dim() != basis.dim()) {
    throw Error("basis dimension " + std::to_string(basis.dim()) +
                " does not match model checkpoint (" +
                std::to_string(model.basis_dim()) + ")");
  }
  const auto definitions = parse_definitions(opt.definitions);
  std::vector<DefinitionFrame> frames;
  frames.reserve(definitions.size());
  for (const auto& [concept_name, sentence] : definitions) {
    auto result = extract_frame(model, basis, concept_name, sentence);
    if (!result.concept_found) {
      std::cerr << "warning: concept '" << concept_name
                << "' not found in its definition sentence\n";
    }
    frames.push_back(std::move(result.frame));
  }
  write_frames(opt.out, frames);
  manifest.write_for(opt.out);
  std::cerr << "extracted " << frames.size() << " frames\n";
}

// ---------------------------------------------------------------------------
// encode

struct EncodeOpts {
  std::string frames;
  std::string basis;
  std::string out;
  std::string mask = "DF_all";
};

void run_encode(const EncodeOpts& opt) {
  Manifest manifest("encode");
  manifest.set("frames", opt.frames);
  manifest.set("basis", opt.basis);
  manifest.set("out", opt.out);
  manifest.set("mask", opt.mask);
  manifest.add_input(opt.frames);
  manifest.add_input(opt.basis);

  const RowMask mask = RowMask::parse(opt.mask);
  const auto frames = read_frames(opt.frames);
  const auto basis = BasisStore::load(opt.basis);
  std::vector<EncodedFrame> encoded;
  encoded.reserve(frames.size());
  std::size_t unresolved = 0;
  for (const auto& frame : frames) {
    auto result = encode_frame(frame, basis);
    unresolved += result.unresolved.size();
    // Rows outside the mask are pruned to zero.
    for (std::size_t r = 0; r < kSchemaRows; ++r) {
      if (mask.rows[r]) continue;
      auto row = result.frame.row(r);
      std::fill(row.begin(), row.end(), 0.0);
    }
    encoded.push_back(std::move(result.frame));
  }
  write_encoded(opt.out, encoded, basis.dim());
  manifest.write_for(opt.out);
  std::cerr << "encoded " << encoded.size() << " frames ("
            << unresolved << " unresolved terms)\n";
}

// ---------------------------------------------------------------------------
// eval-sim

struct EvalSimOpts {
  std::vector<std::string> enc;
  std::string basis;
  bool basis_only = false;
  std::vector<std::string> datasets;
  std::string mask = "DF_all";
  bool intersect = false;
  std::string transform;
  std::string out = "-";
  std::string markdown;
  std::size_t n_perm = 10000;
  std::uint64_t seed = 0;
};

void run_eval_sim(const EvalSimOpts& opt) {
  if (opt.enc.empty() && !opt.basis_only) {
    throw ConfigError("eval-sim: provide --enc or --basis-only");
  }
  if (opt.basis_only && opt.basis.empty()) {
    throw ConfigError("eval-sim: --basis-only requires --basis");
  }
  if (!opt.transform.empty() && opt.enc.empty()) {
    throw ConfigError("eval-sim: --transform applies to --enc representers");
  }

  Manifest manifest("eval-sim");
  manifest.set("mask", opt.mask);
  manifest.set_flag("intersect", opt.intersect);
  manifest.set("n_perm", opt.n_perm);
  manifest.set_seed(opt.seed);
  for (const auto& path : opt.enc) manifest.add_input(path);
  for (const auto& path : opt.datasets) manifest.add_input(path);
  if (!opt.basis.empty()) manifest.add_input(opt.basis);
  if (!opt.transform.empty()) manifest.add_input(opt.transform);

  const RowMask mask = RowMask::parse(opt.mask);
  std::optional<LinearTransform> transform;
  if (!opt.transform.empty()) {
    transform = LinearTransform::load(opt.transform);
    if (transform->mode() != LinearTransform::Mode::Frame) {
      throw ConfigError("eval-sim: --transform must be a frame-mode transform");
    }
  }

  // Build representers. Frame maps must outlive the representers.
  std::vector<std::unordered_map<std::string, EncodedFrame>> frame_maps;
  std::optional<BasisStore> basis;
  std::vector<std::unique_ptr<Representer>> reps;
  for (const auto& path : opt.enc) {
    auto map = index_frames(read_encoded(path));
    if (transform) {
      for (auto& [key, frame] : map) {
        frame = apply_to_frame(*transform, frame, mask);
      }
    }
    frame_maps.push_back(std::move(map));
  }
  for (std::size_t i = 0; i < opt.enc.size(); ++i) {
    reps.push_back(std::make_unique<FrameRepresenter>(frame_maps[i], mask,
                                                      file_stem(opt.enc[i])));
  }
  if (opt.basis_only) {
    basis.emplace(BasisStore::load(opt.basis));
    reps.push_back(std::make_unique<BasisRepresenter>(*basis));
  }

  // Common-vocabulary filter over all dataset words, when requested.
  std::unordered_set<std::string> common;
  if (opt.intersect) {
    std::unordered_set<std::string> words;
    for (const auto& path : opt.datasets) {
      for (const auto& pair : parse_similarity(path)) {
        words.insert(pair.word1);
        words.insert(pair.word2);
      }
    }
    for (const auto& word : words) {
      bool everywhere = true;
      for (const auto& rep : reps) {
        if (!rep->has(word)) {
          everywhere = false;
          break;
        }
      }
      if (everywhere) common.insert(word);
    }
  }

  Table table;
  table.header = {"dataset", "representer", "mask",   "n_pairs",
                  "n_skipped", "rho",        "p_value", "note"};
  EvalOptions eval_opts{opt.n_perm, opt.seed};
  for (const auto& path : opt.datasets) {
    const auto pairs = parse_similarity(path);
    for (const auto& rep : reps) {
      std::vector<std::string> row{file_stem(path), rep->name(), opt.mask};
      try {
        const auto result = evaluate(
            pairs, *rep, opt.intersect ? &common : nullptr, eval_opts);
        row.push_back(std::to_string(result.n_pairs));
        row.push_back(std::to_string(result.n_skipped));
        if (result.degenerate) {
          row.push_back("NA");
          row.push_back("NA");
          row.push_back("degenerate (constant ranks)");
        } else {
          row.push_back(fmt6(result.rho));
          row.push_back(fmt6(result.p_value));
          row.push_back("");
        }
      } catch (const Error& e) {
        row.push_back("0");
        row.push_back(std::to_string(pairs.size()));
        row.push_back("NA");
        row.push_back("NA");
        row.push_back(e.what());
      }
      table.rows.push_back(std::move(row));
    }
  }
  emit_table(table, opt.out, opt.markdown, manifest);
}

// ---------------------------------------------------------------------------
// fit-transform

struct FitOpts {
  std::string enc;
  std::string basis;
  std::vector<std::string> datasets;
  std::string rep = "frame";
  std::string mask = "DF_all";
  std::string joint;  // empty = per-dataset; otherwise the merged row label
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string config;
  double lr = 0.0;          // 0 = keep config/default
  std::size_t epochs = 0;   // meaningful only when epochs_given
  bool epochs_given = false;
  bool lr_given = false;
  std::size_t min_size = 100;
  std::string out = "-";
  std::string markdown;
  std::string save_transform;
  std::string basis_name;
};

FitConfig fit_config_from(const std::map<std::string, std::string>& kv) {
  reject_unknown_keys(kv, {"learning_rate", "epochs", "seed", "init_noise",
                           "early_stop_patience", "n_perm"});
  FitConfig config;
  config.learning_rate = config_value(kv, "learning_rate", config.learning_rate);
  config.epochs = config_size(kv, "epochs", config.epochs);
  config.seed = config_size(kv, "seed", 0);
  config.init_noise = config_value(kv, "init_noise", config.init_noise);
  config.early_stop_patience =
      config_size(kv, "early_stop_patience", config.early_stop_patience);
  config.n_perm = config_size(kv, "n_perm", config.n_perm);
  return config;
}

void run_fit_transform(const FitOpts& opt) {
  if (opt.rep != "frame" && opt.rep != "basis") {
    throw ConfigError("fit-transform: --rep must be frame or basis");
  }
  const bool basis_mode = opt.rep == "basis";
  if (basis_mode && opt.basis.empty()) {
    throw ConfigError("fit-transform: --rep basis requires --basis");
  }
  if (!basis_mode && opt.enc.empty()) {
    throw ConfigError("fit-transform: --rep frame requires --enc");
  }
  if (!opt.save_transform.empty() && opt.joint.empty() &&
      opt.datasets.size() > 1) {
    throw ConfigError(
        "fit-transform: --save-transform needs a single dataset or --joint");
  }

  Manifest manifest("fit-transform");
  manifest.set("rep", opt.rep);
  manifest.set("mask", opt.mask);
  manifest.set("folds", opt.folds);
  manifest.set("min_size", opt.min_size);
  if (!opt.joint.empty()) manifest.set("joint", opt.joint);
  for (const auto& path : opt.datasets) manifest.add_input(path);
  if (!opt.enc.empty()) manifest.add_input(opt.enc);
  if (!opt.basis.empty()) manifest.add_input(opt.basis);
  if (!opt.config.empty()) manifest.add_input(opt.config);

  FitConfig config;
  if (!opt.config.empty()) config = fit_config_from(read_kv_config(opt.config));
  if (opt.seed_given) config.seed = opt.seed;
  if (opt.lr_given) config.learning_rate = opt.lr;
  if (opt.epochs_given) config.epochs = opt.epochs;
  config.validate();
  manifest.set_seed(config.seed);
  manifest.set("epochs", config.epochs);
  manifest.set("learning_rate", format_double(config.learning_rate));

  const RowMask mask = RowMask::parse(opt.mask);
  std::optional<BasisStore> basis;
  std::unordered_map<std::string, EncodedFrame> frames;
  if (basis_mode) {
    basis.emplace(BasisStore::load(opt.basis));
  } else {
    frames = index_frames(read_encoded(opt.enc));
  }
  const std::string basis_label =
      !opt.basis_name.empty()
          ? opt.basis_name
          : file_stem(basis_mode ? opt.basis : opt.enc);

  auto build = [&](const std::vector<SimPair>& pairs) {
    return basis_mode ? basis_fit_dataset(pairs, *basis)
                      : frame_fit_dataset(pairs, frames, mask);
  };

  Table table;
  table.header = {"dataset",  "basis_name", "rep",     "rho_before",
                  "rho_after", "gain",       "p_value", "note"};
  std::optional<LinearTransform> to_save;

  auto fit_row = [&](const std::string& label, const FitDataset& ds) {
    std::vector<std::string> row{label, basis_label, opt.rep};
    if (!min_size_gate(ds.pairs.size(), opt.min_size)) {
      row.insert(row.end(), {"NA", "NA", "NA", "NA",
                             "rejected: " + std::to_string(ds.pairs.size()) +
                                 " pairs < min size " +
                                 std::to_string(opt.min_size)});
      table.rows.push_back(std::move(row));
      return;
    }
    const auto report = fit_transform(ds, opt.folds, config);
    row.push_back(fmt6(report.baseline_mean_rho));
    row.push_back(fmt6(report.mean_rho));
    row.push_back(fmt6(report.gain));
    row.push_back(fmt6(report.p_value));
    std::string note;
    if (report.degenerate_folds > 0) {
      note = std::to_string(report.degenerate_folds) + " degenerate folds";
    }
    row.push_back(note);
    table.rows.push_back(std::move(row));
    to_save = report.transform;
  };

  if (!opt.joint.empty()) {
    std::vector<FitDataset> groups;
    for (const auto& path : opt.datasets) {
      groups.push_back(build(parse_similarity(path)));
    }
    fit_row(opt.joint, merge_datasets(groups));
  } else {
    for (const auto& path : opt.datasets) {
      fit_row(file_stem(path), build(parse_similarity(path)));
    }
  }

  emit_table(table, opt.out, opt.markdown, manifest);
  if (!opt.save_transform.empty()) {
    if (!to_save) {
      throw Error("fit-transform: no transform was fitted (dataset rejected?)");
    }
    to_save->save(opt.save_transform);
    manifest.write_for(opt.save_transform);
  }
}

// ---------------------------------------------------------------------------
// decode

struct DecodeOpts {
  std::string enc;
  std::string basis;
  std::size_t k = 5;
};

void run_decode(const DecodeOpts& opt) {
  if (opt.k == 0) throw ConfigError("decode: -k must be >= 1");
  const auto frames = read_encoded(opt.enc);
  const auto basis = BasisStore::load(opt.basis);
  for (const auto& frame : frames) {
    std::cout << "concept: " << frame.concept_name << '\n';
    for (const auto& [row_name, terms] : decode_frame(frame, basis, opt.k)) {
      std::cout << "  " << row_name << ':';
      if (terms.empty()) {
        std::cout << " (none)";
      } else {
        for (std::size_t i = 0; i < terms.size(); ++i) {
          std::cout << (i == 0 ? " " : ", ") << terms[i].term << " ("
                    << fmt6(terms[i].score) << ')';
        }
      }
      std::cout << '\n';
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"definition-frames toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  AlignOpts align_opt;
  auto* align = app.add_subcommand("align", "build a BIO corpus from relation triples");
  align->add_option("--triples", align_opt.triples, "triples TSV file")->required();
  align->add_option("--out", align_opt.out, "output corpus file")->required();
  align->add_flag("--fallback-tagger", align_opt.fallback_tagger,
                  "tag plain sentences with the heuristic POS/chunk rules");
  align->callback([&] { run_align(align_opt); });

  TrainOpts train_opt;
  auto* train = app.add_subcommand("train-tagger", "train the relation retriever");
  train->add_option("--corpus", train_opt.corpus, "training corpus")->required();
  train->add_option("--dev", train_opt.dev, "development corpus")->required();
  train->add_option("--basis", train_opt.basis, "basis embeddings")->required();
  train->add_option("--config", train_opt.config, "key=value config file")->required();
  train->add_option("--out", train_opt.out, "model checkpoint to write")->required();
  auto* train_seed = train->add_option("--seed", train_opt.seed, "training seed");
  train->callback([&] {
    train_opt.seed_given = train_seed->count() > 0;
    run_train_tagger(train_opt);
  });

  ExtractOpts extract_opt;
  auto* extract = app.add_subcommand("extract", "extract frames from definitions");
  extract->add_option("--model", extract_opt.model, "tagger checkpoint")->required();
  extract->add_option("--definitions", extract_opt.definitions,
                      "concept TAB sentence file")->required();
  extract->add_option("--basis", extract_opt.basis, "basis embeddings")->required();
  extract->add_option("--out", extract_opt.out, "frames JSONL to write")->required();
  extract->callback([&] { run_extract(extract_opt); });

  EncodeOpts encode_opt;
  auto* encode = app.add_subcommand("encode", "encode frames over a basis");
  encode->add_option("--frames", encode_opt.frames, "frames JSONL")->required();
  encode->add_option("--basis", encode_opt.basis, "basis embeddings")->required();
  encode->add_option("--out", encode_opt.out, "encoded frames to write")->required();
  encode->add_option("--mask", encode_opt.mask,
                     "row mask: DF_all, DF_basic, or custom:<rows>");
  encode->callback([&] { run_encode(encode_opt); });

  EvalSimOpts eval_opt;
  auto* eval = app.add_subcommand("eval-sim", "benchmark correlation report");
  eval->add_option("--enc", eval_opt.enc, "encoded frames (repeatable)");
  eval->add_option("--basis", eval_opt.basis, "basis embeddings");
  eval->add_flag("--basis-only", eval_opt.basis_only,
                 "also score raw basis vectors");
  eval->add_option("--dataset", eval_opt.datasets, "benchmark file (repeatable)")
      ->required();
  eval->add_option("--mask", eval_opt.mask, "row mask for frame similarity");
  eval->add_flag("--intersect", eval_opt.intersect,
                 "restrict to vocabulary covered by every representer");
  eval->add_option("--transform", eval_opt.transform,
                   "apply a fitted frame transform before scoring");
  eval->add_option("--out", eval_opt.out, "TSV report path (- for stdout)");
  eval->add_option("--markdown", eval_opt.markdown, "markdown report path");
  eval->add_option("--n-perm", eval_opt.n_perm, "permutations for p-values");
  eval->add_option("--seed", eval_opt.seed, "permutation seed");
  eval->callback([&] { run_eval_sim(eval_opt); });

  FitOpts fit_opt;
  auto* fit = app.add_subcommand("fit-transform",
                                 "fit a linear transform under k-fold CV");
  fit->add_option("--enc", fit_opt.enc, "encoded frames");
  fit->add_option("--basis", fit_opt.basis, "basis embeddings");
  fit->add_option("--dataset", fit_opt.datasets, "benchmark file (repeatable)")
      ->required();
  fit->add_option("--rep", fit_opt.rep, "representation: frame or basis");
  fit->add_option("--mask", fit_opt.mask, "row mask for frame mode");
  fit->add_option("--joint", fit_opt.joint,
                  "merge all datasets into one fit labeled by this name");
  fit->add_option("--folds", fit_opt.folds, "cross-validation folds");
  auto* fit_seed = fit->add_option("--seed", fit_opt.seed, "fitting seed");
  fit->add_option("--config", fit_opt.config, "key=value config file");
  auto* fit_lr = fit->add_option("--lr", fit_opt.lr, "learning rate");
  auto* fit_epochs = fit->add_option("--epochs", fit_opt.epochs, "descent epochs");
  fit->add_option("--min-size", fit_opt.min_size,
                  "reject datasets with fewer usable pairs");
  fit->add_option("--out", fit_opt.out, "TSV report path (- for stdout)");
  fit->add_option("--markdown", fit_opt.markdown, "markdown report path");
  fit->add_option("--save-transform", fit_opt.save_transform,
                  "write the fitted transform here");
  fit->add_option("--basis-name", fit_opt.basis_name,
                  "label for the basis_name report column");
  fit->callback([&] {
    fit_opt.seed_given = fit_seed->count() > 0;
    fit_opt.lr_given = fit_lr->count() > 0;
    fit_opt.epochs_given = fit_epochs->count() > 0;
    run_fit_transform(fit_opt);
  });

  DecodeOpts decode_opt;
  auto* decode = app.add_subcommand("decode", "map encoded frames back to terms");
  decode->add_option("--enc", decode_opt.enc, "encoded frames")->required();
  decode->add_option("--basis", decode_opt.basis, "basis embeddings")->required();
  decode->add_option("-k", decode_opt.k, "neighbors per row");
  decode->callback([&] { run_decode(decode_opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
