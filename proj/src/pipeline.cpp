#include "topo/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "topo/analysis.hpp"
#include "topo/grid.hpp"
#include "topo/heatmap.hpp"
#include "topo/io.hpp"
#include "topo/parallel.hpp"
#include "topo/trainer.hpp"

namespace topo::pipeline {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NonSquareDimension:
    case ErrorCode::FractionOutOfRange:
      return 2;
    case ErrorCode::DataError:
    case ErrorCode::EmptyCorpus:
    case ErrorCode::VocabMismatch:
    case ErrorCode::TokenOutOfVocab:
    case ErrorCode::SequenceTooLong:
    case ErrorCode::EmptySequence:
      return 3;
    default:
      return 4;
  }
}

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i)))
      a.push_back(v(i));
    else
      a.push_back(nullptr);
  }
  return a;
}

json to_json(const std::vector<double>& v) {
  return to_json(Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size())));
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct LoadedInput {
  io::ActivationDump dump;
  std::string digest;
};

LoadedInput load(const fs::path& sidecar) {
  LoadedInput in{io::read_dump(sidecar), io::file_digest(sidecar)};
  return in;
}

void write_heatmaps(const fs::path& stem, const Eigen::VectorXd& values, viz::HeatmapRange range,
                    viz::Colormap map, std::map<std::string, std::string>& outputs) {
  const Eigen::MatrixXd grid = viz::to_grid(values);
  const std::string svg = viz::render_svg(grid, range, map);
  const std::string pgm = viz::render_pgm(grid, range);
  fs::path svg_path = stem;
  svg_path += ".svg";
  fs::path pgm_path = stem;
  pgm_path += ".pgm";
  io::write_file_atomic(svg_path, svg);
  io::write_file_atomic(pgm_path, pgm);
  outputs[svg_path.filename().string()] = io::sha256_hex(svg);
  outputs[pgm_path.filename().string()] = io::sha256_hex(pgm);
}

std::string write_report(const fs::path& path, const json& report,
                         std::map<std::string, std::string>& outputs) {
  const std::string text = report.dump(2) + "\n";
  io::write_file_atomic(path, text);
  const std::string digest = io::sha256_hex(text);
  outputs[path.filename().string()] = digest;
  return digest;
}

void finish(const fs::path& out_dir, const std::string& command, const json& params,
            std::map<std::string, std::string> inputs, std::uint64_t seed,
            std::map<std::string, std::string> outputs, const Stopwatch& clock) {
  io::RunManifest m;
  m.command = command;
  m.config_digest = io::sha256_hex(params.dump());
  m.input_digests = std::move(inputs);
  m.seed = seed;
  m.outputs = std::move(outputs);
  m.wall_time_s = clock.seconds();
  io::write_manifest(out_dir / (command + ".manifest.json"), m);
}

struct Conditions {
  Eigen::MatrixXd a, b;
  std::map<std::string, std::string> digests;
  std::size_t d = 0;
};

Conditions load_conditions(const ConditionInputs& in) {
  Conditions c;
  if (!in.a.empty() || !in.b.empty()) {
    if (in.a.empty() || in.b.empty())
      throw Error(ErrorCode::ConfigError, "both --a and --b are required");
    auto a = load(in.a);
    auto b = load(in.b);
    if (a.dump.header.d != b.dump.header.d)
      throw Error(ErrorCode::ShapeMismatch, "condition dumps differ in unit count");
    c.digests["a"] = a.digest;
    c.digests["b"] = b.digest;
    c.a = std::move(a.dump.values);
    c.b = std::move(b.dump.values);
    c.d = a.dump.header.d;
    return c;
  }
  if (in.x.empty() || in.labels.empty())
    throw Error(ErrorCode::ConfigError, "give --a/--b or --x with --labels");
  auto x = load(in.x);
  const auto corpus = read_corpus(in.labels, "labels");
  if (corpus.size() != x.dump.header.n)
    throw Error(ErrorCode::ShapeMismatch, "labels corpus has " + std::to_string(corpus.size()) +
                                              " rows, dump has " +
                                              std::to_string(x.dump.header.n));
  std::vector<Eigen::Index> ia, ib;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    (corpus.examples[i].label == 1 ? ia : ib).push_back(Eigen::Index(i));
  c.a.resize(Eigen::Index(ia.size()), x.dump.values.cols());
  c.b.resize(Eigen::Index(ib.size()), x.dump.values.cols());
  for (std::size_t i = 0; i < ia.size(); ++i) c.a.row(Eigen::Index(i)) = x.dump.values.row(ia[i]);
  for (std::size_t i = 0; i < ib.size(); ++i) c.b.row(Eigen::Index(i)) = x.dump.values.row(ib[i]);
  c.digests["x"] = x.digest;
  c.digests["labels"] = io::file_digest(in.labels);
  c.d = x.dump.header.d;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------

void train_command(const TrainOptions& opts, std::ostream& log) {
  Stopwatch clock;
  json raw;
  try {
    raw = json::parse(io::read_file(opts.config));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "config '" + opts.config.string() + "': " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  TrainConfig cfg = TrainConfig::from_json(raw, opts.config.parent_path());
  if (opts.seed) cfg.seed = *opts.seed;

  const LabeledCorpus train_set = read_corpus(cfg.train_corpus, "train");
  const LabeledCorpus test_set =
      cfg.test_corpus.empty() ? train_set : read_corpus(cfg.test_corpus, "test");
  log << "training " << to_string(cfg.mode) << " d=" << cfg.d << " on " << train_set.size()
      << " examples\n";
  const TrainResult result = train(cfg, train_set, test_set);

  fs::create_directories(opts.out_dir);
  const fs::path ckpt = opts.out_dir / "checkpoint.topo";
  io::save_checkpoint(ckpt, cfg, result.vocab, result.model);
  std::ostringstream csv;
  csv << "epoch,loss,accuracy\n" << std::setprecision(17);
  for (const auto& m : result.history) csv << m.epoch << ',' << m.loss << ',' << m.accuracy << '\n';
  io::write_file_atomic(opts.out_dir / "metrics.csv", csv.str());
  for (const auto& m : result.history)
    log << "epoch " << m.epoch << " loss " << m.loss << " accuracy " << m.accuracy << '\n';

  std::map<std::string, std::string> inputs{{"config", io::file_digest(opts.config)},
                                            {"train_corpus", io::file_digest(cfg.train_corpus)}};
  if (!cfg.test_corpus.empty()) inputs["test_corpus"] = io::file_digest(cfg.test_corpus);
  finish(opts.out_dir, "train", cfg.to_json(), inputs, cfg.seed,
         {{"checkpoint.topo", io::file_digest(ckpt)},
          {"metrics.csv", io::sha256_hex(csv.str())}},
         clock);
}

void capture_command(const CaptureOptions& opts, std::ostream& log) {
  Stopwatch clock;
  const auto ck = io::load_checkpoint(opts.checkpoint);
  const std::string model_digest = io::file_digest(opts.checkpoint);
  const auto corpus = read_corpus(opts.corpus, "capture");
  const auto& enc = ck.model.encoder();
  const int blocks = int(enc.blocks().size());
  const int layer = opts.layer < 0 ? blocks + opts.layer : opts.layer;
  if (layer < 0 || layer >= blocks)
    throw Error(ErrorCode::ConfigError, "layer " + std::to_string(opts.layer) + " outside model");

  std::vector<std::string> wanted;
  if (opts.sublayer == "all")
    wanted = sublayer_names();
  else {
    bool ok = false;
    for (const auto& s : sublayer_names()) ok = ok || s == opts.sublayer;
    if (!ok) throw Error(ErrorCode::ConfigError, "unknown sublayer '" + opts.sublayer + "'");
    wanted = {opts.sublayer};
  }

  const auto n = Eigen::Index(corpus.size());
  const auto d = Eigen::Index(ck.config.d);
  std::map<std::string, Eigen::MatrixXd> mats;
  for (const auto& s : wanted) mats[s] = Eigen::MatrixXd(n, d);
  std::size_t unk = 0, total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& text = corpus.examples[std::size_t(i)].text;
    const auto toks = tokenize(text);
    total += toks.size();
    for (const auto& t : toks) unk += ck.vocab.id(t) == Vocab::kUnk;
    auto ids = ck.vocab.encode(text);
    if (ids.empty())
      throw Error(ErrorCode::EmptySequence, "sentence " + std::to_string(i + 1) + " has no tokens");
    ad::Tape tape;
    const auto out = enc.forward(tape, ids);
    for (const auto& s : wanted) mats[s].row(i) = out.captures[std::size_t(layer)].get(s);
  }
  const double unk_frac = total ? double(unk) / double(total) : 0.0;
  if (unk_frac > opts.unk_threshold)
    log << "warning: " << to_string(ErrorCode::VocabMismatch) << ": " << std::fixed
        << std::setprecision(1) << 100.0 * unk_frac << "% of tokens are unknown to the model\n";

  std::map<std::string, std::string> outputs;
  for (const auto& s : wanted) {
    io::DumpHeader h;
    h.sublayer = s;
    h.layer = layer;
    h.model_digest = model_digest;
    h.seed = ck.config.seed;
    const fs::path sidecar = opts.out_dir / (s + ".json");
    io::write_dump(sidecar, h, mats[s]);
    outputs[s + ".json"] = io::file_digest(sidecar);
    outputs[s + ".bin"] = io::file_digest(io::blob_path(sidecar));
    log << "wrote " << sidecar.string() << " (" << n << " x " << d << ")\n";
  }
  json params{{"sublayer", opts.sublayer}, {"layer", layer}, {"unk_threshold", opts.unk_threshold}};
  finish(opts.out_dir, "capture", params,
         {{"checkpoint", model_digest}, {"corpus", io::file_digest(opts.corpus)}}, ck.config.seed,
         outputs, clock);
}

void selectivity_command(const SelectivityOptions& opts, std::ostream& log) {
  Stopwatch clock;
  if (!(opts.range > 0)) throw Error(ErrorCode::ConfigError, "--range must be positive");
  const auto c = load_conditions(opts.inputs);
  const auto m = selectivity(c.a, c.b);
  std::map<std::string, std::string> outputs;
  json params{{"range", opts.range}, {"test", "welch-two-tailed"}, {"p_floor", 1e-300}};
  json report{{"analysis", "selectivity"},
              {"params", params},
              {"inputs", c.digests},
              {"n_a", c.a.rows()},
              {"n_b", c.b.rows()},
              {"d", c.d},
              {"s", to_json(m.s)},
              {"t", to_json(m.t)},
              {"p", to_json(m.p)},
              {"degenerate_units", m.degenerate_count()},
              {"units_p_le_0.01", (m.p.array() <= 0.01).count()}};
  fs::create_directories(opts.out_dir);
  write_report(opts.out_dir / "selectivity.json", report, outputs);
  write_heatmaps(opts.out_dir / "selectivity", m.s, viz::symmetric_range(opts.range),
                 viz::Colormap::Diverging, outputs);
  log << "selectivity: " << (m.p.array() <= 0.01).count() << " of " << c.d
      << " units at p <= 0.01\n";
  finish(opts.out_dir, "selectivity", params, c.digests, 0, outputs, clock);
}

void pca_command(const PcaOptions& opts, std::ostream& log) {
  Stopwatch clock;
  const auto x = load(opts.x);
  const auto r = pca(x.dump.values, opts.components);
  std::map<std::string, std::string> outputs;
  json params{{"components", opts.components}};
  json weights = json::array();
  for (Eigen::Index c = 0; c < r.weights.cols(); ++c) weights.push_back(to_json(r.weights.col(c)));
  json report{{"analysis", "pca"},
              {"params", params},
              {"inputs", {{"x", x.digest}}},
              {"sublayer", x.dump.header.sublayer},
              {"explained_variance_ratio", to_json(r.explained_variance_ratio)},
              {"singular_values", to_json(r.singular_values)},
              {"weights", weights},
              {"warnings", r.warnings}};
  fs::create_directories(opts.out_dir);
  write_report(opts.out_dir / "pca.json", report, outputs);
  for (Eigen::Index c = 0; c < r.weights.cols(); ++c) {
    const Eigen::VectorXd w = r.weights.col(c);
    write_heatmaps(opts.out_dir / ("pc" + std::to_string(c + 1)), w, viz::data_range(w),
                   viz::Colormap::Sequential, outputs);
  }
  for (const auto& w : r.warnings) log << "warning: " << w << '\n';
  log << "pca: " << r.weights.cols() << " components\n";
  finish(opts.out_dir, "pca", params, {{"x", x.digest}}, 0, outputs, clock);
}

void topo_command(const TopoOptions& opts, std::ostream& log) {
  Stopwatch clock;
  const auto x = load(opts.x);
  const auto grid = make_grid(x.dump.header.d);
  const Eigen::MatrixXd dist = distance_matrix<double>(grid);
  const auto profile = topo_stat_profile(x.dump.values, dist);
  const auto summary = opts.global ? TopoSummary::Global : TopoSummary::ProfileMean;
  const auto null = permutation_null(x.dump.values, dist, opts.n_perm, opts.seed, summary,
                                     thread_count_from_env());
  std::map<std::string, std::string> outputs;
  json params{{"n_perm", opts.n_perm},
              {"seed", opts.seed},
              {"summary", opts.global ? "global" : "profile_mean"},
              {"scales", kTopoScales},
              {"lower_percentile", kTopoLowerPercentile}};
  json pairs = json::array();
  for (auto p : profile.pairs) pairs.push_back(p);
  json report{{"analysis", "topo"},
              {"params", params},
              {"inputs", {{"x", x.digest}}},
              {"sublayer", x.dump.header.sublayer},
              {"scales", to_json(profile.scales)},
              {"t_gd", to_json(profile.t_gd)},
              {"pairs", pairs},
              {"valid_scales", profile.valid_count()},
              {"t_g_mean", number_or_null(profile.mean)},
              {"excluded_units", profile.excluded_units},
              {"observed", null.observed},
              {"null", to_json(null.null)},
              {"percentile", null.percentile},
              {"threshold95", null.threshold95},
              {"threshold99", null.threshold99},
              {"significant", null.significant}};
  fs::create_directories(opts.out_dir);
  write_report(opts.out_dir / "topo.json", report, outputs);
  std::ostringstream csv;
  csv << "d_max,t_gd,pairs\n" << std::setprecision(17);
  for (std::size_t i = 0; i < profile.scales.size(); ++i) {
    csv << profile.scales[i] << ',';
    if (profile.valid[i]) csv << profile.t_gd[i];
    csv << ',' << profile.pairs[i] << '\n';
  }
  io::write_file_atomic(opts.out_dir / "topo_profile.csv", csv.str());
  outputs["topo_profile.csv"] = io::sha256_hex(csv.str());
  log << "topo: observed " << null.observed << ", null 95th " << null.threshold95
      << (null.significant ? " (significant)\n" : " (not significant)\n");
  finish(opts.out_dir, "topo", params, {{"x", x.digest}}, opts.seed, outputs, clock);
}

void decode_command(const DecodeOptions& opts, std::ostream& log) {
  Stopwatch clock;
  const auto c = load_conditions(opts.inputs);
  Eigen::MatrixXd x(c.a.rows() + c.b.rows(), c.a.cols());
  x << c.a, c.b;
  std::vector<int> labels(std::size_t(c.a.rows()), 1);
  labels.resize(std::size_t(x.rows()), 0);
  const auto r = decode(x, labels, opts.components, opts.split, opts.seed);
  std::map<std::string, std::string> outputs;
  json params{{"components", opts.components}, {"split", opts.split}, {"seed", opts.seed}};
  json report{{"analysis", "decode"},        {"params", params},
              {"inputs", c.digests},         {"accuracy", r.accuracy},
              {"components_used", r.components}, {"iterations", r.iterations},
              {"train_size", r.train_size},  {"test_size", r.test_size},
              {"warnings", r.warnings}};
  fs::create_directories(opts.out_dir);
  write_report(opts.out_dir / "decode.json", report, outputs);
  for (const auto& w : r.warnings) log << "warning: " << w << '\n';
  log << "decode: held-out accuracy " << r.accuracy << '\n';
  finish(opts.out_dir, "decode", params, c.digests, opts.seed, outputs, clock);
}

void align_command(const AlignOptions& opts, std::ostream& log) {
  Stopwatch clock;
  const auto x = load(opts.x);
  const auto y = load(opts.y);
  if (x.dump.header.n != y.dump.header.n)
    throw Error(ErrorCode::ShapeMismatch, "--x and --y dumps differ in sentence count");
  const auto r = pls_svd_align(x.dump.values, y.dump.values, opts.components, opts.split, opts.seed);
  std::map<std::string, std::string> outputs;
  json params{{"components", opts.components}, {"split", opts.split}, {"seed", opts.seed}};
  json wx = json::array(), wy = json::array();
  for (Eigen::Index c = 0; c < r.weights_x.cols(); ++c) {
    wx.push_back(to_json(r.weights_x.col(c)));
    wy.push_back(to_json(r.weights_y.col(c)));
  }
  json report{{"analysis", "align"},
              {"params", params},
              {"inputs", {{"x", x.digest}, {"y", y.digest}}},
              {"correlations", to_json(r.correlations)},
              {"singular_values", to_json(r.singular_values)},
              {"weights_x", wx},
              {"weights_y", wy},
              {"dropped_x", r.dropped_x},
              {"dropped_y", r.dropped_y},
              {"train_size", r.train_rows.size()},
              {"test_size", r.test_rows.size()},
              {"warnings", r.warnings}};
  fs::create_directories(opts.out_dir);
  write_report(opts.out_dir / "align.json", report, outputs);
  std::ostringstream csv;
  csv << "component,correlation,singular_value\n" << std::setprecision(17);
  for (Eigen::Index c = 0; c < r.correlations.size(); ++c)
    csv << c << ',' << r.correlations(c) << ',' << r.singular_values(c) << '\n';
  io::write_file_atomic(opts.out_dir / "align_components.csv", csv.str());
  outputs["align_components.csv"] = io::sha256_hex(csv.str());
  for (Eigen::Index c = 0; c < r.weights_y.cols(); ++c) {
    const Eigen::VectorXd wyc = r.weights_y.col(c);
    write_heatmaps(opts.out_dir / ("y_component" + std::to_string(c)), wyc, viz::data_range(wyc),
                   viz::Colormap::Diverging, outputs);
    const Eigen::VectorXd wxc = r.weights_x.col(c);
    write_heatmaps(opts.out_dir / ("x_component" + std::to_string(c)), wxc, viz::data_range(wxc),
                   viz::Colormap::Diverging, outputs);
  }
  for (const auto& w : r.warnings) log << "warning: " << w << '\n';
  log << "align: component correlations";
  for (Eigen::Index c = 0; c < r.correlations.size(); ++c) log << ' ' << r.correlations(c);
  log << '\n';
  finish(opts.out_dir, "align", params, {{"x", x.digest}, {"y", y.digest}}, opts.seed, outputs,
         clock);
}

void encode_command(const EncodeOptions& opts, std::ostream& log) {
  Stopwatch clock;
  const auto x = load(opts.x);
  const auto y = load(opts.y);
  if (x.dump.header.n != y.dump.header.n)
    throw Error(ErrorCode::ShapeMismatch, "--x and --y dumps differ in sentence count");
  std::vector<double> corr, lambdas;
  for (Eigen::Index t = 0; t < y.dump.values.cols(); ++t) {
    const Eigen::VectorXd target = y.dump.values.col(t);
    const auto r = ridge_encode(x.dump.values, target, opts.lambdas, opts.split, opts.seed);
    corr.push_back(r.held_out_correlation);
    lambdas.push_back(r.best_lambda);
  }
  double sum = 0.0;
  std::size_t valid = 0;
  for (double c : corr)
    if (std::isfinite(c)) {
      sum += c;
      ++valid;
    }
  const double mean = valid ? sum / double(valid) : std::nan("");
  std::map<std::string, std::string> outputs;
  json params{{"lambdas", opts.lambdas}, {"split", opts.split}, {"seed", opts.seed}};
  json report{{"analysis", "encode"},
              {"params", params},
              {"inputs", {{"x", x.digest}, {"y", y.digest}}},
              {"correlations", to_json(corr)},
              {"best_lambdas", lambdas},
              {"mean_correlation", number_or_null(mean)}};
  fs::create_directories(opts.out_dir);
  write_report(opts.out_dir / "encode.json", report, outputs);
  log << "encode: mean held-out correlation " << mean << " over " << corr.size() << " targets\n";
  finish(opts.out_dir, "encode", params, {{"x", x.digest}, {"y", y.digest}}, opts.seed, outputs,
         clock);
}

void sweep_command(const SweepOptions& opts, std::ostream& log) {
  Stopwatch clock;
  json raw;
  try {
    raw = json::parse(io::read_file(opts.config));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "config '" + opts.config.string() + "': " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  const TrainConfig cfg = TrainConfig::from_json(raw, opts.config.parent_path());
  const LabeledCorpus train_set = read_corpus(cfg.train_corpus, "train");
  const LabeledCorpus test_set =
      cfg.test_corpus.empty() ? train_set : read_corpus(cfg.test_corpus, "test");
  const auto r = rf_sweep(cfg, opts.r_sq, opts.r_sr, train_set, test_set, opts.threads);

  std::ostringstream csv;
  csv << "r_sq,r_sr,seed,accuracy,error\n" << std::setprecision(17);
  json cells = json::array();
  for (const auto& c : r.cells) {
    csv << c.r_sq << ',' << c.r_sr << ',' << c.seed << ',';
    if (c.accuracy) csv << *c.accuracy;
    csv << ',' << (c.error.empty() ? "" : "failed") << '\n';
    cells.push_back({{"r_sq", c.r_sq},
                     {"r_sr", c.r_sr},
                     {"seed", c.seed},
                     {"accuracy", c.accuracy ? json(*c.accuracy) : json(nullptr)},
                     {"error", c.error}});
  }
  auto fit_json = [](const std::optional<RegressionFit>& f) {
    return f ? json{{"slope", f->slope}, {"intercept", f->intercept}, {"r2", f->r2}}
             : json(nullptr);
  };
  auto opt_json = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json params{{"config", cfg.to_json()}, {"r_sq", opts.r_sq}, {"r_sr", opts.r_sr}};
  json report{{"analysis", "rf_sweep"},
              {"params", params},
              {"cells", cells},
              {"fit_r_sq", fit_json(r.fit_r_sq)},
              {"fit_r_sr", fit_json(r.fit_r_sr)},
              {"spearman_r_sq", opt_json(r.spearman_r_sq)},
              {"spearman_r_sr", opt_json(r.spearman_r_sr)}};
  std::map<std::string, std::string> outputs;
  fs::create_directories(opts.out_dir);
  io::write_file_atomic(opts.out_dir / "sweep.csv", csv.str());
  outputs["sweep.csv"] = io::sha256_hex(csv.str());
  write_report(opts.out_dir / "sweep.json", report, outputs);
  if (r.fit_r_sq) log << "accuracy ~ r_sq: R2 " << r.fit_r_sq->r2 << " slope " << r.fit_r_sq->slope << '\n';
  if (r.fit_r_sr) log << "accuracy ~ r_sr: R2 " << r.fit_r_sr->r2 << " slope " << r.fit_r_sr->slope << '\n';
  finish(opts.out_dir, "sweep", params,
         {{"config", io::file_digest(opts.config)}, {"train_corpus", io::file_digest(cfg.train_corpus)}},
         cfg.seed, outputs, clock);
}

void synth_command(const SynthOptions& opts, std::ostream& log) {
  if (opts.out.empty()) throw Error(ErrorCode::ConfigError, "--out is required");
  SeparableCorpusSpec spec;
  spec.sentences = opts.sentences;
  spec.cue_words = opts.cue_words;
  spec.filler_words = opts.filler_words;
  spec.min_len = opts.min_len;
  spec.max_len = opts.max_len;
  spec.cue_rate = opts.cue_rate;
  spec.negation_rate = opts.negation_rate;
  spec.local_negation_rate = opts.local_negation_rate;
  const auto corpus = make_separable_corpus(spec, opts.seed);
  std::ostringstream os;
  for (const auto& ex : corpus.examples) os << ex.label << '\t' << ex.text << '\n';
  io::write_file_atomic(opts.out, os.str());
  log << "wrote " << corpus.size() << " sentences to " << opts.out.string() << '\n';
}

}  // namespace topo::pipeline
