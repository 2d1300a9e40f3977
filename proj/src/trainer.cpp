#include "topo/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "topo/parallel.hpp"
#include "topo/stats.hpp"

namespace topo {

using ad::Matrix;
using ad::Tape;
using ad::Tensor;
using nlohmann::json;

LabeledCorpus read_corpus(const std::filesystem::path& path, const std::string& split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::DataError, "cannot open corpus '" + path.string() + "'");
  LabeledCorpus corpus;
  corpus.split = split;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorCode::DataError,
                  path.string() + ":" + std::to_string(lineno) + ": missing TAB separator");
    const std::string label = line.substr(0, tab);
    if (label != "0" && label != "1")
      throw Error(ErrorCode::DataError, path.string() + ":" + std::to_string(lineno) +
                                            ": label must be 0 or 1, got '" + label + "'");
    corpus.examples.push_back({label == "1" ? 1 : 0, line.substr(tab + 1)});
  }
  if (corpus.examples.empty())
    throw Error(ErrorCode::EmptyCorpus, "corpus '" + path.string() + "' has no examples");
  return corpus;
}

void write_corpus(const std::filesystem::path& path, const LabeledCorpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::DataError, "cannot write corpus '" + path.string() + "'");
  for (const auto& ex : corpus.examples) out << ex.label << '\t' << ex.text << '\n';
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '<') {
      // Markup such as <br /> is dropped; a lone '<' is punctuation.
      const auto close = text.find('>', i);
      if (close != std::string::npos && text.find('<', i + 1) > close) {
        flush();
        i = close;
        continue;
      }
    }
    if (c >= 0x80 || std::isalnum(c)) {
      cur.push_back(char(std::tolower(c)));
    } else if (std::isspace(c)) {
      flush();
    } else {
      flush();
      tokens.emplace_back(1, char(c));
    }
  }
  flush();
  return tokens;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(std::vector<std::string> tokens_by_id, std::size_t max_len) : max_len_(max_len) {
  tokens_.push_back("<pad>");
  tokens_.push_back("<unk>");
  for (auto& t : tokens_by_id)
    if (t != "<pad>" && t != "<unk>") tokens_.push_back(std::move(t));
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], std::int64_t(i));
}

std::int64_t Vocab::id(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::int64_t> Vocab::encode(const std::string& text) const {
  std::vector<std::int64_t> ids;
  for (const auto& tok : tokenize(text)) {
    if (ids.size() == max_len_) break;
    ids.push_back(id(tok));
  }
  return ids;
}

double Vocab::unknown_fraction(const std::string& text) const {
  const auto toks = tokenize(text);
  if (toks.empty()) return 0.0;
  const auto unk = std::count_if(toks.begin(), toks.end(),
                                 [&](const std::string& t) { return id(t) == kUnk; });
  return double(unk) / double(toks.size());
}

json Vocab::to_json() const {
  return json{{"max_len", max_len_},
              {"tokens", std::vector<std::string>(tokens_.begin() + 2, tokens_.end())}};
}

Vocab Vocab::from_json(const json& j) {
  try {
    return Vocab(j.at("tokens").get<std::vector<std::string>>(),
                 j.at("max_len").get<std::size_t>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DataError, std::string("malformed vocabulary: ") + e.what());
  }
}

Vocab build_vocab(const LabeledCorpus& corpus, std::size_t min_freq, std::size_t max_len,
                  std::size_t max_size) {
  if (corpus.examples.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot build vocab");
  std::map<std::string, std::size_t> counts;
  for (const auto& ex : corpus.examples)
    for (auto& t : tokenize(ex.text)) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts)
    if (n >= std::max<std::size_t>(1, min_freq)) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (max_size > 0 && kept.size() > max_size) kept.resize(max_size);
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocab(std::move(tokens), max_len);
}

// ---------------------------------------------------------------------------
// Config

namespace {

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!j.is_number_integer() || j.get<std::int64_t>() < 0)
        throw Error(ErrorCode::ConfigError, "'" + key + "' must be a nonnegative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) throw Error(ErrorCode::ConfigError, "'" + key + "' must be a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw Error(ErrorCode::ConfigError, "'" + key + "' must be a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw Error(ErrorCode::ConfigError, "'" + key + "' must be a string");
    }
    return j.get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "'" + key + "': " + e.what());
  }
}

}  // namespace

void TrainConfig::validate() const {
  try {
    make_grid(d);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, std::string("d: ") + e.what());
  }
  auto in_unit = [](double r) { return r > 0.0 && r <= 1.0; };
  if (!in_unit(r_sq)) throw Error(ErrorCode::ConfigError, "r_sq must lie in (0, 1]");
  if (!in_unit(r_sr)) throw Error(ErrorCode::ConfigError, "r_sr must lie in (0, 1]");
  if (epochs < 1) throw Error(ErrorCode::ConfigError, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::ConfigError, "batch_size must be >= 1");
  if (!(lr > 0.0)) throw Error(ErrorCode::ConfigError, "lr must be positive");
  if (!(scale > 0.0)) throw Error(ErrorCode::ConfigError, "scale must be positive");
  if (max_len < 1) throw Error(ErrorCode::ConfigError, "max_len must be >= 1");
  if (layers < 1) throw Error(ErrorCode::ConfigError, "layers must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::ConfigError, "dropout in [0,1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw Error(ErrorCode::ConfigError, "Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw Error(ErrorCode::ConfigError, "adam_eps must be positive");
  if (weight_decay < 0.0 || clip_value < 0.0)
    throw Error(ErrorCode::ConfigError, "weight_decay and clip_value must be >= 0");
}

json TrainConfig::to_json() const {
  return json{{"mode", to_string(mode)},
              {"d", d},
              {"r_sq", r_sq},
              {"r_sr", r_sr},
              {"epochs", epochs},
              {"batch_size", batch_size},
              {"lr", lr},
              {"seed", seed},
              {"scale", scale},
              {"positional", positional},
              {"train_corpus", train_corpus},
              {"test_corpus", test_corpus},
              {"min_freq", min_freq},
              {"max_len", max_len},
              {"max_vocab", max_vocab},
              {"layers", layers},
              {"dropout", dropout},
              {"beta1", beta1},
              {"beta2", beta2},
              {"adam_eps", adam_eps},
              {"weight_decay", weight_decay},
              {"clip_value", clip_value},
              {"reapply_abs", reapply_abs}};
}

TrainConfig TrainConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  static const std::set<std::string> known{
      "mode",     "d",       "r_sq",         "r_sr",       "epochs",    "batch_size",
      "lr",       "seed",    "scale",        "positional", "train_corpus", "test_corpus",
      "min_freq", "max_len", "max_vocab",    "layers",     "dropout",   "beta1",
      "beta2",    "adam_eps", "weight_decay", "clip_value", "reapply_abs"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");

  TrainConfig c;
  if (j.contains("mode")) c.mode = parse_attention_mode(get_as<std::string>(j["mode"], "mode"));
  c.batch_size = c.mode == AttentionMode::SQR ? 256 : 128;
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = get_as<std::decay_t<decltype(field)>>(j[key], key);
  };
  read("d", c.d);
  read("r_sq", c.r_sq);
  read("r_sr", c.r_sr);
  read("epochs", c.epochs);
  read("batch_size", c.batch_size);
  read("lr", c.lr);
  read("seed", c.seed);
  read("scale", c.scale);
  read("positional", c.positional);
  read("train_corpus", c.train_corpus);
  read("test_corpus", c.test_corpus);
  read("min_freq", c.min_freq);
  read("max_len", c.max_len);
  read("max_vocab", c.max_vocab);
  read("layers", c.layers);
  read("dropout", c.dropout);
  read("beta1", c.beta1);
  read("beta2", c.beta2);
  read("adam_eps", c.adam_eps);
  read("weight_decay", c.weight_decay);
  read("clip_value", c.clip_value);
  read("reapply_abs", c.reapply_abs);
  auto resolve = [&](std::string& p) {
    if (!p.empty() && !base_dir.empty() && std::filesystem::path(p).is_relative())
      p = (base_dir / p).lexically_normal().string();
  };
  resolve(c.train_corpus);
  resolve(c.test_corpus);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Model

EncoderConfig encoder_config(const TrainConfig& config, std::size_t vocab_size) {
  EncoderConfig e;
  e.mode = config.mode;
  e.d = config.d;
  e.vocab_size = vocab_size;
  e.max_len = config.max_len;
  e.layers = config.layers;
  e.r_sq = config.r_sq;
  e.r_sr = config.r_sr;
  e.reweight_scale = config.scale;
  e.positional = config.positional;
  e.dropout = config.dropout;
  return e;
}

Classifier::Classifier(const EncoderConfig& config, std::uint64_t seed)
    : encoder_(config, seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const double bound = 1.0 / std::sqrt(double(config.d));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(Eigen::Index(config.d), 2);
  Matrix b(1, 2);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = dist(rng);
  head_w_ = Tensor::parameter(std::move(w));
  head_b_ = Tensor::parameter(std::move(b));
}

Tensor Classifier::logits(Tape& tape, std::span<const std::int64_t> ids,
                          std::mt19937_64* rng) const {
  EncoderOutput out = encoder_.forward(tape, ids, rng);
  return ad::add(tape, ad::matmul(tape, out.pooled, head_w_), head_b_);
}

int Classifier::predict(std::span<const std::int64_t> ids) const {
  Tape tape;
  const Matrix l = logits(tape, ids).value();
  return l(0, 1) > l(0, 0) ? 1 : 0;
}

std::vector<std::pair<std::string, Tensor>> Classifier::named_parameters() const {
  auto params = encoder_.named_parameters();
  params.emplace_back("head.w", head_w_);
  params.emplace_back("head.b", head_b_);
  return params;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Encoded {
  std::vector<std::vector<std::int64_t>> ids;
  std::vector<int> labels;
};

Encoded encode_corpus(const Vocab& vocab, const LabeledCorpus& corpus) {
  Encoded e;
  for (const auto& ex : corpus.examples) {
    auto ids = vocab.encode(ex.text);
    if (ids.empty()) continue;  // nothing to pool
    e.ids.push_back(std::move(ids));
    e.labels.push_back(ex.label);
  }
  return e;
}

double accuracy_of(const Classifier& model, const Encoded& data) {
  if (data.ids.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.ids.size(); ++i)
    correct += model.predict(data.ids[i]) == data.labels[i];
  return double(correct) / double(data.ids.size());
}

}  // namespace

double evaluate(const Classifier& model, const Vocab& vocab, const LabeledCorpus& corpus) {
  return accuracy_of(model, encode_corpus(vocab, corpus));
}

TrainResult train(const TrainConfig& config, const LabeledCorpus& train_set,
                  const LabeledCorpus& test_set) {
  config.validate();
  Vocab vocab = build_vocab(train_set, config.min_freq, config.max_len, config.max_vocab);
  const Encoded train_data = encode_corpus(vocab, train_set);
  const Encoded test_data = encode_corpus(vocab, test_set);
  if (train_data.ids.empty())
    throw Error(ErrorCode::EmptyCorpus, "training corpus has no tokenizable examples");

  TrainResult result{vocab, Classifier(encoder_config(config, vocab.size()), config.seed), {}, 0.0};
  Classifier& model = result.model;

  std::vector<Tensor> params;
  for (auto& [name, t] : model.named_parameters()) params.push_back(t);
  ad::AdamState adam;
  adam.config = {config.lr, config.beta1, config.beta2, config.adam_eps, config.weight_decay,
                 config.clip_value};

  std::mt19937_64 shuffle_rng(config.seed + 0x5eedULL);
  std::mt19937_64 dropout_rng(config.seed + 0xd20bULL);
  std::mt19937_64* drop = config.dropout > 0.0 ? &dropout_rng : nullptr;

  std::vector<std::size_t> order(train_data.ids.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  bool first = true;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (auto& p : params) p.zero_grad();
      Tape tape;
      Tensor total;
      for (std::size_t i = start; i < end; ++i) {
        const auto idx = order[i];
        const int label = train_data.labels[idx];
        Tensor l = ad::cross_entropy(tape, model.logits(tape, train_data.ids[idx], drop),
                                     std::span<const int>(&label, 1));
        total = i == start ? l : ad::add(tape, total, l);
      }
      Tensor loss = ad::scale(tape, total, 1.0 / double(end - start));
      const double value = loss.item();
      if (!std::isfinite(value))
        throw Error(ErrorCode::DivergedLoss, "loss became non-finite in epoch " +
                                                 std::to_string(epoch));
      if (first) {
        result.first_batch_loss = value;
        first = false;
      }
      tape.backward(loss);
      ad::adam_step(params, adam);
      if (config.reapply_abs && config.mode == AttentionMode::SQR)
        for (auto& b : model.encoder().blocks()) b.attention.w_o.value() = b.attention.w_o.value().cwiseAbs();
      loss_sum += value;
      ++batches;
    }
    result.history.push_back({epoch, loss_sum / double(batches), accuracy_of(model, test_data)});
  }
  return result;
}

TrainResult train(const TrainConfig& config) {
  if (config.train_corpus.empty())
    throw Error(ErrorCode::ConfigError, "train_corpus is required");
  const LabeledCorpus train_set = read_corpus(config.train_corpus, "train");
  const LabeledCorpus test_set =
      config.test_corpus.empty() ? train_set : read_corpus(config.test_corpus, "test");
  return train(config, train_set, test_set);
}

// ---------------------------------------------------------------------------
// Receptive-field sweep

std::optional<RegressionFit> fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "fit_line: length mismatch");
  if (x.size() < 2) return std::nullopt;
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), Eigen::Index(x.size()));
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), Eigen::Index(y.size()));
  const Eigen::VectorXd xc = xv.array() - xv.mean();
  const Eigen::VectorXd yc = yv.array() - yv.mean();
  const double sxx = xc.squaredNorm();
  if (sxx == 0.0) return std::nullopt;
  RegressionFit f;
  f.slope = xc.dot(yc) / sxx;
  f.intercept = yv.mean() - f.slope * xv.mean();
  const double syy = yc.squaredNorm();
  f.r2 = syy == 0.0 ? 0.0 : (f.slope * f.slope * sxx) / syy;
  return f;
}

SweepResult rf_sweep(const TrainConfig& base, std::span<const double> r_sq_grid,
                     std::span<const double> r_sr_grid, const LabeledCorpus& train_set,
                     const LabeledCorpus& test_set, std::size_t threads) {
  if (r_sq_grid.empty() || r_sr_grid.empty())
    throw Error(ErrorCode::InvalidArgument, "rf_sweep: grids must be nonempty");
  SweepResult result;
  for (double rq : r_sq_grid)
    for (double rs : r_sr_grid) {
      SweepCell cell;
      cell.r_sq = rq;
      cell.r_sr = rs;
      cell.seed = base.seed + result.cells.size();
      result.cells.push_back(cell);
    }
  parallel_for(result.cells.size(), threads, [&](std::size_t i) {
    SweepCell& cell = result.cells[i];
    TrainConfig cfg = base;
    cfg.r_sq = cell.r_sq;
    cfg.r_sr = cell.r_sr;
    cfg.seed = cell.seed;
    try {
      cell.accuracy = train(cfg, train_set, test_set).history.back().accuracy;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  std::vector<double> rq, rs, acc;
  for (const auto& c : result.cells)
    if (c.accuracy) {
      rq.push_back(c.r_sq);
      rs.push_back(c.r_sr);
      acc.push_back(*c.accuracy);
    }
  result.fit_r_sq = fit_line(rq, acc);
  result.fit_r_sr = fit_line(rs, acc);
  auto rank_corr = [&](const std::vector<double>& x) -> std::optional<double> {
    if (x.size() < 2) return std::nullopt;
    const double r = stats::spearman(std::span<const double>(x), std::span<const double>(acc));
    return std::isnan(r) ? std::nullopt : std::optional<double>(r);
  };
  result.spearman_r_sq = rank_corr(rq);
  result.spearman_r_sr = rank_corr(rs);
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

LabeledCorpus make_separable_corpus(const SeparableCorpusSpec& spec, std::uint64_t seed) {
  if (spec.sentences == 0 || spec.cue_words == 0 || spec.min_len == 0 ||
      spec.min_len > spec.max_len || spec.local_negation_rate < 0.0 ||
      spec.local_negation_rate > 1.0)
    throw Error(ErrorCode::InvalidArgument, "make_separable_corpus: invalid spec");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(spec.min_len, spec.max_len);
  std::uniform_int_distribution<std::size_t> cue(0, spec.cue_words - 1);
  std::uniform_int_distribution<std::size_t> filler(0, std::max<std::size_t>(1, spec.filler_words) - 1);
  std::bernoulli_distribution is_cue(spec.cue_rate);
  std::bernoulli_distribution negated(spec.negation_rate);
  std::bernoulli_distribution locally_negated(spec.local_negation_rate);
  LabeledCorpus corpus;
  for (std::size_t s = 0; s < spec.sentences; ++s) {
    const int label = int(s % 2);
    const bool flip = spec.negation_rate > 0.0 && negated(rng);
    const std::string prefix = (label == 1) != flip ? "pos" : "neg";
    const std::size_t n = len(rng);
    const std::size_t negation_at = flip ? std::uniform_int_distribution<std::size_t>(0, n - 1)(rng) : n;
    std::string text;
    bool has_cue = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::string word;
      if (i == negation_at) {
        word = "not";
      } else if (is_cue(rng) || spec.filler_words == 0 || (i + 1 == n && !has_cue) ||
          (i + 2 == n && negation_at + 1 == n && !has_cue)) {
        if (spec.local_negation_rate > 0.0 && locally_negated(rng))
          word = std::string("not ") + (prefix == "pos" ? "neg" : "pos") + std::to_string(cue(rng));
        else
          word = prefix + std::to_string(cue(rng));
        has_cue = true;
      } else {
        word = "w" + std::to_string(filler(rng));
      }
      if (!text.empty()) text += ' ';
      text += word;
    }
    corpus.examples.push_back({label, std::move(text)});
  }
  return corpus;
}

}  // namespace topo
