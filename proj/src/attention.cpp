#include "topo/attention.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace topo {

using ad::Matrix;
using ad::Tape;
using ad::Tensor;

std::string to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::Standard: return "standard";
    case AttentionMode::SQ: return "SQ";
    case AttentionMode::SQR: return "SQR";
  }
  return "standard";
}

AttentionMode parse_attention_mode(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  if (lower == "standard") return AttentionMode::Standard;
  if (lower == "sq") return AttentionMode::SQ;
  if (lower == "sqr") return AttentionMode::SQR;
  throw Error(ErrorCode::ConfigError, "unknown attention mode '" + name + "'");
}

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace

Matrix TopoAttentionParams::effective_output_weight() const {
  if (mode == AttentionMode::SQR) return w_o.value().cwiseProduct(out_mask.value());
  return w_o.value();
}

Matrix init_reweighting(const Matrix& w_o, const Matrix& mask, double scale) {
  if (w_o.rows() != mask.rows() || w_o.cols() != mask.cols())
    throw Error(ErrorCode::ShapeMismatch, "init_reweighting: weight and mask shapes differ");
  if (!(scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "init_reweighting: scale must be > 0");
  return (w_o * scale).cwiseAbs().cwiseProduct(mask);
}

TopoAttentionParams make_attention_params(const GridLayout& grid, AttentionMode mode, double r_sq,
                                          double r_sr, double reweight_scale,
                                          std::mt19937_64& rng) {
  const auto d = Eigen::Index(grid.size());
  const double bound = 1.0 / std::sqrt(double(d));
  TopoAttentionParams p;
  p.mode = mode;
  p.w_q = Tensor::parameter(uniform_matrix(d, d, bound, rng));
  p.w_k = Tensor::parameter(uniform_matrix(d, d, bound, rng));
  p.w_v = Tensor::parameter(uniform_matrix(d, d, bound, rng));
  Matrix w_o = uniform_matrix(d, d, bound, rng);

  Matrix pool = Matrix::Identity(d, d);
  Matrix mask = Matrix::Ones(d, d);
  if (mode != AttentionMode::Standard) pool = pooling_matrix<double>(grid, r_sq);
  if (mode == AttentionMode::SQR) {
    mask = local_mask<double>(grid, r_sr);
    w_o = init_reweighting(w_o, mask, reweight_scale);
  }
  p.w_o = Tensor::parameter(std::move(w_o));
  p.pool = Tensor::constant(std::move(pool));
  p.out_mask = Tensor::constant(std::move(mask));
  return p;
}

Tensor attention_scores(Tape& tape, const Tensor& q, const Tensor& k) {
  if (q.cols() != k.cols())
    throw Error(ErrorCode::ShapeMismatch, "attention_scores: query/key widths differ");
  const double inv = 1.0 / std::sqrt(double(q.cols()));
  return ad::softmax_rows(tape, ad::scale(tape, ad::matmul(tape, q, ad::transpose(tape, k)), inv));
}

Tensor attention_scores_sq(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& pool) {
  if (q.cols() != k.cols() || pool.rows() != q.cols() || pool.cols() != k.cols())
    throw Error(ErrorCode::ShapeMismatch, "attention_scores_sq: Q, M, K shapes disagree");
  const double inv = 1.0 / std::sqrt(double(q.cols()));
  Tensor pooled = ad::matmul(tape, q, pool);
  return ad::softmax_rows(tape,
                          ad::scale(tape, ad::matmul(tape, pooled, ad::transpose(tape, k)), inv));
}

Tensor attention_forward(Tape& tape, const Tensor& x, const TopoAttentionParams& params,
                         AttentionCapture* capture) {
  if (x.cols() != params.w_q.rows())
    throw Error(ErrorCode::ShapeMismatch, "attention_forward: input width " +
                                              std::to_string(x.cols()) + " vs model width " +
                                              std::to_string(params.w_q.rows()));
  Tensor q = ad::matmul(tape, x, params.w_q);
  Tensor k = ad::matmul(tape, x, params.w_k);
  Tensor v = ad::matmul(tape, x, params.w_v);
  Tensor scores = params.mode == AttentionMode::Standard
                      ? attention_scores(tape, q, k)
                      : attention_scores_sq(tape, q, k, params.pool);
  Tensor w_out = params.mode == AttentionMode::SQR
                     ? ad::masked_weight(tape, params.w_o, params.out_mask)
                     : params.w_o;
  Tensor out = ad::matmul(tape, ad::matmul(tape, scores, v), w_out);
  if (capture) {
    capture->queries = q.value();
    capture->keys = k.value();
    capture->values = v.value();
    capture->fc_out = out.value();
  }
  return out;
}

const Eigen::RowVectorXd& SublayerMeans::get(const std::string& sublayer) const {
  if (sublayer == "queries") return queries;
  if (sublayer == "keys") return keys;
  if (sublayer == "values") return values;
  if (sublayer == "fc_out") return fc_out;
  throw Error(ErrorCode::InvalidArgument, "unknown sublayer '" + sublayer + "'");
}

Encoder::Encoder(const EncoderConfig& config, std::uint64_t seed)
    : config_(config), grid_(make_grid(config.d)) {
  if (config.layers == 0) throw Error(ErrorCode::ConfigError, "encoder needs at least one layer");
  if (config.vocab_size < 2) throw Error(ErrorCode::ConfigError, "vocab must hold PAD and UNK");
  if (config.max_len == 0) throw Error(ErrorCode::ConfigError, "max_len must be positive");
  std::mt19937_64 rng(seed);
  const auto d = Eigen::Index(config.d);
  embeddings_ = Tensor::parameter(normal_matrix(Eigen::Index(config.vocab_size), d, 1.0, rng));
  embeddings_.value().row(0).setZero();  // PAD
  positions_ = Tensor(normal_matrix(Eigen::Index(config.max_len), d, 1.0, rng), config.positional);
  const double ff_in = 1.0 / std::sqrt(double(d));
  const double ff_hidden = 1.0 / std::sqrt(double(4 * d));
  for (std::size_t l = 0; l < config.layers; ++l) {
    EncoderBlock b;
    b.attention = make_attention_params(grid_, config.mode, config.r_sq, config.r_sr,
                                        config.reweight_scale, rng);
    b.ln1_gain = Tensor::parameter(Matrix::Ones(1, d));
    b.ln1_bias = Tensor::parameter(Matrix::Zero(1, d));
    b.ff1_w = Tensor::parameter(uniform_matrix(d, 4 * d, ff_in, rng));
    b.ff1_b = Tensor::parameter(uniform_matrix(1, 4 * d, ff_in, rng));
    b.ff2_w = Tensor::parameter(uniform_matrix(4 * d, d, ff_hidden, rng));
    b.ff2_b = Tensor::parameter(uniform_matrix(1, d, ff_hidden, rng));
    b.ln2_gain = Tensor::parameter(Matrix::Ones(1, d));
    b.ln2_bias = Tensor::parameter(Matrix::Zero(1, d));
    blocks_.push_back(std::move(b));
  }
}

EncoderOutput Encoder::forward(Tape& tape, std::span<const std::int64_t> token_ids,
                               std::mt19937_64* rng) const {
  std::vector<std::int64_t> ids;
  ids.reserve(token_ids.size());
  for (auto id : token_ids) {
    if (id < 0 || std::size_t(id) >= config_.vocab_size)
      throw Error(ErrorCode::TokenOutOfVocab,
                  "token id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(config_.vocab_size));
    if (id != 0) ids.push_back(id);
  }
  if (ids.empty()) throw Error(ErrorCode::EmptySequence, "sequence holds only padding");
  if (token_ids.size() > config_.max_len)
    throw Error(ErrorCode::SequenceTooLong, std::to_string(token_ids.size()) + " tokens exceeds " +
                                                std::to_string(config_.max_len));

  Tensor x = ad::gather_rows(tape, embeddings_, ids);
  if (config_.positional) {
    std::vector<std::int64_t> pos(ids.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = std::int64_t(i);
    x = ad::add(tape, x, ad::gather_rows(tape, positions_, pos));
  }

  const bool train = rng != nullptr && config_.dropout > 0.0;
  EncoderOutput out;
  for (const auto& b : blocks_) {
    AttentionCapture cap;
    Tensor a = attention_forward(tape, x, b.attention, &cap);
    if (train) a = ad::dropout(tape, a, config_.dropout, *rng);
    x = ad::add(tape, x, a);
    x = ad::add_rowwise(tape, ad::mul_rowwise(tape, ad::layer_norm(tape, x, config_.ln_eps),
                                              b.ln1_gain),
                        b.ln1_bias);
    Tensor h = ad::gelu(tape, ad::add_rowwise(tape, ad::matmul(tape, x, b.ff1_w), b.ff1_b));
    Tensor f = ad::add_rowwise(tape, ad::matmul(tape, h, b.ff2_w), b.ff2_b);
    if (train) f = ad::dropout(tape, f, config_.dropout, *rng);
    x = ad::add(tape, x, f);
    x = ad::add_rowwise(tape, ad::mul_rowwise(tape, ad::layer_norm(tape, x, config_.ln_eps),
                                              b.ln2_gain),
                        b.ln2_bias);

    SublayerMeans means;
    means.queries = cap.queries.colwise().mean();
    means.keys = cap.keys.colwise().mean();
    means.values = cap.values.colwise().mean();
    means.fc_out = cap.fc_out.colwise().mean();
    out.captures.push_back(std::move(means));
  }
  out.pooled = ad::mean(tape, x, 0);
  return out;
}

std::vector<std::pair<std::string, Tensor>> Encoder::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("embeddings", embeddings_);
  if (config_.positional) out.emplace_back("positions", positions_);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& b = blocks_[l];
    const std::string p = "block" + std::to_string(l) + ".";
    out.emplace_back(p + "w_q", b.attention.w_q);
    out.emplace_back(p + "w_k", b.attention.w_k);
    out.emplace_back(p + "w_v", b.attention.w_v);
    out.emplace_back(p + "w_o", b.attention.w_o);
    out.emplace_back(p + "ln1_gain", b.ln1_gain);
    out.emplace_back(p + "ln1_bias", b.ln1_bias);
    out.emplace_back(p + "ff1_w", b.ff1_w);
    out.emplace_back(p + "ff1_b", b.ff1_b);
    out.emplace_back(p + "ff2_w", b.ff2_w);
    out.emplace_back(p + "ff2_b", b.ff2_b);
    out.emplace_back(p + "ln2_gain", b.ln2_gain);
    out.emplace_back(p + "ln2_bias", b.ln2_bias);
  }
  return out;
}

}  // namespace topo
