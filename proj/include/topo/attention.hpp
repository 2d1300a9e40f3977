#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "topo/autodiff.hpp"
#include "topo/grid.hpp"

namespace topo {

enum class AttentionMode { Standard, SQ, SQR };

std::string to_string(AttentionMode mode);
AttentionMode parse_attention_mode(const std::string& name);

/// Single-head attention weights plus the two spatial structures: the query
/// pooling matrix M and the connectivity mask of the output projection.
struct TopoAttentionParams {
  AttentionMode mode = AttentionMode::Standard;
  ad::Tensor w_q, w_k, w_v, w_o;
  ad::Tensor pool;      // d x d constant; identity unless mode != Standard
  ad::Tensor out_mask;  // d x d constant; all-ones unless mode == SQR

  std::size_t dim() const { return std::size_t(w_q.rows()); }

  /// Effective output projection W^O ⊙ O_mask (a plain copy for non-SQR modes).
  ad::Matrix effective_output_weight() const;
};

/// Uniform(±1/sqrt(d)) projections; for SQR the output projection is passed
/// through init_reweighting with `reweight_scale`.
TopoAttentionParams make_attention_params(const GridLayout& grid, AttentionMode mode, double r_sq,
                                          double r_sr, double reweight_scale,
                                          std::mt19937_64& rng);

/// |scale * W| ⊙ mask.
ad::Matrix init_reweighting(const ad::Matrix& w_o, const ad::Matrix& mask, double scale = 10.0);

/// Token-level sublayer activations of one sequence, each (tokens x d).
struct AttentionCapture {
  ad::Matrix queries, keys, values, fc_out;
};

/// softmax(Q K^T / sqrt(d)) row-wise.
ad::Tensor attention_scores(ad::Tape& tape, const ad::Tensor& q, const ad::Tensor& k);

/// softmax(Q M K^T / sqrt(d)) row-wise.
ad::Tensor attention_scores_sq(ad::Tape& tape, const ad::Tensor& q, const ad::Tensor& k,
                               const ad::Tensor& pool);

/// Single-head self-attention of X (n x d) in the mode stored in `params`.
/// The returned tensor is fc_out, i.e. before any residual connection.
ad::Tensor attention_forward(ad::Tape& tape, const ad::Tensor& x, const TopoAttentionParams& params,
                             AttentionCapture* capture = nullptr);

struct EncoderConfig {
  AttentionMode mode = AttentionMode::SQ;
  std::size_t d = 400;
  std::size_t vocab_size = 2;
  std::size_t max_len = 256;
  std::size_t layers = 1;
  double r_sq = 0.3;
  double r_sr = 0.3;
  double reweight_scale = 10.0;
  bool positional = true;
  double dropout = 0.0;
  double ln_eps = 1e-12;
};

/// Post-norm encoder block: x = LN(x + attn(x)); x = LN(x + FFN(x)).
struct EncoderBlock {
  TopoAttentionParams attention;
  ad::Tensor ln1_gain, ln1_bias;
  ad::Tensor ff1_w, ff1_b, ff2_w, ff2_b;  // d -> 4d -> d, gelu
  ad::Tensor ln2_gain, ln2_bias;
};

/// Per-sequence means over tokens of every sublayer.
struct SublayerMeans {
  Eigen::RowVectorXd queries, keys, values, fc_out;

  const Eigen::RowVectorXd& get(const std::string& sublayer) const;
};

inline const std::vector<std::string>& sublayer_names() {
  static const std::vector<std::string> names{"queries", "keys", "values", "fc_out"};
  return names;
}

struct EncoderOutput {
  ad::Tensor pooled;                   // 1 x d mean over tokens of the last block
  std::vector<SublayerMeans> captures;  // one per block
};

class Encoder {
 public:
  Encoder(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const noexcept { return config_; }
  const GridLayout& grid() const noexcept { return grid_; }
  std::vector<EncoderBlock>& blocks() noexcept { return blocks_; }
  const std::vector<EncoderBlock>& blocks() const noexcept { return blocks_; }

  /// Embeds, runs every block and mean-pools. PAD (id 0) tokens are dropped.
  /// Dropout is applied only when `rng` is provided.
  EncoderOutput forward(ad::Tape& tape, std::span<const std::int64_t> token_ids,
                        std::mt19937_64* rng = nullptr) const;

  /// Trainable tensors with stable names (used by checkpoints and Adam).
  std::vector<std::pair<std::string, ad::Tensor>> named_parameters() const;

  ad::Tensor& embeddings() noexcept { return embeddings_; }
  ad::Tensor& positions() noexcept { return positions_; }

 private:
  EncoderConfig config_;
  GridLayout grid_;
  ad::Tensor embeddings_;
  ad::Tensor positions_;
  std::vector<EncoderBlock> blocks_;
};

}  // namespace topo
