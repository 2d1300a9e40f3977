#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "topo/attention.hpp"

namespace topo {

struct Example {
  int label = 0;
  std::string text;
};

struct LabeledCorpus {
  std::vector<Example> examples;
  std::string split = "train";

  std::size_t size() const noexcept { return examples.size(); }
};

/// Reads `label<TAB>text` lines. Throws DataError for unreadable files or bad
/// labels and EmptyCorpus for files without examples.
LabeledCorpus read_corpus(const std::filesystem::path& path, const std::string& split = "train");
void write_corpus(const std::filesystem::path& path, const LabeledCorpus& corpus);

/// Lowercases, strips markup tags, splits on whitespace and emits each
/// punctuation character as its own token.
std::vector<std::string> tokenize(const std::string& text);

class Vocab {
 public:
  static constexpr std::int64_t kPad = 0;
  static constexpr std::int64_t kUnk = 1;

  Vocab();
  explicit Vocab(std::vector<std::string> tokens_by_id, std::size_t max_len = 256);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t max_len() const noexcept { return max_len_; }
  std::int64_t id(const std::string& token) const;
  const std::string& token(std::int64_t id) const { return tokens_.at(std::size_t(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// Token ids truncated to max_len.
  std::vector<std::int64_t> encode(const std::string& text) const;
  /// Fraction of tokens (before truncation) that map to UNK.
  double unknown_fraction(const std::string& text) const;

  nlohmann::json to_json() const;
  static Vocab from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int64_t> index_;
  std::size_t max_len_ = 256;
};

/// Ids ordered by (frequency desc, token asc); tokens seen fewer than
/// `min_freq` times map to UNK. `max_size` of 0 keeps every token.
Vocab build_vocab(const LabeledCorpus& corpus, std::size_t min_freq = 1,
                  std::size_t max_len = 256, std::size_t max_size = 0);

struct TrainConfig {
  AttentionMode mode = AttentionMode::SQ;
  std::size_t d = 400;
  double r_sq = 0.3;
  double r_sr = 0.3;
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double scale = 10.0;
  bool positional = true;
  std::string train_corpus;
  std::string test_corpus;
  std::size_t min_freq = 1;
  std::size_t max_len = 256;
  std::size_t max_vocab = 0;
  std::size_t layers = 1;
  double dropout = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double clip_value = 0.0;
  /// Re-applies |W^O| after every update instead of only at initialization.
  bool reapply_abs = false;

  void validate() const;
  nlohmann::json to_json() const;
  /// Unknown keys and wrongly typed values are ConfigErrors. Missing keys take
  /// defaults; batch_size defaults to 256 for SQR and 128 otherwise. Relative
  /// corpus paths resolve against `base_dir`.
  static TrainConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

/// Encoder followed by mean pooling and a linear two-way head.
class Classifier {
 public:
  Classifier(const EncoderConfig& config, std::uint64_t seed);

  Encoder& encoder() noexcept { return encoder_; }
  const Encoder& encoder() const noexcept { return encoder_; }
  ad::Tensor& head_weight() noexcept { return head_w_; }
  ad::Tensor& head_bias() noexcept { return head_b_; }

  /// 1 x 2 logits.
  ad::Tensor logits(ad::Tape& tape, std::span<const std::int64_t> ids,
                    std::mt19937_64* rng = nullptr) const;
  int predict(std::span<const std::int64_t> ids) const;

  std::vector<std::pair<std::string, ad::Tensor>> named_parameters() const;

 private:
  Encoder encoder_;
  ad::Tensor head_w_, head_b_;
};

EncoderConfig encoder_config(const TrainConfig& config, std::size_t vocab_size);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  Vocab vocab;
  Classifier model;
  std::vector<EpochMetrics> history;
  double first_batch_loss = 0.0;
};

/// Trains on in-memory corpora. Fully determined by config.seed.
TrainResult train(const TrainConfig& config, const LabeledCorpus& train_set,
                  const LabeledCorpus& test_set);
/// Reads the corpora named in the config.
TrainResult train(const TrainConfig& config);

double evaluate(const Classifier& model, const Vocab& vocab, const LabeledCorpus& corpus);

struct SweepCell {
  double r_sq = 0.0;
  double r_sr = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> accuracy;  // empty when the cell failed
  std::string error;
};

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::optional<RegressionFit> fit_r_sq;  // accuracy ~ r_sq; empty for a single-valued grid
  std::optional<RegressionFit> fit_r_sr;
  std::optional<double> spearman_r_sq;
  std::optional<double> spearman_r_sr;
};

/// Simple least-squares line; empty when x has no variance.
std::optional<RegressionFit> fit_line(std::span<const double> x, std::span<const double> y);

/// Trains one model per (r_sq, r_sr) pair. Cell i uses seed base.seed + i.
/// Failed cells are recorded and skipped in the fits.
SweepResult rf_sweep(const TrainConfig& base, std::span<const double> r_sq_grid,
                     std::span<const double> r_sr_grid, const LabeledCorpus& train_set,
                     const LabeledCorpus& test_set, std::size_t threads = 1);

/// Two-class corpus where each class draws its cue words from a disjoint
/// vocabulary, mixed with shared filler. A bag-of-words rule separates it.
struct SeparableCorpusSpec {
  std::size_t sentences = 2000;
  std::size_t cue_words = 20;     // per class
  std::size_t filler_words = 60;  // shared
  std::size_t min_len = 8;
  std::size_t max_len = 16;
  double cue_rate = 0.3;  // probability a position holds a class cue
  // Probability a sentence carries a "not" token that inverts the meaning of
  // its cues; the label then disagrees with the cue words, so bag-of-words
  // features alone cannot solve the task.
  double negation_rate = 0.0;
  // Probability a single cue is written as "not" followed by a cue of the
  // opposite class; only the word right after "not" is inverted.
  double local_negation_rate = 0.0;
};
LabeledCorpus make_separable_corpus(const SeparableCorpusSpec& spec, std::uint64_t seed);

}  // namespace topo
