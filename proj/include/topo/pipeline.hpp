#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "topo/error.hpp"

namespace topo::pipeline {

namespace fs = std::filesystem;

/// Exit status for a library error: 2 config/dimension, 3 data, 4 numerical.
int exit_code_for(ErrorCode code);

struct TrainOptions {
  fs::path config;
  std::optional<std::uint64_t> seed;
  fs::path out_dir = "run";
};
/// Writes checkpoint.topo, metrics.csv (epoch,loss,accuracy) and a manifest.
void train_command(const TrainOptions& opts, std::ostream& log);

struct CaptureOptions {
  fs::path checkpoint;
  fs::path corpus;
  fs::path out_dir = "capture";
  std::string sublayer = "all";
  int layer = -1;  // negative counts from the last block
  double unk_threshold = 0.5;
};
/// One activation dump per sublayer: <out_dir>/<sublayer>.json + .bin.
void capture_command(const CaptureOptions& opts, std::ostream& log);

/// Two conditions either as two dumps or as one dump split by corpus labels
/// (label 1 is condition A).
struct ConditionInputs {
  fs::path a, b;
  fs::path x;
  fs::path labels;
};

struct SelectivityOptions {
  ConditionInputs inputs;
  double range = 2.0;
  fs::path out_dir = "selectivity";
};
void selectivity_command(const SelectivityOptions& opts, std::ostream& log);

struct PcaOptions {
  fs::path x;
  int components = 2;
  fs::path out_dir = "pca";
};
void pca_command(const PcaOptions& opts, std::ostream& log);

struct TopoOptions {
  fs::path x;
  std::size_t n_perm = 100;
  std::uint64_t seed = 0;
  bool global = false;  // single all-pairs statistic instead of the nine-scale mean
  fs::path out_dir = "topo";
};
void topo_command(const TopoOptions& opts, std::ostream& log);

struct DecodeOptions {
  ConditionInputs inputs;
  int components = 50;
  double split = 0.8;
  std::uint64_t seed = 0;
  fs::path out_dir = "decode";
};
void decode_command(const DecodeOptions& opts, std::ostream& log);

struct AlignOptions {
  fs::path x, y;
  int components = 10;
  double split = 0.8;
  std::uint64_t seed = 0;
  fs::path out_dir = "align";
};
void align_command(const AlignOptions& opts, std::ostream& log);

struct EncodeOptions {
  fs::path x, y;
  std::vector<double> lambdas{0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0};
  double split = 0.8;
  std::uint64_t seed = 0;
  fs::path out_dir = "encode";
};
void encode_command(const EncodeOptions& opts, std::ostream& log);

struct SweepOptions {
  fs::path config;
  std::vector<double> r_sq{0.05, 0.3, 0.6, 0.9};
  std::vector<double> r_sr{0.05, 0.3, 0.6, 0.9};
  std::size_t threads = 1;
  fs::path out_dir = "sweep";
};
void sweep_command(const SweepOptions& opts, std::ostream& log);

struct SynthOptions {
  std::size_t sentences = 2000;
  std::size_t cue_words = 20;
  std::size_t filler_words = 60;
  std::size_t min_len = 8;
  std::size_t max_len = 16;
  double cue_rate = 0.3;
  double negation_rate = 0.0;
  double local_negation_rate = 0.0;
  std::uint64_t seed = 0;
  fs::path out;
};
void synth_command(const SynthOptions& opts, std::ostream& log);

}  // namespace topo::pipeline
