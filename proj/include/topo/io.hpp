#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "topo/trainer.hpp"

namespace topo::io {

inline constexpr const char* kToolVersion = "0.1.0";

std::string sha256_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
/// Pretty-printed JSON with a trailing newline, written atomically.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Activation dumps: JSON sidecar + n*d little-endian float32, row-major.

struct DumpHeader {
  std::size_t n = 0;
  std::size_t d = 0;
  std::string sublayer;
  int layer = 0;
  std::string model_digest;
  std::uint64_t seed = 0;
};

struct ActivationDump {
  DumpHeader header;
  Eigen::MatrixXd values;  // widened from float32
};

/// Blob lives next to the sidecar with extension ".bin".
std::filesystem::path blob_path(const std::filesystem::path& sidecar);

void write_dump(const std::filesystem::path& sidecar, DumpHeader header,
                const Eigen::MatrixXd& values);
ActivationDump read_dump(const std::filesystem::path& sidecar);

/// Little-endian float32 row-major bytes.
std::string encode_f32(const Eigen::Ref<const Eigen::MatrixXd>& m);
Eigen::MatrixXd decode_f32(std::string_view bytes, std::size_t rows, std::size_t cols);

// ---------------------------------------------------------------------------
// Checkpoints: "TOPOCKPT" magic, u64 header length, JSON header (config,
// vocab, section table with byte offsets into the blob), float32 blob.

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config,
                     const Vocab& vocab, const Classifier& model);

struct LoadedCheckpoint {
  TrainConfig config;
  Vocab vocab;
  Classifier model;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::map<std::string, std::string> input_digests;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
  std::map<std::string, std::string> outputs;  // name -> digest

  nlohmann::json to_json() const;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

}  // namespace topo::io
