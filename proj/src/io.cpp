#include "topo/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace topo::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'T', 'O', 'P', 'O', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::DataError, "sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::DataError, "cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string file_digest(const fs::path& path) { return sha256_hex(read_file(path)); }

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::DataError, "cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw Error(ErrorCode::DataError, "short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

std::string encode_f32(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  std::string out;
  out.reserve(std::size_t(m.size()) * 4);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_le(out, static_cast<float>(m(i, j)));
  return out;
}

Eigen::MatrixXd decode_f32(std::string_view bytes, std::size_t rows, std::size_t cols) {
  if (bytes.size() != rows * cols * 4)
    throw Error(ErrorCode::DataError, "blob holds " + std::to_string(bytes.size()) +
                                          " bytes, expected " + std::to_string(rows * cols * 4));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const char* p = bytes.data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j, p += 4)
      m(Eigen::Index(i), Eigen::Index(j)) = get_le<float>(p);
  return m;
}

fs::path blob_path(const fs::path& sidecar) {
  fs::path p = sidecar;
  p.replace_extension(".bin");
  return p;
}

void write_dump(const fs::path& sidecar, DumpHeader header, const Eigen::MatrixXd& values) {
  if (!values.allFinite()) throw Error(ErrorCode::NonFiniteValue, "activation dump has NaN/Inf");
  header.n = std::size_t(values.rows());
  header.d = std::size_t(values.cols());
  make_grid(header.d);
  const std::string blob = encode_f32(values);
  json j{{"n", header.n},
         {"d", header.d},
         {"sublayer", header.sublayer},
         {"layer", header.layer},
         {"model_digest", header.model_digest},
         {"seed", header.seed},
         {"blob", blob_path(sidecar).filename().string()},
         {"blob_sha256", sha256_hex(blob)}};
  write_file_atomic(blob_path(sidecar), blob);
  write_json(sidecar, j);
}

ActivationDump read_dump(const fs::path& sidecar) {
  json j;
  try {
    j = json::parse(read_file(sidecar));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DataError, "malformed dump sidecar '" + sidecar.string() + "': " + e.what());
  }
  ActivationDump dump;
  try {
    dump.header.n = j.at("n").get<std::size_t>();
    dump.header.d = j.at("d").get<std::size_t>();
    dump.header.sublayer = j.value("sublayer", "");
    dump.header.layer = j.value("layer", 0);
    dump.header.model_digest = j.value("model_digest", "");
    dump.header.seed = j.value("seed", std::uint64_t(0));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DataError, "dump sidecar '" + sidecar.string() + "': " + e.what());
  }
  try {
    make_grid(dump.header.d);
  } catch (const Error&) {
    throw Error(ErrorCode::ShapeMismatch, "dump width " + std::to_string(dump.header.d) +
                                              " is not a perfect square");
  }
  fs::path blob = sidecar.parent_path() / j.value("blob", blob_path(sidecar).filename().string());
  dump.values = decode_f32(read_file(blob), dump.header.n, dump.header.d);
  return dump;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const fs::path& path, const TrainConfig& config, const Vocab& vocab,
                     const Classifier& model) {
  json sections = json::array();
  std::string blob;
  for (const auto& [name, t] : model.named_parameters()) {
    const std::size_t offset = blob.size();
    blob += encode_f32(t.value());
    sections.push_back({{"name", name},
                        {"rows", t.rows()},
                        {"cols", t.cols()},
                        {"offset", offset},
                        {"bytes", blob.size() - offset}});
  }
  json header{{"format", "topoformer-checkpoint"},
              {"version", 1},
              {"config", config.to_json()},
              {"vocab", vocab.to_json()},
              {"sections", sections}};
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out += blob;
  write_file_atomic(path, out);
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw Error(ErrorCode::DataError, "'" + path.string() + "' is not a checkpoint");
  const auto header_len = get_le<std::uint64_t>(bytes.data() + 8);
  if (16 + header_len > bytes.size())
    throw Error(ErrorCode::DataError, "checkpoint header truncated");
  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DataError, std::string("checkpoint header: ") + e.what());
  }
  const std::string_view blob(bytes.data() + 16 + header_len, bytes.size() - 16 - header_len);

  TrainConfig config = TrainConfig::from_json(header.at("config"));
  Vocab vocab = Vocab::from_json(header.at("vocab"));
  LoadedCheckpoint ck{config, vocab, Classifier(encoder_config(config, vocab.size()), config.seed)};
  std::map<std::string, ad::Tensor> params;
  for (auto& [name, t] : ck.model.named_parameters()) params.emplace(name, t);
  for (const auto& s : header.at("sections")) {
    const auto name = s.at("name").get<std::string>();
    const auto it = params.find(name);
    if (it == params.end())
      throw Error(ErrorCode::DataError, "checkpoint section '" + name + "' is not a model tensor");
    const auto rows = s.at("rows").get<std::size_t>();
    const auto cols = s.at("cols").get<std::size_t>();
    const auto offset = s.at("offset").get<std::size_t>();
    const auto len = s.at("bytes").get<std::size_t>();
    if (offset + len > blob.size() || Eigen::Index(rows) != it->second.rows() ||
        Eigen::Index(cols) != it->second.cols())
      throw Error(ErrorCode::DataError, "checkpoint section '" + name + "' has a bad shape");
    it->second.value() = decode_f32(blob.substr(offset, len), rows, cols);
    params.erase(it);
  }
  if (!params.empty())
    throw Error(ErrorCode::DataError, "checkpoint lacks tensor '" + params.begin()->first + "'");
  return ck;
}

// ---------------------------------------------------------------------------

json RunManifest::to_json() const {
  return json{{"command", command},
              {"config_digest", config_digest},
              {"input_digests", input_digests},
              {"outputs", outputs},
              {"tool_version", kToolVersion},
              {"seed", seed},
              {"wall_time_s", wall_time_s}};
}

void write_manifest(const fs::path& path, const RunManifest& manifest) {
  write_json(path, manifest.to_json());
}

}  // namespace topo::io
