#pragma once

// Checkpoint container:
//   "LANCKPT\0" | u32 version | u64 json length | json | tensor data
// The json block carries the model config, free-form metadata and an index
// of named tensors (shape, byte offset into the data section). Tensor data
// is raw little-endian float64, row-major.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lookaround/error.hpp"
#include "lookaround/model/config.hpp"
#include "lookaround/model/params.hpp"

namespace lookaround::model {

inline constexpr char kCheckpointMagic[8] = {'L', 'A', 'N', 'C', 'K', 'P', 'T', '\0'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Mat value;
};

struct TensorFile {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Mat* find(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return &t.value;
    }
    return nullptr;
  }
};

namespace checkpoint_detail {

template <class T>
void put(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(const std::string& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) fail(ErrorCode::BadCheckpoint, "file ends inside the header");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace checkpoint_detail

inline std::string serialize_tensor_file(const TensorFile& file) {
  using namespace checkpoint_detail;
  nlohmann::json header = file.meta;
  nlohmann::json index = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& t : file.tensors) {
    index.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}, {"offset", offset}});
    offset += static_cast<uint64_t>(t.value.size()) * sizeof(double);
  }
  header["tensors"] = index;
  const std::string js = header.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<uint32_t>(out, kCheckpointVersion);
  put<uint64_t>(out, js.size());
  out += js;
  for (const auto& t : file.tensors) {
    out.append(reinterpret_cast<const char*>(t.value.data()), static_cast<size_t>(t.value.size()) * sizeof(double));
  }
  return out;
}

inline TensorFile parse_tensor_file(const std::string& bytes) {
  using namespace checkpoint_detail;
  if (bytes.size() < sizeof(kCheckpointMagic) || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    fail(ErrorCode::BadCheckpoint, "missing checkpoint magic");
  }
  size_t pos = sizeof(kCheckpointMagic);
  const auto version = get<uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) fail(ErrorCode::BadCheckpoint, "unsupported version " + std::to_string(version));
  const auto len = get<uint64_t>(bytes, pos);
  if (pos + len > bytes.size()) fail(ErrorCode::BadCheckpoint, "json block runs past the end of file");
  TensorFile file;
  try {
    file.meta = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::BadCheckpoint, std::string("json block: ") + e.what());
  }
  pos += len;
  const size_t data_start = pos;
  const auto index = file.meta.value("tensors", nlohmann::json::array());
  file.meta.erase("tensors");
  for (const auto& entry : index) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const auto offset = entry.at("offset").get<uint64_t>();
    const size_t nbytes = static_cast<size_t>(rows * cols) * sizeof(double);
    if (rows < 0 || cols < 0 || data_start + offset + nbytes > bytes.size()) {
      fail(ErrorCode::BadCheckpoint, "tensor " + t.name + " runs past the end of file");
    }
    t.value.resize(rows, cols);
    std::memcpy(t.value.data(), bytes.data() + data_start + offset, nbytes);
    file.tensors.push_back(std::move(t));
  }
  return file;
}

inline void write_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  const std::string bytes = serialize_tensor_file(file);
  // write-then-rename so a crash never leaves a half-written checkpoint
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_tensor_file(bytes);
}

inline void append_params(TensorFile& file, const ModelParams& p, const std::string& prefix = "") {
  for_each_tensor(p, [&](const std::string& name, const Mat& m) { file.tensors.push_back({prefix + name, m}); });
}

inline void extract_params(const TensorFile& file, ModelParams& p, const std::string& prefix = "") {
  for_each_tensor(p, [&](const std::string& name, Mat& m) {
    const Mat* t = file.find(prefix + name);
    if (!t) fail(ErrorCode::BadCheckpoint, "missing tensor " + prefix + name);
    if (t->rows() != m.rows() || t->cols() != m.cols()) {
      fail(ErrorCode::BadCheckpoint, "tensor " + prefix + name + " has the wrong shape");
    }
    m = *t;
  });
}

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  nlohmann::json metadata = nlohmann::json::object();  // epoch, validation f1, threshold, ...
};

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  TensorFile file;
  file.meta["kind"] = "model";
  file.meta["config"] = ck.config;
  file.meta["metadata"] = ck.metadata;
  file.meta["parameter_count"] = count_parameters(ck.params);
  append_params(file, ck.params);
  write_tensor_file(path, file);
}

inline Checkpoint checkpoint_from(const TensorFile& file) {
  Checkpoint ck;
  try {
    ck.config = file.meta.at("config").get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::BadCheckpoint, std::string("model config: ") + e.what());
  }
  ck.config.validate();
  ck.metadata = file.meta.value("metadata", nlohmann::json::object());
  ck.params = zeros_like(ck.config);
  extract_params(file, ck.params);
  if (!all_finite(ck.params)) fail(ErrorCode::BadCheckpoint, "checkpoint holds non-finite parameters");
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from(read_tensor_file(path)); }

}  // namespace lookaround::model
