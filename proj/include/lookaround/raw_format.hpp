#pragma once

// Raw recording format: <name>.json sidecar + <name>.bin payload of
// little-endian float32 samples, channel-major.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lookaround/error.hpp"
#include "lookaround/recording.hpp"

namespace lookaround {

static_assert(std::endian::native == std::endian::little, "raw format I/O assumes a little-endian host");

struct RawPaths {
  std::filesystem::path header;
  std::filesystem::path payload;
};

inline RawPaths raw_paths(const std::filesystem::path& any) {
  auto stem = any;
  if (stem.extension() == ".json" || stem.extension() == ".bin") stem.replace_extension();
  auto header = stem;
  header += ".json";
  auto payload = stem;
  payload += ".bin";
  return {header, payload};
}

// 64-bit FNV-1a; used to detect corrupted cache payloads.
inline uint64_t fnv1a64(const void* data, size_t size, uint64_t hash = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < size; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::vector<float> to_payload(const Recording& rec) {
  std::vector<float> payload(static_cast<size_t>(rec.samples.size()));
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
    for (Eigen::Index k = 0; k < rec.n_samples(); ++k) {
      payload[static_cast<size_t>(c * rec.n_samples() + k)] = static_cast<float>(rec.samples(c, k));
    }
  }
  return payload;
}

inline nlohmann::json write_raw(const std::filesystem::path& path, const Recording& rec,
                                const nlohmann::json& extra = nlohmann::json::object()) {
  auto paths = raw_paths(path);
  auto payload = to_payload(rec);
  nlohmann::json header = extra;
  header["id"] = rec.id;
  header["patient_id"] = rec.patient_id;
  header["fs"] = rec.fs;
  header["channel_labels"] = rec.channel_labels;
  header["n_samples"] = rec.n_samples();
  header["payload_hash"] = fnv1a64(payload.data(), payload.size() * sizeof(float));
  {
    std::ofstream out(paths.payload, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + paths.payload.string());
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * sizeof(float)));
  }
  {
    std::ofstream out(paths.header);
    if (!out) fail(ErrorCode::Io, "cannot write " + paths.header.string());
    out << header.dump(2) << '\n';
  }
  return header;
}

inline nlohmann::json read_raw_header(const std::filesystem::path& path) {
  auto paths = raw_paths(path);
  std::ifstream in(paths.header);
  if (!in) fail(ErrorCode::Io, "cannot open " + paths.header.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedHeader, paths.header.string() + ": " + e.what());
  }
}

inline Recording read_raw(const std::filesystem::path& path) {
  auto paths = raw_paths(path);
  auto header = read_raw_header(path);
  Recording rec;
  size_t n_samples = 0;
  try {
    rec.fs = header.at("fs").get<double>();
    rec.channel_labels = header.at("channel_labels").get<std::vector<std::string>>();
    n_samples = header.at("n_samples").get<size_t>();
    rec.id = header.value("id", paths.header.stem().string());
    rec.patient_id = header.value("patient_id", std::string{});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedHeader, paths.header.string() + ": " + e.what());
  }
  const size_t n_channels = rec.channel_labels.size();
  const size_t expected = n_channels * n_samples * sizeof(float);
  std::error_code ec;
  const auto actual = std::filesystem::file_size(paths.payload, ec);
  if (ec) fail(ErrorCode::Io, "cannot stat " + paths.payload.string());
  if (actual != expected) {
    fail(ErrorCode::HeaderPayloadMismatch, paths.payload.string() + " holds " + std::to_string(actual) +
                                               " bytes, header declares " + std::to_string(expected));
  }
  std::vector<float> payload(n_channels * n_samples);
  {
    std::ifstream in(paths.payload, std::ios::binary);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(expected));
  }
  rec.samples.resize(static_cast<Eigen::Index>(n_channels), static_cast<Eigen::Index>(n_samples));
  for (size_t c = 0; c < n_channels; ++c) {
    for (size_t k = 0; k < n_samples; ++k) {
      rec.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = payload[c * n_samples + k];
    }
  }
  validate_recording(rec);
  return rec;
}

// True when the payload on disk matches the hash recorded in its sidecar.
inline bool raw_payload_intact(const std::filesystem::path& path) {
  auto paths = raw_paths(path);
  nlohmann::json header;
  try {
    header = read_raw_header(path);
  } catch (const Error&) {
    return false;
  }
  if (!header.contains("payload_hash")) return false;
  auto bytes = [&] {
    std::ifstream in(paths.payload, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }();
  return fnv1a64(bytes.data(), bytes.size()) == header["payload_hash"].get<uint64_t>();
}

}  // namespace lookaround
