#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "lookaround/edf.hpp"
#include "lookaround/error.hpp"
#include "lookaround/fir.hpp"
#include "lookaround/montage.hpp"
#include "lookaround/raw_format.hpp"
#include "lookaround/recording.hpp"
#include "lookaround/resample.hpp"

namespace lookaround {

inline constexpr int kMontageChannels = 18;

// A recording in the 18-derivation longitudinal bipolar montage at 128 Hz.
class MontagedRecording : public Recording {
 public:
  MontagedRecording() = default;
  explicit MontagedRecording(Recording rec) : Recording(std::move(rec)) {
    if (n_channels() != kMontageChannels) {
      fail(ErrorCode::ShapeMismatch, "montaged recording needs 18 channels, got " + std::to_string(n_channels()));
    }
    if (fs != kModelFs) fail(ErrorCode::ShapeMismatch, "montaged recording must be sampled at 128 Hz");
    if (!samples.allFinite()) fail(ErrorCode::NonFiniteActivation, "montaged recording has non-finite samples");
  }
};

struct PreprocessConfig {
  double highpass_hz = 0.5;
  double highpass_transition_hz = 0.5;
  double lowpass_hz = 64.0;
  double lowpass_transition_hz = 16.0;
  double notch_hz = 50.0;
  double notch_width_hz = 1.0;
  double notch_transition_hz = 1.0;
};

inline void to_json(nlohmann::json& j, const PreprocessConfig& c) {
  j = {{"highpass_hz", c.highpass_hz},       {"highpass_transition_hz", c.highpass_transition_hz},
       {"lowpass_hz", c.lowpass_hz},         {"lowpass_transition_hz", c.lowpass_transition_hz},
       {"notch_hz", c.notch_hz},             {"notch_width_hz", c.notch_width_hz},
       {"notch_transition_hz", c.notch_transition_hz}};
}

inline void from_json(const nlohmann::json& j, PreprocessConfig& c) {
  PreprocessConfig d;
  c.highpass_hz = j.value("highpass_hz", d.highpass_hz);
  c.highpass_transition_hz = j.value("highpass_transition_hz", d.highpass_transition_hz);
  c.lowpass_hz = j.value("lowpass_hz", d.lowpass_hz);
  c.lowpass_transition_hz = j.value("lowpass_transition_hz", d.lowpass_transition_hz);
  c.notch_hz = j.value("notch_hz", d.notch_hz);
  c.notch_width_hz = j.value("notch_width_hz", d.notch_width_hz);
  c.notch_transition_hz = j.value("notch_transition_hz", d.notch_transition_hz);
}

// impute -> bipolar -> highpass -> lowpass -> notch -> resample.
// The 64 Hz lowpass is skipped when the input is already at 128 Hz, where
// it would sit on the Nyquist frequency.
inline MontagedRecording preprocess_pipeline(const Recording& rec, const PreprocessConfig& cfg = {},
                                             const MontageSpec& spec = longitudinal_bipolar()) {
  Recording x = to_bipolar(impute_missing(rec, spec), spec);
  x = filter_reflect(x, design_fir(FilterKind::highpass, cfg.highpass_hz, cfg.highpass_transition_hz, x.fs));
  if (cfg.lowpass_hz < x.fs / 2.0) {
    x = filter_reflect(x, design_fir(FilterKind::lowpass, cfg.lowpass_hz, cfg.lowpass_transition_hz, x.fs));
  }
  x = filter_reflect(x, design_fir(FilterKind::notch, cfg.notch_hz, cfg.notch_transition_hz, x.fs, cfg.notch_width_hz));
  return MontagedRecording(resample_to_128(x));
}

// Reads an EDF (.edf) or raw (.json/.bin) recording.
inline Recording read_recording(const std::filesystem::path& path) {
  auto ext = detail::upper(path.extension().string());
  if (ext == ".EDF") return read_edf(path);
  Recording rec = read_raw(path);
  // raw inputs carry referential labels that may use vendor spellings
  for (auto& label : rec.channel_labels) {
    if (auto norm = normalize_electrode_label(label)) label = *norm;
  }
  validate_recording(rec);
  return rec;
}

struct CacheResult {
  MontagedRecording recording;
  bool recomputed = false;
  std::filesystem::path entry;
};

namespace preprocess_detail {

inline constexpr const char* kPipelineVersion = "lookaround-preprocess-1";

inline uint64_t hash_file(const std::filesystem::path& p, uint64_t h) {
  auto bytes = read_file_bytes(p);
  return fnv1a64(bytes.data(), bytes.size(), h);
}

inline uint64_t source_key(const std::filesystem::path& source, const PreprocessConfig& cfg) {
  std::string salt = std::string(kPipelineVersion) + nlohmann::json(cfg).dump();
  uint64_t h = fnv1a64(salt.data(), salt.size());
  if (detail::upper(source.extension().string()) == ".EDF") return hash_file(source, h);
  auto paths = raw_paths(source);
  return hash_file(paths.payload, hash_file(paths.header, h));
}

inline std::string hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace preprocess_detail

// Content-addressed cache of preprocessed recordings in the raw format.
// Entries are keyed by the source bytes and the preprocessing config; an
// entry whose payload no longer matches its recorded hash is rebuilt.
inline CacheResult preprocess_cached(const std::filesystem::path& source, const PreprocessConfig& cfg,
                                     const std::filesystem::path& cache_dir, const std::string& id = {},
                                     const std::string& patient_id = {}) {
  const uint64_t key = preprocess_detail::source_key(source, cfg);
  const std::string rec_id = id.empty() ? source.stem().string() : id;
  std::filesystem::create_directories(cache_dir);
  const auto entry = cache_dir / (rec_id + "-" + preprocess_detail::hex(key));
  const auto header_path = raw_paths(entry).header;
  CacheResult result;
  result.entry = entry;
  if (std::filesystem::exists(header_path) && raw_payload_intact(entry)) {
    result.recording = MontagedRecording(read_raw(entry));
    return result;
  }
  Recording rec = read_recording(source);
  rec.id = rec_id;
  if (!patient_id.empty()) rec.patient_id = patient_id;
  MontagedRecording processed = preprocess_pipeline(rec, cfg);
  write_raw(entry, processed, {{"source_key", preprocess_detail::hex(key)}, {"preprocess", cfg}});
  result.recording = MontagedRecording(read_raw(entry));
  result.recomputed = true;
  return result;
}

}  // namespace lookaround
