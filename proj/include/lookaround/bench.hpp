#pragma once

// Inference throughput on one recording. Reading the file is timed
// separately from compute; the headline is sliding inference alone.

#include <chrono>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "lookaround/inference.hpp"
#include "lookaround/preprocess.hpp"

namespace lookaround {

struct BenchReport {
  double duration_s = 0.0;
  long window_count = 0;
  int threads = 1;
  double stride_s = 2.0;
  std::string precision;
  double io_seconds = 0.0;
  double preprocess_seconds = 0.0;
  double inference_seconds = 0.0;

  double rtf_inference() const { return inference_seconds > 0 ? duration_s / inference_seconds : 0.0; }
  double rtf_with_preprocess() const {
    const double t = inference_seconds + preprocess_seconds;
    return t > 0 ? duration_s / t : 0.0;
  }
};

inline void to_json(nlohmann::json& j, const BenchReport& r) {
  j = {{"duration_s", r.duration_s},
       {"window_count", r.window_count},
       {"threads", r.threads},
       {"stride_s", r.stride_s},
       {"precision", r.precision},
       {"io_seconds", r.io_seconds},
       {"preprocess_seconds", r.preprocess_seconds},
       {"inference_seconds", r.inference_seconds},
       {"inference_plus_preprocess_seconds", r.inference_seconds + r.preprocess_seconds},
       {"real_time_factor", r.rtf_inference()},
       {"real_time_factor_with_preprocess", r.rtf_with_preprocess()}};
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// `source` may be raw referential data (preprocessed here, timed) or an
// already-montaged 128 Hz recording (preprocess time reported as 0).
inline BenchReport run_bench(const std::filesystem::path& source, const model::Model& m, double stride_s,
                             int threads, const PreprocessConfig& pcfg = {}) {
  BenchReport r;
  r.threads = resolve_threads(threads);
  r.stride_s = stride_s;
  r.precision = model::to_string(m.precision());
  auto t0 = std::chrono::steady_clock::now();
  Recording raw = read_recording(source);
  r.io_seconds = seconds_since(t0);
  MontagedRecording rec;
  const bool montaged = raw.n_channels() == kMontageChannels && raw.fs == kModelFs &&
                        raw.channel_labels.front().find('-') != std::string::npos;
  t0 = std::chrono::steady_clock::now();
  rec = montaged ? MontagedRecording(std::move(raw)) : preprocess_pipeline(raw, pcfg);
  r.preprocess_seconds = montaged ? 0.0 : seconds_since(t0);
  r.duration_s = rec.duration_s();
  t0 = std::chrono::steady_clock::now();
  const auto trace = sliding_infer(rec, m, stride_s, threads);
  r.inference_seconds = seconds_since(t0);
  r.window_count = count_windows(r.duration_s, m.config().window, stride_s);
  (void)trace;
  return r;
}

inline BenchReport run_bench(const MontagedRecording& rec, const model::Model& m, double stride_s, int threads) {
  BenchReport r;
  r.threads = resolve_threads(threads);
  r.stride_s = stride_s;
  r.precision = model::to_string(m.precision());
  r.duration_s = rec.duration_s();
  const auto t0 = std::chrono::steady_clock::now();
  const auto trace = sliding_infer(rec, m, stride_s, threads);
  r.inference_seconds = seconds_since(t0);
  r.window_count = count_windows(r.duration_s, m.config().window, stride_s);
  (void)trace;
  return r;
}

}  // namespace lookaround
