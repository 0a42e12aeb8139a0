#pragma once

// Sliding-window inference with overlap averaging on the 1 Hz grid,
// ensembling, thresholding and event extraction.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "lookaround/annotations.hpp"
#include "lookaround/error.hpp"
#include "lookaround/model/network.hpp"
#include "lookaround/parallel.hpp"
#include "lookaround/preprocess.hpp"
#include "lookaround/scoring.hpp"
#include "lookaround/windowing.hpp"

namespace lookaround {

struct ProbabilityTrace {
  std::string recording_id;
  double duration_s = 0.0;
  std::vector<double> values;  // one per second, ceil(duration) cells
  std::vector<int> coverage;   // windows contributing to each cell
};

struct InferenceConfig {
  double stride_s = 2.0;
  double threshold = 0.85;
  double merge_gap_s = 90.0;
  double max_event_s = 300.0;
  int threads = 0;  // 0 = all cores
  bool share_embeddings = true;

  void validate() const {
    if (!(stride_s > 0.0)) fail(ErrorCode::InvalidConfig, "stride must be positive");
    if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCode::InvalidConfig, "threshold must be in (0, 1)");
    if (merge_gap_s < 0.0) fail(ErrorCode::InvalidConfig, "merge gap must be >= 0");
    if (!(max_event_s > 0.0)) fail(ErrorCode::InvalidConfig, "max event duration must be positive");
  }
};

inline void to_json(nlohmann::json& j, const InferenceConfig& c) {
  j = {{"stride_s", c.stride_s},       {"threshold", c.threshold}, {"merge_gap_s", c.merge_gap_s},
       {"max_event_s", c.max_event_s}, {"threads", c.threads},     {"share_embeddings", c.share_embeddings}};
}

inline void from_json(const nlohmann::json& j, InferenceConfig& c) {
  InferenceConfig d;
  c.stride_s = j.value("stride_s", d.stride_s);
  c.threshold = j.value("threshold", d.threshold);
  c.merge_gap_s = j.value("merge_gap_s", d.merge_gap_s);
  c.max_event_s = j.value("max_event_s", d.max_event_s);
  c.threads = j.value("threads", d.threads);
  c.share_embeddings = j.value("share_embeddings", d.share_embeddings);
}

// Target start samples: 0, stride, 2*stride, ... while the target fits, plus
// one end-aligned window when the regular grid leaves the tail uncovered.
inline std::vector<long> window_starts(long n_samples, const WindowSpec& spec, double stride_s) {
  spec.validate();
  const long target_n = spec.target_samples();
  if (n_samples < target_n) {
    fail(ErrorCode::TooShortRecording, "recording has " + std::to_string(n_samples) +
                                           " samples, shorter than one target (" + std::to_string(target_n) + ")");
  }
  const long stride_n = WindowSpec::to_samples(stride_s, spec.fs);
  const double ratio = spec.target_s / stride_s;
  if (stride_n <= 0 || std::abs(ratio - std::round(ratio)) > 1e-9) {
    fail(ErrorCode::InvalidConfig, "stride must divide the target length");
  }
  std::vector<long> starts;
  for (long s = 0; s + target_n <= n_samples; s += stride_n) starts.push_back(s);
  if (starts.back() + target_n < n_samples) starts.push_back(n_samples - target_n);
  return starts;
}

inline long count_windows(double duration_s, const WindowSpec& spec, double stride_s) {
  return static_cast<long>(window_starts(std::llround(duration_s * spec.fs), spec, stride_s).size());
}

// Attributes probs[i] to every 1-s cell the i-th target overlaps and averages.
inline ProbabilityTrace accumulate_trace(std::string recording_id, long n_samples, const WindowSpec& spec,
                                         const std::vector<long>& starts, const std::vector<double>& probs) {
  if (starts.size() != probs.size()) fail(ErrorCode::LengthMismatch, "one probability per window expected");
  ProbabilityTrace tr;
  tr.recording_id = std::move(recording_id);
  tr.duration_s = static_cast<double>(n_samples) / spec.fs;
  const long cells = n_cells(tr.duration_s);
  std::vector<double> sum(static_cast<size_t>(cells), 0.0);
  tr.coverage.assign(static_cast<size_t>(cells), 0);
  const long target_n = spec.target_samples();
  const long fs = std::lround(spec.fs);
  for (size_t w = 0; w < starts.size(); ++w) {
    // cells i with [i*fs, (i+1)*fs) intersecting [start, start + target_n)
    const long first = starts[w] / fs;
    const long last = std::min(cells - 1, (starts[w] + target_n - 1) / fs);
    for (long i = first; i <= last; ++i) {
      sum[static_cast<size_t>(i)] += probs[w];
      ++tr.coverage[static_cast<size_t>(i)];
    }
  }
  tr.values.resize(static_cast<size_t>(cells));
  for (size_t i = 0; i < sum.size(); ++i) {
    if (tr.coverage[i] == 0) fail(ErrorCode::TooShortRecording, "second " + std::to_string(i) + " is not covered");
    tr.values[i] = sum[i] / tr.coverage[i];
  }
  return tr;
}

// Model-agnostic form: `score` maps a window [C x total samples] to p(seizure).
using WindowScorer = std::function<double(const SignalMatrix& window)>;

inline ProbabilityTrace sliding_infer(const Recording& rec, const WindowSpec& spec, const WindowScorer& score,
                                      double stride_s = 2.0, int threads = 0) {
  if (rec.fs != spec.fs) fail(ErrorCode::ShapeMismatch, "recording and window sampling rates differ");
  const auto starts = window_starts(rec.n_samples(), spec, stride_s);
  std::vector<double> probs(starts.size());
  parallel_for(static_cast<long>(starts.size()), threads, [&](long i) {
    SignalMatrix w;
    extract_window(rec, starts[static_cast<size_t>(i)], spec, w);
    probs[static_cast<size_t>(i)] = score(w);
  });
  return accumulate_trace(rec.id, rec.n_samples(), spec, starts, probs);
}

namespace inference_detail {

// Per-window seizure probabilities. Windows lying on the patch grid and
// inside the recording reuse patch embeddings computed once per recording,
// since the patch front end acts on each patch independently.
template <class S>
std::vector<double> model_probabilities(const Recording& rec, const model::Model& m, const std::vector<long>& starts,
                                        int threads, bool share) {
  using model::MatT;
  const auto& cfg = m.config();
  const auto& p = m.params_as<S>();
  const long L = cfg.patch_len, P = cfg.n_patches(), C = cfg.n_channels;
  const long n = rec.n_samples(), total = cfg.window_samples(), lb = cfg.window.look_behind_samples();
  auto aligned = [&](long start) {
    const long first = start - lb;
    return share && first >= 0 && first + total <= n && first % L == 0;
  };
  const bool any_aligned = std::any_of(starts.begin(), starts.end(), aligned);
  const long K = n / L;
  MatT<S> table;  // row c*K + k: embedding of patch k of channel c
  if (any_aligned) {
    MatT<S> patches(C * K, L);
    for (long c = 0; c < C; ++c) {
      patches.middleRows(c * K, K) =
          Eigen::Map<const MatT<double>>(rec.samples.row(c).data(), K, L).template cast<S>();
    }
    const long rows = C * K, block = 4096;
    table.resize(rows, cfg.embed_dim);
    const long n_blocks = (rows + block - 1) / block;
    parallel_for(n_blocks, threads, [&](long b) {
      const long lo = b * block, cnt = std::min(block, rows - lo);
      const MatT<S> part = patches.middleRows(lo, cnt);
      table.middleRows(lo, cnt) = model::embed_patches<S>(part, p, cfg);
    });
  }
  std::vector<double> probs(starts.size());
  parallel_for(static_cast<long>(starts.size()), threads, [&](long i) {
    const long start = starts[static_cast<size_t>(i)];
    model::ForwardOutput out;
    if (aligned(start)) {
      const long k0 = (start - lb) / L;
      MatT<S> x(C * P, cfg.embed_dim);
      for (long c = 0; c < C; ++c) x.middleRows(c * P, P) = table.middleRows(c * K + k0, P);
      out = model::forward_tokens<S>(std::move(x), p, cfg, model::Mode::eval);
    } else {
      SignalMatrix w;
      extract_window(rec, start, cfg.window, w);
      out = model::forward<S>(w, p, cfg, model::Mode::eval);
    }
    probs[static_cast<size_t>(i)] = out.seizure_probability();
  });
  return probs;
}

}  // namespace inference_detail

inline ProbabilityTrace sliding_infer(const Recording& rec, const model::Model& m, double stride_s = 2.0,
                                      int threads = 0, bool share_embeddings = true) {
  const auto& cfg = m.config();
  if (rec.fs != cfg.window.fs) fail(ErrorCode::ShapeMismatch, "recording and model sampling rates differ");
  if (rec.n_channels() != cfg.n_channels) {
    fail(ErrorCode::ShapeMismatch, "recording has " + std::to_string(rec.n_channels()) + " channels, model expects " +
                                       std::to_string(cfg.n_channels));
  }
  const auto starts = window_starts(rec.n_samples(), cfg.window, stride_s);
  const auto probs =
      m.precision() == model::Precision::float32
          ? inference_detail::model_probabilities<float>(rec, m, starts, threads, share_embeddings)
          : inference_detail::model_probabilities<double>(rec, m, starts, threads, share_embeddings);
  return accumulate_trace(rec.id, rec.n_samples(), cfg.window, starts, probs);
}

inline ProbabilityTrace sliding_infer(const Recording& rec, const model::Model& m, const InferenceConfig& ic) {
  ic.validate();
  return sliding_infer(rec, m, ic.stride_s, ic.threads, ic.share_embeddings);
}

inline ProbabilityTrace ensemble(const std::vector<ProbabilityTrace>& traces) {
  if (traces.empty()) fail(ErrorCode::LengthMismatch, "ensemble needs at least one trace");
  ProbabilityTrace out = traces.front();
  for (size_t k = 1; k < traces.size(); ++k) {
    const auto& t = traces[k];
    if (t.recording_id != out.recording_id || t.values.size() != out.values.size()) {
      fail(ErrorCode::LengthMismatch, "ensemble members disagree on recording or length");
    }
    for (size_t i = 0; i < t.values.size(); ++i) {
      out.values[i] += t.values[i];
      out.coverage[i] += t.coverage[i];
    }
  }
  for (auto& v : out.values) v /= static_cast<double>(traces.size());
  return out;
}

struct EventHygiene {
  double merge_gap_s = 90.0;
  double max_event_s = 300.0;
};

// p >= threshold marks a positive cell; runs become events, then events
// closer than merge_gap_s are merged and events longer than max_event_s
// are cut into max_event_s pieces.
inline EventList binarize_and_extract(const ProbabilityTrace& trace, double threshold = 0.85,
                                      const EventHygiene& hygiene = {}) {
  if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCode::InvalidConfig, "threshold must be in (0, 1)");
  EventList out;
  out.recording_id = trace.recording_id;
  out.duration_s = trace.duration_s;
  std::vector<AnnotationEvent> runs;
  const size_t n = trace.values.size();
  for (size_t i = 0; i < n;) {
    if (trace.values[i] < threshold) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < n && trace.values[j] >= threshold) ++j;
    const double a = static_cast<double>(i);
    const double b = std::min(static_cast<double>(j), trace.duration_s);
    runs.push_back({a, b - a, EventLabel::seizure});
    i = j;
  }
  std::vector<AnnotationEvent> merged;
  for (const auto& e : runs) {
    if (!merged.empty() && e.onset_s - merged.back().end_s() < hygiene.merge_gap_s) {
      merged.back().duration_s = e.end_s() - merged.back().onset_s;
    } else {
      merged.push_back(e);
    }
  }
  for (const auto& e : merged) {
    double a = e.onset_s;
    while (e.end_s() - a > hygiene.max_event_s) {
      out.events.push_back({a, hygiene.max_event_s, EventLabel::seizure});
      a += hygiene.max_event_s;
    }
    if (e.end_s() > a) out.events.push_back({a, e.end_s() - a, EventLabel::seizure});
  }
  return out;
}

inline EventList binarize_and_extract(const ProbabilityTrace& trace, const InferenceConfig& ic) {
  return binarize_and_extract(trace, ic.threshold, {ic.merge_gap_s, ic.max_event_s});
}

struct EnsembleResult {
  std::vector<ProbabilityTrace> members;
  ProbabilityTrace trace;
  EventList events;
};

// Each member runs with its own window placement; traces are averaged,
// then thresholded.
inline EnsembleResult run_ensemble_configs(const Recording& rec, const std::vector<model::Model>& members,
                                           const InferenceConfig& ic = {}) {
  ic.validate();
  if (members.empty()) fail(ErrorCode::InvalidConfig, "no checkpoints to ensemble");
  EnsembleResult r;
  for (const auto& m : members) r.members.push_back(sliding_infer(rec, m, ic));
  r.trace = ensemble(r.members);
  r.events = binarize_and_extract(r.trace, ic);
  return r;
}

inline void write_trace_csv(std::ostream& out, const ProbabilityTrace& t) {
  out << "second,probability,coverage\n";
  char buf[64];
  for (size_t i = 0; i < t.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%d\n", i, t.values[i], t.coverage[i]);
    out << buf;
  }
}

inline void write_trace_csv(const std::filesystem::path& path, const ProbabilityTrace& t) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  write_trace_csv(out, t);
}

inline ProbabilityTrace read_trace_csv(const std::filesystem::path& path, std::string recording_id,
                                       double duration_s) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  ProbabilityTrace t;
  t.recording_id = std::move(recording_id);
  t.duration_s = duration_s;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t sec = 0;
    double p = 0.0;
    int cov = 0;
    if (std::sscanf(line.c_str(), "%zu,%lf,%d", &sec, &p, &cov) != 3 || sec != t.values.size()) {
      fail(ErrorCode::Io, "bad trace row: " + line);
    }
    t.values.push_back(p);
    t.coverage.push_back(cov);
  }
  return t;
}

inline void write_hypothesis_tsv(const std::filesystem::path& path, const EventList& ev) {
  write_events_tsv(path, ev.events);
}

}  // namespace lookaround
