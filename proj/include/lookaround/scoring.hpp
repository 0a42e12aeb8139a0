#pragma once

// Sample-based (1 Hz raster) and event-based (any-overlap with tolerance)
// scoring of seizure hypotheses against reference annotations.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lookaround/error.hpp"
#include "lookaround/recording.hpp"

namespace lookaround {

// Detected seizure intervals for one recording.
struct EventList {
  std::string recording_id;
  std::vector<AnnotationEvent> events;  // sorted, non-overlapping, duration > 0
  double duration_s = 0.0;              // total recording duration

  friend bool operator==(const EventList&, const EventList&) = default;
};

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tp_hyp = 0;  // event mode: hypotheses overlapping some reference

  friend bool operator==(const Counts&, const Counts&) = default;
};

struct SampleMetrics {
  double sensitivity = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

struct EventMetrics {
  double sensitivity = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double fp_per_day = 0.0;
};

struct EventTolerance {
  double pre_s = 30.0;
  double post_s = 60.0;
};

struct ScoreReport {
  std::string label;
  SampleMetrics sample;
  EventMetrics event;
  Counts sample_counts;
  Counts event_counts;
  double total_duration_s = 0.0;
  long n_recordings = 0;
};

inline double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

inline double f1_score(double precision, double sensitivity) {
  return precision + sensitivity > 0.0 ? 2.0 * precision * sensitivity / (precision + sensitivity) : 0.0;
}

inline SampleMetrics sample_metrics(const Counts& c) {
  SampleMetrics m;
  m.sensitivity = safe_ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  m.precision = safe_ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  m.f1 = f1_score(m.precision, m.sensitivity);
  return m;
}

inline EventMetrics event_metrics(const Counts& c, double duration_s) {
  EventMetrics m;
  m.sensitivity = safe_ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  m.precision = safe_ratio(static_cast<double>(c.tp_hyp), static_cast<double>(c.tp_hyp + c.fp));
  m.f1 = f1_score(m.precision, m.sensitivity);
  m.fp_per_day = safe_ratio(static_cast<double>(c.fp) * 86400.0, duration_s);
  return m;
}

inline long n_cells(double duration_s) { return static_cast<long>(std::ceil(duration_s - 1e-9)); }

// Cell i covers [i, min(i + 1, duration)); it is positive iff an event
// overlaps it with positive length.
inline std::vector<char> rasterize(const std::vector<AnnotationEvent>& events, double duration_s) {
  const long n = n_cells(duration_s);
  std::vector<char> cells(static_cast<size_t>(std::max(0L, n)), 0);
  for (const auto& e : events) {
    const double a = std::max(0.0, e.onset_s);
    const double b = std::min(duration_s, e.end_s());
    if (b <= a) continue;
    const long first = static_cast<long>(std::floor(a));
    const long last = std::min(n - 1, static_cast<long>(std::ceil(b)) - 1);
    for (long i = first; i <= last; ++i) cells[static_cast<size_t>(i)] = 1;
  }
  return cells;
}

inline void check_duration(const EventList& hyp, double duration_s) {
  if (std::abs(hyp.duration_s - duration_s) > 1e-6) {
    fail(ErrorCode::DurationMismatch, "hypothesis covers " + std::to_string(hyp.duration_s) +
                                          " s but the recording lasts " + std::to_string(duration_s) + " s");
  }
  for (const auto& e : hyp.events) {
    if (e.onset_s < 0.0 || e.end_s() > duration_s + 1e-6) {
      fail(ErrorCode::DurationMismatch, "hypothesis event [" + std::to_string(e.onset_s) + ", " +
                                            std::to_string(e.end_s()) + ") lies outside the recording");
    }
  }
}

inline Counts score_samples(const EventList& hyp, const AnnotationSet& ref, double duration_s) {
  check_duration(hyp, duration_s);
  const auto h = rasterize(hyp.events, duration_s);
  const auto r = rasterize(ref.events, duration_s);
  Counts c;
  for (size_t i = 0; i < h.size(); ++i) {
    if (h[i] && r[i]) ++c.tp;
    else if (h[i]) ++c.fp;
    else if (r[i]) ++c.fn;
  }
  return c;
}

inline Counts score_events(const EventList& hyp, const AnnotationSet& ref, double duration_s,
                           const EventTolerance& tol = {}) {
  check_duration(hyp, duration_s);
  auto overlaps = [&](const AnnotationEvent& h, const AnnotationEvent& r) {
    return h.onset_s < r.end_s() + tol.post_s && h.end_s() > r.onset_s - tol.pre_s;
  };
  Counts c;
  for (const auto& r : ref.events) {
    const bool hit = std::any_of(hyp.events.begin(), hyp.events.end(), [&](const auto& h) { return overlaps(h, r); });
    if (hit) ++c.tp;
    else ++c.fn;
  }
  for (const auto& h : hyp.events) {
    const bool hit = std::any_of(ref.events.begin(), ref.events.end(), [&](const auto& r) { return overlaps(h, r); });
    if (hit) ++c.tp_hyp;
    else ++c.fp;
  }
  return c;
}

inline ScoreReport make_report(const Counts& sample, const Counts& event, double duration_s, long n_recordings = 1) {
  ScoreReport rep;
  rep.sample_counts = sample;
  rep.event_counts = event;
  rep.total_duration_s = duration_s;
  rep.n_recordings = n_recordings;
  rep.sample = sample_metrics(sample);
  rep.event = event_metrics(event, duration_s);
  return rep;
}

inline ScoreReport score_recording(const EventList& hyp, const AnnotationSet& ref, double duration_s,
                                   const EventTolerance& tol = {}) {
  ScoreReport rep =
      make_report(score_samples(hyp, ref, duration_s), score_events(hyp, ref, duration_s, tol), duration_s);
  rep.label = hyp.recording_id;
  return rep;
}

// Micro-average: pooled counts and summed durations.
inline ScoreReport aggregate(const std::vector<ScoreReport>& reports, std::string label = "all") {
  Counts s, e;
  double duration = 0.0;
  long n = 0;
  for (const auto& r : reports) {
    s.tp += r.sample_counts.tp;
    s.fp += r.sample_counts.fp;
    s.fn += r.sample_counts.fn;
    e.tp += r.event_counts.tp;
    e.fp += r.event_counts.fp;
    e.fn += r.event_counts.fn;
    e.tp_hyp += r.event_counts.tp_hyp;
    duration += r.total_duration_s;
    n += r.n_recordings;
  }
  ScoreReport out = make_report(s, e, duration, n);
  out.label = std::move(label);
  return out;
}

inline void to_json(nlohmann::json& j, const Counts& c) {
  j = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tp_hyp", c.tp_hyp}};
}

inline void to_json(nlohmann::json& j, const ScoreReport& r) {
  j = {{"label", r.label},
       {"n_recordings", r.n_recordings},
       {"total_duration_s", r.total_duration_s},
       {"sample",
        {{"sensitivity", r.sample.sensitivity},
         {"precision", r.sample.precision},
         {"f1", r.sample.f1},
         {"counts", r.sample_counts}}},
       {"event",
        {{"sensitivity", r.event.sensitivity},
         {"precision", r.event.precision},
         {"f1", r.event.f1},
         {"fp_per_day", r.event.fp_per_day},
         {"counts", r.event_counts}}}};
}

// Aligned text table, one row per report:
//             event                  sample
//   name      SDR  FP/day  F1        F1  Sens.  Prec.
inline std::string format_table(const std::vector<ScoreReport>& reports) {
  size_t w = 8;
  for (const auto& r : reports) w = std::max(w, r.label.size() + 2);
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s %-24s %-22s\n", static_cast<int>(w), "", "event", "sample");
  os << buf;
  std::snprintf(buf, sizeof buf, "%-*s %6s %8s %6s   %6s %6s %6s\n", static_cast<int>(w), "", "SDR", "FP/day", "F1",
                "F1", "Sens.", "Prec.");
  os << buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-*s %6.3f %8.2f %6.3f   %6.3f %6.3f %6.3f\n", static_cast<int>(w),
                  r.label.c_str(), r.event.sensitivity, r.event.fp_per_day, r.event.f1, r.sample.f1,
                  r.sample.sensitivity, r.sample.precision);
    os << buf;
  }
  return os.str();
}

}  // namespace lookaround
