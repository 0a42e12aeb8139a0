#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lookaround/error.hpp"
#include "lookaround/fir.hpp"
#include "lookaround/preprocess.hpp"
#include "lookaround/recording.hpp"

namespace lookaround {

// Look-behind / target / look-ahead durations of one model input, in seconds.
struct WindowSpec {
  double look_behind_s = 0.0;
  double target_s = 16.0;
  double look_ahead_s = 0.0;
  double fs = kModelFs;

  double total_s() const { return look_behind_s + target_s + look_ahead_s; }

  static long to_samples(double seconds, double fs) {
    const double exact = seconds * fs;
    const auto n = static_cast<long>(std::llround(exact));
    if (std::abs(exact - static_cast<double>(n)) > 1e-9) {
      fail(ErrorCode::InvalidConfig, "duration " + std::to_string(seconds) + " s is not a multiple of 1/fs");
    }
    return n;
  }
  long look_behind_samples() const { return to_samples(look_behind_s, fs); }
  long target_samples() const { return to_samples(target_s, fs); }
  long look_ahead_samples() const { return to_samples(look_ahead_s, fs); }
  long total_samples() const { return look_behind_samples() + target_samples() + look_ahead_samples(); }

  void validate() const {
    if (!(target_s > 0.0)) fail(ErrorCode::InvalidConfig, "target duration must be positive");
    if (look_behind_s < 0.0 || look_ahead_s < 0.0) fail(ErrorCode::InvalidConfig, "context durations must be >= 0");
    (void)total_samples();
  }

  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

inline void to_json(nlohmann::json& j, const WindowSpec& w) {
  j = {{"look_behind_s", w.look_behind_s}, {"target_s", w.target_s}, {"look_ahead_s", w.look_ahead_s}, {"fs", w.fs}};
}

inline void from_json(const nlohmann::json& j, WindowSpec& w) {
  w.look_behind_s = j.value("look_behind_s", 0.0);
  w.target_s = j.value("target_s", 16.0);
  w.look_ahead_s = j.value("look_ahead_s", 0.0);
  w.fs = j.value("fs", kModelFs);
}

enum class SegmentCategory { fully_seizure, fully_nonseizure, mixed };
enum class TargetLabel { nonseizure = 0, seizure = 1 };

inline std::string_view to_string(SegmentCategory c) {
  switch (c) {
    case SegmentCategory::fully_seizure: return "fully_seizure";
    case SegmentCategory::fully_nonseizure: return "fully_nonseizure";
    case SegmentCategory::mixed: return "mixed";
  }
  return "?";
}

struct TargetLabeling {
  SegmentCategory category;
  TargetLabel label;
  friend bool operator==(const TargetLabeling&, const TargetLabeling&) = default;
};

// Category from containment/overlap; label by strict majority of seizure
// coverage (exactly half is non-seizure).
inline TargetLabeling label_target(const std::vector<AnnotationEvent>& seizures, double start_s, double target_s) {
  const double end_s = start_s + target_s;
  bool contained = false;
  bool overlaps = false;
  double covered = 0.0;
  for (const auto& e : seizures) {
    if (e.onset_s <= start_s && end_s <= e.end_s()) contained = true;
    if (start_s < e.end_s() && end_s > e.onset_s) {
      overlaps = true;
      covered += std::min(end_s, e.end_s()) - std::max(start_s, e.onset_s);
    }
  }
  TargetLabeling out{SegmentCategory::mixed, TargetLabel::nonseizure};
  if (contained) out.category = SegmentCategory::fully_seizure;
  else if (!overlaps) out.category = SegmentCategory::fully_nonseizure;
  if (contained || covered > target_s / 2.0) out.label = TargetLabel::seizure;
  return out;
}

inline TargetLabeling label_target(const AnnotationSet& ann, double start_s, double target_s) {
  return label_target(ann.events, start_s, target_s);
}

struct Segment {
  SignalMatrix samples;  // [18 x total window samples]
  TargetLabel target_label = TargetLabel::nonseizure;
  SegmentCategory category = SegmentCategory::fully_nonseizure;
  std::string recording_id;
  double start_s = 0.0;  // start of the target section
};

// Copies [start - look_behind, start + target + look_ahead) into `out`;
// context past either end of the recording is mirrored about the boundary.
inline void extract_window(const Recording& rec, long target_start, const WindowSpec& spec, SignalMatrix& out) {
  const long n = static_cast<long>(rec.n_samples());
  const long target_n = spec.target_samples();
  if (target_start < 0 || target_start + target_n > n) {
    fail(ErrorCode::TargetOutOfBounds, "target starting at sample " + std::to_string(target_start) +
                                           " does not fit in " + std::to_string(n) + " samples");
  }
  const long first = target_start - spec.look_behind_samples();
  const long total = spec.total_samples();
  out.resize(rec.n_channels(), total);
  if (first >= 0 && first + total <= n) {
    out = rec.samples.middleCols(first, total);
    return;
  }
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
    const double* src = rec.samples.row(c).data();
    double* dst = out.row(c).data();
    for (long i = 0; i < total; ++i) dst[i] = src[reflect_index(first + i, n)];
  }
}

inline Segment extract_segment(const Recording& rec, double start_of_target_s, const WindowSpec& spec) {
  spec.validate();
  if (rec.fs != spec.fs) fail(ErrorCode::ShapeMismatch, "recording and window sampling rates differ");
  Segment seg;
  const double scaled = start_of_target_s * spec.fs;
  const auto start = static_cast<long>(std::llround(scaled));
  if (std::abs(scaled - static_cast<double>(start)) > 1e-6) {
    fail(ErrorCode::TargetOutOfBounds, "target start is not on the sample grid");
  }
  extract_window(rec, start, spec, seg.samples);
  seg.recording_id = rec.id;
  seg.start_s = start_of_target_s;
  return seg;
}

inline Segment extract_segment(const Recording& rec, const AnnotationSet& ann, double start_of_target_s,
                               const WindowSpec& spec) {
  Segment seg = extract_segment(rec, start_of_target_s, spec);
  auto lab = label_target(ann, start_of_target_s, spec.target_s);
  seg.category = lab.category;
  seg.target_label = lab.label;
  return seg;
}

struct TimeInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

inline constexpr double kHourSeconds = 3600.0;

// Consecutive 3600 s chunks (last one partial) that overlap a seizure.
inline std::vector<TimeInterval> chunk_and_filter_hours(double duration_s, const AnnotationSet& ann) {
  std::vector<TimeInterval> kept;
  for (double start = 0.0; start < duration_s; start += kHourSeconds) {
    const double end = std::min(start + kHourSeconds, duration_s);
    const bool hit = std::any_of(ann.events.begin(), ann.events.end(), [&](const AnnotationEvent& e) {
      return e.onset_s < end && e.end_s() > start;
    });
    if (hit) kept.push_back({start, end});
  }
  return kept;
}

inline std::vector<TimeInterval> chunk_and_filter_hours(const Recording& rec, const AnnotationSet& ann) {
  return chunk_and_filter_hours(rec.duration_s(), ann);
}

}  // namespace lookaround
