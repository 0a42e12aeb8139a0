#pragma once

// SVG timeline of predictions against reference seizures, one lane per
// patient. Only rect, line and text elements are emitted.

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lookaround/error.hpp"
#include "lookaround/scoring.hpp"

namespace lookaround {

struct TimelineRecording {
  std::string recording_id;
  std::string patient_id;
  double duration_s = 0.0;
  std::vector<AnnotationEvent> reference;
  std::vector<AnnotationEvent> hypothesis;
};

enum class MarkKind { detected, missed, false_positive, true_hypothesis };

inline const char* mark_color(MarkKind k) {
  switch (k) {
    case MarkKind::detected: return "#2e9d3a";
    case MarkKind::missed: return "#f08a00";
    case MarkKind::false_positive: return "#000000";
    case MarkKind::true_hypothesis: return "#8fd19e";
  }
  return "#888888";
}

struct TimelineMark {
  std::string patient_id;
  double start_s = 0.0;  // on the patient's concatenated time axis
  double end_s = 0.0;
  MarkKind kind = MarkKind::detected;
};

// Classifies every event with the event-scoring overlap rule. Recordings of
// one patient are laid end to end in input order.
inline std::vector<TimelineMark> timeline_marks(const std::vector<TimelineRecording>& recs,
                                                const EventTolerance& tol = {}) {
  std::vector<TimelineMark> marks;
  std::map<std::string, double> offset;
  auto overlaps = [&](const AnnotationEvent& h, const AnnotationEvent& r) {
    return h.onset_s < r.end_s() + tol.post_s && h.end_s() > r.onset_s - tol.pre_s;
  };
  for (const auto& r : recs) {
    const double off = offset[r.patient_id];
    for (const auto& ref : r.reference) {
      const bool hit = std::any_of(r.hypothesis.begin(), r.hypothesis.end(), [&](const auto& h) { return overlaps(h, ref); });
      marks.push_back({r.patient_id, off + ref.onset_s, off + ref.end_s(), hit ? MarkKind::detected : MarkKind::missed});
    }
    for (const auto& h : r.hypothesis) {
      const bool hit = std::any_of(r.reference.begin(), r.reference.end(), [&](const auto& ref) { return overlaps(h, ref); });
      marks.push_back({r.patient_id, off + h.onset_s, off + h.end_s(),
                       hit ? MarkKind::true_hypothesis : MarkKind::false_positive});
    }
    offset[r.patient_id] = off + r.duration_s;
  }
  return marks;
}

inline std::string render_timeline_svg(const std::vector<TimelineRecording>& recs, const EventTolerance& tol = {}) {
  std::vector<std::string> patients;
  std::map<std::string, double> total;
  for (const auto& r : recs) {
    if (!total.count(r.patient_id)) patients.push_back(r.patient_id);
    total[r.patient_id] += r.duration_s;
  }
  double span = 1.0;
  for (const auto& [p, t] : total) span = std::max(span, t);
  const double left = 90.0, width = 900.0, lane_h = 36.0, top = 30.0;
  const double height = top + lane_h * static_cast<double>(patients.size()) + 40.0;
  auto x_of = [&](double t) { return left + width * t / span; };
  std::map<std::string, size_t> lane;
  for (size_t i = 0; i < patients.size(); ++i) lane[patients[i]] = i;

  std::ostringstream os;
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"%.0f\" height=\"%.0f\">\n",
                left + width + 20.0, height);
  os << buf;
  os << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (size_t i = 0; i < patients.size(); ++i) {
    const double y = top + lane_h * static_cast<double>(i);
    std::snprintf(buf, sizeof buf,
                  "<text x=\"8\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\">%s</text>\n"
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n",
                  y + lane_h / 2.0 + 4.0, patients[i].c_str(), left, y + lane_h / 2.0, x_of(total[patients[i]]),
                  y + lane_h / 2.0);
    os << buf;
  }
  for (const auto& m : timeline_marks(recs, tol)) {
    const double y0 = top + lane_h * static_cast<double>(lane[m.patient_id]);
    // reference marks in the upper half of the lane, predictions in the lower
    const bool ref = m.kind == MarkKind::detected || m.kind == MarkKind::missed;
    const double y = ref ? y0 + 4.0 : y0 + lane_h / 2.0 + 1.0;
    const double w = std::max(1.5, x_of(m.end_s) - x_of(m.start_s));
    std::snprintf(buf, sizeof buf, "<rect x=\"%.2f\" y=\"%.1f\" width=\"%.2f\" height=\"%.1f\" fill=\"%s\"/>\n",
                  x_of(m.start_s), y, w, lane_h / 2.0 - 5.0, mark_color(m.kind));
    os << buf;
  }
  const double ly = height - 14.0;
  double lx = left;
  for (auto [kind, name] : {std::pair{MarkKind::detected, "detected"}, std::pair{MarkKind::missed, "missed"},
                            std::pair{MarkKind::false_positive, "false prediction"}}) {
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"12\" height=\"10\" fill=\"%s\"/>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\">%s</text>\n",
                  lx, ly - 9.0, mark_color(kind), lx + 16.0, ly, name);
    os << buf;
    lx += 140.0;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\">%.1f h</text>\n",
                left + width - 40.0, ly, span / 3600.0);
  os << buf;
  os << "</svg>\n";
  return os.str();
}

// Pairs hypothesis and reference sets by recording id; the two sets must
// name the same recordings.
inline void check_same_recordings(const std::vector<std::string>& hyp_ids, const std::vector<std::string>& ref_ids) {
  auto a = hyp_ids, b = ref_ids;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b) fail(ErrorCode::MismatchedRecordings, "hypothesis and reference cover different recordings");
}

}  // namespace lookaround
