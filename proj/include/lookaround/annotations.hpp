#pragma once

// Seizure annotation TSV: header "onset\tduration\teventType", decimal
// seconds. Event types starting with "sz" or equal to "seizure" are
// seizures; "bckg"/"background" rows are discarded.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lookaround/error.hpp"
#include "lookaround/recording.hpp"

namespace lookaround {

inline std::string format_decimal(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace annotation_detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, '\t')) out.push_back(detail::trim(cur));
  return out;
}

inline double parse_seconds(const std::string& text, size_t line_no) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    fail(ErrorCode::MalformedHeader, "line " + std::to_string(line_no) + ": bad number '" + text + "'");
  }
  return v;
}

inline EventLabel parse_event_type(const std::string& text, size_t line_no) {
  std::string t = detail::upper(text);
  if (t.rfind("SZ", 0) == 0 || t == "SEIZURE") return EventLabel::seizure;
  if (t == "BCKG" || t == "BACKGROUND" || t == "BG") return EventLabel::background;
  fail(ErrorCode::MalformedHeader, "line " + std::to_string(line_no) + ": unknown eventType '" + text + "'");
}

}  // namespace annotation_detail

// Parses TSV text and validates every row against the recording duration.
// With merge = false, seizure rows are only sorted; touching intervals stay
// separate (hypotheses split at the maximum event length rely on this).
inline AnnotationSet parse_annotations(std::istream& in, double recording_duration_s, std::string recording_id,
                                       bool merge = true) {
  using namespace annotation_detail;
  std::string line;
  size_t line_no = 0;
  int col_onset = -1, col_duration = -1, col_type = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto cols = split_tabs(line);
    for (size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] == "onset") col_onset = static_cast<int>(i);
      else if (cols[i] == "duration") col_duration = static_cast<int>(i);
      else if (cols[i] == "eventType") col_type = static_cast<int>(i);
    }
    break;
  }
  if (col_onset < 0 || col_duration < 0 || col_type < 0) {
    fail(ErrorCode::MalformedHeader, "annotation header must contain onset, duration and eventType");
  }
  const auto needed = static_cast<size_t>(std::max({col_onset, col_duration, col_type}));
  std::vector<AnnotationEvent> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() <= needed) fail(ErrorCode::MalformedHeader, "line " + std::to_string(line_no) + ": missing columns");
    AnnotationEvent e;
    e.onset_s = parse_seconds(cols[static_cast<size_t>(col_onset)], line_no);
    e.duration_s = parse_seconds(cols[static_cast<size_t>(col_duration)], line_no);
    e.label = parse_event_type(cols[static_cast<size_t>(col_type)], line_no);
    if (!(e.duration_s > 0.0)) {
      fail(ErrorCode::NegativeDuration, "line " + std::to_string(line_no) + ": duration must be positive");
    }
    if (e.onset_s < 0.0 || e.end_s() > recording_duration_s + 1e-9) {
      fail(ErrorCode::OutOfBounds, "line " + std::to_string(line_no) + ": event [" + format_decimal(e.onset_s) + ", " +
                                       format_decimal(e.end_s()) + ") outside recording of " +
                                       format_decimal(recording_duration_s) + " s");
    }
    rows.push_back(e);
  }
  if (!merge) {
    std::erase_if(rows, [](const AnnotationEvent& e) { return e.label != EventLabel::seizure; });
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.onset_s < b.onset_s; });
    return AnnotationSet{std::move(recording_id), std::move(rows)};
  }
  return AnnotationSet{std::move(recording_id), merge_seizures(std::move(rows))};
}

inline AnnotationSet read_annotations(const std::filesystem::path& path, double recording_duration_s,
                                      std::string recording_id, bool merge = true) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return parse_annotations(in, recording_duration_s, std::move(recording_id), merge);
}

inline AnnotationSet read_annotations(const std::filesystem::path& path, const Recording& rec) {
  return read_annotations(path, rec.duration_s(), rec.id);
}

inline void write_events_tsv(std::ostream& out, const std::vector<AnnotationEvent>& events) {
  out << "onset\tduration\teventType\n";
  for (const auto& e : events) {
    out << format_decimal(e.onset_s) << '\t' << format_decimal(e.duration_s) << '\t'
        << (e.label == EventLabel::seizure ? "sz" : "bckg") << '\n';
  }
}

inline void write_events_tsv(const std::filesystem::path& path, const std::vector<AnnotationEvent>& events) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  write_events_tsv(out, events);
}

}  // namespace lookaround
