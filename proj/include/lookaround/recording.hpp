#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "lookaround/error.hpp"

namespace lookaround {

// Channels are rows; each row is one contiguous signal.
using SignalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Canonical 10-20 labels, old temporal nomenclature (T3/T4/T5/T6).
inline constexpr std::array<std::string_view, 23> kTenTwentyLabels = {
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz", "C4", "T4",
    "T5",  "P3",  "Pz", "P4", "T6", "O1", "O2", "A1", "A2", "Fpz", "Oz"};

namespace detail {

inline std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

inline std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

// Maps vendor variants ("EEG FP1-REF", "eeg t7-le", "P8") onto the canonical
// vocabulary. Returns nullopt for labels that are not scalp 10-20 electrodes.
inline std::optional<std::string> normalize_electrode_label(std::string_view raw) {
  std::string s = detail::upper(detail::trim(raw));
  if (s.rfind("EEG", 0) == 0) s = detail::trim(std::string_view(s).substr(3));
  for (std::string_view suffix : {"-REF", "-LE", "-AR", "-AVG", "-A1", "-A2", "-M1", "-M2", "-CZ"}) {
    if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
      s.resize(s.size() - suffix.size());
      break;
    }
  }
  s = detail::trim(s);
  // modern (10-10) names for the temporal chain
  if (s == "T7") s = "T3";
  else if (s == "T8") s = "T4";
  else if (s == "P7") s = "T5";
  else if (s == "P8") s = "T6";
  for (auto label : kTenTwentyLabels) {
    if (detail::upper(label) == s) return std::string(label);
  }
  return std::nullopt;
}

struct Recording {
  std::string id;
  std::string patient_id;
  std::vector<std::string> channel_labels;
  double fs = 0.0;
  SignalMatrix samples;  // [n_channels x n_samples], microvolts

  Eigen::Index n_channels() const { return samples.rows(); }
  Eigen::Index n_samples() const { return samples.cols(); }
  double duration_s() const { return fs > 0 ? static_cast<double>(samples.cols()) / fs : 0.0; }

  std::optional<Eigen::Index> channel_index(std::string_view label) const {
    for (size_t i = 0; i < channel_labels.size(); ++i) {
      if (channel_labels[i] == label) return static_cast<Eigen::Index>(i);
    }
    return std::nullopt;
  }
};

// Checks the structural invariants every reader must establish.
inline void validate_recording(const Recording& rec, ErrorCode code = ErrorCode::MalformedHeader) {
  if (!(rec.fs > 0.0) || !std::isfinite(rec.fs)) fail(code, "sampling rate must be positive");
  if (static_cast<Eigen::Index>(rec.channel_labels.size()) != rec.samples.rows()) {
    fail(code, "channel label count does not match sample rows");
  }
  std::unordered_set<std::string> seen;
  for (const auto& label : rec.channel_labels) {
    if (!seen.insert(label).second) fail(code, "duplicate channel label " + label);
  }
  if (!rec.samples.allFinite()) fail(code, "samples contain NaN or Inf");
}

enum class EventLabel { seizure, background };

struct AnnotationEvent {
  double onset_s = 0.0;
  double duration_s = 0.0;
  EventLabel label = EventLabel::seizure;

  double end_s() const { return onset_s + duration_s; }
  friend bool operator==(const AnnotationEvent&, const AnnotationEvent&) = default;
};

struct AnnotationSet {
  std::string recording_id;
  std::vector<AnnotationEvent> events;  // seizure only, sorted, non-overlapping

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

// Keeps seizure rows, sorts them, and merges overlapping or touching intervals.
inline std::vector<AnnotationEvent> merge_seizures(std::vector<AnnotationEvent> rows) {
  std::erase_if(rows, [](const AnnotationEvent& e) { return e.label != EventLabel::seizure; });
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.onset_s != b.onset_s ? a.onset_s < b.onset_s : a.end_s() < b.end_s();
  });
  std::vector<AnnotationEvent> merged;
  for (const auto& e : rows) {
    if (!merged.empty() && e.onset_s <= merged.back().end_s()) {
      double end = std::max(merged.back().end_s(), e.end_s());
      merged.back().duration_s = end - merged.back().onset_s;
    } else {
      merged.push_back({e.onset_s, e.duration_s, EventLabel::seizure});
    }
  }
  return merged;
}

}  // namespace lookaround
