#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lookaround/error.hpp"
#include "lookaround/recording.hpp"

namespace lookaround {

struct Derivation {
  std::string anode;
  std::string cathode;

  std::string name() const { return anode + "-" + cathode; }
};

struct ElectrodePosition {
  std::string_view label;
  double polar_deg;    // signed angle from the vertex; negative on the left
  double azimuth_deg;
};

// Idealised spherical 10-20 positions (BESA convention). The neighbour table
// below is derived from these by tools/derive_neighbors.py.
inline constexpr std::array<ElectrodePosition, 19> kElectrodePositions = {{
    {"Fp1", -92, -72}, {"Fp2", 92, 72}, {"F7", -92, -36}, {"F3", -60, -51}, {"Fz", 46, 90},
    {"F4", 60, 51},    {"F8", 92, 36},  {"T3", -92, 0},   {"C3", -46, 0},   {"Cz", 0, 0},
    {"C4", 46, 0},     {"T4", 92, 0},   {"T5", -92, 36},  {"P3", -60, 51},  {"Pz", 46, -90},
    {"P4", 60, -51},   {"T6", 92, -36}, {"O1", -92, 72},  {"O2", 92, -72},
}};

inline std::array<double, 3> unit_sphere_xyz(const ElectrodePosition& p) {
  const double t = p.polar_deg * M_PI / 180.0;
  const double a = p.azimuth_deg * M_PI / 180.0;
  return {std::sin(t) * std::cos(a), std::sin(t) * std::sin(a), std::cos(t)};
}

struct NeighborPair {
  std::string nearest;
  std::string second;
};

struct MontageSpec {
  std::vector<Derivation> derivations;
  std::map<std::string, NeighborPair> nearest_neighbors;

  std::vector<std::string> derivation_names() const {
    std::vector<std::string> names;
    for (const auto& d : derivations) names.push_back(d.name());
    return names;
  }

  // Electrodes referenced by any derivation, in first-use order.
  std::vector<std::string> electrodes() const {
    std::vector<std::string> out;
    auto add = [&](const std::string& e) {
      if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
    };
    for (const auto& d : derivations) {
      add(d.anode);
      add(d.cathode);
    }
    return out;
  }
};

// Longitudinal bipolar ("double banana") montage, 18 derivations.
inline MontageSpec longitudinal_bipolar() {
  MontageSpec spec;
  spec.derivations = {
      {"Fp2", "F4"}, {"F4", "C4"}, {"C4", "P4"}, {"P4", "O2"}, {"Fp1", "F3"}, {"F3", "C3"},
      {"C3", "P3"},  {"P3", "O1"}, {"Fp2", "F8"}, {"F8", "T4"}, {"T4", "T6"}, {"T6", "O2"},
      {"Fp1", "F7"}, {"F7", "T3"}, {"T3", "T5"}, {"T5", "O1"}, {"Fz", "Cz"}, {"Cz", "Pz"},
  };
  // Output of tools/derive_neighbors.py; frozen so imputation is deterministic.
  spec.nearest_neighbors = {
      {"Fp1", {"Fp2", "F7"}}, {"Fp2", {"Fp1", "F8"}}, {"F7", {"F3", "Fp1"}}, {"F3", {"Fz", "F7"}},
      {"Fz", {"F3", "F4"}},   {"F4", {"Fz", "F8"}},   {"F8", {"F4", "Fp2"}}, {"T3", {"F7", "T5"}},
      {"C3", {"F3", "P3"}},   {"Cz", {"Fz", "C3"}},   {"C4", {"F4", "P4"}},  {"T4", {"F8", "T6"}},
      {"T5", {"P3", "T3"}},   {"P3", {"Pz", "T5"}},   {"Pz", {"P3", "P4"}},  {"P4", {"Pz", "T6"}},
      {"T6", {"P4", "T4"}},   {"O1", {"T5", "O2"}},   {"O2", {"T6", "O1"}},
  };
  return spec;
}

// Fills each montage electrode missing from `rec` with the mean of its two
// nearest neighbours. Imputed rows are appended; existing rows are untouched.
inline Recording impute_missing(const Recording& rec, const MontageSpec& spec) {
  std::vector<std::string> missing;
  for (const auto& e : spec.electrodes()) {
    if (!rec.channel_index(e)) missing.push_back(e);
  }
  if (missing.empty()) return rec;

  Recording out = rec;
  out.samples.conservativeResize(rec.n_channels() + static_cast<Eigen::Index>(missing.size()), Eigen::NoChange);
  Eigen::Index row = rec.n_channels();
  for (const auto& e : missing) {
    auto it = spec.nearest_neighbors.find(e);
    if (it == spec.nearest_neighbors.end()) fail(ErrorCode::Unrecoverable, "no neighbour entry for " + e);
    auto a = rec.channel_index(it->second.nearest);
    auto b = rec.channel_index(it->second.second);
    if (!a || !b) {
      fail(ErrorCode::Unrecoverable, e + " is missing and so is neighbour " + (!a ? it->second.nearest : it->second.second));
    }
    out.samples.row(row) = 0.5 * (rec.samples.row(*a) + rec.samples.row(*b));
    out.channel_labels.push_back(e);
    ++row;
  }
  return out;
}

inline Recording to_bipolar(const Recording& rec, const MontageSpec& spec) {
  Recording out;
  out.id = rec.id;
  out.patient_id = rec.patient_id;
  out.fs = rec.fs;
  out.samples.resize(static_cast<Eigen::Index>(spec.derivations.size()), rec.n_samples());
  for (size_t i = 0; i < spec.derivations.size(); ++i) {
    const auto& d = spec.derivations[i];
    auto a = rec.channel_index(d.anode);
    auto c = rec.channel_index(d.cathode);
    if (!a) fail(ErrorCode::MissingElectrode, d.anode);
    if (!c) fail(ErrorCode::MissingElectrode, d.cathode);
    out.samples.row(static_cast<Eigen::Index>(i)) = rec.samples.row(*a) - rec.samples.row(*c);
    out.channel_labels.push_back(d.name());
  }
  return out;
}

}  // namespace lookaround
