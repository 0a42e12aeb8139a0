#pragma once

// Corpus manifest: a JSON file listing recordings, their annotation TSVs,
// patient ids and split membership. Relative paths resolve against the
// manifest's directory.
//
// {"recordings": [{"id": "p01_r0", "patient_id": "p01", "path": "p01_r0.json",
//                  "annotations": "p01_r0.tsv", "split": "train", "long_form": false}]}

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lookaround/annotations.hpp"
#include "lookaround/error.hpp"
#include "lookaround/preprocess.hpp"

namespace lookaround {

struct ManifestEntry {
  std::string id;
  std::string patient_id;
  std::filesystem::path path;
  std::filesystem::path annotations;  // empty: no seizures annotated
  std::string split = "train";        // train | validation | test
  bool long_form = false;             // hour-chunk curation during training
};

struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> recordings;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : root / p; }

  std::vector<ManifestEntry> split(const std::string& name) const {
    std::vector<ManifestEntry> out;
    for (const auto& r : recordings) {
      if (r.split == name) out.push_back(r);
    }
    return out;
  }
};

inline void to_json(nlohmann::json& j, const ManifestEntry& e) {
  j = {{"id", e.id},
       {"patient_id", e.patient_id},
       {"path", e.path.generic_string()},
       {"annotations", e.annotations.generic_string()},
       {"split", e.split},
       {"long_form", e.long_form}};
}

inline void from_json(const nlohmann::json& j, ManifestEntry& e) {
  e.id = j.at("id").get<std::string>();
  e.patient_id = j.value("patient_id", e.id);
  e.path = j.at("path").get<std::string>();
  e.annotations = j.value("annotations", std::string());
  e.split = j.value("split", std::string("train"));
  e.long_form = j.value("long_form", false);
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open manifest " + path.string());
  Manifest m;
  m.root = path.parent_path();
  try {
    const auto j = nlohmann::json::parse(in);
    m.recordings = j.at("recordings").get<std::vector<ManifestEntry>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Io, "manifest " + path.string() + ": " + e.what());
  }
  return m;
}

inline void save_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << nlohmann::json{{"recordings", m.recordings}}.dump(2) << '\n';
}

// Duration without loading samples where the format allows it.
inline double recording_duration(const std::filesystem::path& path) {
  if (detail::upper(path.extension().string()) == ".EDF") return read_edf(path).duration_s();
  const auto h = read_raw_header(path);
  return static_cast<double>(h.at("n_samples").get<long>()) / h.at("fs").get<double>();
}

struct LoadedRecording {
  ManifestEntry entry;
  MontagedRecording recording;
  AnnotationSet annotations;
};

// Preprocesses (through the cache when cache_dir is set) and loads labels.
inline LoadedRecording load_entry(const Manifest& m, const ManifestEntry& e, const PreprocessConfig& pcfg,
                                  const std::filesystem::path& cache_dir = {}) {
  LoadedRecording out;
  out.entry = e;
  if (cache_dir.empty()) {
    Recording rec = read_recording(m.resolve(e.path));
    rec.id = e.id;
    rec.patient_id = e.patient_id;
    out.recording = preprocess_pipeline(rec, pcfg);
  } else {
    out.recording = preprocess_cached(m.resolve(e.path), pcfg, cache_dir, e.id, e.patient_id).recording;
  }
  out.recording.id = e.id;
  out.recording.patient_id = e.patient_id;
  if (e.annotations.empty()) {
    out.annotations.recording_id = e.id;
  } else {
    out.annotations = read_annotations(m.resolve(e.annotations), out.recording.duration_s(), e.id);
  }
  return out;
}

inline std::vector<LoadedRecording> load_split(const Manifest& m, const std::string& split,
                                               const PreprocessConfig& pcfg,
                                               const std::filesystem::path& cache_dir = {}) {
  std::vector<LoadedRecording> out;
  for (const auto& e : m.split(split)) out.push_back(load_entry(m, e, pcfg, cache_dir));
  return out;
}

}  // namespace lookaround
