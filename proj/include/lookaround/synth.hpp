#pragma once

// Synthetic referential EEG corpus: pink-noise background, 3 Hz
// amplitude-modulated seizure bursts with a spatial focus, optional
// pre-ictal cue and post-ictal suppression, decoy bursts that carry no
// label, blink artifacts and line noise. Everything derives from the seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lookaround/annotations.hpp"
#include "lookaround/error.hpp"
#include "lookaround/manifest.hpp"
#include "lookaround/montage.hpp"
#include "lookaround/raw_format.hpp"
#include "lookaround/recording.hpp"

namespace lookaround {

struct SyntheticSpec {
  int n_patients = 8;
  int recordings_per_patient = 1;
  int n_validation_patients = 1;
  int n_test_patients = 2;
  double duration_s = 1800.0;
  double fs = 256.0;
  double seizure_rate_per_hour = 6.0;
  double seizure_min_s = 20.0;
  double seizure_max_s = 60.0;
  double background_uv = 20.0;  // rms of the pink-noise background
  double burst_uv = 100.0;
  double burst_hz = 3.0;
  double burst_am_hz = 0.5;
  double burst_am_depth = 0.5;
  double cue_uv = 0.0;  // 0 disables the pre-ictal cue
  double cue_s = 30.0;
  double cue_hz = 6.0;
  double postictal_s = 0.0;  // 0 disables post-ictal suppression
  double postictal_gain = 0.3;
  double decoy_rate_per_hour = 0.0;
  double artifact_rate_per_hour = 30.0;
  double artifact_uv = 150.0;
  double line_noise_uv = 5.0;
  double line_hz = 50.0;
  uint64_t seed = 1;

  void validate() const {
    auto bad = [](const std::string& why) { fail(ErrorCode::InvalidConfig, "synthetic spec: " + why); };
    if (n_patients < 1 || recordings_per_patient < 1) bad("need at least one patient and recording");
    if (n_validation_patients < 0 || n_test_patients < 0 || n_validation_patients + n_test_patients >= n_patients) {
      bad("splits leave no training patients");
    }
    if (!(duration_s > 0.0) || !(fs > 0.0)) bad("duration and fs must be positive");
    if (seizure_rate_per_hour < 0.0 || decoy_rate_per_hour < 0.0 || artifact_rate_per_hour < 0.0) {
      bad("rates must be >= 0");
    }
    if (!(seizure_min_s > 0.0 && seizure_max_s >= seizure_min_s)) bad("bad seizure duration range");
    if (burst_am_depth < 0.0 || burst_am_depth > 1.0) bad("AM depth must be in [0, 1]");
  }

  // Task where telling seizures from decoys needs context: only true
  // seizures are preceded by a cue and followed by suppression.
  static SyntheticSpec context_task() {
    SyntheticSpec s;
    s.cue_uv = 25.0;
    s.postictal_s = 60.0;
    s.decoy_rate_per_hour = 6.0;
    return s;
  }
};

inline void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = {{"n_patients", s.n_patients},
       {"recordings_per_patient", s.recordings_per_patient},
       {"n_validation_patients", s.n_validation_patients},
       {"n_test_patients", s.n_test_patients},
       {"duration_s", s.duration_s},
       {"fs", s.fs},
       {"seizure_rate_per_hour", s.seizure_rate_per_hour},
       {"seizure_min_s", s.seizure_min_s},
       {"seizure_max_s", s.seizure_max_s},
       {"background_uv", s.background_uv},
       {"burst_uv", s.burst_uv},
       {"burst_hz", s.burst_hz},
       {"burst_am_hz", s.burst_am_hz},
       {"burst_am_depth", s.burst_am_depth},
       {"cue_uv", s.cue_uv},
       {"cue_s", s.cue_s},
       {"cue_hz", s.cue_hz},
       {"postictal_s", s.postictal_s},
       {"postictal_gain", s.postictal_gain},
       {"decoy_rate_per_hour", s.decoy_rate_per_hour},
       {"artifact_rate_per_hour", s.artifact_rate_per_hour},
       {"artifact_uv", s.artifact_uv},
       {"line_noise_uv", s.line_noise_uv},
       {"line_hz", s.line_hz},
       {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  const SyntheticSpec d = j.value("preset", std::string()) == "context" ? SyntheticSpec::context_task() : SyntheticSpec{};
  s = d;
  s.n_patients = j.value("n_patients", d.n_patients);
  s.recordings_per_patient = j.value("recordings_per_patient", d.recordings_per_patient);
  s.n_validation_patients = j.value("n_validation_patients", d.n_validation_patients);
  s.n_test_patients = j.value("n_test_patients", d.n_test_patients);
  s.duration_s = j.value("duration_s", d.duration_s);
  s.fs = j.value("fs", d.fs);
  s.seizure_rate_per_hour = j.value("seizure_rate_per_hour", d.seizure_rate_per_hour);
  s.seizure_min_s = j.value("seizure_min_s", d.seizure_min_s);
  s.seizure_max_s = j.value("seizure_max_s", d.seizure_max_s);
  s.background_uv = j.value("background_uv", d.background_uv);
  s.burst_uv = j.value("burst_uv", d.burst_uv);
  s.burst_hz = j.value("burst_hz", d.burst_hz);
  s.burst_am_hz = j.value("burst_am_hz", d.burst_am_hz);
  s.burst_am_depth = j.value("burst_am_depth", d.burst_am_depth);
  s.cue_uv = j.value("cue_uv", d.cue_uv);
  s.cue_s = j.value("cue_s", d.cue_s);
  s.cue_hz = j.value("cue_hz", d.cue_hz);
  s.postictal_s = j.value("postictal_s", d.postictal_s);
  s.postictal_gain = j.value("postictal_gain", d.postictal_gain);
  s.decoy_rate_per_hour = j.value("decoy_rate_per_hour", d.decoy_rate_per_hour);
  s.artifact_rate_per_hour = j.value("artifact_rate_per_hour", d.artifact_rate_per_hour);
  s.artifact_uv = j.value("artifact_uv", d.artifact_uv);
  s.line_noise_uv = j.value("line_noise_uv", d.line_noise_uv);
  s.line_hz = j.value("line_hz", d.line_hz);
  s.seed = j.value("seed", d.seed);
}

struct SyntheticRecording {
  Recording recording;
  AnnotationSet annotations;
  std::vector<AnnotationEvent> decoys;
  std::string split;
};

namespace synth_detail {

inline uint64_t seed_for(uint64_t seed, int patient, int index) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(patient),
                    static_cast<uint32_t>(index), 0x51u};
  uint64_t out[1];
  uint32_t words[2];
  seq.generate(words, words + 2);
  out[0] = (static_cast<uint64_t>(words[0]) << 32) | words[1];
  return out[0];
}

// Paul Kellet's refined pink-noise filter applied to white Gaussian noise,
// then scaled to the requested rms.
inline void pink_noise(double* out, long n, double rms, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < n; ++i) {
    const double w = nd(rng);
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    out[i] = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
    sum += out[i];
    sumsq += out[i] * out[i];
  }
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(std::max(sumsq / static_cast<double>(n) - mean * mean, 1e-300));
  for (long i = 0; i < n; ++i) out[i] = (out[i] - mean) * rms / sd;
}

// 0 outside [a, b], 1 inside with raised-cosine ramps of length `ramp`.
inline double envelope(double t, double a, double b, double ramp) {
  if (t < a || t >= b) return 0.0;
  const double r = std::min(ramp, (b - a) / 2.0);
  if (t < a + r) return 0.5 - 0.5 * std::cos(M_PI * (t - a) / r);
  if (t > b - r) return 0.5 - 0.5 * std::cos(M_PI * (b - t) / r);
  return 1.0;
}

struct Burst {
  double onset = 0.0;
  double duration = 0.0;
  double freq = 3.0;
  size_t focus = 0;
  bool seizure = true;
};

}  // namespace synth_detail

inline std::string synthetic_id(int patient, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%02d_r%d", patient + 1, index);
  return buf;
}

inline std::string synthetic_split(const SyntheticSpec& spec, int patient) {
  const int n_train = spec.n_patients - spec.n_validation_patients - spec.n_test_patients;
  if (patient < n_train) return "train";
  if (patient < n_train + spec.n_validation_patients) return "validation";
  return "test";
}

inline SyntheticRecording synthesize_recording(const SyntheticSpec& spec, int patient, int index) {
  using namespace synth_detail;
  spec.validate();
  std::mt19937_64 rng(seed_for(spec.seed, patient, index));
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double fs = spec.fs;
  const long n = std::lround(spec.duration_s * fs);
  const size_t E = kElectrodePositions.size();

  SyntheticRecording out;
  out.split = synthetic_split(spec, patient);
  Recording& rec = out.recording;
  rec.id = synthetic_id(patient, index);
  rec.patient_id = synthetic_id(patient, 0).substr(0, 3);
  rec.fs = fs;
  for (const auto& e : kElectrodePositions) rec.channel_labels.emplace_back(e.label);
  rec.samples.resize(static_cast<Eigen::Index>(E), n);

  // Event placement: one event per equal slot, with room for the cue before
  // and suppression after, so that no two events interact.
  const double hours = spec.duration_s / 3600.0;
  const long n_seiz = std::lround(spec.seizure_rate_per_hour * hours);
  const long n_decoy = std::lround(spec.decoy_rate_per_hour * hours);
  const long n_events = n_seiz + n_decoy;
  std::vector<Burst> bursts;
  if (n_events > 0) {
    std::vector<char> is_seizure(static_cast<size_t>(n_events), 0);
    std::fill(is_seizure.begin(), is_seizure.begin() + n_seiz, 1);
    std::shuffle(is_seizure.begin(), is_seizure.end(), rng);
    const double slot = spec.duration_s / static_cast<double>(n_events);
    const double pre = std::max(spec.cue_s, 5.0) + 5.0;
    const double post = std::max(spec.postictal_s, 5.0) + 5.0;
    for (long k = 0; k < n_events; ++k) {
      Burst b;
      b.seizure = is_seizure[static_cast<size_t>(k)] != 0;
      b.duration = std::round(spec.seizure_min_s + U(rng) * (spec.seizure_max_s - spec.seizure_min_s));
      const double lo = std::ceil(static_cast<double>(k) * slot + pre);
      const double hi = std::floor(static_cast<double>(k + 1) * slot - post - b.duration);
      if (hi < lo) fail(ErrorCode::InvalidConfig, "synthetic spec: too many events for the recording length");
      b.onset = lo + std::floor(U(rng) * (hi - lo + 1.0));
      b.onset = std::min(b.onset, hi);
      b.freq = spec.burst_hz * (0.9 + 0.2 * U(rng));
      b.focus = static_cast<size_t>(U(rng) * static_cast<double>(E)) % E;
      bursts.push_back(b);
    }
  }

  // Background with post-ictal suppression.
  std::vector<double> gain(static_cast<size_t>(n), 1.0);
  if (spec.postictal_s > 0.0) {
    for (const auto& b : bursts) {
      if (!b.seizure) continue;
      const double a = b.onset + b.duration, z = a + spec.postictal_s;
      for (long i = std::max(0L, std::lround(a * fs)); i < std::min(n, std::lround(z * fs)); ++i) {
        const double t = static_cast<double>(i) / fs;
        gain[static_cast<size_t>(i)] = 1.0 - (1.0 - spec.postictal_gain) * envelope(t, a, z, 5.0);
      }
    }
  }
  for (size_t e = 0; e < E; ++e) {
    double* row = rec.samples.row(static_cast<Eigen::Index>(e)).data();
    pink_noise(row, n, spec.background_uv, rng);
    for (long i = 0; i < n; ++i) row[i] *= gain[static_cast<size_t>(i)];
  }

  // Seizure and decoy bursts: gain falls off and phase lags with distance
  // from the focus, so bipolar derivations see them.
  std::array<std::array<double, 3>, 19> xyz;
  for (size_t e = 0; e < E; ++e) xyz[e] = unit_sphere_xyz(kElectrodePositions[e]);
  auto dist = [&](size_t a, size_t b) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += (xyz[a][k] - xyz[b][k]) * (xyz[a][k] - xyz[b][k]);
    return std::sqrt(s);
  };
  for (const auto& b : bursts) {
    const double am_phase = 2.0 * M_PI * U(rng);
    for (size_t e = 0; e < E; ++e) {
      const double d = dist(e, b.focus);
      const double g = 0.3 + 0.7 * std::exp(-d * d / 0.6);
      const double lag = 2.0 * M_PI * 0.9 * d;
      double* row = rec.samples.row(static_cast<Eigen::Index>(e)).data();
      const long i0 = std::max(0L, std::lround(b.onset * fs));
      const long i1 = std::min(n, std::lround((b.onset + b.duration) * fs));
      for (long i = i0; i < i1; ++i) {
        const double t = static_cast<double>(i) / fs;
        const double am = 1.0 - spec.burst_am_depth * 0.5 * (1.0 + std::sin(2.0 * M_PI * spec.burst_am_hz * t + am_phase));
        row[i] += spec.burst_uv * g * am * envelope(t, b.onset, b.onset + b.duration, 2.0) *
                  std::sin(2.0 * M_PI * b.freq * (t - b.onset) - lag);
      }
      if (b.seizure && spec.cue_uv > 0.0) {
        const double a = b.onset - spec.cue_s;
        for (long i = std::max(0L, std::lround(a * fs)); i < i0; ++i) {
          const double t = static_cast<double>(i) / fs;
          row[i] += spec.cue_uv * g * envelope(t, a, b.onset, 3.0) * std::sin(2.0 * M_PI * spec.cue_hz * t - lag);
        }
      }
    }
    if (b.seizure) {
      out.annotations.events.push_back({b.onset, b.duration, EventLabel::seizure});
    } else {
      out.decoys.push_back({b.onset, b.duration, EventLabel::background});
    }
  }
  out.annotations.recording_id = rec.id;

  // Blink artifacts on the frontal electrodes.
  std::poisson_distribution<long> n_art(spec.artifact_rate_per_hour * hours);
  const long n_blinks = spec.artifact_rate_per_hour > 0.0 ? n_art(rng) : 0;
  for (long k = 0; k < n_blinks; ++k) {
    const double t0 = U(rng) * std::max(0.0, spec.duration_s - 1.0);
    const double amp = spec.artifact_uv * (0.6 + 0.8 * U(rng));
    for (size_t e = 0; e < E; ++e) {
      const auto label = kElectrodePositions[e].label;
      const double w = label.starts_with("Fp") ? 1.0 : (label.starts_with("F") ? 0.35 : 0.0);
      if (w == 0.0) continue;
      double* row = rec.samples.row(static_cast<Eigen::Index>(e)).data();
      for (long i = std::lround(t0 * fs); i < std::min(n, std::lround((t0 + 0.4) * fs)); ++i) {
        const double t = static_cast<double>(i) / fs;
        row[i] += w * amp * 0.5 * (1.0 - std::cos(2.0 * M_PI * (t - t0) / 0.4));
      }
    }
  }

  // Line noise, mostly common mode.
  if (spec.line_noise_uv > 0.0) {
    for (size_t e = 0; e < E; ++e) {
      const double a = spec.line_noise_uv * (0.8 + 0.4 * U(rng));
      double* row = rec.samples.row(static_cast<Eigen::Index>(e)).data();
      for (long i = 0; i < n; ++i) row[i] += a * std::sin(2.0 * M_PI * spec.line_hz * static_cast<double>(i) / fs);
    }
  }
  return out;
}

// Writes <id>.json/.bin, <id>.tsv for every recording and manifest.json.
inline Manifest write_synthetic_corpus(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir);
  Manifest m;
  m.root = out_dir;
  for (int p = 0; p < spec.n_patients; ++p) {
    for (int r = 0; r < spec.recordings_per_patient; ++r) {
      const auto s = synthesize_recording(spec, p, r);
      nlohmann::json decoys = nlohmann::json::array();
      for (const auto& d : s.decoys) decoys.push_back({{"onset", d.onset_s}, {"duration", d.duration_s}});
      write_raw(out_dir / (s.recording.id + ".json"), s.recording, {{"decoys", decoys}});
      write_events_tsv(out_dir / (s.recording.id + ".tsv"), s.annotations.events);
      ManifestEntry e;
      e.id = s.recording.id;
      e.patient_id = s.recording.patient_id;
      e.path = s.recording.id + ".json";
      e.annotations = s.recording.id + ".tsv";
      e.split = s.split;
      m.recordings.push_back(e);
    }
  }
  save_manifest(out_dir / "manifest.json", m);
  nlohmann::json spec_json = spec;
  std::ofstream(out_dir / "synthetic_spec.json") << spec_json.dump(2) << '\n';
  return m;
}

}  // namespace lookaround
