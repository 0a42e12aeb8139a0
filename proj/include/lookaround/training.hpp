#pragma once

// Epoch loop: balanced segment sampling, label-smoothed cross-entropy,
// AdamW updates, per-epoch validation with best-F1 checkpoint selection,
// and resumable training state.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lookaround/error.hpp"
#include "lookaround/inference.hpp"
#include "lookaround/manifest.hpp"
#include "lookaround/model/checkpoint.hpp"
#include "lookaround/model/network.hpp"
#include "lookaround/parallel.hpp"
#include "lookaround/sampler.hpp"
#include "lookaround/scoring.hpp"

namespace lookaround {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  // Decoupled decay applied once per step as p -= weight_decay * p, not
  // scaled by the learning rate. 1e-5 matches a conventional 0.01 at lr 1e-3.
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double label_smoothing = 0.1;
  double threshold = 0.85;
  uint64_t seed = 0;
  long segments_per_epoch = 60000;
  std::array<double, 3> proportions{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  // validation
  double val_stride_s = 2.0;
  model::Precision val_precision = model::Precision::float64;
  EventTolerance tolerance;
  EventHygiene hygiene;
  int threads = 0;
  // Stop after this many epochs in this invocation (0 = run to `epochs`);
  // together with the state file this allows interrupted runs.
  int stop_after = 0;

  void validate() const {
    auto bad = [](const std::string& why) { fail(ErrorCode::InvalidConfig, why); };
    if (epochs < 1) bad("epochs must be >= 1");
    if (batch_size < 1) bad("batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) bad("learning_rate must be >= 0");
    if (!(weight_decay >= 0.0 && weight_decay < 1.0)) bad("weight_decay must be in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) bad("betas must be in [0, 1)");
    if (!(adam_eps > 0.0)) bad("adam_eps must be positive");
    if (!(label_smoothing >= 0.0 && label_smoothing <= 1.0)) bad("label_smoothing must be in [0, 1]");
    if (!(threshold > 0.0 && threshold < 1.0)) bad("threshold must be in (0, 1)");
    if (!(val_stride_s > 0.0)) bad("val_stride_s must be positive");
    if (stop_after < 0) bad("stop_after must be >= 0");
    SamplerConfig{segments_per_epoch, proportions, seed}.validate();
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"weight_decay", c.weight_decay},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"adam_eps", c.adam_eps},
       {"label_smoothing", c.label_smoothing},
       {"threshold", c.threshold},
       {"seed", c.seed},
       {"segments_per_epoch", c.segments_per_epoch},
       {"proportions", c.proportions},
       {"val_stride_s", c.val_stride_s},
       {"val_precision", model::to_string(c.val_precision)},
       {"tolerance_pre_s", c.tolerance.pre_s},
       {"tolerance_post_s", c.tolerance.post_s},
       {"merge_gap_s", c.hygiene.merge_gap_s},
       {"max_event_s", c.hygiene.max_event_s},
       {"threads", c.threads},
       {"stop_after", c.stop_after}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.label_smoothing = j.value("label_smoothing", d.label_smoothing);
  c.threshold = j.value("threshold", d.threshold);
  c.seed = j.value("seed", d.seed);
  c.segments_per_epoch = j.value("segments_per_epoch", d.segments_per_epoch);
  c.proportions = j.value("proportions", d.proportions);
  c.val_stride_s = j.value("val_stride_s", d.val_stride_s);
  c.val_precision = model::parse_precision(j.value("val_precision", std::string(model::to_string(d.val_precision))));
  c.tolerance.pre_s = j.value("tolerance_pre_s", d.tolerance.pre_s);
  c.tolerance.post_s = j.value("tolerance_post_s", d.tolerance.post_s);
  c.hygiene.merge_gap_s = j.value("merge_gap_s", d.hygiene.merge_gap_s);
  c.hygiene.max_event_s = j.value("max_event_s", d.hygiene.max_event_s);
  c.threads = j.value("threads", d.threads);
  c.stop_after = j.value("stop_after", d.stop_after);
}

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_f1 = 0.0;
  double val_fp_per_day = 0.0;
  double val_sensitivity = 0.0;
  double val_precision = 0.0;
  bool improved = false;
};

inline void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch},
       {"loss", r.loss},
       {"val_f1", r.val_f1},
       {"val_fp_per_day", r.val_fp_per_day},
       {"val_sensitivity", r.val_sensitivity},
       {"val_precision", r.val_precision},
       {"improved", r.improved}};
}

inline void from_json(const nlohmann::json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<int>();
  r.loss = j.at("loss").get<double>();
  r.val_f1 = j.at("val_f1").get<double>();
  r.val_fp_per_day = j.at("val_fp_per_day").get<double>();
  r.val_sensitivity = j.value("val_sensitivity", 0.0);
  r.val_precision = j.value("val_precision", 0.0);
  r.improved = j.value("improved", false);
}

struct TrainState {
  model::ModelConfig model_config;
  model::ModelParams params;
  model::ModelParams m;  // first moment
  model::ModelParams v;  // second moment
  long step = 0;         // optimizer steps taken
  int epoch = 0;         // completed epochs
  double best_f1 = -1.0;
  int best_epoch = 0;
  std::string best_checkpoint;  // file name inside the run directory
  std::vector<EpochRecord> history;

  static TrainState fresh(const model::ModelConfig& cfg, uint64_t seed) {
    TrainState s;
    s.model_config = cfg;
    s.params = model::init_params(cfg, seed);
    s.m = model::zeros_like(cfg);
    s.v = model::zeros_like(cfg);
    return s;
  }
};

inline void save_state(const std::filesystem::path& path, const TrainState& s) {
  model::TensorFile f;
  f.meta["kind"] = "train_state";
  f.meta["config"] = s.model_config;
  f.meta["step"] = s.step;
  f.meta["epoch"] = s.epoch;
  f.meta["best_f1"] = s.best_f1;
  f.meta["best_epoch"] = s.best_epoch;
  f.meta["best_checkpoint"] = s.best_checkpoint;
  f.meta["history"] = s.history;
  model::append_params(f, s.params, "params/");
  model::append_params(f, s.m, "adam_m/");
  model::append_params(f, s.v, "adam_v/");
  model::write_tensor_file(path, f);
}

inline TrainState load_state(const std::filesystem::path& path) {
  const auto f = model::read_tensor_file(path);
  if (f.meta.value("kind", std::string()) != "train_state") {
    fail(ErrorCode::BadCheckpoint, path.string() + " is not a training state file");
  }
  TrainState s;
  try {
    s.model_config = f.meta.at("config").get<model::ModelConfig>();
    s.step = f.meta.at("step").get<long>();
    s.epoch = f.meta.at("epoch").get<int>();
    s.best_f1 = f.meta.at("best_f1").get<double>();
    s.best_epoch = f.meta.at("best_epoch").get<int>();
    s.best_checkpoint = f.meta.at("best_checkpoint").get<std::string>();
    s.history = f.meta.at("history").get<std::vector<EpochRecord>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::BadCheckpoint, std::string("training state: ") + e.what());
  }
  s.params = model::zeros_like(s.model_config);
  s.m = model::zeros_like(s.model_config);
  s.v = model::zeros_like(s.model_config);
  model::extract_params(f, s.params, "params/");
  model::extract_params(f, s.m, "adam_m/");
  model::extract_params(f, s.v, "adam_v/");
  return s;
}

namespace training_detail {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x243f6a8885a308d3ULL;
  for (uint64_t p : parts) h = splitmix64(h ^ p);
  return h;
}

inline std::vector<model::Mat*> tensors(model::ModelParams& p) {
  std::vector<model::Mat*> out;
  model::for_each_tensor(p, [&](const std::string&, model::Mat& m) { out.push_back(&m); });
  return out;
}

}  // namespace training_detail

// One AdamW step: p <- p - lr * mhat / (sqrt(vhat) + eps) - wd * p.
inline void adamw_step(TrainState& s, model::ModelParams& grads, const TrainConfig& cfg) {
  ++s.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
  auto P = training_detail::tensors(s.params);
  auto M = training_detail::tensors(s.m);
  auto V = training_detail::tensors(s.v);
  auto G = training_detail::tensors(grads);
  for (size_t t = 0; t < P.size(); ++t) {
    auto p = P[t]->array();
    auto m = M[t]->array();
    auto v = V[t]->array();
    auto g = G[t]->array();
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
    p -= cfg.learning_rate * (m / bc1) / ((v / bc2).sqrt() + cfg.adam_eps) + cfg.weight_decay * p;
  }
}

// Training recordings plus the sampler built over them; entry i of the
// sampler index refers to recordings[i].
struct TrainingSet {
  std::vector<LoadedRecording> recordings;
  EpochSampler sampler;

  TrainingSet(std::vector<LoadedRecording> recs, const WindowSpec& spec)
      : recordings(std::move(recs)), sampler(build_index(recordings), spec) {}

  static std::vector<TrainIndexEntry> build_index(const std::vector<LoadedRecording>& recs) {
    std::vector<TrainIndexEntry> idx;
    for (const auto& r : recs) {
      TrainIndexEntry e;
      e.recording_id = r.recording.id;
      e.patient_id = r.recording.patient_id;
      e.duration_s = r.recording.duration_s();
      e.seizures = r.annotations.events;
      if (r.entry.long_form) e.retained = chunk_and_filter_hours(r.recording, r.annotations);
      idx.push_back(std::move(e));
    }
    return idx;
  }
};

inline SamplerConfig sampler_config(const TrainConfig& cfg) {
  return SamplerConfig{cfg.segments_per_epoch, cfg.proportions, cfg.seed};
}

// Segments per gradient buffer. Buffers are filled independently and summed
// in index order, so the result does not depend on the thread count.
inline constexpr int kGradChunk = 8;

// Runs one epoch (state.epoch + 1) and returns the mean per-segment loss.
inline double train_epoch(TrainState& s, const TrainingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  const auto& mc = s.model_config;
  const int epoch = s.epoch + 1;
  const auto segments = data.sampler.sample_epoch(sampler_config(cfg), static_cast<uint64_t>(epoch));
  const long n = static_cast<long>(segments.size());
  double loss_sum = 0.0;
  long seen = 0;
  std::vector<model::ModelParams> grads;  // reused across batches
  for (long b0 = 0, batch = 0; b0 < n; b0 += cfg.batch_size, ++batch) {
    const long bn = std::min<long>(cfg.batch_size, n - b0);
    const long n_chunks = (bn + kGradChunk - 1) / kGradChunk;
    while (static_cast<long>(grads.size()) < n_chunks) grads.push_back(model::zeros_like(mc));
    std::vector<double> losses(static_cast<size_t>(bn));
    parallel_for(n_chunks, cfg.threads, [&](long c) {
      auto& g = grads[static_cast<size_t>(c)];
      model::set_zero(g);
      SignalMatrix window;
      for (long i = c * kGradChunk; i < std::min(bn, (c + 1) * kGradChunk); ++i) {
        const auto& seg = segments[static_cast<size_t>(b0 + i)];
        extract_window(data.recordings[seg.entry].recording, seg.start_sample, mc.window, window);
        const uint64_t seed = training_detail::mix({cfg.seed, static_cast<uint64_t>(epoch),
                                                    static_cast<uint64_t>(batch), static_cast<uint64_t>(i)});
        try {
          losses[static_cast<size_t>(i)] =
              model::backward(window, static_cast<int>(seg.label), cfg.label_smoothing, s.params, mc, g,
                              model::Mode::train, seed, 1.0 / static_cast<double>(bn));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NonFiniteActivation) throw;
          losses[static_cast<size_t>(i)] = std::nan("");
        }
      }
    });
    double batch_loss = 0.0;
    for (double l : losses) batch_loss += l;
    if (!std::isfinite(batch_loss)) {
      std::string who;
      for (long i = 0; i < bn; ++i) {
        if (std::isfinite(losses[static_cast<size_t>(i)])) continue;
        const auto& seg = segments[static_cast<size_t>(b0 + i)];
        who += " " + seg.recording_id + "@" + format_decimal(seg.start_s) + "s";
      }
      fail(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch) +
                                         ": non-finite loss from segment(s)" + who);
    }
    for (long c = 1; c < n_chunks; ++c) {
      model::for_each_tensor_pair(grads[0], grads[static_cast<size_t>(c)],
                                  [](const std::string&, model::Mat& a, const model::Mat& b) { a += b; });
    }
    adamw_step(s, grads[0], cfg);
    loss_sum += batch_loss;
    seen += bn;
  }
  return loss_sum / static_cast<double>(seen);
}

struct ValidationMetrics {
  double f1 = 0.0;
  double fp_per_day = 0.0;
  double sensitivity = 0.0;
  double precision = 0.0;
  ScoreReport report;
};

using TraceProvider = std::function<ProbabilityTrace(const LoadedRecording&)>;

// Full inference on each validation recording, event-scored at the threshold.
inline ValidationMetrics evaluate_validation(const std::vector<LoadedRecording>& val, const TrainConfig& cfg,
                                             const TraceProvider& infer) {
  if (val.empty()) fail(ErrorCode::EmptyValidationSet, "no validation recordings");
  std::vector<ScoreReport> reports;
  for (const auto& r : val) {
    const auto trace = infer(r);
    const auto hyp = binarize_and_extract(trace, cfg.threshold, cfg.hygiene);
    reports.push_back(score_recording(hyp, r.annotations, r.recording.duration_s(), cfg.tolerance));
  }
  ValidationMetrics m;
  m.report = aggregate(reports, "validation");
  m.f1 = m.report.event.f1;
  m.fp_per_day = m.report.event.fp_per_day;
  m.sensitivity = m.report.event.sensitivity;
  m.precision = m.report.event.precision;
  return m;
}

inline std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "best-epoch-%04d.ckpt", epoch);
  return buf;
}

// Strict improvement only; the best checkpoint gets its own file, which is
// never rewritten.
inline bool select_best(TrainState& s, const ValidationMetrics& m, const std::filesystem::path& run_dir) {
  if (!(m.f1 > s.best_f1)) return false;
  s.best_f1 = m.f1;
  s.best_epoch = s.epoch;
  s.best_checkpoint = checkpoint_name(s.epoch);
  if (!run_dir.empty()) {
    model::Checkpoint ck{s.model_config, s.params,
                         {{"epoch", s.epoch}, {"val_event_f1", m.f1}, {"val_fp_per_day", m.fp_per_day}}};
    model::save_checkpoint(run_dir / s.best_checkpoint, ck);
  }
  return true;
}

inline TraceProvider model_trace_provider(const TrainState& s, const TrainConfig& cfg) {
  auto model = std::make_shared<model::Model>(s.model_config, s.params, cfg.val_precision);
  return [model, cfg](const LoadedRecording& r) {
    return sliding_infer(r.recording, *model, cfg.val_stride_s, cfg.threads);
  };
}

inline ValidationMetrics validate_and_select(TrainState& s, const std::vector<LoadedRecording>& val,
                                             const TrainConfig& cfg, const std::filesystem::path& run_dir,
                                             const TraceProvider& infer = {}) {
  const auto m = evaluate_validation(val, cfg, infer ? infer : model_trace_provider(s, cfg));
  select_best(s, m, run_dir);
  return m;
}

struct TrainRunResult {
  std::filesystem::path best_checkpoint;
  TrainState state;
  bool finished = false;  // false when stopped early via stop_after
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains on the manifest's "train" split, validates on "validation".
// Writes into run_dir: state.ckpt (resumable), best-epoch-NNNN.ckpt,
// best.ckpt (copy of the selected one) and metrics.jsonl. An existing
// state.ckpt is resumed when `resume` is set.
inline TrainRunResult train_run(TrainingSet& train, const std::vector<LoadedRecording>& val, const TrainConfig& cfg,
                                const model::ModelConfig& mcfg, const std::filesystem::path& run_dir,
                                bool resume = false, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  mcfg.validate();
  if (val.empty()) fail(ErrorCode::EmptyValidationSet, "manifest has no validation recordings");
  std::filesystem::create_directories(run_dir);
  const auto state_path = run_dir / "state.ckpt";
  const auto metrics_path = run_dir / "metrics.jsonl";
  TrainRunResult res;
  if (resume && std::filesystem::exists(state_path)) {
    res.state = load_state(state_path);
    if (!(res.state.model_config == mcfg)) fail(ErrorCode::InvalidConfig, "resumed state has a different model");
  } else {
    res.state = TrainState::fresh(mcfg, cfg.seed);
  }
  // the metrics log always mirrors the state's history
  {
    std::ofstream out(metrics_path, std::ios::trunc);
    for (const auto& r : res.state.history) out << nlohmann::json(r).dump() << '\n';
  }
  TrainState& s = res.state;
  int ran = 0;
  while (s.epoch < cfg.epochs && (cfg.stop_after == 0 || ran < cfg.stop_after)) {
    EpochRecord rec;
    rec.loss = train_epoch(s, train, cfg);
    s.epoch += 1;
    rec.epoch = s.epoch;
    const double before = s.best_f1;
    const auto m = validate_and_select(s, val, cfg, run_dir);
    rec.val_f1 = m.f1;
    rec.val_fp_per_day = m.fp_per_day;
    rec.val_sensitivity = m.sensitivity;
    rec.val_precision = m.precision;
    rec.improved = s.best_f1 > before;
    s.history.push_back(rec);
    save_state(state_path, s);
    std::ofstream(metrics_path, std::ios::app) << nlohmann::json(rec).dump() << '\n';
    if (on_epoch) on_epoch(rec);
    ++ran;
  }
  res.finished = s.epoch >= cfg.epochs;
  res.best_checkpoint = run_dir / s.best_checkpoint;
  if (res.finished) {
    std::filesystem::copy_file(res.best_checkpoint, run_dir / "best.ckpt",
                               std::filesystem::copy_options::overwrite_existing);
  }
  return res;
}

}  // namespace lookaround
