// lookaround: command-line entry point.
//
// Every command resolves its settings as flags > --config JSON > defaults,
// writes the result to <out>/effective_config.json and lists what it
// produced in <out>/artifacts.json. Feeding effective_config.json back via
// --config reproduces the run.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lookaround/bench.hpp"
#include "lookaround/inference.hpp"
#include "lookaround/manifest.hpp"
#include "lookaround/model/checkpoint.hpp"
#include "lookaround/model/gradcheck.hpp"
#include "lookaround/render.hpp"
#include "lookaround/scoring.hpp"
#include "lookaround/synth.hpp"
#include "lookaround/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace lookaround;

namespace {

// Settings for one subcommand: defaults, overlaid by the config file, then
// by flags the user actually passed.
struct Layers {
  std::string config_path;
  std::vector<std::pair<CLI::Option*, std::function<void(json&)>>> flags;

  json resolve(const json& defaults) const {
    json eff = defaults;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) fail(ErrorCode::Io, "cannot open config " + config_path);
      json file;
      try {
        file = json::parse(in);
      } catch (const json::exception& e) {
        fail(ErrorCode::Io, "config " + config_path + ": " + e.what());
      }
      file.erase("command");
      eff.merge_patch(file);
    }
    for (const auto& [opt, set] : flags) {
      if (opt->count() > 0) set(eff);
    }
    return eff;
  }
};

template <class T>
CLI::Option* bind(CLI::App* app, Layers& layers, const std::string& flag, const std::string& pointer,
                  const std::string& help) {
  auto store = std::make_shared<T>();
  CLI::Option* opt = app->add_option(flag, *store, help);
  layers.flags.emplace_back(opt, [store, pointer](json& j) { j[json::json_pointer(pointer)] = *store; });
  return opt;
}

CLI::Option* bind_flag(CLI::App* app, Layers& layers, const std::string& flag, const std::string& pointer,
                       const std::string& help) {
  auto store = std::make_shared<bool>(false);
  CLI::Option* opt = app->add_flag(flag, *store, help);
  layers.flags.emplace_back(opt, [store, pointer](json& j) { j[json::json_pointer(pointer)] = *store; });
  return opt;
}

void add_config(CLI::App* app, Layers& layers) {
  app->add_option("--config", layers.config_path, "JSON config file (flags take precedence)");
}

class RunDir {
 public:
  RunDir(const std::string& command, const json& eff) : dir_(eff.at("out").get<std::string>()) {
    fs::create_directories(dir_);
    json dump = eff;
    dump["command"] = command;
    std::ofstream(dir_ / "effective_config.json") << dump.dump(2) << '\n';
  }
  const fs::path& dir() const { return dir_; }
  fs::path add(const fs::path& p, const std::string& kind) {
    artifacts_.push_back({{"path", fs::relative(p, dir_).generic_string()}, {"kind", kind}});
    return p;
  }
  void finish(const json& summary = json::object()) {
    json out = {{"artifacts", artifacts_}, {"summary", summary}};
    std::ofstream(dir_ / "artifacts.json") << out.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  json artifacts_ = json::array();
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) fail(ErrorCode::Io, "cannot write " + p.string());
  out << text;
}

fs::path cache_dir_of(const json& eff) {
  const auto c = eff.value("cache_dir", std::string());
  return c.empty() ? fs::path(eff.at("out").get<std::string>()) / "cache" : fs::path(c);
}

std::vector<ManifestEntry> selected(const Manifest& m, const std::string& split) {
  return split.empty() || split == "all" ? m.recordings : m.split(split);
}

// ---- preprocess ----------------------------------------------------------

json preprocess_defaults() {
  return {{"manifest", ""}, {"split", "all"}, {"out", "runs/preprocess"}, {"cache_dir", ""},
          {"preprocess", PreprocessConfig{}}};
}

int run_preprocess(const json& eff) {
  RunDir run("preprocess", eff);
  const auto m = load_manifest(eff.at("manifest").get<std::string>());
  const auto pcfg = eff.at("preprocess").get<PreprocessConfig>();
  const auto cache = cache_dir_of(eff);
  long recomputed = 0, reused = 0;
  for (const auto& e : selected(m, eff.at("split"))) {
    const auto r = preprocess_cached(m.resolve(e.path), pcfg, cache, e.id, e.patient_id);
    (r.recomputed ? recomputed : reused) += 1;
    run.add(raw_paths(r.entry).header, "montaged_recording");
    std::cout << e.id << (r.recomputed ? "  computed" : "  cached") << "  " << r.entry.string() << '\n';
  }
  run.finish({{"recomputed", recomputed}, {"reused", reused}});
  return 0;
}

// ---- synth ---------------------------------------------------------------

json synth_defaults(const std::string& preset) {
  const SyntheticSpec spec = preset == "context" ? SyntheticSpec::context_task() : SyntheticSpec{};
  json s = spec;
  s["preset"] = preset;
  return {{"out", "synthetic"}, {"synthetic", s}};
}

int run_synth(const Layers& layers) {
  json eff = layers.resolve(synth_defaults("default"));
  const auto preset = eff["synthetic"].value("preset", std::string("default"));
  if (preset != "default" && preset != "context") fail(ErrorCode::InvalidConfig, "unknown preset " + preset);
  if (preset != "default") eff = layers.resolve(synth_defaults(preset));
  RunDir run("synth", eff);
  const auto spec = eff.at("synthetic").get<SyntheticSpec>();
  const auto m = write_synthetic_corpus(spec, run.dir());
  long seizures = 0;
  for (const auto& e : m.recordings) {
    run.add(run.dir() / e.path, "recording");
    run.add(run.dir() / e.annotations, "annotations");
    seizures += static_cast<long>(read_annotations(run.dir() / e.annotations, spec.duration_s, e.id).events.size());
  }
  run.add(run.dir() / "manifest.json", "manifest");
  run.finish({{"recordings", m.recordings.size()}, {"seizures", seizures}});
  std::cout << "wrote " << m.recordings.size() << " recordings (" << seizures << " seizures) to " << run.dir() << '\n';
  return 0;
}

// ---- train ---------------------------------------------------------------

json train_defaults() {
  return {{"manifest", ""},  {"out", "runs/train"},       {"cache_dir", ""},
          {"resume", false}, {"train", TrainConfig{}},    {"model", model::ModelConfig{}},
          {"preprocess", PreprocessConfig{}}};
}

int run_train(const json& eff) {
  RunDir run("train", eff);
  const auto m = load_manifest(eff.at("manifest").get<std::string>());
  const auto tcfg = eff.at("train").get<TrainConfig>();
  const auto mcfg = eff.at("model").get<model::ModelConfig>();
  const auto pcfg = eff.at("preprocess").get<PreprocessConfig>();
  tcfg.validate();
  mcfg.validate();
  const auto cache = cache_dir_of(eff);
  TrainingSet train(load_split(m, "train", pcfg, cache), mcfg.window);
  const auto val = load_split(m, "validation", pcfg, cache);
  std::cout << "train recordings " << train.recordings.size() << ", validation " << val.size() << ", parameters "
            << model::parameter_count(mcfg) << '\n';
  const auto res = train_run(train, val, tcfg, mcfg, run.dir(), eff.value("resume", false), [](const EpochRecord& r) {
    std::printf("epoch %3d  loss %.5f  val F1 %.4f  FP/day %.2f%s\n", r.epoch, r.loss, r.val_f1, r.val_fp_per_day,
                r.improved ? "  *" : "");
    std::fflush(stdout);
  });
  run.add(run.dir() / "metrics.jsonl", "metrics");
  run.add(run.dir() / "state.ckpt", "train_state");
  run.add(res.best_checkpoint, "checkpoint");
  if (res.finished) run.add(run.dir() / "best.ckpt", "best_checkpoint");
  run.finish({{"best_epoch", res.state.best_epoch}, {"best_val_f1", res.state.best_f1}, {"finished", res.finished}});
  return 0;
}

// ---- infer ---------------------------------------------------------------

json infer_defaults() {
  return {{"checkpoints", json::array()}, {"recording", ""},   {"manifest", ""},
          {"split", "test"},              {"out", "runs/infer"}, {"cache_dir", ""},
          {"precision", "float64"},       {"inference", InferenceConfig{}}, {"preprocess", PreprocessConfig{}}};
}

int run_infer(const json& eff) {
  RunDir run("infer", eff);
  const auto ic = eff.at("inference").get<InferenceConfig>();
  ic.validate();
  const auto pcfg = eff.at("preprocess").get<PreprocessConfig>();
  const auto precision = model::parse_precision(eff.at("precision"));
  std::vector<model::Model> members;
  for (const auto& path : eff.at("checkpoints")) {
    auto ck = model::load_checkpoint(path.get<std::string>());
    members.emplace_back(ck.config, std::move(ck.params), precision);
  }
  if (members.empty()) fail(ErrorCode::InvalidConfig, "infer needs at least one --checkpoint");

  std::vector<LoadedRecording> inputs;
  const auto rec_path = eff.at("recording").get<std::string>();
  if (!rec_path.empty()) {
    Manifest single;
    ManifestEntry e;
    e.id = fs::path(rec_path).stem().string();
    e.patient_id = e.id;
    e.path = fs::absolute(rec_path);
    inputs.push_back(load_entry(single, e, pcfg));
  } else {
    const auto m = load_manifest(eff.at("manifest").get<std::string>());
    for (const auto& e : selected(m, eff.at("split"))) inputs.push_back(load_entry(m, e, pcfg, cache_dir_of(eff)));
  }
  json per = json::array();
  for (const auto& in : inputs) {
    const auto r = run_ensemble_configs(in.recording, members, ic);
    const auto hyp = run.add(run.dir() / (in.recording.id + ".tsv"), "hypothesis");
    write_hypothesis_tsv(hyp, r.events);
    const auto trace = run.add(run.dir() / (in.recording.id + ".trace.csv"), "trace");
    write_trace_csv(trace, r.trace);
    per.push_back({{"recording_id", in.recording.id},
                   {"duration_s", in.recording.duration_s()},
                   {"events", r.events.events.size()}});
    std::cout << in.recording.id << ": " << r.events.events.size() << " events\n";
  }
  run.finish({{"recordings", per}});
  return 0;
}

// ---- score / render inputs -----------------------------------------------

json pairing_defaults(const std::string& out) {
  return {{"hyp", ""}, {"ref", ""}, {"manifest", ""}, {"split", "test"}, {"duration_s", 0.0},
          {"tolerance", {{"pre_s", 30.0}, {"post_s", 60.0}}}, {"out", out}};
}

// Hypothesis/reference pairs, either from a manifest split plus a directory
// of <id>.tsv hypotheses, from two directories of <id>.tsv files (needs
// duration_s), or from two single files (needs duration_s).
std::vector<TimelineRecording> collect_pairs(const json& eff) {
  const fs::path hyp = eff.at("hyp").get<std::string>();
  const fs::path ref = eff.at("ref").get<std::string>();
  const auto mpath = eff.at("manifest").get<std::string>();
  const double duration = eff.at("duration_s").get<double>();
  std::vector<TimelineRecording> out;
  auto read = [](const fs::path& p, double d, const std::string& id, bool merge) {
    return read_annotations(p, d, id, merge).events;
  };
  if (!mpath.empty()) {
    const auto m = load_manifest(mpath);
    const auto entries = selected(m, eff.at("split"));
    std::vector<std::string> hyp_ids, ref_ids;
    for (const auto& e : entries) ref_ids.push_back(e.id);
    for (const auto& f : fs::directory_iterator(hyp)) {
      if (f.path().extension() == ".tsv") hyp_ids.push_back(f.path().stem().string());
    }
    // extra hypothesis files for other splits are fine; missing ones are not
    for (const auto& id : ref_ids) {
      if (std::find(hyp_ids.begin(), hyp_ids.end(), id) == hyp_ids.end()) {
        fail(ErrorCode::MismatchedRecordings, "no hypothesis for recording " + id);
      }
    }
    for (const auto& e : entries) {
      TimelineRecording t;
      t.recording_id = e.id;
      t.patient_id = e.patient_id;
      t.duration_s = recording_duration(m.resolve(e.path));
      if (!e.annotations.empty()) t.reference = read(m.resolve(e.annotations), t.duration_s, e.id, true);
      t.hypothesis = read(hyp / (e.id + ".tsv"), t.duration_s, e.id, false);
      out.push_back(std::move(t));
    }
    return out;
  }
  if (!(duration > 0.0)) fail(ErrorCode::InvalidConfig, "without a manifest, --duration is required");
  if (fs::is_directory(hyp) != fs::is_directory(ref)) {
    fail(ErrorCode::MismatchedRecordings, "hypothesis and reference must both be files or both be directories");
  }
  if (fs::is_directory(hyp)) {
    std::vector<std::string> hyp_ids, ref_ids;
    for (const auto& f : fs::directory_iterator(hyp)) {
      if (f.path().extension() == ".tsv") hyp_ids.push_back(f.path().stem().string());
    }
    for (const auto& f : fs::directory_iterator(ref)) {
      if (f.path().extension() == ".tsv") ref_ids.push_back(f.path().stem().string());
    }
    check_same_recordings(hyp_ids, ref_ids);
    std::sort(ref_ids.begin(), ref_ids.end());
    for (const auto& id : ref_ids) {
      out.push_back({id, id, duration, read(ref / (id + ".tsv"), duration, id, true),
                     read(hyp / (id + ".tsv"), duration, id, false)});
    }
    return out;
  }
  const auto id = ref.stem().string();
  out.push_back({id, id, duration, read(ref, duration, id, true), read(hyp, duration, id, false)});
  return out;
}

EventTolerance tolerance_of(const json& eff) {
  return {eff.at("tolerance").at("pre_s").get<double>(), eff.at("tolerance").at("post_s").get<double>()};
}

int run_score(const json& eff) {
  RunDir run("score", eff);
  const auto tol = tolerance_of(eff);
  std::vector<ScoreReport> reports;
  for (const auto& p : collect_pairs(eff)) {
    EventList hyp{p.recording_id, p.hypothesis, p.duration_s};
    AnnotationSet ref{p.recording_id, p.reference};
    reports.push_back(score_recording(hyp, ref, p.duration_s, tol));
  }
  const auto total = aggregate(reports, "all");
  json j = {{"aggregate", total}, {"recordings", reports}};
  auto rows = reports;
  rows.push_back(total);
  const auto table = format_table(rows);
  write_text(run.add(run.dir() / "score.json", "score_json"), j.dump(2) + "\n");
  write_text(run.add(run.dir() / "score.txt", "score_table"), table);
  std::cout << table;
  run.finish({{"event_f1", total.event.f1}, {"fp_per_day", total.event.fp_per_day}});
  return 0;
}

int run_render(const json& eff) {
  RunDir run("render", eff);
  const auto svg = render_timeline_svg(collect_pairs(eff), tolerance_of(eff));
  write_text(run.add(run.dir() / "timeline.svg", "svg"), svg);
  run.finish();
  std::cout << "wrote " << (run.dir() / "timeline.svg").string() << '\n';
  return 0;
}

// ---- bench ---------------------------------------------------------------

json bench_defaults() {
  return {{"recording", ""}, {"checkpoint", ""}, {"threads", 0},    {"stride_s", 2.0},
          {"precision", "float32"}, {"share_embeddings", true}, {"seed", 1}, {"out", "runs/bench"}};
}

int run_bench_cmd(const json& eff) {
  RunDir run("bench", eff);
  const auto precision = model::parse_precision(eff.at("precision"));
  model::Model m;
  const auto ck_path = eff.at("checkpoint").get<std::string>();
  if (ck_path.empty()) {
    // throughput does not depend on the weights
    m = model::Model::initialized(model::ModelConfig{}, eff.at("seed").get<uint64_t>(), precision);
  } else {
    auto ck = model::load_checkpoint(ck_path);
    m = model::Model(ck.config, std::move(ck.params), precision);
  }
  fs::path source = eff.at("recording").get<std::string>();
  if (source.empty()) {
    SyntheticSpec spec;
    spec.duration_s = 3600.0;
    spec.seed = eff.at("seed").get<uint64_t>();
    auto s = synthesize_recording(spec, 0, 0);
    source = run.dir() / "bench_input.json";
    write_raw(source, s.recording);
    run.add(source, "synthetic_recording");
  }
  const double stride = eff.at("stride_s").get<double>();
  const int threads = eff.at("threads").get<int>();
  BenchReport r;
  {
    auto t0 = std::chrono::steady_clock::now();
    Recording raw = read_recording(source);
    r.io_seconds = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const bool montaged = raw.n_channels() == kMontageChannels && raw.fs == kModelFs &&
                          raw.channel_labels.front().find('-') != std::string::npos;
    MontagedRecording rec = montaged ? MontagedRecording(std::move(raw)) : preprocess_pipeline(raw);
    r.preprocess_seconds = montaged ? 0.0 : seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto trace = sliding_infer(rec, m, stride, threads, eff.at("share_embeddings").get<bool>());
    r.inference_seconds = seconds_since(t0);
    r.duration_s = rec.duration_s();
    r.window_count = count_windows(r.duration_s, m.config().window, stride);
    r.threads = resolve_threads(threads);
    r.stride_s = stride;
    r.precision = model::to_string(precision);
  }
  json j = r;
  write_text(run.add(run.dir() / "bench.json", "bench_report"), j.dump(2) + "\n");
  std::printf("%.0f s of EEG, %ld windows, %d thread(s), %s\n", r.duration_s, r.window_count, r.threads,
              r.precision.c_str());
  std::printf("  read        %8.2f s (excluded)\n", r.io_seconds);
  std::printf("  preprocess  %8.2f s\n", r.preprocess_seconds);
  std::printf("  inference   %8.2f s   real-time factor %.1f\n", r.inference_seconds, r.rtf_inference());
  std::printf("  with prep.  %8.2f s   real-time factor %.1f\n", r.inference_seconds + r.preprocess_seconds,
              r.rtf_with_preprocess());
  run.finish(j);
  return 0;
}

// ---- gradcheck -----------------------------------------------------------

json gradcheck_defaults() {
  return {{"seed", 7}, {"step", 1e-5}, {"tolerance", 1e-4}, {"out", "runs/gradcheck"}};
}

int run_gradcheck(const json& eff) {
  RunDir run("gradcheck", eff);
  model::GradCheckOptions opt;
  opt.seed = eff.at("seed").get<uint64_t>();
  opt.step = eff.at("step").get<double>();
  opt.tolerance = eff.at("tolerance").get<double>();
  const auto rep = model::grad_check(model::tiny_config(), opt);
  json j = rep;
  write_text(run.add(run.dir() / "gradcheck.json", "gradcheck_report"), j.dump(2) + "\n");
  for (const auto& t : rep.tensors) {
    std::printf("%-28s %7ld  max rel %.3e  %s\n", t.name.c_str(), t.size, t.max_rel_error, t.passed ? "ok" : "FAIL");
  }
  std::printf("%ld parameters, max relative error %.3e, %.1f s: %s\n", rep.n_parameters, rep.max_rel_error,
              rep.seconds, rep.passed ? "PASS" : "FAIL");
  run.finish({{"passed", rep.passed}, {"max_rel_error", rep.max_rel_error}});
  return rep.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG seizure detection with context windows"};
  app.require_subcommand(1);
  std::map<std::string, Layers> layers;

  auto* pre = app.add_subcommand("preprocess", "Preprocess a manifest into the montage cache");
  {
    auto& L = layers["preprocess"];
    add_config(pre, L);
    bind<std::string>(pre, L, "--manifest", "/manifest", "corpus manifest");
    bind<std::string>(pre, L, "--split", "/split", "split to process (all, train, validation, test)");
    bind<std::string>(pre, L, "--cache-dir", "/cache_dir", "cache directory (default <out>/cache)");
    bind<std::string>(pre, L, "--out", "/out", "run directory");
    bind<double>(pre, L, "--notch", "/preprocess/notch_hz", "line frequency in Hz");
  }

  auto* syn = app.add_subcommand("synth", "Generate a synthetic corpus");
  {
    auto& L = layers["synth"];
    add_config(syn, L);
    bind<std::string>(syn, L, "--out", "/out", "output directory");
    bind<std::string>(syn, L, "--preset", "/synthetic/preset", "default | context");
    bind<int>(syn, L, "--patients", "/synthetic/n_patients", "number of patients");
    bind<double>(syn, L, "--duration", "/synthetic/duration_s", "seconds per recording");
    bind<double>(syn, L, "--seizure-rate", "/synthetic/seizure_rate_per_hour", "seizures per hour");
    bind<double>(syn, L, "--decoy-rate", "/synthetic/decoy_rate_per_hour", "unlabelled decoy bursts per hour");
    bind<double>(syn, L, "--cue", "/synthetic/cue_uv", "pre-ictal cue amplitude (uV)");
    bind<uint64_t>(syn, L, "--seed", "/synthetic/seed", "generator seed");
  }

  auto* tr = app.add_subcommand("train", "Train a model");
  {
    auto& L = layers["train"];
    add_config(tr, L);
    bind<std::string>(tr, L, "--manifest", "/manifest", "corpus manifest with train and validation splits");
    bind<std::string>(tr, L, "--out", "/out", "run directory");
    bind<std::string>(tr, L, "--cache-dir", "/cache_dir", "preprocessing cache");
    bind_flag(tr, L, "--resume", "/resume", "resume from <out>/state.ckpt");
    bind<int>(tr, L, "--epochs", "/train/epochs", "epochs");
    bind<int>(tr, L, "--batch-size", "/train/batch_size", "segments per batch");
    bind<double>(tr, L, "--lr", "/train/learning_rate", "learning rate");
    bind<double>(tr, L, "--weight-decay", "/train/weight_decay", "decoupled weight decay per step");
    bind<double>(tr, L, "--label-smoothing", "/train/label_smoothing", "label smoothing");
    bind<double>(tr, L, "--threshold", "/train/threshold", "selection threshold");
    bind<uint64_t>(tr, L, "--seed", "/train/seed", "seed");
    bind<long>(tr, L, "--segments-per-epoch", "/train/segments_per_epoch", "segments sampled per epoch");
    bind<double>(tr, L, "--val-stride", "/train/val_stride_s", "validation inference stride (s)");
    bind<std::string>(tr, L, "--val-precision", "/train/val_precision", "float64 | float32");
    bind<int>(tr, L, "--threads", "/train/threads", "worker threads (0 = all cores)");
    bind<int>(tr, L, "--stop-after", "/train/stop_after", "stop after this many epochs in this invocation");
    bind<double>(tr, L, "--look-behind", "/model/window/look_behind_s", "look-behind context (s)");
    bind<double>(tr, L, "--target", "/model/window/target_s", "target length (s)");
    bind<double>(tr, L, "--look-ahead", "/model/window/look_ahead_s", "look-ahead context (s)");
    bind<int>(tr, L, "--embed-dim", "/model/embed_dim", "token dimension");
    bind<int>(tr, L, "--layers", "/model/n_encoder_layers", "encoder layers");
    bind<int>(tr, L, "--heads", "/model/n_heads", "attention heads");
    bind<int>(tr, L, "--ffn-dim", "/model/ffn_dim", "feed-forward width");
  }

  auto* inf = app.add_subcommand("infer", "Sliding-window inference, optionally ensembling checkpoints");
  {
    auto& L = layers["infer"];
    add_config(inf, L);
    bind<std::vector<std::string>>(inf, L, "--checkpoint", "/checkpoints", "checkpoint(s); several = ensemble");
    bind<std::string>(inf, L, "--recording", "/recording", "single recording (EDF or raw)");
    bind<std::string>(inf, L, "--manifest", "/manifest", "corpus manifest");
    bind<std::string>(inf, L, "--split", "/split", "manifest split");
    bind<std::string>(inf, L, "--out", "/out", "run directory");
    bind<std::string>(inf, L, "--cache-dir", "/cache_dir", "preprocessing cache");
    bind<std::string>(inf, L, "--precision", "/precision", "float64 | float32");
    bind<double>(inf, L, "--stride", "/inference/stride_s", "window stride (s)");
    bind<double>(inf, L, "--threshold", "/inference/threshold", "decision threshold");
    bind<double>(inf, L, "--merge-gap", "/inference/merge_gap_s", "merge events closer than this (s)");
    bind<double>(inf, L, "--max-event", "/inference/max_event_s", "split events longer than this (s)");
    bind<int>(inf, L, "--threads", "/inference/threads", "worker threads (0 = all cores)");
  }

  auto add_pairing = [&](CLI::App* app, Layers& L) {
    add_config(app, L);
    bind<std::string>(app, L, "--hyp", "/hyp", "hypothesis TSV or directory of <id>.tsv");
    bind<std::string>(app, L, "--ref", "/ref", "reference TSV or directory (without --manifest)");
    bind<std::string>(app, L, "--manifest", "/manifest", "manifest giving references and durations");
    bind<std::string>(app, L, "--split", "/split", "manifest split");
    bind<double>(app, L, "--duration", "/duration_s", "recording duration (s) without a manifest");
    bind<double>(app, L, "--pre", "/tolerance/pre_s", "tolerance before reference onset (s)");
    bind<double>(app, L, "--post", "/tolerance/post_s", "tolerance after reference end (s)");
    bind<std::string>(app, L, "--out", "/out", "run directory");
  };
  auto* sc = app.add_subcommand("score", "Sample- and event-based scoring");
  add_pairing(sc, layers["score"]);
  auto* rd = app.add_subcommand("render", "SVG timeline of predictions against references");
  add_pairing(rd, layers["render"]);

  auto* be = app.add_subcommand("bench", "Inference throughput on one hour of EEG");
  {
    auto& L = layers["bench"];
    add_config(be, L);
    bind<std::string>(be, L, "--recording", "/recording", "recording (default: synthesize one hour)");
    bind<std::string>(be, L, "--checkpoint", "/checkpoint", "checkpoint (default: initialised default model)");
    bind<int>(be, L, "--threads", "/threads", "worker threads (0 = all cores)");
    bind<double>(be, L, "--stride", "/stride_s", "window stride (s)");
    bind<std::string>(be, L, "--precision", "/precision", "float32 | float64");
    bind<bool>(be, L, "--share-embeddings", "/share_embeddings", "reuse patch embeddings across windows");
    bind<uint64_t>(be, L, "--seed", "/seed", "seed for synthesized input / initial weights");
    bind<std::string>(be, L, "--out", "/out", "run directory");
  }

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check on a tiny model");
  {
    auto& L = layers["gradcheck"];
    add_config(gc, L);
    bind<uint64_t>(gc, L, "--seed", "/seed", "seed");
    bind<double>(gc, L, "--step", "/step", "finite-difference step");
    bind<double>(gc, L, "--tolerance", "/tolerance", "maximum relative error");
    bind<std::string>(gc, L, "--out", "/out", "run directory");
  }

  CLI11_PARSE(app, argc, argv);
  try {
    if (*pre) return run_preprocess(layers["preprocess"].resolve(preprocess_defaults()));
    if (*syn) return run_synth(layers["synth"]);
    if (*tr) return run_train(layers["train"].resolve(train_defaults()));
    if (*inf) return run_infer(layers["infer"].resolve(infer_defaults()));
    if (*sc) return run_score(layers["score"].resolve(pairing_defaults("runs/score")));
    if (*rd) return run_render(layers["render"].resolve(pairing_defaults("runs/render")));
    if (*be) return run_bench_cmd(layers["bench"].resolve(bench_defaults()));
    if (*gc) return run_gradcheck(layers["gradcheck"].resolve(gradcheck_defaults()));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
