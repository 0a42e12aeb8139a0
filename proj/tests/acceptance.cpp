// Acceptance run: one PASS/FAIL line per criterion. Criteria 6-8 train
// models and dominate the runtime.
//
//   acceptance [--only 1,2,...] [--work DIR] [--verbose]

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lookaround/inference.hpp"
#include "lookaround/manifest.hpp"
#include "lookaround/model/checkpoint.hpp"
#include "lookaround/model/gradcheck.hpp"
#include "lookaround/sampler.hpp"
#include "lookaround/scoring.hpp"
#include "lookaround/synth.hpp"
#include "lookaround/training.hpp"

using namespace lookaround;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

bool verbose = false;
fs::path work_dir;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void log(const std::string& s) {
  if (verbose) std::cerr << "  " << s << std::endl;
}

// ---- 1 ---------------------------------------------------------------------

Outcome gradient_check() {
  const auto cfg = model::tiny_config();
  const long n = model::parameter_count(cfg);
  const auto rep = model::grad_check(cfg);
  return {rep.passed && rep.max_rel_error < 1e-4 && n <= 20000 && rep.seconds < 300.0,
          fmt("%ld parameters, max relative error %.2e, %.1f s", n, rep.max_rel_error, rep.seconds)};
}

// ---- 2 ---------------------------------------------------------------------

// Amplitude of a sinusoid at f in x[lo, hi), by least squares on sin/cos.
double tone_amplitude(const Eigen::RowVectorXd& x, double f, double fs, long lo, long hi) {
  double ss = 0, cc = 0, sc = 0, xs = 0, xc = 0;
  for (long i = lo; i < hi; ++i) {
    const double s = std::sin(2 * M_PI * f * i / fs), c = std::cos(2 * M_PI * f * i / fs);
    ss += s * s;
    cc += c * c;
    sc += s * c;
    xs += x[i] * s;
    xc += x[i] * c;
  }
  const double det = ss * cc - sc * sc;
  const double a = (xs * cc - xc * sc) / det, b = (xc * ss - xs * sc) / det;
  return std::hypot(a, b);
}

Recording electrodes_at(double fs, double seconds, const std::function<double(const std::string&, long)>& value) {
  Recording rec;
  rec.id = "fixture";
  rec.fs = fs;
  for (const auto& e : kElectrodePositions) rec.channel_labels.emplace_back(e.label);
  const long n = std::lround(seconds * fs);
  rec.samples.resize(static_cast<Eigen::Index>(rec.channel_labels.size()), n);
  for (size_t c = 0; c < rec.channel_labels.size(); ++c) {
    for (long i = 0; i < n; ++i) rec.samples(static_cast<Eigen::Index>(c), i) = value(rec.channel_labels[c], i);
  }
  return rec;
}

Eigen::Index derivation_row(const MontagedRecording& m, const std::string& name) {
  for (size_t i = 0; i < m.channel_labels.size(); ++i) {
    if (m.channel_labels[i] == name) return static_cast<Eigen::Index>(i);
  }
  fail(ErrorCode::ShapeMismatch, "no derivation " + name);
}

Outcome preprocessing_fidelity() {
  const double fs = 256.0;
  const PreprocessConfig pcfg;
  std::ostringstream detail;
  bool ok = true;

  // 50 Hz on one electrode only, so the bipolar pair carries it in full.
  const double amp = 20.0;
  auto noisy = electrodes_at(fs, 60, [&](const std::string& e, long i) {
    return e == "Fz" ? amp * std::sin(2 * M_PI * 50.0 * i / fs) : 0.0;
  });
  auto out = preprocess_pipeline(noisy, pcfg);
  const long lo = 10 * 128, hi = 50 * 128;
  const double residual = tone_amplitude(out.samples.row(derivation_row(out, "Fz-Cz")), 50.0, 128.0, lo, hi);
  const double db = 20 * std::log10(amp / std::max(residual, 1e-300));
  ok &= db >= 30.0;
  detail << fmt("50 Hz -%.1f dB", db);

  auto hp = design_fir(FilterKind::highpass, pcfg.highpass_hz, pcfg.highpass_transition_hz, fs);
  double dc = 0;
  for (double t : hp.taps) dc += t;
  ok &= dc == 0.0;
  detail << fmt(", highpass DC %.1e", dc);

  // Passband: the filter cascade on a fine grid, and sinusoids through the
  // full pipeline (which adds montage and resampling).
  auto lp = design_fir(FilterKind::lowpass, pcfg.lowpass_hz, pcfg.lowpass_transition_hz, fs);
  auto notch = design_fir(FilterKind::notch, pcfg.notch_hz, pcfg.notch_transition_hz, fs, pcfg.notch_width_hz);
  double worst = 0;
  for (double f = 1.0; f <= 40.0 + 1e-9; f += 0.125) {
    const double g = magnitude_response(hp.taps, f, fs) * magnitude_response(lp.taps, f, fs) *
                     magnitude_response(notch.taps, f, fs);
    worst = std::max(worst, std::abs(g - 1.0));
  }
  for (double f : {1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0}) {
    auto tone = electrodes_at(fs, 60, [&](const std::string& e, long i) {
      return e == "Fz" ? std::sin(2 * M_PI * f * i / fs) : 0.0;
    });
    auto y = preprocess_pipeline(tone, pcfg);
    worst = std::max(worst, std::abs(tone_amplitude(y.samples.row(derivation_row(y, "Fz-Cz")), f, 128.0, lo, hi) - 1));
  }
  ok &= worst <= 0.05;
  detail << fmt(", passband max |g-1| %.4f", worst);

  // Montage: hand-written pair list against the library.
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"Fp2", "F4"}, {"F4", "C4"}, {"C4", "P4"}, {"P4", "O2"}, {"Fp1", "F3"}, {"F3", "C3"},
      {"C3", "P3"},  {"P3", "O1"}, {"Fp2", "F8"}, {"F8", "T4"}, {"T4", "T6"}, {"T6", "O2"},
      {"Fp1", "F7"}, {"F7", "T3"}, {"T3", "T5"}, {"T5", "O1"}, {"Fz", "Cz"}, {"Cz", "Pz"}};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0, 50);
  auto raw = electrodes_at(fs, 4, [&](const std::string&, long) { return nd(rng); });
  auto bip = to_bipolar(raw, longitudinal_bipolar());
  bool montage_ok = bip.n_channels() == 18;
  auto row_of = [&](const std::string& e) {
    return static_cast<Eigen::Index>(
        std::find(raw.channel_labels.begin(), raw.channel_labels.end(), e) - raw.channel_labels.begin());
  };
  for (size_t k = 0; k < pairs.size() && montage_ok; ++k) {
    montage_ok &= bip.channel_labels[k] == pairs[k].first + "-" + pairs[k].second;
    for (long i = 0; i < raw.n_samples(); ++i) {
      montage_ok &= bip.samples(static_cast<Eigen::Index>(k), i) ==
                    raw.samples(row_of(pairs[k].first), i) - raw.samples(row_of(pairs[k].second), i);
    }
  }
  ok &= montage_ok;
  detail << (montage_ok ? ", montage exact" : ", montage MISMATCH");
  return {ok, detail.str()};
}

// ---- 3 ---------------------------------------------------------------------

Outcome overlap_averaging() {
  const double fs = 128.0;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0, 1);
  Recording rec;
  rec.id = "fixture";
  rec.fs = fs;
  rec.channel_labels = longitudinal_bipolar().derivation_names();
  const long n = std::lround(300.5 * fs);  // ragged end exercises the tail window
  rec.samples.resize(18, n);
  for (Eigen::Index i = 0; i < rec.samples.size(); ++i) rec.samples.data()[i] = nd(rng);
  auto score = [](const SignalMatrix& w) { return 1.0 / (1.0 + std::exp(-w.mean() * 10)); };

  double worst = 0;
  for (double target : {8.0, 16.0}) {
    for (double stride : {1.0, 2.0, 4.0}) {
      WindowSpec spec{4, target, 4, fs};
      auto got = sliding_infer(rec, spec, score, stride, 1);
      const long T = std::lround(target * fs), step = std::lround(stride * fs);
      std::vector<long> starts;
      for (long s = 0; s + T <= n; s += step) starts.push_back(s);
      if (starts.back() + T < n) starts.push_back(n - T);
      const long secs = static_cast<long>(std::ceil(n / fs));
      std::vector<double> sum(secs, 0);
      std::vector<int> cnt(secs, 0);
      for (long s : starts) {
        SignalMatrix w;
        extract_window(rec, s, spec, w);
        const double p = score(w);
        for (long i = 0; i < secs; ++i) {
          if (std::min<double>((i + 1) * fs, s + T) > std::max<double>(i * fs, s)) {
            sum[i] += p;
            ++cnt[i];
          }
        }
      }
      if (static_cast<long>(got.values.size()) != secs) return {false, "trace length differs"};
      for (long i = 0; i < secs; ++i) worst = std::max(worst, std::abs(got.values[i] - sum[i] / cnt[i]));
    }
  }
  return {worst <= 1e-12, fmt("max deviation %.2e over 6 stride/target pairs", worst)};
}

// ---- 4 ---------------------------------------------------------------------

using Iv = std::vector<std::pair<double, double>>;

std::vector<AnnotationEvent> as_events(const Iv& iv) {
  std::vector<AnnotationEvent> out;
  for (auto [a, b] : iv) out.push_back({a, b - a, EventLabel::seizure});
  return out;
}

Outcome scoring_correctness() {
  std::mt19937 rng(11);
  auto random_iv = [&](double duration, int max_n) {
    Iv out;
    double t = 0;
    const int k = static_cast<int>(rng() % (max_n + 1));
    for (int j = 0; j < k; ++j) {
      t += 0.5 * (1 + rng() % 300);
      const double len = 0.5 * (1 + rng() % 150);
      if (t + len > duration) break;
      out.push_back({t, t + len});
      t += len;
    }
    return out;
  };
  auto covered = [](const Iv& iv, double t) {
    for (auto [a, b] : iv) {
      if (t >= a && t < b) return true;
    }
    return false;
  };
  int fixtures = 0, mismatches = 0;
  for (int trial = 0; trial < 1500; ++trial) {
    const double D = 0.5 * (300 + rng() % 8000);
    auto h = random_iv(D, 6), r = random_iv(D, 4);
    EventList hyp{"r", as_events(h), D};
    AnnotationSet ref{"r", as_events(r)};
    // sample oracle: quarter-second probes inside each cell
    Counts so;
    for (long i = 0; i < static_cast<long>(std::ceil(D)); ++i) {
      bool ph = false, pr = false;
      for (double off = 0.25; off < 1.0; off += 0.5) {
        if (i + off < D) {
          ph |= covered(h, i + off);
          pr |= covered(r, i + off);
        }
      }
      so.tp += ph && pr;
      so.fp += ph && !pr;
      so.fn += !ph && pr;
    }
    // event oracle: quarter-second probes along each hypothesis
    auto touches = [](std::pair<double, double> he, std::pair<double, double> re) {
      for (double t = he.first + 0.25; t < he.second; t += 0.5) {
        if (t >= re.first - 30 && t < re.second + 60) return true;
      }
      return false;
    };
    Counts eo;
    for (auto re : r) {
      bool hit = false;
      for (auto he : h) hit |= touches(he, re);
      (hit ? eo.tp : eo.fn)++;
    }
    for (auto he : h) {
      bool hit = false;
      for (auto re : r) hit |= touches(he, re);
      (hit ? eo.tp_hyp : eo.fp)++;
    }
    mismatches += !(score_samples(hyp, ref, D) == so) + !(score_events(hyp, ref, D) == eo);
    ++fixtures;
  }

  bool examples = true;
  {
    Iv iv = {{10, 40}, {100, 130}};
    auto rep = score_recording({"r", as_events(iv), 600}, {"r", as_events(iv)}, 600);
    examples &= rep.sample.f1 == 1.0 && rep.sample.sensitivity == 1.0 && rep.sample.precision == 1.0;
    auto c = score_samples({"r", as_events({{20, 120}}), 1000}, {"r", as_events({{0, 100}})}, 1000);
    auto m = sample_metrics(c);
    examples &= std::abs(m.sensitivity - 0.8) < 1e-15 && std::abs(m.precision - 0.8) < 1e-15 &&
                std::abs(m.f1 - 0.8) < 1e-15;
    examples &= score_events({"r", as_events({{95, 110}}), 3600}, {"r", as_events({{100, 130}})}, 3600).tp == 1;
    auto twelve = score_recording({"r", as_events({{500, 510}}), 43200}, {"r", {}}, 43200);
    examples &= twelve.event_counts.fp == 1 && twelve.event.fp_per_day == 2.0;
    auto empty = score_recording({"r", {}, 3600}, {"r", as_events({{100, 200}})}, 3600);
    examples &= empty.event.sensitivity == 0.0 && empty.event.precision == 0.0 && empty.event.fp_per_day == 0.0;
    auto pooled = aggregate({make_report({1, 0, 1, 0}, {}, 10), make_report({1, 2, 0, 0}, {}, 10)});
    examples &= pooled.sample.sensitivity == 2.0 / 3.0 && pooled.sample.precision == 0.5;
  }
  return {mismatches == 0 && examples && fixtures >= 1000,
          fmt("%d random fixtures, %d mismatches; hand examples %s", fixtures, mismatches, examples ? "exact" : "WRONG")};
}

// ---- 5 ---------------------------------------------------------------------

Outcome sampler_contract() {
  std::vector<TrainIndexEntry> idx;
  std::mt19937 rng(4);
  for (int p = 0; p < 6; ++p) {
    for (int r = 0; r < 2; ++r) {
      TrainIndexEntry e;
      e.recording_id = fmt("p%d_r%d", p, r);
      e.patient_id = fmt("p%d", p);
      e.duration_s = 3600.0 * (1 + rng() % 3);
      for (double t = 300 + rng() % 600; t + 120 < e.duration_s; t += 900 + rng() % 1800) {
        e.seizures.push_back({t, 20.0 + static_cast<double>(rng() % 90), EventLabel::seizure});
      }
      idx.push_back(e);
    }
  }
  EpochSampler sampler(idx, WindowSpec{32, 16, 32});
  SamplerConfig cfg{60000, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 2024};
  const auto a = sampler.sample_epoch(cfg, 0);
  const auto b = sampler.sample_epoch(cfg, 0);
  std::array<long, 3> per_cat{};
  std::map<std::pair<int, std::string>, long> per_patient;
  for (const auto& s : a) {
    ++per_cat[static_cast<size_t>(s.category)];
    ++per_patient[{static_cast<int>(s.category), s.patient_id}];
  }
  long spread = 0;
  for (int c = 0; c < 3; ++c) {
    long lo = 1L << 40, hi = 0;
    for (const auto& [key, n] : per_patient) {
      if (key.first != c) continue;
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    spread = std::max(spread, hi - lo);
  }
  bool ok = a.size() == 60000 && a == b && spread <= 1;
  for (long n : per_cat) ok &= std::abs(n - 20000) <= 1;
  return {ok, fmt("counts %ld/%ld/%ld, per-patient spread %ld, repeat %s", per_cat[0], per_cat[1], per_cat[2], spread,
                  a == b ? "identical" : "DIFFERENT")};
}

// ---- shared by 6-8 -----------------------------------------------------------

struct Corpus {
  std::vector<LoadedRecording> train, validation, test;
};

Corpus make_corpus(const SyntheticSpec& spec, const fs::path& dir) {
  const auto m = write_synthetic_corpus(spec, dir);
  Corpus c;
  c.train = load_split(m, "train", PreprocessConfig{});
  c.validation = load_split(m, "validation", PreprocessConfig{});
  c.test = load_split(m, "test", PreprocessConfig{});
  return c;
}

ScoreReport evaluate(const std::vector<LoadedRecording>& recs, const std::function<ProbabilityTrace(const Recording&)>& infer,
                     const TrainConfig& tc) {
  std::vector<ScoreReport> reports;
  for (const auto& r : recs) {
    const auto hyp = binarize_and_extract(infer(r.recording), tc.threshold, tc.hygiene);
    reports.push_back(score_recording(hyp, r.annotations, r.recording.duration_s(), tc.tolerance));
  }
  return aggregate(reports, "test");
}

model::Model train_and_load(const Corpus& c, const TrainConfig& tc, const model::ModelConfig& mc, const fs::path& dir,
                            model::Precision precision) {
  TrainingSet train(c.train, mc.window);
  const auto res = train_run(train, c.validation, tc, mc, dir, false, [&](const EpochRecord& r) {
    log(fmt("epoch %2d loss %.4f val F1 %.3f FP/day %.1f%s", r.epoch, r.loss, r.val_f1, r.val_fp_per_day,
            r.improved ? " *" : ""));
  });
  auto ck = model::load_checkpoint(dir / "best.ckpt");
  return model::Model(ck.config, std::move(ck.params), precision);
}

// ---- 6 ---------------------------------------------------------------------

Outcome synthetic_end_to_end() {
  const auto t0 = Clock::now();
  SyntheticSpec spec;  // 8 patients x 30 min, 6 seizures/h
  spec.seed = 3;
  const auto corpus = make_corpus(spec, work_dir / "c6" / "data");
  long seizures = 0;
  for (const auto* split : {&corpus.train, &corpus.validation, &corpus.test}) {
    for (const auto& r : *split) seizures += static_cast<long>(r.annotations.events.size());
  }
  TrainConfig tc;
  tc.epochs = 12;
  tc.batch_size = 16;
  tc.segments_per_epoch = 192;
  tc.val_stride_s = 8;
  tc.val_precision = model::Precision::float32;
  tc.seed = 0;
  const model::ModelConfig mc;  // default model
  const auto m = train_and_load(corpus, tc, mc, work_dir / "c6" / "run", model::Precision::float32);
  const auto rep = evaluate(corpus.test, [&](const Recording& r) { return sliding_infer(r, m, 2.0); }, tc);
  const double elapsed = seconds_since(t0);
  return {rep.event.f1 >= 0.8 && elapsed < 1800.0,
          fmt("%ld seizures in corpus, test event F1 %.3f (sens %.2f, prec %.2f) at 0.85, %.0f s total", seizures,
              rep.event.f1, rep.event.sensitivity, rep.event.precision, elapsed)};
}

// ---- 7 and 8 -----------------------------------------------------------------

// Smaller than the default network so that 12 training runs fit the budget.
model::ModelConfig context_model(const WindowSpec& w) {
  model::ModelConfig c;
  c.embed_dim = 32;
  c.n_encoder_layers = 2;
  c.n_heads = 4;
  c.ffn_dim = 64;
  c.cross_channel_heads = 2;
  c.window = w;
  return c;
}

TrainConfig context_train_config(uint64_t seed) {
  TrainConfig tc;
  tc.epochs = 12;
  tc.batch_size = 16;
  tc.segments_per_epoch = 384;
  tc.val_stride_s = 4;
  tc.val_precision = model::Precision::float32;
  tc.seed = seed;
  return tc;
}

struct ContextResults {
  // [config][seed]
  std::vector<std::vector<ScoreReport>> individual;
  std::vector<ScoreReport> ensemble;  // per seed, over the three context configs
  bool done = false;
};

const std::vector<WindowSpec> kContextConfigs = {{0, 16, 0}, {64, 16, 0}, {0, 16, 64}, {32, 16, 32}};
const std::vector<std::string> kContextNames = {"(0,16,0)", "(64,16,0)", "(0,16,64)", "(32,16,32)"};

ContextResults& context_experiment() {
  static ContextResults res;
  if (res.done) return res;
  SyntheticSpec spec = SyntheticSpec::context_task();
  spec.seed = 17;
  const auto corpus = make_corpus(spec, work_dir / "c7" / "data");
  res.individual.assign(kContextConfigs.size(), {});
  InferenceConfig ic;
  ic.stride_s = 2.0;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    const auto tc = context_train_config(seed);
    ic.threshold = tc.threshold;
    ic.merge_gap_s = tc.hygiene.merge_gap_s;
    ic.max_event_s = tc.hygiene.max_event_s;
    std::vector<model::Model> members;
    for (size_t k = 0; k < kContextConfigs.size(); ++k) {
      const auto t0 = Clock::now();
      const auto dir = work_dir / "c7" / fmt("seed%d_cfg%zu", static_cast<int>(seed), k);
      auto m = train_and_load(corpus, tc, context_model(kContextConfigs[k]), dir, model::Precision::float32);
      auto rep = evaluate(corpus.test, [&](const Recording& r) { return sliding_infer(r, m, ic); }, tc);
      log(fmt("seed %d %-10s F1 %.3f FP/day %.1f (%.0f s)", static_cast<int>(seed), kContextNames[k].c_str(),
              rep.event.f1, rep.event.fp_per_day, seconds_since(t0)));
      res.individual[k].push_back(rep);
      if (k > 0) members.push_back(std::move(m));
    }
    auto rep = evaluate(corpus.test, [&](const Recording& r) { return run_ensemble_configs(r, members, ic).trace; }, tc);
    log(fmt("seed %d ensemble   F1 %.3f FP/day %.1f", static_cast<int>(seed), rep.event.f1, rep.event.fp_per_day));
    res.ensemble.push_back(rep);
  }
  res.done = true;
  return res;
}

double mean_of(const std::vector<ScoreReport>& v, double (*get)(const ScoreReport&)) {
  double s = 0;
  for (const auto& r : v) s += get(r);
  return s / static_cast<double>(v.size());
}

double f1_of(const ScoreReport& r) { return r.event.f1; }
double fpd_of(const ScoreReport& r) { return r.event.fp_per_day; }

Outcome context_effect() {
  auto& res = context_experiment();
  const double base = mean_of(res.individual[0], f1_of);
  bool ok = true;
  std::string detail = fmt("mean F1 %s %.3f", kContextNames[0].c_str(), base);
  for (size_t k = 1; k < kContextConfigs.size(); ++k) {
    const double f = mean_of(res.individual[k], f1_of);
    ok &= f > base;
    detail += fmt(", %s %.3f", kContextNames[k].c_str(), f);
  }
  return {ok, detail};
}

Outcome ensembling_effect() {
  auto& res = context_experiment();
  double best = 1e300;
  std::string best_name;
  for (size_t k = 1; k < kContextConfigs.size(); ++k) {
    const double f = mean_of(res.individual[k], fpd_of);
    if (f < best) {
      best = f;
      best_name = kContextNames[k];
    }
  }
  const double ens = mean_of(res.ensemble, fpd_of);
  return {ens <= best, fmt("mean FP/day ensemble %.2f, best single %s %.2f (ensemble F1 %.3f)", ens, best_name.c_str(),
                           best, mean_of(res.ensemble, f1_of))};
}

// ---- 9 ---------------------------------------------------------------------

Outcome throughput() {
  const auto out = work_dir / "c9";
  const std::string cmd = std::string(LOOKAROUND_CLI) + " bench --stride 2 --out " + out.string() + " > " +
                          (work_dir / "c9.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "bench command failed"};
  std::ifstream in(out / "bench.json");
  const auto j = nlohmann::json::parse(in);
  const double t = j.at("inference_seconds").get<double>();
  const long windows = j.at("window_count").get<long>();
  const int threads = j.at("threads").get<int>();
  return {t < 60.0 && windows == 1793,
          fmt("%ld windows in %.1f s on %d thread(s), real-time factor %.0f (preprocessing %.1f s, not included)",
              windows, t, threads, 3600.0 / t, j.at("preprocess_seconds").get<double>())};
}

// ---- 10 --------------------------------------------------------------------

Outcome checkpoint_round_trip() {
  const model::ModelConfig cfg;
  const auto params = model::init_params(cfg, 42);
  model::save_checkpoint(work_dir / "c10.ckpt", {cfg, params, {}});
  auto ck = model::load_checkpoint(work_dir / "c10.ckpt");
  SignalMatrix x(cfg.n_channels, cfg.window.total_samples());
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0, 40);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  bool same = true;
  for (auto precision : {model::Precision::float64, model::Precision::float32}) {
    const auto a = model::Model(cfg, params, precision).forward(x);
    const auto b = model::Model(ck.config, ck.params, precision).forward(x);
    same &= std::memcmp(a.logits.data(), b.logits.data(), sizeof(double) * a.logits.size()) == 0;
    same &= a.logits.size() == b.logits.size();
  }
  return {same, same ? "logits bitwise identical in float64 and float32" : "logits differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string work;
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
  app.add_option("--work", work, "scratch directory (default: fresh temp dir, removed afterwards)");
  app.add_flag("--verbose", verbose, "progress on stderr");
  CLI11_PARSE(app, argc, argv);

  const bool keep = !work.empty();
  work_dir = keep ? fs::path(work) : fs::temp_directory_path() / fmt("lookaround-acceptance-%d", ::getpid());
  fs::create_directories(work_dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient check", gradient_check},
      {"preprocessing fidelity", preprocessing_fidelity},
      {"overlap averaging", overlap_averaging},
      {"scoring", scoring_correctness},
      {"sampler contract", sampler_contract},
      {"synthetic end-to-end", synthetic_end_to_end},
      {"context-window effect", context_effect},
      {"ensembling effect", ensembling_effect},
      {"throughput", throughput},
      {"checkpoint round trip", checkpoint_round_trip},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2d %-24s %s (%.0f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  if (!keep) fs::remove_all(work_dir);
  return failed == 0 ? 0 : 1;
}
