#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "lookaround/inference.hpp"
#include "lookaround/model/gradcheck.hpp"
#include "test_util.hpp"

using namespace lookaround;
using model::ModelConfig;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

ProbabilityTrace trace_of(std::vector<double> v, std::string id = "r") {
  ProbabilityTrace t;
  t.recording_id = std::move(id);
  t.duration_s = static_cast<double>(v.size());
  t.coverage.assign(v.size(), 1);
  t.values = std::move(v);
  return t;
}

// Deterministic stand-in for a model: depends on the window content only.
double content_score(const SignalMatrix& w) {
  const double m = w.mean();
  return 1.0 / (1.0 + std::exp(-m));
}

// Per-second brute force: every start on the stride grid plus an end-aligned
// tail, each target spread over the seconds it touches.
std::vector<double> brute_force_trace(const Recording& rec, const WindowSpec& spec, double stride_s,
                                      std::vector<int>* cover = nullptr) {
  const long n = rec.n_samples();
  const long T = std::lround(spec.target_s * spec.fs);
  const long step = std::lround(stride_s * spec.fs);
  std::vector<long> starts;
  for (long s = 0; s + T <= n; s += step) starts.push_back(s);
  if (starts.back() + T != n) starts.push_back(n - T);
  const long secs = (n + 127) / 128;
  std::vector<double> sum(secs, 0.0);
  std::vector<int> cnt(secs, 0);
  for (long s : starts) {
    SignalMatrix w;
    extract_window(rec, s, spec, w);
    const double p = content_score(w);
    for (long i = 0; i < secs; ++i) {
      const double a = std::max<double>(i * 128, s), b = std::min<double>((i + 1) * 128, s + T);
      if (b > a) {
        sum[i] += p;
        ++cnt[i];
      }
    }
  }
  for (long i = 0; i < secs; ++i) sum[i] /= cnt[i];
  if (cover) *cover = cnt;
  return sum;
}

ModelConfig infer_config() {
  ModelConfig c = model::tiny_config();
  c.patch_len = 32;
  c.dropout = 0.0;
  c.window = WindowSpec{4, 16, 4, 128};
  return c;
}

}  // namespace

TEST(Windows, InteriorCoverageIsEight) {
  auto rec = testutil::random_montaged(120, 1);
  auto t = sliding_infer(rec, WindowSpec{0, 16, 0}, [](const SignalMatrix&) { return 0.3; }, 2.0, 1);
  ASSERT_EQ(t.values.size(), 120u);
  for (size_t i = 16; i < 104; ++i) EXPECT_EQ(t.coverage[i], 8) << i;
  EXPECT_EQ(t.coverage[0], 1);
  for (double v : t.values) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(Windows, StartsAndErrors) {
  WindowSpec spec{0, 16, 0};
  auto s = window_starts(128 * 37, spec, 2.0);
  EXPECT_EQ(s.front(), 0);
  EXPECT_EQ(s.back(), 128 * 21);  // end-aligned tail
  EXPECT_EQ(s[s.size() - 2], 128 * 20);
  EXPECT_EQ(count_windows(3600.0, spec, 2.0), 1793);
  EXPECT_EQ(code_of([&] { window_starts(128 * 10, spec, 2.0); }), ErrorCode::TooShortRecording);
  EXPECT_EQ(code_of([&] { window_starts(128 * 60, spec, 3.0); }), ErrorCode::InvalidConfig);
}

TEST(Accumulate, MatchesBruteForce) {
  for (double target : {8.0, 16.0}) {
    for (double stride : {1.0, 2.0, 4.0}) {
      // 5 min plus a ragged tail so the end-aligned window matters
      auto rec = testutil::random_montaged(300.0 + 0.5, 17, 1.0);
      WindowSpec spec{3, target, 5, 128};
      std::vector<int> cover;
      auto want = brute_force_trace(rec, spec, stride, &cover);
      auto got = sliding_infer(rec, spec, content_score, stride, 1);
      ASSERT_EQ(got.values.size(), want.size());
      EXPECT_EQ(got.coverage, cover);
      for (size_t i = 0; i < want.size(); ++i) {
        ASSERT_NEAR(got.values[i], want[i], 1e-12) << "target " << target << " stride " << stride << " s " << i;
      }
    }
  }
}

TEST(Accumulate, ModelPathMatchesGenericPath) {
  auto cfg = infer_config();
  auto m = model::Model::initialized(cfg, 3);
  auto rec = testutil::random_montaged(150, 8);
  auto generic = sliding_infer(rec, cfg.window, [&](const SignalMatrix& w) { return m.seizure_probability(w); }, 2.0, 1);
  auto shared = sliding_infer(rec, m, 2.0, 1, true);
  auto plain = sliding_infer(rec, m, 2.0, 1, false);
  ASSERT_EQ(shared.values.size(), generic.values.size());
  for (size_t i = 0; i < generic.values.size(); ++i) {
    EXPECT_NEAR(plain.values[i], generic.values[i], 1e-12);
    EXPECT_NEAR(shared.values[i], generic.values[i], 1e-9);
  }
  EXPECT_EQ(shared.coverage, generic.coverage);
}

TEST(Accumulate, ThreadCountDoesNotMatter) {
  auto cfg = infer_config();
  auto m = model::Model::initialized(cfg, 4);
  auto rec = testutil::random_montaged(90, 9);
  auto one = sliding_infer(rec, m, 2.0, 1);
  auto many = sliding_infer(rec, m, 2.0, 3);
  EXPECT_EQ(one.values, many.values);
}

TEST(Accumulate, ContextConfigsAccepted) {
  auto rec = testutil::random_montaged(200, 10);
  for (WindowSpec spec : {WindowSpec{64, 16, 0}, WindowSpec{0, 16, 64}, WindowSpec{32, 16, 32}}) {
    auto t = sliding_infer(rec, spec, content_score, 2.0, 1);
    EXPECT_EQ(t.values.size(), 200u);
    for (double v : t.values) EXPECT_TRUE(v > 0.0 && v < 1.0);
  }
}

TEST(Ensemble, MeanAndPermutation) {
  auto e = ensemble({trace_of({0.2}), trace_of({0.4}), trace_of({0.9})});
  EXPECT_NEAR(e.values[0], 0.5, 1e-15);

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ProbabilityTrace> ts;
  for (int k = 0; k < 5; ++k) {
    std::vector<double> v(50);
    for (auto& x : v) x = u(rng);
    ts.push_back(trace_of(v));
  }
  auto base = ensemble(ts);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(ts.begin(), ts.end(), rng);
    auto again = ensemble(ts);
    for (size_t i = 0; i < 50; ++i) EXPECT_NEAR(again.values[i], base.values[i], 1e-15);
  }
}

TEST(Ensemble, LengthMismatch) {
  EXPECT_EQ(code_of([] { ensemble({trace_of({0.1, 0.2}), trace_of({0.1})}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] { ensemble({trace_of({0.1}, "a"), trace_of({0.1}, "b")}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] { ensemble({}); }), ErrorCode::LengthMismatch);
}

TEST(Ensemble, IdenticalMembersReproduceSingle) {
  auto cfg = infer_config();
  auto m = model::Model::initialized(cfg, 12);
  auto rec = testutil::random_montaged(80, 13);
  InferenceConfig ic;
  ic.threads = 1;
  ic.threshold = 0.5;
  auto single = sliding_infer(rec, m, ic);
  auto r = run_ensemble_configs(rec, {m, m, m}, ic);
  ASSERT_EQ(r.members.size(), 3u);
  for (size_t i = 0; i < single.values.size(); ++i) EXPECT_NEAR(r.trace.values[i], single.values[i], 1e-15);
  EXPECT_EQ(r.events, binarize_and_extract(single, ic));
}

TEST(Binarize, MergesAcrossGap) {
  std::vector<double> v(100, 0.1);
  for (int i = 10; i <= 20; ++i) v[i] = 0.9;
  for (int i = 25; i <= 30; ++i) v[i] = 0.9;
  auto ev = binarize_and_extract(trace_of(v), 0.85, {90, 300});
  ASSERT_EQ(ev.events.size(), 1u);
  EXPECT_EQ(ev.events[0].onset_s, 10.0);
  EXPECT_EQ(ev.events[0].end_s(), 31.0);
  EXPECT_EQ(ev.duration_s, 100.0);

  auto apart = binarize_and_extract(trace_of(v), 0.85, {0, 300});
  EXPECT_EQ(apart.events.size(), 2u);
}

TEST(Binarize, ThresholdIsInclusive) {
  auto ev = binarize_and_extract(trace_of({0.0, 0.85, 0.0}), 0.85);
  ASSERT_EQ(ev.events.size(), 1u);
  EXPECT_EQ(ev.events[0].onset_s, 1.0);
  EXPECT_TRUE(binarize_and_extract(trace_of(std::vector<double>(500, 0.0)), 0.85).events.empty());
  EXPECT_EQ(code_of([] { binarize_and_extract(trace_of({0.5}), 1.0); }), ErrorCode::InvalidConfig);
}

TEST(Binarize, LongEventsAreSplit) {
  auto ev = binarize_and_extract(trace_of(std::vector<double>(700, 0.95)), 0.85, {90, 300});
  ASSERT_EQ(ev.events.size(), 3u);
  EXPECT_EQ(ev.events[0].end_s(), 300.0);
  EXPECT_EQ(ev.events[1].end_s(), 600.0);
  EXPECT_EQ(ev.events[2].end_s(), 700.0);
}

TEST(Binarize, MatchesCellwiseOracle) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const size_t n = 50 + rng() % 800;
    std::vector<double> v(n);
    // blocky traces so runs and gaps of all sizes appear
    double cur = 0.0;
    for (auto& x : v) {
      if (rng() % 12 == 0) cur = (rng() % 1000) / 1000.0;
      x = cur;
    }
    const double thr = 0.05 + (rng() % 90) / 100.0;
    const double gap = static_cast<double>(rng() % 120);
    const double cap = 5.0 + static_cast<double>(rng() % 300);

    // oracle: close gaps cell by cell, then cut runs into cap-sized pieces
    std::vector<char> on(n);
    for (size_t i = 0; i < n; ++i) on[i] = v[i] >= thr;
    long last_end = -1;
    for (size_t i = 0; i < n; ++i) {
      if (!on[i]) continue;
      if (last_end >= 0 && static_cast<double>(i) - last_end < gap) {
        for (long k = last_end; k < static_cast<long>(i); ++k) on[k] = 1;
      }
      size_t j = i;
      while (j < n && v[j] >= thr) ++j;
      last_end = static_cast<long>(j);
      i = j - 1;
    }
    std::vector<std::pair<double, double>> want;
    for (size_t i = 0; i < n;) {
      if (!on[i]) {
        ++i;
        continue;
      }
      size_t j = i;
      while (j < n && on[j]) ++j;
      for (double a = static_cast<double>(i); a < static_cast<double>(j); a += cap) {
        want.push_back({a, std::min(a + cap, static_cast<double>(j))});
      }
      i = j;
    }
    auto got = binarize_and_extract(trace_of(v), thr, {gap, cap});
    ASSERT_EQ(got.events.size(), want.size()) << trial;
    for (size_t k = 0; k < want.size(); ++k) {
      EXPECT_NEAR(got.events[k].onset_s, want[k].first, 1e-9);
      EXPECT_NEAR(got.events[k].end_s(), want[k].second, 1e-9);
    }
  }
}

TEST(Binarize, HigherThresholdNeverAddsPositiveSeconds) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(600);
  for (auto& x : v) x = u(rng);
  auto positive = [&](double thr) {
    auto ev = binarize_and_extract(trace_of(v), thr, {0, 1e9});
    double s = 0;
    for (auto& e : ev.events) s += e.duration_s;
    return s;
  };
  double prev = 1e18;
  for (double thr = 0.05; thr < 1.0; thr += 0.05) {
    const double p = positive(thr);
    EXPECT_LE(p, prev);
    prev = p;
  }
}

TEST(TraceCsv, RoundTrip) {
  testutil::TempDir dir("trace");
  auto rec = testutil::random_montaged(40, 2);
  auto t = sliding_infer(rec, WindowSpec{0, 16, 0}, content_score, 2.0, 1);
  write_trace_csv(dir / "t.csv", t);
  auto back = read_trace_csv(dir / "t.csv", t.recording_id, t.duration_s);
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(back.coverage, t.coverage);
}

TEST(Errors, ShortRecording) {
  auto rec = testutil::random_montaged(10, 2);
  EXPECT_EQ(code_of([&] { sliding_infer(rec, WindowSpec{0, 16, 0}, content_score); }), ErrorCode::TooShortRecording);
  auto m = model::Model::initialized(infer_config(), 1);
  EXPECT_EQ(code_of([&] { sliding_infer(rec, m, 2.0, 1); }), ErrorCode::TooShortRecording);
}
