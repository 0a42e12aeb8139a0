#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "lookaround/model/gradcheck.hpp"
#include "lookaround/training.hpp"
#include "test_util.hpp"

using namespace lookaround;
using model::Mat;

namespace {

model::ModelConfig train_config() {
  model::ModelConfig c = model::tiny_config();
  c.patch_len = 32;
  c.window = WindowSpec{1, 2, 1, 128};
  c.dropout = 0.0;
  return c;
}

LoadedRecording make_recording(const std::string& id, const std::string& patient, double seconds,
                               std::vector<std::pair<double, double>> seizures, uint64_t seed) {
  LoadedRecording r;
  r.entry.id = id;
  r.entry.patient_id = patient;
  r.recording = testutil::random_montaged(seconds, seed);
  r.recording.id = id;
  r.recording.patient_id = patient;
  r.annotations.recording_id = id;
  for (auto [a, b] : seizures) {
    r.annotations.events.push_back({a, b - a, EventLabel::seizure});
    // a 3 Hz rhythm makes the seizure learnable
    for (long k = std::lround(a * 128); k < std::lround(b * 128); ++k) {
      r.recording.samples.col(k).array() += 120.0 * std::sin(2 * M_PI * 3.0 * k / 128.0);
    }
  }
  return r;
}

std::vector<LoadedRecording> train_recordings() {
  return {make_recording("a", "A", 120, {{30, 50}}, 1), make_recording("b", "B", 120, {{60, 90}}, 2)};
}

TrainConfig small_train_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 8;
  c.segments_per_epoch = 24;
  c.learning_rate = 1e-3;
  c.seed = 5;
  c.val_stride_s = 1.0;
  c.threads = 1;
  return c;
}

bool same_params(const model::ModelParams& a, const model::ModelParams& b) {
  bool same = true;
  model::for_each_tensor_pair(a, b, [&](const std::string&, const Mat& x, const Mat& y) { same = same && x == y; });
  return same;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ProbabilityTrace trace_with(const LoadedRecording& r, std::vector<std::pair<long, long>> on) {
  ProbabilityTrace t;
  t.recording_id = r.recording.id;
  t.duration_s = r.recording.duration_s();
  t.values.assign(static_cast<size_t>(std::ceil(t.duration_s)), 0.0);
  t.coverage.assign(t.values.size(), 1);
  for (auto [a, b] : on)
    for (long s = a; s < b; ++s) t.values[static_cast<size_t>(s)] = 0.95;
  return t;
}

}  // namespace

TEST(Optimizer, ZeroGradientZeroDecayIsIdentity) {
  auto s = TrainState::fresh(train_config(), 3);
  const auto before = s.params;
  auto g = model::zeros_like(train_config());
  TrainConfig c;
  c.weight_decay = 0;
  adamw_step(s, g, c);
  EXPECT_TRUE(same_params(s.params, before));
}

TEST(Optimizer, LearningRateZero) {
  TrainingSet data(train_recordings(), train_config().window);
  auto c = small_train_config();
  c.learning_rate = 0;
  c.weight_decay = 0;
  auto s = TrainState::fresh(train_config(), 3);
  const auto before = s.params;
  train_epoch(s, data, c);
  EXPECT_TRUE(same_params(s.params, before));

  c.weight_decay = 1e-3;
  auto s2 = TrainState::fresh(train_config(), 3);
  train_epoch(s2, data, c);
  const double shrink = std::pow(1 - 1e-3, static_cast<double>(s2.step));
  EXPECT_EQ(s2.step, 3);
  model::for_each_tensor_pair(s2.params, before, [&](const std::string& n, const Mat& a, const Mat& b) {
    EXPECT_LE((a - b * shrink).cwiseAbs().maxCoeff(), 1e-15 + 1e-12 * b.cwiseAbs().maxCoeff()) << n;
  });
}

TEST(Optimizer, StepReducesBatchLoss) {
  const auto cfg = train_config();
  auto recs = train_recordings();
  auto s = TrainState::fresh(cfg, 4);
  std::vector<SignalMatrix> windows;
  std::vector<int> labels;
  for (int i = 0; i < 6; ++i) {
    SignalMatrix w;
    const long start = (i % 2 == 0 ? 35 : 100) * 128 + i * 64;
    extract_window(recs[0].recording, start, cfg.window, w);
    windows.push_back(w);
    labels.push_back(i % 2 == 0 ? 1 : 0);
  }
  auto batch_loss = [&](const model::ModelParams& p, model::ModelParams* g) {
    double l = 0;
    auto scratch = model::zeros_like(cfg);
    for (size_t i = 0; i < windows.size(); ++i) {
      l += model::backward(windows[i], labels[i], 0.1, p, cfg, g ? *g : scratch, model::Mode::train, 0,
                           1.0 / static_cast<double>(windows.size()));
    }
    return l / static_cast<double>(windows.size());
  };
  auto g = model::zeros_like(cfg);
  const double before = batch_loss(s.params, &g);
  TrainConfig c;
  c.learning_rate = 1e-4;
  adamw_step(s, g, c);
  EXPECT_LT(batch_loss(s.params, nullptr), before);
}

TEST(TrainEpoch, DeterministicAndThreadIndependent) {
  TrainingSet data(train_recordings(), train_config().window);
  auto c = small_train_config();
  c.segments_per_epoch = 30;  // last batch is partial
  auto a = TrainState::fresh(train_config(), 1), b = TrainState::fresh(train_config(), 1);
  const double la = train_epoch(a, data, c);
  c.threads = 3;
  const double lb = train_epoch(b, data, c);
  EXPECT_EQ(la, lb);
  EXPECT_TRUE(same_params(a.params, b.params));
  EXPECT_TRUE(same_params(a.v, b.v));
  EXPECT_TRUE(std::isfinite(la));
}

TEST(TrainEpoch, DropoutSeedsReproducible) {
  auto cfg = train_config();
  cfg.dropout = 0.2;
  TrainingSet data(train_recordings(), cfg.window);
  auto c = small_train_config();
  auto a = TrainState::fresh(cfg, 1), b = TrainState::fresh(cfg, 1);
  EXPECT_EQ(train_epoch(a, data, c), train_epoch(b, data, c));
  EXPECT_TRUE(same_params(a.params, b.params));
}

TEST(TrainEpoch, NonFiniteLossNamesSegments) {
  TrainingSet data(train_recordings(), train_config().window);
  auto s = TrainState::fresh(train_config(), 1);
  s.params.patch_weight(0, 0) = std::numeric_limits<double>::infinity();
  try {
    train_epoch(s, data, small_train_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
    EXPECT_NE(std::string(e.what()).find("@"), std::string::npos);
  }
}

TEST(Selection, FirstEpochAlwaysBestAndTiesKeepBest) {
  auto val = std::vector<LoadedRecording>{make_recording("v", "V", 300, {{100, 140}}, 9)};
  auto s = TrainState::fresh(train_config(), 1);
  auto c = small_train_config();
  auto miss = [&](const LoadedRecording& r) { return trace_with(r, {}); };
  s.epoch = 1;
  auto m1 = validate_and_select(s, val, c, {}, miss);
  EXPECT_EQ(m1.f1, 0.0);
  EXPECT_EQ(s.best_epoch, 1);
  s.epoch = 2;
  validate_and_select(s, val, c, {}, miss);
  EXPECT_EQ(s.best_epoch, 1);
}

TEST(Selection, ScriptedBestEpoch) {
  testutil::TempDir dir("select");
  auto val = std::vector<LoadedRecording>{make_recording("v", "V", 600, {{100, 140}, {400, 420}}, 9)};
  auto s = TrainState::fresh(train_config(), 1);
  auto c = small_train_config();
  // epoch 1: one of two found; 2: both found, no FP; 3: both plus an FP; 4: both found again
  std::vector<std::vector<std::pair<long, long>>> script = {
      {{100, 130}}, {{105, 135}, {401, 415}}, {{105, 135}, {401, 415}, {250, 260}}, {{100, 140}, {400, 420}}};
  std::vector<double> best_seq;
  for (size_t e = 0; e < script.size(); ++e) {
    s.epoch = static_cast<int>(e) + 1;
    s.params.classifier_bias(0, 0) = static_cast<double>(e);  // mark the checkpoint
    validate_and_select(s, val, c, dir.path(), [&](const LoadedRecording& r) { return trace_with(r, script[e]); });
    best_seq.push_back(s.best_f1);
  }
  EXPECT_EQ(s.best_epoch, 2);
  EXPECT_EQ(s.best_f1, 1.0);
  EXPECT_TRUE(std::is_sorted(best_seq.begin(), best_seq.end()));
  auto ck = model::load_checkpoint(dir / checkpoint_name(2));
  EXPECT_EQ(ck.params.classifier_bias(0, 0), 1.0);
  EXPECT_FALSE(std::filesystem::exists(dir / checkpoint_name(4)));
}

TEST(Selection, EmptyValidationSet) {
  auto s = TrainState::fresh(train_config(), 1);
  try {
    validate_and_select(s, {}, small_train_config(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyValidationSet);
  }
}

TEST(State, SaveLoadRoundTrip) {
  testutil::TempDir dir("state");
  auto s = TrainState::fresh(train_config(), 2);
  s.m.conv1_weight.setConstant(0.25);
  s.v.layers[1].ffn2_bias.setConstant(3.5);
  s.step = 17;
  s.epoch = 3;
  s.best_f1 = 0.75;
  s.best_epoch = 2;
  s.best_checkpoint = checkpoint_name(2);
  s.history.push_back({1, 0.6931, 0.5, 12.0, 0.5, 0.5, true});
  save_state(dir / "s.ckpt", s);
  auto b = load_state(dir / "s.ckpt");
  EXPECT_TRUE(same_params(b.params, s.params));
  EXPECT_TRUE(same_params(b.m, s.m));
  EXPECT_TRUE(same_params(b.v, s.v));
  EXPECT_EQ(b.step, 17);
  EXPECT_EQ(b.epoch, 3);
  EXPECT_EQ(b.best_f1, 0.75);
  EXPECT_EQ(b.best_checkpoint, s.best_checkpoint);
  ASSERT_EQ(b.history.size(), 1u);
  EXPECT_EQ(b.history[0].loss, 0.6931);

  model::save_checkpoint(dir / "m.ckpt", {s.model_config, s.params, {}});
  EXPECT_THROW(load_state(dir / "m.ckpt"), Error);
}

TEST(Config, JsonRoundTripAndValidation) {
  TrainConfig c = small_train_config();
  c.val_precision = model::Precision::float32;
  c.proportions = {0.5, 0.25, 0.25};
  auto back = nlohmann::json(c).get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(c));
  auto bad = c;
  bad.threshold = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.proportions = {0.5, 0.5, 0.5};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(TrainRun, ResumeMatchesUninterrupted) {
  testutil::TempDir full("full"), split("split");
  auto val = std::vector<LoadedRecording>{make_recording("v", "V", 120, {{40, 70}}, 9)};
  auto c = small_train_config();
  c.epochs = 4;
  {
    TrainingSet data(train_recordings(), train_config().window);
    auto r = train_run(data, val, c, train_config(), full.path());
    EXPECT_TRUE(r.finished);
    EXPECT_EQ(r.state.epoch, 4);
  }
  {
    TrainingSet data(train_recordings(), train_config().window);
    auto c2 = c;
    c2.stop_after = 2;
    auto first = train_run(data, val, c2, train_config(), split.path());
    EXPECT_FALSE(first.finished);
    EXPECT_FALSE(std::filesystem::exists(split / "best.ckpt"));
    auto second = train_run(data, val, c, train_config(), split.path(), true);
    EXPECT_TRUE(second.finished);
  }
  EXPECT_EQ(file_bytes(full / "best.ckpt"), file_bytes(split / "best.ckpt"));
  EXPECT_EQ(file_bytes(full / "state.ckpt"), file_bytes(split / "state.ckpt"));
  EXPECT_EQ(file_bytes(full / "metrics.jsonl"), file_bytes(split / "metrics.jsonl"));

  std::ifstream in(full / "metrics.jsonl");
  std::string line;
  int n = 0;
  double best = -1;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch").get<int>(), ++n);
    EXPECT_TRUE(j.contains("loss") && j.contains("val_f1") && j.contains("val_fp_per_day"));
    best = std::max(best, j.at("val_f1").get<double>());
  }
  EXPECT_EQ(n, 4);
  auto ck = model::load_checkpoint(full / "best.ckpt");
  EXPECT_EQ(ck.metadata.at("val_event_f1").get<double>(), best);
}
