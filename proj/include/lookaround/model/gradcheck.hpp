#pragma once

// Central finite-difference check of every parameter gradient.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lookaround/model/network.hpp"

namespace lookaround::model {

struct GradCheckOptions {
  uint64_t seed = 7;
  double step = 1e-5;
  double tolerance = 1e-4;
  double denominator_floor = 1e-6;  // relative error = |a - n| / max(|a|, |n|, floor)
  double label_smoothing = 0.1;
  int n_segments = 2;
  bool zero_classifier = false;
  // Applied to the analytic gradients before comparison (fault injection).
  std::function<void(ModelParams&)> corrupt;
};

struct TensorCheck {
  std::string name;
  long size = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  long n_parameters = 0;
  double max_rel_error = 0.0;
  double seconds = 0.0;
  bool passed = true;

  const TensorCheck* find(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }
};

inline void to_json(nlohmann::json& j, const GradCheckReport& r) {
  j = {{"passed", r.passed},
       {"n_parameters", r.n_parameters},
       {"max_rel_error", r.max_rel_error},
       {"seconds", r.seconds},
       {"tensors", nlohmann::json::array()}};
  for (const auto& t : r.tensors) {
    j["tensors"].push_back({{"name", t.name},
                            {"size", t.size},
                            {"max_rel_error", t.max_rel_error},
                            {"max_abs_error", t.max_abs_error},
                            {"passed", t.passed}});
  }
}

// A config small enough for O(params) finite differences (a few thousand
// parameters) that still exercises every layer type.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.n_channels = 18;
  c.patch_len = 16;
  c.embed_dim = 8;
  c.conv_kernels = {5, 3};
  c.conv_channels = {2, 2};
  c.n_encoder_layers = 2;
  c.n_heads = 2;
  c.ffn_dim = 16;
  c.dropout = 0.1;
  c.cross_channel_heads = 2;
  c.window = WindowSpec{0.25, 0.5, 0.25, 128.0};
  return c;
}

inline GradCheckReport grad_check(const ModelConfig& cfg, const GradCheckOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  ModelParams p = init_params(cfg, opt.seed);
  std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  // Non-trivial norm and bias values so their gradients are exercised.
  std::normal_distribution<double> nd(0.0, 1.0);
  for_each_tensor(p, [&](const std::string& name, Mat& m) {
    const bool is_gain = name.ends_with("gamma");
    const bool is_bias = name.ends_with("bias") || name.ends_with("beta");
    if (is_gain || is_bias) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += 0.1 * nd(rng);
    }
  });
  if (opt.zero_classifier) p.classifier_weight.setZero();

  std::vector<SignalMatrix> windows;
  std::vector<int> labels;
  for (int s = 0; s < opt.n_segments; ++s) {
    SignalMatrix w(cfg.n_channels, cfg.window_samples());
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 40.0 * nd(rng);
    windows.push_back(std::move(w));
    labels.push_back(s % 2);
  }
  auto loss_at = [&](const ModelParams& q) {
    double total = 0.0;
    for (size_t s = 0; s < windows.size(); ++s) {
      const auto out = forward<double>(windows[s], q, cfg, Mode::train, opt.seed + s);
      total += smoothed_cross_entropy(out.logits, labels[s], opt.label_smoothing);
    }
    return total;
  };

  ModelParams grads = zeros_like(cfg);
  for (size_t s = 0; s < windows.size(); ++s) {
    backward(windows[s], labels[s], opt.label_smoothing, p, cfg, grads, Mode::train, opt.seed + s);
  }
  if (opt.corrupt) opt.corrupt(grads);

  GradCheckReport report;
  ModelParams probe = p;
  std::vector<Mat*> probe_tensors;
  for_each_tensor(probe, [&](const std::string&, Mat& m) { probe_tensors.push_back(&m); });
  size_t ti = 0;
  for_each_tensor(grads, [&](const std::string& name, const Mat& g) {
    Mat& m = *probe_tensors[ti++];
    TensorCheck tc;
    tc.name = name;
    tc.size = static_cast<long>(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double orig = m.data()[i];
      m.data()[i] = orig + opt.step;
      const double up = loss_at(probe);
      m.data()[i] = orig - opt.step;
      const double down = loss_at(probe);
      m.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double analytic = g.data()[i];
      const double abs_err = std::abs(analytic - numeric);
      const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), opt.denominator_floor});
      tc.max_abs_error = std::max(tc.max_abs_error, abs_err);
      tc.max_rel_error = std::max(tc.max_rel_error, rel);
    }
    tc.passed = tc.max_rel_error < opt.tolerance;
    report.passed = report.passed && tc.passed;
    report.max_rel_error = std::max(report.max_rel_error, tc.max_rel_error);
    report.n_parameters += tc.size;
    report.tensors.push_back(tc);
  });
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace lookaround::model
