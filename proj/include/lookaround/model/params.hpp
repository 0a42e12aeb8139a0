#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lookaround/model/config.hpp"

namespace lookaround::model {

template <class S>
using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mat = MatT<double>;

template <class S>
struct BasicEncoderLayer {
  using M = MatT<S>;
  M ln1_gamma, ln1_beta;   // [1 x d]
  M qkv_weight, qkv_bias;  // [d x 3d], [1 x 3d]
  M out_weight, out_bias;  // [d x d], [1 x d]
  M ln2_gamma, ln2_beta;
  M ffn1_weight, ffn1_bias;  // [d x f], [1 x f]
  M ffn2_weight, ffn2_bias;  // [f x d], [1 x d]
};

// All learnable tensors. Shapes depend only on ModelConfig. Training and
// checkpoints use double; a float copy serves fast inference.
template <class S>
struct BasicParams {
  using Scalar = S;
  using M = MatT<S>;
  M patch_weight, patch_bias;      // [L x d], [1 x d]
  M conv1_weight, conv1_bias;      // [c1 x k1], [1 x c1]
  M conv2_weight, conv2_bias;      // [c2 x c1*k2], [1 x c2]
  M reproj_weight, reproj_bias;    // [c2*d x d], [1 x d]
  M temporal_pos;                  // [P x d]
  std::vector<BasicEncoderLayer<S>> layers;
  M final_gamma, final_beta;       // [1 x d]
  M channel_pos;                   // [C x d]
  M cross_qkv_weight, cross_qkv_bias;
  M cross_out_weight, cross_out_bias;
  M classifier_weight, classifier_bias;  // [C*d x 2], [1 x 2]
};

using EncoderLayerParams = BasicEncoderLayer<double>;
using ModelParams = BasicParams<double>;

// Visits every tensor in a fixed order with a stable name. Works for const
// and mutable ModelParams; the order defines checkpoint and optimizer layout.
template <class Params, class F>
void for_each_tensor(Params& p, F&& f) {
  f("patch.weight", p.patch_weight);
  f("patch.bias", p.patch_bias);
  f("conv1.weight", p.conv1_weight);
  f("conv1.bias", p.conv1_bias);
  f("conv2.weight", p.conv2_weight);
  f("conv2.bias", p.conv2_bias);
  f("reproj.weight", p.reproj_weight);
  f("reproj.bias", p.reproj_bias);
  f("temporal_pos", p.temporal_pos);
  for (size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "encoder." + std::to_string(i) + ".";
    f(pre + "ln1.gamma", l.ln1_gamma);
    f(pre + "ln1.beta", l.ln1_beta);
    f(pre + "attn.qkv.weight", l.qkv_weight);
    f(pre + "attn.qkv.bias", l.qkv_bias);
    f(pre + "attn.out.weight", l.out_weight);
    f(pre + "attn.out.bias", l.out_bias);
    f(pre + "ln2.gamma", l.ln2_gamma);
    f(pre + "ln2.beta", l.ln2_beta);
    f(pre + "ffn1.weight", l.ffn1_weight);
    f(pre + "ffn1.bias", l.ffn1_bias);
    f(pre + "ffn2.weight", l.ffn2_weight);
    f(pre + "ffn2.bias", l.ffn2_bias);
  }
  f("final_norm.gamma", p.final_gamma);
  f("final_norm.beta", p.final_beta);
  f("channel_pos", p.channel_pos);
  f("cross.qkv.weight", p.cross_qkv_weight);
  f("cross.qkv.bias", p.cross_qkv_bias);
  f("cross.out.weight", p.cross_out_weight);
  f("cross.out.bias", p.cross_out_bias);
  f("classifier.weight", p.classifier_weight);
  f("classifier.bias", p.classifier_bias);
}

// Two-argument variant visiting matching tensors of two parameter sets.
template <class A, class B, class F>
void for_each_tensor_pair(A& a, B& b, F&& f) {
  std::vector<decltype(&b.patch_weight)> rhs;
  for_each_tensor(b, [&](const std::string&, auto& m) { rhs.push_back(&m); });
  size_t i = 0;
  for_each_tensor(a, [&](const std::string& name, auto& m) { f(name, m, *rhs[i++]); });
}

inline ModelParams zeros_like(const ModelConfig& c) {
  const int d = c.embed_dim, f = c.ffn_dim, L = c.patch_len, C = c.n_channels, P = c.n_patches();
  const int c1 = c.conv_channels[0], c2 = c.conv_channels[1];
  const int k1 = c.conv_kernels[0], k2 = c.conv_kernels[1];
  ModelParams p;
  p.patch_weight = Mat::Zero(L, d);
  p.patch_bias = Mat::Zero(1, d);
  p.conv1_weight = Mat::Zero(c1, k1);
  p.conv1_bias = Mat::Zero(1, c1);
  p.conv2_weight = Mat::Zero(c2, c1 * k2);
  p.conv2_bias = Mat::Zero(1, c2);
  p.reproj_weight = Mat::Zero(c2 * d, d);
  p.reproj_bias = Mat::Zero(1, d);
  p.temporal_pos = Mat::Zero(P, d);
  p.layers.resize(static_cast<size_t>(c.n_encoder_layers));
  for (auto& l : p.layers) {
    l.ln1_gamma = Mat::Zero(1, d);
    l.ln1_beta = Mat::Zero(1, d);
    l.qkv_weight = Mat::Zero(d, 3 * d);
    l.qkv_bias = Mat::Zero(1, 3 * d);
    l.out_weight = Mat::Zero(d, d);
    l.out_bias = Mat::Zero(1, d);
    l.ln2_gamma = Mat::Zero(1, d);
    l.ln2_beta = Mat::Zero(1, d);
    l.ffn1_weight = Mat::Zero(d, f);
    l.ffn1_bias = Mat::Zero(1, f);
    l.ffn2_weight = Mat::Zero(f, d);
    l.ffn2_bias = Mat::Zero(1, d);
  }
  p.final_gamma = Mat::Zero(1, d);
  p.final_beta = Mat::Zero(1, d);
  p.channel_pos = Mat::Zero(C, d);
  p.cross_qkv_weight = Mat::Zero(d, 3 * d);
  p.cross_qkv_bias = Mat::Zero(1, 3 * d);
  p.cross_out_weight = Mat::Zero(d, d);
  p.cross_out_bias = Mat::Zero(1, d);
  p.classifier_weight = Mat::Zero(C * d, 2);
  p.classifier_bias = Mat::Zero(1, 2);
  return p;
}

template <class S>
BasicParams<S> cast_params(const ModelParams& p) {
  BasicParams<S> out;
  out.layers.resize(p.layers.size());
  for_each_tensor_pair(out, p, [](const std::string&, MatT<S>& dst, const Mat& src) { dst = src.cast<S>(); });
  return out;
}

inline long count_parameters(const ModelParams& p) {
  long n = 0;
  for_each_tensor(p, [&](const std::string&, const Mat& m) { n += static_cast<long>(m.size()); });
  return n;
}

inline void set_zero(ModelParams& p) {
  for_each_tensor(p, [](const std::string&, Mat& m) { m.setZero(); });
}

inline bool all_finite(const ModelParams& p) {
  bool ok = true;
  for_each_tensor(p, [&](const std::string&, const Mat& m) { ok = ok && m.allFinite(); });
  return ok;
}

namespace init_detail {

inline double truncated_normal(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    double z = n(rng);
    if (std::abs(z) <= 2.0) return z * sigma;
  }
}

inline void fill_truncated(Mat& m, std::mt19937_64& rng, double sigma) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = truncated_normal(rng, sigma);
}

// Square orthogonal block from the QR factorisation of a Gaussian matrix.
inline Mat orthogonal(int n, std::mt19937_64& rng, double gain) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd diag = qr.matrixQR().diagonal();
  for (int j = 0; j < n; ++j) {
    if (diag(j) < 0) q.col(j) *= -1.0;
  }
  return Mat(q * gain);
}

}  // namespace init_detail

// Truncated normal (sigma 0.02) for projections and encodings, orthogonal
// blocks for attention, unit LayerNorm gains, zero biases.
inline ModelParams init_params(const ModelConfig& c, uint64_t seed) {
  c.validate();
  using namespace init_detail;
  std::mt19937_64 rng(seed);
  ModelParams p = zeros_like(c);
  const int d = c.embed_dim;
  const double sigma = 0.02;
  const double residual_gain = 1.0 / std::sqrt(2.0 * std::max(1, c.n_encoder_layers));
  fill_truncated(p.patch_weight, rng, sigma);
  fill_truncated(p.conv1_weight, rng, 1.0 / std::sqrt(static_cast<double>(c.conv_kernels[0])));
  fill_truncated(p.conv2_weight, rng, 1.0 / std::sqrt(static_cast<double>(c.conv_channels[0] * c.conv_kernels[1])));
  fill_truncated(p.reproj_weight, rng, sigma);
  fill_truncated(p.temporal_pos, rng, sigma);
  for (auto& l : p.layers) {
    l.ln1_gamma.setOnes();
    l.ln2_gamma.setOnes();
    for (int b = 0; b < 3; ++b) l.qkv_weight.middleCols(b * d, d) = orthogonal(d, rng, 1.0);
    l.out_weight = orthogonal(d, rng, residual_gain);
    fill_truncated(l.ffn1_weight, rng, sigma);
    fill_truncated(l.ffn2_weight, rng, sigma);
  }
  p.final_gamma.setOnes();
  fill_truncated(p.channel_pos, rng, sigma);
  for (int b = 0; b < 3; ++b) p.cross_qkv_weight.middleCols(b * d, d) = orthogonal(d, rng, 1.0);
  p.cross_out_weight = orthogonal(d, rng, residual_gain);
  fill_truncated(p.classifier_weight, rng, sigma);
  return p;
}

}  // namespace lookaround::model
