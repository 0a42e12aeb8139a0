#pragma once

// Differentiable building blocks with explicit backward passes. Backward
// functions accumulate (+=) into parameter gradients and overwrite input
// gradients. Forward functions are templated on the scalar type so the
// same code serves double (training) and float (fast inference).

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lookaround/model/params.hpp"

namespace lookaround::model::ops {

template <class S>
using ArrT = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using VecT = Eigen::Array<S, Eigen::Dynamic, 1>;

// GELU in its tanh form, with tanh written through one exp so Eigen can
// vectorise it: tanh(z) = 1 - 2 / (exp(2z) + 1).
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

template <class S>
ArrT<S> gelu_tanh(const MatT<S>& u) {
  auto x = u.array();
  return S(1) - S(2) / ((S(2 * kGeluC) * (x + S(kGeluA) * x.cube())).exp() + S(1));
}

template <class S>
void gelu(const MatT<S>& u, MatT<S>& out) {
  const ArrT<S> t = gelu_tanh(u);
  out.resize(u.rows(), u.cols());
  out.array() = S(0.5) * u.array() * (S(1) + t);
}

// grad *= gelu'(u)
inline void gelu_backward(const Mat& u, Mat& grad) {
  const ArrT<double> t = gelu_tanh(u);
  auto x = u.array();
  grad.array() *= 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * kGeluA * x.square());
}

inline constexpr double kLayerNormEps = 1e-5;

template <class S>
struct LayerNormCache {
  MatT<S> xhat;
  Eigen::Matrix<S, Eigen::Dynamic, 1> rstd;
};

template <class S>
void layer_norm(const MatT<S>& x, const MatT<S>& gamma, const MatT<S>& beta, MatT<S>& y,
                LayerNormCache<S>* cache) {
  const Eigen::Index n = x.rows(), d = x.cols();
  y.resize(n, d);
  if (cache) {
    cache->xhat.resize(n, d);
    cache->rstd.resize(n);
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    const S mean = x.row(r).mean();
    const S var = (x.row(r).array() - mean).square().mean();
    const S rstd = S(1) / std::sqrt(var + S(kLayerNormEps));
    if (cache) {
      cache->xhat.row(r) = (x.row(r).array() - mean) * rstd;
      cache->rstd(r) = rstd;
      y.row(r) = (cache->xhat.row(r).array() * gamma.row(0).array() + beta.row(0).array()).matrix();
    } else {
      y.row(r) = ((x.row(r).array() - mean) * rstd * gamma.row(0).array() + beta.row(0).array()).matrix();
    }
  }
}

inline void layer_norm_backward(const Mat& dy, const Mat& gamma, const LayerNormCache<double>& c, Mat& dx,
                                Mat& dgamma, Mat& dbeta) {
  dgamma += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  dbeta += dy.colwise().sum();
  dx.resize(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const Eigen::RowVectorXd dxhat = (dy.row(r).array() * gamma.row(0).array()).matrix();
    const double m1 = dxhat.mean();
    const double m2 = dxhat.dot(c.xhat.row(r)) / static_cast<double>(dy.cols());
    dx.row(r) = c.rstd(r) * (dxhat.array() - m1 - c.xhat.row(r).array() * m2);
  }
}

template <class S>
struct AttentionWeights {
  const MatT<S>& qkv_weight;
  const MatT<S>& qkv_bias;
  const MatT<S>& out_weight;
  const MatT<S>& out_bias;
};

struct AttentionGrads {
  Mat& qkv_weight;
  Mat& qkv_bias;
  Mat& out_weight;
  Mat& out_bias;
};

template <class S>
struct AttentionCache {
  MatT<S> input;
  MatT<S> qkv;
  MatT<S> concat;
  std::vector<MatT<S>> probs;  // [groups * heads], each [seq x seq]
};

// Multi-head self-attention applied independently to `groups` consecutive
// blocks of `seq` rows. Weights are shared across groups.
template <class S>
void attention(const MatT<S>& x, int groups, int seq, int heads, const AttentionWeights<S>& w, MatT<S>& y,
               AttentionCache<S>* cache, std::vector<Mat>* keep_probs = nullptr) {
  const int d = static_cast<int>(x.cols());
  const int dh = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  MatT<S> qkv = x * w.qkv_weight;
  qkv.rowwise() += w.qkv_bias.row(0);
  MatT<S> concat(x.rows(), d);
  if (cache) cache->probs.resize(static_cast<size_t>(groups * heads));
  if (keep_probs) keep_probs->resize(static_cast<size_t>(groups * heads));
  MatT<S> s;
  for (int g = 0; g < groups; ++g) {
    for (int h = 0; h < heads; ++h) {
      auto q = qkv.block(g * seq, h * dh, seq, dh);
      auto k = qkv.block(g * seq, d + h * dh, seq, dh);
      auto v = qkv.block(g * seq, 2 * d + h * dh, seq, dh);
      s.noalias() = q * k.transpose();
      s *= scale;
      for (int r = 0; r < seq; ++r) {
        Eigen::Map<VecT<S>> row(s.row(r).data(), seq);
        row = (row - row.maxCoeff()).exp();
        row /= row.sum();
      }
      concat.block(g * seq, h * dh, seq, dh).noalias() = s * v;
      const auto idx = static_cast<size_t>(g * heads + h);
      if (keep_probs) (*keep_probs)[idx] = s.template cast<double>();
      if (cache) cache->probs[idx] = s;
    }
  }
  y.noalias() = concat * w.out_weight;
  y.rowwise() += w.out_bias.row(0);
  if (cache) {
    cache->input = x;
    cache->qkv = std::move(qkv);
    cache->concat = std::move(concat);
  }
}

inline void attention_backward(const Mat& dy, int groups, int seq, int heads, const AttentionWeights<double>& w,
                               const AttentionCache<double>& c, Mat& dx, const AttentionGrads& g) {
  const int d = static_cast<int>(dy.cols());
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  g.out_weight.noalias() += c.concat.transpose() * dy;
  g.out_bias += dy.colwise().sum();
  Mat dconcat = dy * w.out_weight.transpose();
  Mat dqkv(dy.rows(), 3 * d);
  Mat da, ds;
  for (int gi = 0; gi < groups; ++gi) {
    for (int h = 0; h < heads; ++h) {
      const Mat& a = c.probs[static_cast<size_t>(gi * heads + h)];
      auto q = c.qkv.block(gi * seq, h * dh, seq, dh);
      auto k = c.qkv.block(gi * seq, d + h * dh, seq, dh);
      auto v = c.qkv.block(gi * seq, 2 * d + h * dh, seq, dh);
      auto dout = dconcat.block(gi * seq, h * dh, seq, dh);
      da.noalias() = dout * v.transpose();
      dqkv.block(gi * seq, 2 * d + h * dh, seq, dh).noalias() = a.transpose() * dout;
      ds.resize(seq, seq);
      for (int r = 0; r < seq; ++r) {
        const double rs = da.row(r).dot(a.row(r));
        ds.row(r).array() = a.row(r).array() * (da.row(r).array() - rs) * scale;
      }
      dqkv.block(gi * seq, h * dh, seq, dh).noalias() = ds * k;
      dqkv.block(gi * seq, d + h * dh, seq, dh).noalias() = ds.transpose() * q;
    }
  }
  g.qkv_weight.noalias() += c.input.transpose() * dqkv;
  g.qkv_bias += dqkv.colwise().sum();
  dx.noalias() = dqkv * w.qkv_weight.transpose();
}

// Inverted dropout mask: entries are 0 or 1/(1-rate).
inline Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  Mat m(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m.data()[i] = u < rate ? 0.0 : keep;
  }
  return m;
}

}  // namespace lookaround::model::ops
