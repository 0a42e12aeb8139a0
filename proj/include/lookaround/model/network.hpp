#pragma once

// Forward and analytic backward pass of the context-window seizure
// classifier:
//   patches -> linear projection -> 2-layer conv feature extractor
//   -> + temporal positions -> shared per-channel transformer encoder
//   -> mean pool over patches -> + channel positions
//   -> attention across channel tokens -> fully connected -> 2 logits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "lookaround/error.hpp"
#include "lookaround/model/config.hpp"
#include "lookaround/model/ops.hpp"
#include "lookaround/model/params.hpp"
#include "lookaround/recording.hpp"

namespace lookaround::model {

enum class Mode { train, eval };

struct ForwardOutput {
  std::array<double, 2> logits{};
  std::array<double, 2> probabilities{};
  Mat pooled;                          // [C x d] per-channel representation after mean pooling
  std::vector<Mat> encoder_attention;  // last encoder layer, C * heads maps of [P x P]
  std::vector<Mat> channel_attention;  // cross heads maps of [C x C]

  double seizure_probability() const { return probabilities[1]; }
};

template <class S>
struct EncoderLayerCache {
  ops::LayerNormCache<S> ln1;
  ops::AttentionCache<S> attn;
  MatT<S> mask1;
  ops::LayerNormCache<S> ln2;
  MatT<S> b, u, gu;
  MatT<S> mask2;
};

template <class S>
struct BasicForwardCache {
  MatT<S> x;  // scaled patches [N x L]
  MatT<S> e0, h1_pre, h1, h2_pre, h2;
  std::vector<EncoderLayerCache<S>> layers;
  ops::LayerNormCache<S> final_ln;
  MatT<S> zc;
  ops::AttentionCache<S> cross;
  MatT<S> head_mask;
  MatT<S> flat;  // classifier input [1 x C*d]
};

using ForwardCache = BasicForwardCache<double>;

template <class P>
void check_shapes(const P& p, const ModelConfig& c) {
  if (p.layers.size() != static_cast<size_t>(c.n_encoder_layers)) {
    fail(ErrorCode::ShapeMismatch, "parameter set has " + std::to_string(p.layers.size()) +
                                       " encoder layers, config wants " + std::to_string(c.n_encoder_layers));
  }
  const int d = c.embed_dim;
  auto expect = [&](const auto& m, Eigen::Index r, Eigen::Index cols, const std::string& name) {
    if (m.rows() != r || m.cols() != cols) {
      fail(ErrorCode::ShapeMismatch, "tensor " + name + " is " + std::to_string(m.rows()) + "x" +
                                         std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" +
                                         std::to_string(cols));
    }
  };
  const int c1 = c.conv_channels[0], c2 = c.conv_channels[1];
  expect(p.patch_weight, c.patch_len, d, "patch.weight");
  expect(p.patch_bias, 1, d, "patch.bias");
  expect(p.conv1_weight, c1, c.conv_kernels[0], "conv1.weight");
  expect(p.conv1_bias, 1, c1, "conv1.bias");
  expect(p.conv2_weight, c2, c1 * c.conv_kernels[1], "conv2.weight");
  expect(p.conv2_bias, 1, c2, "conv2.bias");
  expect(p.reproj_weight, c2 * d, d, "reproj.weight");
  expect(p.reproj_bias, 1, d, "reproj.bias");
  expect(p.temporal_pos, c.n_patches(), d, "temporal_pos");
  for (const auto& l : p.layers) {
    expect(l.ln1_gamma, 1, d, "ln1.gamma");
    expect(l.ln1_beta, 1, d, "ln1.beta");
    expect(l.qkv_weight, d, 3 * d, "attn.qkv.weight");
    expect(l.qkv_bias, 1, 3 * d, "attn.qkv.bias");
    expect(l.out_weight, d, d, "attn.out.weight");
    expect(l.out_bias, 1, d, "attn.out.bias");
    expect(l.ln2_gamma, 1, d, "ln2.gamma");
    expect(l.ln2_beta, 1, d, "ln2.beta");
    expect(l.ffn1_weight, d, c.ffn_dim, "ffn1.weight");
    expect(l.ffn1_bias, 1, c.ffn_dim, "ffn1.bias");
    expect(l.ffn2_weight, c.ffn_dim, d, "ffn2.weight");
    expect(l.ffn2_bias, 1, d, "ffn2.bias");
  }
  expect(p.final_gamma, 1, d, "final_norm.gamma");
  expect(p.final_beta, 1, d, "final_norm.beta");
  expect(p.channel_pos, c.n_channels, d, "channel_pos");
  expect(p.cross_qkv_weight, d, 3 * d, "cross.qkv.weight");
  expect(p.cross_qkv_bias, 1, 3 * d, "cross.qkv.bias");
  expect(p.cross_out_weight, d, d, "cross.out.weight");
  expect(p.cross_out_bias, 1, d, "cross.out.bias");
  expect(p.classifier_weight, c.n_channels * d, 2, "classifier.weight");
  expect(p.classifier_bias, 1, 2, "classifier.bias");
}

namespace network_detail {

template <class M>
void check_finite(const M& m, const std::string& stage) {
  if (!m.allFinite()) fail(ErrorCode::NonFiniteActivation, "non-finite activation after " + stage);
}

// Same-padded 1-D convolution over the embedding axis of every token.
// in: [N x cin*d], weight: [cout x cin*k], out: [N x cout*d].
template <class S>
void conv_forward(const MatT<S>& in, int cin, int d, const MatT<S>& weight, const MatT<S>& bias, int k,
                  MatT<S>& out) {
  const Eigen::Index n = in.rows();
  const int cout = static_cast<int>(weight.rows());
  const int r = (k - 1) / 2;
  out.resize(n, static_cast<Eigen::Index>(cout) * d);
  for (Eigen::Index row = 0; row < n; ++row) {
    const S* __restrict src = in.row(row).data();
    S* __restrict dst = out.row(row).data();
    for (int o = 0; o < cout; ++o) {
      S* __restrict y = dst + o * d;
      for (int t = 0; t < d; ++t) y[t] = bias(0, o);
      for (int i = 0; i < cin; ++i) {
        const S* __restrict x = src + i * d;
        for (int kk = 0; kk < k; ++kk) {
          const S w = weight(o, i * k + kk);
          const int shift = kk - r;
          const int t0 = std::max(0, -shift), t1 = std::min(d, d - shift);
          for (int t = t0; t < t1; ++t) y[t] += w * x[t + shift];
        }
      }
    }
  }
}

inline void conv_backward(const Mat& dout, const Mat& in, int cin, int d, const Mat& weight, int k, Mat& din,
                          Mat& dweight, Mat& dbias) {
  const Eigen::Index n = in.rows();
  const int cout = static_cast<int>(weight.rows());
  const int r = (k - 1) / 2;
  din.setZero(n, static_cast<Eigen::Index>(cin) * d);
  for (Eigen::Index row = 0; row < n; ++row) {
    const double* x_row = in.row(row).data();
    const double* g_row = dout.row(row).data();
    double* dx_row = din.row(row).data();
    for (int o = 0; o < cout; ++o) {
      const double* gy = g_row + o * d;
      double bsum = 0.0;
      for (int t = 0; t < d; ++t) bsum += gy[t];
      dbias(0, o) += bsum;
      for (int i = 0; i < cin; ++i) {
        const double* x = x_row + i * d;
        double* dx = dx_row + i * d;
        for (int kk = 0; kk < k; ++kk) {
          const double w = weight(o, i * k + kk);
          const int shift = kk - r;
          const int t0 = std::max(0, -shift), t1 = std::min(d, d - shift);
          double acc = 0.0;
          for (int t = t0; t < t1; ++t) {
            acc += gy[t] * x[t + shift];
            dx[t + shift] += w * gy[t];
          }
          dweight(o, i * k + kk) += acc;
        }
      }
    }
  }
}

template <class S>
ops::AttentionWeights<S> encoder_attention_weights(const BasicEncoderLayer<S>& l) {
  return {l.qkv_weight, l.qkv_bias, l.out_weight, l.out_bias};
}

template <class S>
ops::AttentionWeights<S> cross_attention_weights(const BasicParams<S>& p) {
  return {p.cross_qkv_weight, p.cross_qkv_bias, p.cross_out_weight, p.cross_out_bias};
}

}  // namespace network_detail

// Per-patch front end: projection, conv extractor, re-projection with a
// residual. Rows are independent, so a patch embeds the same way in every
// window that contains it. Input rows are raw patches in microvolts.
template <class S>
MatT<S> embed_patches(const MatT<S>& patches, const BasicParams<S>& p, const ModelConfig& cfg,
                      BasicForwardCache<S>* cache = nullptr) {
  using namespace network_detail;
  const int d = cfg.embed_dim;
  BasicForwardCache<S> local;
  BasicForwardCache<S>& fc = cache ? *cache : local;
  fc.x = patches * static_cast<S>(cfg.input_scale);
  fc.e0.noalias() = fc.x * p.patch_weight;
  fc.e0.rowwise() += p.patch_bias.row(0);
  conv_forward(fc.e0, 1, d, p.conv1_weight, p.conv1_bias, cfg.conv_kernels[0], fc.h1_pre);
  ops::gelu(fc.h1_pre, fc.h1);
  conv_forward(fc.h1, cfg.conv_channels[0], d, p.conv2_weight, p.conv2_bias, cfg.conv_kernels[1], fc.h2_pre);
  ops::gelu(fc.h2_pre, fc.h2);
  MatT<S> e = fc.e0;
  e.noalias() += fc.h2 * p.reproj_weight;
  e.rowwise() += p.reproj_bias.row(0);
  check_finite(e, "patch feature extractor");
  return e;
}

// Everything after the front end. `x` is [C*P x d], row c*P + q being
// channel c, patch q, before temporal positions are added.
template <class S>
ForwardOutput forward_tokens(MatT<S> x, const BasicParams<S>& p, const ModelConfig& cfg, Mode mode,
                             uint64_t dropout_seed = 0, BasicForwardCache<S>* cache = nullptr,
                             bool keep_attention = false) {
  using namespace network_detail;
  const int C = cfg.n_channels, d = cfg.embed_dim, P = cfg.n_patches();
  const int N = C * P;
  if (x.rows() != N || x.cols() != d) fail(ErrorCode::ShapeMismatch, "token matrix does not match the config");
  const bool train = mode == Mode::train && cfg.dropout > 0.0;
  std::mt19937_64 rng(dropout_seed);
  const bool keep = cache != nullptr;
  BasicForwardCache<S> local;
  BasicForwardCache<S>& fc = cache ? *cache : local;

  for (int c = 0; c < C; ++c) x.middleRows(c * P, P) += p.temporal_pos;

  fc.layers.resize(static_cast<size_t>(cfg.n_encoder_layers));
  ForwardOutput out;
  MatT<S> a, y, b, u, gu, f;
  for (int li = 0; li < cfg.n_encoder_layers; ++li) {
    const auto& lp = p.layers[static_cast<size_t>(li)];
    auto& lc = fc.layers[static_cast<size_t>(li)];
    ops::layer_norm(x, lp.ln1_gamma, lp.ln1_beta, a, keep ? &lc.ln1 : nullptr);
    const bool last = li + 1 == cfg.n_encoder_layers;
    ops::attention(a, C, P, cfg.n_heads, encoder_attention_weights(lp), y, keep ? &lc.attn : nullptr,
                   keep_attention && last ? &out.encoder_attention : nullptr);
    if (train) {
      lc.mask1 = ops::dropout_mask(N, d, cfg.dropout, rng).cast<S>();
      y.array() *= lc.mask1.array();
    }
    x += y;
    ops::layer_norm(x, lp.ln2_gamma, lp.ln2_beta, b, keep ? &lc.ln2 : nullptr);
    u.noalias() = b * lp.ffn1_weight;
    u.rowwise() += lp.ffn1_bias.row(0);
    ops::gelu(u, gu);
    f.noalias() = gu * lp.ffn2_weight;
    f.rowwise() += lp.ffn2_bias.row(0);
    if (train) {
      lc.mask2 = ops::dropout_mask(N, d, cfg.dropout, rng).cast<S>();
      f.array() *= lc.mask2.array();
    }
    x += f;
    if (keep) {
      lc.b = b;
      lc.u = u;
      lc.gu = gu;
    }
    check_finite(x, "encoder layer " + std::to_string(li));
  }

  MatT<S> hf;
  ops::layer_norm(x, p.final_gamma, p.final_beta, hf, keep ? &fc.final_ln : nullptr);
  MatT<S> pooled(C, d);
  for (int c = 0; c < C; ++c) pooled.row(c) = hf.middleRows(c * P, P).colwise().mean();
  out.pooled = pooled.template cast<double>();
  fc.zc = pooled + p.channel_pos;

  MatT<S> y2;
  ops::attention(fc.zc, 1, C, cfg.cross_channel_heads, cross_attention_weights(p), y2, keep ? &fc.cross : nullptr,
                 keep_attention ? &out.channel_attention : nullptr);
  MatT<S> u_head = fc.zc + y2;
  if (train) {
    fc.head_mask = ops::dropout_mask(C, d, cfg.dropout, rng).cast<S>();
    u_head.array() *= fc.head_mask.array();
  }
  check_finite(u_head, "cross-channel attention");
  fc.flat = Eigen::Map<const MatT<S>>(u_head.data(), 1, static_cast<Eigen::Index>(C) * d);
  const Mat logits = (fc.flat * p.classifier_weight + p.classifier_bias).template cast<double>();
  check_finite(logits, "classifier");

  const double m = std::max(logits(0, 0), logits(0, 1));
  const double e0 = std::exp(logits(0, 0) - m), e1 = std::exp(logits(0, 1) - m);
  out.logits = {logits(0, 0), logits(0, 1)};
  out.probabilities = {e0 / (e0 + e1), e1 / (e0 + e1)};
  return out;
}

// Splits a window [C x T] into patches, returned as rows c*P + q.
inline Mat patchify(const SignalMatrix& window, const ModelConfig& cfg) {
  if (cfg.patch_len <= 0 || window.cols() % cfg.patch_len != 0) {
    fail(ErrorCode::IndivisibleLength, std::to_string(window.cols()) + " samples do not split into patches of " +
                                           std::to_string(cfg.patch_len));
  }
  const Eigen::Index P = window.cols() / cfg.patch_len;
  return Eigen::Map<const Mat>(window.data(), window.rows() * P, cfg.patch_len);
}

inline void check_window(const SignalMatrix& window, const ModelConfig& cfg) {
  if (window.rows() != cfg.n_channels || window.cols() != cfg.window_samples()) {
    fail(ErrorCode::ShapeMismatch, "window is " + std::to_string(window.rows()) + "x" +
                                       std::to_string(window.cols()) + ", model expects " +
                                       std::to_string(cfg.n_channels) + "x" + std::to_string(cfg.window_samples()));
  }
}

// Runs the network on one window [C x window samples] in microvolts.
// Dropout is active only in train mode; its masks derive from dropout_seed.
template <class S>
ForwardOutput forward(const SignalMatrix& window, const BasicParams<S>& p, const ModelConfig& cfg, Mode mode,
                      uint64_t dropout_seed = 0, BasicForwardCache<S>* cache = nullptr,
                      bool keep_attention = false) {
  check_window(window, cfg);
  const Mat patches = patchify(window, cfg);
  check_shapes(p, cfg);
  MatT<S> e;
  if constexpr (std::is_same_v<S, double>) {
    e = embed_patches<S>(patches, p, cfg, cache);
  } else {
    e = embed_patches<S>(patches.cast<S>(), p, cfg, cache);
  }
  return forward_tokens<S>(std::move(e), p, cfg, mode, dropout_seed, cache, keep_attention);
}

// Label-smoothed cross-entropy, q = (1 - eps) * onehot + eps / 2.
inline double smoothed_cross_entropy(const std::array<double, 2>& logits, int label, double smoothing) {
  const double m = std::max(logits[0], logits[1]);
  const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
  double loss = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double q = (k == label ? 1.0 - smoothing : 0.0) + smoothing / 2.0;
    loss -= q * (logits[static_cast<size_t>(k)] - lse);
  }
  return loss;
}

// Accumulates weight * d(loss)/d(params) into `grads` and returns the loss.
inline double backward(const SignalMatrix& window, int label, double smoothing, const ModelParams& p,
                       const ModelConfig& cfg, ModelParams& grads, Mode mode = Mode::train, uint64_t dropout_seed = 0,
                       double weight = 1.0) {
  using namespace network_detail;
  ForwardCache fc;
  const ForwardOutput out = forward<double>(window, p, cfg, mode, dropout_seed, &fc);
  const double loss = smoothed_cross_entropy(out.logits, label, smoothing);
  const int C = cfg.n_channels, d = cfg.embed_dim, P = cfg.n_patches();
  const bool train = mode == Mode::train && cfg.dropout > 0.0;

  Mat dlogits(1, 2);
  for (int k = 0; k < 2; ++k) {
    const double q = (k == label ? 1.0 - smoothing : 0.0) + smoothing / 2.0;
    dlogits(0, k) = (out.probabilities[static_cast<size_t>(k)] - q) * weight;
  }
  grads.classifier_weight.noalias() += fc.flat.transpose() * dlogits;
  grads.classifier_bias += dlogits;
  const Mat dflat = dlogits * p.classifier_weight.transpose();
  Mat du_head = Eigen::Map<const Mat>(dflat.data(), C, d);
  if (train) du_head.array() *= fc.head_mask.array();

  Mat dzc = du_head;
  Mat dcross;
  ops::attention_backward(du_head, 1, C, cfg.cross_channel_heads, cross_attention_weights(p), fc.cross, dcross,
                          {grads.cross_qkv_weight, grads.cross_qkv_bias, grads.cross_out_weight, grads.cross_out_bias});
  dzc += dcross;
  grads.channel_pos += dzc;

  Mat dhf(static_cast<Eigen::Index>(C) * P, d);
  for (int c = 0; c < C; ++c) dhf.middleRows(c * P, P).rowwise() = dzc.row(c) / static_cast<double>(P);
  Mat dx;
  ops::layer_norm_backward(dhf, p.final_gamma, fc.final_ln, dx, grads.final_gamma, grads.final_beta);

  Mat tmp, df, dgu, db, dy, da;
  for (int li = cfg.n_encoder_layers - 1; li >= 0; --li) {
    const auto& lp = p.layers[static_cast<size_t>(li)];
    auto& lg = grads.layers[static_cast<size_t>(li)];
    const auto& lc = fc.layers[static_cast<size_t>(li)];
    // feed-forward branch
    df = dx;
    if (train) df.array() *= lc.mask2.array();
    lg.ffn2_weight.noalias() += lc.gu.transpose() * df;
    lg.ffn2_bias += df.colwise().sum();
    dgu.noalias() = df * lp.ffn2_weight.transpose();
    ops::gelu_backward(lc.u, dgu);
    lg.ffn1_weight.noalias() += lc.b.transpose() * dgu;
    lg.ffn1_bias += dgu.colwise().sum();
    db.noalias() = dgu * lp.ffn1_weight.transpose();
    ops::layer_norm_backward(db, lp.ln2_gamma, lc.ln2, tmp, lg.ln2_gamma, lg.ln2_beta);
    dx += tmp;
    // attention branch
    dy = dx;
    if (train) dy.array() *= lc.mask1.array();
    ops::attention_backward(dy, C, P, cfg.n_heads, encoder_attention_weights(lp), lc.attn, da,
                            {lg.qkv_weight, lg.qkv_bias, lg.out_weight, lg.out_bias});
    ops::layer_norm_backward(da, lp.ln1_gamma, lc.ln1, tmp, lg.ln1_gamma, lg.ln1_beta);
    dx += tmp;
  }

  // dx is now the gradient w.r.t. the embedded patches
  for (int c = 0; c < C; ++c) grads.temporal_pos += dx.middleRows(c * P, P);
  grads.reproj_weight.noalias() += fc.h2.transpose() * dx;
  grads.reproj_bias += dx.colwise().sum();
  Mat dh2 = dx * p.reproj_weight.transpose();
  ops::gelu_backward(fc.h2_pre, dh2);
  Mat dh1;
  conv_backward(dh2, fc.h1, cfg.conv_channels[0], d, p.conv2_weight, cfg.conv_kernels[1], dh1, grads.conv2_weight,
                grads.conv2_bias);
  ops::gelu_backward(fc.h1_pre, dh1);
  Mat de0;
  conv_backward(dh1, fc.e0, 1, d, p.conv1_weight, cfg.conv_kernels[0], de0, grads.conv1_weight, grads.conv1_bias);
  de0 += dx;
  grads.patch_weight.noalias() += fc.x.transpose() * de0;
  grads.patch_bias += de0.colwise().sum();
  return loss;
}

enum class Precision { float64, float32 };

inline const char* to_string(Precision p) { return p == Precision::float32 ? "float32" : "float64"; }

inline Precision parse_precision(const std::string& s) {
  if (s == "float32") return Precision::float32;
  if (s == "float64") return Precision::float64;
  fail(ErrorCode::InvalidConfig, "unknown precision '" + s + "' (float32 or float64)");
}

// A trained network ready for evaluation. With float32 precision a float
// copy of the parameters is made once, on construction.
class Model {
 public:
  Model() = default;
  Model(ModelConfig cfg, ModelParams params, Precision precision = Precision::float64)
      : config_(std::move(cfg)), params_(std::move(params)), precision_(precision) {
    config_.validate();
    check_shapes(params_, config_);
    if (precision_ == Precision::float32) params32_ = cast_params<float>(params_);
  }

  static Model initialized(const ModelConfig& cfg, uint64_t seed, Precision precision = Precision::float64) {
    return Model(cfg, init_params(cfg, seed), precision);
  }

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  Precision precision() const { return precision_; }

  template <class S>
  const BasicParams<S>& params_as() const {
    if constexpr (std::is_same_v<S, float>) return params32_;
    else return params_;
  }

  ForwardOutput forward(const SignalMatrix& window, bool keep_attention = false) const {
    if (precision_ == Precision::float32) {
      return model::forward<float>(window, params32_, config_, Mode::eval, 0, nullptr, keep_attention);
    }
    return model::forward<double>(window, params_, config_, Mode::eval, 0, nullptr, keep_attention);
  }

  double seizure_probability(const SignalMatrix& window) const { return forward(window).seizure_probability(); }

 private:
  ModelConfig config_;
  ModelParams params_;
  BasicParams<float> params32_;
  Precision precision_ = Precision::float64;
};

}  // namespace lookaround::model
