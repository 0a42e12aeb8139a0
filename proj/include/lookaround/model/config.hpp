#pragma once

#include <array>
#include <string>

#include <nlohmann/json.hpp>

#include "lookaround/error.hpp"
#include "lookaround/windowing.hpp"

namespace lookaround::model {

struct ModelConfig {
  int n_channels = 18;
  int patch_len = 128;                 // samples per patch (1 s at 128 Hz)
  int embed_dim = 96;
  std::array<int, 2> conv_kernels{7, 5};
  std::array<int, 2> conv_channels{4, 4};
  int n_encoder_layers = 4;
  int n_heads = 4;
  int ffn_dim = 384;
  double dropout = 0.1;
  int cross_channel_heads = 4;
  int n_classes = 2;
  double input_scale = 0.01;           // microvolts -> model units
  WindowSpec window{32.0, 16.0, 32.0, 128.0};

  int window_samples() const { return static_cast<int>(window.total_samples()); }
  int n_patches() const { return window_samples() / patch_len; }
  int n_tokens() const { return n_channels * n_patches(); }

  void validate() const {
    window.validate();
    auto bad = [](const std::string& why) { fail(ErrorCode::InvalidConfig, why); };
    if (n_channels <= 0 || patch_len <= 0 || embed_dim <= 0) bad("dimensions must be positive");
    if (window_samples() % patch_len != 0) {
      fail(ErrorCode::IndivisibleLength, "window of " + std::to_string(window_samples()) +
                                             " samples is not a multiple of the patch length " +
                                             std::to_string(patch_len));
    }
    if (n_heads <= 0 || embed_dim % n_heads != 0) bad("embed_dim must be divisible by n_heads");
    if (cross_channel_heads <= 0 || embed_dim % cross_channel_heads != 0) {
      bad("embed_dim must be divisible by cross_channel_heads");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must be in [0, 1)");
    if (n_classes != 2) bad("only binary classification is supported");
    for (int k : conv_kernels) {
      if (k <= 0 || k % 2 == 0) bad("conv kernels must be odd and positive");
    }
    for (int c : conv_channels) {
      if (c <= 0) bad("conv channel widths must be positive");
    }
    if (n_encoder_layers < 0 || ffn_dim <= 0) bad("bad encoder shape");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"n_channels", c.n_channels},
       {"patch_len", c.patch_len},
       {"embed_dim", c.embed_dim},
       {"conv_kernels", c.conv_kernels},
       {"conv_channels", c.conv_channels},
       {"n_encoder_layers", c.n_encoder_layers},
       {"n_heads", c.n_heads},
       {"ffn_dim", c.ffn_dim},
       {"dropout", c.dropout},
       {"cross_channel_heads", c.cross_channel_heads},
       {"n_classes", c.n_classes},
       {"input_scale", c.input_scale},
       {"window", c.window}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.n_channels = j.value("n_channels", d.n_channels);
  c.patch_len = j.value("patch_len", d.patch_len);
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.conv_kernels = j.value("conv_kernels", d.conv_kernels);
  c.conv_channels = j.value("conv_channels", d.conv_channels);
  c.n_encoder_layers = j.value("n_encoder_layers", d.n_encoder_layers);
  c.n_heads = j.value("n_heads", d.n_heads);
  c.ffn_dim = j.value("ffn_dim", d.ffn_dim);
  c.dropout = j.value("dropout", d.dropout);
  c.cross_channel_heads = j.value("cross_channel_heads", d.cross_channel_heads);
  c.n_classes = j.value("n_classes", d.n_classes);
  c.input_scale = j.value("input_scale", d.input_scale);
  c.window = j.value("window", d.window);
}

// Closed-form parameter count; must agree with ModelParams (see README).
inline long parameter_count(const ModelConfig& c) {
  const long d = c.embed_dim, f = c.ffn_dim, L = c.patch_len, C = c.n_channels, P = c.n_patches();
  const long c1 = c.conv_channels[0], c2 = c.conv_channels[1];
  const long k1 = c.conv_kernels[0], k2 = c.conv_kernels[1];
  const long front = (L * d + d) + (c1 * k1 + c1) + (c2 * c1 * k2 + c2) + (c2 * d * d + d);
  const long per_layer = 4 * d * d + 2 * d * f + 9 * d + f;
  const long head = 2 * d + C * d + (4 * d * d + 4 * d) + (C * d * 2 + 2);
  return front + P * d + c.n_encoder_layers * per_layer + head;
}

}  // namespace lookaround::model
