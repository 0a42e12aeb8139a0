#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "lookaround/error.hpp"
#include "lookaround/fir.hpp"
#include "lookaround/recording.hpp"

namespace lookaround {

inline constexpr double kModelFs = 128.0;

struct ResampleRatio {
  long up = 1;
  long down = 1;
};

// up/down = target_fs / fs, reduced. Sampling rates are taken to millihertz.
inline ResampleRatio resample_ratio(double fs, double target_fs = kModelFs) {
  const auto a = static_cast<long>(std::llround(target_fs * 1000.0));
  const auto b = static_cast<long>(std::llround(fs * 1000.0));
  const long g = std::gcd(a, b);
  return {a / g, b / g};
}

// Polyphase rational resampler. The interpolation kernel is a Hamming
// windowed sinc with cutoff at the lower of the two Nyquist rates; every
// polyphase branch is normalised to unit sum so constants pass unchanged.
class PolyphaseResampler {
 public:
  explicit PolyphaseResampler(ResampleRatio ratio, long zero_crossings = 10) : ratio_(ratio) {
    const long span = std::max(ratio.up, ratio.down);
    half_ = zero_crossings * span;
    const size_t n = static_cast<size_t>(2 * half_ + 1);
    const double cutoff = 0.5 / static_cast<double>(span);  // cycles per upsampled sample
    kernel_.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) - static_cast<double>(half_);
      const double sinc = t == 0.0 ? 2.0 * cutoff : std::sin(2.0 * M_PI * cutoff * t) / (M_PI * t);
      const double w = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n - 1));
      kernel_[i] = sinc * w;
    }
    for (long phase = 0; phase < ratio.up; ++phase) {
      double sum = 0.0;
      for (size_t j = static_cast<size_t>(phase); j < n; j += static_cast<size_t>(ratio.up)) sum += kernel_[j];
      for (size_t j = static_cast<size_t>(phase); j < n; j += static_cast<size_t>(ratio.up)) kernel_[j] /= sum;
    }
  }

  long output_length(long n_in) const { return (n_in * ratio_.up + ratio_.down - 1) / ratio_.down; }

  void apply(const double* x, long n_in, double* y) const {
    const long n_out = output_length(n_in);
    const long up = ratio_.up;
    const auto n_taps = static_cast<long>(kernel_.size());
    for (long k = 0; k < n_out; ++k) {
      const long centre = k * ratio_.down + half_;  // upsampled index of the newest kernel input
      const long phase = centre % up;
      double acc = 0.0;
      for (long j = phase; j < n_taps; j += up) {
        const long src = (centre - j) / up;
        acc += kernel_[static_cast<size_t>(j)] * x[reflect_index(src, n_in)];
      }
      y[k] = acc;
    }
  }

 private:
  ResampleRatio ratio_;
  long half_ = 0;
  std::vector<double> kernel_;
};

inline Recording resample_to_128(const Recording& rec) {
  if (rec.fs < kModelFs) {
    fail(ErrorCode::UpsampleUnsupported, "sampling rate " + std::to_string(rec.fs) + " Hz is below 128 Hz");
  }
  if (rec.fs == kModelFs) return rec;
  const auto ratio = resample_ratio(rec.fs);
  PolyphaseResampler resampler(ratio);
  Recording out;
  out.id = rec.id;
  out.patient_id = rec.patient_id;
  out.channel_labels = rec.channel_labels;
  out.fs = kModelFs;
  const long n_in = static_cast<long>(rec.n_samples());
  out.samples.resize(rec.n_channels(), resampler.output_length(n_in));
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
    resampler.apply(rec.samples.row(c).data(), n_in, out.samples.row(c).data());
  }
  return out;
}

}  // namespace lookaround
