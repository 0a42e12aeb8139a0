#pragma once

// Windowed-sinc (Hamming) linear-phase FIR design and zero-phase filtering
// with reflective boundary padding.

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "lookaround/error.hpp"
#include "lookaround/recording.hpp"

namespace lookaround {

enum class FilterKind { highpass, lowpass, notch };

struct FirFilter {
  std::vector<double> taps;
  FilterKind kind = FilterKind::lowpass;
  std::vector<double> cutoffs_hz;  // -6 dB points of the underlying sinc kernels
  double transition_hz = 0.0;
  double notch_width_hz = 0.0;     // full stop width, notch only
  double design_fs = 0.0;

  size_t half_length() const { return (taps.size() - 1) / 2; }
};

// numpy-style "reflect" indexing (edge sample not repeated), valid for any
// integer index; n must be >= 2.
inline long reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  long m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

namespace fir_detail {

// Snap to a 2^-50 grid so partial tap sums are exact in any order.
inline double snap(double x) { return std::ldexp(std::round(std::ldexp(x, 50)), -50); }

inline size_t tap_count(double transition_hz, double fs) {
  auto n = static_cast<size_t>(std::ceil(3.3 * fs / transition_hz));
  if (n % 2 == 0) ++n;
  return std::max<size_t>(n, 3);
}

inline std::vector<double> hamming_lowpass(double cutoff_hz, double fs, size_t n) {
  std::vector<double> h(n);
  const double wc = 2.0 * cutoff_hz / fs;  // normalised to Nyquist
  const double mid = static_cast<double>(n - 1) / 2.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) - mid;
    const double sinc = t == 0.0 ? wc : std::sin(M_PI * wc * t) / (M_PI * t);
    const double w = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n - 1));
    h[i] = sinc * w;
  }
  double sum = 0.0;
  for (double v : h) sum += v;
  for (double& v : h) v /= sum;
  return h;
}

// Rounds off-centre taps, mirrors them for exact symmetry and sets the
// centre tap so the DC gain is exactly `dc`.
inline void finalize_taps(std::vector<double>& h, double dc) {
  const size_t n = h.size();
  const size_t mid = (n - 1) / 2;
  double others = 0.0;
  for (size_t i = 0; i < mid; ++i) {
    const double v = snap(0.5 * (h[i] + h[n - 1 - i]));
    h[i] = v;
    h[n - 1 - i] = v;
    others += 2.0 * v;
  }
  h[mid] = dc - others;
}

}  // namespace fir_detail

struct FirDesign {
  FilterKind kind = FilterKind::lowpass;
  std::vector<double> cutoffs_hz;   // one value; for notch, the notch centre
  double transition_hz = 1.0;
  double fs = 256.0;
  double notch_width_hz = 1.0;
};

inline FirFilter design_fir(const FirDesign& d) {
  const double nyq = d.fs / 2.0;
  if (!(d.fs > 0.0) || !(d.transition_hz > 0.0) || d.cutoffs_hz.size() != 1) {
    fail(ErrorCode::InvalidBand, "filter design needs fs > 0, transition > 0 and one cutoff");
  }
  const double fc = d.cutoffs_hz.front();
  if (!(fc > 0.0 && fc < nyq)) fail(ErrorCode::InvalidBand, "cutoff " + std::to_string(fc) + " Hz outside (0, fs/2)");

  FirFilter f;
  f.kind = d.kind;
  f.transition_hz = d.transition_hz;
  f.design_fs = d.fs;
  const size_t n = fir_detail::tap_count(d.transition_hz, d.fs);
  const size_t mid = (n - 1) / 2;

  switch (d.kind) {
    case FilterKind::lowpass: {
      f.cutoffs_hz = {fc};
      f.taps = fir_detail::hamming_lowpass(fc, d.fs, n);
      fir_detail::finalize_taps(f.taps, 1.0);
      break;
    }
    case FilterKind::highpass: {
      f.cutoffs_hz = {fc};
      f.taps = fir_detail::hamming_lowpass(fc, d.fs, n);
      for (auto& v : f.taps) v = -v;
      f.taps[mid] += 1.0;
      fir_detail::finalize_taps(f.taps, 0.0);
      break;
    }
    case FilterKind::notch: {
      if (!(d.notch_width_hz > 0.0)) fail(ErrorCode::InvalidBand, "notch width must be positive");
      const double lo = fc - 0.5 * d.notch_width_hz - 0.5 * d.transition_hz;
      const double hi = fc + 0.5 * d.notch_width_hz + 0.5 * d.transition_hz;
      if (!(lo > 0.0 && hi < nyq)) fail(ErrorCode::InvalidBand, "notch band exceeds (0, fs/2)");
      f.cutoffs_hz = {lo, hi};
      f.notch_width_hz = d.notch_width_hz;
      auto low = fir_detail::hamming_lowpass(lo, d.fs, n);
      auto high = fir_detail::hamming_lowpass(hi, d.fs, n);
      f.taps.resize(n);
      for (size_t i = 0; i < n; ++i) f.taps[i] = low[i] - high[i];
      f.taps[mid] += 1.0;
      fir_detail::finalize_taps(f.taps, 1.0);
      break;
    }
  }
  return f;
}

inline FirFilter design_fir(FilterKind kind, double cutoff_hz, double transition_hz, double fs,
                            double notch_width_hz = 1.0) {
  return design_fir(FirDesign{kind, {cutoff_hz}, transition_hz, fs, notch_width_hz});
}

// |H(f)| of a tap vector.
inline double magnitude_response(const std::vector<double>& taps, double freq_hz, double fs) {
  std::complex<double> acc{0.0, 0.0};
  const double w = 2.0 * M_PI * freq_hz / fs;
  for (size_t k = 0; k < taps.size(); ++k) acc += taps[k] * std::polar(1.0, -w * static_cast<double>(k));
  return std::abs(acc);
}

namespace fir_detail {

inline size_t smooth_fft_size(size_t n) {
  for (size_t m = std::max<size_t>(n, 1);; ++m) {
    size_t r = m;
    for (size_t p : {2, 3, 5}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

inline void filter_row_direct(const double* x, long n, const std::vector<double>& h, double* y) {
  const long half = static_cast<long>((h.size() - 1) / 2);
  const long k_len = static_cast<long>(h.size());
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (long k = 0; k < k_len; ++k) acc += h[static_cast<size_t>(k)] * x[reflect_index(i + half - k, n)];
    y[i] = acc;
  }
}

inline void filter_row_fft(const double* x, long n, const std::vector<double>& h, double* y,
                           Eigen::FFT<double>& fft, const std::vector<std::complex<double>>& h_spec, size_t len) {
  const long half = static_cast<long>((h.size() - 1) / 2);
  std::vector<double> z(len, 0.0);
  for (long j = 0; j < n + 2 * half; ++j) z[static_cast<size_t>(j)] = x[reflect_index(j - half, n)];
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, z);
  for (size_t i = 0; i < spec.size(); ++i) spec[i] *= h_spec[i];
  std::vector<double> c;
  fft.inv(c, spec);
  for (long i = 0; i < n; ++i) y[i] = c[static_cast<size_t>(i + 2 * half)];
}

}  // namespace fir_detail

// Zero-phase application: output sample i is centred on input sample i.
inline Recording filter_reflect(const Recording& rec, const FirFilter& f) {
  const long n = static_cast<long>(rec.n_samples());
  if (n <= static_cast<long>(f.taps.size())) {
    fail(ErrorCode::TooShort, "recording of " + std::to_string(n) + " samples is not longer than a " +
                                  std::to_string(f.taps.size()) + "-tap filter");
  }
  Recording out = rec;
  if (f.taps.size() <= 64) {
    for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
      fir_detail::filter_row_direct(rec.samples.row(c).data(), n, f.taps, out.samples.row(c).data());
    }
    return out;
  }
  const long half = static_cast<long>(f.half_length());
  const size_t len = fir_detail::smooth_fft_size(static_cast<size_t>(n + 2 * half) + f.taps.size() - 1);
  Eigen::FFT<double> fft;
  std::vector<double> h_padded(len, 0.0);
  std::copy(f.taps.begin(), f.taps.end(), h_padded.begin());
  std::vector<std::complex<double>> h_spec;
  fft.fwd(h_spec, h_padded);
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
    fir_detail::filter_row_fft(rec.samples.row(c).data(), n, f.taps, out.samples.row(c).data(), fft, h_spec, len);
  }
  return out;
}

}  // namespace lookaround
