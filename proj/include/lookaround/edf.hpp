#pragma once

// Continuous EDF (and EDF+C without annotation use) reader and writer.
// 256-byte fixed header, 256 bytes per signal header, int16 LE samples
// stored record by record.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "lookaround/error.hpp"
#include "lookaround/recording.hpp"

namespace lookaround {

struct EdfSignalHeader {
  std::string label;
  std::string transducer;
  std::string physical_dimension = "uV";
  double physical_min = -200.0;
  double physical_max = 200.0;
  int digital_min = -32768;
  int digital_max = 32767;
  std::string prefiltering;
  int samples_per_record = 0;

  double scale() const {
    return (physical_max - physical_min) / static_cast<double>(digital_max - digital_min);
  }
  double to_physical(int digital) const {
    return static_cast<double>(digital - digital_min) * (physical_max - physical_min) /
               static_cast<double>(digital_max - digital_min) +
           physical_min;
  }
};

struct EdfHeader {
  std::string version = "0";
  std::string patient_id;
  std::string recording_id;
  std::string start_date = "01.01.00";
  std::string start_time = "00.00.00";
  std::string reserved;
  long n_records = 0;
  double record_duration_s = 1.0;
  std::vector<EdfSignalHeader> signals;
};

struct EdfFile {
  EdfHeader header;
  std::vector<std::vector<int16_t>> digital;  // per signal, all records concatenated
};

namespace edf_detail {

inline std::string field(const std::vector<char>& bytes, size_t offset, size_t width) {
  std::string s(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                bytes.begin() + static_cast<std::ptrdiff_t>(offset + width));
  for (char c : s) {
    auto u = static_cast<unsigned char>(c);
    if (u < 32 || u > 126) fail(ErrorCode::MalformedHeader, "non-ASCII byte in header field");
  }
  return detail::trim(s);
}

inline double parse_double(const std::string& text, const char* what) {
  if (text.empty()) fail(ErrorCode::MalformedHeader, std::string("empty field ") + what);
  char* end = nullptr;
  double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || !std::isfinite(v)) {
    fail(ErrorCode::MalformedHeader, std::string("bad numeric field ") + what + " '" + text + "'");
  }
  return v;
}

inline long parse_long(const std::string& text, const char* what) {
  if (text.empty()) fail(ErrorCode::MalformedHeader, std::string("empty field ") + what);
  char* end = nullptr;
  long v = std::strtol(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size()) {
    fail(ErrorCode::MalformedHeader, std::string("bad integer field ") + what + " '" + text + "'");
  }
  return v;
}

inline void put(std::string& out, std::string_view value, size_t width) {
  if (value.size() > width) fail(ErrorCode::MalformedHeader, "value too wide for EDF field: " + std::string(value));
  out.append(value);
  out.append(width - value.size(), ' ');
}

// Shortest representation that fits 8 characters and parses back to itself.
inline std::string format_number(double v) {
  char buf[32];
  for (int prec = 8; prec >= 1; --prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    std::string s(buf);
    if (s.size() <= 8) return s;
  }
  fail(ErrorCode::MalformedHeader, "number does not fit an 8-character EDF field");
}

// Formats a bound rounded away from the data so the range still covers it.
inline std::string format_bound(double v, bool lower) {
  std::string s = format_number(v);
  double parsed = std::strtod(s.c_str(), nullptr);
  double step = std::max(std::abs(v) * 1e-6, 1e-6);
  while (lower ? parsed > v : parsed < v) {
    v = lower ? v - step : v + step;
    step *= 2.0;
    s = format_number(v);
    parsed = std::strtod(s.c_str(), nullptr);
  }
  return s;
}

inline double unit_scale_to_microvolts(const std::string& dim) {
  std::string d = detail::upper(dim);
  if (d == "MV") return 1e3;
  if (d == "V") return 1e6;
  if (d == "NV") return 1e-3;
  return 1.0;  // uV, µV or unspecified
}

}  // namespace edf_detail

inline EdfFile parse_edf_bytes(const std::vector<char>& bytes) {
  using namespace edf_detail;
  if (bytes.size() < 256) fail(ErrorCode::MalformedHeader, "file shorter than the fixed header");
  EdfFile file;
  EdfHeader& h = file.header;
  h.version = field(bytes, 0, 8);
  if (h.version != "0") fail(ErrorCode::MalformedHeader, "unsupported version '" + h.version + "'");
  h.patient_id = field(bytes, 8, 80);
  h.recording_id = field(bytes, 88, 80);
  h.start_date = field(bytes, 168, 8);
  h.start_time = field(bytes, 176, 8);
  long header_bytes = parse_long(field(bytes, 184, 8), "header bytes");
  h.reserved = field(bytes, 192, 44);
  if (h.reserved.rfind("EDF+D", 0) == 0) fail(ErrorCode::MalformedHeader, "discontinuous EDF+ is not supported");
  h.n_records = parse_long(field(bytes, 236, 8), "number of records");
  h.record_duration_s = parse_double(field(bytes, 244, 8), "record duration");
  long ns = parse_long(field(bytes, 252, 4), "number of signals");
  if (ns <= 0) fail(ErrorCode::MalformedHeader, "no signals");
  if (header_bytes != 256 * (ns + 1)) fail(ErrorCode::MalformedHeader, "header byte count inconsistent with signal count");
  if (!(h.record_duration_s > 0.0)) fail(ErrorCode::MalformedHeader, "record duration must be positive");
  if (bytes.size() < static_cast<size_t>(header_bytes)) fail(ErrorCode::MalformedHeader, "signal headers truncated");

  const auto n = static_cast<size_t>(ns);
  h.signals.resize(n);
  size_t base = 256;
  auto column = [&](size_t start_width_sum, size_t width, size_t i) {
    return field(bytes, base + start_width_sum * n + i * width, width);
  };
  for (size_t i = 0; i < n; ++i) {
    auto& s = h.signals[i];
    s.label = column(0, 16, i);
    s.transducer = column(16, 80, i);
    s.physical_dimension = column(96, 8, i);
    s.physical_min = parse_double(column(104, 8, i), "physical minimum");
    s.physical_max = parse_double(column(112, 8, i), "physical maximum");
    s.digital_min = static_cast<int>(parse_long(column(120, 8, i), "digital minimum"));
    s.digital_max = static_cast<int>(parse_long(column(128, 8, i), "digital maximum"));
    s.prefiltering = column(136, 80, i);
    s.samples_per_record = static_cast<int>(parse_long(column(216, 8, i), "samples per record"));
    if (s.digital_max <= s.digital_min) fail(ErrorCode::MalformedHeader, "digital max must exceed digital min");
    if (s.digital_min < -32768 || s.digital_max > 32767) fail(ErrorCode::MalformedHeader, "digital range exceeds 16 bits");
    if (s.physical_max == s.physical_min) fail(ErrorCode::MalformedHeader, "degenerate physical range");
    if (s.samples_per_record <= 0) fail(ErrorCode::MalformedHeader, "samples per record must be positive");
  }

  size_t record_samples = 0;
  for (const auto& s : h.signals) record_samples += static_cast<size_t>(s.samples_per_record);
  const size_t record_bytes = record_samples * 2;
  const size_t payload = bytes.size() - static_cast<size_t>(header_bytes);
  if (h.n_records < 0) {
    h.n_records = static_cast<long>(payload / record_bytes);
  }
  if (payload < static_cast<size_t>(h.n_records) * record_bytes) {
    fail(ErrorCode::TruncatedRecord, "data section holds " + std::to_string(payload) + " bytes, header claims " +
                                         std::to_string(static_cast<size_t>(h.n_records) * record_bytes));
  }

  file.digital.resize(n);
  for (size_t i = 0; i < n; ++i) file.digital[i].reserve(static_cast<size_t>(h.n_records) * h.signals[i].samples_per_record);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data()) + header_bytes;
  size_t pos = 0;
  for (long r = 0; r < h.n_records; ++r) {
    for (size_t i = 0; i < n; ++i) {
      for (int k = 0; k < h.signals[i].samples_per_record; ++k) {
        auto value = static_cast<uint16_t>(data[pos] | (data[pos + 1] << 8));
        file.digital[i].push_back(static_cast<int16_t>(value));
        pos += 2;
      }
    }
  }
  return file;
}

inline std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Converts a parsed EDF into a Recording of scalp EEG channels in microvolts.
inline Recording edf_to_recording(const EdfFile& file, std::string id = {}) {
  const auto& h = file.header;
  std::vector<size_t> keep;
  std::vector<std::string> labels;
  for (size_t i = 0; i < h.signals.size(); ++i) {
    auto label = normalize_electrode_label(h.signals[i].label);
    if (!label) continue;
    keep.push_back(i);
    labels.push_back(*label);
  }
  if (keep.empty()) fail(ErrorCode::MalformedHeader, "no EEG signals");
  const int spr = h.signals[keep.front()].samples_per_record;
  for (size_t i : keep) {
    if (h.signals[i].samples_per_record != spr) {
      fail(ErrorCode::MixedSamplingRates, "signal '" + h.signals[i].label + "' has " +
                                              std::to_string(h.signals[i].samples_per_record) +
                                              " samples per record, expected " + std::to_string(spr));
    }
  }
  Recording rec;
  rec.id = id.empty() ? h.recording_id : std::move(id);
  rec.patient_id = h.patient_id;
  rec.channel_labels = labels;
  rec.fs = spr / h.record_duration_s;
  const auto n_samples = static_cast<Eigen::Index>(h.n_records) * spr;
  rec.samples.resize(static_cast<Eigen::Index>(keep.size()), n_samples);
  for (size_t row = 0; row < keep.size(); ++row) {
    const auto& sig = h.signals[keep[row]];
    const double unit = edf_detail::unit_scale_to_microvolts(sig.physical_dimension);
    const auto& dig = file.digital[keep[row]];
    for (Eigen::Index k = 0; k < n_samples; ++k) {
      double v = sig.to_physical(dig[static_cast<size_t>(k)]);
      rec.samples(static_cast<Eigen::Index>(row), k) = unit == 1.0 ? v : v * unit;
    }
  }
  validate_recording(rec);
  return rec;
}

inline Recording read_edf(const std::filesystem::path& path) {
  return edf_to_recording(parse_edf_bytes(read_file_bytes(path)), path.stem().string());
}

inline std::vector<char> serialize_edf(const EdfFile& file) {
  using namespace edf_detail;
  const auto& h = file.header;
  const size_t n = h.signals.size();
  std::string out;
  put(out, h.version, 8);
  put(out, h.patient_id, 80);
  put(out, h.recording_id, 80);
  put(out, h.start_date, 8);
  put(out, h.start_time, 8);
  put(out, std::to_string(256 * (n + 1)), 8);
  put(out, h.reserved, 44);
  put(out, std::to_string(h.n_records), 8);
  put(out, format_number(h.record_duration_s), 8);
  put(out, std::to_string(n), 4);
  for (const auto& s : h.signals) put(out, s.label, 16);
  for (const auto& s : h.signals) put(out, s.transducer, 80);
  for (const auto& s : h.signals) put(out, s.physical_dimension, 8);
  for (const auto& s : h.signals) put(out, format_number(s.physical_min), 8);
  for (const auto& s : h.signals) put(out, format_number(s.physical_max), 8);
  for (const auto& s : h.signals) put(out, std::to_string(s.digital_min), 8);
  for (const auto& s : h.signals) put(out, std::to_string(s.digital_max), 8);
  for (const auto& s : h.signals) put(out, s.prefiltering, 80);
  for (const auto& s : h.signals) put(out, std::to_string(s.samples_per_record), 8);
  for (size_t i = 0; i < n; ++i) put(out, "", 32);

  std::vector<char> bytes(out.begin(), out.end());
  for (long r = 0; r < h.n_records; ++r) {
    for (size_t i = 0; i < n; ++i) {
      const int spr = h.signals[i].samples_per_record;
      for (int k = 0; k < spr; ++k) {
        auto v = static_cast<uint16_t>(file.digital[i][static_cast<size_t>(r) * spr + k]);
        bytes.push_back(static_cast<char>(v & 0xff));
        bytes.push_back(static_cast<char>(v >> 8));
      }
    }
  }
  return bytes;
}

inline void write_edf_file(const std::filesystem::path& path, const EdfFile& file) {
  auto bytes = serialize_edf(file);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Quantizes a Recording to 16 bits with one-second records. Requires an
// integral sampling rate and a whole number of seconds.
inline EdfFile recording_to_edf(const Recording& rec) {
  const double fs_rounded = std::round(rec.fs);
  if (fs_rounded != rec.fs) fail(ErrorCode::InvalidConfig, "EDF writer needs an integral sampling rate");
  const auto spr = static_cast<Eigen::Index>(fs_rounded);
  if (rec.n_samples() % spr != 0) fail(ErrorCode::InvalidConfig, "EDF writer needs whole one-second records");
  EdfFile file;
  file.header.patient_id = rec.patient_id;
  file.header.recording_id = rec.id;
  file.header.n_records = static_cast<long>(rec.n_samples() / spr);
  file.header.record_duration_s = 1.0;
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
    EdfSignalHeader s;
    s.label = "EEG " + rec.channel_labels[static_cast<size_t>(c)];
    s.samples_per_record = static_cast<int>(spr);
    double lo = rec.samples.row(c).minCoeff();
    double hi = rec.samples.row(c).maxCoeff();
    if (hi - lo < 1e-3) {
      lo -= 1.0;
      hi += 1.0;
    }
    s.physical_min = std::strtod(edf_detail::format_bound(lo, true).c_str(), nullptr);
    s.physical_max = std::strtod(edf_detail::format_bound(hi, false).c_str(), nullptr);
    std::vector<int16_t> dig(static_cast<size_t>(rec.n_samples()));
    const double inv = static_cast<double>(s.digital_max - s.digital_min) / (s.physical_max - s.physical_min);
    for (Eigen::Index k = 0; k < rec.n_samples(); ++k) {
      double d = std::round((rec.samples(c, k) - s.physical_min) * inv + s.digital_min);
      d = std::clamp(d, static_cast<double>(s.digital_min), static_cast<double>(s.digital_max));
      dig[static_cast<size_t>(k)] = static_cast<int16_t>(d);
    }
    file.header.signals.push_back(std::move(s));
    file.digital.push_back(std::move(dig));
  }
  return file;
}

inline void write_edf(const std::filesystem::path& path, const Recording& rec) {
  write_edf_file(path, recording_to_edf(rec));
}

}  // namespace lookaround
