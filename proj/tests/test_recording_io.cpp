#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "lookaround/annotations.hpp"
#include "lookaround/edf.hpp"
#include "lookaround/raw_format.hpp"
#include "test_util.hpp"

using namespace lookaround;

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

AnnotationSet parse_tsv(const std::string& body, double duration = 3600.0) {
  std::istringstream in("onset\tduration\teventType\n" + body);
  return parse_annotations(in, duration, "r");
}

}  // namespace

TEST(Edf, PhysicalEndpoints) {
  EdfSignalHeader s;
  s.digital_min = -2048;
  s.digital_max = 2047;
  s.physical_min = -200;
  s.physical_max = 200;
  EXPECT_EQ(s.to_physical(-2048), -200.0);
  EXPECT_DOUBLE_EQ(s.to_physical(2047), 200.0);
  EXPECT_NEAR(s.to_physical(0), 2048.0 * (400.0 / 4095.0) - 200.0, 1e-12);
  EXPECT_NEAR(s.to_physical(0), 0.0489, 1e-4);
}

TEST(Edf, LabelNormalization) {
  EXPECT_EQ(normalize_electrode_label("EEG FP1-REF").value(), "Fp1");
  EXPECT_EQ(normalize_electrode_label("eeg t7-le").value(), "T3");
  EXPECT_EQ(normalize_electrode_label("Cz").value(), "Cz");
  EXPECT_FALSE(normalize_electrode_label("ECG").has_value());
  EXPECT_FALSE(normalize_electrode_label("EDF Annotations").has_value());
}

TEST(Edf, SerializeRoundTripIsBitExact) {
  auto rec = testutil::random_recording({"Fp1", "Fp2", "Cz"}, 256.0, 256 * 4, 11);
  auto file = recording_to_edf(rec);
  auto bytes = serialize_edf(file);
  auto parsed = parse_edf_bytes(bytes);
  EXPECT_EQ(serialize_edf(parsed), bytes);
  EXPECT_EQ(parsed.digital, file.digital);
}

TEST(Edf, ReadBackWithinOneQuantum) {
  testutil::TempDir dir("edf");
  auto rec = testutil::random_recording({"Fp1", "F3", "O2"}, 256.0, 256 * 3, 5);
  write_edf(dir / "x.edf", rec);
  auto back = read_edf(dir / "x.edf");
  ASSERT_EQ(back.channel_labels, rec.channel_labels);
  EXPECT_EQ(back.fs, 256.0);
  ASSERT_EQ(back.n_samples(), rec.n_samples());
  auto file = parse_edf_bytes(read_file_bytes(dir / "x.edf"));
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
    const double q = file.header.signals[static_cast<size_t>(c)].scale();
    EXPECT_LE((back.samples.row(c) - rec.samples.row(c)).cwiseAbs().maxCoeff(), q);
  }
}

TEST(Edf, DropsNonEegSignals) {
  auto rec = testutil::random_recording({"Fp1", "Fp2"}, 128.0, 128, 1);
  auto file = recording_to_edf(rec);
  file.header.signals[1].label = "ECG";
  auto out = edf_to_recording(file, "x");
  EXPECT_EQ(out.channel_labels, std::vector<std::string>{"Fp1"});
}

TEST(Edf, Errors) {
  auto rec = testutil::random_recording({"Fp1", "Fp2"}, 128.0, 256, 1);
  auto file = recording_to_edf(rec);
  auto bytes = serialize_edf(file);

  auto bad = bytes;
  bad[0] = '9';
  EXPECT_EQ(code_of([&] { parse_edf_bytes(bad); }), ErrorCode::MalformedHeader);

  bad = bytes;
  std::fill(bad.begin() + 236, bad.begin() + 244, 'x');
  EXPECT_EQ(code_of([&] { parse_edf_bytes(bad); }), ErrorCode::MalformedHeader);

  bad = bytes;
  bad.resize(bad.size() - 2);
  EXPECT_EQ(code_of([&] { parse_edf_bytes(bad); }), ErrorCode::TruncatedRecord);

  auto mixed = file;
  mixed.header.signals[1].samples_per_record = 64;
  mixed.digital[1].resize(128);
  EXPECT_EQ(code_of([&] { edf_to_recording(parse_edf_bytes(serialize_edf(mixed))); }),
            ErrorCode::MixedSamplingRates);
}

TEST(Raw, ZerosAndDuration) {
  testutil::TempDir dir("raw");
  Recording rec;
  rec.id = "z";
  rec.fs = 128.0;
  rec.channel_labels = {"Fp1", "Fp2"};
  rec.samples = SignalMatrix::Zero(2, 4);
  write_raw(dir / "z", rec);
  auto back = read_raw(dir / "z.json");
  EXPECT_TRUE(back.samples.isZero(0));
  EXPECT_DOUBLE_EQ(back.duration_s(), 4.0 / 128.0);

  auto one = testutil::random_recording({"Fp1", "Fp2"}, 256.0, 256, 3);
  write_raw(dir / "one", one);
  auto b1 = read_raw(dir / "one.bin");
  EXPECT_DOUBLE_EQ(b1.duration_s(), 1.0);
  EXPECT_LE((b1.samples - one.samples).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_TRUE(raw_payload_intact(dir / "one"));
}

TEST(Raw, TruncatedPayload) {
  testutil::TempDir dir("rawtrunc");
  auto rec = testutil::random_recording({"Fp1", "Fp2"}, 256.0, 512, 3);
  write_raw(dir / "t", rec);
  auto payload = dir / "t.bin";
  std::filesystem::resize_file(payload, std::filesystem::file_size(payload) - 4);
  EXPECT_EQ(code_of([&] { read_raw(dir / "t"); }), ErrorCode::HeaderPayloadMismatch);
  EXPECT_FALSE(raw_payload_intact(dir / "t"));
}

TEST(Annotations, MergesOverlappingSeizures) {
  auto a = parse_tsv("10\t20\tsz\n25\t10\tsz\n");
  ASSERT_EQ(a.events.size(), 1u);
  EXPECT_EQ(a.events[0].onset_s, 10.0);
  EXPECT_EQ(a.events[0].end_s(), 35.0);
}

TEST(Annotations, BackgroundDropped) {
  EXPECT_TRUE(parse_tsv("0\t5\tbckg\n").events.empty());
}

TEST(Annotations, Errors) {
  EXPECT_EQ(code_of([] { parse_tsv("3590\t20\tsz\n"); }), ErrorCode::OutOfBounds);
  EXPECT_EQ(code_of([] { parse_tsv("100\t-1\tsz\n"); }), ErrorCode::NegativeDuration);
}

TEST(Annotations, OrderIndependentAndIdempotent) {
  std::mt19937 rng(7);
  std::vector<std::string> rows;
  std::uniform_real_distribution<double> onset(0, 3000), dur(1, 200);
  for (int i = 0; i < 30; ++i) {
    std::ostringstream r;
    r << onset(rng) << '\t' << dur(rng) << '\t' << (i % 4 == 0 ? "bckg" : "sz") << '\n';
    rows.push_back(r.str());
  }
  auto joined = [&] {
    std::string s;
    for (auto& r : rows) s += r;
    return s;
  };
  const auto ref = parse_tsv(joined());
  for (int k = 0; k < 5; ++k) {
    std::shuffle(rows.begin(), rows.end(), rng);
    EXPECT_EQ(parse_tsv(joined()), ref);
  }
  for (size_t i = 1; i < ref.events.size(); ++i) EXPECT_GT(ref.events[i].onset_s, ref.events[i - 1].end_s());

  std::ostringstream again;
  write_events_tsv(again, ref.events);
  std::istringstream in(again.str());
  auto twice = parse_annotations(in, 3600.0, "r");
  ASSERT_EQ(twice.events.size(), ref.events.size());
  for (size_t i = 0; i < ref.events.size(); ++i) {
    EXPECT_NEAR(twice.events[i].onset_s, ref.events[i].onset_s, 1e-6);
    EXPECT_NEAR(twice.events[i].duration_s, ref.events[i].duration_s, 1e-6);
  }
}
