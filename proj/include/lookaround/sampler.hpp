#pragma once

// Balanced epoch sampler: equal shares per category, even split across
// patients within a category, uniform start times inside the eligible
// regions of each patient.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lookaround/error.hpp"
#include "lookaround/recording.hpp"
#include "lookaround/windowing.hpp"

namespace lookaround {

// Inclusive range of target start samples.
struct SampleRange {
  long lo = 0;
  long hi = -1;
  long size() const { return hi >= lo ? hi - lo + 1 : 0; }
  friend bool operator==(const SampleRange&, const SampleRange&) = default;
};

using RangeList = std::vector<SampleRange>;

namespace ranges {

inline RangeList normalize(RangeList r) {
  std::erase_if(r, [](const SampleRange& s) { return s.size() == 0; });
  std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
  RangeList out;
  for (const auto& s : r) {
    if (!out.empty() && s.lo <= out.back().hi + 1) out.back().hi = std::max(out.back().hi, s.hi);
    else out.push_back(s);
  }
  return out;
}

inline RangeList intersect(const RangeList& a, const RangeList& b) {
  RangeList out;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const long lo = std::max(a[i].lo, b[j].lo);
    const long hi = std::min(a[i].hi, b[j].hi);
    if (lo <= hi) out.push_back({lo, hi});
    if (a[i].hi < b[j].hi) ++i;
    else ++j;
  }
  return out;
}

inline RangeList subtract(const RangeList& a, const RangeList& b) {
  RangeList out;
  for (auto s : a) {
    for (const auto& cut : b) {
      if (cut.hi < s.lo || cut.lo > s.hi) continue;
      if (cut.lo > s.lo) out.push_back({s.lo, cut.lo - 1});
      s.lo = cut.hi + 1;
      if (s.lo > s.hi) break;
    }
    if (s.size() > 0) out.push_back(s);
  }
  return normalize(out);
}

inline long total(const RangeList& r) {
  long n = 0;
  for (const auto& s : r) n += s.size();
  return n;
}

// Tightens an approximate [lo, hi] to the exact extent of a convex integer
// set given by `member`, clipped to [domain_lo, domain_hi].
inline SampleRange refine(long lo, long hi, long domain_lo, long domain_hi, const std::function<bool(long)>& member) {
  lo = std::max(lo, domain_lo);
  hi = std::min(hi, domain_hi);
  while (lo <= hi && !member(lo)) ++lo;
  while (hi >= lo && !member(hi)) --hi;
  if (lo > hi) return {0, -1};
  while (lo - 1 >= domain_lo && member(lo - 1)) --lo;
  while (hi + 1 <= domain_hi && member(hi + 1)) ++hi;
  return {lo, hi};
}

}  // namespace ranges

// Annotation-level description of one training recording.
struct TrainIndexEntry {
  std::string recording_id;
  std::string patient_id;
  double duration_s = 0.0;
  std::vector<AnnotationEvent> seizures;
  std::optional<std::vector<TimeInterval>> retained;  // hour-chunk curation for long-form recordings
};

struct EligibleRegions {
  std::array<RangeList, 3> by_category;  // indexed by SegmentCategory
};

// Exact eligible target-start sets per category on the sample grid.
inline EligibleRegions eligible_regions(const TrainIndexEntry& entry, const WindowSpec& spec) {
  const double fs = spec.fs;
  const double T = spec.target_s;
  const long target_n = spec.target_samples();
  const long n_samples = static_cast<long>(std::llround(entry.duration_s * fs));
  const long domain_hi = n_samples - target_n;
  EligibleRegions out;
  if (domain_hi < 0) return out;
  auto t_of = [fs](long k) { return static_cast<double>(k) / fs; };

  RangeList domain{{0, domain_hi}};
  if (entry.retained) {
    RangeList allowed;
    for (const auto& iv : *entry.retained) {
      allowed.push_back(ranges::refine(static_cast<long>(std::floor(iv.start_s * fs)) - 1,
                                       static_cast<long>(std::ceil((iv.end_s - T) * fs)) + 1, 0, domain_hi,
                                       [&](long k) { return t_of(k) >= iv.start_s && t_of(k) + T <= iv.end_s; }));
    }
    domain = ranges::intersect(domain, ranges::normalize(allowed));
  }

  RangeList contained, overlapping;
  for (const auto& e : entry.seizures) {
    const double a = e.onset_s, b = e.end_s();
    contained.push_back(ranges::refine(static_cast<long>(std::floor(a * fs)) - 1,
                                       static_cast<long>(std::ceil((b - T) * fs)) + 1, 0, domain_hi,
                                       [&](long k) { return a <= t_of(k) && t_of(k) + T <= b; }));
    overlapping.push_back(ranges::refine(static_cast<long>(std::floor((a - T) * fs)) - 1,
                                         static_cast<long>(std::ceil(b * fs)) + 1, 0, domain_hi,
                                         [&](long k) { return t_of(k) < b && t_of(k) + T > a; }));
  }
  contained = ranges::normalize(contained);
  overlapping = ranges::normalize(overlapping);
  out.by_category[static_cast<size_t>(SegmentCategory::fully_seizure)] = ranges::intersect(domain, contained);
  out.by_category[static_cast<size_t>(SegmentCategory::fully_nonseizure)] = ranges::subtract(domain, overlapping);
  out.by_category[static_cast<size_t>(SegmentCategory::mixed)] =
      ranges::intersect(domain, ranges::subtract(overlapping, contained));
  return out;
}

struct SamplerConfig {
  long segments_per_epoch = 60000;
  std::array<double, 3> proportions{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};  // by SegmentCategory
  uint64_t seed = 0;

  void validate() const {
    if (segments_per_epoch <= 0) fail(ErrorCode::InvalidConfig, "segments_per_epoch must be positive");
    double sum = 0.0;
    for (double p : proportions) {
      if (p < 0.0) fail(ErrorCode::InvalidConfig, "negative category proportion");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail(ErrorCode::InvalidConfig, "category proportions must sum to 1");
  }
};

struct SegmentRef {
  size_t entry = 0;  // index into the train index
  std::string recording_id;
  std::string patient_id;
  long start_sample = 0;
  double start_s = 0.0;
  SegmentCategory category = SegmentCategory::fully_nonseizure;
  TargetLabel label = TargetLabel::nonseizure;

  friend bool operator==(const SegmentRef&, const SegmentRef&) = default;
};

// Largest-remainder apportionment of `total` by `weights`.
inline std::array<long, 3> apportion(long total, const std::array<double, 3>& weights) {
  std::array<long, 3> counts{};
  std::array<double, 3> remainder{};
  long assigned = 0;
  for (size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(total) * weights[i];
    counts[i] = static_cast<long>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return remainder[a] > remainder[b]; });
  for (size_t i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % 3]];
  return counts;
}

class EpochSampler {
 public:
  EpochSampler(std::vector<TrainIndexEntry> entries, WindowSpec spec)
      : entries_(std::move(entries)), spec_(spec) {
    spec_.validate();
    for (size_t i = 0; i < entries_.size(); ++i) {
      regions_.push_back(eligible_regions(entries_[i], spec_));
      patients_[entries_[i].patient_id].push_back(i);
    }
  }

  const std::vector<TrainIndexEntry>& entries() const { return entries_; }
  const EligibleRegions& regions(size_t entry) const { return regions_[entry]; }

  // Deterministic in (cfg.seed, epoch_seed). The returned list is shuffled.
  std::vector<SegmentRef> sample_epoch(const SamplerConfig& cfg, uint64_t epoch_seed) const {
    cfg.validate();
    std::seed_seq seq{static_cast<uint32_t>(cfg.seed), static_cast<uint32_t>(cfg.seed >> 32),
                      static_cast<uint32_t>(epoch_seed), static_cast<uint32_t>(epoch_seed >> 32), 0x5eedu};
    std::mt19937_64 rng(seq);
    const auto counts = apportion(cfg.segments_per_epoch, cfg.proportions);

    std::vector<SegmentRef> out;
    out.reserve(static_cast<size_t>(cfg.segments_per_epoch));
    for (size_t cat = 0; cat < 3; ++cat) {
      if (counts[cat] == 0) continue;
      std::vector<std::string> eligible;
      for (const auto& [patient, idx] : patients_) {
        long avail = 0;
        for (size_t e : idx) avail += ranges::total(regions_[e].by_category[cat]);
        if (avail > 0) eligible.push_back(patient);
      }
      if (eligible.empty()) {
        fail(ErrorCode::EmptyCategory, "no patient can provide " +
                                           std::string(to_string(static_cast<SegmentCategory>(cat))) + " segments");
      }
      std::shuffle(eligible.begin(), eligible.end(), rng);
      const long k = static_cast<long>(eligible.size());
      for (long p = 0; p < k; ++p) {
        const long quota = counts[cat] / k + (p < counts[cat] % k ? 1 : 0);
        draw_for_patient(eligible[static_cast<size_t>(p)], cat, quota, rng, out);
      }
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
  }

 private:
  void draw_for_patient(const std::string& patient, size_t cat, long quota, std::mt19937_64& rng,
                        std::vector<SegmentRef>& out) const {
    const auto& idx = patients_.at(patient);
    long avail = 0;
    for (size_t e : idx) avail += ranges::total(regions_[e].by_category[cat]);
    std::uniform_int_distribution<long> pick(0, avail - 1);
    for (long q = 0; q < quota; ++q) {
      long u = pick(rng);
      for (size_t e : idx) {
        for (const auto& r : regions_[e].by_category[cat]) {
          if (u < r.size()) {
            SegmentRef ref;
            ref.entry = e;
            ref.recording_id = entries_[e].recording_id;
            ref.patient_id = patient;
            ref.start_sample = r.lo + u;
            ref.start_s = static_cast<double>(ref.start_sample) / spec_.fs;
            auto lab = label_target(entries_[e].seizures, ref.start_s, spec_.target_s);
            ref.category = lab.category;
            ref.label = lab.label;
            out.push_back(std::move(ref));
            u = -1;
            break;
          }
          u -= r.size();
        }
        if (u < 0) break;
      }
    }
  }

  std::vector<TrainIndexEntry> entries_;
  WindowSpec spec_;
  std::vector<EligibleRegions> regions_;
  std::map<std::string, std::vector<size_t>> patients_;
};

}  // namespace lookaround
