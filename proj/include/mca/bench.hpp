#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mca/video.hpp"

namespace mca {

struct TimingStats {
  std::string op;
  VideoShape shape;
  std::vector<double> times_ms;  // one entry per timed run, in execution order
  double median_ms = 0.0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;

  int runs() const { return static_cast<int>(times_ms.size()); }
};

/// Median, mean and nearest-rank 95th percentile of the recorded times.
TimingStats summarize(std::string op, const VideoShape& shape, std::vector<double> times_ms);

/// Runs `op` `warmup` times untimed, then `runs` times against a monotonic
/// clock, one wall time per run. Single-threaded.
TimingStats time_op(std::string op, const VideoShape& shape, const std::function<void()>& fn, int runs, int warmup);

/// Two-sided Mann-Whitney U test (normal approximation with tie and
/// continuity corrections).
struct MannWhitney {
  double u = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};
MannWhitney mann_whitney(const std::vector<double>& a, const std::vector<double>& b);

struct Comparison {
  std::string numerator;
  std::string denominator;
  double median_ratio = 1.0;
  double mean_ratio = 1.0;
  MannWhitney test;
  bool significant = false;
};

/// Ratio of medians a / b with a significance flag at `level`.
Comparison compare(const TimingStats& a, const TimingStats& b, double level = 0.01);

inline constexpr int kDefaultBenchRuns = 500;
inline constexpr int kDefaultBenchWarmup = 20;

struct HueVsSwapMix {
  TimingStats hue_jitter;
  TimingStats swap_mix;
  Comparison comparison;  // hue_jitter / swap_mix
};

/// Times the HSV round-trip hue shift and SwapMix on the same random clip.
HueVsSwapMix bench_hue_vs_swapmix(const VideoShape& shape, int runs, int warmup, std::uint64_t seed);

std::string to_json(const std::vector<HueVsSwapMix>& results);
std::string format_table(const std::vector<HueVsSwapMix>& results);

}  // namespace mca
