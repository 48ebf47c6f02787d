#include "mca/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mca/augment.hpp"
#include "mca/colorspace.hpp"

namespace mca {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TimingStats summarize(std::string op, const VideoShape& shape, std::vector<double> times_ms) {
  if (times_ms.empty()) throw InvalidArgument("timing needs at least one run");
  TimingStats s;
  s.op = std::move(op);
  s.shape = shape;
  s.median_ms = median_of(times_ms);
  s.mean_ms = std::accumulate(times_ms.begin(), times_ms.end(), 0.0) / static_cast<double>(times_ms.size());
  std::vector<double> sorted = times_ms;
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
  s.p95_ms = sorted[std::max<std::size_t>(rank, 1) - 1];
  s.times_ms = std::move(times_ms);
  return s;
}

TimingStats time_op(std::string op, const VideoShape& shape, const std::function<void()>& fn, int runs, int warmup) {
  if (runs < 1) throw InvalidArgument("runs must be at least 1");
  if (warmup < 0) throw InvalidArgument("warmup must be non-negative");
  using Clock = std::chrono::steady_clock;
  for (int i = 0; i < warmup; ++i) fn();
  std::vector<double> times;
  times.reserve(runs);
  for (int i = 0; i < runs; ++i) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return summarize(std::move(op), shape, std::move(times));
}

MannWhitney mann_whitney(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw InvalidArgument("Mann-Whitney needs two non-empty samples");
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(a.size() + b.size());
  for (double x : a) pooled.emplace_back(x, 0);
  for (double x : b) pooled.emplace_back(x, 1);
  std::sort(pooled.begin(), pooled.end());

  double rank_sum_a = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double ties = static_cast<double>(j - i);
    tie_term += ties * ties * ties - ties;
    for (std::size_t k = i; k < j; ++k)
      if (pooled[k].second == 0) rank_sum_a += avg_rank;
    i = j;
  }
  MannWhitney r;
  r.u = rank_sum_a - n1 * (n1 + 1) / 2;
  const double n = n1 + n2;
  const double mean = n1 * n2 / 2;
  const double var = n1 * n2 / 12 * ((n + 1) - tie_term / (n * (n - 1)));
  if (var <= 0.0) {
    r.z = 0.0;
    r.p_value = 1.0;
    return r;
  }
  const double diff = r.u - mean;
  const double corrected = std::max(std::abs(diff) - 0.5, 0.0);
  r.z = std::copysign(corrected / std::sqrt(var), diff);
  r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  return r;
}

Comparison compare(const TimingStats& a, const TimingStats& b, double level) {
  if (!(a.shape == b.shape)) throw InvalidArgument("compare: timings were taken on different input shapes");
  if (a.runs() != b.runs()) throw InvalidArgument("compare: timings have different run counts");
  Comparison c;
  c.numerator = a.op;
  c.denominator = b.op;
  c.median_ratio = a.median_ms / b.median_ms;
  c.mean_ratio = a.mean_ms / b.mean_ms;
  c.test = mann_whitney(a.times_ms, b.times_ms);
  c.significant = c.test.p_value < level;
  return c;
}

HueVsSwapMix bench_hue_vs_swapmix(const VideoShape& shape, int runs, int warmup, std::uint64_t seed) {
  require_rgb(shape, "bench");
  Rng rng(seed);
  VideoF input(shape);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (Index i = 0; i < input.planes().size(); ++i) input.data()[i] = u(rng);
  const VideoF reference = input;

  const float delta = std::uniform_real_distribution<float>(-180.0f, 180.0f)(rng);
  const SwapMixDraw draw = sample_swap_mix(rng, 1.0);

  // Results go to a volatile sink.
  volatile float sink = 0.0f;
  HueVsSwapMix out;
  out.hue_jitter = time_op("hue_jitter", shape, [&] { sink = sink + hue_jitter(input, delta).data()[0]; }, runs, warmup);
  out.swap_mix = time_op("swap_mix", shape, [&] { sink = sink + swap_mix(input, draw.phi, draw.mix).data()[0]; }, runs,
                         warmup);
  if (!(input == reference)) throw Error("benchmarked operation mutated its input");
  out.comparison = compare(out.hue_jitter, out.swap_mix);
  return out;
}

std::string to_json(const std::vector<HueVsSwapMix>& results) {
  auto stats_json = [](const TimingStats& s) {
    nlohmann::ordered_json j;
    j["op"] = s.op;
    j["runs"] = s.runs();
    j["median_ms"] = s.median_ms;
    j["mean_ms"] = s.mean_ms;
    j["p95_ms"] = s.p95_ms;
    j["times_ms"] = s.times_ms;
    return j;
  };
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json j;
    j["shape"] = {r.hue_jitter.shape.frames, r.hue_jitter.shape.channels, r.hue_jitter.shape.height,
                  r.hue_jitter.shape.width};
    j["hue_jitter"] = stats_json(r.hue_jitter);
    j["swap_mix"] = stats_json(r.swap_mix);
    j["median_ratio"] = r.comparison.median_ratio;
    j["mean_ratio"] = r.comparison.mean_ratio;
    j["mann_whitney_u"] = r.comparison.test.u;
    j["mann_whitney_p"] = r.comparison.test.p_value;
    j["significant_at_0_01"] = r.comparison.significant;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

std::string format_table(const std::vector<HueVsSwapMix>& results) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %6s %12s %12s %12s %12s %9s %10s\n", "shape", "runs", "hue med ms",
                "hue mean ms", "swap med ms", "swap mean ms", "ratio", "p");
  out << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof(line), "%-16s %6d %12.3f %12.3f %12.3f %12.3f %9.2f %10.2e\n",
                  to_string(r.hue_jitter.shape).c_str(), r.hue_jitter.runs(), r.hue_jitter.median_ms,
                  r.hue_jitter.mean_ms, r.swap_mix.median_ms, r.swap_mix.mean_ms, r.comparison.median_ratio,
                  r.comparison.test.p_value);
    out << line;
  }
  return out.str();
}

}  // namespace mca
