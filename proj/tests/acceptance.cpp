// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mca/augment.hpp"
#include "mca/bench.hpp"
#include "mca/cli.hpp"
#include "mca/colorspace.hpp"
#include "mca/losses.hpp"
#include "mca/metrics.hpp"
#include "mca/smallnet.hpp"
#include "mca/trainer.hpp"

using namespace mca;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d  %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Saturation and value straight from the channel extremes, independent of the library.
std::array<double, 2> saturation_value(double r, double g, double b) {
  const double hi = std::max({r, g, b}), lo = std::min({r, g, b});
  return {hi == 0.0 ? 0.0 : (hi - lo) / hi, hi};
}

void colorspace_roundtrip() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::uniform_int_distribution<int> q(0, 3);
  std::array<int, 5> hits{};
  float worst = 0.0f;
  for (int i = 0; i < 100000; ++i) {
    Rgb<float> p;
    if (i % 2 == 0) {
      p = {u(rng), u(rng), u(rng)};
    } else {
      p = {q(rng) * 85 / 255.0f, q(rng) * 85 / 255.0f, q(rng) * 85 / 255.0f};
    }
    ++hits[static_cast<int>(hue_branch(p))];
    const auto back = hsv_to_rgb(rgb_to_hsv(p));
    worst = std::max({worst, std::abs(back.r - p.r), std::abs(back.g - p.g), std::abs(back.b - p.b)});
  }
  const bool all = std::all_of(hits.begin(), hits.end(), [](int h) { return h > 0; });
  report(1, "colorspace round trip", worst <= 1e-6f && all,
         fmt("max err %.2e over 1e5 px, ", worst) + (all ? "all 5 branches hit" : "branch missing"));
}

void hue_only() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  double worst = 0.0;
  VideoF frame({1, 3, 16, 16});
  for (int f = 0; f < 1000; ++f) {
    for (Index i = 0; i < frame.planes().size(); ++i) frame.data()[i] = u(rng);
    for (const Permutation& phi : Permutation::non_identity()) {
      const VideoF out = channel_swap(frame, phi);
      for (Index i = 0; i < frame.shape().pixels(); ++i) {
        const auto a = saturation_value(frame.frame(0)(i, 0), frame.frame(0)(i, 1), frame.frame(0)(i, 2));
        const auto b = saturation_value(out.frame(0)(i, 0), out.frame(0)(i, 1), out.frame(0)(i, 2));
        worst = std::max({worst, std::abs(a[0] - b[0]), std::abs(a[1] - b[1])});
      }
    }
  }
  report(2, "channel swap keeps S and V", worst <= 1e-6, fmt("max |dS|,|dV| %.2e over 1e3 frames x 5 perms", worst));
}

void swapmix_algebra() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  bool one = true, zero = true, convex = true;
  VideoF v({2, 3, 8, 8});
  for (int trial = 0; trial < 200; ++trial) {
    for (Index i = 0; i < v.planes().size(); ++i) v.data()[i] = u(rng);
    for (const Permutation& phi : Permutation::non_identity()) {
      const VideoF swapped = channel_swap(v, phi);
      one &= swap_mix(v, phi, MixCoefficient{1.0, 1.0}) == v;
      zero &= swap_mix(v, phi, MixCoefficient{0.0, 1.0}) == swapped;
      const VideoF mixed = swap_mix(v, phi, MixCoefficient{u(rng), 1.0});
      for (Index i = 0; i < v.planes().size(); ++i) {
        const float lo = std::min(v.data()[i], swapped.data()[i]);
        const float hi = std::max(v.data()[i], swapped.data()[i]);
        convex &= mixed.data()[i] >= lo && mixed.data()[i] <= hi;
      }
    }
  }
  report(3, "SwapMix algebra", one && zero && convex,
         std::string("lambda=1 exact: ") + (one ? "yes" : "no") + ", lambda=0 exact: " + (zero ? "yes" : "no") +
             ", convex: " + (convex ? "yes" : "no"));
}

double network_gradient_error(std::uint64_t seed) {
  NetConfig c;
  c.classes = 2;
  c.frames = 4;
  c.height = c.width = 8;
  Rng rng(seed);
  SmallNet<double> net = SmallNet<double>::initialized(c, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Video<double>> clean, aug;
  for (int i = 0; i < 3; ++i) {
    Video<double> v(c.input_shape());
    for (Index k = 0; k < v.planes().size(); ++k) v.data()[k] = u(rng);
    const SwapMixDraw d = sample_swap_mix(rng, 1.0);
    aug.push_back(swap_mix(v, d.phi, d.mix));
    clean.push_back(std::move(v));
  }
  const std::vector<int> labels{0, 1, 0};
  const MatrixX<double> target = softmax_columns(net.forward(clean, false).logits);
  auto objective = [&] {
    const MatrixX<double> pc = softmax_columns(net.forward(clean, false).logits);
    const MatrixX<double> pa = softmax_columns(net.forward(aug, false).logits);
    double total = 0.0;
    for (Index i = 0; i < 3; ++i) {
      total -= std::log(pc(labels[i], i));
      for (Index k = 0; k < 2; ++k) total += target(k, i) * (std::log(target(k, i)) - std::log(pa(k, i)));
    }
    return total / 3.0;
  };

  const ForwardPass<double> cp = net.forward(clean), ap = net.forward(aug);
  const MatrixX<double> pc = softmax_columns(cp.logits), pa = softmax_columns(ap.logits);
  MatrixX<double> dc = pc, da = pa - target;
  for (Index i = 0; i < 3; ++i) dc(labels[i], i) -= 1.0;
  net.backward(cp, dc / 3.0);
  net.backward(ap, da / 3.0);
  const auto analytic = net.flat_gradients();
  auto theta = net.flat_parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i], h = 1e-3;
    theta[i] = saved + h;
    net.set_flat_parameters(theta);
    const double up = objective();
    theta[i] = saved - h;
    net.set_flat_parameters(theta);
    const double down = objective();
    theta[i] = saved;
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(numeric - analytic[i]) /
                                std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6}));
  }
  return worst;
}

void losses() {
  std::mt19937_64 rng(4);
  std::gamma_distribution<double> g(0.7, 1.0);
  bool nonneg = true, zero_iff = true;
  for (int i = 0; i < 10000; ++i) {
    const int k = 2 + i % 7;
    VectorX<double> p(k), q(k);
    for (int j = 0; j < k; ++j) {
      p(j) = g(rng) + 1e-9;
      q(j) = g(rng) + 1e-9;
    }
    p /= p.sum();
    q /= q.sum();
    const double d = av_loss(p, q).value;
    nonneg &= d >= 0.0;
    zero_iff &= d > 0.0 && std::abs(av_loss(p, p).value) < 1e-12;
  }
  VectorX<double> a(2), b(2);
  a << 0.5, 0.5;
  b << 0.25, 0.75;
  const double worked = av_loss(a, b).value;
  double grad = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) grad = std::max(grad, network_gradient_error(seed));
  const bool pass = nonneg && zero_iff && std::abs(worked - 0.1438) <= 1e-4 && grad < 1e-3;
  report(4, "loss correctness", pass,
         fmt("KL example %.4f, ", worked) + fmt("max grad rel err %.2e (3 seeds)", grad) +
             (nonneg && zero_iff ? ", KL >= 0 and zero iff equal" : ", KL sign/zero check failed"));
}

void degeneration(const MotionShapesData& data) {
  TrainConfig base;
  base.mode = AblationMode::kBaseline;
  base.epochs = 2;
  base.seed = 5;
  TrainConfig no_gate = base, no_align = base;
  no_gate.mode = no_align.mode = AblationMode::kMca;
  no_gate.rho = 0.0;
  no_align.lambda_av = 0.0;
  const TrainResult b = run_training(base, data.train, data.val, {}, 6);
  const TrainResult g = run_training(no_gate, data.train, data.val, {}, 6);
  const TrainResult a = run_training(no_align, data.train, data.val, {}, 6);
  auto same_ce = [&](const TrainResult& r) {
    for (std::size_t e = 0; e < r.log.size(); ++e)
      if (r.log[e].train_ce != b.log[e].train_ce) return false;
    return r.log.size() == b.log.size() && r.net.flat_parameters() == b.net.flat_parameters();
  };
  const bool rho0 = same_ce(g), lambda0 = same_ce(a);
  report(5, "degeneration to baseline", rho0 && lambda0,
         std::string("rho=0: ") + (rho0 ? "bit-identical" : "differs") + ", lambda_av=0: " +
             (lambda0 ? "bit-identical" : "differs"));
}

struct SeedRun {
  double hueshift = 0.0;
  double ece = 0.0;
  double tau_swapmix = 0.0;
};

SeedRun train_and_measure(const MotionShapesData& data, AblationMode mode, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  const TrainResult r = run_training(cfg, data.train, data.val, data.val_hueshift, 6);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const EvalResult ev = evaluate(r.net, data.val);
  auto predict = [&](std::span<const VideoF> batch) { return predict_probabilities(r.net, batch); };
  SeedRun out;
  out.hueshift = r.log.back().val_acc_hueshift;
  out.ece = ece(ev.predictions);
  out.tau_swapmix = affinity(predict, data.val, swap_mix_augmentation(), 1000 + seed).tau;
  std::printf("  seed %llu %-10s val %.4f hueshift %.4f ece %.4f tau_swapmix %.4f (%.0fs)\n",
              static_cast<unsigned long long>(seed), to_string(mode).c_str(), ev.accuracy, out.hueshift, out.ece,
              out.tau_swapmix, seconds);
  std::fflush(stdout);
  return out;
}

void study() {
  const std::array<AblationMode, 3> modes{AblationMode::kBaseline, AblationMode::kSwapMixCe, AblationMode::kMca};
  std::array<std::vector<double>, 3> hue, cal, tau;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MotionShapesConfig dc;
    dc.kappa = 0.9;
    dc.seed = seed;
    const MotionShapesData data = generate_motionshapes(dc);
    for (std::size_t m = 0; m < modes.size(); ++m) {
      const SeedRun r = train_and_measure(data, modes[m], seed);
      hue[m].push_back(r.hueshift);
      cal[m].push_back(r.ece);
      tau[m].push_back(r.tau_swapmix);
    }
  }
  const double hb = median(hue[0]), hs = median(hue[1]), hm = median(hue[2]);
  const double tb = median(tau[0]), tm = median(tau[2]);
  const double eb = median(cal[0]), em = median(cal[2]);

  report(6, "MCA beats baseline (hue)", hm - hb >= 0.05 && tm > tb,
         fmt("hueshift median mca %.4f", hm) + fmt(" vs baseline %.4f", hb) + fmt(" (+%.1f pts)", 100 * (hm - hb)) +
             fmt("; tau_swapmix %.4f", tm) + fmt(" vs %.4f", tb));
  report(7, "ablation ordering", hm >= hs && hs >= hb,
         fmt("mca %.4f", hm) + fmt(" >= swapmix-ce %.4f", hs) + fmt(" >= baseline %.4f", hb));

  const std::vector<double> conf{0.75, 0.75, 0.75, 0.75};
  const std::vector<int> correct{1, 1, 1, 1};
  const double example = ece(conf, correct);
  report(8, "calibration direction", em <= eb && example == 0.25,
         fmt("ECE median mca %.4f", em) + fmt(" vs baseline %.4f", eb) + fmt("; worked example %.4f", example));
}

void speed() {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "mca_acceptance_bench";
  std::filesystem::remove_all(dir);
  const std::string out_dir = dir.string();
  const char* argv[] = {"mca", "bench", "--runs", "500", "--warmup", "20", "--seed", "0", "--out", out_dir.c_str()};
  std::ostringstream out, err;
  const auto start = std::chrono::steady_clock::now();
  const int code = cli::dispatch(static_cast<int>(std::size(argv)), argv, out, err);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << out.str();
  if (code != 0) {
    report(9, "SwapMix faster than hue jitter", false, "bench exited with " + std::to_string(code) + ": " + err.str());
    return;
  }

  std::ifstream in(dir / "bench.json");
  const auto results = nlohmann::json::parse(in);
  bool pass = results.size() == 3 && seconds < 120.0;
  std::string detail;
  for (const auto& r : results) {
    const double hue = r["hue_jitter"]["median_ms"], mix = r["swap_mix"]["median_ms"], p = r["mann_whitney_p"];
    pass &= r["swap_mix"]["runs"] == 500 && mix < hue && p < 0.01;
    detail += fmt("%.1fx", hue / mix) + fmt(" (p=%.1e) ", p);
  }
  std::filesystem::remove_all(dir);
  report(9, "SwapMix faster than hue jitter", pass, "hue/swapmix median " + detail + fmt("; report in %.0fs", seconds));
}

void identities(const MotionShapesData& data) {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 6;
  cfg.mode = AblationMode::kBaseline;
  const TrainResult a = run_training(cfg, data.train, data.val, {}, 6);
  const TrainResult b = run_training(cfg, data.train, data.val, {}, 6);
  auto predict = [&](std::span<const VideoF> batch) { return predict_probabilities(a.net, batch); };
  const double tau = affinity(predict, data.val, identity_augmentation(), 7).tau;
  const double d = diversity(a.log.back().train_ce, b.log.back().train_ce);
  report(10, "metric identities", tau == 1.0 && d == 1.0,
         fmt("affinity(identity) %.17g", tau) + fmt(", diversity(identical runs) %.17g", d));
}

}  // namespace

int main() {
  try {
    colorspace_roundtrip();
    hue_only();
    swapmix_algebra();
    losses();

    MotionShapesConfig small;
    small.train_count = 600;
    small.val_count = 120;
    small.seed = 9;
    const MotionShapesData quick = generate_motionshapes(small);
    degeneration(quick);

    study();
    speed();
    identities(quick);
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
