#pragma once

#include <algorithm>
#include <cmath>

#include "mca/video.hpp"

namespace mca {

template <typename Scalar>
struct Rgb {
  Scalar r, g, b;
};

/// Hue in degrees [0, 360), saturation and value in [0, 1].
template <typename Scalar>
struct Hsv {
  Scalar h, s, v;
};

/// Which piece of the piecewise hue formula a pixel falls in. Ties on the
/// maximum resolve to the first matching piece in this order.
enum class HueBranch { kAchromatic, kRedMaxGreenAtLeastBlue, kRedMaxGreenBelowBlue, kGreenMax, kBlueMax };

template <typename Scalar>
HueBranch hue_branch(const Rgb<Scalar>& p) {
  const Scalar hi = std::max({p.r, p.g, p.b});
  const Scalar lo = std::min({p.r, p.g, p.b});
  if (hi == lo) return HueBranch::kAchromatic;
  if (hi == p.r) return p.g >= p.b ? HueBranch::kRedMaxGreenAtLeastBlue : HueBranch::kRedMaxGreenBelowBlue;
  if (hi == p.g) return HueBranch::kGreenMax;
  return HueBranch::kBlueMax;
}

template <typename Scalar>
Hsv<Scalar> rgb_to_hsv(const Rgb<Scalar>& p) {
  const Scalar hi = std::max({p.r, p.g, p.b});
  const Scalar lo = std::min({p.r, p.g, p.b});
  const Scalar span = hi - lo;

  Scalar h = 0;
  switch (hue_branch(p)) {
    case HueBranch::kAchromatic:
      break;
    case HueBranch::kRedMaxGreenAtLeastBlue:
      h = Scalar(60) * (p.g - p.b) / span;
      break;
    case HueBranch::kRedMaxGreenBelowBlue:
      h = Scalar(60) * (p.g - p.b) / span + Scalar(360);
      break;
    case HueBranch::kGreenMax:
      h = Scalar(60) * (p.b - p.r) / span + Scalar(120);
      break;
    case HueBranch::kBlueMax:
      h = Scalar(60) * (p.r - p.g) / span + Scalar(240);
      break;
  }
  if (h >= Scalar(360)) h -= Scalar(360);

  const Scalar s = hi == Scalar(0) ? Scalar(0) : span / hi;
  return {h, s, hi};
}

template <typename Scalar>
Rgb<Scalar> hsv_to_rgb(const Hsv<Scalar>& p) {
  const Scalar chroma = p.v * p.s;
  Scalar sector = p.h / Scalar(60);
  if (sector >= Scalar(6)) sector -= Scalar(6);
  const int k = std::clamp(static_cast<int>(sector), 0, 5);
  const Scalar frac = sector - Scalar(k);
  const Scalar lo = p.v - chroma;
  // Rising and falling ramps across the sector.
  const Scalar up = lo + chroma * frac;
  const Scalar down = p.v - chroma * frac;
  switch (k) {
    case 0: return {p.v, up, lo};
    case 1: return {down, p.v, lo};
    case 2: return {lo, p.v, up};
    case 3: return {lo, down, p.v};
    case 4: return {up, lo, p.v};
    default: return {p.v, lo, down};
  }
}

/// Shift the hue of every pixel by `delta_degrees` through an HSV round trip.
/// This is the slow per-pixel reference the channel permutation replaces.
template <typename Scalar>
Video<Scalar> hue_jitter(const Video<Scalar>& video, Scalar delta_degrees) {
  require_rgb(video.shape(), "hue_jitter");
  if (!(delta_degrees >= Scalar(-180) && delta_degrees <= Scalar(180))) {
    throw InvalidArgument("hue shift must lie in [-180, 180] degrees");
  }
  Video<Scalar> out(video.shape());
  const Index pixels = video.shape().pixels();
  for (Index t = 0; t < video.frames(); ++t) {
    const auto src = video.frame(t);
    auto dst = out.frame(t);
    for (Index i = 0; i < pixels; ++i) {
      Hsv<Scalar> hsv = rgb_to_hsv(Rgb<Scalar>{src(i, 0), src(i, 1), src(i, 2)});
      hsv.h += delta_degrees;
      if (hsv.h < Scalar(0)) hsv.h += Scalar(360);
      if (hsv.h >= Scalar(360)) hsv.h -= Scalar(360);
      const Rgb<Scalar> rgb = hsv_to_rgb(hsv);
      dst(i, 0) = rgb.r;
      dst(i, 1) = rgb.g;
      dst(i, 2) = rgb.b;
    }
  }
  return out;
}

}  // namespace mca
