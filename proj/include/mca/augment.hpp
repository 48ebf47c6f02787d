#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "mca/video.hpp"

namespace mca {

/// Every random stream in the library is a caller-owned 64-bit Mersenne twister.
using Rng = std::mt19937_64;

/// An ordering of the RGB planes: output channel i is source channel order[i].
/// "GRB" puts the source green plane in the red slot and the source red plane
/// in the green slot.
class Permutation {
 public:
  constexpr Permutation() = default;
  constexpr explicit Permutation(std::array<std::uint8_t, 3> order) : order_(order) {}

  /// Parses a three-letter spelling such as "BGR".
  static Permutation parse(std::string_view letters);

  /// The five orderings other than RGB, in a fixed order.
  static const std::array<Permutation, 5>& non_identity();

  std::uint8_t source(int slot) const { return order_[slot]; }
  const std::array<std::uint8_t, 3>& order() const { return order_; }
  bool is_identity() const { return order_[0] == 0 && order_[1] == 1 && order_[2] == 2; }
  Permutation inverse() const;
  std::string name() const;

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::array<std::uint8_t, 3> order_{0, 1, 2};
};

/// Interpolation weight lambda ~ Beta(alpha, alpha).
struct MixCoefficient {
  double lambda = 1.0;
  double alpha = 1.0;
};

/// Uniform draw from the five non-identity orderings.
Permutation sample_permutation(Rng& rng);

MixCoefficient sample_lambda(Rng& rng, double alpha);

/// True iff a Uniform[0,1) draw falls below rho. Always consumes exactly one draw.
bool mca_gate(Rng& rng, double rho);

/// Reorders the RGB planes of every frame by the same permutation.
template <typename Scalar>
Video<Scalar> channel_swap(const Video<Scalar>& video, const Permutation& phi) {
  require_rgb(video.shape(), "channel_swap");
  Video<Scalar> out(video.shape());
  for (Index t = 0; t < video.frames(); ++t) {
    for (int c = 0; c < 3; ++c) out.plane(t, c) = video.plane(t, phi.source(c));
  }
  return out;
}

/// lambda * v + (1 - lambda) * channel_swap(v, phi), one (phi, lambda) for
/// the whole clip. Results are clamped into the interval spanned by each
/// input pair so rounding never leaves the convex hull.
template <typename Scalar>
Video<Scalar> swap_mix(const Video<Scalar>& video, const Permutation& phi, const MixCoefficient& mix) {
  require_rgb(video.shape(), "swap_mix");
  if (!(mix.lambda >= 0.0 && mix.lambda <= 1.0)) throw InvalidArgument("mix coefficient must lie in [0, 1]");
  const Scalar keep = static_cast<Scalar>(mix.lambda);
  const Scalar take = static_cast<Scalar>(1.0 - mix.lambda);
  Video<Scalar> out(video.shape());
  for (Index t = 0; t < video.frames(); ++t) {
    for (int c = 0; c < 3; ++c) {
      const auto a = video.plane(t, c).array();
      const auto b = video.plane(t, phi.source(c)).array();
      out.plane(t, c).array() = (keep * a + take * b).cwiseMax(a.cwiseMin(b)).cwiseMin(a.cwiseMax(b));
    }
  }
  return out;
}

/// Per-sample SwapMix parameters drawn for one clip.
struct SwapMixDraw {
  Permutation phi;
  MixCoefficient mix;
};

/// Draws phi then lambda for one clip, in that order.
SwapMixDraw sample_swap_mix(Rng& rng, double alpha);

}  // namespace mca
