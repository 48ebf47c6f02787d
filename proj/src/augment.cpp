#include "mca/augment.hpp"

#include <cmath>

namespace mca {

namespace {

int channel_index(char letter) {
  switch (letter) {
    case 'R': case 'r': return 0;
    case 'G': case 'g': return 1;
    case 'B': case 'b': return 2;
    default: return -1;
  }
}

}  // namespace

Permutation Permutation::parse(std::string_view letters) {
  if (letters.size() != 3) throw InvalidArgument("permutation must be three letters, got '" + std::string(letters) + "'");
  std::array<std::uint8_t, 3> order{};
  unsigned seen = 0;
  for (int i = 0; i < 3; ++i) {
    const int c = channel_index(letters[i]);
    if (c < 0 || (seen & (1u << c))) {
      throw InvalidArgument("'" + std::string(letters) + "' is not an ordering of R, G, B");
    }
    seen |= 1u << c;
    order[i] = static_cast<std::uint8_t>(c);
  }
  return Permutation(order);
}

const std::array<Permutation, 5>& Permutation::non_identity() {
  static const std::array<Permutation, 5> kAll = {
      Permutation({0, 2, 1}),  // RBG
      Permutation({2, 0, 1}),  // BRG
      Permutation({2, 1, 0}),  // BGR
      Permutation({1, 0, 2}),  // GRB
      Permutation({1, 2, 0}),  // GBR
  };
  return kAll;
}

Permutation Permutation::inverse() const {
  std::array<std::uint8_t, 3> inv{};
  for (std::uint8_t i = 0; i < 3; ++i) inv[order_[i]] = i;
  return Permutation(inv);
}

std::string Permutation::name() const {
  static constexpr char kLetters[] = {'R', 'G', 'B'};
  return {kLetters[order_[0]], kLetters[order_[1]], kLetters[order_[2]]};
}

Permutation sample_permutation(Rng& rng) {
  std::uniform_int_distribution<int> pick(0, 4);
  return Permutation::non_identity()[pick(rng)];
}

MixCoefficient sample_lambda(Rng& rng, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("Beta shape alpha must be positive");
  // Beta(a, a) as X / (X + Y) with X, Y ~ Gamma(a, 1).
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double x = gamma(rng);
  const double y = gamma(rng);
  const double sum = x + y;
  // Both gammas can underflow to zero for tiny alpha; the limit law puts
  // half its mass at each end.
  const double lambda = sum > 0.0 ? x / sum : (x >= y ? 1.0 : 0.0);
  return {lambda, alpha};
}

bool mca_gate(Rng& rng, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidArgument("gate probability rho must lie in [0, 1]");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < rho;
}

SwapMixDraw sample_swap_mix(Rng& rng, double alpha) {
  const Permutation phi = sample_permutation(rng);
  const MixCoefficient mix = sample_lambda(rng, alpha);
  return {phi, mix};
}

}  // namespace mca
