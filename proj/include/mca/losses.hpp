#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "mca/error.hpp"

namespace mca {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Floor applied to probabilities before taking a logarithm.
inline constexpr double kLogClamp = 1e-12;

/// A scalar loss with its gradient with respect to the logits that produced
/// the differentiated distribution.
template <typename Scalar>
struct LossValue {
  Scalar value = 0;
  VectorX<Scalar> grad;
  bool clamped = false;
};

/// Numerically stable softmax of one logit vector.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Column-wise softmax of a K x N logit matrix.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_columns(const Eigen::MatrixBase<Derived>& logits) {
  MatrixX<typename Derived::Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) out.col(j) = softmax(logits.col(j));
  return out;
}

template <typename Scalar>
Scalar clamped_log(Scalar p, bool& clamped) {
  if (p < Scalar(kLogClamp)) {
    clamped = true;
    return std::log(Scalar(kLogClamp));
  }
  return std::log(p);
}

/// -sum_k y_k log p_k for a one-hot y; gradient w.r.t. logits is p - y.
template <typename DerivedP, typename DerivedY>
LossValue<typename DerivedP::Scalar> ce_loss(const Eigen::MatrixBase<DerivedP>& p,
                                             const Eigen::MatrixBase<DerivedY>& one_hot) {
  using Scalar = typename DerivedP::Scalar;
  if (p.size() != one_hot.size()) throw InvalidArgument("ce_loss: prediction and label sizes differ");
  LossValue<Scalar> out;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (one_hot(k) != Scalar(0)) out.value -= one_hot(k) * clamped_log(p(k), out.clamped);
  }
  out.grad = p - one_hot.template cast<Scalar>();
  return out;
}

template <typename DerivedP>
LossValue<typename DerivedP::Scalar> ce_loss(const Eigen::MatrixBase<DerivedP>& p, Eigen::Index label) {
  using Scalar = typename DerivedP::Scalar;
  if (label < 0 || label >= p.size()) throw InvalidArgument("ce_loss: label out of range");
  return ce_loss(p, VectorX<Scalar>::Unit(p.size(), label));
}

/// KL(p || p_tilde) = -sum_k p_k log(p_tilde_k / p_k), with p held as a
/// constant target. The gradient is taken w.r.t. the logits of p_tilde and
/// equals p_tilde - p.
template <typename DerivedP, typename DerivedQ>
LossValue<typename DerivedP::Scalar> av_loss(const Eigen::MatrixBase<DerivedP>& p,
                                             const Eigen::MatrixBase<DerivedQ>& p_tilde) {
  using Scalar = typename DerivedP::Scalar;
  if (p.size() != p_tilde.size()) throw InvalidArgument("av_loss: distribution sizes differ");
  LossValue<Scalar> out;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p(k) == Scalar(0)) continue;
    out.value += p(k) * (clamped_log(p(k), out.clamped) - clamped_log(p_tilde(k), out.clamped));
  }
  // Clamping can make tiny negative residues; KL itself is non-negative.
  out.value = std::max(out.value, Scalar(0));
  out.grad = p_tilde - p;
  return out;
}

/// Gradient of KL(p || p_tilde) w.r.t. the logits of p, used only when the
/// target branch is not detached: p_j * (log p_j - log p~_j - KL).
template <typename DerivedP, typename DerivedQ>
VectorX<typename DerivedP::Scalar> av_loss_target_grad(const Eigen::MatrixBase<DerivedP>& p,
                                                       const Eigen::MatrixBase<DerivedQ>& p_tilde) {
  using Scalar = typename DerivedP::Scalar;
  bool clamped = false;
  VectorX<Scalar> log_ratio(p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    log_ratio(k) = clamped_log(p(k), clamped) - clamped_log(p_tilde(k), clamped);
  }
  const Scalar kl = p.dot(log_ratio);
  return (p.array() * (log_ratio.array() - kl)).matrix();
}

template <typename Scalar>
Scalar total_loss(Scalar ce, Scalar av, Scalar lambda_av) {
  if (!(lambda_av >= Scalar(0))) throw InvalidArgument("lambda_av must be non-negative");
  return ce + lambda_av * av;
}

}  // namespace mca
