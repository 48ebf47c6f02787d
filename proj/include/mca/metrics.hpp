#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mca/augment.hpp"
#include "mca/data.hpp"
#include "mca/error.hpp"

namespace mca {

/// Neumaier-compensated running sum, so aggregates do not depend on the
/// order samples arrive in beyond the last bit or so.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Per-sample class probabilities (K x N, one column per sample) and labels.
struct PredictionDump {
  Eigen::MatrixXd probs;
  std::vector<int> labels;

  Index size() const { return probs.cols(); }
};

double accuracy(const PredictionDump& dump);

/// Equal-width binned |accuracy - confidence|, weighted by bin occupancy.
/// A confidence of exactly 1 falls in the last bin.
double ece(std::span<const double> confidences, std::span<const int> correct, int n_bins = 15);
double ece(const PredictionDump& dump, int n_bins = 15);

inline constexpr int kDefaultEceBins = 15;

/// tau = accuracy on the augmented set / accuracy on the clean set.
double affinity_ratio(double augmented_accuracy, double clean_accuracy);

/// D = final training loss of the augmentation-trained model on augmented
/// data / final training loss of the clean-trained model on clean data.
double diversity(double loss_augmented_trained, double loss_clean_trained);

struct AffinityResult {
  double clean_accuracy = 0.0;
  double augmented_accuracy = 0.0;
  double tau = 0.0;
};

/// A clip transform driven by a caller-supplied random stream.
using Augmentation = std::function<VideoF(const VideoF&, Rng&)>;

Augmentation identity_augmentation();
Augmentation swap_mix_augmentation(double alpha = 1.0);
Augmentation channel_swap_augmentation();
/// Uniform hue shift in [-180, 180] degrees through the HSV round trip.
Augmentation hue_jitter_augmentation();

/// Evaluates `predict` on every clip of `val` and on its augmented copy.
/// `predict` maps a span of float clips to a K x n probability matrix. The
/// augmentation stream is seeded with `seed` and consumed in dataset order.
template <typename Predict>
AffinityResult affinity(Predict&& predict, const Dataset& val, const Augmentation& augment, std::uint64_t seed,
                        std::size_t batch_size = 64) {
  if (val.empty()) throw InvalidArgument("affinity: empty validation set");
  Rng rng(seed);
  std::size_t clean_hits = 0, aug_hits = 0;
  std::vector<VideoF> clean, augmented;
  for (std::size_t start = 0; start < val.size(); start += batch_size) {
    const std::size_t stop = std::min(val.size(), start + batch_size);
    clean.clear();
    augmented.clear();
    for (std::size_t i = start; i < stop; ++i) {
      clean.push_back(to_float(val.videos[i]));
      augmented.push_back(augment(clean.back(), rng));
    }
    const Eigen::MatrixXd p_clean = predict(std::span<const VideoF>(clean));
    const Eigen::MatrixXd p_aug = predict(std::span<const VideoF>(augmented));
    for (std::size_t i = start; i < stop; ++i) {
      Index k_clean = 0, k_aug = 0;
      p_clean.col(static_cast<Index>(i - start)).maxCoeff(&k_clean);
      p_aug.col(static_cast<Index>(i - start)).maxCoeff(&k_aug);
      clean_hits += k_clean == val.labels[i];
      aug_hits += k_aug == val.labels[i];
    }
  }
  AffinityResult r;
  r.clean_accuracy = static_cast<double>(clean_hits) / static_cast<double>(val.size());
  r.augmented_accuracy = static_cast<double>(aug_hits) / static_cast<double>(val.size());
  r.tau = affinity_ratio(r.augmented_accuracy, r.clean_accuracy);
  return r;
}

/// Everything the `metrics` subcommand reports.
struct MetricsReport {
  std::string predictions;  // source identifiers
  std::optional<std::string> augmented_predictions;
  double accuracy = 0.0;
  double ece = 0.0;
  int ece_bins = kDefaultEceBins;
  std::optional<double> augmented_accuracy;
  std::optional<double> affinity;
  std::optional<double> diversity;
  std::optional<double> loss_augmented_trained;
  std::optional<double> loss_clean_trained;

  std::string to_json() const;
};

/// CSV with header `index,label,p0,...,p{K-1}`.
void write_predictions_csv(const PredictionDump& dump, const std::filesystem::path& path);
PredictionDump read_predictions_csv(const std::filesystem::path& path);

}  // namespace mca
