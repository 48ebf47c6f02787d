#include "mca/metrics.hpp"

#include <cmath>
#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mca/colorspace.hpp"

namespace mca {

double accuracy(const PredictionDump& dump) {
  if (dump.size() == 0) throw InvalidArgument("accuracy: empty predictions");
  if (static_cast<Index>(dump.labels.size()) != dump.size()) throw InvalidArgument("accuracy: label count mismatch");
  Index hits = 0;
  for (Index i = 0; i < dump.size(); ++i) {
    Index k = 0;
    dump.probs.col(i).maxCoeff(&k);
    hits += k == dump.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(dump.size());
}

double ece(std::span<const double> confidences, std::span<const int> correct, int n_bins) {
  if (confidences.empty()) throw InvalidArgument("ece: empty predictions");
  if (confidences.size() != correct.size()) throw InvalidArgument("ece: confidence and correctness sizes differ");
  if (n_bins < 1) throw InvalidArgument("ece: need at least one bin");

  std::vector<CompensatedSum> conf_sum(n_bins), hit_sum(n_bins);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument("ece: confidence outside [0, 1]");
    const int b = std::min(static_cast<int>(c * n_bins), n_bins - 1);
    conf_sum[b].add(c);
    hit_sum[b].add(correct[i] ? 1.0 : 0.0);
    ++count[b];
  }
  const double n = static_cast<double>(confidences.size());
  CompensatedSum total;
  for (int b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    total.add(nb / n * std::abs(hit_sum[b].value() / nb - conf_sum[b].value() / nb));
  }
  return total.value();
}

double ece(const PredictionDump& dump, int n_bins) {
  if (static_cast<Index>(dump.labels.size()) != dump.size()) throw InvalidArgument("ece: label count mismatch");
  std::vector<double> conf(dump.size());
  std::vector<int> hit(dump.size());
  for (Index i = 0; i < dump.size(); ++i) {
    Index k = 0;
    conf[i] = dump.probs.col(i).maxCoeff(&k);
    hit[i] = k == dump.labels[i];
  }
  return ece(conf, hit, n_bins);
}

double affinity_ratio(double augmented_accuracy, double clean_accuracy) {
  if (clean_accuracy == 0.0) throw InvalidArgument("affinity: clean accuracy is zero");
  return augmented_accuracy / clean_accuracy;
}

double diversity(double loss_augmented_trained, double loss_clean_trained) {
  if (loss_clean_trained == 0.0) throw InvalidArgument("diversity: clean training loss is zero");
  return loss_augmented_trained / loss_clean_trained;
}

Augmentation identity_augmentation() {
  return [](const VideoF& v, Rng&) { return v; };
}

Augmentation swap_mix_augmentation(double alpha) {
  return [alpha](const VideoF& v, Rng& rng) {
    const SwapMixDraw d = sample_swap_mix(rng, alpha);
    return swap_mix(v, d.phi, d.mix);
  };
}

Augmentation channel_swap_augmentation() {
  return [](const VideoF& v, Rng& rng) { return channel_swap(v, sample_permutation(rng)); };
}

Augmentation hue_jitter_augmentation() {
  return [](const VideoF& v, Rng& rng) {
    const float delta = std::uniform_real_distribution<float>(-180.0f, 180.0f)(rng);
    return hue_jitter(v, delta);
  };
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["predictions"] = predictions;
  if (augmented_predictions) j["augmented_predictions"] = *augmented_predictions;
  j["accuracy"] = accuracy;
  j["ece"] = ece;
  j["ece_bins"] = ece_bins;
  if (augmented_accuracy) j["augmented_accuracy"] = *augmented_accuracy;
  if (affinity) j["affinity"] = *affinity;
  if (loss_augmented_trained) j["loss_augmented_trained"] = *loss_augmented_trained;
  if (loss_clean_trained) j["loss_clean_trained"] = *loss_clean_trained;
  if (diversity) j["diversity"] = *diversity;
  return j.dump(2);
}

void write_predictions_csv(const PredictionDump& dump, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "index,label";
  for (Index k = 0; k < dump.probs.rows(); ++k) out << ",p" << k;
  out << '\n';
  out.precision(std::numeric_limits<double>::max_digits10);
  for (Index i = 0; i < dump.size(); ++i) {
    out << i << ',' << dump.labels[i];
    for (Index k = 0; k < dump.probs.rows(); ++k) out << ',' << dump.probs(k, i);
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

PredictionDump read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("index,label", 0) != 0) {
    throw FormatError(FormatError::Kind::kBadMagic, path.string() + " is not a prediction dump");
  }
  const auto classes = static_cast<Index>(std::count(line.begin(), line.end(), ',') - 1);
  if (classes < 1) throw FormatError(FormatError::Kind::kMalformed, path.string() + " has no probability columns");

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> p;
    std::getline(ss, cell, ',');
    std::getline(ss, cell, ',');
    try {
      labels.push_back(std::stoi(cell));
      while (std::getline(ss, cell, ',')) p.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw FormatError(FormatError::Kind::kMalformed, "unparsable row in " + path.string());
    }
    if (static_cast<Index>(p.size()) != classes) {
      throw FormatError(FormatError::Kind::kTruncated, "short row in " + path.string());
    }
    rows.push_back(std::move(p));
  }
  PredictionDump dump;
  dump.probs.resize(classes, static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Index k = 0; k < classes; ++k) dump.probs(k, static_cast<Index>(i)) = rows[i][k];
  dump.labels = std::move(labels);
  return dump;
}

}  // namespace mca
