#include "mca/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mca {

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::kBaseline: return "baseline";
    case AblationMode::kChannelSwapCe: return "channel-swap-ce";
    case AblationMode::kSwapMixCe: return "swapmix-ce";
    case AblationMode::kExpandSet: return "expand-set";
    case AblationMode::kMcaPlusCeTilde: return "mca-plus-ce-tilde";
    case AblationMode::kMca: return "mca";
  }
  return "?";
}

AblationMode parse_ablation_mode(std::string_view name) {
  for (auto m : {AblationMode::kBaseline, AblationMode::kChannelSwapCe, AblationMode::kSwapMixCe,
                 AblationMode::kExpandSet, AblationMode::kMcaPlusCeTilde, AblationMode::kMca}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument("unknown ablation mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning_rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
  if (!(lambda_av >= 0.0)) throw InvalidArgument("lambda_av must be non-negative");
  if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidArgument("rho must lie in [0, 1]");
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  if (conv1_channels < 1 || conv2_channels < 1) throw InvalidArgument("convolution widths must be positive");
}

RngStreams RngStreams::from_seed(std::uint64_t seed) {
  const auto lo = static_cast<std::uint32_t>(seed & 0xffffffffu);
  const auto hi = static_cast<std::uint32_t>(seed >> 32);
  std::seed_seq init{lo, hi, 1u};
  std::seed_seq shuffle{lo, hi, 2u};
  std::seed_seq augment{lo, hi, 3u};
  return {Rng(init), Rng(shuffle), Rng(augment)};
}

namespace {

/// Softmax probabilities and summed CE of a K x B logit block.
struct BranchLoss {
  MatrixX<float> probs;
  double ce_sum = 0.0;
  int correct = 0;
  bool clamped = false;
};

BranchLoss branch_ce(const MatrixX<float>& logits, std::span<const int> labels) {
  BranchLoss out;
  out.probs = softmax_columns(logits);
  for (Index i = 0; i < logits.cols(); ++i) {
    const LossValue<float> ce = ce_loss(out.probs.col(i), labels[i]);
    out.ce_sum += ce.value;
    out.clamped |= ce.clamped;
    Index k = 0;
    out.probs.col(i).maxCoeff(&k);
    out.correct += k == labels[i];
  }
  return out;
}

MatrixX<float> ce_grad(const MatrixX<float>& probs, std::span<const int> labels, float scale) {
  MatrixX<float> g = probs;
  for (Index i = 0; i < g.cols(); ++i) g(labels[i], i) -= 1.0f;
  return g * scale;
}

}  // namespace

StepRecord train_step(SmallNet<float>& net, std::span<const VideoF> batch, std::span<const int> labels,
                      const TrainConfig& cfg, Rng& augment_rng, double learning_rate) {
  if (batch.empty() || batch.size() != labels.size()) throw InvalidArgument("train_step: bad batch");
  const std::size_t n = batch.size();
  const float inv_n = 1.0f / static_cast<float>(n);

  const bool fired = mca_gate(augment_rng, cfg.rho);
  std::vector<SwapMixDraw> draws;
  draws.reserve(n);
  for (std::size_t i = 0; i < n; ++i) draws.push_back(sample_swap_mix(augment_rng, cfg.alpha));

  StepRecord rec;
  rec.count = static_cast<int>(n);
  rec.gate_fired = fired && cfg.mode != AblationMode::kBaseline;

  if (!rec.gate_fired) {
    const ForwardPass<float> pass = net.forward(batch);
    const BranchLoss clean = branch_ce(pass.logits, labels);
    rec.ce = clean.ce_sum / n;
    rec.loss = rec.ce;
    rec.correct = clean.correct;
    rec.clamped = clean.clamped;
    if (!std::isfinite(rec.loss)) throw NumericalError("non-finite training loss");
    net.backward(pass, ce_grad(clean.probs, labels, inv_n));
    net.sgd_step(static_cast<float>(learning_rate), static_cast<float>(cfg.momentum));
    return rec;
  }

  std::vector<VideoF> augmented;
  augmented.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (cfg.mode == AblationMode::kChannelSwapCe) {
      augmented.push_back(channel_swap(batch[i], draws[i].phi));
    } else {
      augmented.push_back(swap_mix(batch[i], draws[i].phi, draws[i].mix));
    }
  }

  switch (cfg.mode) {
    case AblationMode::kChannelSwapCe:
    case AblationMode::kSwapMixCe: {
      const ForwardPass<float> pass = net.forward(augmented);
      const BranchLoss aug = branch_ce(pass.logits, labels);
      rec.ce = aug.ce_sum / n;
      rec.loss = rec.ce;
      rec.correct = aug.correct;
      rec.clamped = aug.clamped;
      if (!std::isfinite(rec.loss)) throw NumericalError("non-finite training loss");
      net.backward(pass, ce_grad(aug.probs, labels, inv_n));
      break;
    }
    case AblationMode::kExpandSet: {
      const ForwardPass<float> clean_pass = net.forward(batch);
      const ForwardPass<float> aug_pass = net.forward(augmented);
      const BranchLoss clean = branch_ce(clean_pass.logits, labels);
      const BranchLoss aug = branch_ce(aug_pass.logits, labels);
      rec.ce = (clean.ce_sum + aug.ce_sum) / (2.0 * n);
      rec.loss = rec.ce;
      rec.correct = clean.correct;
      rec.clamped = clean.clamped || aug.clamped;
      if (!std::isfinite(rec.loss)) throw NumericalError("non-finite training loss");
      net.backward(clean_pass, ce_grad(clean.probs, labels, 0.5f * inv_n));
      net.backward(aug_pass, ce_grad(aug.probs, labels, 0.5f * inv_n));
      break;
    }
    case AblationMode::kMca:
    case AblationMode::kMcaPlusCeTilde: {
      const ForwardPass<float> clean_pass = net.forward(batch);
      const ForwardPass<float> aug_pass = net.forward(augmented);
      const BranchLoss clean = branch_ce(clean_pass.logits, labels);
      const BranchLoss aug = branch_ce(aug_pass.logits, labels);
      const auto weight = static_cast<float>(cfg.lambda_av);

      double av_sum = 0.0;
      MatrixX<float> d_aug(aug.probs.rows(), aug.probs.cols());
      MatrixX<float> d_clean_av = MatrixX<float>::Zero(aug.probs.rows(), aug.probs.cols());
      for (Index i = 0; i < static_cast<Index>(n); ++i) {
        const LossValue<float> av = av_loss(clean.probs.col(i), aug.probs.col(i));
        av_sum += av.value;
        rec.clamped |= av.clamped;
        d_aug.col(i) = av.grad;
        if (cfg.av_bidirectional) d_clean_av.col(i) = av_loss_target_grad(clean.probs.col(i), aug.probs.col(i));
      }
      rec.av = av_sum / n;
      rec.ce = clean.ce_sum / n;
      rec.correct = clean.correct;
      rec.clamped = rec.clamped || clean.clamped;
      rec.loss = total_loss(rec.ce, rec.av, cfg.lambda_av);
      if (cfg.mode == AblationMode::kMcaPlusCeTilde) {
        rec.ce = (clean.ce_sum + aug.ce_sum) / (2.0 * n);
        rec.loss += aug.ce_sum / n;
        rec.clamped = rec.clamped || aug.clamped;
      }
      if (!std::isfinite(rec.loss)) throw NumericalError("non-finite training loss");

      MatrixX<float> d_clean = ce_grad(clean.probs, labels, inv_n);
      if (cfg.av_bidirectional && weight != 0.0f) d_clean += (weight * inv_n) * d_clean_av;
      net.backward(clean_pass, d_clean);

      MatrixX<float> d_tilde = (weight * inv_n) * d_aug;
      if (cfg.mode == AblationMode::kMcaPlusCeTilde) d_tilde += ce_grad(aug.probs, labels, inv_n);
      // Zero weight: no backward through the augmented branch.
      if (weight != 0.0f || cfg.mode == AblationMode::kMcaPlusCeTilde) net.backward(aug_pass, d_tilde);
      break;
    }
    case AblationMode::kBaseline:
      break;
  }
  net.sgd_step(static_cast<float>(learning_rate), static_cast<float>(cfg.momentum));
  return rec;
}

Eigen::MatrixXd predict_probabilities(const SmallNet<float>& net, std::span<const VideoF> batch) {
  const ForwardPass<float> pass = net.forward(batch, false);
  return softmax_columns(pass.logits).cast<double>();
}

EvalResult evaluate(const SmallNet<float>& net, const Dataset& data, std::size_t batch_size) {
  if (data.empty()) throw InvalidArgument("evaluate: empty dataset");
  EvalResult out;
  out.predictions.probs.resize(net.config().classes, static_cast<Index>(data.size()));
  out.predictions.labels = data.labels;
  CompensatedSum loss;
  std::size_t hits = 0;
  std::vector<VideoF> batch;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t stop = std::min(data.size(), start + batch_size);
    batch.clear();
    for (std::size_t i = start; i < stop; ++i) batch.push_back(to_float(data.videos[i]));
    const Eigen::MatrixXd probs = predict_probabilities(net, batch);
    for (std::size_t i = start; i < stop; ++i) {
      const auto col = probs.col(static_cast<Index>(i - start));
      out.predictions.probs.col(static_cast<Index>(i)) = col;
      loss.add(-std::log(std::max(col(data.labels[i]), kLogClamp)));
      Index k = 0;
      col.maxCoeff(&k);
      hits += k == data.labels[i];
    }
  }
  out.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  out.mean_loss = loss.value() / static_cast<double>(data.size());
  return out;
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  double lr = cfg.learning_rate;
  if (2 * epoch >= cfg.epochs) lr *= 0.1;
  if (4 * epoch >= 3 * cfg.epochs) lr *= 0.1;
  return lr;
}

NetConfig net_config_for(const TrainConfig& cfg, const Dataset& train, int classes) {
  if (train.empty()) throw InvalidArgument("training set is empty");
  const VideoShape& s = train.videos.front().shape();
  NetConfig net;
  net.classes = classes;
  net.frames = static_cast<int>(s.frames);
  net.height = static_cast<int>(s.height);
  net.width = static_cast<int>(s.width);
  net.conv1_channels = cfg.conv1_channels;
  net.conv2_channels = cfg.conv2_channels;
  net.validate();
  return net;
}

TrainResult run_training(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                         const Dataset& val_hueshift, int classes,
                         const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  const NetConfig net_cfg = net_config_for(cfg, train, classes);
  for (int label : train.labels) {
    if (label < 0 || label >= classes) throw InvalidArgument("training label outside [0, classes)");
  }
  RngStreams rng = RngStreams::from_seed(cfg.seed);
  TrainResult result{SmallNet<float>::initialized(net_cfg, rng.init), {}};

  std::vector<std::size_t> order(train.size());
  std::vector<VideoF> batch;
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng.shuffle);

    CompensatedSum ce_sum, av_sum;
    std::size_t correct = 0, seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      labels.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(to_float(train.videos[order[i]]));
        labels.push_back(train.labels[order[i]]);
      }
      const StepRecord rec = train_step(result.net, batch, labels, cfg, rng.augment, lr);
      ce_sum.add(rec.ce * rec.count);
      av_sum.add(rec.av * rec.count);
      correct += rec.correct;
      seen += rec.count;
    }

    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    entry.train_ce = ce_sum.value() / static_cast<double>(seen);
    entry.av_loss = av_sum.value() / static_cast<double>(seen);
    entry.val_acc = val.empty() ? 0.0 : evaluate(result.net, val).accuracy;
    entry.val_acc_hueshift = val_hueshift.empty() ? 0.0 : evaluate(result.net, val_hueshift).accuracy;
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

std::string format_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out.precision(9);
  out << kLogHeader << '\n';
  for (const auto& e : log) {
    out << e.epoch << ',' << e.train_acc << ',' << e.train_ce << ',' << e.av_loss << ',' << e.val_acc << ','
        << e.val_acc_hueshift << '\n';
  }
  return out.str();
}

void write_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_log_csv(log);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace mca
