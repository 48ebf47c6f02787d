#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mca/augment.hpp"
#include "mca/data.hpp"
#include "mca/metrics.hpp"
#include "mca/smallnet.hpp"

namespace mca {

/// Training objectives compared in the ablation study.
enum class AblationMode {
  kBaseline,        // CE on the clean clip
  kChannelSwapCe,   // CE on the channel-swapped clip instead of the clean one
  kSwapMixCe,       // CE on the SwapMix clip instead of the clean one
  kExpandSet,       // CE on both the clean and the SwapMix clip
  kMcaPlusCeTilde,  // MCA plus CE on the SwapMix clip
  kMca,             // CE on the clean clip + lambda_av * KL(p || p~)
};

std::string to_string(AblationMode mode);
AblationMode parse_ablation_mode(std::string_view name);

struct TrainConfig {
  int epochs = 4;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double lambda_av = 1.0;
  double rho = 1.0;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  AblationMode mode = AblationMode::kMca;
  /// Let the alignment term also push on the clean branch.
  bool av_bidirectional = false;
  int conv1_channels = 12;
  int conv2_channels = 24;

  void validate() const;
};

/// Independent random streams: weight init, epoch shuffling, augmentation.
/// Every mode consumes the augmentation stream identically, so runs that
/// differ only in mode, rho or lambda_av see the same draws.
struct RngStreams {
  Rng init;
  Rng shuffle;
  Rng augment;

  static RngStreams from_seed(std::uint64_t seed);
};

struct StepRecord {
  double loss = 0.0;
  double ce = 0.0;  // mean CE over the branches the objective applies CE to
  double av = 0.0;  // mean KL(p || p~); zero when no alignment term was formed
  bool gate_fired = false;
  bool clamped = false;
  int correct = 0;
  int count = 0;
};

/// One optimizer step. Draws one gate value and one (phi, lambda) per clip
/// from `augment_rng` regardless of mode.
StepRecord train_step(SmallNet<float>& net, std::span<const VideoF> batch, std::span<const int> labels,
                      const TrainConfig& cfg, Rng& augment_rng, double learning_rate);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  PredictionDump predictions;
};

/// Clean-input evaluation with frozen parameters.
EvalResult evaluate(const SmallNet<float>& net, const Dataset& data, std::size_t batch_size = 64);

/// Class probabilities (K x n) for a batch of clips, without caching.
Eigen::MatrixXd predict_probabilities(const SmallNet<float>& net, std::span<const VideoF> batch);

struct EpochLog {
  int epoch = 0;
  double train_acc = 0.0;
  double train_ce = 0.0;
  double av_loss = 0.0;
  double val_acc = 0.0;
  double val_acc_hueshift = 0.0;
};

inline constexpr std::string_view kLogHeader = "epoch,train_acc,train_ce,av_loss,val_acc,val_acc_hueshift";

struct TrainResult {
  SmallNet<float> net;
  std::vector<EpochLog> log;
};

/// Step decay: x0.1 from the halfway epoch, x0.01 from the three-quarter epoch.
double learning_rate_at(const TrainConfig& cfg, int epoch);

NetConfig net_config_for(const TrainConfig& cfg, const Dataset& train, int classes);

/// Full training run. `val_hueshift` may be empty, in which case its column is
/// logged as zero.
TrainResult run_training(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                         const Dataset& val_hueshift, int classes,
                         const std::function<void(const EpochLog&)>& on_epoch = {});

std::string format_log_csv(const std::vector<EpochLog>& log);
void write_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path);

}  // namespace mca
