#include "mca/smallnet.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mca/augment.hpp"
#include "mca/checkpoint.hpp"
#include "mca/colorspace.hpp"

namespace mca {
namespace {

NetConfig tiny_config() {
  NetConfig c;
  c.classes = 2;
  c.frames = 4;
  c.height = 8;
  c.width = 8;
  return c;
}

template <typename Scalar>
std::vector<Video<Scalar>> random_batch(const NetConfig& c, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Video<Scalar>> batch;
  for (int i = 0; i < n; ++i) {
    Video<Scalar> v(c.input_shape());
    for (Index k = 0; k < v.planes().size(); ++k) v.data()[k] = static_cast<Scalar>(u(rng));
    batch.push_back(std::move(v));
  }
  return batch;
}

/// Mean CE on the clean clips plus mean KL(p_target || p(x~)), with p_target a
/// frozen copy of the clean predictions: the same objective the trainer
/// differentiates in its default mode.
struct Objective {
  std::vector<Video<double>> clean, augmented;
  std::vector<int> labels;
  MatrixX<double> target;  // frozen clean probabilities

  double operator()(const SmallNet<double>& net) const {
    const MatrixX<double> pc = softmax_columns(net.forward(clean, false).logits);
    const MatrixX<double> pa = softmax_columns(net.forward(augmented, false).logits);
    double ce = 0.0, av = 0.0;
    for (Index i = 0; i < pc.cols(); ++i) {
      ce += ce_loss(pc.col(i), labels[i]).value;
      av += av_loss(target.col(i), pa.col(i)).value;
    }
    return (ce + av) / static_cast<double>(pc.cols());
  }

  void backward(SmallNet<double>& net) const {
    const auto n = static_cast<double>(labels.size());
    const ForwardPass<double> cp = net.forward(clean);
    const ForwardPass<double> ap = net.forward(augmented);
    const MatrixX<double> pc = softmax_columns(cp.logits);
    const MatrixX<double> pa = softmax_columns(ap.logits);
    MatrixX<double> dc(pc.rows(), pc.cols()), da(pa.rows(), pa.cols());
    for (Index i = 0; i < pc.cols(); ++i) {
      dc.col(i) = ce_loss(pc.col(i), labels[i]).grad / n;
      da.col(i) = av_loss(target.col(i), pa.col(i)).grad / n;
    }
    net.backward(cp, dc);
    net.backward(ap, da);
  }
};

Objective make_objective(const SmallNet<double>& net, std::uint64_t seed) {
  Objective obj;
  obj.clean = random_batch<double>(net.config(), 3, seed);
  Rng rng(seed + 1);
  for (const auto& v : obj.clean) {
    const SwapMixDraw d = sample_swap_mix(rng, 1.0);
    obj.augmented.push_back(swap_mix(v, d.phi, d.mix));
  }
  obj.labels = {0, 1, 1};
  obj.target = softmax_columns(net.forward(obj.clean, false).logits);
  return obj;
}

TEST(SmallNet, ZeroHeadGivesUniformPrediction) {
  NetConfig c;
  c.classes = 5;
  c.frames = 3;
  c.height = c.width = 9;
  Rng rng(0);
  SmallNet<float> net = SmallNet<float>::initialized(c, rng);
  net.parameter(SmallNet<float>::kHeadW).value.setZero();
  net.parameter(SmallNet<float>::kHeadB).value.setZero();
  const auto batch = random_batch<float>(c, 2, 1);
  const MatrixX<float> p = softmax_columns(net.forward(batch).logits);
  EXPECT_LT((p.array() - 0.2f).abs().maxCoeff(), 1e-7f);
}

TEST(SmallNet, IdenticalClipsGiveIdenticalLogits) {
  const NetConfig c = tiny_config();
  Rng rng(1);
  const SmallNet<float> net = SmallNet<float>::initialized(c, rng);
  auto batch = random_batch<float>(c, 1, 2);
  batch.push_back(batch.front());
  const MatrixX<float> logits = net.forward(batch).logits;
  EXPECT_EQ(logits.col(0), logits.col(1));
  EXPECT_TRUE(logits.allFinite());
}

TEST(SmallNet, UntrainedNetIsSensitiveToHue) {
  const NetConfig c = tiny_config();
  Rng rng(3);
  const SmallNet<float> net = SmallNet<float>::initialized(c, rng);
  auto batch = random_batch<float>(c, 1, 4);
  batch.push_back(hue_jitter(batch.front(), 120.0f));
  const MatrixX<float> logits = net.forward(batch).logits;
  EXPECT_GT((logits.col(0) - logits.col(1)).cwiseAbs().maxCoeff(), 1e-4f);
}

TEST(SmallNet, RejectsShapeMismatchAndEmptyBatch) {
  const NetConfig c = tiny_config();
  Rng rng(0);
  const SmallNet<float> net = SmallNet<float>::initialized(c, rng);
  std::vector<VideoF> wrong{VideoF({c.frames, 3, c.height + 1, c.width})};
  EXPECT_THROW(net.forward(wrong), InvalidArgument);
  EXPECT_THROW(net.forward(std::vector<VideoF>{}), InvalidArgument);
}

TEST(SmallNet, BackwardNeedsCache) {
  const NetConfig c = tiny_config();
  Rng rng(0);
  SmallNet<float> net = SmallNet<float>::initialized(c, rng);
  const auto pass = net.forward(random_batch<float>(c, 2, 0), false);
  EXPECT_THROW(net.backward(pass, MatrixX<float>::Zero(2, 2)), InvalidArgument);
}

TEST(SmallNet, ZeroUpstreamGivesZeroGradientAndLeavesParameters) {
  const NetConfig c = tiny_config();
  Rng rng(5);
  SmallNet<float> net = SmallNet<float>::initialized(c, rng);
  const auto before = net.flat_parameters();
  const auto pass = net.forward(random_batch<float>(c, 3, 6));
  net.backward(pass, MatrixX<float>::Zero(c.classes, 3));
  for (float g : net.flat_gradients()) ASSERT_EQ(g, 0.0f);
  EXPECT_EQ(net.flat_parameters(), before);
}

TEST(SmallNet, DetachedTargetBranchReceivesNoAlignmentGradient) {
  // With p held constant, the alignment term sends nothing into the clean
  // pass: its upstream gradient is identically zero.
  const NetConfig c = tiny_config();
  Rng rng(8);
  SmallNet<double> net = SmallNet<double>::initialized(c, rng);
  const Objective obj = make_objective(net, 9);
  const ForwardPass<double> cp = net.forward(obj.clean);
  net.backward(cp, MatrixX<double>::Zero(c.classes, 3));
  for (double g : net.flat_gradients()) ASSERT_EQ(g, 0.0);
}

class GradientCheck : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(GradientCheck, EveryParameterMatchesCentralDifference) {
  const NetConfig c = tiny_config();
  Rng rng(GetParam());
  SmallNet<double> net = SmallNet<double>::initialized(c, rng);
  // Non-zero biases so every slot is exercised away from its init value.
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& p : net.parameters()) {
    if (p.name.find("bias") != std::string::npos)
      for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = n(rng);
  }
  const Objective obj = make_objective(net, GetParam() * 10 + 1);
  obj.backward(net);
  const std::vector<double> analytic = net.flat_gradients();
  std::vector<double> theta = net.flat_parameters();

  const double h = 1e-3;
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    net.set_flat_parameters(theta);
    const double up = obj(net);
    theta[i] = saved - h;
    net.set_flat_parameters(theta);
    const double down = obj(net);
    theta[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
  }
  net.set_flat_parameters(theta);
  EXPECT_LT(worst, 1e-3) << "over " << theta.size() << " parameters";
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradientCheck, ::testing::Values(1u, 2u, 3u));

TEST(SmallNet, Float32GradientAgreesWithDoublePath) {
  const NetConfig c = tiny_config();
  Rng rng(21);
  SmallNet<double> dnet = SmallNet<double>::initialized(c, rng);
  SmallNet<float> fnet = dnet.cast<float>();
  const Objective obj = make_objective(dnet, 22);
  obj.backward(dnet);

  std::vector<VideoF> clean, aug;
  for (const auto& v : obj.clean) clean.emplace_back(v.shape(), v.planes().cast<float>());
  for (const auto& v : obj.augmented) aug.emplace_back(v.shape(), v.planes().cast<float>());
  const ForwardPass<float> cp = fnet.forward(clean);
  const ForwardPass<float> ap = fnet.forward(aug);
  const MatrixX<float> pc = softmax_columns(cp.logits), pa = softmax_columns(ap.logits);
  const MatrixX<float> target = obj.target.cast<float>();
  MatrixX<float> dc(pc.rows(), pc.cols()), da(pa.rows(), pa.cols());
  for (Index i = 0; i < pc.cols(); ++i) {
    dc.col(i) = ce_loss(pc.col(i), obj.labels[i]).grad / 3.0f;
    da.col(i) = av_loss(target.col(i), pa.col(i)).grad / 3.0f;
  }
  fnet.backward(cp, dc);
  fnet.backward(ap, da);

  const auto gd = dnet.flat_gradients();
  const auto gf = fnet.flat_gradients();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < gd.size(); ++i) {
    num += std::pow(gd[i] - gf[i], 2);
    den += gd[i] * gd[i];
  }
  EXPECT_LT(std::sqrt(num / den), 1e-4);
}

TEST(SmallNet, MeanLossIgnoresBatchOrder) {
  const NetConfig c = tiny_config();
  Rng rng(17);
  const SmallNet<float> net = SmallNet<float>::initialized(c, rng);
  auto batch = random_batch<float>(c, 5, 18);
  std::vector<int> labels{0, 1, 1, 0, 1};
  auto mean_ce = [&](const std::vector<VideoF>& b, const std::vector<int>& y) {
    const MatrixX<float> p = softmax_columns(net.forward(b, false).logits);
    double total = 0.0;
    for (Index i = 0; i < p.cols(); ++i) total += ce_loss(p.col(i), y[i]).value;
    return total / static_cast<double>(p.cols());
  };
  const double forward_order = mean_ce(batch, labels);
  std::reverse(batch.begin(), batch.end());
  std::reverse(labels.begin(), labels.end());
  EXPECT_NEAR(mean_ce(batch, labels), forward_order, 1e-6);
}

TEST(SgdStep, LearningRateZeroKeepsParameters) {
  const NetConfig c = tiny_config();
  Rng rng(0);
  SmallNet<float> net = SmallNet<float>::initialized(c, rng);
  const auto before = net.flat_parameters();
  const auto pass = net.forward(random_batch<float>(c, 2, 1));
  net.backward(pass, MatrixX<float>::Ones(c.classes, 2));
  net.sgd_step(0.0f, 0.9f);
  EXPECT_EQ(net.flat_parameters(), before);
  for (float g : net.flat_gradients()) ASSERT_EQ(g, 0.0f);
}

TEST(SgdStep, PlainAndMomentumArithmetic) {
  SmallNet<double> net(tiny_config());
  auto& w = net.parameter(SmallNet<double>::kHeadB);
  w.value(0, 0) = 1.0;
  w.grad(0, 0) = 2.0;
  net.sgd_step(0.1, 0.0);
  EXPECT_NEAR(w.value(0, 0), 0.8, 1e-15);
  EXPECT_EQ(w.grad(0, 0), 0.0);

  SmallNet<double> m(tiny_config());
  auto& v = m.parameter(SmallNet<double>::kHeadB);
  const double w0 = 0.3, g = 0.7, eta = 0.05;
  v.value(0, 0) = w0;
  v.grad(0, 0) = g;
  m.sgd_step(eta, 0.9);
  v.grad(0, 0) = g;
  m.sgd_step(eta, 0.9);
  EXPECT_NEAR(v.value(0, 0), w0 - eta * g - eta * 1.9 * g, 1e-15);
}

TEST(SgdStep, NonFiniteGradientAborts) {
  SmallNet<float> net(tiny_config());
  net.parameter(SmallNet<float>::kConv2W).grad(0, 0) = std::nanf("");
  EXPECT_THROW(net.sgd_step(0.1f, 0.0f), NumericalError);
}

TEST(SmallNet, FlatParameterRoundTripAndCount) {
  const NetConfig c = tiny_config();
  Rng rng(2);
  const SmallNet<float> net = SmallNet<float>::initialized(c, rng);
  const Index expected = 27 * c.conv1_channels + c.conv1_channels + 9 * c.conv1_channels * c.conv2_channels +
                         c.conv2_channels + c.classes * c.clip_features() + c.classes;
  EXPECT_EQ(net.parameter_count(), expected);
  SmallNet<float> copy(c);
  copy.set_flat_parameters(net.flat_parameters());
  EXPECT_EQ(copy.flat_parameters(), net.flat_parameters());
  EXPECT_THROW(copy.set_flat_parameters(std::vector<float>(3)), InvalidArgument);
}

FormatError::Kind checkpoint_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode succeeded";
  return FormatError::Kind::kMalformed;
}

TEST(Checkpoint, RoundTripIsExact) {
  NetConfig c = tiny_config();
  c.conv1_channels = 5;
  Rng rng(13);
  const SmallNet<float> net = SmallNet<float>::initialized(c, rng);
  const SmallNet<float> back = decode_checkpoint(encode_checkpoint(net));
  EXPECT_EQ(back.config().conv1_channels, 5);
  EXPECT_EQ(back.flat_parameters(), net.flat_parameters());

  const auto path = std::filesystem::temp_directory_path() / "mca_smallnet_test.ckpt";
  save_checkpoint(net, path);
  EXPECT_EQ(load_checkpoint(path).flat_parameters(), net.flat_parameters());
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, DistinctErrorsForDistinctDamage) {
  Rng rng(1);
  const auto good = encode_checkpoint(SmallNet<float>::initialized(tiny_config(), rng));

  auto magic = good;
  magic[1] = 'Z';
  EXPECT_EQ(checkpoint_error(magic), FormatError::Kind::kBadMagic);

  auto version = good;
  version[4] = 9;
  EXPECT_EQ(checkpoint_error(version), FormatError::Kind::kVersionMismatch);

  auto config = good;
  config[6] ^= 1;  // classes field no longer matches the stored digest
  EXPECT_EQ(checkpoint_error(config), FormatError::Kind::kDigestMismatch);

  auto truncated = good;
  truncated.resize(truncated.size() - 4);
  EXPECT_EQ(checkpoint_error(truncated), FormatError::Kind::kTruncated);
  EXPECT_EQ(checkpoint_error(std::vector<std::uint8_t>(good.begin(), good.begin() + 12)), FormatError::Kind::kTruncated);
}

}  // namespace
}  // namespace mca
