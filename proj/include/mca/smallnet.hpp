#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mca/error.hpp"
#include "mca/losses.hpp"
#include "mca/video.hpp"

namespace mca {

/// Geometry of the classifier. Everything else is derived from these six numbers.
struct NetConfig {
  int classes = 6;
  int frames = 8;
  int height = 32;
  int width = 32;
  int conv1_channels = 12;
  int conv2_channels = 24;

  VideoShape input_shape() const { return {frames, 3, height, width}; }

  int conv1_height() const { return (height - 1) / 2 + 1; }
  int conv1_width() const { return (width - 1) / 2 + 1; }
  int conv2_height() const { return (conv1_height() - 1) / 2 + 1; }
  int conv2_width() const { return (conv1_width() - 1) / 2 + 1; }

  /// Per-frame descriptor: three spatial moments for each conv2 channel.
  int frame_features() const { return 3 * conv2_channels; }
  /// T-1 frame differences plus the temporal mean.
  int clip_features() const { return frames * frame_features(); }

  /// Fixed scale on the frame differences. Per-frame moments move by a few
  /// thousandths between frames while their means are O(1); without the gain
  /// the head's curvature along the motion directions is tiny.
  static inline double temporal_gain = 16.0;

  void validate() const;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// A parameter tensor with its gradient and momentum buffers.
template <typename Scalar>
struct Parameter {
  std::string name;
  MatrixX<Scalar> value;
  MatrixX<Scalar> grad;
  MatrixX<Scalar> velocity;

  Parameter() = default;
  Parameter(std::string n, Index rows, Index cols)
      : name(std::move(n)),
        value(MatrixX<Scalar>::Zero(rows, cols)),
        grad(MatrixX<Scalar>::Zero(rows, cols)),
        velocity(MatrixX<Scalar>::Zero(rows, cols)) {}
};

/// Intermediate activations kept by a training forward pass.
template <typename Scalar>
struct ForwardCache {
  Index batch = 0;
  MatrixX<Scalar> cols1;     // (N*T*P1) x (3*9) im2col of the input frames
  MatrixX<Scalar> act1;      // (N*T*P1) x C1, tanh output
  MatrixX<Scalar> cols2;     // (N*T*P2) x (C1*9)
  MatrixX<Scalar> act2;      // (N*T*P2) x C2
  MatrixX<Scalar> features;  // D x N clip descriptors fed to the head
};

template <typename Scalar>
struct ForwardPass {
  MatrixX<Scalar> logits;  // K x N
  std::optional<ForwardCache<Scalar>> cache;
};

/// Per-frame two-layer strided convolution, spatial moment pooling, temporal
/// differences concatenated with the temporal mean, and a linear head.
///
/// The pooling keeps the mean activation of every channel together with its
/// activation-weighted x and y centroids. Frame-to-frame differences of those
/// centroids are what let the head see translation; differences of the mean
/// see growth and shrinkage.
template <typename Scalar>
class SmallNet {
 public:
  enum Slot { kConv1W, kConv1B, kConv2W, kConv2B, kHeadW, kHeadB, kSlotCount };

  SmallNet() = default;
  explicit SmallNet(const NetConfig& config);

  /// Glorot-uniform weights drawn from `rng`, zero biases.
  static SmallNet initialized(const NetConfig& config, std::mt19937_64& rng);

  const NetConfig& config() const { return config_; }

  std::array<Parameter<Scalar>, kSlotCount>& parameters() { return params_; }
  const std::array<Parameter<Scalar>, kSlotCount>& parameters() const { return params_; }
  Parameter<Scalar>& parameter(Slot s) { return params_[s]; }
  const Parameter<Scalar>& parameter(Slot s) const { return params_[s]; }

  Index parameter_count() const;

  ForwardPass<Scalar> forward(std::span<const Video<Scalar>> batch, bool keep_cache = true) const;

  /// Adds d(loss)/d(theta) into the gradient buffers given d(loss)/d(logits).
  void backward(const ForwardPass<Scalar>& pass, const MatrixX<Scalar>& dlogits);

  void zero_grad();

  /// velocity <- momentum * velocity + grad; value <- value - lr * velocity;
  /// then clears the gradients.
  void sgd_step(Scalar learning_rate, Scalar momentum);

  /// Parameters concatenated slot by slot, each column-major.
  std::vector<Scalar> flat_parameters() const;
  void set_flat_parameters(std::span<const Scalar> flat);
  std::vector<Scalar> flat_gradients() const;

  template <typename Other>
  SmallNet<Other> cast() const {
    SmallNet<Other> out(config_);
    for (int s = 0; s < kSlotCount; ++s) out.parameters()[s].value = params_[s].value.template cast<Other>();
    return out;
  }

 private:
  NetConfig config_;
  std::array<Parameter<Scalar>, kSlotCount> params_;
  MatrixX<Scalar> moment_weights_;  // 3 x P2: uniform mean, x centroid, y centroid
};

extern template class SmallNet<float>;
extern template class SmallNet<double>;

namespace detail {

/// im2col for a 3x3, stride-2, pad-1 convolution over one frame stored as
/// (H*W) x C planes. Column index is c*9 + ky*3 + kx.
template <typename In, typename Out>
void im2col_s2(const In& in, Index h, Index w, Index ho, Index wo, Out&& cols) {
  using Scalar = typename std::decay_t<Out>::Scalar;
  for (Index c = 0; c < in.cols(); ++c) {
    for (Index ky = 0; ky < 3; ++ky) {
      for (Index kx = 0; kx < 3; ++kx) {
        auto col = cols.col(c * 9 + ky * 3 + kx);
        for (Index oy = 0; oy < ho; ++oy) {
          const Index iy = 2 * oy - 1 + ky;
          for (Index ox = 0; ox < wo; ++ox) {
            const Index ix = 2 * ox - 1 + kx;
            col(oy * wo + ox) = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? Scalar(in(iy * w + ix, c)) : Scalar(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col_s2: scatters column gradients back onto the input planes.
template <typename Cols, typename Out>
void col2im_s2(const Cols& cols, Index h, Index w, Index ho, Index wo, Out&& in) {
  for (Index c = 0; c < in.cols(); ++c) {
    for (Index ky = 0; ky < 3; ++ky) {
      for (Index kx = 0; kx < 3; ++kx) {
        const auto col = cols.col(c * 9 + ky * 3 + kx);
        for (Index oy = 0; oy < ho; ++oy) {
          const Index iy = 2 * oy - 1 + ky;
          if (iy < 0 || iy >= h) continue;
          for (Index ox = 0; ox < wo; ++ox) {
            const Index ix = 2 * ox - 1 + kx;
            if (ix < 0 || ix >= w) continue;
            in(iy * w + ix, c) += col(oy * wo + ox);
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename Scalar>
SmallNet<Scalar>::SmallNet(const NetConfig& config) : config_(config) {
  config_.validate();
  const Index c1 = config.conv1_channels, c2 = config.conv2_channels;
  params_[kConv1W] = Parameter<Scalar>("conv1.weight", 3 * 9, c1);
  params_[kConv1B] = Parameter<Scalar>("conv1.bias", 1, c1);
  params_[kConv2W] = Parameter<Scalar>("conv2.weight", c1 * 9, c2);
  params_[kConv2B] = Parameter<Scalar>("conv2.bias", 1, c2);
  params_[kHeadW] = Parameter<Scalar>("head.weight", config.classes, config.clip_features());
  params_[kHeadB] = Parameter<Scalar>("head.bias", config.classes, 1);

  const Index h2 = config.conv2_height(), w2 = config.conv2_width();
  const Index p2 = h2 * w2;
  moment_weights_.resize(3, p2);
  for (Index y = 0; y < h2; ++y) {
    for (Index x = 0; x < w2; ++x) {
      const Scalar cx = w2 > 1 ? Scalar(2 * x) / Scalar(w2 - 1) - Scalar(1) : Scalar(0);
      const Scalar cy = h2 > 1 ? Scalar(2 * y) / Scalar(h2 - 1) - Scalar(1) : Scalar(0);
      moment_weights_(0, y * w2 + x) = Scalar(1) / Scalar(p2);
      moment_weights_(1, y * w2 + x) = cx / Scalar(p2);
      moment_weights_(2, y * w2 + x) = cy / Scalar(p2);
    }
  }
}

template <typename Scalar>
SmallNet<Scalar> SmallNet<Scalar>::initialized(const NetConfig& config, std::mt19937_64& rng) {
  SmallNet net(config);
  auto glorot = [&rng](MatrixX<Scalar>& w, double fan_in, double fan_out) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (Index j = 0; j < w.cols(); ++j)
      for (Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<Scalar>(bound * u(rng));
  };
  const double c1 = config.conv1_channels, c2 = config.conv2_channels;
  glorot(net.params_[kConv1W].value, 27.0, 9.0 * c1);
  glorot(net.params_[kConv2W].value, 9.0 * c1, 9.0 * c2);
  glorot(net.params_[kHeadW].value, config.clip_features(), config.classes);
  return net;
}

template <typename Scalar>
Index SmallNet<Scalar>::parameter_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename Scalar>
ForwardPass<Scalar> SmallNet<Scalar>::forward(std::span<const Video<Scalar>> batch, bool keep_cache) const {
  if (batch.empty()) throw InvalidArgument("forward: empty batch");
  const VideoShape expected = config_.input_shape();
  for (const auto& v : batch) {
    if (!(v.shape() == expected)) {
      throw InvalidArgument("forward: clip shape " + to_string(v.shape()) + " does not match network input " +
                            to_string(expected));
    }
  }

  const Index n = static_cast<Index>(batch.size());
  const Index frames = config_.frames;
  const Index h0 = config_.height, w0 = config_.width;
  const Index h1 = config_.conv1_height(), w1 = config_.conv1_width(), p1 = h1 * w1;
  const Index h2 = config_.conv2_height(), w2 = config_.conv2_width(), p2 = h2 * w2;
  const Index c1 = config_.conv1_channels;
  const Index ff = config_.frame_features();

  ForwardCache<Scalar> cache;
  cache.batch = n;

  cache.cols1.resize(n * frames * p1, 27);
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < frames; ++t)
      detail::im2col_s2(batch[i].frame(t), h0, w0, h1, w1, cache.cols1.middleRows((i * frames + t) * p1, p1));

  cache.act1.noalias() = cache.cols1 * params_[kConv1W].value;
  cache.act1.rowwise() += params_[kConv1B].value.row(0);
  cache.act1 = cache.act1.array().tanh().matrix();

  cache.cols2.resize(n * frames * p2, c1 * 9);
  for (Index f = 0; f < n * frames; ++f)
    detail::im2col_s2(cache.act1.middleRows(f * p1, p1), h1, w1, h2, w2, cache.cols2.middleRows(f * p2, p2));

  cache.act2.noalias() = cache.cols2 * params_[kConv2W].value;
  cache.act2.rowwise() += params_[kConv2B].value.row(0);
  cache.act2 = cache.act2.array().tanh().matrix();

  // Moment pooling: each frame gives a 3 x C2 block, flattened column-major.
  MatrixX<Scalar> frame_feats(ff, n * frames);
  for (Index f = 0; f < n * frames; ++f) {
    MatrixX<Scalar> m = moment_weights_ * cache.act2.middleRows(f * p2, p2);
    frame_feats.col(f) = Eigen::Map<const VectorX<Scalar>>(m.data(), ff);
  }

  const Scalar gain = static_cast<Scalar>(NetConfig::temporal_gain);
  cache.features.resize(config_.clip_features(), n);
  for (Index i = 0; i < n; ++i) {
    auto clip = frame_feats.middleCols(i * frames, frames);
    auto out = cache.features.col(i);
    for (Index t = 0; t + 1 < frames; ++t) out.segment(t * ff, ff) = gain * (clip.col(t + 1) - clip.col(t));
    out.segment((frames - 1) * ff, ff) = clip.rowwise().mean();
  }

  ForwardPass<Scalar> pass;
  pass.logits.noalias() = params_[kHeadW].value * cache.features;
  pass.logits.colwise() += params_[kHeadB].value.col(0);
  if (keep_cache) pass.cache = std::move(cache);
  return pass;
}

template <typename Scalar>
void SmallNet<Scalar>::backward(const ForwardPass<Scalar>& pass, const MatrixX<Scalar>& dlogits) {
  if (!pass.cache) throw InvalidArgument("backward: forward pass was run without a cache");
  const ForwardCache<Scalar>& cache = *pass.cache;
  const Index n = cache.batch;
  if (dlogits.rows() != config_.classes || dlogits.cols() != n) {
    throw InvalidArgument("backward: upstream gradient shape does not match logits");
  }
  const Index frames = config_.frames;
  const Index h1 = config_.conv1_height(), w1 = config_.conv1_width(), p1 = h1 * w1;
  const Index h2 = config_.conv2_height(), w2 = config_.conv2_width(), p2 = h2 * w2;
  const Index c2 = config_.conv2_channels;
  const Index ff = config_.frame_features();

  params_[kHeadW].grad.noalias() += dlogits * cache.features.transpose();
  params_[kHeadB].grad += dlogits.rowwise().sum();
  const MatrixX<Scalar> dfeatures = params_[kHeadW].value.transpose() * dlogits;

  // Undo the temporal difference / mean construction.
  const Scalar gain = static_cast<Scalar>(NetConfig::temporal_gain);
  MatrixX<Scalar> dframe(ff, n * frames);
  for (Index i = 0; i < n; ++i) {
    const auto d = dfeatures.col(i);
    const VectorX<Scalar> dmean = d.segment((frames - 1) * ff, ff) / Scalar(frames);
    for (Index t = 0; t < frames; ++t) {
      auto out = dframe.col(i * frames + t);
      out = dmean;
      if (t >= 1) out += gain * d.segment((t - 1) * ff, ff);
      if (t + 1 < frames) out -= gain * d.segment(t * ff, ff);
    }
  }

  MatrixX<Scalar> dz2(n * frames * p2, c2);
  for (Index f = 0; f < n * frames; ++f) {
    Eigen::Map<const MatrixX<Scalar>> dm(dframe.col(f).data(), 3, c2);
    dz2.middleRows(f * p2, p2).noalias() = moment_weights_.transpose() * dm;
  }
  dz2.array() *= Scalar(1) - cache.act2.array().square();

  params_[kConv2W].grad.noalias() += cache.cols2.transpose() * dz2;
  params_[kConv2B].grad += dz2.colwise().sum();

  const MatrixX<Scalar> dcols2 = dz2 * params_[kConv2W].value.transpose();
  MatrixX<Scalar> dz1 = MatrixX<Scalar>::Zero(n * frames * p1, config_.conv1_channels);
  for (Index f = 0; f < n * frames; ++f)
    detail::col2im_s2(dcols2.middleRows(f * p2, p2), h1, w1, h2, w2, dz1.middleRows(f * p1, p1));
  dz1.array() *= Scalar(1) - cache.act1.array().square();

  params_[kConv1W].grad.noalias() += cache.cols1.transpose() * dz1;
  params_[kConv1B].grad += dz1.colwise().sum();
}

template <typename Scalar>
void SmallNet<Scalar>::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

template <typename Scalar>
void SmallNet<Scalar>::sgd_step(Scalar learning_rate, Scalar momentum) {
  for (const auto& p : params_) {
    if (!p.grad.allFinite()) throw NumericalError("non-finite gradient in " + p.name);
  }
  for (auto& p : params_) {
    p.velocity = momentum * p.velocity + p.grad;
    p.value -= learning_rate * p.velocity;
    p.grad.setZero();
  }
}

template <typename Scalar>
std::vector<Scalar> SmallNet<Scalar>::flat_parameters() const {
  std::vector<Scalar> flat;
  flat.reserve(parameter_count());
  for (const auto& p : params_) flat.insert(flat.end(), p.value.data(), p.value.data() + p.value.size());
  return flat;
}

template <typename Scalar>
void SmallNet<Scalar>::set_flat_parameters(std::span<const Scalar> flat) {
  if (static_cast<Index>(flat.size()) != parameter_count()) {
    throw InvalidArgument("parameter vector has " + std::to_string(flat.size()) + " entries, network needs " +
                          std::to_string(parameter_count()));
  }
  std::size_t offset = 0;
  for (auto& p : params_) {
    std::copy_n(flat.begin() + offset, p.value.size(), p.value.data());
    offset += p.value.size();
  }
}

template <typename Scalar>
std::vector<Scalar> SmallNet<Scalar>::flat_gradients() const {
  std::vector<Scalar> flat;
  flat.reserve(parameter_count());
  for (const auto& p : params_) flat.insert(flat.end(), p.grad.data(), p.grad.data() + p.grad.size());
  return flat;
}

}  // namespace mca
