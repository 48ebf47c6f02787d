#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "mca/error.hpp"

namespace mca {

using Index = Eigen::Index;

/// T x C x H x W clip dimensions.
struct VideoShape {
  Index frames = 0;
  Index channels = 3;
  Index height = 0;
  Index width = 0;

  Index pixels() const { return height * width; }
  Index planes() const { return frames * channels; }
  Index size() const { return pixels() * planes(); }

  friend bool operator==(const VideoShape&, const VideoShape&) = default;
};

inline std::string to_string(const VideoShape& shape) {
  return std::to_string(shape.frames) + "x" + std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" +
         std::to_string(shape.width);
}

/// A video clip stored frame-major, then channel, then row-major pixels.
///
/// The samples live in a (H*W) x (T*C) column-major Eigen matrix, so column
/// `t*C + c` is the contiguous plane of channel `c` in frame `t` and the
/// whole buffer has exactly the T,C,H,W memory order of the file format.
template <typename Scalar>
class Video {
 public:
  using Planes = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Video() = default;

  explicit Video(const VideoShape& shape) : shape_(shape), planes_(shape.pixels(), shape.planes()) {
    if (shape.frames < 1 || shape.channels < 1 || shape.height < 1 || shape.width < 1) {
      throw InvalidArgument("video shape must be positive, got " + to_string(shape));
    }
    planes_.setZero();
  }

  Video(const VideoShape& shape, Planes planes) : shape_(shape), planes_(std::move(planes)) {
    if (planes_.rows() != shape.pixels() || planes_.cols() != shape.planes()) {
      throw InvalidArgument("plane matrix does not match shape " + to_string(shape));
    }
  }

  const VideoShape& shape() const { return shape_; }
  Index frames() const { return shape_.frames; }
  Index channels() const { return shape_.channels; }
  Index height() const { return shape_.height; }
  Index width() const { return shape_.width; }

  const Planes& planes() const { return planes_; }
  Planes& planes() { return planes_; }

  auto plane(Index t, Index c) { return planes_.col(t * shape_.channels + c); }
  auto plane(Index t, Index c) const { return planes_.col(t * shape_.channels + c); }

  /// The C planes of frame t as an (H*W) x C block.
  auto frame(Index t) { return planes_.middleCols(t * shape_.channels, shape_.channels); }
  auto frame(Index t) const { return planes_.middleCols(t * shape_.channels, shape_.channels); }

  Scalar& at(Index t, Index c, Index y, Index x) { return planes_(y * shape_.width + x, t * shape_.channels + c); }
  Scalar at(Index t, Index c, Index y, Index x) const {
    return planes_(y * shape_.width + x, t * shape_.channels + c);
  }

  Scalar* data() { return planes_.data(); }
  const Scalar* data() const { return planes_.data(); }

  friend bool operator==(const Video& a, const Video& b) {
    return a.shape_ == b.shape_ && a.planes_ == b.planes_;
  }

 private:
  VideoShape shape_;
  Planes planes_;
};

using VideoU8 = Video<std::uint8_t>;
using VideoF = Video<float>;

/// 8-bit storage to normalized [0,1] intensities.
template <typename Scalar = float>
Video<Scalar> to_float(const VideoU8& v) {
  return Video<Scalar>(v.shape(), v.planes().template cast<Scalar>() / Scalar(255));
}

/// Normalized intensities back to 8-bit, rounding to nearest and saturating.
template <typename Scalar>
VideoU8 to_u8(const Video<Scalar>& v) {
  VideoU8::Planes out = (v.planes().array() * Scalar(255))
                            .round()
                            .cwiseMax(Scalar(0))
                            .cwiseMin(Scalar(255))
                            .template cast<std::uint8_t>()
                            .matrix();
  return VideoU8(v.shape(), std::move(out));
}

inline void require_rgb(const VideoShape& shape, const char* op) {
  if (shape.channels != 3) {
    throw InvalidArgument(std::string(op) + " needs 3 channels, got " + std::to_string(shape.channels));
  }
}

}  // namespace mca
