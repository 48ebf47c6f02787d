#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mca/augment.hpp"
#include "mca/video.hpp"

namespace mca {

// ---------------------------------------------------------------------------
// MCAV clip files
//
//   offset  size  field
//        0     4  magic "MCAV"
//        4     2  version (u16, little-endian), currently 1
//        6    16  T, C, H, W (u32 each, little-endian)
//       22     2  label (u16, little-endian)
//       24   ...  T*C*H*W u8 samples, frame-major, then channel, then row-major
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kMcavVersion = 1;

struct LabeledVideo {
  VideoU8 video;
  int label = 0;
};

void write_mcav(const VideoU8& video, int label, const std::filesystem::path& path);
LabeledVideo read_mcav(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_mcav(const VideoU8& video, int label);
LabeledVideo decode_mcav(const std::vector<std::uint8_t>& bytes);

/// An in-memory split: 8-bit clips and their labels.
struct Dataset {
  std::vector<VideoU8> videos;
  std::vector<int> labels;

  std::size_t size() const { return videos.size(); }
  bool empty() const { return videos.empty(); }
  void push_back(VideoU8 v, int label) {
    videos.push_back(std::move(v));
    labels.push_back(label);
  }
};

/// Loads every *.mcav file of a directory in lexicographic file-name order.
Dataset load_mcav_dir(const std::filesystem::path& dir);
void save_mcav_dir(const Dataset& data, const std::filesystem::path& dir, const std::string& prefix);

// ---------------------------------------------------------------------------
// MotionShapes
// ---------------------------------------------------------------------------

enum class Motion { kUp, kDown, kLeft, kRight, kGrow, kShrink };
inline constexpr int kMotionCount = 6;
std::string to_string(Motion m);

enum class ShapeKind { kSquare, kDisc, kDiamond };
std::string to_string(ShapeKind s);

struct MotionShapesConfig {
  int classes = 6;
  int frames = 8;
  int height = 32;
  int width = 32;
  /// Probability that a clip's shape carries its class hue rather than a random one.
  double kappa = 0.9;
  int train_count = 3000;
  int val_count = 600;
  std::uint64_t seed = 0;
  std::vector<ShapeKind> palette{ShapeKind::kSquare, ShapeKind::kDisc, ShapeKind::kDiamond};
  /// Fixed reordering applied to the clean validation split to build val_hueshift.
  Permutation hueshift = Permutation::parse("GBR");

  void validate() const;
};

enum class Split { kTrain, kVal };

/// Everything the generator decided for one clip.
struct MotionSample {
  VideoU8 video;
  int label = 0;
  double hue = 0.0;  // degrees
  bool confounded = false;
  ShapeKind shape = ShapeKind::kSquare;
  std::vector<double> centroid_row;  // per frame, in pixels
  std::vector<double> centroid_col;
  std::vector<double> radius;
};

/// Hue assigned to class k: evenly spaced around the colour wheel.
double class_hue(int label, int classes);

/// Deterministic in (cfg.seed, split, index); the label is index mod K.
MotionSample generate_motion_sample(const MotionShapesConfig& cfg, Split split, int index);

struct MotionShapesData {
  Dataset train;
  Dataset val;
  Dataset val_hueshift;
};

MotionShapesData generate_motionshapes(const MotionShapesConfig& cfg);

/// Writes train/, val/, val_hueshift/ and manifest.json under `dir`.
void write_motionshapes(const MotionShapesData& data, const MotionShapesConfig& cfg, const std::filesystem::path& dir);

}  // namespace mca
