#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "mca/colorspace.hpp"
#include "mca/data.hpp"

namespace mca {

std::string to_string(Motion m) {
  switch (m) {
    case Motion::kUp: return "up";
    case Motion::kDown: return "down";
    case Motion::kLeft: return "left";
    case Motion::kRight: return "right";
    case Motion::kGrow: return "grow";
    case Motion::kShrink: return "shrink";
  }
  return "?";
}

std::string to_string(ShapeKind s) {
  switch (s) {
    case ShapeKind::kSquare: return "square";
    case ShapeKind::kDisc: return "disc";
    case ShapeKind::kDiamond: return "diamond";
  }
  return "?";
}

void MotionShapesConfig::validate() const {
  if (classes < 2 || classes > kMotionCount) throw InvalidArgument("classes must lie in [2, 6]");
  if (frames < 2) throw InvalidArgument("clips need at least 2 frames");
  if (height < 8 || width < 8) throw InvalidArgument("frames must be at least 8x8");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw InvalidArgument("kappa must lie in [0, 1]");
  if (train_count < 0 || val_count < 0) throw InvalidArgument("split sizes must be non-negative");
  if (palette.empty()) throw InvalidArgument("shape palette is empty");
}

double class_hue(int label, int classes) { return 360.0 * label / classes; }

namespace {

struct Geometry {
  std::vector<double> row, col, radius;
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Geometry plan_trajectory(Motion motion, int frames, int height, int width, std::mt19937_64& rng) {
  const double scale = std::min(height, width) / 32.0;
  Geometry g;
  g.row.resize(frames);
  g.col.resize(frames);
  g.radius.resize(frames);
  const double last = frames - 1;

  // Shape centres stay inside [lo, hi] along each axis with a one-pixel border.
  auto place = [&](double extent, double travel, int length) {
    const double lo = extent + 1.0;
    const double hi = length - extent - 2.0;
    if (hi - lo < travel) {
      throw InvalidArgument("degenerate geometry: shape trajectory does not fit in a " + std::to_string(length) +
                            "-pixel frame");
    }
    return uniform(rng, lo, hi - travel);
  };

  switch (motion) {
    case Motion::kUp:
    case Motion::kDown:
    case Motion::kLeft:
    case Motion::kRight: {
      const double r = uniform(rng, 3.0, 4.5) * scale;
      const double speed = uniform(rng, 0.8, 1.3) * scale;
      const bool vertical = motion == Motion::kUp || motion == Motion::kDown;
      const bool negative = motion == Motion::kUp || motion == Motion::kLeft;
      const double travel = speed * last;
      const double along_start = place(r, travel, vertical ? height : width);
      const double across = place(r, 0.0, vertical ? width : height);
      for (int t = 0; t < frames; ++t) {
        const double along = negative ? along_start + travel - speed * t : along_start + speed * t;
        g.row[t] = vertical ? along : across;
        g.col[t] = vertical ? across : along;
        g.radius[t] = r;
      }
      break;
    }
    case Motion::kGrow:
    case Motion::kShrink: {
      const double r0 = uniform(rng, 2.5, 3.5) * scale;
      const double rate = uniform(rng, 0.5, 0.8) * scale;
      const double r_max = r0 + rate * last;
      const double row = place(r_max, 0.0, height);
      const double col = place(r_max, 0.0, width);
      for (int t = 0; t < frames; ++t) {
        const double step = motion == Motion::kGrow ? t : last - t;
        g.row[t] = row;
        g.col[t] = col;
        g.radius[t] = r0 + rate * step;
      }
      break;
    }
  }
  return g;
}

bool inside(ShapeKind kind, double dy, double dx, double r) {
  switch (kind) {
    case ShapeKind::kSquare: return std::abs(dy) <= r && std::abs(dx) <= r;
    case ShapeKind::kDisc: return dy * dy + dx * dx <= r * r;
    case ShapeKind::kDiamond: return std::abs(dy) + std::abs(dx) <= 1.3 * r;
  }
  return false;
}

/// Low-frequency gray texture: a coarse random lattice, bilinearly upsampled.
Eigen::MatrixXd background(int height, int width, std::mt19937_64& rng) {
  constexpr int kLattice = 5;
  Eigen::MatrixXd lattice(kLattice, kLattice);
  for (Index j = 0; j < kLattice; ++j)
    for (Index i = 0; i < kLattice; ++i) lattice(i, j) = uniform(rng, 0.15, 0.55);
  Eigen::MatrixXd out(height, width);
  for (int y = 0; y < height; ++y) {
    const double fy = (kLattice - 1) * (y + 0.5) / height;
    const int y0 = std::min(static_cast<int>(fy), kLattice - 2);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = (kLattice - 1) * (x + 0.5) / width;
      const int x0 = std::min(static_cast<int>(fx), kLattice - 2);
      const double wx = fx - x0;
      out(y, x) = (1 - wy) * ((1 - wx) * lattice(y0, x0) + wx * lattice(y0, x0 + 1)) +
                  wy * ((1 - wx) * lattice(y0 + 1, x0) + wx * lattice(y0 + 1, x0 + 1));
    }
  }
  return out;
}

}  // namespace

MotionSample generate_motion_sample(const MotionShapesConfig& cfg, Split split, int index) {
  cfg.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(split == Split::kTrain ? 0x7a11u : 0x5a1du),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);

  MotionSample s;
  s.label = index % cfg.classes;
  const auto motion = static_cast<Motion>(s.label);
  s.shape = cfg.palette[std::uniform_int_distribution<std::size_t>(0, cfg.palette.size() - 1)(rng)];

  s.confounded = uniform(rng, 0.0, 1.0) < cfg.kappa;
  if (s.confounded) {
    s.hue = class_hue(s.label, cfg.classes) + uniform(rng, -15.0, 15.0);
  } else {
    s.hue = uniform(rng, 0.0, 360.0);
  }
  s.hue = std::fmod(s.hue + 360.0, 360.0);
  const Rgb<double> color = hsv_to_rgb(Hsv<double>{s.hue, uniform(rng, 0.65, 1.0), uniform(rng, 0.7, 1.0)});

  const Geometry geo = plan_trajectory(motion, cfg.frames, cfg.height, cfg.width, rng);
  const Eigen::MatrixXd bg = background(cfg.height, cfg.width, rng);
  std::normal_distribution<double> noise(0.0, 0.02);

  constexpr int kSuper = 4;
  s.video = VideoU8({cfg.frames, 3, cfg.height, cfg.width});
  s.centroid_row.resize(cfg.frames);
  s.centroid_col.resize(cfg.frames);
  s.radius = geo.radius;
  Eigen::MatrixXd coverage(cfg.height, cfg.width);
  for (int t = 0; t < cfg.frames; ++t) {
    coverage.setZero();
    const double r = geo.radius[t];
    const double extent = 1.3 * r + 1.0;
    const int y_lo = std::max(0, static_cast<int>(std::floor(geo.row[t] - extent)));
    const int y_hi = std::min(cfg.height - 1, static_cast<int>(std::ceil(geo.row[t] + extent)));
    const int x_lo = std::max(0, static_cast<int>(std::floor(geo.col[t] - extent)));
    const int x_hi = std::min(cfg.width - 1, static_cast<int>(std::ceil(geo.col[t] + extent)));
    double mass = 0, mass_row = 0, mass_col = 0;
    for (int y = y_lo; y <= y_hi; ++y) {
      for (int x = x_lo; x <= x_hi; ++x) {
        int hits = 0;
        for (int sy = 0; sy < kSuper; ++sy) {
          for (int sx = 0; sx < kSuper; ++sx) {
            const double py = y + (sy + 0.5) / kSuper - geo.row[t];
            const double px = x + (sx + 0.5) / kSuper - geo.col[t];
            hits += inside(s.shape, py, px, r);
          }
        }
        const double c = static_cast<double>(hits) / (kSuper * kSuper);
        coverage(y, x) = c;
        mass += c;
        mass_row += c * (y + 0.5);
        mass_col += c * (x + 0.5);
      }
    }
    s.centroid_row[t] = mass_row / mass;
    s.centroid_col[t] = mass_col / mass;

    const double rgb[3] = {color.r, color.g, color.b};
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) {
          const double cov = coverage(y, x);
          const double value = cov * rgb[c] + (1.0 - cov) * bg(y, x) + noise(rng);
          s.video.at(t, c, y, x) = static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 1.0) * 255.0));
        }
      }
    }
  }
  return s;
}

MotionShapesData generate_motionshapes(const MotionShapesConfig& cfg) {
  cfg.validate();
  MotionShapesData data;
  for (int i = 0; i < cfg.train_count; ++i) {
    MotionSample s = generate_motion_sample(cfg, Split::kTrain, i);
    data.train.push_back(std::move(s.video), s.label);
  }
  for (int i = 0; i < cfg.val_count; ++i) {
    MotionSample s = generate_motion_sample(cfg, Split::kVal, i);
    data.val_hueshift.push_back(channel_swap(s.video, cfg.hueshift), s.label);
    data.val.push_back(std::move(s.video), s.label);
  }
  return data;
}

void write_motionshapes(const MotionShapesData& data, const MotionShapesConfig& cfg, const std::filesystem::path& dir) {
  save_mcav_dir(data.train, dir / "train", "");
  save_mcav_dir(data.val, dir / "val", "");
  save_mcav_dir(data.val_hueshift, dir / "val_hueshift", "");

  nlohmann::ordered_json manifest;
  manifest["format"] = "mcav";
  manifest["version"] = kMcavVersion;
  manifest["seed"] = cfg.seed;
  manifest["kappa"] = cfg.kappa;
  manifest["classes"] = cfg.classes;
  std::vector<std::string> names;
  for (int k = 0; k < cfg.classes; ++k) names.push_back(to_string(static_cast<Motion>(k)));
  manifest["class_names"] = names;
  std::vector<double> hues;
  for (int k = 0; k < cfg.classes; ++k) hues.push_back(class_hue(k, cfg.classes));
  manifest["class_hues"] = hues;
  manifest["frames"] = cfg.frames;
  manifest["height"] = cfg.height;
  manifest["width"] = cfg.width;
  manifest["hueshift_permutation"] = cfg.hueshift.name();
  manifest["splits"] = {{"train", data.train.size()}, {"val", data.val.size()}, {"val_hueshift", data.val_hueshift.size()}};

  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace mca
