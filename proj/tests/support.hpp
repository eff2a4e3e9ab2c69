#pragma once

// Generators and scene builders shared by the unit and acceptance tests.

#include "georef/geom.hpp"
#include "georef/synth.hpp"
#include "georef/voxel_map.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace georef::test {

inline constexpr double kDeg = std::numbers::pi / 180.0;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(engine_() >> 11) * 0x1.0p-53);
  }
  int integer(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }
  double normal() {
    const double u1 = 1.0 - uniform(0.0, 1.0);
    const double u2 = uniform(0.0, 1.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  Vec3 vec(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }
  Vec3 unit() {
    for (;;) {
      const Vec3 v = vec(-1.0, 1.0);
      const double n = v.norm();
      if (n > 1e-3 && n <= 1.0) return v / n;
    }
  }
  /// Rotation of angle in [0, max_angle] about a random axis.
  Quat rotation(double max_angle) { return Quat(Eigen::AngleAxisd(uniform(0.0, max_angle), unit())); }
  Pose pose(double max_translation, double max_angle) {
    return {vec(-max_translation, max_translation), rotation(max_angle)};
  }
  /// Perturbation with translation norm and rotation angle exactly bounded.
  Pose perturbation(double max_translation, double max_angle) {
    return {unit() * uniform(0.0, max_translation), rotation(max_angle)};
  }

 private:
  std::mt19937_64 engine_;
};

/// Sloped 40 x 40 m ground patch, five walls and a raised slab, sampled uniformly
/// at random and scaled about the origin.
inline PointCloud structured_scene(std::size_t count = 40000, double scale = 1.0, std::uint64_t seed = 11) {
  struct Patch {
    Vec3 origin, u, v;
    double lu, lv;
  };
  const Patch patches[] = {
      {{-20, -20, 0}, {1, 0, 0}, {0, 1, 0}, 40, 40},  // ground, z lifted below
      {{-15, -12, 0.3}, {1, 0, 0}, {0, 0, 1}, 22, 6},
      {{-14, 10, 0.3}, {0.8, 0.6, 0}, {0, 0, 1}, 18, 7},
      {{12, -15, 0.3}, {0, 1, 0}, {0, 0, 1}, 24, 5},
      {{-17, -6, 0.3}, {0, 1, 0}, {0, 0, 1}, 10, 4},
      {{3, 3, 0.3}, {0.6, -0.8, 0}, {0, 0, 1}, 6, 3},
      {{-5, 5, 3.5}, {1, 0, 0}, {0, 1, 0}, 6, 4},
  };
  double total = 0.0;
  for (const auto& p : patches) total += p.lu * p.lv;
  Gen gen(seed);
  PointCloud pts;
  pts.reserve(count);
  while (pts.size() < count) {
    double pick = gen.uniform(0.0, total);
    std::size_t i = 0;
    while (i + 1 < std::size(patches) && pick > patches[i].lu * patches[i].lv) {
      pick -= patches[i].lu * patches[i].lv;
      ++i;
    }
    const Patch& p = patches[i];
    Vec3 q = p.origin + gen.uniform(0.0, p.lu) * p.u + gen.uniform(0.0, p.lv) * p.v;
    if (i == 0) q.z() = 0.05 * q.x() - 0.03 * q.y();
    pts.push_back(scale * q);
  }
  return pts;
}

/// Target map and the points it actually stored, so a source drawn from
/// `stored` has an exact zero-cost alignment.
struct OracleScene {
  VoxelMap map{VoxelMapParams{1.0, 20, 0.05}};
  PointCloud stored;
};

/// Every `stride`-th point, taking up to `count` points.
inline PointCloud subsample(const PointCloud& cloud, std::size_t count) {
  PointCloud out;
  const std::size_t stride = std::max<std::size_t>(1, cloud.size() / count);
  for (std::size_t i = 0; i < cloud.size() && out.size() < count; i += stride) out.push_back(cloud[i]);
  return out;
}

/// 20 x 20 m structured scene used by the registration oracles.
inline OracleScene oracle_scene() {
  OracleScene s;
  s.map.insert(structured_scene(60000, 0.5));
  s.stored = s.map.points();
  return s;
}

/// Small world: about 370 m of loop with thirty buildings, the far side within
/// sensor range of the map edge.
inline SyntheticWorld small_world(std::uint64_t seed = 7) { return generate_world(seed, 200.0, 30); }

/// The 550 m city also used by the acceptance run.
inline SyntheticWorld city_world(std::uint64_t seed = 42) { return generate_world(seed, 550.0, 60); }

inline std::vector<PointCloud> simulate_all(const SyntheticWorld& world, std::size_t frames,
                                            const SensorModel& sensor = {}) {
  std::vector<PointCloud> clouds;
  frames = std::min(frames, world.trajectory.size());
  clouds.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    clouds.push_back(simulate_scan(world, world.trajectory[i].pose, sensor, world.seed * 1000003ULL + i));
  }
  return clouds;
}

}  // namespace georef::test
