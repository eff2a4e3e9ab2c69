#pragma once

// Synthetic city blocks and a spinning-LiDAR ray caster for ground-truth tests.
//
// Randomness: std::mt19937_64 (bit-exact by the C++ standard). Uniform
// doubles take the top 53 bits of one draw; normals use Box-Muller on two
// uniforms. No std::*_distribution is used, so outputs are identical across
// standard libraries.

#include "georef/evalmetrics.hpp"
#include "georef/geom.hpp"
#include "georef/refmap.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace georef {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// [0, 1)
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

struct SensorModel {
  int channels = 32;
  int azimuth_steps = 720;
  double vfov_min_deg = -25.0;
  double vfov_max_deg = 15.0;
  double max_range = 80.0;
  double range_noise_sigma = 0.02;

  void validate() const;
};

struct BuildingBox {
  double xmin = 0.0, xmax = 0.0;
  double ymin = 0.0, ymax = 0.0;
  double zmin = 0.0, zmax = 0.0;
};

struct GroundPlane {
  double z0 = 0.0;
  double slope_x = 0.0;
  double slope_y = 0.0;

  double height(double x, double y) const { return z0 + slope_x * x + slope_y * y; }
};

struct WorldOptions {
  double frame_spacing = 1.8;     // mean meters between frames
  int acceleration_frames = 20;   // frames to ramp up from standstill
  double sensor_height = 1.8;     // above ground
  double street_clearance = 6.0;  // trajectory to nearest wall
  bool sloped_ground = true;
  int max_attempts_per_building = 400;
  double pole_spacing = 14.0;  // mean meters between poles along each roadside, 0 disables
  double car_spacing = 25.0;   // mean meters between parked cars along each roadside, 0 disables
};

struct SyntheticWorld {
  std::uint64_t seed = 0;
  double extent = 0.0;  // world spans center ± extent/2 on both axes
  Vec2 center = Vec2::Zero();
  std::string crs = "LOCAL:synthetic";
  std::vector<BuildingFootprint> footprints;
  std::vector<BuildingBox> boxes;  // true geometry, index-aligned with footprints
  std::vector<BuildingBox> clutter;  // poles and parked cars, absent from footprints
  GroundPlane ground;
  ElevationGrid ground_grid;
  Trajectory trajectory;  // sensor poses
};

/// Loop street through axis-aligned buildings (8-30 m sides, heights 4-20 m) with
/// roadside poles and parked cars.
/// Throws georef::Error when extent <= 50 or buildings cannot be placed.
SyntheticWorld generate_world(std::uint64_t seed, double extent, int building_count,
                              const WorldOptions& options = {});

/// Nearest hit distance along a unit direction, if within max_range.
std::optional<double> cast_ray(const SyntheticWorld& world, const Vec3& origin, const Vec3& dir,
                               double max_range);

/// Sensor-frame scan from `pose` with additive Gaussian range noise.
PointCloud simulate_scan(const SyntheticWorld& world, const Pose& pose, const SensorModel& sensor,
                         std::uint64_t seed);

/// Smallest horizontal distance between trajectory positions and building walls.
double trajectory_clearance(const SyntheticWorld& world);

/// Footprints, grid and trajectory shifted by a horizontal global offset.
SyntheticWorld shifted_world(const SyntheticWorld& world, const Vec3& offset);

ReferenceMap build_world_reference_map(const SyntheticWorld& world);

}  // namespace georef
