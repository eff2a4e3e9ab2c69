#pragma once

// Trajectory and map-quality metrics.

#include "georef/geom.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace georef {

struct TrajectoryEntry {
  std::size_t index = 0;
  Pose pose;
};

/// Frame indices strictly increasing.
using Trajectory = std::vector<TrajectoryEntry>;

void validate_trajectory(const Trajectory& t);

/// Cumulative translation path length per entry, starting at 0.
std::vector<double> path_lengths(const Trajectory& t);

enum class AteMode {
  kFirstFrame,  // each trajectory re-anchored at its own first pose
  kUmeyama,     // closed-form rigid alignment of est onto gt, no scale
  kNone,        // raw translational differences
};

struct AteResult {
  double mean = 0.0;
  double max = 0.0;
  double rmse = 0.0;
};

AteResult ate(const Trajectory& est, const Trajectory& gt, AteMode mode = AteMode::kFirstFrame);

struct RteResult {
  double translational_percent = 0.0;
  double rotational_deg_per_m = 0.0;
  std::size_t segments = 0;
};

inline constexpr double kRteSegmentLengths[] = {100, 200, 300, 400, 500, 600, 700, 800};

/// KITTI odometry metric over 100..800 m segments, every start frame.
RteResult kitti_rte(const Trajectory& est, const Trajectory& gt);

struct MmeResult {
  double mean_entropy = 0.0;
  double evaluated_fraction = 0.0;
  std::size_t evaluated = 0;
};

inline constexpr double kMmeRadius = 1.0;
inline constexpr std::size_t kMmeMinNeighbors = 10;
inline constexpr double kMmeCovarianceRegularization = 1e-9;

/// Mean of ½ ln det(2πe Σ) over points with >= min_neighbors points (self
/// included) within radius; Σ is the 1/(n-1) sample covariance + 1e-9 I.
MmeResult mme(std::span<const Vec3> cloud, double radius = kMmeRadius,
              std::size_t min_neighbors = kMmeMinNeighbors);

/// Each frame transformed, downsampled individually, concatenated without joint
/// filtering and cropped to the axis-aligned square of side crop_extent.
PointCloud mme_preprocess(const std::vector<PointCloud>& clouds, const std::vector<Pose>& poses,
                          const Eigen::Vector2d& crop_center, double crop_extent = 100.0,
                          double voxel = 0.25);

}  // namespace georef
