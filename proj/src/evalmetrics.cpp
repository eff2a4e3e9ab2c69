#include "georef/evalmetrics.hpp"

#include "georef/error.hpp"
#include "georef/voxel_map.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <unordered_map>

namespace georef {

namespace {

void check_pair(const Trajectory& est, const Trajectory& gt) {
  if (est.size() != gt.size()) {
    throw Error("trajectory length mismatch: " + std::to_string(est.size()) + " estimated vs " +
                std::to_string(gt.size()) + " reference poses");
  }
  if (est.empty()) throw Error("trajectories are empty");
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (est[i].index != gt[i].index) {
      throw Error("trajectory frame index mismatch at position " + std::to_string(i));
    }
  }
  validate_trajectory(est);
  validate_trajectory(gt);
}

}  // namespace

void validate_trajectory(const Trajectory& t) {
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i].index <= t[i - 1].index) {
      throw Error("trajectory frame indices not strictly increasing at position " + std::to_string(i));
    }
  }
}

std::vector<double> path_lengths(const Trajectory& t) {
  std::vector<double> d(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) {
    d[i] = d[i - 1] + (t[i].pose.translation() - t[i - 1].pose.translation()).norm();
  }
  return d;
}

AteResult ate(const Trajectory& est, const Trajectory& gt, AteMode mode) {
  check_pair(est, gt);
  const std::size_t n = est.size();
  std::vector<Vec3> e(n);
  std::vector<Vec3> g(n);
  switch (mode) {
    case AteMode::kFirstFrame: {
      const Pose e0 = est.front().pose.inverse();
      const Pose g0 = gt.front().pose.inverse();
      for (std::size_t i = 0; i < n; ++i) {
        e[i] = (e0 * est[i].pose).translation();
        g[i] = (g0 * gt[i].pose).translation();
      }
      break;
    }
    case AteMode::kUmeyama: {
      Eigen::Matrix3Xd src(3, n);
      Eigen::Matrix3Xd dst(3, n);
      for (std::size_t i = 0; i < n; ++i) {
        src.col(static_cast<Eigen::Index>(i)) = est[i].pose.translation();
        dst.col(static_cast<Eigen::Index>(i)) = gt[i].pose.translation();
      }
      const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);
      for (std::size_t i = 0; i < n; ++i) {
        e[i] = t.topLeftCorner<3, 3>() * est[i].pose.translation() + t.topRightCorner<3, 1>();
        g[i] = gt[i].pose.translation();
      }
      break;
    }
    case AteMode::kNone:
      for (std::size_t i = 0; i < n; ++i) {
        e[i] = est[i].pose.translation();
        g[i] = gt[i].pose.translation();
      }
      break;
  }
  AteResult r;
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (e[i] - g[i]).norm();
    r.mean += d;
    sq += d * d;
    r.max = std::max(r.max, d);
  }
  r.mean /= static_cast<double>(n);
  r.rmse = std::sqrt(sq / static_cast<double>(n));
  return r;
}

RteResult kitti_rte(const Trajectory& est, const Trajectory& gt) {
  check_pair(est, gt);
  const std::vector<double> dist = path_lengths(gt);
  const std::size_t n = gt.size();
  double t_sum = 0.0;
  double r_sum = 0.0;
  RteResult r;
  for (std::size_t first = 0; first < n; ++first) {
    std::size_t last = first;
    for (const double len : kRteSegmentLengths) {
      while (last < n && dist[last] < dist[first] + len) ++last;
      if (last >= n) break;
      const Pose gt_delta = gt[first].pose.inverse() * gt[last].pose;
      const Pose est_delta = est[first].pose.inverse() * est[last].pose;
      const Pose err = gt_delta.inverse() * est_delta;
      t_sum += err.translation().norm() / len;
      r_sum += rotation_angle(err.rotation()) / len;
      ++r.segments;
    }
  }
  if (r.segments == 0) {
    throw Error("trajectory too short for KITTI metric: path length " + std::to_string(dist.back()) +
                " m < 100 m");
  }
  r.translational_percent = 100.0 * t_sum / static_cast<double>(r.segments);
  r.rotational_deg_per_m = (180.0 / std::numbers::pi) * r_sum / static_cast<double>(r.segments);
  return r;
}

MmeResult mme(std::span<const Vec3> cloud, double radius, std::size_t min_neighbors) {
  if (!(radius > 0.0)) throw Error("mme: radius must be positive");
  std::unordered_map<VoxelKey, std::vector<std::size_t>, VoxelKeyHash> cells;
  cells.reserve(cloud.size() / 4 + 1);
  for (std::size_t i = 0; i < cloud.size(); ++i) cells[voxel_key(cloud[i], radius)].push_back(i);

  const double r_sq = radius * radius;
  const double log_2pie = std::log(2.0 * std::numbers::pi * std::numbers::e);
  double sum = 0.0;
  MmeResult result;
  for (const auto& p : cloud) {
    const VoxelKey c = voxel_key(p, radius);
    std::size_t n = 0;
    Vec3 s1 = Vec3::Zero();
    Mat3 s2 = Mat3::Zero();
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = cells.find({c.ix + dx, c.iy + dy, c.iz + dz});
          if (it == cells.end()) continue;
          for (const std::size_t j : it->second) {
            const Vec3 d = cloud[j] - p;
            if (d.squaredNorm() > r_sq) continue;
            ++n;
            s1 += d;
            s2.noalias() += d * d.transpose();
          }
        }
      }
    }
    if (n < min_neighbors || n < 2) continue;
    const double nn = static_cast<double>(n);
    const Vec3 mean = s1 / nn;
    Mat3 cov = (s2 - nn * mean * mean.transpose()) / (nn - 1.0);
    cov += kMmeCovarianceRegularization * Mat3::Identity();
    // ½ ln det(2πe Σ) = ½ (3 ln 2πe + ln det Σ)
    sum += 0.5 * (3.0 * log_2pie + std::log(cov.determinant()));
    ++result.evaluated;
  }
  if (result.evaluated == 0) {
    throw Error("mme: no point has at least " + std::to_string(min_neighbors) +
                " neighbors within " + std::to_string(radius) + " m");
  }
  result.mean_entropy = sum / static_cast<double>(result.evaluated);
  result.evaluated_fraction = static_cast<double>(result.evaluated) / static_cast<double>(cloud.size());
  return result;
}

PointCloud mme_preprocess(const std::vector<PointCloud>& clouds, const std::vector<Pose>& poses,
                          const Eigen::Vector2d& crop_center, double crop_extent, double voxel) {
  if (clouds.size() != poses.size()) throw Error("mme_preprocess: cloud and pose counts differ");
  const double half = 0.5 * crop_extent;
  // Voxels straddling the crop boundary only contain points within one voxel edge of it.
  const double margin = half + voxel * std::sqrt(3.0);
  PointCloud out;
  for (std::size_t f = 0; f < clouds.size(); ++f) {
    const Mat3 rot = poses[f].rotation_matrix();
    PointCloud world;
    world.reserve(clouds[f].size());
    for (const auto& p : clouds[f]) {
      const Vec3 w = rot * p + poses[f].translation();
      if (std::abs(w.x() - crop_center.x()) <= margin && std::abs(w.y() - crop_center.y()) <= margin) {
        world.push_back(w);
      }
    }
    for (const auto& p : voxel_downsample(world, voxel)) {
      if (std::abs(p.x() - crop_center.x()) <= half && std::abs(p.y() - crop_center.y()) <= half) {
        out.push_back(p);
      }
    }
  }
  return out;
}

}  // namespace georef
