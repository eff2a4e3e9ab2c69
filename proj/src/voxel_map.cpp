#include "georef/voxel_map.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace georef {

VoxelKey voxel_key(const Vec3& p, double voxel_size) {
  return {static_cast<std::int32_t>(std::floor(p.x() / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.y() / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.z() / voxel_size))};
}

Vec3 voxel_center(const VoxelKey& key, double voxel_size) {
  return Vec3(key.ix + 0.5, key.iy + 0.5, key.iz + 0.5) * voxel_size;
}

PointCloud voxel_downsample(std::span<const Vec3> cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel_downsample: size must be positive");
  PointCloud out;
  std::unordered_set<VoxelKey, VoxelKeyHash> seen;
  seen.reserve(cloud.size());
  for (const auto& p : cloud) {
    if (seen.insert(voxel_key(p, voxel_size)).second) out.push_back(p);
  }
  return out;
}

VoxelMap::VoxelMap(VoxelMapParams params) : params_(params) {
  if (!(params_.voxel_size > 0.0) || params_.max_points_per_voxel == 0 ||
      !(params_.min_point_distance >= 0.0)) {
    throw std::invalid_argument("VoxelMap: invalid parameters");
  }
}

bool VoxelMap::try_insert(const Vec3& p) {
  auto& bucket = buckets_[voxel_key(p, params_.voxel_size)];
  if (bucket.size() >= params_.max_points_per_voxel) return false;
  const double min_sq = params_.min_point_distance * params_.min_point_distance;
  for (const auto& q : bucket) {
    if ((q - p).squaredNorm() < min_sq) return false;
  }
  if (bucket.empty()) bucket.reserve(params_.max_points_per_voxel);
  bucket.push_back(p);
  return true;
}

InsertionReport VoxelMap::insert(std::span<const Vec3> points) {
  InsertionReport report;
  for (const auto& p : points) {
    if (try_insert(p)) {
      ++report.added;
    } else {
      ++report.rejected;
    }
  }
  return report;
}

InsertionReport VoxelMap::insert(std::span<const Vec3> points, const Pose& pose) {
  InsertionReport report;
  const Mat3 r = pose.rotation_matrix();
  for (const auto& p : points) {
    if (try_insert(r * p + pose.translation())) {
      ++report.added;
    } else {
      ++report.rejected;
    }
  }
  return report;
}

std::optional<Neighbor> VoxelMap::nearest(const Vec3& query, double max_dist) const {
  const VoxelKey c = voxel_key(query, params_.voxel_size);
  double best_sq = std::numeric_limits<double>::infinity();
  const Vec3* best = nullptr;
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dz = -1; dz <= 1; ++dz) {
        const auto it = buckets_.find({c.ix + dx, c.iy + dy, c.iz + dz});
        if (it == buckets_.end()) continue;
        for (const auto& p : it->second) {
          const double d = (p - query).squaredNorm();
          if (d < best_sq) {
            best_sq = d;
            best = &p;
          }
        }
      }
    }
  }
  if (best == nullptr) return std::nullopt;
  const double dist = std::sqrt(best_sq);
  if (dist > max_dist) return std::nullopt;
  return Neighbor{*best, dist};
}

std::size_t VoxelMap::trim(const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("VoxelMap::trim: radius must be positive");
  const double r_sq = radius * radius;
  std::size_t removed = 0;
  for (auto it = buckets_.begin(); it != buckets_.end();) {
    if ((voxel_center(it->first, params_.voxel_size) - center).squaredNorm() > r_sq) {
      it = buckets_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

std::size_t VoxelMap::point_count() const {
  std::size_t n = 0;
  for (const auto& [key, bucket] : buckets_) n += bucket.size();
  return n;
}

PointCloud VoxelMap::points() const {
  PointCloud out;
  out.reserve(point_count());
  for (const auto& [key, bucket] : buckets_) out.insert(out.end(), bucket.begin(), bucket.end());
  return out;
}

}  // namespace georef
