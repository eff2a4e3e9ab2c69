#pragma once

// Sparse voxel hash map with bounded, insertion-ordered point buckets.
// Backs both the fixed reference map and the rolling odometry submap.
//
// Cells are half-open, [i*s, (i+1)*s) per axis, with mathematical floor for
// negative coordinates. Mutation requires exclusive access; const queries may
// run concurrently.

#include "georef/geom.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace georef {

struct VoxelKey {
  std::int32_t ix = 0;
  std::int32_t iy = 0;
  std::int32_t iz = 0;

  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    const auto x = static_cast<std::uint32_t>(k.ix) * 73856093u;
    const auto y = static_cast<std::uint32_t>(k.iy) * 19349669u;
    const auto z = static_cast<std::uint32_t>(k.iz) * 83492791u;
    return static_cast<std::size_t>(x ^ y ^ z);
  }
};

VoxelKey voxel_key(const Vec3& p, double voxel_size);
Vec3 voxel_center(const VoxelKey& key, double voxel_size);

/// Keeps the first point seen in each voxel of edge `voxel_size`, in input order.
PointCloud voxel_downsample(std::span<const Vec3> cloud, double voxel_size);

struct InsertionReport {
  std::size_t added = 0;
  std::size_t rejected = 0;
};

struct Neighbor {
  Vec3 point;
  double distance = 0.0;
};

struct VoxelMapParams {
  double voxel_size = 1.0;
  std::size_t max_points_per_voxel = 10;
  double min_point_distance = 0.1;
};

class VoxelMap {
 public:
  using Bucket = std::vector<Vec3>;

  explicit VoxelMap(VoxelMapParams params = {});

  /// Points that would overflow a bucket or land closer than
  /// min_point_distance to a stored point are skipped. Full voxels never evict.
  InsertionReport insert(std::span<const Vec3> points);
  InsertionReport insert(std::span<const Vec3> points, const Pose& pose);

  /// Closest stored point among the 3x3x3 voxels around the query, if within
  /// max_dist. Points farther than one voxel away may be missed.
  std::optional<Neighbor> nearest(const Vec3& query, double max_dist) const;

  /// Removes whole voxels whose center lies farther than radius from center.
  /// Returns the number of voxels removed.
  std::size_t trim(const Vec3& center, double radius);

  void clear() { buckets_.clear(); }

  const VoxelMapParams& params() const { return params_; }
  std::size_t voxel_count() const { return buckets_.size(); }
  std::size_t point_count() const;
  bool empty() const { return buckets_.empty(); }

  PointCloud points() const;
  const std::unordered_map<VoxelKey, Bucket, VoxelKeyHash>& buckets() const { return buckets_; }

 private:
  bool try_insert(const Vec3& p);

  VoxelMapParams params_;
  std::unordered_map<VoxelKey, Bucket, VoxelKeyHash> buckets_;
};

}  // namespace georef
