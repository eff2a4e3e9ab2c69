#pragma once

// Per-frame mapping loop: downsample, predict, register against the prior map
// and the rolling submap, fuse, then grow and trim the submap.
//
// The pipeline works in the reference map's local frame and reports
// georeferenced poses (global = local shifted by the map's origin offset).

#include "georef/geom.hpp"
#include "georef/posegraph.hpp"
#include "georef/refmap.hpp"
#include "georef/registration.hpp"
#include "georef/voxel_map.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace georef {

struct PipelineConfig {
  double downsample_voxel = 1.5;
  double map_voxel = 1.0;
  int max_points_per_voxel = 10;
  double min_point_distance = 0.1;
  double correspondence_dist = 6.0;
  double kernel_width = 1.0;
  double static_threshold = 0.1;
  double inlier_gate = 0.5;
  double submap_radius = 100.0;
  int max_iterations = 30;
  double rotation_scale = 1.0;
  /// Coarsest voxel of the first-frame pre-alignment pyramid (halved down to
  /// map_voxel); 0 disables.
  double init_coarse_voxel = 4.0;
  bool use_scan_to_map = true;
  bool deterministic = true;

  /// Throws georef::Error naming the first offending field.
  void validate() const;
  RegistrationParams registration_params() const;
  VoxelMapParams voxel_params() const;
};

/// Flat `key = value` text; `#` starts a comment. Unknown keys are rejected.
PipelineConfig parse_pipeline_config(std::istream& in);
PipelineConfig load_pipeline_config(const std::string& path);
void write_pipeline_config(std::ostream& out, const PipelineConfig& config);

struct FrameResult {
  std::size_t frame_index = 0;
  /// Georeferenced pose.
  Pose pose;
  double s2m_inlier_ratio = 0.0;
  bool s2m_used = false;
  bool static_frame = false;
  /// previous pose⁻¹ ∘ scan-to-scan pose; identity when unavailable.
  Pose s2s_delta;
  bool s2s_valid = false;
  /// Both registrations unusable; pose is the motion-model prediction.
  bool degraded = false;
  bool optimizer_converged = true;
  double absolute_weight = 0.0;
  double relative_weight = 0.0;
};

class Pipeline {
 public:
  Pipeline(const ReferenceMap& reference, PipelineConfig config = {});

  /// Refines the manual (georeferenced) first pose against the reference map.
  /// Throws georef::Error when the registration finds no correspondences.
  FrameResult init(const PointCloud& first_cloud, const Pose& manual_pose);
  FrameResult process_frame(const PointCloud& cloud);

  bool initialized() const { return initialized_; }
  std::size_t frame_index() const { return frame_index_; }
  const PipelineConfig& config() const { return config_; }
  const VoxelMap& reference_map() const { return reference_; }
  const VoxelMap& submap() const { return submap_; }
  const Vec3& origin_offset() const { return origin_offset_; }
  /// Last optimized pose in the local frame.
  const Pose& current_local_pose() const { return curr_; }

  Pose to_global(const Pose& local) const;
  Pose to_local(const Pose& global) const;

 private:
  PipelineConfig config_;
  VoxelMap reference_;
  VoxelMap submap_;
  Vec3 origin_offset_;
  Pose prev_;
  Pose curr_;
  std::size_t frame_index_ = 0;
  bool initialized_ = false;
};

struct RunResult {
  std::vector<FrameResult> trajectory;
  /// Full-resolution input clouds transformed by their optimized poses (global frame).
  PointCloud map;
};

RunResult run(const ReferenceMap& reference, const std::vector<PointCloud>& clouds,
              const Pose& manual_pose, const PipelineConfig& config = {});

}  // namespace georef
