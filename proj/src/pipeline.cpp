#include "georef/pipeline.hpp"

#include "georef/error.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace georef {

namespace {

std::string trim_ws(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw Error("config: invalid number for " + key + ": '" + v + "'");
  return d;
}

int parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  int i = 0;
  try {
    i = std::stoi(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw Error("config: invalid integer for " + key + ": '" + v + "'");
  return i;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("config: invalid boolean for " + key + ": '" + v + "'");
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& config_setters() {
  static const std::map<std::string, Setter> setters = [] {
    std::map<std::string, Setter> m;
    const auto dbl = [](double PipelineConfig::*field) {
      return [field](PipelineConfig& c, const std::string& k, const std::string& v) {
        c.*field = parse_double(k, v);
      };
    };
    const auto integer = [](int PipelineConfig::*field) {
      return [field](PipelineConfig& c, const std::string& k, const std::string& v) {
        c.*field = parse_int(k, v);
      };
    };
    const auto boolean = [](bool PipelineConfig::*field) {
      return [field](PipelineConfig& c, const std::string& k, const std::string& v) {
        c.*field = parse_bool(k, v);
      };
    };
    m["downsample_voxel"] = dbl(&PipelineConfig::downsample_voxel);
    m["map_voxel"] = dbl(&PipelineConfig::map_voxel);
    m["max_points_per_voxel"] = integer(&PipelineConfig::max_points_per_voxel);
    m["min_point_distance"] = dbl(&PipelineConfig::min_point_distance);
    m["correspondence_dist"] = dbl(&PipelineConfig::correspondence_dist);
    m["kernel_width"] = dbl(&PipelineConfig::kernel_width);
    m["static_threshold"] = dbl(&PipelineConfig::static_threshold);
    m["inlier_gate"] = dbl(&PipelineConfig::inlier_gate);
    m["submap_radius"] = dbl(&PipelineConfig::submap_radius);
    m["max_iterations"] = integer(&PipelineConfig::max_iterations);
    m["rotation_scale"] = dbl(&PipelineConfig::rotation_scale);
    m["init_coarse_voxel"] = dbl(&PipelineConfig::init_coarse_voxel);
    m["use_scan_to_map"] = boolean(&PipelineConfig::use_scan_to_map);
    m["deterministic"] = boolean(&PipelineConfig::deterministic);
    return m;
  }();
  return setters;
}

}  // namespace

void PipelineConfig::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw Error(std::string("config: ") + name + " must be positive");
  };
  positive(downsample_voxel, "downsample_voxel");
  positive(map_voxel, "map_voxel");
  positive(max_points_per_voxel, "max_points_per_voxel");
  positive(min_point_distance, "min_point_distance");
  positive(correspondence_dist, "correspondence_dist");
  positive(kernel_width, "kernel_width");
  positive(static_threshold, "static_threshold");
  positive(submap_radius, "submap_radius");
  positive(max_iterations, "max_iterations");
  positive(rotation_scale, "rotation_scale");
  if (!(inlier_gate > 0.0 && inlier_gate <= 1.0)) throw Error("config: inlier_gate must be in (0, 1]");
  if (!(init_coarse_voxel >= 0.0)) throw Error("config: init_coarse_voxel must be non-negative");
}

RegistrationParams PipelineConfig::registration_params() const {
  RegistrationParams p;
  p.max_correspondence_dist = correspondence_dist;
  p.kernel_width = kernel_width;
  p.max_iterations = max_iterations;
  return p;
}

VoxelMapParams PipelineConfig::voxel_params() const {
  return {map_voxel, static_cast<std::size_t>(max_points_per_voxel), min_point_distance};
}

PipelineConfig parse_pipeline_config(std::istream& in) {
  PipelineConfig config;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim_ws(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim_ws(line.substr(0, eq));
    const std::string value = trim_ws(line.substr(eq + 1));
    const auto& setters = config_setters();
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw Error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    it->second(config, key, value);
  }
  config.validate();
  return config;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  return parse_pipeline_config(in);
}

void write_pipeline_config(std::ostream& out, const PipelineConfig& c) {
  out.precision(17);
  out << "# georef pipeline config v1\n"
      << "downsample_voxel = " << c.downsample_voxel << "\n"
      << "map_voxel = " << c.map_voxel << "\n"
      << "max_points_per_voxel = " << c.max_points_per_voxel << "\n"
      << "min_point_distance = " << c.min_point_distance << "\n"
      << "correspondence_dist = " << c.correspondence_dist << "\n"
      << "kernel_width = " << c.kernel_width << "\n"
      << "static_threshold = " << c.static_threshold << "\n"
      << "inlier_gate = " << c.inlier_gate << "\n"
      << "submap_radius = " << c.submap_radius << "\n"
      << "max_iterations = " << c.max_iterations << "\n"
      << "rotation_scale = " << c.rotation_scale << "\n"
      << "init_coarse_voxel = " << c.init_coarse_voxel << "\n"
      << "use_scan_to_map = " << (c.use_scan_to_map ? "true" : "false") << "\n"
      << "deterministic = " << (c.deterministic ? "true" : "false") << "\n";
}

Pipeline::Pipeline(const ReferenceMap& reference, PipelineConfig config)
    : config_(config),
      reference_((config.validate(), config.voxel_params())),
      submap_(config.voxel_params()),
      origin_offset_(reference.origin_offset) {
  if (reference.points.empty()) throw Error("reference map is empty");
  reference_.insert(reference.points);
}

Pose Pipeline::to_global(const Pose& local) const {
  return {local.translation() + origin_offset_, local.rotation()};
}

Pose Pipeline::to_local(const Pose& global) const {
  return {global.translation() - origin_offset_, global.rotation()};
}

FrameResult Pipeline::init(const PointCloud& first_cloud, const Pose& manual_pose) {
  if (initialized_) throw Error("pipeline already initialized");
  if (first_cloud.empty()) throw Error("first frame is empty");
  const PointCloud ds = voxel_downsample(first_cloud, config_.downsample_voxel);
  Pose start = to_local(manual_pose);
  // Pyramid of coarser copies of the reference map, halving the voxel down to map_voxel.
  const PointCloud reference_points = config_.init_coarse_voxel > 0.0 ? reference_.points() : PointCloud{};
  for (double voxel = config_.init_coarse_voxel; voxel > config_.map_voxel; voxel /= 2.0) {
    const double k = voxel / config_.map_voxel;
    VoxelMap coarse({voxel, static_cast<std::size_t>(config_.max_points_per_voxel), config_.min_point_distance});
    coarse.insert(reference_points);
    RegistrationParams params = config_.registration_params();
    params.max_correspondence_dist *= k;
    params.kernel_width *= k;
    if (const RegistrationResult r = icp_align(ds, coarse, start, params); r.valid) start = r.pose;
  }
  const RegistrationResult reg = icp_align(ds, reference_, start, config_.registration_params());
  if (!reg.valid) {
    throw Error("initial registration failed: manual pose too far from the reference map");
  }
  prev_ = curr_ = reg.pose;
  submap_.insert(ds, curr_);
  submap_.trim(curr_.translation(), config_.submap_radius);
  frame_index_ = 0;
  initialized_ = true;

  FrameResult r;
  r.frame_index = 0;
  r.pose = to_global(curr_);
  r.s2m_inlier_ratio = reg.inlier_ratio;
  r.s2m_used = reg.inlier_ratio > config_.inlier_gate;
  r.optimizer_converged = reg.converged;
  return r;
}

FrameResult Pipeline::process_frame(const PointCloud& cloud) {
  if (!initialized_) throw Error("process_frame called before init");
  FrameResult r;
  r.frame_index = ++frame_index_;

  const PointCloud ds = voxel_downsample(cloud, config_.downsample_voxel);
  const Pose x_init = extrapolate_pose(prev_, curr_);
  if (ds.empty()) {
    r.degraded = true;
    r.pose = to_global(x_init);
    prev_ = curr_;
    curr_ = x_init;
    return r;
  }
  const RegistrationParams params = config_.registration_params();

  RegistrationResult s2m;
  if (config_.use_scan_to_map) s2m = icp_align(ds, reference_, x_init, params);
  const RegistrationResult s2s = icp_align(ds, submap_, x_init, params);

  r.s2m_inlier_ratio = s2m.valid ? s2m.inlier_ratio : 0.0;
  r.s2s_valid = s2s.valid;
  if (s2s.valid) {
    r.s2s_delta = curr_.inverse() * s2s.pose;
    if (r.s2s_delta.translation().norm() < config_.static_threshold) {
      r.static_frame = true;
      r.pose = to_global(curr_);
      return r;
    }
  }

  const bool use_abs = s2m.valid && s2m.inlier_ratio > config_.inlier_gate;
  Pose pose = x_init;
  if (!use_abs && !s2s.valid) {
    r.degraded = true;
  } else {
    std::optional<AbsoluteConstraint> abs;
    std::optional<RelativeConstraint> rel;
    if (use_abs) abs = AbsoluteConstraint{s2m.pose, config_.kernel_width, 1.0};
    if (s2s.valid) rel = RelativeConstraint{curr_, r.s2s_delta, config_.kernel_width, 1.0};
    FrameOptimizerOptions opts;
    opts.rotation_scale = config_.rotation_scale;
    const FrameOptimizationResult opt = optimize_frame(x_init, abs, rel, opts);
    pose = opt.pose;
    r.optimizer_converged = opt.converged;
    r.absolute_weight = opt.absolute_weight;
    r.relative_weight = opt.relative_weight;
  }
  r.s2m_used = use_abs;

  prev_ = curr_;
  curr_ = pose;
  submap_.insert(ds, curr_);
  submap_.trim(curr_.translation(), config_.submap_radius);
  r.pose = to_global(curr_);
  return r;
}

RunResult run(const ReferenceMap& reference, const std::vector<PointCloud>& clouds,
              const Pose& manual_pose, const PipelineConfig& config) {
  if (clouds.empty()) throw Error("run: empty scan sequence");
  Pipeline pipeline(reference, config);
  RunResult out;
  out.trajectory.reserve(clouds.size());
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    FrameResult fr = i == 0 ? pipeline.init(clouds[0], manual_pose) : pipeline.process_frame(clouds[i]);
    const PointCloud world = transform_cloud(fr.pose, clouds[i]);
    out.map.insert(out.map.end(), world.begin(), world.end());
    out.trajectory.push_back(std::move(fr));
  }
  return out;
}

}  // namespace georef
