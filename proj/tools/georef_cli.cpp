// georef: build reference maps, run the mapping pipeline, evaluate results and
// generate synthetic test worlds.

#include "georef/error.hpp"
#include "georef/evalmetrics.hpp"
#include "georef/io.hpp"
#include "georef/pipeline.hpp"
#include "georef/refmap.hpp"
#include "georef/synth.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace georef;

namespace {

/// Outputs registered here are deleted if the command fails.
class OutputGuard {
 public:
  void add(const fs::path& p) { paths_.push_back(p); }
  void commit() { paths_.clear(); }
  ~OutputGuard() {
    std::error_code ec;
    for (const auto& p : paths_) fs::remove_all(p, ec);
  }

 private:
  std::vector<fs::path> paths_;
};

std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const char* what) {
  std::istringstream in(text);
  std::vector<double> v;
  double d;
  while (in >> d) v.push_back(d);
  if (!in.eof() || v.size() != expected) {
    throw Error(std::string(what) + ": expected " + std::to_string(expected) + " numbers, got '" + text + "'");
  }
  return v;
}

Trajectory to_trajectory(const std::vector<FrameResult>& frames) {
  Trajectory t;
  t.reserve(frames.size());
  for (const auto& f : frames) t.push_back({f.frame_index, f.pose});
  return t;
}

struct BuildRefmapArgs {
  std::vector<std::string> footprints;
  std::vector<std::string> grids;
  std::string grid_crs;
  std::string out;
};

int cmd_build_refmap(const BuildRefmapArgs& a) {
  if (a.footprints.empty() && a.grids.empty()) throw Error("build-refmap: need --footprints or --grid");
  std::vector<FootprintSet> sets;
  for (const auto& f : a.footprints) sets.push_back(read_footprints(f));
  std::vector<ElevationGrid> grids;
  for (const auto& g : a.grids) {
    grids.push_back(read_ascii_grid(g));
    grids.back().crs = a.grid_crs;
  }
  const ReferenceMap map = build_reference_map(sets, grids, make_ground_lookup(grids));
  OutputGuard guard;
  guard.add(a.out);
  guard.add(sidecar_path(a.out));
  write_reference_map(a.out, map);
  guard.commit();
  std::cout << "points " << map.points.size() << "\ncrs " << (map.crs_id.empty() ? "-" : map.crs_id)
            << "\norigin_offset " << std::setprecision(12) << map.origin_offset.x() << ' '
            << map.origin_offset.y() << ' ' << map.origin_offset.z() << '\n';
  return 0;
}

struct MapArgs {
  std::string refmap;
  std::string scans;
  std::string init;
  std::string init_pose;
  std::string config;
  std::string out_traj;
  std::string out_map;
  double yaw_correction = 0.0;
};

int cmd_map(const MapArgs& a) {
  const ReferenceMap ref = read_reference_map(a.refmap);
  const auto files = list_scan_files(a.scans);
  if (files.empty()) throw Error("no scan files in " + a.scans);
  const PipelineConfig config = a.config.empty() ? PipelineConfig{} : load_pipeline_config(a.config);

  Pose manual;
  if (!a.init_pose.empty()) {
    const auto v = parse_numbers(a.init_pose, 7, "--init-pose");
    manual = Pose(Vec3(v[0], v[1], v[2]), Quat(v[6], v[3], v[4], v[5]));
  } else if (!a.init.empty()) {
    const auto v = parse_numbers(a.init, 4, "--init");
    manual = Pose::FromXYZYaw(v[0], v[1], v[2], v[3]);
  } else {
    throw Error("map: --init or --init-pose is required");
  }

  OutputGuard guard;
  guard.add(a.out_traj);
  std::ofstream map_out;
  if (!a.out_map.empty()) {
    guard.add(a.out_map);
    guard.add(sidecar_path(a.out_map));
    map_out.open(a.out_map, std::ios::binary | std::ios::trunc);
    if (!map_out) throw Error("cannot write file: " + a.out_map);
  }

  Pipeline pipeline(ref, config);
  std::vector<FrameResult> frames;
  std::size_t s2m_used = 0, static_frames = 0, degraded = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const PointCloud cloud = apply_yaw_correction(read_cloud(files[i]), a.yaw_correction);
    FrameResult fr = i == 0 ? pipeline.init(cloud, manual) : pipeline.process_frame(cloud);
    if (fr.s2m_used) ++s2m_used;
    if (fr.static_frame) ++static_frames;
    if (fr.degraded) ++degraded;
    if (map_out.is_open()) {
      // Map points are written in the reference map's local frame; the sidecar holds the offset.
      append_bin_xyz(map_out, transform_cloud(pipeline.to_local(fr.pose), cloud));
    }
    frames.push_back(std::move(fr));
  }
  write_trajectory(a.out_traj, to_trajectory(frames));
  if (map_out.is_open()) {
    map_out.close();
    if (!map_out) throw Error("write failed: " + a.out_map);
    write_sidecar(a.out_map, {ref.crs_id, ref.origin_offset});
  }
  guard.commit();
  std::cout << "frames " << frames.size() << "\ns2m_used " << s2m_used << "\nstatic " << static_frames
            << "\ndegraded " << degraded << '\n';
  return 0;
}

struct EvalArgs {
  std::string est;
  std::string gt;
  std::string mode = "first_frame";
};

int cmd_eval_ate(const EvalArgs& a) {
  AteMode mode;
  if (a.mode == "first_frame") mode = AteMode::kFirstFrame;
  else if (a.mode == "umeyama") mode = AteMode::kUmeyama;
  else if (a.mode == "none") mode = AteMode::kNone;
  else throw Error("eval-ate: unknown mode '" + a.mode + "'");
  const AteResult r = ate(read_trajectory(a.est), read_trajectory(a.gt), mode);
  std::cout << std::fixed << std::setprecision(6) << "metric value_m\nate_mean " << r.mean
            << "\nate_max " << r.max << "\nate_rmse " << r.rmse << '\n';
  return 0;
}

int cmd_eval_rte(const EvalArgs& a) {
  const RteResult r = kitti_rte(read_trajectory(a.est), read_trajectory(a.gt));
  std::cout << std::fixed << std::setprecision(6) << "metric value\nrte_translation_percent "
            << r.translational_percent << "\nrte_rotation_deg_per_m " << r.rotational_deg_per_m
            << "\nsegments " << r.segments << '\n';
  return 0;
}

struct MmeArgs {
  std::string scans;
  std::string traj;
  std::vector<double> crop;
  double extent = 100.0;
  double voxel = 0.25;
  double radius = kMmeRadius;
  std::size_t min_neighbors = kMmeMinNeighbors;
};

int cmd_eval_mme(const MmeArgs& a) {
  const auto files = list_scan_files(a.scans);
  const Trajectory traj = read_trajectory(a.traj);
  if (files.size() != traj.size()) {
    throw Error("eval-mme: " + std::to_string(files.size()) + " scans but " + std::to_string(traj.size()) +
                " poses");
  }
  Eigen::Vector2d center;
  if (a.crop.size() == 2) {
    center = {a.crop[0], a.crop[1]};
  } else {
    center = traj[traj.size() / 2].pose.translation().head<2>();
  }
  std::vector<PointCloud> clouds;
  std::vector<Pose> poses;
  const double reach = 0.5 * a.extent * std::sqrt(2.0);
  for (std::size_t i = 0; i < files.size(); ++i) {
    // Frames far from the crop cannot contribute at the sensor ranges of interest.
    if ((traj[i].pose.translation().head<2>() - center).norm() > reach + 150.0) continue;
    clouds.push_back(read_cloud(files[i]));
    poses.push_back(traj[i].pose);
  }
  const PointCloud cloud = mme_preprocess(clouds, poses, center, a.extent, a.voxel);
  const MmeResult r = mme(cloud, a.radius, a.min_neighbors);
  std::cout << std::fixed << std::setprecision(6) << "mme " << r.mean_entropy << "\nevaluated_fraction "
            << r.evaluated_fraction << "\npoints " << cloud.size() << '\n';
  return 0;
}

struct SynthArgs {
  std::uint64_t seed = 42;
  double extent = 550.0;
  int buildings = 60;
  std::size_t max_frames = 0;
  std::vector<double> offset;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  SyntheticWorld world = generate_world(a.seed, a.extent, a.buildings);
  if (a.max_frames > 0 && world.trajectory.size() > a.max_frames) world.trajectory.resize(a.max_frames);
  const SensorModel sensor;
  std::vector<PointCloud> scans;
  scans.reserve(world.trajectory.size());
  for (const auto& e : world.trajectory) {
    scans.push_back(simulate_scan(world, e.pose, sensor, a.seed * 1000003ULL + e.index));
  }
  if (a.offset.size() == 2) world = shifted_world(world, Vec3(a.offset[0], a.offset[1], 0.0));

  const fs::path out(a.out);
  const bool existed = fs::exists(out);
  OutputGuard guard;
  if (!existed) guard.add(out);
  fs::create_directories(out / "scans");
  {
    std::ofstream f(out / "footprints.json", std::ios::trunc);
    f << footprints_to_json({world.crs, world.footprints}) << '\n';
    if (!f) throw Error("cannot write " + (out / "footprints.json").string());
  }
  {
    std::ofstream f(out / "ground.asc", std::ios::trunc);
    write_ascii_grid(f, world.ground_grid);
    if (!f) throw Error("cannot write " + (out / "ground.asc").string());
  }
  write_trajectory(out / "gt.txt", world.trajectory);
  for (std::size_t i = 0; i < scans.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.bin", i);
    write_cloud(out / "scans" / name, scans[i], CloudFormat::kBinXyz);
  }
  const Pose& p0 = world.trajectory.front().pose;
  const double yaw = std::atan2(p0.rotation_matrix()(1, 0), p0.rotation_matrix()(0, 0));
  {
    std::ofstream f(out / "init.txt", std::ios::trunc);
    f << std::setprecision(17) << p0.translation().x() << ' ' << p0.translation().y() << ' '
      << p0.translation().z() << ' ' << yaw << '\n';
  }
  guard.commit();
  std::cout << "frames " << scans.size() << "\nbuildings " << world.footprints.size() << "\ninit "
            << std::setprecision(12) << p0.translation().x() << ' ' << p0.translation().y() << ' '
            << p0.translation().z() << ' ' << yaw << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Georeferenced LiDAR mapping against sparse prior maps"};
  app.require_subcommand(1);

  BuildRefmapArgs br;
  auto* build = app.add_subcommand("build-refmap", "Build a sparse reference map from footprints and grids");
  build->add_option("--footprints", br.footprints, "Footprint JSON file(s)");
  build->add_option("--grid", br.grids, "ESRI ASCII elevation grid(s)");
  build->add_option("--grid-crs", br.grid_crs, "CRS identifier of the grid files");
  build->add_option("--out", br.out, "Output map (bin_xyz, with .json sidecar)")->required();

  MapArgs ma;
  auto* map = app.add_subcommand("map", "Run the mapping pipeline over a scan directory");
  map->add_option("--refmap", ma.refmap, "Reference map written by build-refmap")->required();
  map->add_option("--scans", ma.scans, "Directory of scan files, processed in name order")->required();
  map->add_option("--init", ma.init, "Initial georeferenced pose \"x y z yaw\" (yaw in radians)");
  map->add_option("--init-pose", ma.init_pose, "Initial pose \"x y z qx qy qz qw\"");
  map->add_option("--config", ma.config, "Pipeline config file (key = value)");
  map->add_option("--out-traj", ma.out_traj, "Output trajectory")->required();
  map->add_option("--out-map", ma.out_map, "Output point cloud map (bin_xyz, local frame + sidecar)");
  map->add_option("--yaw-correction", ma.yaw_correction, "Rotate every scan about sensor z by DEG degrees");

  EvalArgs ea;
  auto* eval_ate = app.add_subcommand("eval-ate", "Absolute trajectory error");
  eval_ate->add_option("--est", ea.est)->required();
  eval_ate->add_option("--gt", ea.gt)->required();
  eval_ate->add_option("--mode", ea.mode, "first_frame | umeyama | none");

  EvalArgs er;
  auto* eval_rte = app.add_subcommand("eval-rte", "KITTI relative trajectory error over 100-800 m");
  eval_rte->add_option("--est", er.est)->required();
  eval_rte->add_option("--gt", er.gt)->required();

  MmeArgs me;
  auto* eval_mme = app.add_subcommand("eval-mme", "Mean map entropy of scans placed along a trajectory");
  eval_mme->add_option("--scans", me.scans)->required();
  eval_mme->add_option("--traj", me.traj)->required();
  eval_mme->add_option("--crop", me.crop, "Crop center cx cy")->expected(2);
  eval_mme->add_option("--extent", me.extent, "Crop square side (m)");
  eval_mme->add_option("--voxel", me.voxel, "Per-frame downsampling voxel (m)");
  eval_mme->add_option("--radius", me.radius, "Neighborhood radius (m)");
  eval_mme->add_option("--min-neighbors", me.min_neighbors, "Minimum neighborhood size");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic world with simulated scans");
  synth->add_option("--seed", sa.seed);
  synth->add_option("--extent", sa.extent, "World side length (m)");
  synth->add_option("--buildings", sa.buildings);
  synth->add_option("--max-frames", sa.max_frames, "Truncate the trajectory");
  synth->add_option("--offset", sa.offset, "Global offset x y applied to world files")->expected(2);
  synth->add_option("--out", sa.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*build) return cmd_build_refmap(br);
    if (*map) return cmd_map(ma);
    if (*eval_ate) return cmd_eval_ate(ea);
    if (*eval_rte) return cmd_eval_rte(er);
    if (*eval_mme) return cmd_eval_mme(me);
    if (*synth) return cmd_synth(sa);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "error: " << msg << '\n';
    return 1;
  }
  return 1;
}
