#include "georef/synth.hpp"

#include "georef/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace georef {

namespace {

constexpr double kPi = std::numbers::pi;

/// Rounded-rectangle street loop around the world center, parameterized by arc length.
class LoopPath {
 public:
  LoopPath(double hx, double hy, double r) {
    const double lx = 2.0 * (hx - r);
    const double ly = 2.0 * (hy - r);
    const double arc = 0.5 * kPi * r;
    Vec2 p(-hx + r, -hy);
    double heading = 0.0;
    const double straight[4] = {lx, ly, lx, ly};
    for (int side = 0; side < 4; ++side) {
      add({p, heading, straight[side], 0.0});
      p = point_on(segments_.back(), straight[side]);
      add({p, heading, arc, 1.0 / r});
      p = point_on(segments_.back(), arc);
      heading += 0.5 * kPi;
    }
  }

  double length() const { return length_; }

  Vec2 point(double s) const {
    const auto [seg, u] = locate(s);
    return point_on(seg, u);
  }

  double heading(double s) const {
    const auto [seg, u] = locate(s);
    return seg.heading0 + seg.curvature * u;
  }

 private:
  struct Segment {
    Vec2 start;
    double heading0;
    double length;
    double curvature;
    double s0 = 0.0;
  };

  void add(Segment seg) {
    seg.s0 = length_;
    length_ += seg.length;
    segments_.push_back(seg);
  }

  static Vec2 point_on(const Segment& seg, double u) {
    if (seg.curvature == 0.0) {
      return seg.start + u * Vec2(std::cos(seg.heading0), std::sin(seg.heading0));
    }
    const double h = seg.heading0 + seg.curvature * u;
    return seg.start + Vec2(std::sin(h) - std::sin(seg.heading0),
                            std::cos(seg.heading0) - std::cos(h)) / seg.curvature;
  }

  std::pair<Segment, double> locate(double s) const {
    s = std::fmod(s, length_);
    if (s < 0.0) s += length_;
    for (const auto& seg : segments_) {
      if (s < seg.s0 + seg.length) return {seg, s - seg.s0};
    }
    return {segments_.back(), segments_.back().length};
  }

  std::vector<Segment> segments_;
  double length_ = 0.0;
};

double rect_distance(const BuildingBox& b, const Vec2& p) {
  const double dx = std::max({b.xmin - p.x(), 0.0, p.x() - b.xmax});
  const double dy = std::max({b.ymin - p.y(), 0.0, p.y() - b.ymax});
  return std::hypot(dx, dy);
}

bool overlaps(const BuildingBox& a, const BuildingBox& b, double gap) {
  return a.xmin - gap < b.xmax && b.xmin - gap < a.xmax && a.ymin - gap < b.ymax &&
         b.ymin - gap < a.ymax;
}

}  // namespace

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

void SensorModel::validate() const {
  if (channels < 1) throw Error("sensor: channels must be >= 1");
  if (azimuth_steps < 1) throw Error("sensor: azimuth_steps must be >= 1");
  if (!(max_range > 0.0)) throw Error("sensor: max_range must be positive");
  if (!(range_noise_sigma >= 0.0)) throw Error("sensor: range noise must be non-negative");
  if (!(vfov_max_deg >= vfov_min_deg)) throw Error("sensor: vertical field of view is inverted");
}

SyntheticWorld generate_world(std::uint64_t seed, double extent, int building_count,
                              const WorldOptions& options) {
  if (!(extent > 50.0)) throw Error("generate_world: extent must exceed 50 m");
  if (building_count < 0) throw Error("generate_world: negative building count");
  Rng rng(seed);

  SyntheticWorld world;
  world.seed = seed;
  world.extent = extent;
  const double half = 0.5 * extent;

  if (options.sloped_ground) {
    world.ground = {rng.uniform(0.0, 50.0), rng.uniform(-0.004, 0.004), rng.uniform(-0.004, 0.004)};
  } else {
    world.ground = {rng.uniform(0.0, 50.0), 0.0, 0.0};
  }

  const double hx = extent * rng.uniform(0.28, 0.32);
  const double hy = extent * rng.uniform(0.18, 0.22);
  const double corner = extent * 0.1;
  const LoopPath path(hx, hy, corner);

  std::vector<Vec2> samples;
  for (double s = 0.0; s < path.length(); s += 0.25) samples.push_back(path.point(s));
  const auto clearance_ok = [&](const BuildingBox& b) {
    for (const auto& p : samples) {
      if (rect_distance(b, p) < options.street_clearance) return false;
    }
    return true;
  };

  for (int b = 0; b < building_count; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < options.max_attempts_per_building && !placed; ++attempt) {
      const double w = rng.uniform(8.0, 30.0);
      const double d = rng.uniform(8.0, 30.0);
      Vec2 c;
      if (rng.uniform() < 0.85) {
        const double s = rng.uniform(0.0, path.length());
        const double h = path.heading(s);
        const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const Vec2 n = side * Vec2(-std::sin(h), std::cos(h));
        const double lateral = options.street_clearance + rng.uniform(0.5, 10.0);
        const double reach = std::abs(n.x()) * 0.5 * w + std::abs(n.y()) * 0.5 * d;
        c = path.point(s) + n * (lateral + reach);
      } else {
        c = Vec2(rng.uniform(-half, half), rng.uniform(-half, half));
      }
      BuildingBox box{c.x() - 0.5 * w, c.x() + 0.5 * w, c.y() - 0.5 * d, c.y() + 0.5 * d, 0.0, 0.0};
      if (box.xmin < -half + 1.0 || box.xmax > half - 1.0 || box.ymin < -half + 1.0 ||
          box.ymax > half - 1.0) {
        continue;
      }
      if (std::any_of(world.boxes.begin(), world.boxes.end(),
                      [&](const BuildingBox& o) { return overlaps(o, box, 3.0); })) {
        continue;
      }
      if (!clearance_ok(box)) continue;

      BuildingFootprint fp;
      fp.vertices = {{box.xmin, box.ymin}, {box.xmax, box.ymin}, {box.xmax, box.ymax}, {box.xmin, box.ymax}};
      double height = rng.uniform(4.0, 20.0);
      const double tag = rng.uniform();
      if (tag < 0.5) {
        fp.height = height;
      } else if (tag < 0.8) {
        const int floors = std::clamp(static_cast<int>(std::lround(height / kMetersPerFloor)), 1, 5);
        fp.floors = floors;
        height = kMetersPerFloor * floors;
      }
      const double base = world.ground.height(c.x(), c.y());
      double lowest = base;
      for (const auto& v : fp.vertices) lowest = std::min(lowest, world.ground.height(v.x(), v.y()));
      box.zmin = lowest - 2.0;
      box.zmax = base + height;
      world.boxes.push_back(box);
      world.footprints.push_back(std::move(fp));
      placed = true;
    }
    if (!placed) {
      throw Error("generate_world: could not place building " + std::to_string(b) + " of " +
                  std::to_string(building_count));
    }
  }

  const auto add_clutter = [&](double s, double lateral, double along, double across, double height) {
    const double h = path.heading(s);
    const Vec2 n(-std::sin(h), std::cos(h));
    const Vec2 c = path.point(s) + lateral * n;
    // Footprints are axis-aligned, so extents swap on north-south streets.
    const bool ew = std::abs(std::cos(h)) >= std::abs(std::sin(h));
    const double hx2 = 0.5 * (ew ? along : across);
    const double hy2 = 0.5 * (ew ? across : along);
    const double z = world.ground.height(c.x(), c.y());
    world.clutter.push_back({c.x() - hx2, c.x() + hx2, c.y() - hy2, c.y() + hy2, z - 1.0, z + height});
  };
  for (const double side : {-1.0, 1.0}) {
    if (options.pole_spacing > 0.0) {
      for (double s = rng.uniform(0.0, options.pole_spacing); s < path.length();
           s += options.pole_spacing * rng.uniform(0.5, 1.5)) {
        add_clutter(s, side * rng.uniform(3.5, 5.0), 0.4, 0.4, rng.uniform(4.0, 8.0));
      }
    }
    if (options.car_spacing > 0.0) {
      for (double s = rng.uniform(0.0, options.car_spacing); s < path.length();
           s += options.car_spacing * rng.uniform(0.5, 1.5)) {
        const double h = path.heading(s);
        if (std::abs(std::sin(2.0 * h)) > 0.05) continue;  // cars only on straights
        add_clutter(s, side * rng.uniform(3.2, 4.0), 4.5, 1.9, 1.5);
      }
    }
  }

  ElevationGrid& g = world.ground_grid;
  g.cell_size = 1.0;
  g.ncols = g.nrows = static_cast<std::size_t>(std::ceil(extent));
  g.x0 = g.y0 = -0.5 * static_cast<double>(g.ncols);
  g.crs = world.crs;
  g.values.resize(g.nrows * g.ncols);
  for (std::size_t i = 0; i < g.nrows; ++i) {
    for (std::size_t j = 0; j < g.ncols; ++j) {
      g.values[i * g.ncols + j] = world.ground.height(g.x0 + (static_cast<double>(j) + 0.5),
                                                      g.y0 + (static_cast<double>(i) + 0.5));
    }
  }

  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double start = hx - corner;  // middle of the first straight
  double s = 0.0;
  for (std::size_t k = 0; s < path.length(); ++k) {
    const Vec2 p = path.point(start + s);
    const double yaw = path.heading(start + s);
    const double z = world.ground.height(p.x(), p.y()) + options.sensor_height;
    world.trajectory.push_back({k, Pose::FromXYZYaw(p.x(), p.y(), z, yaw)});
    const double ramp = options.acceleration_frames > 0
                            ? std::min(1.0, static_cast<double>(k) / options.acceleration_frames)
                            : 1.0;
    s += ramp * options.frame_spacing *
         (1.0 + 0.2 * std::sin(2.0 * kPi * static_cast<double>(k) / 60.0 + phase));
  }
  return world;
}

std::optional<double> cast_ray(const SyntheticWorld& world, const Vec3& o, const Vec3& dir,
                               double max_range) {
  double best = std::numeric_limits<double>::infinity();
  const GroundPlane& gp = world.ground;
  const double denom = dir.z() - gp.slope_x * dir.x() - gp.slope_y * dir.y();
  if (denom < -1e-12) {
    const double t = (gp.height(o.x(), o.y()) - o.z()) / denom;
    if (t > 0.0) {
      const double half = 0.5 * world.extent;
      const Vec3 hit = o + t * dir;
      if (std::abs(hit.x() - world.center.x()) <= half && std::abs(hit.y() - world.center.y()) <= half) {
        best = t;
      }
    }
  }
  const auto slab = [&](const BuildingBox& b) {
    double t0 = 0.0;
    double t1 = best;
    const double lo[3] = {b.xmin, b.ymin, b.zmin};
    const double hi[3] = {b.xmax, b.ymax, b.zmax};
    bool hit = true;
    for (int a = 0; a < 3 && hit; ++a) {
      if (std::abs(dir[a]) < 1e-15) {
        if (o[a] < lo[a] || o[a] > hi[a]) hit = false;
        continue;
      }
      double ta = (lo[a] - o[a]) / dir[a];
      double tb = (hi[a] - o[a]) / dir[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) hit = false;
    }
    if (hit && t0 > 0.0 && t0 < best) best = t0;
  };
  for (const auto& b : world.boxes) slab(b);
  for (const auto& b : world.clutter) slab(b);
  if (best <= max_range) return best;
  return std::nullopt;
}

PointCloud simulate_scan(const SyntheticWorld& world, const Pose& pose, const SensorModel& sensor,
                         std::uint64_t seed) {
  sensor.validate();
  SyntheticWorld local = world;
  local.boxes.clear();
  local.clutter.clear();
  local.footprints.clear();
  const Vec2 o2 = pose.translation().head<2>();
  for (const auto& b : world.boxes) {
    if (rect_distance(b, o2) <= sensor.max_range) local.boxes.push_back(b);
  }
  for (const auto& b : world.clutter) {
    if (rect_distance(b, o2) <= sensor.max_range) local.clutter.push_back(b);
  }

  Rng rng(seed);
  const Mat3 rot = pose.rotation_matrix();
  const Vec3& origin = pose.translation();
  // Spinning sensors are not phase-locked to frame boundaries.
  const double phase = rng.uniform();
  PointCloud cloud;
  cloud.reserve(static_cast<std::size_t>(sensor.channels) * sensor.azimuth_steps / 2);
  for (int c = 0; c < sensor.channels; ++c) {
    const double el_deg = sensor.channels == 1
                              ? sensor.vfov_min_deg
                              : sensor.vfov_min_deg + (sensor.vfov_max_deg - sensor.vfov_min_deg) * c /
                                                          (sensor.channels - 1);
    const double el = el_deg * kPi / 180.0;
    for (int k = 0; k < sensor.azimuth_steps; ++k) {
      const double az = 2.0 * kPi * (k + phase) / sensor.azimuth_steps;
      const Vec3 d_sensor(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      const auto t = cast_ray(local, origin, rot * d_sensor, sensor.max_range);
      if (!t) continue;
      const double range = *t + sensor.range_noise_sigma * rng.normal();
      if (range <= 0.0) continue;
      cloud.push_back(d_sensor * range);
    }
  }
  return cloud;
}

double trajectory_clearance(const SyntheticWorld& world) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : world.trajectory) {
    const Vec2 p = e.pose.translation().head<2>();
    for (const auto& b : world.boxes) best = std::min(best, rect_distance(b, p));
  }
  return best;
}

SyntheticWorld shifted_world(const SyntheticWorld& world, const Vec3& offset) {
  SyntheticWorld out = world;
  out.center += offset.head<2>();
  for (auto& fp : out.footprints) {
    for (auto& v : fp.vertices) v += offset.head<2>();
  }
  for (auto* boxes : {&out.boxes, &out.clutter}) {
    for (auto& b : *boxes) {
      b.xmin += offset.x();
      b.xmax += offset.x();
      b.ymin += offset.y();
      b.ymax += offset.y();
      b.zmin += offset.z();
      b.zmax += offset.z();
    }
  }
  out.ground.z0 += offset.z() - out.ground.slope_x * offset.x() - out.ground.slope_y * offset.y();
  out.ground_grid.x0 += offset.x();
  out.ground_grid.y0 += offset.y();
  for (auto& v : out.ground_grid.values) v += offset.z();
  for (auto& e : out.trajectory) e.pose = Pose::FromTranslation(offset) * e.pose;
  return out;
}

ReferenceMap build_world_reference_map(const SyntheticWorld& world) {
  return build_reference_map({FootprintSet{world.crs, world.footprints}}, {world.ground_grid},
                             make_ground_lookup({world.ground_grid}));
}

}  // namespace georef
