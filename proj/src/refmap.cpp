#include "georef/refmap.hpp"

#include "georef/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace georef {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross2(b - a, c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(q1, p1, p2)) return true;
  if (o2 == 0 && on_segment(q2, p1, p2)) return true;
  if (o3 == 0 && on_segment(p1, q1, q2)) return true;
  if (o4 == 0 && on_segment(p2, q1, q2)) return true;
  return false;
}

int lattice_steps(double length, double edge) {
  return std::max(1, static_cast<int>(std::ceil(length / edge - 1e-9)));
}

}  // namespace

bool ElevationGrid::is_nodata(double v) const { return !std::isfinite(v) || v == nodata; }

std::optional<double> ElevationGrid::sample(double x, double y) const {
  const double fc = std::floor((x - x0) / cell_size);
  const double fr = std::floor((y - y0) / cell_size);
  if (fc < 0.0 || fr < 0.0 || fc >= static_cast<double>(ncols) || fr >= static_cast<double>(nrows)) {
    return std::nullopt;
  }
  const double v = at(static_cast<std::size_t>(fr), static_cast<std::size_t>(fc));
  if (is_nodata(v)) return std::nullopt;
  return v;
}

void validate_footprint(const BuildingFootprint& fp) {
  const auto& v = fp.vertices;
  const std::size_t n = v.size();
  if (n < 3) throw Error("footprint has fewer than 3 vertices");
  for (std::size_t i = 0; i < n; ++i) {
    if (!v[i].allFinite()) throw Error("footprint has a non-finite vertex");
    if ((v[(i + 1) % n] - v[i]).norm() == 0.0) throw Error("footprint has a zero-length edge");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a1 = v[i];
    const Vec2& a2 = v[(i + 1) % n];
    // Adjacent edge folding back onto this one.
    const Vec2& a3 = v[(i + 2) % n];
    if (cross2(a2 - a1, a3 - a2) == 0.0 && (a2 - a1).dot(a3 - a2) < 0.0) {
      throw Error("footprint is self-intersecting (edge " + std::to_string(i) + " folds back)");
    }
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_intersect(a1, a2, v[j], v[(j + 1) % n])) {
        throw Error("footprint is self-intersecting (edges " + std::to_string(i) + " and " +
                    std::to_string(j) + ")");
      }
    }
  }
}

double estimate_height(const BuildingFootprint& fp) {
  if (fp.height) {
    if (!(*fp.height > 0.0)) throw Error("footprint has non-positive height");
    return *fp.height;
  }
  if (fp.floors) {
    if (*fp.floors <= 0) throw Error("footprint has non-positive floor count");
    return kMetersPerFloor * *fp.floors;
  }
  return kDefaultBuildingHeight;
}

Vec2 footprint_centroid(const BuildingFootprint& fp) {
  const auto& v = fp.vertices;
  const std::size_t n = v.size();
  double area2 = 0.0;
  Vec2 acc = Vec2::Zero();
  // Shift by the first vertex to keep the shoelace sums well conditioned.
  const Vec2 o = v.front();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = v[i] - o;
    const Vec2 b = v[(i + 1) % n] - o;
    const double c = cross2(a, b);
    area2 += c;
    acc += (a + b) * c;
  }
  if (std::abs(area2) < 1e-12) {
    Vec2 mean = Vec2::Zero();
    for (const auto& p : v) mean += p;
    return mean / static_cast<double>(n);
  }
  return o + acc / (3.0 * area2);
}

PointCloud tessellate_building(const BuildingFootprint& fp, double height, double base_z,
                               double edge) {
  if (!(height > 0.0)) throw Error("tessellate_building: height must be positive");
  if (!(edge > 0.0)) throw Error("tessellate_building: edge length must be positive");
  validate_footprint(fp);

  const auto& v = fp.vertices;
  const std::size_t n = v.size();
  const int rows = lattice_steps(height, edge);
  PointCloud out;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % n];
    const int cols = lattice_steps((b - a).norm(), edge);
    // The end vertex is emitted as the start of the next edge.
    for (int k = 0; k < cols; ++k) {
      const double s = static_cast<double>(k) / cols;
      const Vec2 p = a + (b - a) * s;
      for (int l = 0; l <= rows; ++l) {
        out.emplace_back(p.x(), p.y(), base_z + height * static_cast<double>(l) / rows);
      }
    }
  }
  return out;
}

PointCloud grid_to_points(const ElevationGrid& grid) {
  if (grid.values.size() != grid.nrows * grid.ncols) {
    throw Error("elevation grid value count does not match nrows x ncols");
  }
  PointCloud out;
  for (std::size_t i = 0; i < grid.nrows; ++i) {
    for (std::size_t j = 0; j < grid.ncols; ++j) {
      const double z = grid.at(i, j);
      if (grid.is_nodata(z)) continue;
      out.emplace_back(grid.x0 + (static_cast<double>(j) + 0.5) * grid.cell_size,
                       grid.y0 + (static_cast<double>(i) + 0.5) * grid.cell_size, z);
    }
  }
  return out;
}

GroundLookup make_ground_lookup(std::vector<ElevationGrid> grids) {
  return [grids = std::move(grids)](double x, double y) -> std::optional<double> {
    for (const auto& g : grids) {
      if (auto z = g.sample(x, y)) return z;
    }
    return std::nullopt;
  };
}

ReferenceMap build_reference_map(const std::vector<FootprintSet>& footprints,
                                 const std::vector<ElevationGrid>& grids,
                                 const GroundLookup& ground_lookup) {
  std::set<std::string> crs_ids;
  for (const auto& set : footprints) {
    if (!set.crs.empty()) crs_ids.insert(set.crs);
  }
  for (const auto& g : grids) {
    if (!g.crs.empty()) crs_ids.insert(g.crs);
  }
  if (crs_ids.size() > 1) {
    std::string list;
    for (const auto& id : crs_ids) list += (list.empty() ? "" : ", ") + id;
    throw Error("inputs use mixed coordinate reference systems: " + list);
  }

  PointCloud global;
  for (const auto& set : footprints) {
    for (std::size_t i = 0; i < set.buildings.size(); ++i) {
      const auto& fp = set.buildings[i];
      try {
        const double h = estimate_height(fp);
        double base = 0.0;
        if (ground_lookup) {
          const Vec2 c = footprint_centroid(fp);
          if (auto z = ground_lookup(c.x(), c.y())) base = *z;
        }
        const PointCloud walls = tessellate_building(fp, h, base);
        global.insert(global.end(), walls.begin(), walls.end());
      } catch (const Error& e) {
        throw Error("footprint " + std::to_string(i) + ": " + e.what());
      }
    }
  }
  for (const auto& g : grids) {
    const PointCloud pts = grid_to_points(g);
    global.insert(global.end(), pts.begin(), pts.end());
  }
  if (global.empty()) throw Error("reference map inputs produced no points");

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : global) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }

  ReferenceMap map;
  map.crs_id = crs_ids.empty() ? std::string() : *crs_ids.begin();
  map.origin_offset = 0.5 * (lo + hi);
  map.points.reserve(global.size());
  for (const auto& p : global) {
    const Vec3 local = p - map.origin_offset;
    if (local.cwiseAbs().maxCoeff() >= 1e6) throw Error("reference map extent exceeds 1e6 m");
    map.points.push_back(local);
  }
  return map;
}

}  // namespace georef
