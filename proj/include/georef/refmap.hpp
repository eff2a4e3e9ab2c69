#pragma once

// Sparse georeferenced reference map from building footprints and elevation
// rasters. All inputs must share one projected CRS in meters; no reprojection
// is done here.

#include "georef/geom.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace georef {

using Vec2 = Eigen::Vector2d;

inline constexpr double kMetersPerFloor = 4.0;
inline constexpr double kDefaultBuildingHeight = 8.0;
inline constexpr double kTessellationEdge = 0.5;

struct BuildingFootprint {
  /// Open ring: the closing edge from back() to front() is implicit.
  std::vector<Vec2> vertices;
  std::optional<double> height;
  std::optional<int> floors;
};

struct FootprintSet {
  std::string crs;
  std::vector<BuildingFootprint> buildings;
};

/// Raster with row 0 the southernmost row; values are row-major.
struct ElevationGrid {
  double x0 = 0.0;  // lower-left corner
  double y0 = 0.0;
  double cell_size = 1.0;
  std::size_t nrows = 0;
  std::size_t ncols = 0;
  std::vector<double> values;
  double nodata = -9999.0;
  std::string crs;  // empty when unknown

  double at(std::size_t row, std::size_t col) const { return values[row * ncols + col]; }
  bool is_nodata(double v) const;
  /// Value of the cell containing (x, y), if inside the grid and not nodata.
  std::optional<double> sample(double x, double y) const;
};

struct ReferenceMap {
  /// Local coordinates; global = local + origin_offset.
  PointCloud points;
  std::string crs_id;
  Vec3 origin_offset = Vec3::Zero();
};

using GroundLookup = std::function<std::optional<double>(double x, double y)>;

/// Throws georef::Error on fewer than 3 vertices, zero-length edges or self-intersection.
void validate_footprint(const BuildingFootprint& fp);

/// Explicit height, else floors * 4 m, else 8 m.
double estimate_height(const BuildingFootprint& fp);

/// Area centroid of the footprint ring (vertex mean for degenerate rings).
Vec2 footprint_centroid(const BuildingFootprint& fp);

/// Samples the extruded walls (no roof, no floor) on a lattice with spacing <= edge
/// along each polygon edge and vertically from base_z to base_z + height.
PointCloud tessellate_building(const BuildingFootprint& fp, double height, double base_z,
                               double edge = kTessellationEdge);

/// One point per valid cell at the cell center.
PointCloud grid_to_points(const ElevationGrid& grid);

/// First grid (in order) whose cell under (x, y) holds data.
GroundLookup make_ground_lookup(std::vector<ElevationGrid> grids);

ReferenceMap build_reference_map(const std::vector<FootprintSet>& footprints,
                                 const std::vector<ElevationGrid>& grids,
                                 const GroundLookup& ground_lookup = {});

}  // namespace georef
