#pragma once

// File formats.
//
//   bin_xyz     little-endian float32 records (x, y, z, intensity); intensity
//               is ignored on read and written as 0 (KITTI velodyne layout).
//   ascii_xyz   one "x y z" per line, '#' comments.
//   trajectory  "# georef-trajectory v1" header, then one line per frame:
//               "index tx ty tz qx qy qz qw" (scalar-last quaternion).
//   footprints  JSON {"version": 1, "crs": "...", "footprints": [
//                 {"vertices": [[x, y], ...], "height": h?, "floors": n?}, ...]}
//   grid        ESRI ASCII grid, northernmost row first.
//   sidecar     JSON next to a point file: {"version": 1, "crs": "...",
//                 "origin_offset": [x, y, z]}.

#include "georef/evalmetrics.hpp"
#include "georef/geom.hpp"
#include "georef/refmap.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace georef {

enum class CloudFormat { kBinXyz, kAsciiXyz };

/// kAsciiXyz for ".txt"/".xyz", kBinXyz otherwise.
CloudFormat cloud_format_for(const std::filesystem::path& path);

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud, CloudFormat format);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);

/// Decodes bin_xyz bytes; throws georef::Error naming the byte offset of a truncated record.
PointCloud decode_bin_xyz(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_bin_xyz(const PointCloud& cloud);

/// Appends bin_xyz records to an open binary stream.
void append_bin_xyz(std::ostream& out, const PointCloud& cloud);

Trajectory parse_trajectory(std::istream& in);
Trajectory read_trajectory(const std::filesystem::path& path);
void write_trajectory(std::ostream& out, const Trajectory& t);
void write_trajectory(const std::filesystem::path& path, const Trajectory& t);

FootprintSet parse_footprints(const std::string& json_text);
FootprintSet read_footprints(const std::filesystem::path& path);
std::string footprints_to_json(const FootprintSet& set);

ElevationGrid parse_ascii_grid(std::istream& in);
ElevationGrid read_ascii_grid(const std::filesystem::path& path);
void write_ascii_grid(std::ostream& out, const ElevationGrid& grid);

struct MapMetadata {
  std::string crs;
  Vec3 origin_offset = Vec3::Zero();
};

std::filesystem::path sidecar_path(const std::filesystem::path& cloud_path);
void write_sidecar(const std::filesystem::path& cloud_path, const MapMetadata& meta);
MapMetadata read_sidecar(const std::filesystem::path& cloud_path);

/// Reference map points (local frame) plus sidecar metadata.
void write_reference_map(const std::filesystem::path& path, const ReferenceMap& map);
ReferenceMap read_reference_map(const std::filesystem::path& path);

/// Scan files in a directory sorted by file name (.bin, .txt, .xyz).
std::vector<std::filesystem::path> list_scan_files(const std::filesystem::path& dir);

/// Rotates a sensor-frame cloud about its z axis by deg degrees.
PointCloud apply_yaw_correction(const PointCloud& cloud, double deg);

}  // namespace georef
