#include "georef/io.hpp"

#include "georef/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace georef {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
  }
  return v;
}

float read_f32(const unsigned char* p) {
  std::uint32_t u;
  std::memcpy(&u, p, 4);
  return std::bit_cast<float>(to_little(u));
}

void write_f32(unsigned char* p, float f) {
  const std::uint32_t u = to_little(std::bit_cast<std::uint32_t>(f));
  std::memcpy(p, &u, 4);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

CloudFormat cloud_format_for(const fs::path& path) {
  const std::string ext = lower(path.extension().string());
  return (ext == ".txt" || ext == ".xyz") ? CloudFormat::kAsciiXyz : CloudFormat::kBinXyz;
}

PointCloud decode_bin_xyz(std::span<const unsigned char> bytes) {
  constexpr std::size_t kRecord = 16;
  if (bytes.size() % kRecord != 0) {
    const std::size_t offset = (bytes.size() / kRecord) * kRecord;
    throw Error("truncated bin_xyz record at byte offset " + std::to_string(offset));
  }
  PointCloud cloud;
  cloud.reserve(bytes.size() / kRecord);
  for (std::size_t off = 0; off < bytes.size(); off += kRecord) {
    const unsigned char* p = bytes.data() + off;
    cloud.emplace_back(read_f32(p), read_f32(p + 4), read_f32(p + 8));
  }
  return cloud;
}

std::vector<unsigned char> encode_bin_xyz(const PointCloud& cloud) {
  std::vector<unsigned char> bytes(cloud.size() * 16);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    unsigned char* p = bytes.data() + 16 * i;
    write_f32(p, static_cast<float>(cloud[i].x()));
    write_f32(p + 4, static_cast<float>(cloud[i].y()));
    write_f32(p + 8, static_cast<float>(cloud[i].z()));
    write_f32(p + 12, 0.0f);
  }
  return bytes;
}

void append_bin_xyz(std::ostream& out, const PointCloud& cloud) {
  const auto bytes = encode_bin_xyz(cloud);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

PointCloud read_cloud(const fs::path& path, CloudFormat format) {
  const std::string text = read_text(path);
  if (format == CloudFormat::kBinXyz) {
    try {
      return decode_bin_xyz({reinterpret_cast<const unsigned char*>(text.data()), text.size()});
    } catch (const Error& e) {
      throw Error(path.string() + ": " + e.what());
    }
  }
  PointCloud cloud;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double x;
    double y;
    double z;
    if (!(ls >> x >> y >> z)) {
      throw Error(path.string() + ": malformed point on line " + std::to_string(lineno));
    }
    cloud.emplace_back(x, y, z);
  }
  return cloud;
}

PointCloud read_cloud(const fs::path& path) { return read_cloud(path, cloud_format_for(path)); }

void write_cloud(const fs::path& path, const PointCloud& cloud, CloudFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path.string());
  if (format == CloudFormat::kBinXyz) {
    append_bin_xyz(out, cloud);
  } else {
    out << std::setprecision(9);
    for (const auto& p : cloud) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

void write_cloud(const fs::path& path, const PointCloud& cloud) {
  write_cloud(path, cloud, cloud_format_for(path));
}

Trajectory parse_trajectory(std::istream& in) {
  Trajectory t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long index;
    double tx, ty, tz, qx, qy, qz, qw;
    if (!(ls >> index >> tx >> ty >> tz >> qx >> qy >> qz >> qw) || index < 0) {
      throw Error("trajectory line " + std::to_string(lineno) + ": expected 'index tx ty tz qx qy qz qw'");
    }
    const Quat q(qw, qx, qy, qz);
    if (!(q.norm() > 0.0)) throw Error("trajectory line " + std::to_string(lineno) + ": zero quaternion");
    t.push_back({static_cast<std::size_t>(index), Pose(Vec3(tx, ty, tz), q)});
  }
  validate_trajectory(t);
  return t;
}

Trajectory read_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trajectory file: " + path.string());
  try {
    return parse_trajectory(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_trajectory(std::ostream& out, const Trajectory& t) {
  out << "# georef-trajectory v1\n# index tx ty tz qx qy qz qw\n" << std::setprecision(17);
  for (const auto& e : t) {
    const Vec3& p = e.pose.translation();
    const Quat& q = e.pose.rotation();
    out << e.index << ' ' << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << q.x() << ' ' << q.y()
        << ' ' << q.z() << ' ' << q.w() << '\n';
  }
}

void write_trajectory(const fs::path& path, const Trajectory& t) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path.string());
  write_trajectory(out, t);
  if (!out) throw Error("write failed: " + path.string());
}

FootprintSet parse_footprints(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("footprints: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error("footprints: top level must be an object");
  FootprintSet set;
  if (doc.contains("crs")) {
    if (!doc["crs"].is_string()) throw Error("footprints: 'crs' must be a string");
    set.crs = doc["crs"].get<std::string>();
  }
  if (!doc.contains("footprints") || !doc["footprints"].is_array()) {
    throw Error("footprints: missing 'footprints' array");
  }
  std::size_t i = 0;
  for (const auto& item : doc["footprints"]) {
    const std::string where = "footprints[" + std::to_string(i++) + "]";
    if (!item.is_object() || !item.contains("vertices") || !item["vertices"].is_array()) {
      throw Error(where + ": missing 'vertices' array");
    }
    BuildingFootprint fp;
    for (const auto& v : item["vertices"]) {
      if (!v.is_array() || v.size() < 2 || !v[0].is_number() || !v[1].is_number()) {
        throw Error(where + ": vertex must be [x, y]");
      }
      fp.vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
    }
    if (fp.vertices.size() > 1 && fp.vertices.front() == fp.vertices.back()) fp.vertices.pop_back();
    if (item.contains("height") && !item["height"].is_null()) {
      if (!item["height"].is_number()) throw Error(where + ": 'height' must be a number");
      fp.height = item["height"].get<double>();
    }
    if (item.contains("floors") && !item["floors"].is_null()) {
      if (!item["floors"].is_number_integer()) throw Error(where + ": 'floors' must be an integer");
      fp.floors = item["floors"].get<int>();
    }
    set.buildings.push_back(std::move(fp));
  }
  return set;
}

FootprintSet read_footprints(const fs::path& path) {
  try {
    return parse_footprints(read_text(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string footprints_to_json(const FootprintSet& set) {
  json doc;
  doc["version"] = 1;
  doc["crs"] = set.crs;
  doc["footprints"] = json::array();
  for (const auto& fp : set.buildings) {
    json item;
    item["vertices"] = json::array();
    for (const auto& v : fp.vertices) item["vertices"].push_back({v.x(), v.y()});
    if (fp.height) item["height"] = *fp.height;
    if (fp.floors) item["floors"] = *fp.floors;
    doc["footprints"].push_back(std::move(item));
  }
  return doc.dump(1);
}

ElevationGrid parse_ascii_grid(std::istream& in) {
  ElevationGrid g;
  bool have_cols = false, have_rows = false, have_x = false, have_y = false, have_cell = false;
  bool x_center = false, y_center = false;
  std::string key;
  // Header lines are "key value"; the first numeric token starts the data block.
  while (in >> std::ws && in.peek() != EOF) {
    const int c = in.peek();
    if (std::isdigit(c) || c == '-' || c == '+' || c == '.') break;
    in >> key;
    key = lower(key);
    double v;
    if (!(in >> v)) throw Error("ascii grid: missing value for header '" + key + "'");
    if (key == "ncols") { g.ncols = static_cast<std::size_t>(v); have_cols = v > 0; }
    else if (key == "nrows") { g.nrows = static_cast<std::size_t>(v); have_rows = v > 0; }
    else if (key == "xllcorner") { g.x0 = v; have_x = true; }
    else if (key == "yllcorner") { g.y0 = v; have_y = true; }
    else if (key == "xllcenter") { g.x0 = v; have_x = true; x_center = true; }
    else if (key == "yllcenter") { g.y0 = v; have_y = true; y_center = true; }
    else if (key == "cellsize") { g.cell_size = v; have_cell = true; }
    else if (key == "nodata_value") { g.nodata = v; }
    else throw Error("ascii grid: unknown header '" + key + "'");
  }
  if (!(have_cols && have_rows && have_x && have_y && have_cell)) {
    throw Error("ascii grid: incomplete header (need ncols, nrows, xllcorner, yllcorner, cellsize)");
  }
  if (!(g.cell_size > 0.0)) throw Error("ascii grid: cellsize must be positive");
  if (x_center) g.x0 -= 0.5 * g.cell_size;
  if (y_center) g.y0 -= 0.5 * g.cell_size;
  g.values.assign(g.nrows * g.ncols, g.nodata);
  for (std::size_t file_row = 0; file_row < g.nrows; ++file_row) {
    const std::size_t row = g.nrows - 1 - file_row;
    for (std::size_t col = 0; col < g.ncols; ++col) {
      double v;
      if (!(in >> v)) {
        throw Error("ascii grid: expected " + std::to_string(g.nrows * g.ncols) + " values, got " +
                    std::to_string(file_row * g.ncols + col));
      }
      g.values[row * g.ncols + col] = v;
    }
  }
  double extra;
  if (in >> extra) throw Error("ascii grid: more values than nrows x ncols");
  return g;
}

ElevationGrid read_ascii_grid(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open grid file: " + path.string());
  try {
    return parse_ascii_grid(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_ascii_grid(std::ostream& out, const ElevationGrid& g) {
  out << std::setprecision(17) << "ncols " << g.ncols << "\nnrows " << g.nrows << "\nxllcorner "
      << g.x0 << "\nyllcorner " << g.y0 << "\ncellsize " << g.cell_size << "\nNODATA_value "
      << g.nodata << "\n" << std::setprecision(10);
  for (std::size_t file_row = 0; file_row < g.nrows; ++file_row) {
    const std::size_t row = g.nrows - 1 - file_row;
    for (std::size_t col = 0; col < g.ncols; ++col) {
      out << (col ? " " : "") << g.at(row, col);
    }
    out << '\n';
  }
}

fs::path sidecar_path(const fs::path& cloud_path) {
  fs::path p = cloud_path;
  p += ".json";
  return p;
}

void write_sidecar(const fs::path& cloud_path, const MapMetadata& meta) {
  json doc;
  doc["version"] = 1;
  doc["crs"] = meta.crs;
  doc["origin_offset"] = {meta.origin_offset.x(), meta.origin_offset.y(), meta.origin_offset.z()};
  std::ofstream out(sidecar_path(cloud_path), std::ios::trunc);
  if (!out) throw Error("cannot write file: " + sidecar_path(cloud_path).string());
  out << std::setprecision(17) << doc.dump(1) << '\n';
}

MapMetadata read_sidecar(const fs::path& cloud_path) {
  const fs::path path = sidecar_path(cloud_path);
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(path.string() + ": invalid JSON: " + e.what());
  }
  MapMetadata meta;
  if (!doc.is_object() || !doc.contains("origin_offset") || !doc["origin_offset"].is_array() ||
      doc["origin_offset"].size() != 3) {
    throw Error(path.string() + ": missing 'origin_offset' [x, y, z]");
  }
  if (doc.contains("version") && doc["version"] != 1) {
    throw Error(path.string() + ": unsupported sidecar version");
  }
  if (doc.contains("crs") && doc["crs"].is_string()) meta.crs = doc["crs"].get<std::string>();
  const auto& o = doc["origin_offset"];
  meta.origin_offset = Vec3(o[0].get<double>(), o[1].get<double>(), o[2].get<double>());
  return meta;
}

void write_reference_map(const fs::path& path, const ReferenceMap& map) {
  write_cloud(path, map.points, CloudFormat::kBinXyz);
  write_sidecar(path, {map.crs_id, map.origin_offset});
}

ReferenceMap read_reference_map(const fs::path& path) {
  if (!fs::exists(path)) throw Error("reference map not found: " + path.string());
  ReferenceMap map;
  map.points = read_cloud(path, CloudFormat::kBinXyz);
  const MapMetadata meta = read_sidecar(path);
  map.crs_id = meta.crs;
  map.origin_offset = meta.origin_offset;
  return map;
}

std::vector<fs::path> list_scan_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("scan directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = lower(entry.path().extension().string());
    if (ext == ".bin" || ext == ".txt" || ext == ".xyz") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

PointCloud apply_yaw_correction(const PointCloud& cloud, double deg) {
  if (deg == 0.0) return cloud;
  const double a = deg * std::numbers::pi / 180.0;
  return transform_cloud(Pose::FromXYZYaw(0.0, 0.0, 0.0, a), cloud);
}

}  // namespace georef
