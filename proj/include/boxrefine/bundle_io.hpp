#pragma once

// On-disk scene bundle: a directory holding manifest.json plus raw
// little-endian arrays, 16-bit PGM depth maps and optional PPM frames.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "boxrefine/error.hpp"
#include "boxrefine/scene.hpp"

namespace boxrefine {

namespace fs = std::filesystem;

namespace io_detail {

inline std::uint32_t swap32(std::uint32_t v) {
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

inline void write_file(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError("write failed: " + path.string());
}

template <typename T>
std::vector<T> read_le32(const fs::path& path) {
  static_assert(sizeof(T) == 4);
  const std::string bytes = read_file(path);
  if (bytes.size() % 4 != 0) {
    throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of 4");
  }
  std::vector<T> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t raw;
    std::memcpy(&raw, bytes.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) raw = swap32(raw);
    std::memcpy(&out[i], &raw, 4);
  }
  return out;
}

template <typename T>
void write_le32(const fs::path& path, const std::vector<T>& values) {
  static_assert(sizeof(T) == 4);
  std::vector<std::uint32_t> raw(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::memcpy(&raw[i], &values[i], 4);
    if constexpr (std::endian::native == std::endian::big) raw[i] = swap32(raw[i]);
  }
  write_file(path, raw.data(), raw.size() * 4);
}

inline std::vector<Point3> unpack_xyz(const std::vector<float>& flat, const fs::path& path) {
  if (flat.size() % 3 != 0) throw FormatError(path.string() + ": not an N x 3 array");
  std::vector<Point3> out(flat.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
  return out;
}

inline std::vector<float> pack_xyz(const std::vector<Point3>& pts) {
  std::vector<float> flat(pts.size() * 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    flat[3 * i] = pts[i].x();
    flat[3 * i + 1] = pts[i].y();
    flat[3 * i + 2] = pts[i].z();
  }
  return flat;
}

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

inline NetpbmHeader parse_netpbm_header(const std::string& bytes, const fs::path& path) {
  NetpbmHeader h;
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError(path.string() + ": truncated header");
    return bytes.substr(start, pos - start);
  };
  try {
    h.magic = next_token();
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const std::logic_error&) {
    throw FormatError(path.string() + ": malformed header");
  }
  // Exactly one whitespace byte separates the header from the raster.
  h.data_offset = pos + 1;
  if (h.width <= 0 || h.height <= 0) throw FormatError(path.string() + ": bad dimensions");
  return h;
}

}  // namespace io_detail

/// Reads a 16-bit binary PGM into raw depth units.
inline std::vector<std::uint16_t> read_pgm16(const fs::path& path, int& width, int& height) {
  const std::string bytes = io_detail::read_file(path);
  const auto h = io_detail::parse_netpbm_header(bytes, path);
  if (h.magic != "P5" || h.maxval != 65535) {
    throw FormatError(path.string() + ": expected P5 PGM with maxval 65535");
  }
  const std::size_t count = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height);
  if (bytes.size() < h.data_offset + 2 * count) throw FormatError(path.string() + ": truncated raster");
  std::vector<std::uint16_t> out(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.data_offset);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);  // netpbm is MSB first
  }
  width = h.width;
  height = h.height;
  return out;
}

inline void write_pgm16(const fs::path& path, const std::vector<std::uint16_t>& values, int width,
                        int height) {
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
  const std::size_t header = out.size();
  out.resize(header + 2 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[header + 2 * i] = static_cast<char>(values[i] >> 8);
    out[header + 2 * i + 1] = static_cast<char>(values[i] & 0xff);
  }
  io_detail::write_file(path, out.data(), out.size());
}

inline std::vector<std::uint8_t> read_ppm(const fs::path& path, int& width, int& height) {
  const std::string bytes = io_detail::read_file(path);
  const auto h = io_detail::parse_netpbm_header(bytes, path);
  if (h.magic != "P6" || h.maxval != 255) throw FormatError(path.string() + ": expected P6 PPM, maxval 255");
  const std::size_t count = 3 * static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height);
  if (bytes.size() < h.data_offset + count) throw FormatError(path.string() + ": truncated raster");
  width = h.width;
  height = h.height;
  return {bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset),
          bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset + count)};
}

inline void write_ppm(const fs::path& path, const std::vector<std::uint8_t>& rgb, int width, int height) {
  std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
  io_detail::write_file(path, out.data(), out.size());
}

inline std::vector<std::int32_t> read_i32_array(const fs::path& path) {
  return io_detail::read_le32<std::int32_t>(path);
}

inline void write_i32_array(const fs::path& path, const std::vector<std::int32_t>& values) {
  io_detail::write_le32(path, values);
}

inline nlohmann::json box_to_json(const InstanceBox& b) {
  return {{"instance_id", b.instance_id},
          {"semantic_class", b.semantic_class},
          {"c_min", {b.c_min.x(), b.c_min.y(), b.c_min.z()}},
          {"c_max", {b.c_max.x(), b.c_max.y(), b.c_max.z()}}};
}

inline InstanceBox box_from_json(const nlohmann::json& j) {
  try {
    InstanceBox b;
    b.instance_id = j.at("instance_id").get<InstanceId>();
    b.semantic_class = j.value("semantic_class", 0);
    const auto& lo = j.at("c_min");
    const auto& hi = j.at("c_max");
    if (lo.size() != 3 || hi.size() != 3) throw FormatError("box corners must have 3 coordinates");
    for (int a = 0; a < 3; ++a) {
      b.c_min[a] = lo.at(static_cast<std::size_t>(a)).get<float>();
      b.c_max[a] = hi.at(static_cast<std::size_t>(a)).get<float>();
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed box entry: ") + e.what());
  }
}

inline nlohmann::json boxes_to_json(const std::vector<InstanceBox>& boxes) {
  auto arr = nlohmann::json::array();
  for (const auto& b : boxes) arr.push_back(box_to_json(b));
  return arr;
}

inline std::vector<InstanceBox> boxes_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw FormatError("boxes must be a JSON array");
  std::vector<InstanceBox> out;
  for (const auto& j : arr) out.push_back(box_from_json(j));
  return out;
}

inline std::vector<InstanceBox> load_boxes_json(const fs::path& path) {
  try {
    return boxes_from_json(nlohmann::json::parse(io_detail::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void save_boxes_json(const fs::path& path, const std::vector<InstanceBox>& boxes) {
  const std::string text = boxes_to_json(boxes).dump(2) + "\n";
  io_detail::write_file(path, text.data(), text.size());
}

inline std::string view_depth_file(const CameraView& v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03d.pgm", v.id);
  return buf;
}

inline std::string view_rgb_file(const CameraView& v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03d.ppm", v.id);
  return buf;
}

/// Writes the manifest and only the arrays the scene actually carries.
inline void save_scene_bundle(const Scene& scene, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json manifest;
  manifest["point_count"] = scene.points.size();
  nlohmann::json arrays;
  arrays["points"] = "points.f32";
  io_detail::write_le32(dir / "points.f32", io_detail::pack_xyz(scene.points));
  if (!scene.normals.empty()) {
    arrays["normals"] = "normals.f32";
    io_detail::write_le32(dir / "normals.f32", io_detail::pack_xyz(scene.normals));
  }
  if (!scene.colors.empty()) {
    arrays["colors"] = "colors.f32";
    io_detail::write_le32(dir / "colors.f32", io_detail::pack_xyz(scene.colors));
  }
  if (scene.has_gt()) {
    arrays["gt_labels"] = "gt.i32";
    io_detail::write_le32(dir / "gt.i32", scene.gt_labels);
  }
  if (scene.superpoints) {
    arrays["superpoints"] = "sp.i32";
    io_detail::write_le32(dir / "sp.i32", scene.superpoints->assignment);
  }
  manifest["arrays"] = arrays;
  manifest["boxes"] = boxes_to_json(scene.boxes);

  auto views = nlohmann::json::array();
  for (const auto& v : scene.views) {
    nlohmann::json jv;
    jv["id"] = v.id;
    jv["width"] = v.width;
    jv["height"] = v.height;
    std::vector<double> k(9), p(12);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) k[static_cast<std::size_t>(3 * r + c)] = v.K(r, c);
      for (int c = 0; c < 4; ++c) p[static_cast<std::size_t>(4 * r + c)] = v.P(r, c);
    }
    jv["K"] = k;
    jv["P"] = p;
    jv["depth"] = view_depth_file(v);
    jv["depth_scale_mm_per_unit"] = v.depth_scale_mm_per_unit;
    std::vector<std::uint16_t> raw(v.depth.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const double units = std::nearbyint(static_cast<double>(v.depth[i]) * 1000.0 / v.depth_scale_mm_per_unit);
      raw[i] = static_cast<std::uint16_t>(std::clamp(units, 0.0, 65535.0));
    }
    write_pgm16(dir / view_depth_file(v), raw, v.width, v.height);
    if (!v.rgb.empty()) {
      jv["rgb"] = view_rgb_file(v);
      write_ppm(dir / view_rgb_file(v), v.rgb, v.width, v.height);
    }
    views.push_back(jv);
  }
  manifest["views"] = views;
  const std::string text = manifest.dump(2) + "\n";
  io_detail::write_file(dir / "manifest.json", text.data(), text.size());
}

inline Scene load_scene_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw FormatError("missing manifest: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io_detail::read_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }

  Scene scene;
  try {
    const auto n = manifest.at("point_count").get<std::size_t>();
    const auto& arrays = manifest.at("arrays");
    auto length_check = [n](std::size_t got, const char* what) {
      if (got != n) {
        throw ValidationError(std::string(what) + ": length " + std::to_string(got) +
                              " != point_count " + std::to_string(n));
      }
    };
    auto xyz = [&](const char* key) {
      const fs::path p = dir / arrays.at(key).get<std::string>();
      auto v = io_detail::unpack_xyz(io_detail::read_le32<float>(p), p);
      length_check(v.size(), key);
      return v;
    };
    scene.points = xyz("points");
    if (arrays.contains("normals")) scene.normals = xyz("normals");
    if (arrays.contains("colors")) scene.colors = xyz("colors");
    if (arrays.contains("gt_labels")) {
      scene.gt_labels = io_detail::read_le32<std::int32_t>(dir / arrays.at("gt_labels").get<std::string>());
      length_check(scene.gt_labels.size(), "gt_labels");
    }
    if (arrays.contains("superpoints")) {
      SuperpointPartition sp;
      sp.assignment = io_detail::read_le32<std::int32_t>(dir / arrays.at("superpoints").get<std::string>());
      length_check(sp.assignment.size(), "superpoints");
      std::int32_t max_id = -1;
      for (auto id : sp.assignment) max_id = std::max(max_id, id);
      sp.superpoint_count = max_id + 1;
      scene.superpoints = std::move(sp);
    }
    if (manifest.contains("boxes")) scene.boxes = boxes_from_json(manifest.at("boxes"));

    for (const auto& jv : manifest.at("views")) {
      CameraView v;
      v.id = jv.at("id").get<std::int32_t>();
      v.width = jv.at("width").get<std::int32_t>();
      v.height = jv.at("height").get<std::int32_t>();
      const auto k = jv.at("K").get<std::vector<double>>();
      const auto p = jv.at("P").get<std::vector<double>>();
      if (k.size() != 9 || p.size() != 12) throw FormatError("view " + std::to_string(v.id) + ": K needs 9 and P 12 numbers");
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) v.K(r, c) = k[static_cast<std::size_t>(3 * r + c)];
        for (int c = 0; c < 4; ++c) v.P(r, c) = p[static_cast<std::size_t>(4 * r + c)];
      }
      v.depth_scale_mm_per_unit = jv.value("depth_scale_mm_per_unit", 1.0);
      int w = 0, h = 0;
      const auto raw = read_pgm16(dir / jv.at("depth").get<std::string>(), w, h);
      if (w != v.width || h != v.height) {
        throw ValidationError("view " + std::to_string(v.id) + ": depth map size differs from manifest");
      }
      v.depth.resize(raw.size());
      for (std::size_t i = 0; i < raw.size(); ++i) {
        v.depth[i] = raw[i] == 0 ? 0.0f
                                 : static_cast<float>(raw[i] * v.depth_scale_mm_per_unit / 1000.0);
      }
      if (jv.contains("rgb")) {
        v.rgb = read_ppm(dir / jv.at("rgb").get<std::string>(), w, h);
        if (w != v.width || h != v.height) {
          throw ValidationError("view " + std::to_string(v.id) + ": rgb frame size differs from manifest");
        }
      }
      scene.views.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }

  const auto report = validate_scene(scene);
  if (!report.empty()) {
    std::string msg = "invalid scene bundle " + dir.string() + ":";
    for (const auto& r : report) msg += "\n  " + r;
    throw ValidationError(msg);
  }
  return scene;
}

}  // namespace boxrefine
