#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "camplace/error.hpp"
#include "camplace/pointcloud.hpp"

namespace camplace {

enum class CloudFormat { ply, xyz_rgb_text, automatic };

struct LoadOptions {
  CloudFormat format = CloudFormat::automatic;
  bool allow_empty = false;
  /// Optional voxel-grid downsampling applied after deduplication (meters).
  std::optional<double> downsample_voxel;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::uint8_t to_channel(double v) {
  if (v <= 0.0) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v));
}

[[noreturn]] inline void parse_fail(const std::string& path, const std::string& where,
                                    const std::string& what) {
  throw Error(Errc::parse_error, path + " (" + where + "): " + what);
}

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

inline std::optional<PlyType> ply_type(std::string_view name) {
  if (name == "char" || name == "int8") return PlyType::i8;
  if (name == "uchar" || name == "uint8") return PlyType::u8;
  if (name == "short" || name == "int16") return PlyType::i16;
  if (name == "ushort" || name == "uint16") return PlyType::u16;
  if (name == "int" || name == "int32") return PlyType::i32;
  if (name == "uint" || name == "uint32") return PlyType::u32;
  if (name == "float" || name == "float32") return PlyType::f32;
  if (name == "double" || name == "float64") return PlyType::f64;
  return std::nullopt;
}

inline std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

template <typename T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

inline double ply_read_binary(PlyType t, const char* p) {
  switch (t) {
    case PlyType::i8: return read_le<std::int8_t>(p);
    case PlyType::u8: return read_le<std::uint8_t>(p);
    case PlyType::i16: return read_le<std::int16_t>(p);
    case PlyType::u16: return read_le<std::uint16_t>(p);
    case PlyType::i32: return read_le<std::int32_t>(p);
    case PlyType::u32: return read_le<std::uint32_t>(p);
    case PlyType::f32: return read_le<float>(p);
    case PlyType::f64: return read_le<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type;
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

inline void parse_ply(const std::string& path, const std::string& data, std::vector<Vec3>& pts,
                      std::vector<Rgb>& cols) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    if (pos >= data.size()) return std::nullopt;
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    std::string_view line(data.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return line;
  };

  auto first = next_line();
  if (!first || *first != "ply") parse_fail(path, "line 1", "missing 'ply' magic");
  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  for (;;) {
    auto line = next_line();
    if (!line) parse_fail(path, "line " + std::to_string(line_no), "unterminated header");
    const auto tok = split_ws(*line);
    if (tok.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2) parse_fail(path, where, "bad format line");
      if (tok[1] == "ascii") {
        binary = false;
      } else if (tok[1] == "binary_little_endian") {
        binary = true;
      } else {
        parse_fail(path, where, "unsupported format " + std::string(tok[1]));
      }
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_fail(path, where, "bad element line");
      std::size_t count = 0;
      const auto [p, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), count);
      if (ec != std::errc() || p != tok[2].data() + tok[2].size()) {
        parse_fail(path, where, "bad element count");
      }
      elements.push_back({std::string(tok[1]), count, {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) parse_fail(path, where, "property before element");
      if (tok.size() == 5 && tok[1] == "list") {
        const auto t = ply_type(tok[3]);
        if (!t || !ply_type(tok[2])) parse_fail(path, where, "bad list property type");
        elements.back().props.push_back({std::string(tok[4]), *t, true});
      } else if (tok.size() == 3) {
        const auto t = ply_type(tok[1]);
        if (!t) parse_fail(path, where, "unknown property type " + std::string(tok[1]));
        elements.back().props.push_back({std::string(tok[2]), *t, false});
      } else {
        parse_fail(path, where, "bad property line");
      }
    } else {
      parse_fail(path, where, "unexpected header keyword " + std::string(tok[0]));
    }
  }
  if (!have_format) parse_fail(path, "header", "missing format line");

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
  std::size_t vertex_elem = elements.size();
  for (std::size_t e = 0; e < elements.size(); ++e) {
    if (elements[e].name != "vertex") continue;
    vertex_elem = e;
    const auto& props = elements[e].props;
    for (std::size_t k = 0; k < props.size(); ++k) {
      const std::string& n = props[k].name;
      const int ki = static_cast<int>(k);
      if (props[k].is_list) continue;
      if (n == "x") ix = ki;
      if (n == "y") iy = ki;
      if (n == "z") iz = ki;
      if (n == "red" || n == "r") ir = ki;
      if (n == "green" || n == "g") ig = ki;
      if (n == "blue" || n == "b") ib = ki;
    }
  }
  if (vertex_elem == elements.size()) parse_fail(path, "header", "no vertex element");
  if (ix < 0 || iy < 0 || iz < 0) parse_fail(path, "header", "vertex lacks x/y/z");
  const bool with_color = ir >= 0 && ig >= 0 && ib >= 0;
  for (std::size_t e = 0; e < vertex_elem; ++e) {
    if (elements[e].count == 0) continue;
    // Elements preceding the vertices are skipped only in ASCII or when fixed-size.
    if (binary) {
      for (const auto& p : elements[e].props) {
        if (p.is_list) parse_fail(path, "header", "list element before vertex in binary file");
      }
    }
  }
  const PlyElement& vert = elements[vertex_elem];
  pts.reserve(vert.count);
  if (with_color) cols.reserve(vert.count);

  if (!binary) {
    for (std::size_t e = 0; e < vertex_elem; ++e) {
      for (std::size_t i = 0; i < elements[e].count; ++i) {
        if (!next_line()) parse_fail(path, "line " + std::to_string(line_no), "truncated body");
      }
    }
    std::vector<double> vals(vert.props.size());
    for (std::size_t i = 0; i < vert.count; ++i) {
      auto line = next_line();
      const std::string where = "line " + std::to_string(line_no);
      if (!line) parse_fail(path, where, "expected " + std::to_string(vert.count) + " vertices");
      const auto tok = split_ws(*line);
      if (tok.size() < vert.props.size()) parse_fail(path, where, "too few vertex fields");
      for (std::size_t k = 0; k < vert.props.size(); ++k) {
        if (vert.props[k].is_list) parse_fail(path, where, "list property in vertex element");
        const auto v = parse_double(tok[k]);
        if (!v) parse_fail(path, where, "bad number '" + std::string(tok[k]) + "'");
        vals[k] = *v;
      }
      pts.push_back({vals[ix], vals[iy], vals[iz]});
      if (with_color) cols.push_back({to_channel(vals[ir]), to_channel(vals[ig]), to_channel(vals[ib])});
    }
    return;
  }

  for (std::size_t e = 0; e < vertex_elem; ++e) {
    std::size_t stride = 0;
    for (const auto& p : elements[e].props) stride += ply_size(p.type);
    pos += stride * elements[e].count;
  }
  std::vector<std::size_t> offset(vert.props.size());
  std::size_t stride = 0;
  for (std::size_t k = 0; k < vert.props.size(); ++k) {
    if (vert.props[k].is_list) parse_fail(path, "header", "list property in vertex element");
    offset[k] = stride;
    stride += ply_size(vert.props[k].type);
  }
  for (std::size_t i = 0; i < vert.count; ++i) {
    if (pos + stride > data.size()) {
      parse_fail(path, "byte " + std::to_string(pos),
                 "truncated binary body at vertex " + std::to_string(i));
    }
    const char* rec = data.data() + pos;
    auto get = [&](int k) { return ply_read_binary(vert.props[k].type, rec + offset[k]); };
    pts.push_back({get(ix), get(iy), get(iz)});
    if (with_color) cols.push_back({to_channel(get(ir)), to_channel(get(ig)), to_channel(get(ib))});
    pos += stride;
  }
}

inline void parse_xyz_text(const std::string& path, const std::string& data,
                           std::vector<Vec3>& pts, std::vector<Rgb>& cols) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::optional<bool> with_color;
  while (pos < data.size()) {
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    const std::string_view line(data.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    const std::string where = "line " + std::to_string(line_no);
    if (tok.size() < 3) parse_fail(path, where, "expected at least 3 columns");
    const bool row_color = tok.size() >= 6;
    if (!with_color) with_color = row_color;
    if (*with_color && !row_color) parse_fail(path, where, "missing color columns");
    double v[6];
    const std::size_t used = *with_color ? 6 : 3;
    for (std::size_t k = 0; k < used; ++k) {
      const auto d = parse_double(tok[k]);
      if (!d) parse_fail(path, where, "bad number '" + std::string(tok[k]) + "'");
      v[k] = *d;
    }
    pts.push_back({v[0], v[1], v[2]});
    if (*with_color) cols.push_back({to_channel(v[3]), to_channel(v[4]), to_channel(v[5])});
  }
}

}  // namespace detail

inline PointCloud load_point_cloud(const std::filesystem::path& path,
                                   const LoadOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::io_error, "cannot read " + path.string());

  CloudFormat format = options.format;
  if (format == CloudFormat::automatic) {
    const bool ply_ext = path.extension() == ".ply" || path.extension() == ".PLY";
    format = (ply_ext || data.rfind("ply\n", 0) == 0 || data.rfind("ply\r\n", 0) == 0)
                 ? CloudFormat::ply
                 : CloudFormat::xyz_rgb_text;
  }
  std::vector<Vec3> pts;
  std::vector<Rgb> cols;
  if (format == CloudFormat::ply) {
    detail::parse_ply(path.string(), data, pts, cols);
  } else {
    detail::parse_xyz_text(path.string(), data, pts, cols);
  }
  if (pts.empty() && !options.allow_empty) {
    throw Error(Errc::empty_cloud, path.string() + " holds no points");
  }
  const std::size_t removed = deduplicate(pts, cols);
  PointCloud cloud(std::move(pts), std::move(cols));
  if (options.downsample_voxel) cloud = voxel_downsample(cloud, *options.downsample_voxel);
  cloud.set_duplicates_removed(removed);
  return cloud;
}

/// Writes x,y,z as float64 (plus uchar colors when present).
inline void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
                      bool binary = false) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_colors()) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud[i];
    if (binary) {
      const double xyz[3] = {p.x, p.y, p.z};
      out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
      if (cloud.has_colors()) {
        out.write(reinterpret_cast<const char*>(cloud.colors()[i].data()), 3);
      }
    } else {
      char buf[128];
      auto* end = buf;
      for (double v : {p.x, p.y, p.z}) {
        end = std::to_chars(end, buf + sizeof(buf), v).ptr;
        *end++ = ' ';
      }
      out.write(buf, end - buf - 1);
      if (cloud.has_colors()) {
        const Rgb& c = cloud.colors()[i];
        out << ' ' << int(c[0]) << ' ' << int(c[1]) << ' ' << int(c[2]);
      }
      out << '\n';
    }
  }
  if (!out) throw Error(Errc::io_error, "failed writing " + path.string());
}

}  // namespace camplace
