// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// Reader/writer for the binary little-endian PLY layout produced by gaussian
// splat trainers (x, y, z, f_dc_*, opacity, scale_*, rot_*).
#pragma once

#include "figs/splat.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace figs {

class PlyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace ply_detail {

enum class ScalarType { kI8, kU8, kI16, kU16, kI32, kU32, kF32, kF64 };

inline bool parse_type(const std::string& name, ScalarType& t) {
  static const std::map<std::string, ScalarType> kTypes = {
      {"char", ScalarType::kI8},    {"int8", ScalarType::kI8},     {"uchar", ScalarType::kU8},
      {"uint8", ScalarType::kU8},   {"short", ScalarType::kI16},   {"int16", ScalarType::kI16},
      {"ushort", ScalarType::kU16}, {"uint16", ScalarType::kU16},  {"int", ScalarType::kI32},
      {"int32", ScalarType::kI32},  {"uint", ScalarType::kU32},    {"uint32", ScalarType::kU32},
      {"float", ScalarType::kF32},  {"float32", ScalarType::kF32}, {"double", ScalarType::kF64},
      {"float64", ScalarType::kF64}};
  const auto it = kTypes.find(name);
  if (it == kTypes.end()) return false;
  t = it->second;
  return true;
}

inline std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::kI8:
    case ScalarType::kU8: return 1;
    case ScalarType::kI16:
    case ScalarType::kU16: return 2;
    case ScalarType::kI32:
    case ScalarType::kU32:
    case ScalarType::kF32: return 4;
    case ScalarType::kF64: return 8;
  }
  return 0;
}

template <typename T>
T read_le(const unsigned char* p) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

inline double read_scalar(ScalarType t, const unsigned char* p) {
  switch (t) {
    case ScalarType::kI8: return read_le<std::int8_t>(p);
    case ScalarType::kU8: return read_le<std::uint8_t>(p);
    case ScalarType::kI16: return read_le<std::int16_t>(p);
    case ScalarType::kU16: return read_le<std::uint16_t>(p);
    case ScalarType::kI32: return read_le<std::int32_t>(p);
    case ScalarType::kU32: return read_le<std::uint32_t>(p);
    case ScalarType::kF32: return read_le<float>(p);
    case ScalarType::kF64: return read_le<double>(p);
  }
  return 0.0;
}

struct Property {
  std::string name;
  ScalarType type;
  std::size_t offset;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
  std::size_t stride = 0;
  bool has_list = false;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace ply_detail

/// Parses a splat PLY held in memory. Activations are applied on load:
/// exp() on scales, sigmoid() on opacity, SH degree-0 colour, unit rotations.
inline SplatScene parse_ply(const std::vector<unsigned char>& bytes) {
  using namespace ply_detail;
  const std::string kEnd = "end_header\n";
  const std::string head(bytes.begin(),
                         bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(
                                             bytes.size(), 1 << 16)));
  if (head.rfind("ply\n", 0) != 0) throw PlyError("ply: bad magic (expected 'ply' at offset 0)");
  const auto end_pos = head.find(kEnd);
  if (end_pos == std::string::npos) throw PlyError("ply: missing end_header");
  const std::size_t body_offset = end_pos + kEnd.size();

  std::istringstream header(head.substr(0, end_pos));
  std::string line;
  std::vector<Element> elements;
  bool format_seen = false;
  while (std::getline(header, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") throw PlyError("ply: unsupported format '" + fmt + "'");
      format_seen = true;
    } else if (keyword == "element") {
      Element e;
      ls >> e.name >> e.count;
      if (!ls) throw PlyError("ply: malformed element line '" + line + "'");
      elements.push_back(e);
    } else if (keyword == "property") {
      if (elements.empty()) throw PlyError("ply: property before any element");
      std::string type_name, name;
      ls >> type_name;
      Element& e = elements.back();
      if (type_name == "list") {
        e.has_list = true;
        continue;
      }
      ls >> name;
      ScalarType t;
      if (!parse_type(type_name, t)) {
        throw PlyError("ply: unknown type '" + type_name + "' for property '" + name + "'");
      }
      e.properties.push_back({name, t, e.stride});
      e.stride += type_size(t);
    }
  }
  if (!format_seen) throw PlyError("ply: missing format line");

  std::size_t offset = body_offset;
  const Element* vertex = nullptr;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      vertex = &e;
      break;
    }
    if (e.has_list) throw PlyError("ply: list property in element '" + e.name + "' before vertex");
    offset += e.count * e.stride;
  }
  if (vertex == nullptr) throw PlyError("ply: no vertex element");
  if (vertex->has_list) throw PlyError("ply: list properties in vertex element are unsupported");

  const std::array<const char*, 14> kRequired = {"x",       "y",       "z",       "f_dc_0",
                                                 "f_dc_1",  "f_dc_2",  "opacity", "scale_0",
                                                 "scale_1", "scale_2", "rot_0",   "rot_1",
                                                 "rot_2",   "rot_3"};
  std::array<const Property*, kRequired.size()> props{};
  for (std::size_t i = 0; i < kRequired.size(); ++i) {
    for (const auto& p : vertex->properties) {
      if (p.name == kRequired[i]) props[i] = &p;
    }
    if (props[i] == nullptr) {
      throw PlyError(std::string("ply: missing required vertex property '") + kRequired[i] + "'");
    }
  }

  const std::size_t needed = offset + vertex->count * vertex->stride;
  if (bytes.size() < needed) {
    const std::size_t row = (bytes.size() - std::min(bytes.size(), offset)) / vertex->stride;
    throw PlyError("ply: truncated payload: vertex " + std::to_string(row) + " at byte offset " +
                   std::to_string(offset + row * vertex->stride) + " (need " +
                   std::to_string(needed) + " bytes, have " + std::to_string(bytes.size()) + ")");
  }

  SplatScene scene;
  scene.gaussians.reserve(vertex->count);
  for (std::size_t i = 0; i < vertex->count; ++i) {
    const unsigned char* row = bytes.data() + offset + i * vertex->stride;
    std::array<double, kRequired.size()> v{};
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = read_scalar(props[k]->type, row + props[k]->offset);
    Gaussian3D g;
    g.mean = {v[0], v[1], v[2]};
    g.color = (Vec3(v[3], v[4], v[5]) * kShC0 + Vec3::Constant(0.5)).cwiseMax(0.0).cwiseMin(1.0);
    g.opacity = sigmoid(v[6]);
    g.scale = {std::exp(v[7]), std::exp(v[8]), std::exp(v[9])};
    // rot_0 is the real part.
    const Quat q{v[11], v[12], v[13], v[10]};
    const double n = q.norm();
    g.rotation = n > 0.0 ? q.normalized() : Quat::identity();
    scene.gaussians.push_back(g);
  }
  return scene;
}

inline SplatScene load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PlyError("ply: cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return parse_ply(bytes);
}

/// Serializes gaussians with float32 properties, inverting the load
/// activations.
inline std::vector<unsigned char> encode_ply(const std::vector<Gaussian3D>& gaussians) {
  std::ostringstream hdr;
  hdr << "ply\nformat binary_little_endian 1.0\nelement vertex " << gaussians.size() << "\n";
  for (const char* name : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0",
                           "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
    hdr << "property float " << name << "\n";
  }
  hdr << "end_header\n";
  const std::string h = hdr.str();
  std::vector<unsigned char> out(h.begin(), h.end());
  out.reserve(out.size() + gaussians.size() * 14 * sizeof(float));
  auto put = [&out](double v) {
    const float f = static_cast<float>(v);
    unsigned char b[sizeof(float)];
    std::memcpy(b, &f, sizeof(float));
    out.insert(out.end(), b, b + sizeof(float));
  };
  for (const auto& g : gaussians) {
    put(g.mean.x());
    put(g.mean.y());
    put(g.mean.z());
    for (int c = 0; c < 3; ++c) put((g.color[c] - 0.5) / kShC0);
    const double o = std::clamp(g.opacity, 1e-7, 1.0 - 1e-7);
    put(std::log(o / (1.0 - o)));
    for (int c = 0; c < 3; ++c) put(std::log(g.scale[c]));
    put(g.rotation.w);
    put(g.rotation.x);
    put(g.rotation.y);
    put(g.rotation.z);
  }
  return out;
}

inline void save_ply(const std::filesystem::path& path, const std::vector<Gaussian3D>& gaussians) {
  const auto bytes = encode_ply(gaussians);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PlyError("ply: cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace figs
