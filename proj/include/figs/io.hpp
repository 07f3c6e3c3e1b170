// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// states.csv reader/writer and small file helpers.
//
// Column order: t, px, py, pz, vx, vy, vz, qx, qy, qz, qw, fth, wx, wy, wz,
// k_th, m_dr. The final row of a rollout has no input; its input fields are
// left empty.
#pragma once

#include "figs/dynamics.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace figs {

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<const char*, 17> kStateColumns = {
    "t",  "px", "py", "pz",  "vx", "vy", "vz", "qx",  "qy",
    "qz", "qw", "fth", "wx", "wy", "wz", "k_th", "m_dr"};

struct StateLog {
  std::vector<double> times;
  std::vector<DroneState> states;
  std::vector<ControlInput> inputs;  // states.size() - 1, or states.size() if every row has one
  DroneParams params;
};

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string encode_states_csv(const StateLog& log) {
  std::string out;
  for (std::size_t c = 0; c < kStateColumns.size(); ++c) {
    out += kStateColumns[c];
    out += c + 1 < kStateColumns.size() ? ',' : '\n';
  }
  for (std::size_t k = 0; k < log.states.size(); ++k) {
    const StateVec s = log.states[k].vector();
    out += format_double(log.times[k]);
    for (int i = 0; i < kStateDim; ++i) out += ',' + format_double(s[i]);
    if (k < log.inputs.size()) {
      const InputVec u = log.inputs[k].vector();
      for (int i = 0; i < kInputDim; ++i) out += ',' + format_double(u[i]);
    } else {
      out += ",,,,";
    }
    out += ',' + format_double(log.params.thrust_coeff);
    out += ',' + format_double(log.params.mass);
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_states_csv(const std::filesystem::path& path, const StateLog& log) {
  write_text_file(path, encode_states_csv(log));
}

namespace io_detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_field(const std::string& s, std::size_t row, const char* column) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError("states.csv: bad number '" + s + "' in column '" + column + "' at row " +
                      std::to_string(row));
  }
}

}  // namespace io_detail

/// Requires the 11 state columns (t through qw); input and parameter columns
/// are optional. Columns may appear in any order.
inline StateLog parse_states_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("states.csv: empty file");
  const auto header = io_detail::split(line, ',');
  std::array<int, kStateColumns.size()> col{};
  col.fill(-1);
  for (std::size_t c = 0; c < kStateColumns.size(); ++c) {
    for (std::size_t h = 0; h < header.size(); ++h) {
      if (header[h] == kStateColumns[c]) col[c] = static_cast<int>(h);
    }
    if (c < 11 && col[c] < 0) {
      throw SchemaError(std::string("states.csv: missing column '") + kStateColumns[c] + "'");
    }
  }
  StateLog log;
  bool have_params = col[15] >= 0 && col[16] >= 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = io_detail::split(line, ',');
    if (f.size() != header.size()) {
      throw SchemaError("states.csv: row " + std::to_string(row) + " has " + std::to_string(f.size()) +
                        " fields, header has " + std::to_string(header.size()));
    }
    std::array<double, kStateColumns.size()> v{};
    for (std::size_t c = 0; c < kStateColumns.size(); ++c) {
      v[c] = col[c] >= 0 ? io_detail::parse_field(f[col[c]], row, kStateColumns[c])
                         : std::numeric_limits<double>::quiet_NaN();
    }
    StateVec s;
    for (int i = 0; i < kStateDim; ++i) s[i] = v[1 + i];
    if (!std::isfinite(v[0]) || !s.allFinite()) {
      throw SchemaError("states.csv: missing state value at row " + std::to_string(row));
    }
    log.times.push_back(v[0]);
    log.states.push_back(DroneState::from_vector(s));
    InputVec u(v[11], v[12], v[13], v[14]);
    if (u.allFinite()) log.inputs.push_back(ControlInput::from_vector(u));
    if (have_params && std::isfinite(v[15]) && std::isfinite(v[16])) {
      log.params = {v[15], v[16]};
    }
  }
  if (log.states.empty()) throw SchemaError("states.csv: no rows");
  return log;
}

inline StateLog read_states_csv(const std::filesystem::path& path) {
  return parse_states_csv(read_text_file(path));
}

/// 64-bit FNV-1a, hex encoded.
inline std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace figs
