#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "leangcn/common.hpp"
#include "leangcn/matrix.hpp"
#include "leangcn/netspec.hpp"
#include "leangcn/network.hpp"

namespace leangcn::io {

using json = nlohmann::json;

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ============================================================================
// XYZ point clouds
// ============================================================================
//
// One point per line, whitespace-separated decimal floats. The first data
// line fixes the dimensionality; `#` lines and blank lines are skipped.

inline Matrix parse_xyz(std::istream& in, const std::string& origin) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (!ls.eof()) {
      throw ParseError(origin + ":" + std::to_string(lineno) +
                       ": malformed number");
    }
    if (vals.empty()) continue;
    if (dim == 0) {
      dim = vals.size();
    } else if (vals.size() != dim) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(dim) + " values, got " +
                       std::to_string(vals.size()));
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError(origin + ": no points found");
  Matrix m(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < dim; ++c) m(i, c) = rows[i][c];
  return m;
}

inline Matrix load_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  return parse_xyz(in, path);
}

inline void save_xyz(const std::string& path, const Matrix& points) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out.precision(17);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto row = points.row(i);
    for (std::size_t c = 0; c < points.cols(); ++c) {
      if (c) out << ' ';
      out << row[c];
    }
    out << '\n';
  }
}

// ============================================================================
// JSON specs
// ============================================================================

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ParseError(where + ": unknown key \"" + key + "\"");
  }
}

}  // namespace detail

inline net::NetworkSpec spec_from_json(const json& j) {
  detail::check_keys(j,
                     {"mode", "seed", "input_dim", "points", "freeze_sampling",
                      "blocks", "head"},
                     "spec");
  net::NetworkSpec spec;
  spec.mode = net::parse_mode(j.value("mode", std::string("baseline")));
  spec.seed = j.value("seed", std::uint64_t{1});
  spec.input_dim = j.value("input_dim", 3);
  spec.points = j.value("points", std::int64_t{0});
  spec.freeze_sampling = j.value("freeze_sampling", false);
  if (!j.contains("blocks")) throw ParseError("spec: missing \"blocks\"");
  for (const auto& jb : j.at("blocks")) {
    detail::check_keys(jb, {"layers", "k", "p", "widths", "dynamic"},
                       "spec block");
    net::BlockSpec b;
    b.layers = jb.at("layers").get<std::int32_t>();
    b.k = jb.at("k").get<std::int32_t>();
    b.p = jb.value("p", 0);
    b.widths = jb.at("widths").get<std::vector<std::int32_t>>();
    b.dynamic = jb.value("dynamic", true);
    spec.blocks.push_back(std::move(b));
  }
  if (!j.contains("head")) throw ParseError("spec: missing \"head\"");
  detail::check_keys(j.at("head"), {"hidden", "classes"}, "spec head");
  spec.head.hidden =
      j.at("head").value("hidden", std::vector<std::int32_t>{});
  spec.head.classes = j.at("head").at("classes").get<std::int32_t>();
  spec.validate();
  return spec;
}

inline json spec_to_json(const net::NetworkSpec& spec) {
  json j;
  j["mode"] = net::mode_name(spec.mode);
  j["seed"] = spec.seed;
  j["input_dim"] = spec.input_dim;
  j["points"] = spec.points;
  j["freeze_sampling"] = spec.freeze_sampling;
  j["blocks"] = json::array();
  for (const auto& b : spec.blocks)
    j["blocks"].push_back({{"layers", b.layers},
                           {"k", b.k},
                           {"p", b.p},
                           {"widths", b.widths},
                           {"dynamic", b.dynamic}});
  j["head"] = {{"hidden", spec.head.hidden}, {"classes", spec.head.classes}};
  return j;
}

inline net::NetworkSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    return spec_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline net::TrainConfig train_config_from_json(const json& j) {
  detail::check_keys(j,
                     {"classes", "train_size", "test_size", "cloud_points",
                      "noise_sigma", "rotate", "epochs", "batch", "lr",
                      "momentum", "init_sigma", "runs", "seed"},
                     "train config");
  net::TrainConfig cfg;
  cfg.classes = j.value("classes", cfg.classes);
  cfg.train_size = j.value("train_size", cfg.train_size);
  cfg.test_size = j.value("test_size", cfg.test_size);
  cfg.cloud_points = j.value("cloud_points", cfg.cloud_points);
  cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
  cfg.rotate = j.value("rotate", cfg.rotate);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch = j.value("batch", cfg.batch);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.momentum = j.value("momentum", cfg.momentum);
  cfg.init_sigma = j.value("init_sigma", cfg.init_sigma);
  cfg.runs = j.value("runs", cfg.runs);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

inline net::TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    return train_config_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ============================================================================
// parameter blobs
// ============================================================================
//
// Binary layout (little-endian): magic "LGCNPRM\0", u32 version, u32 matrix
// count, then per matrix: u32 name length, name bytes, u32 rows, u32 cols,
// rows*cols doubles row-major.

static_assert(std::endian::native == std::endian::little,
              "parameter blobs assume a little-endian host");

inline constexpr char kParamMagic[8] = {'L', 'G', 'C', 'N', 'P', 'R', 'M', 0};
inline constexpr std::uint32_t kParamVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& origin) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError(origin + ": truncated parameter blob");
  return v;
}

}  // namespace detail

inline void save_params(const std::string& path, const net::Params& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out.write(kParamMagic, sizeof(kParamMagic));
  detail::write_pod(out, kParamVersion);
  const auto entries = params.named();
  detail::write_pod(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, mat] : entries) {
    detail::write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod(out, static_cast<std::uint32_t>(mat->rows()));
    detail::write_pod(out, static_cast<std::uint32_t>(mat->cols()));
    out.write(reinterpret_cast<const char*>(mat->data()),
              static_cast<std::streamsize>(mat->size() * sizeof(double)));
  }
  if (!out) throw ParseError(path + ": write failed");
}

inline std::vector<std::pair<std::string, Matrix>> load_param_entries(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kParamMagic, sizeof(magic)) != 0)
    throw ParseError(path + ": not a parameter blob");
  const auto version = detail::read_pod<std::uint32_t>(in, path);
  if (version != kParamVersion)
    throw ParseError(path + ": unsupported blob version " +
                     std::to_string(version));
  const auto count = detail::read_pod<std::uint32_t>(in, path);
  std::vector<std::pair<std::string, Matrix>> entries;
  entries.reserve(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = detail::read_pod<std::uint32_t>(in, path);
    require(name_len <= 4096, "load_params: unreasonable name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rows = detail::read_pod<std::uint32_t>(in, path);
    const auto cols = detail::read_pod<std::uint32_t>(in, path);
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw ParseError(path + ": truncated parameter blob");
    entries.emplace_back(std::move(name), std::move(m));
  }
  return entries;
}

// Load a blob against a spec: shapes and the exact name set must match the
// spec-derived parameter layout.
inline net::Params load_params(const std::string& path,
                               const net::NetworkSpec& spec) {
  auto entries = load_param_entries(path);
  net::Params params = net::init_params(spec, 0x5eed, 1.0);
  auto expected = params.named();
  if (entries.size() != expected.size())
    throw ParseError(path + ": blob holds " + std::to_string(entries.size()) +
                     " matrices, spec expects " +
                     std::to_string(expected.size()));
  auto tensors = params.all();
  for (std::size_t e = 0; e < expected.size(); ++e) {
    if (entries[e].first != expected[e].first)
      throw ParseError(path + ": matrix " + std::to_string(e) + " named \"" +
                       entries[e].first + "\", expected \"" +
                       expected[e].first + "\"");
    if (entries[e].second.rows() != expected[e].second->rows() ||
        entries[e].second.cols() != expected[e].second->cols())
      throw ParseError(path + ": shape mismatch for " + entries[e].first);
    *tensors[e] = std::move(entries[e].second);
  }
  return params;
}

// ============================================================================
// CSV
// ============================================================================

inline void save_index_csv(const std::string& path, const IndexMatrix& m) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << row[c];
    }
    out << '\n';
  }
}

inline IndexMatrix load_index_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  std::vector<std::vector<std::int32_t>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::int32_t> vals;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ','))
      try {
        vals.push_back(static_cast<std::int32_t>(std::stol(cell)));
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": malformed integer");
      }
    if (!rows.empty() && vals.size() != rows[0].size())
      throw ParseError(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError(path + ": empty CSV");
  IndexMatrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[0].size(); ++c) m(i, c) = rows[i][c];
  return m;
}

}  // namespace leangcn::io
