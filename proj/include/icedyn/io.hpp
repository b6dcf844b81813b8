#pragma once

#include <bit>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "icedyn/benchmark.hpp"
#include "icedyn/lkf.hpp"

// Artifact plumbing: raw little-endian field files with a checksummed
// manifest, plain INI-style run configuration, and dependency-free PGM/PPM
// image output.

namespace icedyn {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Bytes, checksums, field files

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* d = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = d[v & 0xf];
  return s;
}

/// Doubles serialized byte-wise LSB-first; identical files on any host.
inline std::string encode_f64_le(const std::vector<double>& values) {
  std::string out;
  out.reserve(values.size() * 8);
  for (double x : values) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) out.push_back(char((u >> (8 * b)) & 0xff));
  }
  return out;
}

inline std::vector<double> decode_f64_le(std::string_view bytes) {
  if (bytes.size() % 8 != 0) throw IoError("field byte length not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b)
      u |= std::uint64_t(static_cast<unsigned char>(bytes[8 * k + b])) << (8 * b);
    out[k] = std::bit_cast<double>(u);
  }
  return out;
}

inline void write_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(bytes.data(), std::streamsize(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  if (!f && !f.eof()) throw IoError("read failed: " + path.string());
  return ss.str();
}

inline void write_field(const std::filesystem::path& path, const std::vector<double>& v) {
  write_bytes(path, encode_f64_le(v));
}

inline std::vector<double> read_field(const std::filesystem::path& path) {
  return decode_f64_le(read_bytes(path));
}

// ---------------------------------------------------------------------------
// Snapshot directories
//
// One file per field plus meta.json; manifest.json carries per-file sizes and
// checksums and is written last, so its presence marks a complete snapshot.

inline void write_snapshot(const Snapshot& snap, const RunConfig& cfg,
                           const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  const std::map<std::string, const std::vector<double>*> fields = {
      {"A", &snap.A},     {"H", &snap.H},         {"u", &snap.u},
      {"v", &snap.v},     {"shear", &snap.shear}, {"delta", &snap.delta}};
  static const std::map<std::string, std::string> units = {
      {"A", "1"}, {"H", "m"}, {"u", "m/s"}, {"v", "m/s"}, {"shear", "1/s"}, {"delta", "1/s"}};

  nlohmann::json meta;
  meta["format"] = "icedyn-snapshot-1";
  meta["nx"] = cfg.nx;
  meta["ny"] = cfg.ny;
  meta["dx"] = cfg.dx;
  meta["staggering"] = to_string(cfg.stag);
  meta["solver"] = to_string(cfg.solver);
  meta["time"] = snap.t;
  meta["tracer_location"] =
      tracer_location(cfg.stag) == TracerLoc::Vertex ? "vertex" : "center";
  meta["layout"] = "row-major, x fastest, y up";
  for (const auto& [name, vec] : fields) {
    meta["fields"][name] = {{"file", name + ".f64"},
                            {"count", vec->size()},
                            {"unit", units.at(name)}};
  }

  nlohmann::json manifest;
  manifest["format"] = "icedyn-manifest-1";
  manifest["staggering"] = to_string(cfg.stag);
  manifest["time"] = snap.t;
  auto record = [&](const std::string& name, std::string_view bytes) {
    manifest["files"][name] = {{"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a64(bytes))}};
  };

  for (const auto& [name, vec] : fields) {
    const std::string bytes = encode_f64_le(*vec);
    write_bytes(dir / (name + ".f64"), bytes);
    record(name + ".f64", bytes);
  }
  const std::string meta_bytes = meta.dump(2) + "\n";
  write_bytes(dir / "meta.json", meta_bytes);
  record("meta.json", meta_bytes);

  write_bytes(dir / "manifest.json", manifest.dump(2) + "\n");
}

struct LoadedSnapshot {
  nlohmann::json meta;
  std::map<std::string, std::vector<double>> fields;
};

/// Reads a snapshot directory, rejecting it if any file listed in the
/// manifest is missing or fails its checksum.
inline LoadedSnapshot load_snapshot(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_bytes(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad manifest in " + dir.string() + ": " + e.what());
  }
  std::map<std::string, std::string> raw;
  for (const auto& [name, entry] : manifest.at("files").items()) {
    std::string bytes = read_bytes(dir / name);
    if (bytes.size() != entry.at("bytes").get<std::size_t>() ||
        hex64(fnv1a64(bytes)) != entry.at("fnv1a64").get<std::string>())
      throw IoError("checksum mismatch for " + (dir / name).string());
    raw[name] = std::move(bytes);
  }
  LoadedSnapshot out;
  try {
    out.meta = nlohmann::json::parse(raw.at("meta.json"));
    for (const auto& [name, entry] : out.meta.at("fields").items()) {
      const std::string file = entry.at("file").get<std::string>();
      out.fields[name] = decode_f64_le(raw.at(file));
      if (out.fields[name].size() != entry.at("count").get<std::size_t>())
        throw IoError("field size mismatch for " + file + " in " + dir.string());
    }
  } catch (const std::out_of_range&) {
    throw IoError("snapshot in " + dir.string() + " is missing listed files");
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad meta in " + dir.string() + ": " + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Images

/// Maps t in [0,1] to 0..255 with round-half-up (midpoint -> 128).
inline std::uint8_t quantize_unit(double t) {
  if (t <= 0.0) return 0;
  if (t >= 1.0) return 255;
  const double q = std::floor(t * 255.0 + 0.5);
  return std::uint8_t(q > 255.0 ? 255.0 : q);
}

/// Grayscale raster, top row = largest y. log_scale maps through log10 first.
inline std::vector<std::uint8_t> render_gray(const std::vector<double>& values, int nx, int ny,
                                             double lo, double hi, bool log_scale) {
  require(int(values.size()) == nx * ny, "render: size mismatch");
  require(hi > lo, "render: invalid range");
  if (log_scale) require(lo > 0.0 && hi > 0.0, "render: log range must be positive");
  const double llo = log_scale ? std::log10(lo) : lo;
  const double lhi = log_scale ? std::log10(hi) : hi;
  std::vector<std::uint8_t> img(std::size_t(nx) * ny);
  for (int r = 0; r < ny; ++r) {
    const int j = ny - 1 - r;
    for (int i = 0; i < nx; ++i) {
      double v = values[std::size_t(j) * nx + i];
      if (log_scale) v = std::log10(std::max(v, 1e-300));
      img[std::size_t(r) * nx + i] = quantize_unit((v - llo) / (lhi - llo));
    }
  }
  return img;
}

inline void write_pgm(const std::filesystem::path& path, int nx, int ny,
                      const std::vector<std::uint8_t>& gray) {
  require(int(gray.size()) == nx * ny, "pgm: size mismatch");
  std::string out = "P5\n" + std::to_string(nx) + " " + std::to_string(ny) + "\n255\n";
  out.append(reinterpret_cast<const char*>(gray.data()), gray.size());
  write_bytes(path, out);
}

inline void write_ppm(const std::filesystem::path& path, int nx, int ny,
                      const std::vector<std::uint8_t>& rgb) {
  require(int(rgb.size()) == 3 * nx * ny, "ppm: size mismatch");
  std::string out = "P6\n" + std::to_string(nx) + " " + std::to_string(ny) + "\n255\n";
  out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
  write_bytes(path, out);
}

/// Detected segments drawn red over the log-scaled shear field.
inline void write_overlay(const std::filesystem::path& path, const RegularField& shear,
                          const std::vector<LkfSegment>& segments, double lo = 1e-9,
                          double hi = 1e-5) {
  const std::vector<std::uint8_t> gray = render_gray(shear.values, shear.nx, shear.ny, lo, hi,
                                                     /*log_scale=*/true);
  std::vector<std::uint8_t> rgb(gray.size() * 3);
  for (std::size_t k = 0; k < gray.size(); ++k) rgb[3 * k] = rgb[3 * k + 1] = rgb[3 * k + 2] = gray[k];
  for (const LkfSegment& s : segments)
    for (const Vec2& q : s.points) {
      const int i = int(std::lround(q.x / shear.spacing - 0.5));
      const int j = int(std::lround(q.y / shear.spacing - 0.5));
      if (i < 0 || i >= shear.nx || j < 0 || j >= shear.ny) continue;
      const std::size_t k = std::size_t(shear.ny - 1 - j) * shear.nx + i;
      rgb[3 * k] = 255;
      rgb[3 * k + 1] = 0;
      rgb[3 * k + 2] = 0;
    }
  write_ppm(path, shear.nx, shear.ny, rgb);
}

// ---------------------------------------------------------------------------
// Detection reports

inline DetectionParams detection_from_config(const RunConfig& cfg, double model_dx) {
  DetectionParams p;
  p.pixel_size = cfg.detect_pixel;
  const double scale = model_dx / p.pixel_size;
  p.k_max_px = cfg.detect_kmax_factor * scale;
  p.k_min_px = cfg.detect_kmin_factor * scale;
  p.threshold = cfg.detect_threshold;
  p.min_length = cfg.detect_min_length_factor * model_dx;
  return p;
}

inline nlohmann::json lkf_report_json(const LkfReport& rep, const nlohmann::json& source) {
  nlohmann::json j;
  j["count"] = rep.count;
  j["params"] = {{"pixel_size", rep.params.pixel_size},
                 {"k_max_px", rep.params.k_max_px},
                 {"k_min_px", rep.params.k_min_px},
                 {"threshold", rep.params.threshold},
                 {"min_length", rep.params.min_length},
                 {"merge_angle_deg", rep.params.merge_angle_deg}};
  j["source"] = source;
  j["segments"] = nlohmann::json::array();
  for (const LkfSegment& s : rep.segments) {
    nlohmann::json pts = nlohmann::json::array();
    for (const Vec2& q : s.points) pts.push_back({q.x, q.y});
    j["segments"].push_back({{"length", s.length}, {"points", std::move(pts)}});
  }
  return j;
}

// ---------------------------------------------------------------------------
// Configuration
//
// Plain "key = value" lines grouped under [grid], [run], [solver], [forcing]
// and [detection] sections; '#' or ';' starts a comment. Unknown sections or
// keys are rejected with the offending line number; absent keys keep the
// benchmark defaults.

namespace iodetail {

inline std::string trim(std::string s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.erase(s.begin());
  while (!s.empty() && is_space(s.back())) s.pop_back();
  return s;
}

inline double parse_num(const std::string& v, int line, const std::string& key) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": invalid number for '" + key + "'");
  }
  if (trim(v.substr(used)) != "")
    throw ConfigError("line " + std::to_string(line) + ": trailing text after '" + key + "'");
  return x;
}

inline int parse_int(const std::string& v, int line, const std::string& key) {
  const double x = parse_num(v, line, key);
  if (x != std::floor(x) || std::abs(x) > 1e9)
    throw ConfigError("line " + std::to_string(line) + ": '" + key + "' must be an integer");
  return int(x);
}

}  // namespace iodetail

inline RunConfig parse_config_text(const std::string& text, RunConfig cfg = {}) {
  using iodetail::parse_int;
  using iodetail::parse_num;
  using iodetail::trim;

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    if (const auto pos = s.find_first_of("#;"); pos != std::string::npos) s.erase(pos);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("line " + std::to_string(line) + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section != "grid" && section != "run" && section != "solver" &&
          section != "forcing" && section != "detection")
        throw ConfigError("line " + std::to_string(line) + ": unknown section '" + section + "'");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("line " + std::to_string(line) + ": empty key or value");

    auto unknown = [&]() -> ConfigError {
      return ConfigError("line " + std::to_string(line) + ": unknown key '" + key +
                         "' in section [" + section + "]");
    };
    auto parse_enum = [&](auto fn) {
      try {
        return fn(val);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("line " + std::to_string(line) + ": " + e.what());
      }
    };

    if (section == "grid") {
      if (key == "nx") cfg.nx = parse_int(val, line, key);
      else if (key == "ny") cfg.ny = parse_int(val, line, key);
      else if (key == "dx") cfg.dx = parse_num(val, line, key);
      else throw unknown();
    } else if (section == "run") {
      if (key == "staggering") cfg.stag = parse_enum(staggering_from_string);
      else if (key == "solver") cfg.solver = parse_enum(solver_from_string);
      else if (key == "advection") cfg.advection = parse_enum(advection_from_string);
      else if (key == "dt") cfg.dt = parse_num(val, line, key);
      else if (key == "t_end") cfg.t_end = parse_num(val, line, key);
      else if (key == "snapshot_interval") cfg.snapshot_interval = parse_num(val, line, key);
      else if (key == "gamma_s") cfg.gamma_s = parse_num(val, line, key);
      else if (key == "out_dir") cfg.out_dir = val;
      else throw unknown();
    } else if (section == "solver") {
      if (key == "mevp_alpha") cfg.mevp_alpha = parse_num(val, line, key);
      else if (key == "mevp_beta") cfg.mevp_beta = parse_num(val, line, key);
      else if (key == "mevp_nsub") cfg.mevp_nsub = parse_int(val, line, key);
      else if (key == "picard_max_outer") cfg.picard.max_outer = parse_int(val, line, key);
      else if (key == "picard_nonlinear_tol") cfg.picard.nonlinear_tol = parse_num(val, line, key);
      else if (key == "picard_linear_tol") cfg.picard.linear_tol = parse_num(val, line, key);
      else if (key == "picard_krylov_dim") cfg.picard.krylov_dim = parse_int(val, line, key);
      else if (key == "picard_max_linear_iter")
        cfg.picard.max_linear_iter = parse_int(val, line, key);
      else throw unknown();
    } else if (section == "forcing") {
      if (key == "cyclone_start_x") cfg.forcing.start.x = parse_num(val, line, key);
      else if (key == "cyclone_start_y") cfg.forcing.start.y = parse_num(val, line, key);
      else if (key == "cyclone_speed_x") cfg.forcing.speed.x = parse_num(val, line, key);
      else if (key == "cyclone_speed_y") cfg.forcing.speed.y = parse_num(val, line, key);
      else if (key == "cyclone_alpha_deg") cfg.forcing.alpha_deg = parse_num(val, line, key);
      else if (key == "cyclone_vmax") cfg.forcing.v_max = parse_num(val, line, key);
      else if (key == "tilt_x") cfg.tilt.x = parse_num(val, line, key);
      else if (key == "tilt_y") cfg.tilt.y = parse_num(val, line, key);
      else throw unknown();
    } else if (section == "detection") {
      if (key == "pixel") cfg.detect_pixel = parse_num(val, line, key);
      else if (key == "threshold") cfg.detect_threshold = parse_num(val, line, key);
      else if (key == "k_max_factor") cfg.detect_kmax_factor = parse_num(val, line, key);
      else if (key == "k_min_factor") cfg.detect_kmin_factor = parse_num(val, line, key);
      else if (key == "min_length_factor")
        cfg.detect_min_length_factor = parse_num(val, line, key);
      else throw unknown();
    } else {
      throw ConfigError("line " + std::to_string(line) + ": key before any [section]");
    }
  }

  try {
    validate(cfg);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_bytes(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config_text(text);
}

}  // namespace icedyn
