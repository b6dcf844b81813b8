// Command-line driver: single runs, staggering/resolution sweeps, feature
// detection on saved snapshots, image rendering, and sweep count tables.
//
// Exit codes: 0 success, 2 configuration error, 3 solver divergence or CFL
// violation, 4 IO error.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "icedyn/advection.hpp"
#include "icedyn/benchmark.hpp"
#include "icedyn/io.hpp"
#include "icedyn/lkf.hpp"
#include "icedyn/solver.hpp"

namespace fs = std::filesystem;
using namespace icedyn;

namespace {

std::string snap_dir_name(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snap_%07lds", std::lround(t));
  return buf;
}

int worker_count(std::size_t jobs) {
  if (const char* env = std::getenv("ICEDYN_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return std::min<std::size_t>(n, jobs);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return int(std::min<std::size_t>(hw ? hw : 1, jobs));
}

/// Runs one configuration, writing every snapshot into out_dir and a summary
/// JSON next to them. Returns the run statistics.
RunStats run_and_save(const RunConfig& cfg, const fs::path& out_dir, bool verbose) {
  fs::create_directories(out_dir);
  std::vector<std::string> snap_dirs;
  RunStats stats = run_benchmark(cfg, [&](const Snapshot& snap) {
    const fs::path dir = out_dir / snap_dir_name(snap.t);
    write_snapshot(snap, cfg, dir);
    snap_dirs.push_back(dir.filename().string());
    if (verbose)
      std::printf("  t = %8.0f s  (%s)\n", snap.t, dir.filename().string().c_str());
  });

  nlohmann::json summary;
  summary["staggering"] = to_string(cfg.stag);
  summary["solver"] = to_string(cfg.solver);
  summary["advection"] = to_string(cfg.advection);
  summary["nx"] = cfg.nx;
  summary["ny"] = cfg.ny;
  summary["dx"] = cfg.dx;
  summary["dt"] = cfg.dt;
  summary["steps"] = stats.steps;
  summary["initial_volume"] = stats.initial_volume;
  summary["final_volume"] = stats.final_volume;
  summary["clamped_concentration"] = stats.clamped_concentration;
  summary["snapshots"] = snap_dirs;
  write_bytes(out_dir / "run_summary.json", summary.dump(2) + "\n");
  return stats;
}

/// Detection on a saved snapshot directory; returns (report, shear raster).
std::pair<LkfReport, RegularField> detect_on_snapshot(const fs::path& dir,
                                                      const RunConfig& knobs) {
  const LoadedSnapshot snap = load_snapshot(dir);
  const int nx = snap.meta.at("nx").get<int>();
  const int ny = snap.meta.at("ny").get<int>();
  const double dx = snap.meta.at("dx").get<double>();
  const Staggering stag = staggering_from_string(snap.meta.at("staggering").get<std::string>());
  const StructuredGrid g = build_grid(nx, ny, dx);
  const TracerLoc loc = tracer_location(stag);

  const DetectionParams p = detection_from_config(knobs, dx);
  const RegularField rf = interpolate_to_regular(snap.fields.at("shear"), g, loc, p.pixel_size);
  const RegularField response = dog_filter(rf, p);
  const auto skel = binarize_and_skeletonize(response, p);
  LkfReport rep;
  rep.params = p;
  rep.segments = extract_lkf_segments(skel, response.nx, response.ny, p);
  rep.count = int(rep.segments.size());

  nlohmann::json source;
  source["snapshot"] = dir.string();
  source["staggering"] = to_string(stag);
  source["resolution_m"] = dx;
  source["time"] = snap.meta.at("time").get<double>();
  write_bytes(dir / "report.json", lkf_report_json(rep, source).dump(2) + "\n");
  return {rep, rf};
}

struct SweepJob {
  Staggering stag;
  double res_km;
  RunConfig cfg;
  fs::path dir;
};

int cmd_sweep(const std::string& config_path, const std::string& stags_csv,
              const std::string& res_csv, const std::string& out_override) {
  RunConfig base = config_path.empty() ? RunConfig{} : parse_config(config_path);
  const fs::path sweep_dir = out_override.empty() ? fs::path(base.out_dir) : fs::path(out_override);

  std::vector<SweepJob> jobs;
  std::istringstream ss(stags_csv);
  std::vector<Staggering> stags;
  for (std::string tok; std::getline(ss, tok, ',');) stags.push_back(staggering_from_string(tok));
  std::istringstream rs(res_csv);
  std::vector<double> res;
  for (std::string tok; std::getline(rs, tok, ',');) {
    const double r = iodetail::parse_num(tok, 0, "resolutions");
    if (r <= 0.0) throw ConfigError("resolution must be positive: " + tok);
    res.push_back(r);
  }
  if (stags.empty() || res.empty()) throw ConfigError("empty sweep axis");

  const double Lx = base.nx * base.dx;  // keep the physical domain fixed
  const double Ly = base.ny * base.dx;
  for (Staggering st : stags)
    for (double r : res) {
      RunConfig cfg = base;
      cfg.stag = st;
      cfg.dx = r * 1000.0;
      cfg.nx = int(std::lround(Lx / cfg.dx));
      cfg.ny = int(std::lround(Ly / cfg.dx));
      validate(cfg);
      char name[32];
      std::snprintf(name, sizeof name, "%s_%gkm", to_string(st).c_str(), r);
      jobs.push_back({st, r, cfg, sweep_dir / name});
    }

  fs::create_directories(sweep_dir);
  std::atomic<std::size_t> next{0};
  std::mutex out_mutex;
  std::vector<std::exception_ptr> errors(jobs.size());

  auto worker = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      const SweepJob& job = jobs[k];
      try {
        {
          std::lock_guard lock(out_mutex);
          std::printf("[%s] start (nx=%d dx=%g m)\n", job.dir.filename().string().c_str(),
                      job.cfg.nx, job.cfg.dx);
          std::fflush(stdout);
        }
        run_and_save(job.cfg, job.dir, /*verbose=*/false);
        const auto [rep, rf] =
            detect_on_snapshot(job.dir / snap_dir_name(job.cfg.t_end), job.cfg);
        std::lock_guard lock(out_mutex);
        std::printf("[%s] done: %d features\n", job.dir.filename().string().c_str(), rep.count);
        std::fflush(stdout);
      } catch (...) {
        errors[k] = std::current_exception();
        std::lock_guard lock(out_mutex);
        std::printf("[%s] FAILED\n", job.dir.filename().string().c_str());
        std::fflush(stdout);
      }
    }
  };

  const int nw = worker_count(jobs.size());
  std::vector<std::thread> pool;
  for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (std::size_t k = 0; k < jobs.size(); ++k)
    if (errors[k]) std::rethrow_exception(errors[k]);

  nlohmann::json index;
  for (const SweepJob& j : jobs)
    index["runs"].push_back({{"dir", j.dir.filename().string()},
                             {"staggering", to_string(j.stag)},
                             {"resolution_km", j.res_km}});
  write_bytes(sweep_dir / "sweep_index.json", index.dump(2) + "\n");
  return 0;
}

int cmd_report(const std::string& sweep_dir_s, const std::string& out_file) {
  const fs::path sweep_dir = sweep_dir_s;
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_bytes(sweep_dir / "sweep_index.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad sweep index: " + std::string(e.what()));
  }

  std::map<double, std::map<std::string, int>, std::greater<>> table;  // res -> stag -> count
  std::vector<std::string> stag_order;
  for (const auto& run : index.at("runs")) {
    const std::string stag = run.at("staggering").get<std::string>();
    const double res = run.at("resolution_km").get<double>();
    const fs::path run_dir = sweep_dir / run.at("dir").get<std::string>();
    int count = -1;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
      if (!entry.is_directory()) continue;
      const fs::path rj = entry.path() / "report.json";
      if (fs::exists(rj)) count = nlohmann::json::parse(read_bytes(rj)).at("count").get<int>();
    }
    table[res][stag] = count;
    if (std::find(stag_order.begin(), stag_order.end(), stag) == stag_order.end())
      stag_order.push_back(stag);
  }

  std::ostringstream csv;
  csv << "resolution_km";
  for (const std::string& s : stag_order) csv << "," << s;
  csv << "\n";
  for (const auto& [res, counts] : table) {
    csv << res;
    for (const std::string& s : stag_order) {
      csv << ",";
      if (auto it = counts.find(s); it != counts.end() && it->second >= 0) csv << it->second;
    }
    csv << "\n";
  }
  std::fputs(csv.str().c_str(), stdout);
  if (!out_file.empty()) write_bytes(out_file, csv.str());
  return 0;
}

int cmd_render(const std::string& field_file, std::string out_file, double vmin, double vmax,
               bool log_flag, bool linear_flag) {
  const fs::path field_path = field_file;
  const fs::path dir = field_path.parent_path();
  const std::string name = field_path.stem().string();

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_bytes(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot read meta.json next to field: " + std::string(e.what()));
  }
  const int nx = meta.at("nx").get<int>();
  const int ny = meta.at("ny").get<int>();
  const std::string stag = meta.at("staggering").get<std::string>();
  const bool vertex = meta.at("tracer_location").get<std::string>() == "vertex";

  int fx = 0, fy = 0;
  if (name == "A" || name == "H" || name == "shear" || name == "delta") {
    fx = vertex ? nx + 1 : nx;
    fy = vertex ? ny + 1 : ny;
  } else if ((name == "u" || name == "v") && (stag == "A" || stag == "B")) {
    fx = nx + 1;
    fy = ny + 1;
  } else {
    throw ConfigError("field '" + name + "' on staggering " + stag +
                      " is not a rectangular raster; render A, H, shear or delta");
  }

  // per-field display defaults
  bool log_scale = name == "shear" || name == "delta";
  double lo = 0.0, hi = 1.0;
  if (name == "A") lo = 0.9, hi = 1.0;
  else if (name == "H") lo = 0.0, hi = 0.6;
  else if (name == "u" || name == "v") lo = -0.5, hi = 0.5;
  else lo = 1e-9, hi = 1e-5;
  if (log_flag) log_scale = true;
  if (linear_flag) log_scale = false;
  if (vmin < vmax) lo = vmin, hi = vmax;

  const std::vector<double> values = read_field(field_path);
  if (int(values.size()) != fx * fy)
    throw IoError("field size does not match meta dimensions: " + field_path.string());
  if (out_file.empty()) out_file = (dir / (name + ".pgm")).string();
  write_pgm(out_file, fx, fy, render_gray(values, fx, fy, lo, hi, log_scale));
  std::printf("wrote %s (%dx%d)\n", out_file.c_str(), fx, fy);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"viscous-plastic sea-ice dynamics benchmark"};
  app.require_subcommand(1);

  std::string config_path, out_override, snapshot_dir, field_file, sweep_dir;
  std::string stags_csv = "A,B,C,CD", res_csv = "8,4,2", out_file, overlay_file;
  double vmin = 0.0, vmax = -1.0;
  bool log_flag = false, linear_flag = false;

  CLI::App* run = app.add_subcommand("run", "run one configuration, writing snapshots");
  run->add_option("config", config_path, "configuration file (INI-style)");
  run->add_option("--out", out_override, "output directory (overrides config out_dir)");

  CLI::App* sweep =
      app.add_subcommand("sweep", "run a staggering x resolution matrix and detect features");
  sweep->add_option("config", config_path, "base configuration file");
  sweep->add_option("--staggerings", stags_csv, "comma list, e.g. A,B,C,CD");
  sweep->add_option("--resolutions", res_csv, "comma list in km, e.g. 8,4,2");
  sweep->add_option("--out", out_override, "sweep output directory");

  CLI::App* detect = app.add_subcommand("detect", "detect linear features in a snapshot");
  detect->add_option("snapshot", snapshot_dir, "snapshot directory")->required();
  detect->add_option("--config", config_path, "configuration file for [detection] overrides");
  detect->add_option("--overlay", overlay_file, "write a PPM overlay image");

  CLI::App* render = app.add_subcommand("render", "render a field file to PGM");
  render->add_option("field", field_file, "field file (*.f64) inside a snapshot directory")
      ->required();
  render->add_option("--out", out_file, "output image path");
  render->add_option("--min", vmin, "lower display bound");
  render->add_option("--max", vmax, "upper display bound");
  render->add_flag("--log", log_flag, "log10 display scale");
  render->add_flag("--linear", linear_flag, "linear display scale");

  CLI::App* report = app.add_subcommand("report", "emit a CSV feature-count table for a sweep");
  report->add_option("sweep", sweep_dir, "sweep directory")->required();
  report->add_option("--out", out_file, "also write the CSV here");

  try {
    app.parse(argc, argv);

    if (run->parsed()) {
      RunConfig cfg = config_path.empty() ? RunConfig{} : parse_config(config_path);
      const fs::path out = out_override.empty() ? fs::path(cfg.out_dir) : fs::path(out_override);
      std::printf("run: %s / %s, %dx%d at dx=%g m, dt=%g s, t_end=%g s\n",
                  to_string(cfg.stag).c_str(), to_string(cfg.solver).c_str(), cfg.nx, cfg.ny,
                  cfg.dx, cfg.dt, cfg.t_end);
      const RunStats stats = run_and_save(cfg, out, /*verbose=*/true);
      std::printf("done: %ld steps, volume %.6e -> %.6e m^3\n", stats.steps,
                  stats.initial_volume, stats.final_volume);
      return 0;
    }
    if (sweep->parsed()) return cmd_sweep(config_path, stags_csv, res_csv, out_override);
    if (detect->parsed()) {
      RunConfig knobs = config_path.empty() ? RunConfig{} : parse_config(config_path);
      const auto [rep, rf] = detect_on_snapshot(snapshot_dir, knobs);
      std::printf("%d features (report.json written)\n", rep.count);
      if (!overlay_file.empty()) write_overlay(overlay_file, rf, rep.segments);
      return 0;
    }
    if (render->parsed())
      return cmd_render(field_file, out_file, vmin, vmax, log_flag, linear_flag);
    if (report->parsed()) return cmd_report(sweep_dir, out_file);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const SolverDivergence& e) {
    std::fprintf(stderr, "solver divergence: %s\n", e.what());
    return 3;
  } catch (const CflViolation& e) {
    std::fprintf(stderr, "CFL violation: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
