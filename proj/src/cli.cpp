#include "railpf/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>

#include "railpf/config.hpp"
#include "railpf/error.hpp"
#include "railpf/eval.hpp"
#include "railpf/io.hpp"
#include "railpf/parallel.hpp"
#include "railpf/pipeline.hpp"
#include "railpf/scenario.hpp"
#include "railpf/seed.hpp"

namespace fs = std::filesystem;

namespace railpf {

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_hash(const fs::path& path) { return hex(fnv1a64(read_text(path))); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

// ---- build-map

struct BuildMapArgs {
  std::string in, out, id;
  double rdp_epsilon = BuildOptions{}.rdp_epsilon;
  double spacing = BuildOptions{}.max_knot_spacing;
};

void cmd_build_map(const BuildMapArgs& a, std::ostream& out) {
  const auto raw = read_raw(a.in);
  BuildOptions opts;
  opts.id = a.id.empty() ? fs::path(a.in).stem().string() : a.id;
  opts.rdp_epsilon = a.rdp_epsilon;
  opts.max_knot_spacing = a.spacing;
  const TrackMap map = build_map(raw, opts);
  write_text(a.out, map_csv(map));
  out << "map " << opts.id << ": " << map.size() << " points, " << format_number(map.length()) << " m\n";
}

// ---- simulate

struct SimulateArgs {
  std::string preset, spec, out;
  std::optional<std::uint64_t> seed;
};

Scenario load_scenario(const std::string& preset, const std::string& spec_file,
                       std::optional<std::uint64_t> seed) {
  if (!preset.empty() && !spec_file.empty()) {
    throw Error(ErrorCode::InvalidConfig, "give either --preset or --spec, not both");
  }
  if (preset.empty() && spec_file.empty()) throw Error(ErrorCode::InvalidConfig, "one of --preset or --spec is required");
  ScenarioSpec spec;
  std::uint64_t s = seed.value_or(0);
  if (!preset.empty()) {
    spec = preset_spec(preset);
  } else {
    const KeyValues kv = KeyValues::load(spec_file);
    const std::uint64_t file_seed = kv.get_uint("seed", 0);
    spec = scenario_spec_from(kv);
    kv.reject_unused(spec_file);
    s = seed.value_or(file_seed);
  }
  return make_scenario(spec, s);
}

void write_bundle(const Scenario& sc, const fs::path& dir) {
  ensure_dir(dir);
  KeyValues kv = to_keyvalues(sc.spec);
  kv.set("seed", sc.seed);
  write_text(dir / "scenario.toml", kv.dump());
  write_text(dir / "raw.csv", raw_csv(sc.track.raw));
  write_text(dir / "map.csv", map_csv(sc.track.map));
  write_text(dir / "imu.csv", imu_csv(sc.sensors.imu));
  write_text(dir / "gnss.csv", gnss_csv(sc.sensors.gnss));
  write_text(dir / "truth.csv", truth_csv(sc.truth));
}

void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const Scenario sc = load_scenario(a.preset, a.spec, a.seed);
  write_bundle(sc, a.out);
  out << "scenario " << sc.spec.name << " seed " << sc.seed << ": " << sc.sensors.imu.size() << " IMU, "
      << sc.sensors.gnss.size() << " GNSS samples\n";
}

// ---- run

struct RunArgs {
  std::string filter = "pf";
  std::string map, imu, gnss, config, out;
  std::uint64_t seed = 0;
};

void execute_run(const RunArgs& a, const TrackMap& map, const std::vector<ImuSample>& imu,
                 const std::vector<GnssSample>& gnss, const KeyValues& config, const std::string& config_source) {
  if (a.filter != "pf" && a.filter != "ekfmm") {
    throw Error(ErrorCode::InvalidConfig, "--filter must be pf or ekfmm, got '" + a.filter + "'");
  }
  const std::optional<Prior> prior = prior_from(config);
  std::optional<FilterConfig> pf_cfg;
  std::optional<EkfConfig> ekf_cfg;
  if (a.filter == "pf") {
    pf_cfg = filter_config_from(config);
  } else {
    ekf_cfg = ekf_config_from(config);
  }
  config.reject_unused(config_source);

  const fs::path dir(a.out);
  ensure_dir(dir);
  KeyValues manifest;
  manifest.set("tool", "railpf");
  manifest.set("version", kToolVersion);
  manifest.set("filter", a.filter);
  manifest.set("seed", a.seed);
  manifest.set("filter_seed", derive_seed(a.seed, "pf"));
  manifest.set("input.map", fs::path(a.map).filename().string());
  manifest.set("input.imu", fs::path(a.imu).filename().string());
  manifest.set("input.gnss", fs::path(a.gnss).filename().string());
  manifest.set("hash.map", file_hash(a.map));
  manifest.set("hash.imu", file_hash(a.imu));
  manifest.set("hash.gnss", file_hash(a.gnss));
  if (!a.config.empty()) {
    manifest.set("input.config", fs::path(a.config).filename().string());
    manifest.set("hash.config", file_hash(a.config));
  }
  manifest.set("data.imu_samples", static_cast<std::uint64_t>(imu.size()));
  manifest.set("data.gnss_samples", static_cast<std::uint64_t>(gnss.size()));
  if (!imu.empty()) {
    manifest.set("data.t_first", imu.front().t);
    manifest.set("data.t_last", imu.back().t);
  }
  manifest.merge(pf_cfg ? to_keyvalues(*pf_cfg) : to_keyvalues(*ekf_cfg), "config.");
  manifest.set("config.prior", config.get_string("prior", "gnss"));
  write_text(dir / "manifest.txt", manifest.dump());

  KeyValues diag;
  if (pf_cfg) {
    const PfRun run = run_particle_filter(map, imu, gnss, *pf_cfg, derive_seed(a.seed, "pf"), prior);
    write_text(dir / "estimates.csv", estimates_csv(run));
    diag.set("steps", static_cast<std::uint64_t>(run.rows.size()));
    diag.set("reinitializations", static_cast<std::uint64_t>(run.reinitializations));
    diag.set("gnss_fixes", static_cast<std::uint64_t>(run.gnss_fixes));
    diag.set("gnss_residual_mean_x", run.gnss_residual_mean.x());
    diag.set("gnss_residual_mean_y", run.gnss_residual_mean.y());
    diag.set("bias_a_x", run.final_bias.a_x);
    diag.set("bias_a_y", run.final_bias.a_y);
    diag.set("bias_omega_z", run.final_bias.omega_z);
    diag.set("standstill_phases", static_cast<std::uint64_t>(run.standstill_phases));
  } else {
    const EkfRun run = run_ekf(map, imu, gnss, *ekf_cfg, prior);
    write_text(dir / "estimates.csv", estimates_csv(run));
    diag.set("steps", static_cast<std::uint64_t>(run.rows.size()));
    diag.set("bias_a_x", run.final_bias.a_x);
    diag.set("bias_a_y", run.final_bias.a_y);
    diag.set("bias_omega_z", run.final_bias.omega_z);
    diag.set("standstill_phases", static_cast<std::uint64_t>(run.standstill_phases));
  }
  write_text(dir / "diagnostics.txt", diag.dump());
}

KeyValues load_config(const std::string& path) {
  return path.empty() ? KeyValues{} : KeyValues::load(path);
}

void cmd_run(const RunArgs& a, std::ostream& out) {
  const KeyValues config = load_config(a.config);
  const TrackMap map = read_map(a.map);
  const auto imu = read_imu(a.imu);
  const auto gnss = read_gnss(a.gnss);
  execute_run(a, map, imu, gnss, config, a.config);
  out << "run " << a.filter << ": wrote " << (fs::path(a.out) / "estimates.csv").string() << "\n";
}

// ---- eval

struct EvalArgs {
  std::vector<std::string> runs;
  std::string truth, gnss, out;
};

std::pair<std::string, fs::path> parse_run_arg(const std::string& arg) {
  const std::size_t eq = arg.find('=');
  if (eq != std::string::npos) return {arg.substr(0, eq), arg.substr(eq + 1)};
  fs::path p(arg);
  if (fs::is_directory(p)) p /= "estimates.csv";
  std::string name = p.parent_path().filename().string();
  if (name.empty()) name = p.stem().string();
  return {name, p};
}

void print_summary(const std::vector<ErrorSeries>& runs, std::ostream& out) {
  out << "run,n,mean,median,rms,p3sigma,max,rms_gnss,rms_outage\n";
  for (const ErrorSeries& r : runs) {
    const ErrorSummary s = summarize(r);
    out << s.name << "," << s.n;
    for (double x : {s.mean, s.median, s.rms, s.three_sigma, s.max, s.rms_gnss, s.rms_outage}) {
      out << "," << format_number(x);
    }
    out << "\n";
  }
}

std::vector<ErrorSeries> evaluate(const std::vector<std::pair<std::string, fs::path>>& runs,
                                  const TruthSeries& truth, const std::optional<std::vector<double>>& gnss_times) {
  std::vector<ErrorSeries> out;
  for (const auto& [name, path] : runs) {
    if (name.empty() || name.find_first_of("/\\,'\" ") != std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "invalid run name '" + name + "'");
    }
    for (const ErrorSeries& e : out) {
      if (e.name == name) throw Error(ErrorCode::InvalidConfig, "duplicate run name '" + name + "'");
    }
    ErrorSeries e = compute_errors(read_estimates(path, name), truth);
    if (gnss_times) flag_gnss(e, *gnss_times);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<double> gnss_times_of(const std::vector<GnssSample>& gnss) {
  std::vector<double> t;
  for (const GnssSample& g : gnss) t.push_back(g.t);
  return t;
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  std::vector<std::pair<std::string, fs::path>> runs;
  for (const std::string& r : a.runs) runs.push_back(parse_run_arg(r));
  const TruthSeries truth = read_truth(a.truth);
  std::optional<std::vector<double>> gnss_times;
  if (!a.gnss.empty()) gnss_times = gnss_times_of(read_gnss(a.gnss));
  const auto series = evaluate(runs, truth, gnss_times);
  write_report(a.out, series);
  print_summary(series, out);
}

// ---- compare

struct CompareArgs {
  std::string preset, spec, out, pf_config, ekf_config;
  std::optional<std::uint64_t> seed;
};

void cmd_compare(const CompareArgs& a, std::ostream& out) {
  const Scenario sc = load_scenario(a.preset, a.spec, a.seed);
  const fs::path root(a.out);
  const fs::path bundle = root / "scenario";
  write_bundle(sc, bundle);

  const KeyValues pf_kv = load_config(a.pf_config);
  const KeyValues ekf_kv = load_config(a.ekf_config);
  parallel_for(2, [&](std::size_t i) {
    RunArgs r;
    r.filter = i == 0 ? "pf" : "ekfmm";
    r.map = (bundle / "map.csv").string();
    r.imu = (bundle / "imu.csv").string();
    r.gnss = (bundle / "gnss.csv").string();
    r.config = i == 0 ? a.pf_config : a.ekf_config;
    r.seed = sc.seed;
    r.out = (root / r.filter).string();
    execute_run(r, sc.track.map, sc.sensors.imu, sc.sensors.gnss, i == 0 ? pf_kv : ekf_kv, r.config);
  });

  const auto series = evaluate({{"pf", root / "pf" / "estimates.csv"}, {"ekfmm", root / "ekfmm" / "estimates.csv"}},
                               read_truth(bundle / "truth.csv"),
                               gnss_times_of(sc.sensors.gnss));
  write_report(root / "report", series);
  print_summary(series, out);
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Map-based train localization: particle filter and EKF baseline", "railpf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("railpf ") + kToolVersion);

  BuildMapArgs bm;
  auto* build = app.add_subcommand("build-map", "Build a track map from a raw x,y,z polyline");
  build->add_option("--in", bm.in, "raw polyline CSV (x,y,z)")->required();
  build->add_option("--out", bm.out, "map CSV to write")->required();
  build->add_option("--rdp-epsilon", bm.rdp_epsilon, "simplification tolerance for the spline knots [m]");
  build->add_option("--spacing", bm.spacing, "largest spline knot spacing [m]");
  build->add_option("--id", bm.id, "map identifier (default: input file stem)");

  SimulateArgs sim;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scenario bundle");
  auto* sim_preset = simulate->add_option("--preset", sim.preset, "built-in scenario name");
  simulate->add_option("--spec", sim.spec, "scenario key-value file")->excludes(sim_preset);
  auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "master seed");
  simulate->add_option("--out", sim.out, "output directory")->required();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a filter over logged data");
  run_cmd->add_option("--filter", run.filter, "pf or ekfmm")->check(CLI::IsMember({"pf", "ekfmm"}));
  run_cmd->add_option("--map", run.map, "map CSV")->required();
  run_cmd->add_option("--imu", run.imu, "IMU CSV")->required();
  run_cmd->add_option("--gnss", run.gnss, "GNSS CSV")->required();
  run_cmd->add_option("--config", run.config, "filter key-value config");
  run_cmd->add_option("--seed", run.seed, "master seed");
  run_cmd->add_option("--out", run.out, "output directory")->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate runs against ground truth");
  eval->add_option("--runs", ev.runs, "estimate CSVs or run directories, optionally name=path")->required();
  eval->add_option("--truth", ev.truth, "truth CSV")->required();
  eval->add_option("--gnss", ev.gnss, "GNSS CSV used to flag outages");
  eval->add_option("--out", ev.out, "report directory")->required();

  CompareArgs cmp;
  std::uint64_t cmp_seed = 0;
  auto* compare = app.add_subcommand("compare", "Simulate, run both filters and evaluate");
  auto* cmp_preset = compare->add_option("--preset", cmp.preset, "built-in scenario name");
  compare->add_option("--spec", cmp.spec, "scenario key-value file")->excludes(cmp_preset);
  auto* cmp_seed_opt = compare->add_option("--seed", cmp_seed, "master seed");
  compare->add_option("--pf-config", cmp.pf_config, "particle filter config");
  compare->add_option("--ekf-config", cmp.ekf_config, "EKF config");
  compare->add_option("--out", cmp.out, "output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << "railpf " << kToolVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: UsageError: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (*build) {
      cmd_build_map(bm, out);
    } else if (*simulate) {
      if (sim_seed_opt->count()) sim.seed = sim_seed;
      cmd_simulate(sim, out);
    } else if (*run_cmd) {
      cmd_run(run, out);
    } else if (*eval) {
      cmd_eval(ev, out);
    } else if (*compare) {
      if (cmp_seed_opt->count()) cmp.seed = cmp_seed;
      cmd_compare(cmp, out);
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: Internal: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace railpf
