#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "railpf/cli.hpp"
#include "railpf/io.hpp"

using namespace railpf;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("railpf_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

const char* kSmallSpec = R"(name = "small"
spacing = 2
segment.0 = "straight length=300"
segment.1 = "clothoid length=40"
segment.2 = "arc length=200 radius=400 turn=left"
segment.3 = "clothoid length=40"
segment.4 = "straight length=300"
phase.0 = "stop duration=15"
phase.1 = "accelerate target=12 rate=0.5"
phase.2 = "cruise distance=500"
phase.3 = "brake target=0 rate=0.5"
phase.4 = "stop duration=5"
outage.0 = "40 55"
)";

void check_single_error_line(const Result& r, const std::string& code) {
  CHECK(r.code != 0);
  CHECK(r.err.rfind("error: " + code + ": ", 0) == 0);
  CHECK(r.err.find('\n') == r.err.size() - 1);
}

}  // namespace

TEST_CASE("cli usage") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  const Result v = cli({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find(kToolVersion) != std::string::npos);
}

TEST_CASE("build-map") {
  TempDir dir("build_map");
  write_text(dir / "line.csv", "x,y,z\n0,0,0\n10,0,0\n20,0,0\n30,0,0\n40,0,0\n");
  const Result r = cli({"build-map", "--in", dir / "line.csv", "--out", dir / "a.csv"});
  CHECK(r.code == 0);
  const CsvTable t = read_csv(dir / "a.csv", kMapColumns);
  for (const auto& row : t.rows) CHECK(row[t.column("kappa")] == 0.0);

  CHECK(cli({"build-map", "--in", dir / "line.csv", "--out", dir / "b.csv"}).code == 0);
  CHECK(read_text(dir / "a.csv") == read_text(dir / "b.csv"));

  write_text(dir / "bad.csv", "x,y,z\n0,0,0\n10,0,0\n20,zero,0\n30,0,0\n");
  const Result bad = cli({"build-map", "--in", dir / "bad.csv", "--out", dir / "c.csv"});
  check_single_error_line(bad, "ParseError");
  CHECK(bad.err.find("line 4") != std::string::npos);
}

TEST_CASE("simulate errors") {
  TempDir dir("simulate_errors");
  const Result unknown = cli({"simulate", "--preset", "bumpy", "--out", dir / "x"});
  check_single_error_line(unknown, "InvalidSpec");
  CHECK(unknown.err.find("mixed-outages") != std::string::npos);
  CHECK(unknown.err.find("straight-indefinite") != std::string::npos);

  std::string spec = kSmallSpec;
  spec.replace(spec.find("radius=400"), 10, "radius=-400");
  write_text(dir / "neg.toml", spec);
  const Result neg = cli({"simulate", "--spec", dir / "neg.toml", "--out", dir / "y"});
  check_single_error_line(neg, "InvalidSpec");
  CHECK(neg.err.find("segment.2.radius") != std::string::npos);
}

TEST_CASE("simulate, run and eval end to end") {
  TempDir dir("pipeline");
  write_text(dir / "small.toml", kSmallSpec);
  REQUIRE(cli({"simulate", "--spec", dir / "small.toml", "--seed", "3", "--out", dir / "sc"}).code == 0);
  for (const char* f : {"scenario.toml", "raw.csv", "map.csv", "imu.csv", "gnss.csv", "truth.csv"}) {
    CHECK(fs::exists(dir.path / "sc" / f));
  }
  REQUIRE(cli({"simulate", "--spec", dir / "small.toml", "--seed", "3", "--out", dir / "sc2"}).code == 0);
  for (const char* f : {"imu.csv", "gnss.csv", "truth.csv", "map.csv"}) {
    CHECK(read_text(dir.path / "sc" / f) == read_text(dir.path / "sc2" / f));
  }

  const std::string sc = dir / "sc";
  const Result pf = cli({"run", "--filter", "pf", "--map", sc + "/map.csv", "--imu", sc + "/imu.csv", "--gnss",
                         sc + "/gnss.csv", "--seed", "1", "--out", dir / "pf"});
  REQUIRE(pf.code == 0);
  const Result ekf = cli({"run", "--filter", "ekfmm", "--map", sc + "/map.csv", "--imu", sc + "/imu.csv", "--gnss",
                          sc + "/gnss.csv", "--out", dir / "ekf"});
  REQUIRE(ekf.code == 0);
  CHECK(fs::exists(dir.path / "pf" / "manifest.txt"));
  const CsvTable ekf_est = read_csv(dir.path / "ekf" / "estimates.csv");
  CHECK_NOTHROW(ekf_est.column("trace_P"));
  const CsvTable pf_est = read_csv(dir.path / "pf" / "estimates.csv");
  CHECK_NOTHROW(pf_est.column("n_eff"));

  const std::string manifest = read_text(dir.path / "pf" / "manifest.txt");
  CHECK(manifest.find("imu.csv") != std::string::npos);
  CHECK(manifest.find("n_particles") != std::string::npos);

  const Result ev = cli({"eval", "--runs", "pf=" + (dir / "pf") + "/estimates.csv", "--runs",
                         "ekfmm=" + (dir / "ekf") + "/estimates.csv", "--truth", sc + "/truth.csv", "--gnss",
                         sc + "/gnss.csv", "--out", dir / "report"});
  REQUIRE(ev.code == 0);
  const std::string summary = read_text(dir.path / "report" / "summary.csv");
  CHECK(summary.find("\npf,") != std::string::npos);
  CHECK(summary.find("\nekfmm,") != std::string::npos);
  // Both filters stay on a few metres of the truth on this short run.
  std::istringstream lines(summary);
  std::string line;
  std::getline(lines, line);
  CHECK(line.rfind("run,n,mean,median,rms,p3sigma,max,", 0) == 0);
  while (std::getline(lines, line)) {
    std::istringstream cells(line);
    std::string cell;
    for (int i = 0; i < 7; ++i) std::getline(cells, cell, ',');
    CHECK(std::stod(cell) < 10.0);
  }
}

TEST_CASE("run and eval failures") {
  TempDir dir("failures");
  const Result missing = cli({"run", "--filter", "pf", "--map", dir / "nope.csv", "--imu", dir / "i.csv", "--gnss",
                              dir / "g.csv", "--out", dir / "o"});
  check_single_error_line(missing, "IoError");

  const Result filter = cli({"run", "--filter", "kalman", "--map", dir / "nope.csv", "--imu", dir / "i.csv",
                             "--gnss", dir / "g.csv", "--out", dir / "o"});
  CHECK(filter.code == 2);

  write_text(dir / "est.csv", "t,p_x_hat,p_y_hat\n500,0,0\n501,0,0\n");
  write_text(dir / "truth.csv", "t,d,v,p_x,p_y\n0,0,0,0,0\n1,1,1,1,0\n2,2,1,2,0\n");
  const Result gap = cli({"eval", "--runs", "x=" + (dir / "est.csv"), "--truth", dir / "truth.csv", "--out",
                          dir / "r"});
  check_single_error_line(gap, "AlignmentGap");
}
