#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "railpf/error.hpp"
#include "railpf/eval.hpp"
#include "railpf/io.hpp"

using namespace railpf;
namespace fs = std::filesystem;

namespace {

// Truth moving east at 10 m/s, sampled at 50 Hz.
TruthSeries east_truth(std::size_t n = 500) {
  std::vector<double> t, d, v, x, y;
  for (std::size_t k = 0; k < n; ++k) {
    t.push_back(0.02 * k);
    d.push_back(0.2 * k);
    v.push_back(10.0);
    x.push_back(0.2 * k);
    y.push_back(0.0);
  }
  return TruthSeries::from_positions(t, d, v, x, y);
}

EstimateSeries offset(const TruthSeries& truth, double dx, double dy) {
  EstimateSeries e{"run", truth.t, truth.p_x, truth.p_y};
  for (double& x : e.p_x) x += dx;
  for (double& y : e.p_y) y += dy;
  return e;
}

ErrorSeries with_errors(std::vector<double> errors) {
  ErrorSeries s{"x", {}};
  for (std::size_t i = 0; i < errors.size(); ++i) {
    ErrorSample e;
    e.t = static_cast<double>(i);
    e.euclidean = errors[i];
    s.samples.push_back(e);
  }
  return s;
}

}  // namespace

TEST_CASE("compute_errors examples") {
  const TruthSeries truth = east_truth();
  const ErrorSeries zero = compute_errors(offset(truth, 0, 0), truth);
  CHECK(zero.samples.size() == truth.t.size());
  for (const ErrorSample& e : zero.samples) {
    CHECK(e.euclidean == 0.0);
    CHECK(e.along == 0.0);
    CHECK(e.across == 0.0);
  }
  const ErrorSeries ahead = compute_errors(offset(truth, 3, 0), truth);
  for (const ErrorSample& e : ahead.samples) {
    CHECK(e.along == doctest::Approx(3.0));
    CHECK(e.across == doctest::Approx(0.0));
    CHECK(e.euclidean == doctest::Approx(3.0));
  }
  const ErrorSeries tri = compute_errors(offset(truth, 3, 4), truth);
  for (const ErrorSample& e : tri.samples) {
    CHECK(e.euclidean == doctest::Approx(5.0));
    CHECK(e.across == doctest::Approx(4.0));
  }
}

TEST_CASE("along and across decompose the euclidean error") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 5.0);
  const double heading = 0.7;
  std::vector<double> t, d, v, x, y;
  for (int k = 0; k < 200; ++k) {
    t.push_back(0.1 * k);
    d.push_back(k);
    v.push_back(10.0);
    x.push_back(k * std::cos(heading));
    y.push_back(k * std::sin(heading));
  }
  const TruthSeries truth = TruthSeries::from_positions(t, d, v, x, y);
  EstimateSeries est{"r", t, x, y};
  for (std::size_t k = 0; k < t.size(); ++k) {
    est.p_x[k] += n(rng);
    est.p_y[k] += n(rng);
  }
  for (const ErrorSample& e : compute_errors(est, truth).samples) {
    CHECK(std::abs(e.along * e.along + e.across * e.across - e.euclidean * e.euclidean) < 1e-9);
  }
}

TEST_CASE("compute_errors alignment") {
  const TruthSeries truth = east_truth(100);
  EstimateSeries disjoint{"r", {100.0, 101.0}, {0, 0}, {0, 0}};
  try {
    compute_errors(disjoint, truth);
    FAIL("expected AlignmentGap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AlignmentGap);
  }
  // Within T/2 joins to the nearest sample; inside the span but off-grid fails.
  EstimateSeries near{"r", {0.409}, {0.0}, {0.0}};
  CHECK(compute_errors(near, truth).samples[0].p_x == doctest::Approx(4.0));
  TruthSeries gappy = truth;
  gappy.t[50] += 0.5;
  for (std::size_t k = 51; k < gappy.t.size(); ++k) gappy.t[k] += 0.5;
  EstimateSeries mid{"r", {1.25}, {0.0}, {0.0}};
  CHECK_THROWS_AS(compute_errors(mid, gappy), Error);
}

TEST_CASE("from_positions heading at rest") {
  const TruthSeries s = TruthSeries::from_positions({0, 1, 2, 3}, {0, 0, 1, 1}, {0, 0, 1, 0}, {0, 0, 0, 0},
                                                    {0, 0, 1, 1});
  for (double h : s.heading) CHECK(h == doctest::Approx(M_PI / 2));
}

TEST_CASE("flag_gnss and outage_spans") {
  ErrorSeries s = with_errors(std::vector<double>(30, 1.0));
  std::vector<double> fixes;
  for (int i = 0; i < 30; ++i) {
    if (i < 10 || i >= 20) fixes.push_back(i);
  }
  flag_gnss(s, fixes);
  for (const ErrorSample& e : s.samples) {
    // The 1.5-period window keeps sample 10 flagged.
    CHECK(e.gnss_available == (e.t <= 10.0 || e.t >= 20.0));
  }
  const auto spans = outage_spans(s);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].start == 11.0);
  CHECK(spans[0].end == 19.0);

  ErrorSeries none = with_errors({1, 2, 3});
  flag_gnss(none, {});
  CHECK(outage_spans(none).size() == 1);
}

TEST_CASE("error_cdf and quantile") {
  const ErrorSeries constant = with_errors(std::vector<double>(10, 2.0));
  const auto cdf = error_cdf(constant);
  REQUIRE(cdf.size() == 1);
  CHECK(cdf[0].error == 2.0);
  CHECK(cdf[0].probability == 1.0);
  CHECK(quantile(constant, 0.5) == 2.0);

  std::vector<double> ramp;
  for (int i = 1; i <= 100; ++i) ramp.push_back(i);
  CHECK(quantile(ramp, 0.95) == 95.0);
  CHECK(quantile(ramp, 0.9973) == 100.0);
  CHECK(quantile(ramp, 0.0) == 1.0);
  CHECK(quantile(ramp, 1.0) == 100.0);

  CHECK_THROWS_AS(error_cdf(with_errors({})), Error);
  try {
    quantile(std::vector<double>{}, 0.5);
    FAIL("expected EmptySeries");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySeries);
  }
}

TEST_CASE("quantile is monotone and the CDF reaches 1") {
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> ex(1.0);
  for (int c = 0; c < 50; ++c) {
    std::vector<double> v(1 + c * 7);
    for (double& x : v) x = ex(rng);
    double last = -1.0;
    for (double p = 0.0; p <= 1.0; p += 0.01) {
      const double q = quantile(v, p);
      CHECK(q >= last);
      last = q;
    }
    const auto cdf = error_cdf(with_errors(v));
    CHECK(cdf.back().probability == 1.0);
    for (std::size_t i = 1; i < cdf.size(); ++i) {
      CHECK(cdf[i].error > cdf[i - 1].error);
      CHECK(cdf[i].probability > cdf[i - 1].probability);
    }
  }
}

TEST_CASE("summarize") {
  ErrorSeries s = with_errors({1, 2, 3, 4});
  s.samples[2].gnss_available = false;
  s.samples[3].gnss_available = false;
  const ErrorSummary r = summarize(s);
  CHECK(r.n == 4);
  CHECK(r.mean == 2.5);
  CHECK(r.max == 4.0);
  CHECK(r.three_sigma == 4.0);
  CHECK(r.rms == doctest::Approx(std::sqrt(7.5)));
  CHECK(r.rms_gnss == doctest::Approx(std::sqrt(2.5)));
  CHECK(r.rms_outage == doctest::Approx(std::sqrt(12.5)));
  CHECK(r.n_gnss == 2);
  CHECK(max_error_in(s, 1.0, 3.0) == 3.0);
}

TEST_CASE("write_report layout") {
  const fs::path dir = fs::temp_directory_path() / "railpf_test_report";
  fs::remove_all(dir);
  ErrorSeries a = with_errors({1, 2, 3, 4, 5});
  a.name = "pf";
  ErrorSeries b = with_errors({2, 2, 2, 2, 2});
  b.name = "ekfmm";
  write_report(dir, {a, b});
  for (const char* f : {"errors_pf.csv", "errors_ekfmm.csv", "cdf_pf.csv", "cdf_ekfmm.csv", "summary.csv",
                        "outages.csv", "plots.gp"}) {
    CHECK(fs::exists(dir / f));
  }
  const std::string text = read_text(dir / "summary.csv");
  CHECK(text.find("pf,5,3,") != std::string::npos);
  CHECK(text.find("ekfmm,5,2,") != std::string::npos);
  // No outages: no shaded rectangles.
  CHECK(read_text(dir / "plots.gp").find("rect from") == std::string::npos);

  a.samples[1].gnss_available = false;
  a.samples[2].gnss_available = false;
  write_report(dir, {a, b});
  CHECK(read_text(dir / "plots.gp").find("rect from") != std::string::npos);
  const std::string outages = read_text(dir / "outages.csv");
  CHECK(outages.find("outage,start,end,max_pf,max_ekfmm") == 0);
  CHECK(outages.find("\n0,1,2,3,2") != std::string::npos);
  fs::remove_all(dir);
}
