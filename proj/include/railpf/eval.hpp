#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "railpf/imu.hpp"
#include "railpf/scenario.hpp"

namespace railpf {

/// Planar estimate trace of one run.
struct EstimateSeries {
  std::string name;
  std::vector<double> t, p_x, p_y;
};

/// Ground truth with the unit track tangent at each sample.
struct TruthSeries {
  std::vector<double> t, d, v, p_x, p_y, heading;

  /// Heading from the direction of travel between successive distinct
  /// positions; samples at rest inherit the neighbouring direction.
  static TruthSeries from_positions(std::vector<double> t, std::vector<double> d, std::vector<double> v,
                                    std::vector<double> p_x, std::vector<double> p_y);
  static TruthSeries from_states(std::span<const TruthState> truth);
};

struct ErrorSample {
  double t = 0.0;
  double euclidean = 0.0;
  double along = 0.0;   // signed, positive ahead of the truth
  double across = 0.0;  // signed, positive left of the truth
  bool gnss_available = true;
  double p_x_hat = 0.0, p_y_hat = 0.0, p_x = 0.0, p_y = 0.0;
};

struct ErrorSeries {
  std::string name;
  std::vector<ErrorSample> samples;
};

/// Joins each estimate to the truth sample nearest in time. Estimates
/// outside the truth time span are dropped; one inside it with no truth
/// sample within T/2 (T the median truth spacing), or no overlap at all,
/// throws Error{AlignmentGap}.
ErrorSeries compute_errors(const EstimateSeries& estimates, const TruthSeries& truth);

/// Sets gnss_available: true when a fix arrived within 1.5 GNSS periods
/// (median fix spacing) before the sample.
void flag_gnss(ErrorSeries& series, std::span<const double> gnss_times);

struct OutageSpan {
  double start = 0.0;
  double end = 0.0;
};

/// Maximal runs of samples without GNSS.
std::vector<OutageSpan> outage_spans(const ErrorSeries& series);

struct CdfPoint {
  double error = 0.0;
  double probability = 0.0;
};

/// Empirical CDF of the Euclidean error: sorted values e_(i) with i/n.
std::vector<CdfPoint> error_cdf(const ErrorSeries& series);

/// e_(ceil(p n)) of the sorted values, p in [0, 1]. Throws
/// Error{EmptySeries}.
double quantile(std::span<const double> values, double p);
double quantile(const ErrorSeries& series, double p);

inline constexpr double kThreeSigmaProbability = 0.9973;

struct ErrorSummary {
  std::string name;
  std::size_t n = 0;
  double mean = 0.0, median = 0.0, rms = 0.0, three_sigma = 0.0, max = 0.0;
  double rms_gnss = 0.0, rms_outage = 0.0;  // NaN when the subset is empty
  std::size_t n_gnss = 0, n_outage = 0;
  double rms_across = 0.0;
};

ErrorSummary summarize(const ErrorSeries& series);

/// Largest Euclidean error inside [start, end).
double max_error_in(const ErrorSeries& series, double start, double end);

/// Writes errors_<run>.csv, cdf_<run>.csv, summary.csv, outages.csv and
/// plots.gp into `dir`.
void write_report(const std::filesystem::path& dir, const std::vector<ErrorSeries>& runs);

EstimateSeries read_estimates(const std::filesystem::path& path, const std::string& name);
TruthSeries read_truth(const std::filesystem::path& path);
std::string truth_csv(std::span<const TruthState> truth);

}  // namespace railpf
