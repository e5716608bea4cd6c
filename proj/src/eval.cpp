#include "railpf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "railpf/error.hpp"
#include "railpf/io.hpp"

namespace railpf {

namespace {

double median_spacing(std::span<const double> t) {
  if (t.size() < 2) return 0.0;
  std::vector<double> diffs(t.size() - 1);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) diffs[i] = t[i + 1] - t[i];
  std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
  return diffs[diffs.size() / 2];
}

double rms(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

TruthSeries TruthSeries::from_positions(std::vector<double> t, std::vector<double> d, std::vector<double> v,
                                        std::vector<double> p_x, std::vector<double> p_y) {
  TruthSeries s{std::move(t), std::move(d), std::move(v), std::move(p_x), std::move(p_y), {}};
  const std::size_t n = s.t.size();
  s.heading.assign(n, std::numeric_limits<double>::quiet_NaN());
  // Direction to the next sample with a different position.
  std::size_t next = n;
  for (std::size_t i = n; i-- > 0;) {
    if (i + 1 < n && std::hypot(s.p_x[i + 1] - s.p_x[i], s.p_y[i + 1] - s.p_y[i]) > 1e-9) next = i + 1;
    if (next < n) s.heading[i] = std::atan2(s.p_y[next] - s.p_y[i], s.p_x[next] - s.p_x[i]);
  }
  // Trailing samples at rest look backwards.
  double last = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(s.heading[i])) {
      s.heading[i] = last;
    } else {
      last = s.heading[i];
    }
  }
  return s;
}

TruthSeries TruthSeries::from_states(std::span<const TruthState> truth) {
  TruthSeries s;
  for (const TruthState& x : truth) {
    s.t.push_back(x.t);
    s.d.push_back(x.d);
    s.v.push_back(x.v);
    s.p_x.push_back(x.p_x);
    s.p_y.push_back(x.p_y);
    s.heading.push_back(x.orientation.yaw);
  }
  return s;
}

ErrorSeries compute_errors(const EstimateSeries& estimates, const TruthSeries& truth) {
  ErrorSeries out;
  out.name = estimates.name;
  if (truth.t.empty() || estimates.t.empty()) {
    throw Error(ErrorCode::AlignmentGap, "no overlap between estimates and truth");
  }
  const double T = median_spacing(truth.t);
  const double tol = T > 0.0 ? 0.5 * T + 1e-9 : 1e-9;
  for (std::size_t i = 0; i < estimates.t.size(); ++i) {
    const double t = estimates.t[i];
    if (t < truth.t.front() - tol || t > truth.t.back() + tol) continue;
    auto it = std::lower_bound(truth.t.begin(), truth.t.end(), t);
    std::size_t j = static_cast<std::size_t>(it - truth.t.begin());
    if (j == truth.t.size() || (j > 0 && t - truth.t[j - 1] < truth.t[j] - t)) {
      j = j == 0 ? 0 : j - 1;
    }
    if (std::abs(truth.t[j] - t) > tol) {
      throw Error(ErrorCode::AlignmentGap,
                  "no truth sample within " + format_number(0.5 * T) + " s of t = " + format_number(t));
    }
    ErrorSample e;
    e.t = t;
    e.p_x_hat = estimates.p_x[i];
    e.p_y_hat = estimates.p_y[i];
    e.p_x = truth.p_x[j];
    e.p_y = truth.p_y[j];
    const double dx = e.p_x_hat - e.p_x;
    const double dy = e.p_y_hat - e.p_y;
    const double c = std::cos(truth.heading[j]);
    const double s = std::sin(truth.heading[j]);
    e.euclidean = std::hypot(dx, dy);
    e.along = c * dx + s * dy;
    e.across = -s * dx + c * dy;
    out.samples.push_back(e);
  }
  if (out.samples.empty()) throw Error(ErrorCode::AlignmentGap, "no overlap between estimates and truth");
  return out;
}

void flag_gnss(ErrorSeries& series, std::span<const double> gnss_times) {
  if (gnss_times.empty()) {
    for (ErrorSample& e : series.samples) e.gnss_available = false;
    return;
  }
  const double period = gnss_times.size() > 1 ? median_spacing(gnss_times) : 1.0;
  const double window = 1.5 * period;
  for (ErrorSample& e : series.samples) {
    auto it = std::upper_bound(gnss_times.begin(), gnss_times.end(), e.t + 1e-9);
    e.gnss_available = it != gnss_times.begin() && e.t - *(it - 1) <= window;
  }
}

std::vector<OutageSpan> outage_spans(const ErrorSeries& series) {
  std::vector<OutageSpan> spans;
  bool open = false;
  for (const ErrorSample& e : series.samples) {
    if (!e.gnss_available && !open) {
      spans.push_back({e.t, e.t});
      open = true;
    }
    if (!e.gnss_available) spans.back().end = e.t;
    if (e.gnss_available) open = false;
  }
  return spans;
}

std::vector<CdfPoint> error_cdf(const ErrorSeries& series) {
  if (series.samples.empty()) throw Error(ErrorCode::EmptySeries, "error series is empty");
  std::vector<double> e;
  e.reserve(series.samples.size());
  for (const ErrorSample& s : series.samples) e.push_back(s.euclidean);
  std::sort(e.begin(), e.end());
  std::vector<CdfPoint> cdf;
  const double n = static_cast<double>(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    // Ties collapse onto one step at the highest probability.
    if (i + 1 < e.size() && e[i + 1] == e[i]) continue;
    cdf.push_back({e[i], static_cast<double>(i + 1) / n});
  }
  return cdf;
}

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::EmptySeries, "cannot take a quantile of an empty series");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::OutOfRange, "quantile probability outside [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

double quantile(const ErrorSeries& series, double p) {
  std::vector<double> e;
  e.reserve(series.samples.size());
  for (const ErrorSample& s : series.samples) e.push_back(s.euclidean);
  return quantile(e, p);
}

ErrorSummary summarize(const ErrorSeries& series) {
  if (series.samples.empty()) throw Error(ErrorCode::EmptySeries, "error series is empty");
  ErrorSummary s;
  s.name = series.name;
  std::vector<double> all, gnss, outage, across;
  for (const ErrorSample& e : series.samples) {
    all.push_back(e.euclidean);
    across.push_back(e.across);
    (e.gnss_available ? gnss : outage).push_back(e.euclidean);
  }
  s.n = all.size();
  double sum = 0.0;
  for (double x : all) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  s.median = quantile(all, 0.5);
  s.rms = rms(all);
  s.three_sigma = quantile(all, kThreeSigmaProbability);
  s.max = *std::max_element(all.begin(), all.end());
  s.rms_gnss = rms(gnss);
  s.rms_outage = rms(outage);
  s.n_gnss = gnss.size();
  s.n_outage = outage.size();
  s.rms_across = rms(across);
  return s;
}

double max_error_in(const ErrorSeries& series, double start, double end) {
  double m = std::numeric_limits<double>::quiet_NaN();
  for (const ErrorSample& e : series.samples) {
    if (e.t >= start && e.t < end) m = std::isnan(m) ? e.euclidean : std::max(m, e.euclidean);
  }
  return m;
}

namespace {

std::string gnuplot_script(const std::vector<ErrorSeries>& runs, const std::vector<OutageSpan>& outages) {
  std::string s;
  s += "# gnuplot script; run inside the report directory: gnuplot plots.gp\n";
  s += "set datafile separator ','\n";
  s += "set terminal pngcairo size 1200,600\n\n";
  s += "set output 'error_vs_time.png'\n";
  s += "set xlabel 't [s]'\nset ylabel 'absolute position error [m]'\nset key top left\n";
  for (std::size_t i = 0; i < outages.size(); ++i) {
    s += "set object " + std::to_string(i + 1) + " rect from " + format_number(outages[i].start) +
         ", graph 0 to " + format_number(outages[i].end) +
         ", graph 1 fc rgb '#dddddd' fs solid 0.5 noborder behind\n";
  }
  s += "plot ";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    s += std::string(i ? ", \\\n     " : "") + "'errors_" + runs[i].name +
         ".csv' using 1:2 with lines title '" + runs[i].name + "'";
  }
  s += "\nunset object\n\n";
  s += "set output 'error_cdf.png'\n";
  s += "set xlabel 'absolute position error [m]'\nset ylabel 'cumulative probability'\nset key bottom right\n";
  s += "plot ";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    s += std::string(i ? ", \\\n     " : "") + "'cdf_" + runs[i].name +
         ".csv' using 1:2 with steps title '" + runs[i].name + "'";
  }
  s += "\n\n";
  s += "set output 'map_trace.png'\n";
  s += "set size ratio -1\nset xlabel 'p_x [m]'\nset ylabel 'p_y [m]'\nset key top left\n";
  s += "plot ";
  if (!runs.empty()) {
    s += "'errors_" + runs.front().name + ".csv' using 8:9 with lines lc rgb 'black' title 'truth'";
  }
  for (const ErrorSeries& r : runs) {
    s += ", \\\n     'errors_" + r.name + ".csv' using 6:7 with lines title '" + r.name + "'";
  }
  s += "\n";
  return s;
}

}  // namespace

void write_report(const std::filesystem::path& dir, const std::vector<ErrorSeries>& runs) {
  std::filesystem::create_directories(dir);
  std::string summary_text = "run,n,mean,median,rms,p3sigma,max,rms_gnss,rms_outage,n_gnss,n_outage,rms_across\n";
  std::vector<OutageSpan> outages = runs.empty() ? std::vector<OutageSpan>{} : outage_spans(runs.front());
  std::string outage_text = "outage,start,end";
  for (const ErrorSeries& r : runs) outage_text += ",max_" + r.name;
  outage_text += "\n";

  for (const ErrorSeries& r : runs) {
    CsvWriter errors({"t", "euclidean", "along", "across", "gnss_available", "p_x_hat", "p_y_hat",
                      "p_x", "p_y"});
    for (const ErrorSample& e : r.samples) {
      errors.row({e.t, e.euclidean, e.along, e.across, e.gnss_available ? 1.0 : 0.0, e.p_x_hat,
                  e.p_y_hat, e.p_x, e.p_y});
    }
    errors.save(dir / ("errors_" + r.name + ".csv"));
    CsvWriter cdf({"error", "probability"});
    for (const CdfPoint& p : error_cdf(r)) cdf.row({p.error, p.probability});
    cdf.save(dir / ("cdf_" + r.name + ".csv"));

    const ErrorSummary s = summarize(r);
    summary_text += s.name;
    for (double x : {static_cast<double>(s.n), s.mean, s.median, s.rms, s.three_sigma, s.max, s.rms_gnss,
                     s.rms_outage, static_cast<double>(s.n_gnss), static_cast<double>(s.n_outage),
                     s.rms_across}) {
      summary_text += "," + format_number(x);
    }
    summary_text += "\n";
  }
  for (std::size_t i = 0; i < outages.size(); ++i) {
    outage_text += std::to_string(i) + "," + format_number(outages[i].start) + "," + format_number(outages[i].end);
    for (const ErrorSeries& r : runs) {
      outage_text += "," + format_number(max_error_in(r, outages[i].start, outages[i].end + 1e-9));
    }
    outage_text += "\n";
  }
  write_text(dir / "summary.csv", summary_text);
  write_text(dir / "outages.csv", outage_text);
  write_text(dir / "plots.gp", gnuplot_script(runs, outages));
}

EstimateSeries read_estimates(const std::filesystem::path& path, const std::string& name) {
  const CsvTable table = read_csv(path);
  const std::size_t ct = table.column("t");
  const std::size_t cx = table.column("p_x_hat");
  const std::size_t cy = table.column("p_y_hat");
  EstimateSeries s;
  s.name = name;
  for (const auto& r : table.rows) {
    s.t.push_back(r[ct]);
    s.p_x.push_back(r[cx]);
    s.p_y.push_back(r[cy]);
  }
  return s;
}

TruthSeries read_truth(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path, {"t", "d", "v", "p_x", "p_y"});
  std::vector<double> t, d, v, x, y;
  for (const auto& r : table.rows) {
    t.push_back(r[0]);
    d.push_back(r[1]);
    v.push_back(r[2]);
    x.push_back(r[3]);
    y.push_back(r[4]);
  }
  return TruthSeries::from_positions(std::move(t), std::move(d), std::move(v), std::move(x), std::move(y));
}

std::string truth_csv(std::span<const TruthState> truth) {
  CsvWriter w({"t", "d", "v", "p_x", "p_y"});
  for (const TruthState& s : truth) w.row({s.t, s.d, s.v, s.p_x, s.p_y});
  return w.str();
}

}  // namespace railpf
