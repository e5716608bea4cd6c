#include "railpf/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "railpf/error.hpp"

namespace railpf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void parse_error(const std::string& source, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::Parse, source + " line " + std::to_string(line) + ": " + what);
}

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const std::string& n : names) out += (out.empty() ? "" : ",") + n;
  return out;
}

}  // namespace

std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(ErrorCode::Parse, "missing column '" + std::string(name) + "'");
}

CsvTable parse_csv(std::string_view text, const std::string& source) {
  CsvTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line);
    if (!have_header) {
      for (std::string_view f : fields) table.header.emplace_back(f);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      parse_error(source, line_no,
                  "expected " + std::to_string(table.header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string_view f = fields[i];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), row[i]);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size() ||
          !std::isfinite(row[i])) {
        parse_error(source, line_no,
                    "column '" + table.header[i] + "' is not a finite number: '" + std::string(f) + "'");
      }
    }
    table.rows.push_back(std::move(row));
    table.lines.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorCode::Parse, source + ": empty file, expected a header row");
  return table;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  return parse_csv(read_text(path), path.string());
}

CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected) {
  CsvTable table = read_csv(path);
  if (table.header != expected) {
    throw Error(ErrorCode::Parse, path.string() + " line 1: expected header '" + join(expected) +
                                      "', got '" + join(table.header) + "'");
  }
  return table;
}

CsvWriter::CsvWriter(const std::vector<std::string>& header)
    : columns_(header.size()), text_(join(header) + "\n") {}

CsvWriter& CsvWriter::row(std::initializer_list<double> values) {
  return row(std::vector<double>(values));
}

CsvWriter& CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw Error(ErrorCode::Io, "CSV row width mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) text_ += ',';
    text_ += format_number(values[i]);
  }
  text_ += '\n';
  return *this;
}

const std::vector<std::string> kMapColumns = {"d",     "p_x",     "p_y",     "p_z",
                                              "kappa", "theta_x", "theta_y", "theta_z"};
const std::vector<std::string> kRawColumns = {"x", "y", "z"};
const std::vector<std::string> kImuColumns = {"t", "a_x", "a_y", "a_z", "omega_x", "omega_y", "omega_z"};
const std::vector<std::string> kGnssColumns = {"t", "p_x", "p_y", "v", "sigma_px", "sigma_py", "sigma_v"};

std::string map_csv(const TrackMap& map) {
  CsvWriter w(kMapColumns);
  for (const TrackPoint& p : map.points()) {
    const MapFeatures& m = p.mu;
    w.row({p.d, m.p_x, m.p_y, m.p_z, m.kappa, m.theta_x, m.theta_y, m.theta_z});
  }
  return w.str();
}

TrackMap read_map(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path, kMapColumns);
  std::vector<TrackPoint> points;
  points.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    points.push_back({r[0], {r[1], r[2], r[3], r[4], r[5], r[6], r[7]}});
  }
  return TrackMap(path.stem().string(), std::move(points));
}

std::vector<RawTrackPoint> read_raw(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path, kRawColumns);
  std::vector<RawTrackPoint> raw;
  raw.reserve(table.rows.size());
  for (const auto& r : table.rows) raw.push_back({r[0], r[1], r[2], 0.0});
  return raw;
}

std::string raw_csv(const std::vector<RawTrackPoint>& raw) {
  CsvWriter w(kRawColumns);
  for (const RawTrackPoint& p : raw) w.row({p.x, p.y, p.z});
  return w.str();
}

std::string imu_csv(const std::vector<ImuSample>& imu) {
  CsvWriter w(kImuColumns);
  for (const ImuSample& s : imu) {
    w.row({s.t, s.accel.x(), s.accel.y(), s.accel.z(), s.gyro.x(), s.gyro.y(), s.gyro.z()});
  }
  return w.str();
}

std::vector<ImuSample> read_imu(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path, kImuColumns);
  std::vector<ImuSample> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    if (!out.empty() && !(r[0] > out.back().t)) {
      throw Error(ErrorCode::Parse, path.string() + " line " + std::to_string(table.lines[i]) +
                                        ": timestamps must increase");
    }
    out.push_back({r[0], Eigen::Vector3d(r[1], r[2], r[3]), Eigen::Vector3d(r[4], r[5], r[6])});
  }
  return out;
}

std::string gnss_csv(const std::vector<GnssSample>& gnss) {
  CsvWriter w(kGnssColumns);
  for (const GnssSample& g : gnss) w.row({g.t, g.p_x, g.p_y, g.v, g.sigma_px, g.sigma_py, g.sigma_v});
  return w.str();
}

std::vector<GnssSample> read_gnss(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path, kGnssColumns);
  std::vector<GnssSample> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    if (!out.empty() && !(r[0] > out.back().t)) {
      throw Error(ErrorCode::Parse, path.string() + " line " + std::to_string(table.lines[i]) +
                                        ": timestamps must increase");
    }
    out.push_back({r[0], r[1], r[2], r[3], r[4], r[5], r[6]});
  }
  return out;
}

}  // namespace railpf
