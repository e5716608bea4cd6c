#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "railpf/imu.hpp"
#include "railpf/track_map.hpp"

namespace railpf {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

/// Header plus numeric rows. Parse errors name the file and 1-based line.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> lines;  // source line of each row

  /// Index of a header column; throws Error{Parse} when absent.
  std::size_t column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text, const std::string& source);
/// Throws Error{Io} when the file cannot be read.
CsvTable read_csv(const std::filesystem::path& path);
/// Like read_csv, but requires the header to equal `expected` exactly.
CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header);
  CsvWriter& row(std::initializer_list<double> values);
  CsvWriter& row(const std::vector<double>& values);
  const std::string& str() const { return text_; }
  void save(const std::filesystem::path& path) const { write_text(path, text_); }

 private:
  std::size_t columns_;
  std::string text_;
};

extern const std::vector<std::string> kMapColumns;
extern const std::vector<std::string> kRawColumns;
extern const std::vector<std::string> kImuColumns;
extern const std::vector<std::string> kGnssColumns;

std::string map_csv(const TrackMap& map);
TrackMap read_map(const std::filesystem::path& path);

/// Raw polyline rows `x,y,z`; roll is taken as zero.
std::vector<RawTrackPoint> read_raw(const std::filesystem::path& path);
std::string raw_csv(const std::vector<RawTrackPoint>& raw);

std::string imu_csv(const std::vector<ImuSample>& imu);
std::vector<ImuSample> read_imu(const std::filesystem::path& path);

std::string gnss_csv(const std::vector<GnssSample>& gnss);
std::vector<GnssSample> read_gnss(const std::filesystem::path& path);

}  // namespace railpf
