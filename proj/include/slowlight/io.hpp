#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "slowlight/fitkit.hpp"
#include "slowlight/tcspc.hpp"

namespace slowlight::io {

/// 17 significant digits, so every double round-trips exactly.
std::string format_number(double value);

/// Writes through a temporary sibling and renames it into place, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Pretty-printed JSON with floating-point values at 17 significant digits.
/// Non-finite numbers are written as null.
std::string to_json_text(const nlohmann::json& value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws ValidationError if absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

class CsvWriter {
public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<double>& values);
  const std::string& text() const { return text_; }

private:
  std::size_t width_;
  std::string text_;
};

/// Throws ValidationError when the file is missing or a field is not numeric.
CsvTable read_csv(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);

/// Histogram as CSV (t_start_ns, count) plus a JSON metadata sidecar.
void write_histogram(const std::filesystem::path& csv_path, const DecayHistogram& hist);
HistogramData read_histogram(const std::filesystem::path& csv_path);
std::filesystem::path metadata_path(const std::filesystem::path& csv_path);

nlohmann::json to_json(const FitResult& fit);
nlohmann::json to_json(const LinearFit& fit, std::span<const TuningPoint> points);

} // namespace slowlight::io
