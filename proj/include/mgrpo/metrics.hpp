#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgrpo/trainer.hpp"

namespace mgrpo {

/// Column order shared by the JSON-lines and CSV forms.
const std::vector<std::string>& metrics_columns();

/// One JSON object per row; missing values are null.
nlohmann::ordered_json metrics_to_json(const StepMetrics& row);
StepMetrics metrics_from_json(const nlohmann::json& j);

/// Single line, no trailing newline.
std::string metrics_jsonl_line(const StepMetrics& row);
std::string metrics_csv_header();
/// Missing values are empty cells; reals use 17 significant digits.
std::string metrics_csv_line(const StepMetrics& row);

/// Appends rows to a JSON-lines file and its CSV mirror, flushing each row so
/// an interrupted run leaves a readable prefix.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& jsonl_path, const std::filesystem::path& csv_path);
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  void write(const StepMetrics& row);

 private:
  struct Impl;
  Impl* impl_;
};

struct MetricsReadResult {
  MetricsLog rows;
  /// Lines that failed to parse and were skipped.
  int skipped_lines = 0;
  std::vector<std::string> warnings;
};

/// Reads a JSON-lines metrics file. Blank lines are ignored; corrupt lines
/// are skipped and counted. Throws std::runtime_error if the file can't be opened.
MetricsReadResult read_metrics_jsonl(const std::filesystem::path& path);
MetricsReadResult read_metrics_jsonl(std::istream& in);

}  // namespace mgrpo
