#include "mgrpo/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mgrpo {

namespace {

using OptionalField = std::optional<double> StepMetrics::*;

struct NamedField {
  const char* name;
  OptionalField member;
};

constexpr NamedField kOptionalFields[] = {
    {"mean_self_reward", &StepMetrics::mean_self_reward},
    {"true_accuracy", &StepMetrics::true_accuracy},
    {"mean_policy_entropy", &StepMetrics::mean_policy_entropy},
    {"batch_entropy", &StepMetrics::batch_entropy},
    {"filtered_fraction", &StepMetrics::filtered_fraction},
    {"filtered_fraction_current", &StepMetrics::filtered_fraction_current},
    {"filtered_fraction_momentum", &StepMetrics::filtered_fraction_momentum},
    {"degenerate_group_fraction", &StepMetrics::degenerate_group_fraction},
    {"mean_kl", &StepMetrics::mean_kl},
    {"objective", &StepMetrics::objective_value},
};

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> columns = [] {
    std::vector<std::string> c{"step", "learning_rate"};
    for (const auto& f : kOptionalFields) c.emplace_back(f.name);
    c.emplace_back("skipped");
    return c;
  }();
  return columns;
}

nlohmann::ordered_json metrics_to_json(const StepMetrics& row) {
  nlohmann::ordered_json j;
  j["step"] = row.step;
  j["learning_rate"] = row.learning_rate;
  for (const auto& f : kOptionalFields) {
    const auto& value = row.*f.member;
    if (value) {
      j[f.name] = *value;
    } else {
      j[f.name] = nullptr;
    }
  }
  j["skipped"] = row.skipped;
  return j;
}

StepMetrics metrics_from_json(const nlohmann::json& j) {
  StepMetrics row;
  j.at("step").get_to(row.step);
  j.at("learning_rate").get_to(row.learning_rate);
  for (const auto& f : kOptionalFields) {
    auto it = j.find(f.name);
    if (it != j.end() && !it->is_null()) row.*f.member = it->get<double>();
  }
  if (auto it = j.find("skipped"); it != j.end()) row.skipped = it->get<bool>();
  return row;
}

std::string metrics_jsonl_line(const StepMetrics& row) { return metrics_to_json(row).dump(); }

std::string metrics_csv_header() {
  std::string out;
  for (const auto& c : metrics_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

std::string metrics_csv_line(const StepMetrics& row) {
  std::string out = std::to_string(row.step) + "," + format_real(row.learning_rate);
  for (const auto& f : kOptionalFields) {
    out += ',';
    if (const auto& value = row.*f.member) out += format_real(*value);
  }
  out += row.skipped ? ",1" : ",0";
  return out;
}

struct MetricsWriter::Impl {
  std::ofstream jsonl;
  std::ofstream csv;
};

MetricsWriter::MetricsWriter(const std::filesystem::path& jsonl_path,
                             const std::filesystem::path& csv_path)
    : impl_(new Impl) {
  impl_->jsonl.open(jsonl_path, std::ios::binary | std::ios::trunc);
  impl_->csv.open(csv_path, std::ios::binary | std::ios::trunc);
  if (!impl_->jsonl || !impl_->csv) {
    delete impl_;
    throw std::runtime_error("cannot open metrics files in " +
                             jsonl_path.parent_path().string());
  }
  impl_->csv << metrics_csv_header() << '\n' << std::flush;
}

MetricsWriter::~MetricsWriter() { delete impl_; }

void MetricsWriter::write(const StepMetrics& row) {
  impl_->jsonl << metrics_jsonl_line(row) << '\n' << std::flush;
  impl_->csv << metrics_csv_line(row) << '\n' << std::flush;
}

MetricsReadResult read_metrics_jsonl(std::istream& in) {
  MetricsReadResult result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      result.rows.push_back(metrics_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      ++result.skipped_lines;
      result.warnings.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return result;
}

MetricsReadResult read_metrics_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_metrics_jsonl(in);
}

}  // namespace mgrpo
