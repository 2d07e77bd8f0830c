#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgrpo/config.hpp"

namespace mgrpo {

enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitConfig = 2, kExitRuntime = 3 };

/// Written to manifest.json in every run directory.
struct RunManifest {
  nlohmann::ordered_json config;
  std::string run_id;
  std::string started_at;
  std::string finished_at;
  /// "running", "completed" or "failed".
  std::string status;
  std::string error;
  /// Artifact name -> file name relative to the run directory.
  std::map<std::string, std::string> outputs;

  ExperimentConfig experiment() const { return config_from_json(config); }
};

nlohmann::ordered_json manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);

/// 12 hex digits derived from the serialized config.
std::string run_id_for(const ExperimentConfig& config);

/// Trains one run into `run_dir` (created if needed): metrics.jsonl,
/// metrics.csv, tasks.json, checkpoints and manifest.json. On a mid-run
/// failure the metrics written so far are kept and the manifest says "failed".
int cmd_train(const ExperimentConfig& config, const std::filesystem::path& run_dir,
              std::ostream& out, std::ostream& err);

struct ModeSummary {
  std::string mode;
  int seeds = 0;
  double final_accuracy_mean = 0, final_accuracy_std = 0;
  double best_accuracy_mean = 0, best_accuracy_std = 0;
  double final_self_reward_mean = 0, final_self_reward_std = 0;
  double final_entropy_mean = 0, final_entropy_std = 0;
};

/// Runs modes x seeds into `out_dir/<MODE>_seed<k>` and writes summary.json
/// and summary.md. Standard deviations are sample (n - 1) deviations.
int cmd_compare(const ExperimentConfig& base, const std::vector<Mode>& modes,
                const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir,
                std::ostream& out, std::ostream& err);

/// Summary over finished run directories.
std::vector<ModeSummary> summarize_runs(const std::vector<std::filesystem::path>& run_dirs);

/// Writes self_reward.svg, true_accuracy.svg, mean_entropy.svg and
/// filtered_fraction.svg into `out_dir`, one series per run.
int cmd_report(const std::vector<std::filesystem::path>& run_dirs,
               const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

/// `mgrpo-lab train|compare|report ...`; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mgrpo
