#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mgrpo/env.hpp"
#include "mgrpo/trainer.hpp"

namespace mgrpo {

/// Everything one run needs. The environment is generated from
/// `train.seed`, so modes compared under one seed share their prompts.
struct ExperimentConfig {
  TrainConfig train;
  EnvConfig env;

  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// The collapse/stability scenario used by the acceptance suite and
/// configs/collapse.json: a shared shortcut that honest prompts reward and
/// deceptive prompts are dragged along by.
ExperimentConfig collapse_scenario();

/// Malformed or invalid configuration. `line` is 1-based, or 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                    : message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Sections "trainer", "filter", "env"; every key optional.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
/// Unknown keys and wrong types throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Parses config text. Syntax errors report the line; semantic errors report
/// the line of the offending key when it can be located.
ExperimentConfig parse_config(const std::string& text);
/// Throws ConfigError naming the path if the file can't be read.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies `section.key = value` overrides. Values are read as JSON when they
/// parse (numbers, true/false, null) and as strings otherwise.
ExperimentConfig apply_overrides(const ExperimentConfig& config,
                                 const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace mgrpo
