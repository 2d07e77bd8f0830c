#include "mgrpo/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mgrpo {

ExperimentConfig collapse_scenario() {
  ExperimentConfig config;
  config.train.learning_rate = 0.1;
  config.env.truth_bias = 1.5;
  config.env.bias_magnitude = 0.0;
  config.env.shortcut = true;
  config.env.shortcut_entry = -4.0;
  config.env.shortcut_chain = 4.0;
  config.env.shortcut_confidence = 5.0;
  return config;
}

namespace {

using nlohmann::json;

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

// Best effort: the first line mentioning "key" as a JSON member name.
int line_of_key(const std::string& text, const std::string& key) {
  std::size_t pos = text.find("\"" + key + "\"");
  return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

// Validation messages name the field either as "config field 'name'" or as a
// leading "section.name".
std::string field_of_message(const std::string& message) {
  const std::string quoted = "config field '";
  if (message.rfind(quoted, 0) == 0) {
    auto end = message.find('\'', quoted.size());
    return message.substr(quoted.size(), end - quoted.size());
  }
  std::string field = message.substr(0, message.find(' '));
  if (auto dot = field.find('.'); dot != std::string::npos) field = field.substr(dot + 1);
  return field;
}

// Semantic error while reading `section.key`.
struct KeyError {
  std::string key;
  std::string message;
};

template <typename T>
void read(const json& section, const char* section_name, const char* key, T& out) {
  auto it = section.find(key);
  if (it == section.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw KeyError{key, std::string(section_name) + "." + key + ": wrong type (" +
                            it->type_name() + ")"};
  }
}

void check_keys(const json& section, const char* section_name,
                std::initializer_list<const char*> known) {
  if (!section.is_object()) {
    throw KeyError{section_name, std::string("section '") + section_name +
                                     "' must be an object"};
  }
  for (const auto& [key, value] : section.items()) {
    bool found = false;
    for (const char* k : known) found = found || key == k;
    if (!found) {
      throw KeyError{key, "unknown key '" + std::string(section_name) + "." + key + "'"};
    }
  }
}

template <typename Enum, typename Parse>
void read_enum(const json& section, const char* section_name, const char* key, Enum& out,
               Parse parse) {
  std::string name;
  auto it = section.find(key);
  if (it == section.end()) return;
  read(section, section_name, key, name);
  try {
    out = parse(name);
  } catch (const std::invalid_argument& e) {
    throw KeyError{key, std::string(section_name) + "." + key + ": " + e.what()};
  }
}

ExperimentConfig from_json_checked(const json& j) {
  if (!j.is_object()) throw KeyError{"", "configuration must be a JSON object"};
  check_keys(j, "config", {"trainer", "filter", "env"});
  ExperimentConfig c;
  static const json empty = json::object();
  const json& t = j.contains("trainer") ? j.at("trainer") : empty;
  const json& f = j.contains("filter") ? j.at("filter") : empty;
  const json& e = j.contains("env") ? j.at("env") : empty;

  check_keys(t, "trainer",
             {"mode", "total_rollouts", "momentum_rollouts", "momentum", "train_temperature",
              "momentum_temperature", "eval_temperature", "batch_size", "learning_rate",
              "warmup_ratio", "schedule", "adam_beta1", "adam_beta2", "adam_eps",
              "weight_decay", "kl_coefficient", "total_steps", "seed", "eval_interval",
              "eval_samples", "entropy_aggregation", "threads", "checkpoint_interval"});
  TrainConfig& tc = c.train;
  read_enum(t, "trainer", "mode", tc.mode, mode_from_string);
  read(t, "trainer", "total_rollouts", tc.total_rollouts);
  read(t, "trainer", "momentum_rollouts", tc.momentum_rollouts);
  read(t, "trainer", "momentum", tc.momentum);
  read(t, "trainer", "train_temperature", tc.train_temperature);
  if (auto it = t.find("momentum_temperature"); it != t.end() && !it->is_null()) {
    double value = 0.0;
    read(t, "trainer", "momentum_temperature", value);
    tc.momentum_temperature = value;
  }
  read(t, "trainer", "eval_temperature", tc.eval_temperature);
  read(t, "trainer", "batch_size", tc.batch_size);
  read(t, "trainer", "learning_rate", tc.learning_rate);
  read(t, "trainer", "warmup_ratio", tc.warmup_ratio);
  read_enum(t, "trainer", "schedule", tc.schedule, schedule_from_string);
  read(t, "trainer", "adam_beta1", tc.adam_beta1);
  read(t, "trainer", "adam_beta2", tc.adam_beta2);
  read(t, "trainer", "adam_eps", tc.adam_eps);
  read(t, "trainer", "weight_decay", tc.weight_decay);
  read(t, "trainer", "kl_coefficient", tc.kl_coefficient);
  read(t, "trainer", "total_steps", tc.total_steps);
  read(t, "trainer", "seed", tc.seed);
  read(t, "trainer", "eval_interval", tc.eval_interval);
  read(t, "trainer", "eval_samples", tc.eval_samples);
  read_enum(t, "trainer", "entropy_aggregation", tc.entropy_aggregation,
            aggregation_from_string);
  read(t, "trainer", "threads", tc.threads);
  read(t, "trainer", "checkpoint_interval", tc.checkpoint_interval);

  check_keys(f, "filter", {"k", "min_pool_for_filter", "enabled"});
  read(f, "filter", "k", tc.filter.k);
  read(f, "filter", "min_pool_for_filter", tc.filter.min_pool_for_filter);
  read(f, "filter", "enabled", tc.filter.enabled);

  check_keys(e, "env",
             {"num_prompts", "vocab_size", "seq_len", "deceptive_fraction", "bias_magnitude",
              "truth_bias", "init_std", "shortcut", "shortcut_entry", "shortcut_chain",
              "shortcut_confidence"});
  EnvConfig& ec = c.env;
  read(e, "env", "num_prompts", ec.num_prompts);
  read(e, "env", "vocab_size", ec.vocab_size);
  read(e, "env", "seq_len", ec.seq_len);
  read(e, "env", "deceptive_fraction", ec.deceptive_fraction);
  read(e, "env", "bias_magnitude", ec.bias_magnitude);
  read(e, "env", "truth_bias", ec.truth_bias);
  read(e, "env", "init_std", ec.init_std);
  read(e, "env", "shortcut", ec.shortcut);
  read(e, "env", "shortcut_entry", ec.shortcut_entry);
  read(e, "env", "shortcut_chain", ec.shortcut_chain);
  read(e, "env", "shortcut_confidence", ec.shortcut_confidence);
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  env.validate();
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& config) {
  const TrainConfig& t = config.train;
  const EnvConfig& e = config.env;
  nlohmann::ordered_json j;
  auto& tj = j["trainer"];
  tj["mode"] = std::string(to_string(t.mode));
  tj["total_rollouts"] = t.total_rollouts;
  tj["momentum_rollouts"] = t.momentum_rollouts;
  tj["momentum"] = t.momentum;
  tj["train_temperature"] = t.train_temperature;
  if (t.momentum_temperature) {
    tj["momentum_temperature"] = *t.momentum_temperature;
  } else {
    tj["momentum_temperature"] = nullptr;
  }
  tj["eval_temperature"] = t.eval_temperature;
  tj["batch_size"] = t.batch_size;
  tj["learning_rate"] = t.learning_rate;
  tj["warmup_ratio"] = t.warmup_ratio;
  tj["schedule"] = std::string(to_string(t.schedule));
  tj["adam_beta1"] = t.adam_beta1;
  tj["adam_beta2"] = t.adam_beta2;
  tj["adam_eps"] = t.adam_eps;
  tj["weight_decay"] = t.weight_decay;
  tj["kl_coefficient"] = t.kl_coefficient;
  tj["total_steps"] = t.total_steps;
  tj["seed"] = t.seed;
  tj["eval_interval"] = t.eval_interval;
  tj["eval_samples"] = t.eval_samples;
  tj["entropy_aggregation"] = std::string(to_string(t.entropy_aggregation));
  tj["threads"] = t.threads;
  tj["checkpoint_interval"] = t.checkpoint_interval;
  auto& fj = j["filter"];
  fj["k"] = t.filter.k;
  fj["min_pool_for_filter"] = t.filter.min_pool_for_filter;
  fj["enabled"] = t.filter.enabled;
  auto& ej = j["env"];
  ej["num_prompts"] = e.num_prompts;
  ej["vocab_size"] = e.vocab_size;
  ej["seq_len"] = e.seq_len;
  ej["deceptive_fraction"] = e.deceptive_fraction;
  ej["bias_magnitude"] = e.bias_magnitude;
  ej["truth_bias"] = e.truth_bias;
  ej["init_std"] = e.init_std;
  ej["shortcut"] = e.shortcut;
  ej["shortcut_entry"] = e.shortcut_entry;
  ej["shortcut_chain"] = e.shortcut_chain;
  ej["shortcut_confidence"] = e.shortcut_confidence;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c = from_json_checked(j);
  } catch (const KeyError& e) {
    throw ConfigError(e.message);
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte is 1-based and points just past the offending character.
    std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    std::string what = e.what();
    if (auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
    throw ConfigError(what, line_of_offset(text, offset));
  }
  ExperimentConfig c;
  try {
    c = from_json_checked(j);
  } catch (const KeyError& e) {
    throw ConfigError(e.message, e.key.empty() ? 0 : line_of_key(text, e.key));
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    std::string message = e.what();
    throw ConfigError(message, line_of_key(text, field_of_message(message)));
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ExperimentConfig apply_overrides(
    const ExperimentConfig& config,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  json j = json::parse(config_to_json(config).dump());
  for (const auto& [path, text] : overrides) {
    auto dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == path.size() ||
        path.find('.', dot + 1) != std::string::npos) {
      throw ConfigError("override '" + path + "' must have the form section.key");
    }
    std::string section = path.substr(0, dot);
    std::string key = path.substr(dot + 1);
    if (!j.contains(section)) throw ConfigError("unknown section in override '" + path + "'");
    if (!j[section].contains(key)) throw ConfigError("unknown key in override '" + path + "'");
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    j[section][key] = value;
  }
  return config_from_json(j);
}

}  // namespace mgrpo
