#include "mgrpo/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "mgrpo/metrics.hpp"
#include "mgrpo/svg.hpp"

namespace mgrpo {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_manifest(const fs::path& run_dir, const RunManifest& manifest) {
  write_text(run_dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
}

void write_checkpoint(const fs::path& path, const TabularPolicy& policy) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_policy_text(out, policy);
}

double mean_of(const std::vector<double>& v) {
  double sum = 0;
  for (double x : v) sum += x;
  return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string pm(double mean, double sd) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f ± %.4f", mean, sd);
  return buf;
}

// Leftover "--section.key value" / "--section.key=value" tokens.
std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& token = extras[i];
    if (token.rfind("--", 0) != 0 || token.find('.') == std::string::npos) {
      throw CLI::ExtrasError({token});
    }
    std::string body = token.substr(2);
    if (auto eq = body.find('='); eq != std::string::npos) {
      overrides.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw CLI::ArgumentMismatch(token, 1, 0);
      overrides.emplace_back(body, extras[++i]);
    }
  }
  return overrides;
}

}  // namespace

nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["run_id"] = m.run_id;
  j["status"] = m.status;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  if (!m.error.empty()) j["error"] = m.error;
  j["outputs"] = m.outputs;
  j["config"] = m.config;
  return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  j.at("run_id").get_to(m.run_id);
  j.at("status").get_to(m.status);
  j.at("started_at").get_to(m.started_at);
  j.at("finished_at").get_to(m.finished_at);
  if (j.contains("error")) j.at("error").get_to(m.error);
  j.at("outputs").get_to(m.outputs);
  m.config = nlohmann::ordered_json::parse(j.at("config").dump());
  return m;
}

std::string run_id_for(const ExperimentConfig& config) {
  std::size_t h = std::hash<std::string>{}(config_to_json(config).dump());
  std::ostringstream out;
  out << std::hex << std::setw(12) << std::setfill('0') << (h & 0xffffffffffffULL);
  return out.str();
}

int cmd_train(const ExperimentConfig& config, const fs::path& run_dir, std::ostream& out,
              std::ostream& err) {
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  RunManifest manifest;
  manifest.config = config_to_json(config);
  manifest.run_id = run_id_for(config);
  manifest.started_at = utc_now();
  manifest.status = "running";
  manifest.outputs = {{"metrics_jsonl", "metrics.jsonl"},
                      {"metrics_csv", "metrics.csv"},
                      {"tasks", "tasks.json"},
                      {"config", "config.json"}};
  try {
    fs::create_directories(run_dir);
    write_text(run_dir / "config.json", config_to_json(config).dump(2) + "\n");
    write_manifest(run_dir, manifest);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  try {
    auto [tasks, initial] = generate_tasks(config.env, config.train.seed);
    write_text(run_dir / "tasks.json", nlohmann::json(tasks).dump(2) + "\n");

    MetricsWriter writer(run_dir / "metrics.jsonl", run_dir / "metrics.csv");
    const bool keep_momentum = config.train.mode != Mode::SrtBaseline;
    RunHooks hooks;
    hooks.on_row = [&](const StepMetrics& row) { writer.write(row); };
    hooks.on_checkpoint = [&](const TrainState& state) {
      const bool final = state.step == config.train.total_steps;
      const std::string tag = final ? "final" : "step" + std::to_string(state.step);
      write_checkpoint(run_dir / ("checkpoint_" + tag + "_current.txt"), state.current);
      manifest.outputs["checkpoint_" + tag + "_current"] = "checkpoint_" + tag + "_current.txt";
      if (keep_momentum) {
        write_checkpoint(run_dir / ("checkpoint_" + tag + "_momentum.txt"), state.momentum);
        manifest.outputs["checkpoint_" + tag + "_momentum"] =
            "checkpoint_" + tag + "_momentum.txt";
      }
    };
    MetricsLog log = run_training(config.train, tasks, initial, hooks);

    manifest.status = "completed";
    manifest.finished_at = utc_now();
    write_manifest(run_dir, manifest);
    const StepMetrics* last_eval = nullptr;
    for (const auto& row : log) {
      if (row.true_accuracy) last_eval = &row;
    }
    out << "run " << manifest.run_id << " (" << to_string(config.train.mode) << ", seed "
        << config.train.seed << ") -> " << run_dir.string();
    if (last_eval) {
      out << "  final accuracy " << std::setprecision(4) << *last_eval->true_accuracy;
    }
    out << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    manifest.status = "failed";
    manifest.error = e.what();
    manifest.finished_at = utc_now();
    try {
      write_manifest(run_dir, manifest);
    } catch (...) {
    }
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

std::vector<ModeSummary> summarize_runs(const std::vector<fs::path>& run_dirs) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::array<double, 4>>> cells;
  for (const auto& dir : run_dirs) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("missing manifest in " + dir.string());
    RunManifest manifest = manifest_from_json(nlohmann::json::parse(in));
    std::string mode = manifest.config.at("trainer").at("mode").get<std::string>();
    MetricsReadResult metrics = read_metrics_jsonl(dir / "metrics.jsonl");
    double final_acc = NAN, best_acc = -INFINITY, final_reward = NAN, final_entropy = NAN;
    for (const auto& row : metrics.rows) {
      if (row.true_accuracy) {
        final_acc = *row.true_accuracy;
        best_acc = std::max(best_acc, *row.true_accuracy);
      }
      if (row.mean_policy_entropy) final_entropy = *row.mean_policy_entropy;
      if (row.mean_self_reward) final_reward = *row.mean_self_reward;
    }
    if (!cells.count(mode)) order.push_back(mode);
    cells[mode].push_back({final_acc, best_acc, final_reward, final_entropy});
  }
  std::vector<ModeSummary> summaries;
  for (const auto& mode : order) {
    const auto& rows = cells[mode];
    auto column = [&](int c) {
      std::vector<double> v;
      for (const auto& r : rows) v.push_back(r[c]);
      return v;
    };
    ModeSummary s;
    s.mode = mode;
    s.seeds = static_cast<int>(rows.size());
    s.final_accuracy_mean = mean_of(column(0));
    s.final_accuracy_std = sample_std(column(0));
    s.best_accuracy_mean = mean_of(column(1));
    s.best_accuracy_std = sample_std(column(1));
    s.final_self_reward_mean = mean_of(column(2));
    s.final_self_reward_std = sample_std(column(2));
    s.final_entropy_mean = mean_of(column(3));
    s.final_entropy_std = sample_std(column(3));
    summaries.push_back(s);
  }
  return summaries;
}

int cmd_compare(const ExperimentConfig& base, const std::vector<Mode>& modes,
                const std::vector<std::uint64_t>& seeds, const fs::path& out_dir,
                std::ostream& out, std::ostream& err) {
  if (modes.empty() || seeds.empty()) {
    err << "compare: need at least one mode and one seed\n";
    return kExitUsage;
  }
  std::vector<fs::path> dirs;
  for (Mode mode : modes) {
    for (std::uint64_t seed : seeds) {
      ExperimentConfig config = base;
      config.train.mode = mode;
      config.train.seed = seed;
      fs::path dir = out_dir / (std::string(to_string(mode)) + "_seed" + std::to_string(seed));
      int status = cmd_train(config, dir, out, err);
      if (status != kExitOk) return status;
      dirs.push_back(dir);
    }
  }
  try {
    auto summaries = summarize_runs(dirs);
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    std::ostringstream md;
    md << "| mode | seeds | final accuracy | best accuracy | final self-reward | final entropy |\n";
    md << "|---|---|---|---|---|---|\n";
    for (const auto& s : summaries) {
      j.push_back({{"mode", s.mode},
                   {"seeds", s.seeds},
                   {"final_accuracy_mean", s.final_accuracy_mean},
                   {"final_accuracy_std", s.final_accuracy_std},
                   {"best_accuracy_mean", s.best_accuracy_mean},
                   {"best_accuracy_std", s.best_accuracy_std},
                   {"final_self_reward_mean", s.final_self_reward_mean},
                   {"final_self_reward_std", s.final_self_reward_std},
                   {"final_entropy_mean", s.final_entropy_mean},
                   {"final_entropy_std", s.final_entropy_std}});
      md << "| " << s.mode << " | " << s.seeds << " | "
         << pm(s.final_accuracy_mean, s.final_accuracy_std) << " | "
         << pm(s.best_accuracy_mean, s.best_accuracy_std) << " | "
         << pm(s.final_self_reward_mean, s.final_self_reward_std) << " | "
         << pm(s.final_entropy_mean, s.final_entropy_std) << " |\n";
    }
    write_text(out_dir / "summary.json", j.dump(2) + "\n");
    write_text(out_dir / "summary.md", md.str());
    out << md.str();
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir,
               std::ostream& out, std::ostream& err) {
  if (run_dirs.empty()) {
    err << "usage: mgrpo-lab report RUN_DIR... [--out DIR]\n";
    return kExitUsage;
  }
  struct Chart {
    const char* file;
    const char* title;
    const char* y_label;
    std::optional<double> StepMetrics::*field;
  };
  const Chart charts[] = {
      {"self_reward.svg", "Self-reward", "mean self-reward", &StepMetrics::mean_self_reward},
      {"true_accuracy.svg", "True accuracy", "accuracy", &StepMetrics::true_accuracy},
      {"mean_entropy.svg", "Policy entropy", "mean trajectory entropy (nats)",
       &StepMetrics::mean_policy_entropy},
      {"filtered_fraction.svg", "Filtered fraction", "fraction of pool removed",
       &StepMetrics::filtered_fraction},
  };
  try {
    std::vector<std::vector<Series>> series(std::size(charts));
    int skipped = 0;
    for (const auto& dir : run_dirs) {
      MetricsReadResult metrics = read_metrics_jsonl(dir / "metrics.jsonl");
      for (const auto& w : metrics.warnings) err << "warning: " << dir.string() << ": " << w << "\n";
      skipped += metrics.skipped_lines;
      std::string label = dir.filename().string();
      if (label.empty()) label = dir.parent_path().filename().string();
      if (std::ifstream in(dir / "manifest.json"); in) {
        try {
          auto cfg = nlohmann::json::parse(in).at("config").at("trainer");
          label = cfg.at("mode").get<std::string>() + " seed " +
                  std::to_string(cfg.at("seed").get<std::uint64_t>());
        } catch (const nlohmann::json::exception&) {
        }
      }
      for (std::size_t c = 0; c < std::size(charts); ++c) {
        Series s{label, {}, {}};
        for (const auto& row : metrics.rows) {
          if (const auto& v = row.*charts[c].field) {
            s.x.push_back(row.step);
            s.y.push_back(*v);
          }
        }
        series[c].push_back(std::move(s));
      }
    }
    fs::create_directories(out_dir);
    for (std::size_t c = 0; c < std::size(charts); ++c) {
      ChartSpec spec{charts[c].title, "step", charts[c].y_label};
      write_text(out_dir / charts[c].file, render_line_chart(spec, series[c]));
      out << "wrote " << (out_dir / charts[c].file).string() << "\n";
    }
    if (skipped > 0) err << "warning: skipped " << skipped << " corrupt metrics line(s)\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-rewarding policy optimization lab", "mgrpo-lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string mode_name;
  std::string out_dir;
  std::optional<int> total_steps;

  auto* train = app.add_subcommand("train", "Train one run");
  train->add_option("--config", config_path, "JSON config file");
  train->add_option("--seed", seed, "Root seed (also seeds the environment)");
  train->add_option("--mode", mode_name, "MGRPO_IQR, MGRPO_NOFILTER or SRT_BASELINE");
  train->add_option("--out", out_dir, "Run directory")->default_val("runs/train");
  train->add_option("--total-steps", total_steps, "Shorthand for --trainer.total_steps");
  train->allow_extras();

  std::vector<std::string> mode_names;
  std::vector<std::uint64_t> seeds;
  auto* compare = app.add_subcommand("compare", "Run modes x seeds and summarize");
  compare->add_option("--config", config_path, "JSON config file");
  compare->add_option("--modes", mode_names, "Modes to run")
      ->default_val(std::vector<std::string>{"SRT_BASELINE", "MGRPO_NOFILTER", "MGRPO_IQR"});
  compare->add_option("--seeds", seeds, "Seeds to run")
      ->default_val(std::vector<std::uint64_t>{1, 2, 3, 4, 5});
  compare->add_option("--out", out_dir, "Output directory")->default_val("runs/compare");
  compare->add_option("--total-steps", total_steps, "Shorthand for --trainer.total_steps");
  compare->allow_extras();

  std::vector<std::string> report_dirs;
  auto* report = app.add_subcommand("report", "Render SVG charts from run directories");
  report->add_option("runs", report_dirs, "Run directories");
  report->add_option("--out", out_dir, "Chart directory")->default_val("runs/report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  if (report->parsed()) {
    std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
    return cmd_report(dirs, out_dir, out, err);
  }

  CLI::App* active = train->parsed() ? train : compare;
  ExperimentConfig config;
  try {
    auto overrides = parse_overrides(active->remaining());
    if (!config_path.empty()) config = load_config(config_path);
    if (total_steps) overrides.emplace_back("trainer.total_steps", std::to_string(*total_steps));
    if (seed) overrides.emplace_back("trainer.seed", std::to_string(*seed));
    if (!mode_name.empty()) overrides.emplace_back("trainer.mode", mode_name);
    config = apply_overrides(config, overrides);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  if (train->parsed()) return cmd_train(config, out_dir, out, err);

  std::vector<Mode> modes;
  try {
    for (const auto& name : mode_names) modes.push_back(mode_from_string(name));
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }
  return cmd_compare(config, modes, seeds, out_dir, out, err);
}

}  // namespace mgrpo
