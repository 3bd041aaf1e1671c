#include <aggropt/harness.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kSuccess = 0;
constexpr int kConfigError = 1;
constexpr int kPartialFailure = 2;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;
};

aggropt::ExperimentConfig load(const std::string& path, const Overrides& o) {
  auto config = aggropt::load_config(path);
  if (o.seed) {
    config.base_seed = *o.seed;
  }
  if (o.out_dir) {
    config.output_dir = *o.out_dir;
  }
  if (o.workers) {
    config.workers = *o.workers;
  }
  config.validate();
  return config;
}

int run_study(const std::string& path, const Overrides& o) {
  const auto config = load(path, o);
  const auto env = aggropt::make_paper_environment(config.environment_seed, config.environment);
  const auto report = aggropt::run_replication_study(config, env);
  aggropt::write_replication_outputs(config, env, report);
  std::cout << aggropt::render_table(report).text;
  for (const auto& row : report.replications) {
    if (row.redraws > 0) {
      std::cerr << "note: replication " << row.replication << " redrew an empty dataset "
                << row.redraws << " time(s)\n";
    }
    for (std::size_t m = 0; m < row.outcomes.size(); ++m) {
      if (!row.outcomes[m].ok) {
        std::cerr << "replication " << row.replication << ", method '" << config.methods[m].name
                  << "' failed: " << row.outcomes[m].error << '\n';
      }
    }
  }
  return report.failures() > 0 ? kPartialFailure : kSuccess;
}

int run_insample(const std::string& path, const Overrides& o) {
  const auto config = load(path, o);
  const auto env = aggropt::make_paper_environment(config.environment_seed, config.environment);
  const auto result = aggropt::run_insample_analysis(config, env);
  aggropt::write_insample_outputs(config, env, result);
  std::cout << "logged aggregate H_n(pi_0) = " << result.logged_total << " over "
            << result.dataset.size() << " rounds\n";
  for (const auto& m : result.methods) {
    if (m.ok) {
      std::cout << m.name << ": entropy " << m.entropy << ", claimed " << m.claimed_aggregate
                << ", bootstrap mass above logged " << m.mass_above(result.logged_total) << '\n';
    } else {
      std::cerr << m.name << " failed: " << m.error << '\n';
    }
  }
  return result.failures() > 0 ? kPartialFailure : kSuccess;
}

int run_validate(const std::string& path, std::optional<std::size_t> contexts,
                 std::optional<std::size_t> actions) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open '" << path << "'\n";
    return kConfigError;
  }
  const auto issues = aggropt::lint_dataset_csv(in, contexts, actions);
  for (const auto& issue : issues) {
    std::cout << path << ':' << issue.line << ": " << issue.message << '\n';
  }
  if (issues.empty()) {
    std::cout << path << ": ok\n";
    return kSuccess;
  }
  return kConfigError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy learning from logged bandit data for non-linear outcome criteria"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", overrides.seed, "override base_seed");
    sub->add_option("--out-dir", overrides.out_dir, "override output_dir");
    sub->add_option("--workers", overrides.workers, "override worker count")
        ->check(CLI::PositiveNumber);
  };
  auto* run = app.add_subcommand("run", "replication study");
  add_common(run);
  auto* insample = app.add_subcommand("insample", "in-sample analysis on one dataset");
  add_common(insample);

  std::string data_path;
  std::optional<std::size_t> num_contexts;
  std::optional<std::size_t> num_actions;
  auto* validate = app.add_subcommand("validate", "lint a logged dataset CSV");
  validate->add_option("--data", data_path, "dataset CSV")->required();
  validate->add_option("--num-contexts", num_contexts, "expected context count");
  validate->add_option("--num-actions", num_actions, "expected action count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kSuccess : kConfigError;
  }

  try {
    if (*run) {
      return run_study(config_path, overrides);
    }
    if (*insample) {
      return run_insample(config_path, overrides);
    }
    return run_validate(data_path, num_contexts, num_actions);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
}
