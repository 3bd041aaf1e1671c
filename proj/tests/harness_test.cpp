#include <aggropt/harness.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace aggropt {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("aggropt_harness_test_" + name);
  fs::remove_all(dir);
  return dir;
}

// Small, fast study: 100 arms, short optimizer runs.
Json small_config_json() {
  return Json::parse(R"({
    "environment_seed": 7,
    "environment": {"num_actions": 100},
    "n": 300,
    "num_replications": 6,
    "base_seed": 50,
    "thresholds": [0.1, 0.2, 0.3],
    "optimizer": {"iterations": 100, "gaussian_samples": 200},
    "methods": [
      {"name": "logging", "type": "logging"},
      {"name": "IPS", "type": "ips", "optimizer": {"learning_rate": 300}},
      {"name": "LS", "type": "ls", "optimizer": {"learning_rate": 10}},
      {"name": "j10", "type": "criterion", "init": "logging",
       "criterion": {"type": "threshold_uplift", "uplift": 0.1},
       "optimizer": {"learning_rate": 60, "control_variate": true}}
    ]
  })");
}

TEST(Config, ParsesMethodsAndOverrides) {
  const auto c = config_from_json(small_config_json());
  ASSERT_EQ(c.methods.size(), 4u);
  EXPECT_EQ(c.methods[0].kind, MethodKind::kLogging);
  EXPECT_EQ(c.methods[1].optimizer.learning_rate, 300.0);
  EXPECT_EQ(c.methods[1].optimizer.iterations, 100u);
  EXPECT_EQ(c.methods[3].init, InitialPolicy::kLogging);
  EXPECT_TRUE(c.methods[3].optimizer.control_variate);
  EXPECT_EQ(std::get<ThresholdUplift>(c.methods[3].criterion).uplift, 0.1);
  EXPECT_EQ(c.environment.num_actions, 100u);
  EXPECT_EQ(c.sample_count_mode, SampleCountMode::kFixedN);
}

TEST(Config, RejectsInvalidFiles) {
  auto bad = small_config_json();
  bad["thresholds"] = {0.3, 0.2};
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = small_config_json();
  bad["num_replications"] = 0;
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = small_config_json();
  bad["methods"][1]["type"] = "magic";
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = small_config_json();
  bad["methods"][1]["name"] = "logging";
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = small_config_json();
  bad["methods"][3]["criterion"] = Json{{"type", "power"}, {"kappa", 2.0}};
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = small_config_json();
  bad["n"] = "many";
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = small_config_json();
  bad.erase("methods");
  EXPECT_THROW(config_from_json(bad), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, CriterionSpecJsonRoundTrip) {
  for (const CriterionSpec& spec : {CriterionSpec{Criterion::identity()}, CriterionSpec{Criterion::power(0.5)},
                                    CriterionSpec{Criterion::threshold(3.0)}, CriterionSpec{ThresholdUplift{0.2}}}) {
    EXPECT_EQ(criterion_spec_from_json(criterion_spec_to_json(spec)), spec);
  }
  EXPECT_EQ(resolve(ThresholdUplift{0.2}, 50.0), Criterion::threshold(60.0));
}

TEST(Config, PolicyJsonRoundTrip) {
  Matrix theta(2, 3);
  theta << 0.1, -2.0, 3.5, 0.0, 1.0 / 3.0, -0.25;
  const SoftmaxPolicy policy(theta);
  EXPECT_EQ(policy_from_json(Json::parse(policy_to_json(policy).dump())).theta(), theta);
  EXPECT_THROW(policy_from_json(Json::parse(R"({"num_contexts": 1, "num_actions": 2, "theta": [[0]]})")),
               ConfigError);
}

TEST(ReplicationStudy, DoNothingMethodReproducesLoggingPolicy) {
  auto j = small_config_json();
  j["methods"] = Json::parse(R"([{"name": "idle", "type": "criterion", "init": "logging",
      "criterion": {"type": "identity"}, "optimizer": {"iterations": 0}}])");
  const auto config = config_from_json(j);
  const auto env = make_paper_environment(config.environment_seed, config.environment);
  const auto report = run_replication_study(config, env);
  const auto& idle = report.method("idle");
  EXPECT_DOUBLE_EQ(idle.mean_reward, true_value(env, env.logging_policy));
  EXPECT_NEAR(idle.mean_reward, 0.05, 0.002);
  EXPECT_EQ(idle.failures, 0u);
}

TEST(ReplicationStudy, InvariantsHold) {
  const auto config = config_from_json(small_config_json());
  const auto env = make_paper_environment(config.environment_seed, config.environment);
  const auto report = run_replication_study(config, env);
  EXPECT_EQ(report.failures(), 0u);
  for (const auto& m : report.methods) {
    for (std::size_t t = 0; t < m.prob_above.size(); ++t) {
      EXPECT_GE(m.prob_above[t], 0.0);
      EXPECT_LE(m.prob_above[t], 1.0);
      if (t > 0) {
        EXPECT_GE(m.prob_above[t - 1], m.prob_above[t]);
      }
    }
    EXPECT_GE(m.prob_below_zero, 0.0);
    EXPECT_LE(m.prob_below_zero, 1.0);
  }
  // every method in a replication saw the dataset drawn from that replication's seed
  for (const auto& row : report.replications) {
    Rng rng(config.base_seed + row.replication);
    std::size_t redraws = 0;
    const auto ds = draw_dataset(config, env, rng, redraws);
    EXPECT_EQ(row.dataset_hash, ds.content_hash());
    EXPECT_EQ(row.logged_total, ds.total_reward());
  }
}

TEST(ReplicationStudy, SummaryRecomputedFromRawFileMatchesExactly) {
  auto config = config_from_json(small_config_json());
  config.output_dir = scratch_dir("raw").string();
  const auto env = make_paper_environment(config.environment_seed, config.environment);
  const auto report = run_replication_study(config, env);
  write_replication_outputs(config, env, report);
  const auto names = method_names(config);
  const auto rows = parse_raw_replications_csv(read_file(fs::path(config.output_dir) / "raw_replications.csv"), names);
  const auto again = summarize(names, config.thresholds, rows);
  ASSERT_EQ(again.size(), report.methods.size());
  for (std::size_t m = 0; m < again.size(); ++m) {
    EXPECT_EQ(again[m].mean_reward, report.methods[m].mean_reward);
    EXPECT_EQ(again[m].median_reward, report.methods[m].median_reward);
    EXPECT_EQ(again[m].prob_above, report.methods[m].prob_above);
    EXPECT_EQ(again[m].prob_below_zero, report.methods[m].prob_below_zero);
  }
}

TEST(ReplicationStudy, OutputIndependentOfWorkerCount) {
  auto config = config_from_json(small_config_json());
  const auto env = make_paper_environment(config.environment_seed, config.environment);
  config.output_dir = scratch_dir("w1").string();
  config.workers = 1;
  write_replication_outputs(config, env, run_replication_study(config, env));
  const auto first = config.output_dir;
  config.output_dir = scratch_dir("w3").string();
  config.workers = 3;
  write_replication_outputs(config, env, run_replication_study(config, env));
  for (const char* file : {"report.csv", "report.txt", "raw_replications.csv", "environment.json"}) {
    EXPECT_EQ(read_file(fs::path(first) / file), read_file(fs::path(config.output_dir) / file)) << file;
  }
}

TEST(ReplicationStudy, FailingMethodIsRecordedAndOthersContinue) {
  // All rewards are zero, so the aggregate variance is zero and a criterion
  // method without a variance floor cannot form its Gaussian.
  auto j = small_config_json();
  j["environment"] = Json{{"num_actions", 100}, {"target_logging_value", 0.0}, {"min_best_reward", 0.0}};
  j["methods"] = Json::parse(R"([
    {"name": "IPS", "type": "ips"},
    {"name": "fragile", "type": "criterion", "criterion": {"type": "threshold", "xbar": 1.0},
     "optimizer": {"variance_floor": 0.0}}])");
  const auto config = config_from_json(j);
  const auto report = run_replication_study(config);
  EXPECT_EQ(report.method("fragile").failures, config.num_replications);
  EXPECT_EQ(report.method("IPS").failures, 0u);
  EXPECT_EQ(report.failures(), config.num_replications);
  for (const auto& row : report.replications) {
    EXPECT_FALSE(row.outcomes[1].ok);
    EXPECT_NE(row.outcomes[1].error.find("variance"), std::string::npos);
  }
}

TEST(ReplicationStudy, PoissonRedrawsEmptyDatasets) {
  auto j = small_config_json();
  j["n"] = 0.3;
  j["sample_count_mode"] = "poisson";
  j["num_replications"] = 20;
  j["methods"] = Json::parse(R"([{"name": "logging", "type": "logging"}])");
  const auto report = run_replication_study(config_from_json(j));
  std::size_t redraws = 0;
  for (const auto& row : report.replications) {
    EXPECT_GE(row.n, 1u);
    redraws += row.redraws;
  }
  EXPECT_GT(redraws, 0u);
  EXPECT_EQ(report.failures(), 0u);
}

TEST(ReplicationStudy, OrderingStableAcrossBaseSeeds) {
  auto j = small_config_json();
  j.erase("environment");
  j["n"] = 1000;
  j["num_replications"] = 10;
  j["optimizer"] = Json{{"iterations", 2000}, {"gaussian_samples", 1000}};
  j["methods"].erase(0);
  for (std::uint64_t seed : {1000, 2000, 3000, 4000, 5000}) {
    j["base_seed"] = seed;
    auto config = config_from_json(j);
    config.workers = 4;
    const auto report = run_replication_study(config);
    const auto& ips = report.method("IPS");
    const auto& crit = report.method("j10");
    EXPECT_GT(crit.mean_reward, ips.mean_reward) << "base seed " << seed;
    EXPECT_LE(crit.prob_below_zero, ips.prob_below_zero) << "base seed " << seed;
    EXPECT_LE(crit.prob_below_zero, 0.1) << "base seed " << seed;
  }
}

TEST(RenderTable, EmptyMethodListIsHeaderOnly) {
  ReplicationReport report;
  report.thresholds = {0.1, 0.2};
  const auto table = render_table(report);
  EXPECT_EQ(table.csv, "method,E[r],M[r],P(I>10%),P(I>20%),P(I<0)\n");
  EXPECT_EQ(table.text.find('\n', table.text.find('\n') + 1), table.text.size() - 1);
}

TEST(RenderTable, FormattingContract) {
  ReplicationReport report;
  report.thresholds = {0.1, 0.2, 0.3};
  MethodSummary m;
  m.name = "method";
  m.mean_reward = 0.0666;
  m.median_reward = 0.05;
  m.prob_above = {1.0, 0.5, 0.0};
  m.prob_below_zero = 0.0;
  report.methods.push_back(m);
  const auto table = render_table(report);
  EXPECT_EQ(table.csv,
            "method,E[r],M[r],P(I>10%),P(I>20%),P(I>30%),P(I<0)\n"
            "method,0.067,0.050,1.00,0.50,0.00,0.00\n");
  EXPECT_NE(table.text.find("method  0.067  0.050"), std::string::npos);
}

TEST(RenderTable, CsvRoundTripWithinPrintPrecision) {
  const auto config = config_from_json(small_config_json());
  const auto report = run_replication_study(config);
  const auto rows = parse_table_csv(render_table(report).csv);
  ASSERT_EQ(rows.size(), report.methods.size());
  for (std::size_t m = 0; m < rows.size(); ++m) {
    const auto& s = report.methods[m];
    EXPECT_EQ(rows[m].method, s.name);
    EXPECT_NEAR(rows[m].values[0], s.mean_reward, 0.0005);
    EXPECT_NEAR(rows[m].values[1], s.median_reward, 0.0005);
    for (std::size_t t = 0; t < s.prob_above.size(); ++t) {
      EXPECT_NEAR(rows[m].values[2 + t], s.prob_above[t], 0.005);
    }
    EXPECT_NEAR(rows[m].values.back(), s.prob_below_zero, 0.005);
  }
}

TEST(Improvement, Definition) {
  EXPECT_DOUBLE_EQ(improvement_ratio(0.06, 50.0, 1000), 0.06 / 0.05 - 1.0);
  EXPECT_EQ(improvement_ratio(0.0, 0.0, 10), 0.0);
  EXPECT_TRUE(std::isinf(improvement_ratio(0.1, 0.0, 10)));
}

TEST(Insample, LoggingHistogramCentersOnRewardSumAndFilesAreWritten) {
  auto config = config_from_json(small_config_json());
  config.output_dir = scratch_dir("insample").string();
  config.bootstrap_resamples = 3000;
  const auto env = make_paper_environment(config.environment_seed, config.environment);
  const auto result = run_insample_analysis(config, env);
  write_insample_outputs(config, env, result);
  EXPECT_EQ(result.failures(), 0u);
  const auto& logging = result.method("logging");
  EXPECT_EQ(logging.claimed_aggregate, result.logged_total);
  EXPECT_NEAR(logging.bootstrap_mean(), result.logged_total, 0.5);
  const fs::path dir(config.output_dir);
  for (const auto& name : {"logging", "IPS", "LS", "j10"}) {
    EXPECT_TRUE(fs::exists(dir / "histograms" / (std::string(name) + ".csv")));
    EXPECT_TRUE(fs::exists(dir / "traces" / (std::string(name) + ".csv")));
  }
  EXPECT_TRUE(fs::exists(dir / "entropy.csv"));
  EXPECT_TRUE(fs::exists(dir / "environment.json"));
  EXPECT_EQ(result.method("IPS").trace.size(), 100u);
}

TEST(FileStem, SanitizesNames) { EXPECT_EQ(file_stem("j(I>10%)"), "j_I_10__"); }

}  // namespace
}  // namespace aggropt
