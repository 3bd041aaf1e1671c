#ifndef AGGROPT_HARNESS_HPP
#define AGGROPT_HARNESS_HPP

#include <aggropt/criteria.hpp>
#include <aggropt/dataset.hpp>
#include <aggropt/error.hpp>
#include <aggropt/estimators.hpp>
#include <aggropt/io.hpp>
#include <aggropt/optimizer.hpp>
#include <aggropt/policy.hpp>
#include <aggropt/simulator.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace aggropt {

// ---------------------------------------------------------------------------
// Configuration

enum class MethodKind { kLogging, kIps, kLs, kCriterion };
enum class InitialPolicy { kUniform, kLogging };

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::kCriterion;
  /// LS smoothing; defaults to sqrt(log(1/delta) / n) when unset.
  std::optional<double> ls_lambda;
  double ls_delta = 0.05;
  CriterionSpec criterion = Criterion::identity();
  OptimizerConfig optimizer;
  InitialPolicy init = InitialPolicy::kUniform;
};

struct ExperimentConfig {
  std::uint64_t environment_seed = 7;
  PaperEnvironmentParams environment;
  double n = 1000.0;
  SampleCountMode sample_count_mode = SampleCountMode::kFixedN;
  std::size_t num_replications = 100;
  std::uint64_t base_seed = 1000;
  std::vector<double> thresholds = {0.10, 0.20, 0.30};
  std::vector<MethodSpec> methods;
  std::string output_dir = "out";
  std::size_t workers = 1;
  std::size_t bootstrap_resamples = 2000;

  void validate() const {
    if (num_replications < 1) {
      throw ConfigError("num_replications must be >= 1");
    }
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw ConfigError("n must be a positive number");
    }
    for (std::size_t i = 1; i < thresholds.size(); ++i) {
      if (!(thresholds[i] > thresholds[i - 1])) {
        throw ConfigError("thresholds must be strictly increasing");
      }
    }
    if (workers < 1) {
      throw ConfigError("workers must be >= 1");
    }
    if (bootstrap_resamples < 1) {
      throw ConfigError("bootstrap_resamples must be >= 1");
    }
    for (std::size_t i = 0; i < methods.size(); ++i) {
      if (methods[i].name.empty()) {
        throw ConfigError("method " + std::to_string(i) + " has no name");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (methods[j].name == methods[i].name) {
          throw ConfigError("duplicate method name '" + methods[i].name + "'");
        }
      }
      methods[i].optimizer.validate();
      if (methods[i].ls_lambda && !(*methods[i].ls_lambda >= 0.0)) {
        throw ConfigError("method '" + methods[i].name + "': lambda must be >= 0");
      }
    }
  }
};

namespace detail {

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline OptimizerConfig optimizer_from_json(const Json& j, OptimizerConfig base = {}) {
  base.learning_rate = get_or(j, "learning_rate", base.learning_rate);
  base.gaussian_samples = get_or(j, "gaussian_samples", base.gaussian_samples);
  base.iterations = get_or(j, "iterations", base.iterations);
  base.seed = get_or(j, "seed", base.seed);
  if (j.contains("variance_mode")) {
    base.variance_mode = parse_sample_count_mode(j.at("variance_mode").get<std::string>());
  }
  base.variance_floor = get_or(j, "variance_floor", base.variance_floor);
  base.control_variate = get_or(j, "control_variate", base.control_variate);
  if (j.contains("decay_horizon") && !j.at("decay_horizon").is_null()) {
    base.decay_horizon = j.at("decay_horizon").get<double>();
  }
  return base;
}

inline MethodSpec method_from_json(const Json& j, const OptimizerConfig& defaults) {
  MethodSpec m;
  const auto type = j.at("type").get<std::string>();
  if (type == "logging") {
    m.kind = MethodKind::kLogging;
  } else if (type == "ips") {
    m.kind = MethodKind::kIps;
  } else if (type == "ls") {
    m.kind = MethodKind::kLs;
    if (j.contains("lambda") && !j.at("lambda").is_null()) {
      m.ls_lambda = j.at("lambda").get<double>();
    }
    m.ls_delta = get_or(j, "delta", m.ls_delta);
  } else if (type == "criterion") {
    m.kind = MethodKind::kCriterion;
    m.criterion = criterion_spec_from_json(j.at("criterion"));
  } else {
    throw ConfigError("unknown method type '" + type + "'");
  }
  m.name = get_or<std::string>(j, "name", type);
  const auto init = get_or<std::string>(j, "init", "uniform");
  if (init == "uniform") {
    m.init = InitialPolicy::kUniform;
  } else if (init == "logging") {
    m.init = InitialPolicy::kLogging;
  } else {
    throw ConfigError("unknown init '" + init + "' (expected 'uniform' or 'logging')");
  }
  m.optimizer = j.contains("optimizer") ? optimizer_from_json(j.at("optimizer"), defaults) : defaults;
  return m;
}

}  // namespace detail

/**
 * Parses an experiment file. Every key is optional except `methods`;
 * `optimizer` at top level supplies defaults that each method's own
 * `optimizer` block overrides key by key.
 */
inline ExperimentConfig config_from_json(const Json& j) {
  try {
    ExperimentConfig c;
    c.environment_seed = detail::get_or(j, "environment_seed", c.environment_seed);
    if (j.contains("environment")) {
      const auto& e = j.at("environment");
      auto& p = c.environment;
      p.num_actions = detail::get_or(e, "num_actions", p.num_actions);
      p.beta = detail::get_or(e, "beta", p.beta);
      p.reward_log_spread = detail::get_or(e, "reward_log_spread", p.reward_log_spread);
      p.reward_index_trend = detail::get_or(e, "reward_index_trend", p.reward_index_trend);
      p.target_logging_value = detail::get_or(e, "target_logging_value", p.target_logging_value);
      p.target_tolerance = detail::get_or(e, "target_tolerance", p.target_tolerance);
      p.min_best_reward = detail::get_or(e, "min_best_reward", p.min_best_reward);
    }
    c.n = detail::get_or(j, "n", c.n);
    if (j.contains("sample_count_mode")) {
      c.sample_count_mode = parse_sample_count_mode(j.at("sample_count_mode").get<std::string>());
    }
    c.num_replications = detail::get_or(j, "num_replications", c.num_replications);
    c.base_seed = detail::get_or(j, "base_seed", c.base_seed);
    c.thresholds = detail::get_or(j, "thresholds", c.thresholds);
    c.output_dir = detail::get_or(j, "output_dir", c.output_dir);
    c.workers = detail::get_or(j, "workers", c.workers);
    c.bootstrap_resamples = detail::get_or(j, "bootstrap_resamples", c.bootstrap_resamples);
    const auto defaults =
        j.contains("optimizer") ? detail::optimizer_from_json(j.at("optimizer")) : OptimizerConfig{};
    for (const auto& m : j.at("methods")) {
      c.methods.push_back(detail::method_from_json(m, defaults));
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config '" + path.string() + "'");
  }
  try {
    return config_from_json(Json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training one method on one dataset

struct TrainedMethod {
  SoftmaxPolicy policy;
  OptimizationTrace trace;
};

inline TrainedMethod train_method(const MethodSpec& method, const BanditEnvironment& env,
                                  const LoggedDataset& dataset, std::uint64_t seed) {
  const SoftmaxPolicy initial = method.init == InitialPolicy::kLogging
                                    ? env.logging_policy
                                    : SoftmaxPolicy(1, env.num_actions);
  OptimizerConfig config = method.optimizer;
  config.seed = seed;
  switch (method.kind) {
    case MethodKind::kLogging:
      return {env.logging_policy, {}};
    case MethodKind::kIps: {
      auto r = optimize_baseline(dataset, initial, IpsObjective{}, config);
      return {std::move(r.policy), std::move(r.trace)};
    }
    case MethodKind::kLs: {
      const double lambda = method.ls_lambda.value_or(default_ls_lambda(dataset.size(), method.ls_delta));
      auto r = optimize_baseline(dataset, initial, LsObjective{lambda}, config);
      return {std::move(r.policy), std::move(r.trace)};
    }
    case MethodKind::kCriterion: {
      const Criterion criterion = resolve(method.criterion, dataset.total_reward());
      auto r = optimize(dataset, initial, criterion, config);
      return {std::move(r.policy), std::move(r.trace)};
    }
  }
  throw ConfigError("unknown method kind");
}

/// Seed of the optimizer for one (replication, method) pair.
inline std::uint64_t method_seed(const MethodSpec& method, std::uint64_t replication_seed,
                                 std::size_t method_index) {
  return method.optimizer.seed + 1000003ULL * replication_seed + method_index;
}

/// Draws a dataset, redrawing while a Poisson draw comes up empty.
inline LoggedDataset draw_dataset(const ExperimentConfig& config, const BanditEnvironment& env,
                                  Rng& rng, std::size_t& redraws) {
  redraws = 0;
  auto dataset = generate_dataset(env, config.n, config.sample_count_mode, rng);
  while (dataset.empty()) {
    if (++redraws > 1000) {
      throw ConfigError("could not draw a non-empty dataset");
    }
    dataset = generate_dataset(env, config.n, config.sample_count_mode, rng);
  }
  return dataset;
}

// ---------------------------------------------------------------------------
// Replication study

struct MethodOutcome {
  bool ok = false;
  double true_value = std::numeric_limits<double>::quiet_NaN();
  /// I = V(pi) / (H_n(pi_0) / n) - 1
  double improvement = std::numeric_limits<double>::quiet_NaN();
  /// In-sample IPS estimate of the average reward.
  double claimed_value = std::numeric_limits<double>::quiet_NaN();
  double entropy = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct ReplicationRecord {
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double logged_total = 0.0;
  std::uint64_t dataset_hash = 0;
  std::size_t redraws = 0;
  std::vector<MethodOutcome> outcomes;  // one per method, config order
};

struct MethodSummary {
  std::string name;
  double mean_reward = std::numeric_limits<double>::quiet_NaN();
  double median_reward = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> prob_above;  // one per threshold
  double prob_below_zero = std::numeric_limits<double>::quiet_NaN();
  std::size_t successes = 0;
  std::size_t failures = 0;
};

struct ReplicationReport {
  std::vector<double> thresholds;
  std::vector<MethodSummary> methods;
  std::vector<ReplicationRecord> replications;

  std::size_t failures() const {
    std::size_t total = 0;
    for (const auto& m : methods) {
      total += m.failures;
    }
    return total;
  }

  const MethodSummary& method(const std::string& name) const {
    for (const auto& m : methods) {
      if (m.name == name) {
        return m;
      }
    }
    throw DomainError("no method named '" + name + "' in report");
  }
};

inline double improvement_ratio(double value, double logged_total, std::size_t n) {
  if (logged_total <= 0.0) {
    return value > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return value / (logged_total / static_cast<double>(n)) - 1.0;
}

/// Aggregates per-replication outcomes into per-method summaries.
inline std::vector<MethodSummary> summarize(const std::vector<std::string>& names,
                                            const std::vector<double>& thresholds,
                                            const std::vector<ReplicationRecord>& rows) {
  std::vector<MethodSummary> out;
  for (std::size_t m = 0; m < names.size(); ++m) {
    MethodSummary s;
    s.name = names[m];
    std::vector<double> values;
    std::vector<double> improvements;
    for (const auto& row : rows) {
      const auto& o = row.outcomes[m];
      if (!o.ok) {
        ++s.failures;
        continue;
      }
      values.push_back(o.true_value);
      improvements.push_back(o.improvement);
    }
    s.successes = values.size();
    s.prob_above.assign(thresholds.size(), std::numeric_limits<double>::quiet_NaN());
    if (!values.empty()) {
      double total = 0.0;
      for (double v : values) {
        total += v;
      }
      const double count = static_cast<double>(values.size());
      s.mean_reward = total / count;
      std::sort(values.begin(), values.end());
      const std::size_t mid = values.size() / 2;
      s.median_reward = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
      for (std::size_t t = 0; t < thresholds.size(); ++t) {
        s.prob_above[t] = static_cast<double>(std::count_if(
                              improvements.begin(), improvements.end(),
                              [&](double i) { return i > thresholds[t]; })) /
                          count;
      }
      s.prob_below_zero =
          static_cast<double>(std::count_if(improvements.begin(), improvements.end(),
                                            [](double i) { return i < 0.0; })) /
          count;
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Runs jobs 0..count-1 on `workers` threads. Each job writes only its own slot.
inline void run_parallel(std::size_t count, std::size_t workers,
                         const std::function<void(std::size_t)>& job) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      job(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        job(i);
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
}

inline ReplicationRecord run_replication(const ExperimentConfig& config,
                                         const BanditEnvironment& env, std::size_t r) {
  ReplicationRecord row;
  row.replication = r;
  row.seed = config.base_seed + r;
  row.outcomes.resize(config.methods.size());
  LoggedDataset dataset;
  try {
    Rng rng(row.seed);
    dataset = draw_dataset(config, env, rng, row.redraws);
  } catch (const std::exception& e) {
    for (auto& o : row.outcomes) {
      o.error = std::string("dataset generation failed: ") + e.what();
    }
    return row;
  }
  row.n = dataset.size();
  row.logged_total = dataset.total_reward();
  row.dataset_hash = dataset.content_hash();
  for (std::size_t m = 0; m < config.methods.size(); ++m) {
    auto& o = row.outcomes[m];
    try {
      const auto trained =
          train_method(config.methods[m], env, dataset, method_seed(config.methods[m], row.seed, m));
      o.true_value = true_value(env, trained.policy);
      o.improvement = improvement_ratio(o.true_value, row.logged_total, row.n);
      o.claimed_value = ips_value(dataset, trained.policy);
      o.entropy = trained.policy.mean_entropy();
      o.ok = true;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  }
  return row;
}

inline std::vector<std::string> method_names(const ExperimentConfig& config) {
  std::vector<std::string> names;
  for (const auto& m : config.methods) {
    names.push_back(m.name);
  }
  return names;
}

/**
 * Simulates `num_replications` independent A/B tests. Replication r draws its
 * dataset from seed base_seed + r, trains every method on that same dataset
 * and scores each learned policy by its exact expected reward. Output is
 * independent of the worker count.
 */
inline ReplicationReport run_replication_study(const ExperimentConfig& config,
                                               const BanditEnvironment& env) {
  config.validate();
  ReplicationReport report;
  report.thresholds = config.thresholds;
  report.replications.resize(config.num_replications);
  run_parallel(config.num_replications, config.workers, [&](std::size_t r) {
    report.replications[r] = run_replication(config, env, r);
  });
  report.methods = summarize(method_names(config), config.thresholds, report.replications);
  return report;
}

inline ReplicationReport run_replication_study(const ExperimentConfig& config) {
  return run_replication_study(config, make_paper_environment(config.environment_seed, config.environment));
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string format_fixed(double value, int decimals) {
  if (std::isnan(value)) {
    return "nan";
  }
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", decimals, value);
  return buffer;
}

inline std::string threshold_label(double t) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "P(I>%g%%)", t * 100.0);
  return buffer;
}

struct RenderedTable {
  std::string text;
  std::string csv;
};

/// Table with one row per method: E[r], M[r], P(I>t)..., P(I<0).
inline RenderedTable render_table(const ReplicationReport& report) {
  std::vector<std::string> header = {"method", "E[r]", "M[r]"};
  for (double t : report.thresholds) {
    header.push_back(threshold_label(t));
  }
  header.push_back("P(I<0)");

  std::vector<std::vector<std::string>> rows;
  for (const auto& m : report.methods) {
    std::vector<std::string> row = {m.name, format_fixed(m.mean_reward, 3),
                                    format_fixed(m.median_reward, 3)};
    for (double p : m.prob_above) {
      row.push_back(format_fixed(p, 2));
    }
    row.push_back(format_fixed(m.prob_below_zero, 2));
    rows.push_back(std::move(row));
  }

  RenderedTable out;
  auto join = [](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) {
        line += ',';
      }
      line += cells[i];
    }
    return line + '\n';
  };
  out.csv = join(header);
  for (const auto& row : rows) {
    out.csv += join(row);
  }

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : rows) {
      width[c] = std::max(width[c], row[c].size());
    }
  }
  auto pad = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) {
        line += "  ";
      }
      const std::string fill(width[c] - cells[c].size(), ' ');
      line += c == 0 ? cells[c] + fill : fill + cells[c];
    }
    while (!line.empty() && line.back() == ' ') {
      line.pop_back();
    }
    return line + '\n';
  };
  out.text = pad(header);
  std::size_t total = 0;
  for (auto w : width) {
    total += w;
  }
  out.text += std::string(total + 2 * (width.size() - 1), '-') + '\n';
  for (const auto& row : rows) {
    out.text += pad(row);
  }
  return out;
}

struct ParsedTableRow {
  std::string method;
  std::vector<double> values;  // E[r], M[r], P(I>t)..., P(I<0)
};

inline std::vector<ParsedTableRow> parse_table_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<ParsedTableRow> rows;
  if (!std::getline(in, line)) {
    return rows;
  }
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const auto fields = detail::split(line, ',');
    ParsedTableRow row;
    row.method = std::string(fields.front());
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto v = detail::parse_real(fields[i]);
      row.values.push_back(v ? *v : std::numeric_limits<double>::quiet_NaN());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline constexpr const char* kRawCsvHeader =
    "replication,seed,n,logged_total,dataset_hash,redraws,method,status,true_value,improvement,"
    "claimed_value,entropy,error";

inline std::string raw_replications_csv(const ReplicationReport& report,
                                        const std::vector<std::string>& names) {
  std::ostringstream out;
  out << kRawCsvHeader << '\n';
  char buffer[512];
  for (const auto& row : report.replications) {
    for (std::size_t m = 0; m < names.size(); ++m) {
      const auto& o = row.outcomes[m];
      std::string error = o.error;
      std::replace(error.begin(), error.end(), ',', ';');
      std::replace(error.begin(), error.end(), '\n', ' ');
      std::snprintf(buffer, sizeof buffer, "%zu,%llu,%zu,%.17g,%016llx,%zu,", row.replication,
                    static_cast<unsigned long long>(row.seed), row.n, row.logged_total,
                    static_cast<unsigned long long>(row.dataset_hash), row.redraws);
      out << buffer << names[m] << ',' << (o.ok ? "ok" : "failed") << ',';
      std::snprintf(buffer, sizeof buffer, "%.17g,%.17g,%.17g,%.17g,", o.true_value, o.improvement,
                    o.claimed_value, o.entropy);
      out << buffer << error << '\n';
    }
  }
  return out.str();
}

/// Rebuilds per-replication records from `raw_replications.csv` content.
inline std::vector<ReplicationRecord> parse_raw_replications_csv(
    const std::string& csv, const std::vector<std::string>& names) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<ReplicationRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const auto f = detail::split(line, ',');
    if (f.size() != 13) {
      throw DataValidationError(rows.size(), "raw replications: malformed line");
    }
    const auto r = *detail::parse_index(f[0]);
    if (rows.size() <= r) {
      rows.resize(r + 1);
    }
    auto& row = rows[r];
    row.replication = r;
    row.seed = *detail::parse_index(f[1]);
    row.n = *detail::parse_index(f[2]);
    row.logged_total = *detail::parse_real(f[3]);
    row.redraws = *detail::parse_index(f[5]);
    row.outcomes.resize(names.size());
    const auto it = std::find(names.begin(), names.end(), std::string(f[6]));
    if (it == names.end()) {
      throw DataValidationError(r, "raw replications: unknown method");
    }
    auto& o = row.outcomes[static_cast<std::size_t>(it - names.begin())];
    o.ok = f[7] == "ok";
    o.true_value = *detail::parse_real(f[8]);
    o.improvement = *detail::parse_real(f[9]);
    o.claimed_value = *detail::parse_real(f[10]);
    o.entropy = *detail::parse_real(f[11]);
    o.error = std::string(f[12]);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output files

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot write '" + path.string() + "'");
  }
  out << content;
}

/// Method name reduced to characters safe in file names.
inline std::string file_stem(const std::string& name) {
  std::string stem;
  for (char c : name) {
    const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '-' || c == '_';
    stem += safe ? c : '_';
  }
  return stem;
}

inline void write_replication_outputs(const ExperimentConfig& config, const BanditEnvironment& env,
                                      const ReplicationReport& report) {
  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  const auto table = render_table(report);
  write_text_file(dir / "report.csv", table.csv);
  write_text_file(dir / "report.txt", table.text);
  write_text_file(dir / "raw_replications.csv", raw_replications_csv(report, method_names(config)));
  write_text_file(dir / "environment.json", environment_to_json(env).dump(2) + '\n');
}

// ---------------------------------------------------------------------------
// In-sample analysis

struct InsampleMethodResult {
  std::string name;
  SoftmaxPolicy policy{1, 2};
  OptimizationTrace trace;
  double entropy = 0.0;
  /// In-sample aggregate IPS outcome H_n(pi).
  double claimed_aggregate = 0.0;
  std::vector<double> bootstrap;
  std::vector<double> fresh;
  bool ok = false;
  std::string error;

  double bootstrap_mean() const {
    double total = 0.0;
    for (double v : bootstrap) {
      total += v;
    }
    return bootstrap.empty() ? 0.0 : total / static_cast<double>(bootstrap.size());
  }

  /// Fraction of bootstrap outcomes strictly above `level`.
  double mass_above(double level) const {
    if (bootstrap.empty()) {
      return 0.0;
    }
    return static_cast<double>(std::count_if(bootstrap.begin(), bootstrap.end(),
                                             [level](double v) { return v > level; })) /
           static_cast<double>(bootstrap.size());
  }
};

struct InsampleResult {
  LoggedDataset dataset;
  double logged_total = 0.0;
  std::vector<InsampleMethodResult> methods;

  std::size_t failures() const {
    return static_cast<std::size_t>(
        std::count_if(methods.begin(), methods.end(), [](const auto& m) { return !m.ok; }));
  }

  const InsampleMethodResult& method(const std::string& name) const {
    for (const auto& m : methods) {
      if (m.name == name) {
        return m;
      }
    }
    throw DomainError("no method named '" + name + "' in analysis");
  }
};

/**
 * Trains every method on one dataset (seed base_seed) and collects the
 * in-sample outcome distributions: a bootstrap of H_n(pi) on the logged data
 * and, for comparison, fresh deployments drawn from the environment.
 */
inline InsampleResult run_insample_analysis(const ExperimentConfig& config,
                                            const BanditEnvironment& env) {
  config.validate();
  InsampleResult result;
  Rng data_rng(config.base_seed);
  std::size_t redraws = 0;
  result.dataset = draw_dataset(config, env, data_rng, redraws);
  result.logged_total = result.dataset.total_reward();
  result.methods.resize(config.methods.size());
  run_parallel(config.methods.size(), config.workers, [&](std::size_t m) {
    const auto& spec = config.methods[m];
    auto& out = result.methods[m];
    out.name = spec.name;
    try {
      const std::uint64_t seed = method_seed(spec, config.base_seed, m);
      auto trained = train_method(spec, env, result.dataset, seed);
      out.policy = std::move(trained.policy);
      out.trace = std::move(trained.trace);
      out.entropy = out.policy.mean_entropy();
      out.claimed_aggregate = aggregate_mean(result.dataset, out.policy);
      Rng boot_rng(seed ^ 0x9E3779B97F4A7C15ULL);
      out.bootstrap =
          bootstrap_outcome_distribution(result.dataset, out.policy, config.bootstrap_resamples, boot_rng);
      out.fresh = simulate_outcomes(env, out.policy, static_cast<double>(result.dataset.size()),
                                    SampleCountMode::kFixedN, config.bootstrap_resamples, boot_rng);
      out.ok = true;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  });
  return result;
}

inline InsampleResult run_insample_analysis(const ExperimentConfig& config) {
  return run_insample_analysis(config, make_paper_environment(config.environment_seed, config.environment));
}

inline void write_insample_outputs(const ExperimentConfig& config, const BanditEnvironment& env,
                                   const InsampleResult& result) {
  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir / "histograms");
  std::filesystem::create_directories(dir / "traces");
  char buffer[256];
  std::ostringstream summary;
  summary << "method,status,entropy,claimed_aggregate,bootstrap_mean,mass_above_logged,true_value\n";
  for (const auto& m : result.methods) {
    const auto stem = file_stem(m.name);
    std::ostringstream hist;
    hist << "method,source,outcome\n";
    for (double v : m.bootstrap) {
      std::snprintf(buffer, sizeof buffer, ",bootstrap,%.17g\n", v);
      hist << m.name << buffer;
    }
    for (double v : m.fresh) {
      std::snprintf(buffer, sizeof buffer, ",fresh,%.17g\n", v);
      hist << m.name << buffer;
    }
    write_text_file(dir / "histograms" / (stem + ".csv"), hist.str());
    std::ostringstream trace;
    write_trace_csv(trace, m.trace);
    write_text_file(dir / "traces" / (stem + ".csv"), trace.str());
    if (m.ok) {
      std::snprintf(buffer, sizeof buffer, ",ok,%.17g,%.17g,%.17g,%.17g,%.17g\n", m.entropy,
                    m.claimed_aggregate, m.bootstrap_mean(), m.mass_above(result.logged_total),
                    true_value(env, m.policy));
      summary << m.name << buffer;
    } else {
      summary << m.name << ",failed,nan,nan,nan,nan,nan\n";
    }
  }
  write_text_file(dir / "entropy.csv", summary.str());
  std::snprintf(buffer, sizeof buffer, "logged_total,n\n%.17g,%zu\n", result.logged_total,
                result.dataset.size());
  write_text_file(dir / "logged.csv", buffer);
  write_text_file(dir / "environment.json", environment_to_json(env).dump(2) + '\n');
}

}  // namespace aggropt

#endif  // AGGROPT_HARNESS_HPP
