#ifndef AGGROPT_DATASET_HPP
#define AGGROPT_DATASET_HPP

#include <aggropt/error.hpp>
#include <aggropt/policy.hpp>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace aggropt {

/// Propensities below this are rejected on load.
inline constexpr double kMinPropensity = 1e-12;

struct LoggedRecord {
  ContextId context = 0;
  ActionIndex action = 0;
  double reward = 0.0;
  double logging_propensity = 1.0;

  bool operator==(const LoggedRecord&) const = default;
};

/// How the number of logged rounds is modelled when estimating the variance
/// of the aggregate outcome.
enum class SampleCountMode { kFixedN, kPoissonN };

struct LoggedDataset {
  std::vector<LoggedRecord> records;
  SampleCountMode sample_count_mode = SampleCountMode::kPoissonN;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  /// Sum of logged rewards, i.e. the aggregate outcome of the logging policy.
  double total_reward() const {
    double total = 0.0;
    for (const auto& r : records) {
      total += r.reward;
    }
    return total;
  }

  /// FNV-1a over the record bytes; identifies the dataset content in reports.
  std::uint64_t content_hash() const {
    std::uint64_t hash = 14695981039346656037ULL;
    auto mix = [&hash](const void* data, std::size_t len) {
      const auto* bytes = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < len; ++i) {
        hash ^= bytes[i];
        hash *= 1099511628211ULL;
      }
    };
    for (const auto& r : records) {
      const std::uint64_t context = r.context;
      const std::uint64_t action = r.action;
      mix(&context, sizeof context);
      mix(&action, sizeof action);
      mix(&r.reward, sizeof r.reward);
      mix(&r.logging_propensity, sizeof r.logging_propensity);
    }
    return hash;
  }
};

inline std::string_view to_string(SampleCountMode mode) {
  return mode == SampleCountMode::kFixedN ? "fixed" : "poisson";
}

inline SampleCountMode parse_sample_count_mode(std::string_view text) {
  if (text == "fixed") {
    return SampleCountMode::kFixedN;
  }
  if (text == "poisson") {
    return SampleCountMode::kPoissonN;
  }
  throw ConfigError("unknown sample count mode '" + std::string(text) +
                    "' (expected 'fixed' or 'poisson')");
}

/// Checks one record against the data contract. Returns an empty string when
/// valid, otherwise a description of the first problem.
inline std::string record_problem(const LoggedRecord& record,
                                  std::optional<std::size_t> num_contexts,
                                  std::optional<std::size_t> num_actions) {
  if (num_contexts && record.context >= *num_contexts) {
    return "context " + std::to_string(record.context) + " out of range";
  }
  if (num_actions && record.action >= *num_actions) {
    return "action " + std::to_string(record.action) + " out of range";
  }
  if (!std::isfinite(record.reward) || record.reward < 0.0) {
    return "reward must be a finite nonnegative number";
  }
  if (!std::isfinite(record.logging_propensity) || record.logging_propensity < kMinPropensity ||
      record.logging_propensity > 1.0) {
    return "propensity must lie in [1e-12, 1]";
  }
  return {};
}

/// Throws DataValidationError naming the first offending record index.
inline void validate(const LoggedDataset& dataset, const SoftmaxPolicy& policy) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto problem = record_problem(dataset.records[i], policy.num_contexts(), policy.num_actions());
    if (!problem.empty()) {
      throw DataValidationError(i, "record " + std::to_string(i) + ": " + problem);
    }
  }
}

// ---------------------------------------------------------------------------
// CSV: header `context,action,reward,propensity`, one record per line.

inline constexpr std::string_view kDatasetCsvHeader = "context,action,reward,propensity";

struct LintIssue {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string message;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

inline std::optional<std::size_t> parse_index(std::string_view s) {
  std::size_t value = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || s.empty()) {
    return std::nullopt;
  }
  return value;
}

inline std::optional<double> parse_real(std::string_view s) {
  if (s.empty()) {
    return std::nullopt;
  }
  // strtod accepts forms from_chars(double) rejects on older toolchains
  std::string buffer(s);
  char* end = nullptr;
  const double value = std::strtod(buffer.c_str(), &end);
  if (end != buffer.c_str() + buffer.size()) {
    return std::nullopt;
  }
  return value;
}

/// Parses one data line; on failure returns the problem text.
inline std::optional<LoggedRecord> parse_record(std::string_view line, std::string& problem) {
  const auto fields = split(line, ',');
  if (fields.size() != 4) {
    problem = "expected 4 fields, got " + std::to_string(fields.size());
    return std::nullopt;
  }
  const auto context = parse_index(fields[0]);
  if (!context) {
    problem = "context must be a nonnegative integer";
    return std::nullopt;
  }
  const auto action = parse_index(fields[1]);
  if (!action) {
    problem = "action must be a nonnegative integer";
    return std::nullopt;
  }
  const auto reward = parse_real(fields[2]);
  if (!reward) {
    problem = "reward is not a number";
    return std::nullopt;
  }
  const auto propensity = parse_real(fields[3]);
  if (!propensity) {
    problem = "propensity is not a number";
    return std::nullopt;
  }
  return LoggedRecord{*context, *action, *reward, *propensity};
}

}  // namespace detail

/// Reports every malformed line of a dataset CSV. Bounds on context/action are
/// checked only when given.
inline std::vector<LintIssue> lint_dataset_csv(std::istream& in,
                                               std::optional<std::size_t> num_contexts = {},
                                               std::optional<std::size_t> num_actions = {}) {
  std::vector<LintIssue> issues;
  std::string line;
  std::size_t line_number = 0;
  if (!std::getline(in, line)) {
    issues.push_back({1, "missing header"});
    return issues;
  }
  line_number = 1;
  if (detail::trim(line) != kDatasetCsvHeader) {
    issues.push_back({1, "header must be '" + std::string(kDatasetCsvHeader) + "'"});
  }
  while (std::getline(in, line)) {
    ++line_number;
    if (detail::trim(line).empty()) {
      continue;
    }
    std::string problem;
    const auto record = detail::parse_record(line, problem);
    if (record) {
      problem = record_problem(*record, num_contexts, num_actions);
    }
    if (!problem.empty()) {
      issues.push_back({line_number, std::move(problem)});
    }
  }
  return issues;
}

/// Reads a dataset CSV, throwing DataValidationError with the first offending
/// line number.
inline LoggedDataset read_dataset_csv(std::istream& in,
                                      SampleCountMode mode = SampleCountMode::kPoissonN,
                                      std::optional<std::size_t> num_contexts = {},
                                      std::optional<std::size_t> num_actions = {}) {
  LoggedDataset dataset;
  dataset.sample_count_mode = mode;
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kDatasetCsvHeader) {
    throw DataValidationError(1, "line 1: header must be '" + std::string(kDatasetCsvHeader) + "'");
  }
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (detail::trim(line).empty()) {
      continue;
    }
    std::string problem;
    auto record = detail::parse_record(line, problem);
    if (record) {
      problem = record_problem(*record, num_contexts, num_actions);
    }
    if (!problem.empty()) {
      throw DataValidationError(line_number, "line " + std::to_string(line_number) + ": " + problem);
    }
    dataset.records.push_back(*record);
  }
  return dataset;
}

inline void write_dataset_csv(std::ostream& out, const LoggedDataset& dataset) {
  out << kDatasetCsvHeader << '\n';
  char buffer[64];
  for (const auto& r : dataset.records) {
    out << r.context << ',' << r.action << ',';
    std::snprintf(buffer, sizeof buffer, "%.17g,%.17g", r.reward, r.logging_propensity);
    out << buffer << '\n';
  }
}

}  // namespace aggropt

#endif  // AGGROPT_DATASET_HPP
