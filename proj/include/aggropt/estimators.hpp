#ifndef AGGROPT_ESTIMATORS_HPP
#define AGGROPT_ESTIMATORS_HPP

#include <aggropt/dataset.hpp>
#include <aggropt/error.hpp>
#include <aggropt/policy.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aggropt {

/// Mean and variance of the aggregate IPS outcome together with their
/// gradients in theta.
struct AggregateStats {
  double mu = 0.0;
  double sigma_sq = 0.0;
  Matrix grad_mu;
  Matrix grad_sigma_sq;
};

struct ValueAndGradient {
  double value = 0.0;
  Matrix gradient;
};

namespace detail {

inline void require_non_empty(const LoggedDataset& dataset, const char* what) {
  if (dataset.empty()) {
    throw DomainError(std::string(what) + ": dataset is empty");
  }
}

inline void check_record(const LoggedRecord& r, std::size_t index, const SoftmaxPolicy& policy) {
  if (!(r.logging_propensity > 0.0)) {
    throw DataValidationError(index, "record " + std::to_string(index) +
                                         ": logging propensity must be positive");
  }
  if (r.context >= policy.num_contexts() || r.action >= policy.num_actions()) {
    throw DomainError("record " + std::to_string(index) +
                      ": context/action outside the policy's shape");
  }
}

}  // namespace detail

/**
 * IPS weights pi(a_i|x_i) / pi_0(a_i|x_i), one per record.
 *
 * `clip`, when set, caps each weight at that value. It exists for diagnostics;
 * the aggregate statistics and optimizers always use unclipped weights.
 */
inline std::vector<double> importance_weights(const LoggedDataset& dataset,
                                              const SoftmaxPolicy& policy,
                                              std::optional<double> clip = {}) {
  const Matrix& probs = policy.probability_table();
  std::vector<double> weights(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& r = dataset.records[i];
    detail::check_record(r, i, policy);
    double w = probs(static_cast<Eigen::Index>(r.context), static_cast<Eigen::Index>(r.action)) /
               r.logging_propensity;
    if (clip) {
      w = std::min(w, *clip);
    }
    weights[i] = w;
  }
  return weights;
}

/// Per-record weighted rewards s_i = w_i * r_i.
inline std::vector<double> weighted_rewards(const LoggedDataset& dataset,
                                            const SoftmaxPolicy& policy) {
  auto s = importance_weights(dataset, policy);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] *= dataset.records[i].reward;
  }
  return s;
}

/// Sum over records of coeff_i * grad log pi(a_i|x_i), shaped like theta.
///
/// The score of record i is e_{x_i,a_i} - pi(.|x_i) on row x_i, so the sum is
/// a scatter of the coefficients minus each row's coefficient mass times
/// pi(.|x). Cost is O(n + contexts * actions).
inline Matrix accumulate_scores(const LoggedDataset& dataset, const SoftmaxPolicy& policy,
                                std::span<const double> coeffs) {
  Matrix out = Matrix::Zero(policy.theta().rows(), policy.theta().cols());
  Vector row_mass = Vector::Zero(policy.theta().rows());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& r = dataset.records[i];
    const auto x = static_cast<Eigen::Index>(r.context);
    out(x, static_cast<Eigen::Index>(r.action)) += coeffs[i];
    row_mass(x) += coeffs[i];
  }
  const Matrix& probs = policy.probability_table();
  for (Eigen::Index x = 0; x < out.rows(); ++x) {
    if (row_mass(x) != 0.0) {
      out.row(x) -= row_mass(x) * probs.row(x);
    }
  }
  return out;
}

/// Aggregate IPS outcome: the sum (not the average) of w_i * r_i.
inline double aggregate_mean(const LoggedDataset& dataset, const SoftmaxPolicy& policy) {
  detail::require_non_empty(dataset, "aggregate_mean");
  double mu = 0.0;
  for (double s : weighted_rewards(dataset, policy)) {
    mu += s;
  }
  return mu;
}

namespace detail {

inline void require_variance_sample(std::size_t n, SampleCountMode mode) {
  if (n == 0) {
    throw DomainError("aggregate variance: dataset is empty");
  }
  if (mode == SampleCountMode::kFixedN && n < 2) {
    throw DomainError("aggregate variance: fixed-n mode needs at least 2 records");
  }
}

inline double variance_from_terms(std::span<const double> s, SampleCountMode mode) {
  if (mode == SampleCountMode::kPoissonN) {
    // compound Poisson: Var(sum) estimated by the sum of squared terms
    double total = 0.0;
    for (double v : s) {
      total += v * v;
    }
    return total;
  }
  const double n = static_cast<double>(s.size());
  double sum = 0.0;
  for (double v : s) {
    sum += v;
  }
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : s) {
    ss += (v - mean) * (v - mean);
  }
  return n / (n - 1.0) * ss;
}

}  // namespace detail

/// Variance of the aggregate outcome under the given sample-count model.
inline double aggregate_variance(const LoggedDataset& dataset, const SoftmaxPolicy& policy,
                                 SampleCountMode mode) {
  detail::require_variance_sample(dataset.size(), mode);
  const auto s = weighted_rewards(dataset, policy);
  return detail::variance_from_terms(s, mode);
}

inline double aggregate_variance(const LoggedDataset& dataset, const SoftmaxPolicy& policy) {
  return aggregate_variance(dataset, policy, dataset.sample_count_mode);
}

/**
 * Mean, variance and their theta-gradients of the aggregate outcome.
 *
 * With s_i = w_i r_i and g_i the score at (x_i, a_i), grad s_i = s_i g_i, so
 *   grad mu          = sum_i s_i g_i
 *   grad sigma^2 (P) = sum_i 2 s_i^2 g_i
 *   grad sigma^2 (F) = n/(n-1) sum_i 2 (s_i - s_bar) s_i g_i
 * The fixed-n form drops the s_bar-gradient term because sum_i (s_i - s_bar) = 0.
 */
inline AggregateStats aggregate_stats(const LoggedDataset& dataset, const SoftmaxPolicy& policy,
                                      SampleCountMode mode) {
  detail::require_variance_sample(dataset.size(), mode);
  const auto s = weighted_rewards(dataset, policy);
  const std::size_t n = s.size();

  AggregateStats stats;
  for (double v : s) {
    stats.mu += v;
  }
  stats.sigma_sq = detail::variance_from_terms(s, mode);
  stats.grad_mu = accumulate_scores(dataset, policy, s);

  std::vector<double> coeffs(n);
  if (mode == SampleCountMode::kPoissonN) {
    for (std::size_t i = 0; i < n; ++i) {
      coeffs[i] = 2.0 * s[i] * s[i];
    }
  } else {
    const double nn = static_cast<double>(n);
    const double mean = stats.mu / nn;
    const double scale = nn / (nn - 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      coeffs[i] = scale * 2.0 * (s[i] - mean) * s[i];
    }
  }
  stats.grad_sigma_sq = accumulate_scores(dataset, policy, coeffs);
  return stats;
}

inline AggregateStats aggregate_stats(const LoggedDataset& dataset, const SoftmaxPolicy& policy) {
  return aggregate_stats(dataset, policy, dataset.sample_count_mode);
}

/// Average IPS reward, aggregate_mean / n.
inline double ips_value(const LoggedDataset& dataset, const SoftmaxPolicy& policy) {
  detail::require_non_empty(dataset, "ips_value");
  return aggregate_mean(dataset, policy) / static_cast<double>(dataset.size());
}

inline ValueAndGradient ips_value_and_gradient(const LoggedDataset& dataset,
                                               const SoftmaxPolicy& policy) {
  detail::require_non_empty(dataset, "ips_value");
  auto s = weighted_rewards(dataset, policy);
  const double n = static_cast<double>(s.size());
  double total = 0.0;
  for (auto& v : s) {
    total += v;
    v /= n;
  }
  return {total / n, accumulate_scores(dataset, policy, s)};
}

/**
 * Logarithmic smoothing estimator (1/n) sum_i log(1 + lambda s_i) / lambda.
 * At lambda = 0 it is the IPS value. The gradient follows from
 * d/ds [log(1 + lambda s) / lambda] = 1 / (1 + lambda s).
 */
inline ValueAndGradient ls_value_and_gradient(const LoggedDataset& dataset,
                                              const SoftmaxPolicy& policy, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError("ls_value: lambda must be a finite nonnegative number");
  }
  if (lambda == 0.0) {
    return ips_value_and_gradient(dataset, policy);
  }
  detail::require_non_empty(dataset, "ls_value");
  const auto s = weighted_rewards(dataset, policy);
  const double n = static_cast<double>(s.size());
  std::vector<double> coeffs(s.size());
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    total += std::log1p(lambda * s[i]) / lambda;
    coeffs[i] = s[i] / (1.0 + lambda * s[i]) / n;
  }
  return {total / n, accumulate_scores(dataset, policy, coeffs)};
}

inline double ls_value(const LoggedDataset& dataset, const SoftmaxPolicy& policy, double lambda) {
  return ls_value_and_gradient(dataset, policy, lambda).value;
}

/// Default smoothing level sqrt(log(1/delta) / n).
inline double default_ls_lambda(std::size_t n, double delta = 0.05) {
  if (n == 0 || !(delta > 0.0 && delta < 1.0)) {
    throw DomainError("default_ls_lambda: need n >= 1 and delta in (0, 1)");
  }
  return std::sqrt(std::log(1.0 / delta) / static_cast<double>(n));
}

}  // namespace aggropt

#endif  // AGGROPT_ESTIMATORS_HPP
