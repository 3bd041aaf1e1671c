#ifndef AGGROPT_OPTIMIZER_HPP
#define AGGROPT_OPTIMIZER_HPP

#include <aggropt/criteria.hpp>
#include <aggropt/dataset.hpp>
#include <aggropt/error.hpp>
#include <aggropt/estimators.hpp>
#include <aggropt/policy.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace aggropt {

struct OptimizerConfig {
  double learning_rate = 1.0;
  std::size_t gaussian_samples = 1000;
  std::size_t iterations = 2000;
  std::uint64_t seed = 0;
  SampleCountMode variance_mode = SampleCountMode::kPoissonN;
  /// Added to sigma^2 inside the gradient only.
  double variance_floor = 1e-12;
  /// Subtract the sample mean of j(h) from each j(h_l) before weighting.
  bool control_variate = false;
  /// When set, the step size decays as eta / (1 + k / tau).
  std::optional<double> decay_horizon;

  void validate() const {
    if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
      throw ConfigError("learning_rate must be a finite nonnegative number");
    }
    if (gaussian_samples < 1) {
      throw ConfigError("gaussian_samples must be >= 1");
    }
    if (!std::isfinite(variance_floor) || variance_floor < 0.0) {
      throw ConfigError("variance_floor must be >= 0");
    }
    if (decay_horizon && !(*decay_horizon > 0.0)) {
      throw ConfigError("decay_horizon must be positive");
    }
  }

  double step_size(std::size_t k) const {
    if (!decay_horizon) {
      return learning_rate;
    }
    return learning_rate / (1.0 + static_cast<double>(k) / *decay_horizon);
  }
};

struct TraceRecord {
  std::size_t iteration = 0;
  double mu = 0.0;
  double sigma_sq = 0.0;
  double j_hat = 0.0;
  double grad_norm = 0.0;
  double entropy = 0.0;

  bool operator==(const TraceRecord&) const = default;
};

using OptimizationTrace = std::vector<TraceRecord>;

struct OptimizationResult {
  SoftmaxPolicy policy;
  OptimizationTrace trace;
};

/**
 * Monte-Carlo coefficients of the Gaussian score estimator.
 *
 * For h_l = mu + sigma z_l, the gradient of E[j(h)] with respect to the
 * Gaussian's parameters is estimated by
 *   d/dmu      ~ mean_l  z_l / sigma * (j(h_l) - b)
 *   d/dsigma^2 ~ mean_l  (z_l^2 - 1) / (2 sigma^2) * (j(h_l) - b)
 * Per-sample (co)variances are kept so callers can form standard errors.
 */
struct ScoreCoefficients {
  double d_mu = 0.0;
  double d_sigma_sq = 0.0;
  double var_mu = 0.0;
  double var_sigma_sq = 0.0;
  double cov = 0.0;
  double j_mean = 0.0;
  std::size_t samples = 0;

  /// Standard error of the mean of the per-sample vectors
  /// d_mu_l * a + d_sigma_sq_l * b, i.e. sqrt(trace(Cov) / m).
  double standard_error(const Matrix& a, const Matrix& b) const {
    const double trace = var_mu * a.squaredNorm() + 2.0 * cov * (a.array() * b.array()).sum() +
                         var_sigma_sq * b.squaredNorm();
    return std::sqrt(std::max(trace, 0.0) / static_cast<double>(samples));
  }
};

template <class Fn>
ScoreCoefficients score_coefficients(Fn&& j, double mu, double sigma_sq, std::size_t m,
                                     bool control_variate, Rng& rng) {
  if (!(sigma_sq > 0.0)) {
    throw DegenerateDistributionError("score estimator needs a positive variance");
  }
  if (m == 0) {
    throw DomainError("score estimator needs at least one Gaussian sample");
  }
  const double sigma = std::sqrt(sigma_sq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(m);
  std::vector<double> jv(m);
  double j_sum = 0.0;
  for (std::size_t l = 0; l < m; ++l) {
    z[l] = normal(rng);
    jv[l] = j(mu + sigma * z[l]);
    j_sum += jv[l];
  }
  const double md = static_cast<double>(m);
  ScoreCoefficients out;
  out.samples = m;
  out.j_mean = j_sum / md;
  const double baseline = control_variate ? out.j_mean : 0.0;

  double s1 = 0.0;
  double s2 = 0.0;
  double s11 = 0.0;
  double s22 = 0.0;
  double s12 = 0.0;
  for (std::size_t l = 0; l < m; ++l) {
    const double centred = jv[l] - baseline;
    const double c1 = z[l] / sigma * centred;
    const double c2 = 0.5 * (z[l] * z[l] - 1.0) / sigma_sq * centred;
    s1 += c1;
    s2 += c2;
    s11 += c1 * c1;
    s22 += c2 * c2;
    s12 += c1 * c2;
  }
  out.d_mu = s1 / md;
  out.d_sigma_sq = s2 / md;
  if (m > 1) {
    out.var_mu = (s11 - md * out.d_mu * out.d_mu) / (md - 1.0);
    out.var_sigma_sq = (s22 - md * out.d_sigma_sq * out.d_sigma_sq) / (md - 1.0);
    out.cov = (s12 - md * out.d_mu * out.d_sigma_sq) / (md - 1.0);
  }
  return out;
}

struct GradientEstimate {
  Matrix gradient;
  AggregateStats stats;
  ScoreCoefficients coefficients;
  /// Standard error of `gradient` (norm scale).
  double standard_error = 0.0;
};

/// One draw of the score-function estimate of grad E_{h ~ N(mu_theta, sigma_theta^2)}[j(h)].
inline GradientEstimate gradient_estimate(const LoggedDataset& dataset,
                                          const SoftmaxPolicy& policy,
                                          const Criterion& criterion,
                                          const OptimizerConfig& config, Rng& rng) {
  GradientEstimate out;
  out.stats = aggregate_stats(dataset, policy, config.variance_mode);
  const double variance = out.stats.sigma_sq + config.variance_floor;
  if (!(variance > 0.0)) {
    throw DegenerateDistributionError(
        "aggregate outcome has zero variance; set a positive variance_floor");
  }
  out.coefficients = score_coefficients(
      [&criterion](double h) { return criterion.evaluate_sample(h); }, out.stats.mu, variance,
      config.gaussian_samples, config.control_variate, rng);
  out.gradient = out.coefficients.d_mu * out.stats.grad_mu +
                 out.coefficients.d_sigma_sq * out.stats.grad_sigma_sq;
  out.standard_error =
      out.coefficients.standard_error(out.stats.grad_mu, out.stats.grad_sigma_sq);
  return out;
}

namespace detail {

inline void require_finite(const Matrix& m, std::size_t k, const char* what) {
  if (!m.allFinite()) {
    throw OptimizationError(k, "iteration " + std::to_string(k) + ": non-finite " + what);
  }
}

template <class StepFn>
OptimizationResult ascend(const LoggedDataset& dataset, const SoftmaxPolicy& initial,
                          const OptimizerConfig& config, StepFn&& step) {
  config.validate();
  if (dataset.empty()) {
    throw DomainError("optimize: dataset is empty");
  }
  validate(dataset, initial);
  OptimizationResult result{initial, {}};
  result.trace.reserve(config.iterations);
  Matrix theta = initial.theta();
  for (std::size_t k = 0; k < config.iterations; ++k) {
    TraceRecord record;
    record.iteration = k;
    record.entropy = result.policy.mean_entropy();
    const Matrix gradient = step(result.policy, record);
    require_finite(gradient, k, "gradient");
    record.grad_norm = gradient.norm();
    theta.noalias() += config.step_size(k) * gradient;
    require_finite(theta, k, "parameter");
    result.policy = SoftmaxPolicy(theta);
    result.trace.push_back(record);
  }
  return result;
}

}  // namespace detail

/**
 * Gradient ascent on the Gaussian-approximated expected criterion.
 *
 * Each iteration re-estimates mu and sigma^2 of the aggregate outcome on the
 * full dataset, draws `gaussian_samples` outcomes from N(mu, sigma^2) and
 * steps along the score-function gradient estimate. The trace row for
 * iteration k describes theta_k, the parameters the step was taken from.
 */
inline OptimizationResult optimize(const LoggedDataset& dataset,
                                   const SoftmaxPolicy& initial_policy,
                                   const Criterion& criterion, const OptimizerConfig& config) {
  Rng rng(config.seed);
  return detail::ascend(dataset, initial_policy, config,
                        [&](const SoftmaxPolicy& policy, TraceRecord& record) {
                          auto estimate = gradient_estimate(dataset, policy, criterion, config, rng);
                          record.mu = estimate.stats.mu;
                          record.sigma_sq = estimate.stats.sigma_sq;
                          if (criterion.is<criteria::Power>()) {
                            record.j_hat = estimate.coefficients.j_mean;
                          } else {
                            record.j_hat = gaussian_expectation(
                                criterion, estimate.stats.mu,
                                estimate.stats.sigma_sq + config.variance_floor);
                          }
                          return std::move(estimate.gradient);
                        });
}

struct IpsObjective {};

struct LsObjective {
  double lambda = 0.0;
};

using BaselineObjective = std::variant<IpsObjective, LsObjective>;

/// Exact-gradient ascent on the IPS or logarithmic-smoothing value.
inline OptimizationResult optimize_baseline(const LoggedDataset& dataset,
                                            const SoftmaxPolicy& initial_policy,
                                            const BaselineObjective& objective,
                                            const OptimizerConfig& config) {
  if (const auto* ls = std::get_if<LsObjective>(&objective)) {
    if (!(ls->lambda >= 0.0) || !std::isfinite(ls->lambda)) {
      throw ConfigError("LS lambda must be a finite nonnegative number");
    }
  }
  return detail::ascend(
      dataset, initial_policy, config, [&](const SoftmaxPolicy& policy, TraceRecord& record) {
        const auto s = weighted_rewards(dataset, policy);
        for (double v : s) {
          record.mu += v;
        }
        if (config.variance_mode == SampleCountMode::kPoissonN || s.size() >= 2) {
          record.sigma_sq = detail::variance_from_terms(s, config.variance_mode);
        }
        ValueAndGradient vg;
        if (const auto* ls = std::get_if<LsObjective>(&objective)) {
          vg = ls_value_and_gradient(dataset, policy, ls->lambda);
        } else {
          vg = ips_value_and_gradient(dataset, policy);
        }
        record.j_hat = vg.value;
        return std::move(vg.gradient);
      });
}

// ---------------------------------------------------------------------------
// Trace export

inline constexpr const char* kTraceCsvHeader = "iter,mu,sigma_sq,j_hat,grad_norm,entropy";

inline void write_trace_csv(std::ostream& out, const OptimizationTrace& trace) {
  out << kTraceCsvHeader << '\n';
  char buffer[192];
  for (const auto& r : trace) {
    std::snprintf(buffer, sizeof buffer, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.mu,
                  r.sigma_sq, r.j_hat, r.grad_norm, r.entropy);
    out << buffer;
  }
}

}  // namespace aggropt

#endif  // AGGROPT_OPTIMIZER_HPP
