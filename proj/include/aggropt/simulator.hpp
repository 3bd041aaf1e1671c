#ifndef AGGROPT_SIMULATOR_HPP
#define AGGROPT_SIMULATOR_HPP

#include <aggropt/dataset.hpp>
#include <aggropt/error.hpp>
#include <aggropt/estimators.hpp>
#include <aggropt/policy.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace aggropt {

/// Single-context Bernoulli bandit with a fixed logging policy.
struct BanditEnvironment {
  std::size_t num_actions = 0;
  /// Decay rate of the exponential-in-index logging logits (0 if not built that way).
  double beta = 0.0;
  std::vector<double> reward_probs;
  SoftmaxPolicy logging_policy{1, 2};

  void validate() const {
    if (num_actions < 2 || reward_probs.size() != num_actions ||
        logging_policy.num_actions() != num_actions || logging_policy.num_contexts() != 1) {
      throw DomainError("BanditEnvironment: inconsistent action counts");
    }
    for (double p : reward_probs) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw DomainError("BanditEnvironment: reward probabilities must lie in [0, 1]");
      }
    }
    if (!(logging_policy.probability_table().minCoeff() > 0.0)) {
      throw DomainError("BanditEnvironment: logging policy must have full support");
    }
  }
};

/// Knobs of the synthetic benchmark environment. Defaults give 1000 arms, about
/// 70% of the logging mass on the first tenth of the arms and mean logged
/// reward 0.05. Rewards drift down with the index, so the rarely logged tail
/// is mostly worse than the head but noisy enough to fool IPS.
struct PaperEnvironmentParams {
  std::size_t num_actions = 1000;
  /// pi_0(a) is proportional to exp(-beta * a / K).
  double beta = 12.0;
  /// Log-scale spread of the per-arm reward probabilities.
  double reward_log_spread = 0.8;
  /// Log-scale decline of rewards with the arm index, p_a ~ exp(-trend * a / K).
  double reward_index_trend = 2.0;
  double target_logging_value = 0.05;
  double target_tolerance = 0.002;
  /// Some arm must reach at least this reward so large uplifts are attainable.
  double min_best_reward = 0.068;
};

/// Exact expected reward sum_a pi(a) p_a of a single-context policy.
inline double true_value(const BanditEnvironment& env, const SoftmaxPolicy& policy) {
  if (policy.num_contexts() != 1 || policy.num_actions() != env.reward_probs.size()) {
    throw DomainError("true_value: policy shape does not match the environment");
  }
  const auto& probs = policy.probability_table();
  double value = 0.0;
  for (std::size_t a = 0; a < env.reward_probs.size(); ++a) {
    value += probs(0, static_cast<Eigen::Index>(a)) * env.reward_probs[a];
  }
  return value;
}

/**
 * Builds the benchmark environment deterministically from `seed`.
 *
 * Arm rewards are log-normal around a common scale,
 * p_a = c * exp(spread * z_a - trend * a / K),
 * with c found by bisection so that the logging policy's expected reward hits
 * the target. Throws ConfigError when the target or the best-arm requirement
 * cannot be met.
 */
inline BanditEnvironment make_paper_environment(std::uint64_t seed,
                                                const PaperEnvironmentParams& params = {}) {
  const std::size_t k = params.num_actions;
  if (k < 2) {
    throw ConfigError("environment needs at least 2 actions");
  }
  Matrix logits(1, static_cast<Eigen::Index>(k));
  for (std::size_t a = 0; a < k; ++a) {
    logits(0, static_cast<Eigen::Index>(a)) =
        -params.beta * static_cast<double>(a) / static_cast<double>(k);
  }
  BanditEnvironment env;
  env.num_actions = k;
  env.beta = params.beta;
  env.logging_policy = SoftmaxPolicy(std::move(logits));

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> shape(k);
  for (std::size_t a = 0; a < k; ++a) {
    shape[a] = std::exp(params.reward_log_spread * normal(rng) -
                        params.reward_index_trend * static_cast<double>(a) / static_cast<double>(k));
  }
  const auto& pi0 = env.logging_policy.probability_table();
  auto logging_value = [&](double scale) {
    double value = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      value += pi0(0, static_cast<Eigen::Index>(a)) * std::min(1.0, scale * shape[a]);
    }
    return value;
  };
  double lo = 0.0;
  double hi = 1.0 / *std::min_element(shape.begin(), shape.end());
  if (logging_value(hi) < params.target_logging_value) {
    throw ConfigError("environment calibration cannot reach the target logging reward");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (logging_value(mid) < params.target_logging_value ? lo : hi) = mid;
  }
  const double scale = 0.5 * (lo + hi);
  env.reward_probs.resize(k);
  for (std::size_t a = 0; a < k; ++a) {
    env.reward_probs[a] = std::min(1.0, scale * shape[a]);
  }

  const double achieved = true_value(env, env.logging_policy);
  if (std::abs(achieved - params.target_logging_value) > params.target_tolerance) {
    throw ConfigError("environment calibration missed the target logging reward");
  }
  if (*std::max_element(env.reward_probs.begin(), env.reward_probs.end()) <
      params.min_best_reward) {
    throw ConfigError("environment has no arm reaching the required best reward");
  }
  env.validate();
  return env;
}

namespace detail {

inline std::vector<double> cumulative(const Eigen::Ref<const Vector>& probs) {
  std::vector<double> cdf(static_cast<std::size_t>(probs.size()));
  double total = 0.0;
  for (Eigen::Index a = 0; a < probs.size(); ++a) {
    total += probs(a);
    cdf[static_cast<std::size_t>(a)] = total;
  }
  return cdf;
}

inline std::size_t sample_from_cdf(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return it == cdf.end() ? cdf.size() - 1 : static_cast<std::size_t>(it - cdf.begin());
}

inline std::size_t draw_sample_count(double expected_n, SampleCountMode mode, Rng& rng) {
  if (!(expected_n > 0.0) || !std::isfinite(expected_n)) {
    throw DomainError("expected_n must be a positive finite number");
  }
  if (mode == SampleCountMode::kFixedN) {
    return static_cast<std::size_t>(std::llround(expected_n));
  }
  std::poisson_distribution<long long> poisson(expected_n);
  return static_cast<std::size_t>(poisson(rng));
}

}  // namespace detail

/**
 * Logs interactions of the environment's logging policy.
 *
 * In Poisson mode a draw of zero rounds yields an empty dataset; estimators
 * reject it and the caller decides whether to redraw.
 */
inline LoggedDataset generate_dataset(const BanditEnvironment& env, double expected_n,
                                      SampleCountMode mode, Rng& rng) {
  const std::size_t n = detail::draw_sample_count(expected_n, mode, rng);
  const Vector pi0 = env.logging_policy.action_probabilities(0);
  const auto cdf = detail::cumulative(pi0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  LoggedDataset dataset;
  dataset.sample_count_mode = mode;
  dataset.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = detail::sample_from_cdf(cdf, unit(rng));
    const double reward = unit(rng) < env.reward_probs[a] ? 1.0 : 0.0;
    dataset.records.push_back({0, a, reward, pi0(static_cast<Eigen::Index>(a))});
  }
  return dataset;
}

/// Aggregate outcomes of with-replacement resamples (size n) of the dataset.
inline std::vector<double> bootstrap_outcome_distribution(const LoggedDataset& dataset,
                                                          const SoftmaxPolicy& policy,
                                                          std::size_t num_resamples, Rng& rng) {
  if (dataset.empty()) {
    throw DomainError("bootstrap: dataset is empty");
  }
  if (num_resamples == 0) {
    throw DomainError("bootstrap: need at least one resample");
  }
  const auto s = weighted_rewards(dataset, policy);
  std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
  std::vector<double> outcomes(num_resamples);
  for (auto& outcome : outcomes) {
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      total += s[pick(rng)];
    }
    outcome = total;
  }
  return outcomes;
}

/**
 * Aggregate outcomes of deploying `policy` on fresh traffic. Each round's
 * reward is Bernoulli(V(policy)) once the action is marginalized, so a
 * deployment of n rounds totals Binomial(n, V).
 */
inline std::vector<double> simulate_outcomes(const BanditEnvironment& env,
                                             const SoftmaxPolicy& policy, double expected_n,
                                             SampleCountMode mode, std::size_t draws, Rng& rng) {
  const double value = std::clamp(true_value(env, policy), 0.0, 1.0);
  std::vector<double> outcomes(draws);
  for (auto& outcome : outcomes) {
    const auto n = detail::draw_sample_count(expected_n, mode, rng);
    std::binomial_distribution<long long> binomial(static_cast<long long>(n), value);
    outcome = static_cast<double>(binomial(rng));
  }
  return outcomes;
}

}  // namespace aggropt

#endif  // AGGROPT_SIMULATOR_HPP
