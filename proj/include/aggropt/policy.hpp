#ifndef AGGROPT_POLICY_HPP
#define AGGROPT_POLICY_HPP

#include <aggropt/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>

namespace aggropt {

using ContextId = std::size_t;
using ActionIndex = std::size_t;

/// Seeded source used everywhere randomness is consumed.
using Rng = std::mt19937_64;

/// Row-major parameter or gradient matrix, one row per context.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Draws an index from a probability vector by inverting its CDF at `u`.
/// Falls back to the last index with positive mass when rounding leaves the
/// cumulative sum just below `u`.
inline std::size_t inverse_cdf_index(std::span<const double> probabilities, double u) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t a = 0; a < probabilities.size(); ++a) {
    if (probabilities[a] <= 0.0) {
      continue;
    }
    last_positive = a;
    cumulative += probabilities[a];
    if (u < cumulative) {
      return a;
    }
  }
  return last_positive;
}

/// Stable softmax of one logit row.
inline Vector softmax(const Eigen::Ref<const Vector>& logits) {
  const double max_logit = logits.maxCoeff();
  Vector p = (logits.array() - max_logit).exp().matrix();
  p /= p.sum();
  return p;
}

/**
 * Softmax policy over discrete contexts and actions: pi(a|x) is proportional
 * to exp(theta(x, a)).
 *
 * Instances are immutable; optimizers produce new snapshots with
 * `with_theta`.
 */
class SoftmaxPolicy {
 public:
  /// Uniform policy (all logits zero).
  SoftmaxPolicy(std::size_t num_contexts, std::size_t num_actions)
      : SoftmaxPolicy(Matrix::Zero(static_cast<Eigen::Index>(num_contexts),
                                   static_cast<Eigen::Index>(num_actions))) {}

  explicit SoftmaxPolicy(Matrix theta) : theta_(std::move(theta)) {
    if (theta_.rows() < 1) {
      throw DomainError("SoftmaxPolicy: num_contexts must be >= 1");
    }
    if (theta_.cols() < 2) {
      throw DomainError("SoftmaxPolicy: num_actions must be >= 2");
    }
    if (!theta_.allFinite()) {
      throw DomainError("SoftmaxPolicy: theta contains non-finite entries");
    }
    probabilities_.resize(theta_.rows(), theta_.cols());
    for (Eigen::Index x = 0; x < theta_.rows(); ++x) {
      probabilities_.row(x) = softmax(theta_.row(x).transpose()).transpose();
    }
  }

  /// Single-context policy from one logit row.
  static SoftmaxPolicy from_logits(std::span<const double> logits) {
    Matrix theta(1, static_cast<Eigen::Index>(logits.size()));
    for (std::size_t a = 0; a < logits.size(); ++a) {
      theta(0, static_cast<Eigen::Index>(a)) = logits[a];
    }
    return SoftmaxPolicy(std::move(theta));
  }

  SoftmaxPolicy with_theta(Matrix theta) const { return SoftmaxPolicy(std::move(theta)); }

  const Matrix& theta() const noexcept { return theta_; }
  std::size_t num_contexts() const noexcept { return static_cast<std::size_t>(theta_.rows()); }
  std::size_t num_actions() const noexcept { return static_cast<std::size_t>(theta_.cols()); }

  /// Full table of pi(a|x), shaped like theta.
  const Matrix& probability_table() const noexcept { return probabilities_; }

  Vector action_probabilities(ContextId context) const {
    check_context(context);
    return probabilities_.row(static_cast<Eigen::Index>(context)).transpose();
  }

  double probability(ContextId context, ActionIndex action) const {
    check_context(context);
    check_action(action);
    return probabilities_(static_cast<Eigen::Index>(context), static_cast<Eigen::Index>(action));
  }

  ActionIndex sample_action(ContextId context, Rng& rng) const {
    check_context(context);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto row = probabilities_.row(static_cast<Eigen::Index>(context));
    return inverse_cdf_index(std::span<const double>(row.data(), num_actions()), unit(rng));
  }

  /// Score of the softmax row: e_action - pi(.|context).
  Vector log_prob_gradient(ContextId context, ActionIndex action) const {
    check_context(context);
    check_action(action);
    Vector g = -action_probabilities(context);
    g(static_cast<Eigen::Index>(action)) += 1.0;
    return g;
  }

  /// Shannon entropy in nats.
  double entropy(ContextId context) const {
    check_context(context);
    double h = 0.0;
    for (Eigen::Index a = 0; a < theta_.cols(); ++a) {
      const double p = probabilities_(static_cast<Eigen::Index>(context), a);
      if (p > 0.0) {
        h -= p * std::log(p);
      }
    }
    return std::max(h, 0.0);
  }

  /// Entropy averaged over contexts with equal weight.
  double mean_entropy() const {
    double total = 0.0;
    for (ContextId x = 0; x < num_contexts(); ++x) {
      total += entropy(x);
    }
    return total / static_cast<double>(num_contexts());
  }

 private:
  void check_context(ContextId context) const {
    if (context >= num_contexts()) {
      throw DomainError("context " + std::to_string(context) + " out of range [0, " +
                        std::to_string(num_contexts()) + ")");
    }
  }

  void check_action(ActionIndex action) const {
    if (action >= num_actions()) {
      throw DomainError("action " + std::to_string(action) + " out of range [0, " +
                        std::to_string(num_actions()) + ")");
    }
  }

  Matrix theta_;
  Matrix probabilities_;
};

}  // namespace aggropt

#endif  // AGGROPT_POLICY_HPP
