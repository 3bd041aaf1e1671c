#ifndef AGGROPT_TEST_SUPPORT_HPP
#define AGGROPT_TEST_SUPPORT_HPP

#include <aggropt/dataset.hpp>
#include <aggropt/policy.hpp>

#include <cmath>
#include <functional>
#include <random>

namespace aggropt::testing {

struct Instance {
  LoggedDataset dataset;
  SoftmaxPolicy policy{1, 2};
};

/// Random logging policy, target policy and dataset of `n` records with
/// rewards uniform in [0, 1].
inline Instance random_instance(std::size_t contexts, std::size_t actions, std::size_t n, Rng& rng,
                                double theta_scale = 1.0) {
  std::normal_distribution<double> normal(0.0, theta_scale);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto random_theta = [&] {
    Matrix theta(static_cast<Eigen::Index>(contexts), static_cast<Eigen::Index>(actions));
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      theta.data()[i] = normal(rng);
    }
    return theta;
  };
  const SoftmaxPolicy logging(random_theta());
  Instance out;
  out.policy = SoftmaxPolicy(random_theta());
  std::uniform_int_distribution<std::size_t> pick_context(0, contexts - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const ContextId x = pick_context(rng);
    const ActionIndex a = logging.sample_action(x, rng);
    out.dataset.records.push_back({x, a, unit(rng), logging.probability(x, a)});
  }
  return out;
}

/// Central finite-difference gradient of f(theta).
inline Matrix finite_difference(const std::function<double(const SoftmaxPolicy&)>& f,
                                const Matrix& theta, double step = 1e-6) {
  Matrix grad(theta.rows(), theta.cols());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Matrix plus = theta;
    Matrix minus = theta;
    plus.data()[i] += step;
    minus.data()[i] -= step;
    grad.data()[i] = (f(SoftmaxPolicy(plus)) - f(SoftmaxPolicy(minus))) / (2.0 * step);
  }
  return grad;
}

/// Max componentwise relative error, with `floor` guarding near-zero entries.
inline double max_relative_error(const Matrix& actual, const Matrix& expected, double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < actual.size(); ++i) {
    const double e = expected.data()[i];
    const double err = std::abs(actual.data()[i] - e) / std::max(std::abs(e), floor);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace aggropt::testing

#endif  // AGGROPT_TEST_SUPPORT_HPP
