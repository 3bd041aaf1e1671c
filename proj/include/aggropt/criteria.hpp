#ifndef AGGROPT_CRITERIA_HPP
#define AGGROPT_CRITERIA_HPP

#include <aggropt/error.hpp>
#include <aggropt/policy.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <variant>

namespace aggropt {

/// Standard normal CDF via erfc; erfc keeps full relative precision in the
/// lower tail where 1 - 0.5 * erf would cancel.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_pdf(double z) {
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

namespace criteria {

struct Identity {
  bool operator==(const Identity&) const = default;
};

/// h^kappa with 0 < kappa < 1.
struct Power {
  double kappa = 0.5;
  bool operator==(const Power&) const = default;
};

/// 1 if h >= xbar else 0 (ties pay one).
struct Threshold {
  double xbar = 0.0;
  bool operator==(const Threshold&) const = default;
};

}  // namespace criteria

/// The monotone function applied to the aggregate outcome.
class Criterion {
 public:
  using Variant = std::variant<criteria::Identity, criteria::Power, criteria::Threshold>;

  static Criterion identity() { return Criterion(criteria::Identity{}); }

  static Criterion power(double kappa) {
    if (!(kappa > 0.0 && kappa < 1.0)) {
      throw DomainError("power criterion requires 0 < kappa < 1");
    }
    return Criterion(criteria::Power{kappa});
  }

  static Criterion threshold(double xbar) {
    if (!std::isfinite(xbar)) {
      throw DomainError("threshold criterion requires a finite xbar");
    }
    return Criterion(criteria::Threshold{xbar});
  }

  const Variant& variant() const noexcept { return variant_; }

  template <class T>
  bool is() const noexcept {
    return std::holds_alternative<T>(variant_);
  }

  double evaluate(double h) const {
    return std::visit(
        [h](const auto& c) -> double {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, criteria::Identity>) {
            return h;
          } else if constexpr (std::is_same_v<T, criteria::Power>) {
            if (h < 0.0) {
              throw DomainError("power criterion is undefined for negative outcomes");
            }
            return std::pow(h, c.kappa);
          } else {
            return h >= c.xbar ? 1.0 : 0.0;
          }
        },
        variant_);
  }

  /// Evaluation on a Gaussian draw: negative draws are clamped to zero for the
  /// power criterion, other variants are unchanged.
  double evaluate_sample(double h) const {
    if (is<criteria::Power>() && h < 0.0) {
      h = 0.0;
    }
    return evaluate(h);
  }

  std::string describe() const {
    return std::visit(
        [](const auto& c) -> std::string {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, criteria::Identity>) {
            return "identity";
          } else if constexpr (std::is_same_v<T, criteria::Power>) {
            return "power(kappa=" + std::to_string(c.kappa) + ")";
          } else {
            return "threshold(xbar=" + std::to_string(c.xbar) + ")";
          }
        },
        variant_);
  }

  bool operator==(const Criterion&) const = default;

 private:
  explicit Criterion(Variant v) : variant_(v) {}

  Variant variant_;
};

/// E[j(h)] for h ~ N(mu, sigma_sq) by Monte Carlo with m draws.
inline double gaussian_expectation_mc(const Criterion& criterion, double mu, double sigma_sq,
                                      std::size_t m, Rng& rng) {
  if (!(sigma_sq > 0.0)) {
    throw DomainError("gaussian_expectation_mc: sigma_sq must be positive");
  }
  if (m == 0) {
    throw DomainError("gaussian_expectation_mc: need at least one sample");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma = std::sqrt(sigma_sq);
  double total = 0.0;
  for (std::size_t l = 0; l < m; ++l) {
    total += criterion.evaluate_sample(mu + sigma * normal(rng));
  }
  return total / static_cast<double>(m);
}

/// Default draw count for the power criterion's Monte-Carlo fallback.
inline constexpr std::size_t kDefaultExpectationSamples = 100000;

/**
 * E[j(h)] for h ~ N(mu, sigma_sq). Identity and threshold are closed form;
 * the power criterion falls back to Monte Carlo with a fixed seed so the
 * result is a deterministic function of its arguments.
 */
inline double gaussian_expectation(const Criterion& criterion, double mu, double sigma_sq,
                                   std::size_t mc_samples = kDefaultExpectationSamples,
                                   std::uint64_t mc_seed = 0) {
  if (!(sigma_sq > 0.0)) {
    throw DomainError("gaussian_expectation: sigma_sq must be positive");
  }
  if (criterion.is<criteria::Identity>()) {
    return mu;
  }
  if (const auto* t = std::get_if<criteria::Threshold>(&criterion.variant())) {
    return normal_cdf((mu - t->xbar) / std::sqrt(sigma_sq));
  }
  Rng rng(mc_seed);
  return gaussian_expectation_mc(criterion, mu, sigma_sq, mc_samples, rng);
}

}  // namespace aggropt

#endif  // AGGROPT_CRITERIA_HPP
