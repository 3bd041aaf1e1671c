#ifndef AGGROPT_IO_HPP
#define AGGROPT_IO_HPP

#include <aggropt/criteria.hpp>
#include <aggropt/error.hpp>
#include <aggropt/policy.hpp>
#include <aggropt/simulator.hpp>

#include <json.hpp>

#include <string>
#include <variant>

namespace aggropt {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Policy: {"num_contexts": int, "num_actions": int, "theta": [[...], ...]}

inline Json policy_to_json(const SoftmaxPolicy& policy) {
  Json theta = Json::array();
  for (Eigen::Index x = 0; x < policy.theta().rows(); ++x) {
    Json row = Json::array();
    for (Eigen::Index a = 0; a < policy.theta().cols(); ++a) {
      row.push_back(policy.theta()(x, a));
    }
    theta.push_back(std::move(row));
  }
  return Json{{"num_contexts", policy.num_contexts()},
              {"num_actions", policy.num_actions()},
              {"theta", std::move(theta)}};
}

inline SoftmaxPolicy policy_from_json(const Json& j) {
  try {
    const auto contexts = j.at("num_contexts").get<std::size_t>();
    const auto actions = j.at("num_actions").get<std::size_t>();
    const auto& rows = j.at("theta");
    if (rows.size() != contexts) {
      throw ConfigError("policy JSON: theta has " + std::to_string(rows.size()) +
                        " rows, expected " + std::to_string(contexts));
    }
    Matrix theta(static_cast<Eigen::Index>(contexts), static_cast<Eigen::Index>(actions));
    for (std::size_t x = 0; x < contexts; ++x) {
      if (rows[x].size() != actions) {
        throw ConfigError("policy JSON: theta row " + std::to_string(x) + " has wrong length");
      }
      for (std::size_t a = 0; a < actions; ++a) {
        theta(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(a)) = rows[x][a].get<double>();
      }
    }
    return SoftmaxPolicy(std::move(theta));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy JSON: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("policy JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Criterion specs as they appear in experiment files. A relative threshold is
// resolved against the logged aggregate outcome once a dataset exists.

struct ThresholdUplift {
  double uplift = 0.0;
  bool operator==(const ThresholdUplift&) const = default;
};

using CriterionSpec = std::variant<Criterion, ThresholdUplift>;

inline Criterion resolve(const CriterionSpec& spec, double logged_aggregate) {
  if (const auto* rel = std::get_if<ThresholdUplift>(&spec)) {
    return Criterion::threshold((1.0 + rel->uplift) * logged_aggregate);
  }
  return std::get<Criterion>(spec);
}

inline CriterionSpec criterion_spec_from_json(const Json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "identity") {
      return Criterion::identity();
    }
    if (type == "power") {
      return Criterion::power(j.at("kappa").get<double>());
    }
    if (type == "threshold") {
      return Criterion::threshold(j.at("xbar").get<double>());
    }
    if (type == "threshold_uplift") {
      return ThresholdUplift{j.at("uplift").get<double>()};
    }
    throw ConfigError("unknown criterion type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("criterion: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("criterion: ") + e.what());
  }
}

inline Json criterion_spec_to_json(const CriterionSpec& spec) {
  if (const auto* rel = std::get_if<ThresholdUplift>(&spec)) {
    return Json{{"type", "threshold_uplift"}, {"uplift", rel->uplift}};
  }
  return std::visit(
      [](const auto& c) -> Json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, criteria::Identity>) {
          return Json{{"type", "identity"}};
        } else if constexpr (std::is_same_v<T, criteria::Power>) {
          return Json{{"type", "power"}, {"kappa", c.kappa}};
        } else {
          return Json{{"type", "threshold"}, {"xbar", c.xbar}};
        }
      },
      std::get<Criterion>(spec).variant());
}

// ---------------------------------------------------------------------------
// Environment dump: {"K", "beta", "reward_probs", "logging_theta"}

inline Json environment_to_json(const BanditEnvironment& env) {
  Json logging_theta = Json::array();
  for (Eigen::Index a = 0; a < env.logging_policy.theta().cols(); ++a) {
    logging_theta.push_back(env.logging_policy.theta()(0, a));
  }
  return Json{{"K", env.num_actions},
              {"beta", env.beta},
              {"reward_probs", env.reward_probs},
              {"logging_theta", std::move(logging_theta)}};
}

inline BanditEnvironment environment_from_json(const Json& j) {
  try {
    BanditEnvironment env;
    env.num_actions = j.at("K").get<std::size_t>();
    env.beta = j.at("beta").get<double>();
    env.reward_probs = j.at("reward_probs").get<std::vector<double>>();
    env.logging_policy = SoftmaxPolicy::from_logits(j.at("logging_theta").get<std::vector<double>>());
    env.validate();
    return env;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("environment JSON: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("environment JSON: ") + e.what());
  }
}

}  // namespace aggropt

#endif  // AGGROPT_IO_HPP
