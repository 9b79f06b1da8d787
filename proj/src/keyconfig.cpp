#include "kcdiff/keyconfig.hpp"

#include <limits>
#include <string>

namespace kcdiff {

void KeyConfigParams::validate() const {
  if (!(d_q_min > 0.0)) throw std::invalid_argument("d_q_min must be positive");
  if (!(d_x_min > 0.0)) throw std::invalid_argument("d_x_min must be positive");
  if (!(c > 0.0 && c < 0.5)) throw std::invalid_argument("c must lie in (0, 0.5)");
  if (K < 1) throw std::invalid_argument("K must be >= 1");
}

BudgetExhausted::BudgetExhausted(int accepted_count, int wanted, int attempts)
    : std::runtime_error("key-configuration selection accepted " + std::to_string(accepted_count) +
                         " of " + std::to_string(wanted) + " after " + std::to_string(attempts) +
                         " attempts"),
      accepted(accepted_count) {}

double cspace_distance(const Configuration& a, const Configuration& b) {
  if (a.size() != b.size()) throw std::invalid_argument("configuration dimensions differ");
  return (a - b).norm();
}

double collision_proportion(const ArmModel& arm, std::span<const DatasetRecord> dataset,
                            const Configuration& q) {
  if (dataset.empty()) return 0.0;
  int hits = 0;
  for (const DatasetRecord& r : dataset) hits += in_collision(arm, r.problem.env, q) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

KeyConfigSet select_key_configurations(std::span<const DatasetRecord> dataset, const ArmModel& arm,
                                       const KeyConfigParams& params, Rng& rng) {
  params.validate();
  if (dataset.empty()) throw std::invalid_argument("key-configuration selection needs a dataset");
  KeyConfigSet keys;
  keys.params = params;
  std::uniform_int_distribution<std::size_t> pick_record(0, dataset.size() - 1);
  const int budget = params.attempt_budget();
  int attempts = 0;
  while (static_cast<int>(keys.size()) < params.K) {
    if (attempts++ >= budget) {
      throw BudgetExhausted(static_cast<int>(keys.size()), params.K, budget);
    }
    const DatasetRecord& record = dataset[pick_record(rng)];
    std::uniform_int_distribution<Eigen::Index> pick_row(0, record.tau.rows() - 1);
    const Configuration q = record.tau.row(pick_row(rng)).transpose();
    const Vec2 tip = forward_kinematics(arm, q).tip;

    double d_q = std::numeric_limits<double>::infinity();
    double d_x = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < keys.size(); ++k) {
      d_q = std::min(d_q, cspace_distance(q, keys.configs[k]));
      d_x = std::min(d_x, (tip - keys.tips[k]).norm());
    }
    if (!(d_q > params.d_q_min && d_x > params.d_x_min)) continue;
    const double p_c = collision_proportion(arm, dataset, q);
    if (!(p_c > params.c && p_c < 1.0 - params.c)) continue;
    keys.configs.push_back(q);
    keys.tips.push_back(tip);
  }
  return keys;
}

EnvRepresentation env_representation(const KeyConfigSet& keys, const ArmModel& arm,
                                     const Environment& env) {
  if (keys.configs.empty()) throw std::invalid_argument("no key configurations");
  EnvRepresentation phi;
  phi.bits.reserve(keys.size());
  for (const Configuration& q : keys.configs) phi.bits.push_back(in_collision(arm, env, q) ? 1 : 0);
  return phi;
}

Json to_json(const KeyConfigSet& keys) {
  Json configs = Json::array();
  for (const Configuration& q : keys.configs) configs.push_back(to_json(q));
  const KeyConfigParams& p = keys.params;
  return {{"params",
           {{"d_q_min", p.d_q_min}, {"d_x_min", p.d_x_min}, {"c", p.c}, {"K", p.K},
            {"max_attempts", p.attempt_budget()}}},
          {"configs", configs}};
}

KeyConfigSet keyconfig_from_json(const Json& j, const ArmModel& arm) {
  KeyConfigSet keys;
  const Json& p = j.at("params");
  keys.params.d_q_min = p.at("d_q_min").get<double>();
  keys.params.d_x_min = p.at("d_x_min").get<double>();
  keys.params.c = p.at("c").get<double>();
  keys.params.K = p.at("K").get<int>();
  keys.params.max_attempts = p.value("max_attempts", 0);
  for (const Json& q : j.at("configs")) {
    keys.configs.push_back(configuration_from_json(q));
    keys.tips.push_back(forward_kinematics(arm, keys.configs.back()).tip);
  }
  return keys;
}

}  // namespace kcdiff
