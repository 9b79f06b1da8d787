#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "kcdiff/io.hpp"
#include "kcdiff/problem.hpp"
#include "kcdiff/random.hpp"
#include "kcdiff/world.hpp"

namespace kcdiff {

struct KeyConfigParams {
  double d_q_min = 0.15;   // radians
  double d_x_min = 0.05;   // meters, tip separation
  double c = 0.05;         // collision proportion must lie in (c, 1 - c)
  int K = 64;
  int max_attempts = 0;    // 0 selects 200 * K

  void validate() const;
  [[nodiscard]] int attempt_budget() const { return max_attempts > 0 ? max_attempts : 200 * K; }
};

struct KeyConfigSet {
  KeyConfigParams params;
  std::vector<Configuration> configs;
  std::vector<Vec2> tips;

  [[nodiscard]] std::size_t size() const { return configs.size(); }
};

/// Selection ran out of attempts before accepting K configurations.
class BudgetExhausted : public std::runtime_error {
 public:
  BudgetExhausted(int accepted, int wanted, int attempts);
  int accepted;
};

/// Euclidean joint-angle distance (no wraparound).
double cspace_distance(const Configuration& a, const Configuration& b);

/// Empirical fraction of the dataset environments in which q collides.
double collision_proportion(const ArmModel& arm, std::span<const DatasetRecord> dataset,
                            const Configuration& q);

/// Rejection-samples waypoints of dataset trajectories, keeping those that are
/// far from every accepted key in C-space and tip position and whose collision
/// proportion over the dataset environments lies strictly inside (c, 1 - c).
KeyConfigSet select_key_configurations(std::span<const DatasetRecord> dataset, const ArmModel& arm,
                                       const KeyConfigParams& params, Rng& rng);

/// Bit k is 1 iff key k collides in env.
EnvRepresentation env_representation(const KeyConfigSet& keys, const ArmModel& arm,
                                     const Environment& env);

Json to_json(const KeyConfigSet& keys);
KeyConfigSet keyconfig_from_json(const Json& j, const ArmModel& arm);

}  // namespace kcdiff
