#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "kcdiff/problem.hpp"
#include "kcdiff/world.hpp"

namespace kcdiff {

struct TrajOptParams {
  double d_safe = 0.01;     // hinge margin, meters
  double lambda = 2.0;      // smoothness weight
  int iterations = 100;
  double learning_rate = 0.02;
  double decay = 1.0;       // per-iteration multiplier on the initial step
  int max_halvings = 8;
  int n_sub = 8;            // sweep samples per segment
};

struct CostBreakdown {
  double collision = 0.0;
  double smoothness = 0.0;
  double total = 0.0;
};

/// Hinge sum max(0, d_safe - sd) over segments, the n_sub + 1 sweep samples of
/// each segment, and every clearance pair.
double collision_cost(const ArmModel& arm, const Environment& env, const Trajectory& tau,
                      double d_safe, int n_sub);

/// Same sum, with its derivative w.r.t. every waypoint (endpoint rows included).
double collision_cost(const ArmModel& arm, const Environment& env, const Trajectory& tau,
                      double d_safe, int n_sub, Trajectory& grad);

/// Sum of squared consecutive waypoint differences.
double smoothness_cost(const Trajectory& tau);
Trajectory smoothness_gradient(const Trajectory& tau);

CostBreakdown trajectory_cost(const ArmModel& arm, const Environment& env, const Trajectory& tau,
                              const TrajOptParams& params);

/// Gradient of the total cost; rows 0 and T-1 are zero.
Trajectory cost_gradient(const ArmModel& arm, const Environment& env, const Trajectory& tau,
                         const TrajOptParams& params);

struct OptimizeResult {
  Trajectory tau;
  std::vector<CostBreakdown> trace;  // cost of the current iterate after each iteration
  std::vector<bool> accepted;
};

/// Called after every iteration with (iterations completed, current iterate).
using IterationObserver = std::function<void(int, const Trajectory&)>;

/// Fixed-iteration gradient descent with backtracking (halve until the total
/// cost does not increase). Endpoint rows are never modified.
OptimizeResult optimize(const Trajectory& seed, const PlanningProblem& problem,
                        const ArmModel& arm, const TrajOptParams& params,
                        const IterationObserver& observer = {});

/// iteration,collision,smoothness,total
void write_trace_csv(std::ostream& out, const std::vector<CostBreakdown>& trace);

}  // namespace kcdiff
