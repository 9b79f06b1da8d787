#pragma once

#include <vector>

#include "kcdiff/problem.hpp"
#include "kcdiff/random.hpp"
#include "kcdiff/world.hpp"

namespace kcdiff {

struct RrtParams {
  double step_size = 0.2;          // radians
  double goal_bias = 0.1;
  int max_iterations = 20000;
  double check_resolution = 0.02;  // radians
  double timeout = 0.0;            // seconds; 0 disables the wall-clock limit
};

/// Variable-length waypoint sequence joined by straight C-space segments.
using Path = std::vector<Configuration>;

enum class PlanStatus { Success, IterationBudget, Timeout, InvalidEndpoints };

struct PlanResult {
  PlanStatus status = PlanStatus::IterationBudget;
  Path path;
  int iterations = 0;

  [[nodiscard]] bool ok() const { return status == PlanStatus::Success; }
};

const char* to_string(PlanStatus s);

/// True when the whole segment [a, b] is certified collision-free: samples at
/// `resolution` (max-joint step), with intervals between samples certified by
/// clearance against a bound on the arm's workspace sweep and bisected where
/// that bound is not met. Conservative: contact closer than the bisection
/// limit resolves counts as a collision.
bool segment_free(const ArmModel& arm, const Environment& env, const Configuration& a,
                  const Configuration& b, double resolution);

bool path_free(const ArmModel& arm, const Environment& env, const Path& path, double resolution);

double path_length(const Path& path);

/// RRT-Connect: alternately extend one tree and greedily connect the other.
PlanResult birrt_plan(const PlanningProblem& problem, const ArmModel& arm, const RrtParams& params,
                      Rng& rng);

/// Random shortcutting; never lengthens the path and keeps it collision-free.
Path shortcut(const Path& path, const ArmModel& arm, const Environment& env, int iterations,
              double resolution, Rng& rng);

/// Arc-length-uniform resampling onto T waypoints; endpoints copied exactly.
Trajectory resample_to_horizon(const Path& path, int horizon);

}  // namespace kcdiff
