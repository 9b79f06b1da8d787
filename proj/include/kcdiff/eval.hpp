#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kcdiff/dataset.hpp"
#include "kcdiff/diffusion.hpp"
#include "kcdiff/keyconfig.hpp"
#include "kcdiff/planners.hpp"
#include "kcdiff/training.hpp"
#include "kcdiff/trajopt.hpp"

namespace kcdiff {

struct TrajectoryMetrics {
  bool success = false;
  double collision_rate = 0.0;     // colliding segments / (T - 1)
  double penetration_depth = 0.0;  // meters, max over sweep samples
};

/// Segment t collides iff its swept clearance (n_sub + 1 samples) is negative.
TrajectoryMetrics evaluate_trajectory(const ArmModel& arm, const Environment& env,
                                      const Trajectory& tau, int n_sub = 32);

/// Method ids: diffusion_trajopt, diffusion, trajopt, birrt, straight_line.
bool is_known_method(const std::string& id);
const std::vector<std::string>& known_methods();

/// Everything a method runner may need. model is required for the diffusion methods.
struct MethodContext {
  ArmModel arm = ArmModel::planar_default();
  const KeyConfigSet* keys = nullptr;
  const TrainState* model = nullptr;
  std::optional<NoiseSchedule> schedule;
  SamplerConfig sampler;
  GuidanceParams guidance;
  TrajOptParams trajopt;
  RrtParams rrt;
  int horizon = 48;
  int trajopt_seeds = 8;            // straight line plus perturbed restarts
  double perturb_scale = 0.3;       // radians, amplitude of the restart bumps
  int rrt_iterations_per_budget = 10;
  int rrt_shortcut_iterations = 50;
  int eval_n_sub = 32;

  void validate_for(const std::string& method) const;
};

struct MethodRun {
  std::vector<int> budgets;
  std::vector<Trajectory> trajectories;  // selected trajectory per budget
  std::vector<TrajectoryMetrics> metrics;
  std::vector<Trajectory> candidates;    // raw seeds or samples before optimization
  double representation_ms = 0.0;
  double sampling_ms = 0.0;
  double opt_ms = 0.0;
};

/// Runs one method on one problem for every budget. Budgets are optimizer
/// iterations (Bi-RRT: multiplied by rrt_iterations_per_budget to give its
/// iteration cap). The diffusion methods draw their noise from `seed`.
MethodRun run_method(const std::string& method, const PlanningProblem& problem,
                     const MethodContext& ctx, std::span<const int> budgets, std::uint64_t seed);

/// Straight C-space line from q_s to q_g with `horizon` waypoints.
Trajectory straight_line(const Configuration& q_s, const Configuration& q_g, int horizon);

/// Straight line plus n - 1 restarts with smooth random bumps on the interior.
std::vector<Trajectory> trajopt_seeds(const PlanningProblem& problem, const ArmModel& arm,
                                      int horizon, int n, double scale, Rng& rng);

struct ProblemResult {
  std::string method;
  int level = 0;
  int budget = 0;
  int problem = 0;
  TrajectoryMetrics metrics;
  double sampling_ms = 0.0;
  double opt_ms = 0.0;
};

struct BenchmarkRow {
  std::string method;
  int level = 0;
  int budget = 0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double penetration_depth = 0.0;           // mean over all problems
  double failure_penetration_depth = 0.0;   // mean over failed problems only (0 if none)
  int n_problems = 0;
  double sampling_ms = 0.0;
  double opt_ms = 0.0;
};

struct BenchmarkConfig {
  std::vector<std::string> methods{"diffusion_trajopt", "trajopt", "birrt", "diffusion"};
  std::vector<int> levels{1, 2, 3, 4};
  int n_problems = 100;
  std::vector<int> budgets{0, 10, 25, 50, 100, 200};
  std::uint64_t seed = 0;
  int workers = 1;
  bool record_timings = false;  // timing columns are 0 otherwise, keeping output reproducible
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<ProblemResult> per_problem;
};

/// Held-out problems for one level: the first n successful draws under
/// derive_seed(seed, level).
std::vector<PlanningProblem> benchmark_problems(const DomainConfig& domain, int level, int n,
                                                std::uint64_t seed);

BenchmarkResult run_benchmark(const DomainConfig& domain, const MethodContext& ctx,
                              const BenchmarkConfig& cfg);

/// Mean of the per-problem results grouped by (method, level, budget), in
/// first-appearance order.
std::vector<BenchmarkRow> aggregate(std::span<const ProblemResult> results);

/// method,level,budget,success_rate,collision_rate,penetration_depth,n,sampling_ms,opt_ms,failure_penetration_depth
void write_benchmark_csv(std::ostream& out, std::span<const BenchmarkRow> rows);
void write_problem_csv(std::ostream& out, std::span<const ProblemResult> results);

/// Success rate against budget, one line per method, for one level.
std::string success_plot_svg(std::span<const BenchmarkRow> rows, int level);

/// benchmark.csv, problems.csv and success_level<L>.svg under dir.
void write_benchmark_outputs(const BenchmarkResult& result, const std::filesystem::path& dir);

}  // namespace kcdiff
