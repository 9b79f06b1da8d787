#include "kcdiff/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "kcdiff/parallel.hpp"

namespace kcdiff {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Trajectory path_to_trajectory(const Path& path) {
  Trajectory tau(static_cast<Eigen::Index>(path.size()), path.front().size());
  for (std::size_t i = 0; i < path.size(); ++i) tau.row(static_cast<Eigen::Index>(i)) = path[i].transpose();
  return tau;
}

std::vector<int> sorted_unique(std::span<const int> budgets) {
  std::vector<int> out(budgets.begin(), budgets.end());
  for (int b : out) {
    if (b < 0) throw std::invalid_argument("budgets must be >= 0");
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Optimizes every candidate up to the largest budget and returns, per budget,
// the iterate each candidate had after that many iterations.
std::vector<std::vector<Trajectory>> optimize_snapshots(const std::vector<Trajectory>& seeds,
                                                        const PlanningProblem& problem,
                                                        const ArmModel& arm,
                                                        const TrajOptParams& base,
                                                        const std::vector<int>& budgets) {
  std::vector<std::vector<Trajectory>> snaps(budgets.size(), std::vector<Trajectory>(seeds.size()));
  const int k_max = budgets.back();
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    for (std::size_t b = 0; b < budgets.size() && budgets[b] == 0; ++b) snaps[b][s] = seeds[s];
    if (k_max == 0) continue;
    TrajOptParams p = base;
    p.iterations = k_max;
    optimize(seeds[s], problem, arm, p, [&](int done, const Trajectory& tau) {
      for (std::size_t b = 0; b < budgets.size(); ++b) {
        if (budgets[b] == done) snaps[b][s] = tau;
      }
    });
  }
  return snaps;
}

void select_per_budget(MethodRun& run, const std::vector<std::vector<Trajectory>>& snaps,
                       const PlanningProblem& problem, const MethodContext& ctx) {
  for (std::size_t b = 0; b < run.budgets.size(); ++b) {
    const Trajectory& best = best_trajectory(snaps[b], ctx.arm, problem.env, ctx.trajopt);
    run.trajectories.push_back(best);
    run.metrics.push_back(evaluate_trajectory(ctx.arm, problem.env, best, ctx.eval_n_sub));
  }
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

}  // namespace

TrajectoryMetrics evaluate_trajectory(const ArmModel& arm, const Environment& env,
                                      const Trajectory& tau, int n_sub) {
  if (tau.rows() == 0) throw std::invalid_argument("empty trajectory");
  TrajectoryMetrics m;
  if (tau.rows() == 1) {
    const double c = signed_clearance(arm, env, tau.row(0).transpose());
    m.success = c >= 0.0;
    m.collision_rate = m.success ? 0.0 : 1.0;
    m.penetration_depth = std::max(0.0, -c);
    return m;
  }
  int colliding = 0;
  double min_clearance = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t + 1 < tau.rows(); ++t) {
    const double c = swept_clearance(arm, env, tau.row(t).transpose(), tau.row(t + 1).transpose(), n_sub);
    if (c < 0.0) ++colliding;
    min_clearance = std::min(min_clearance, c);
  }
  m.success = colliding == 0;
  m.collision_rate = static_cast<double>(colliding) / static_cast<double>(tau.rows() - 1);
  m.penetration_depth = std::max(0.0, -min_clearance);
  return m;
}

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> ids{"diffusion_trajopt", "diffusion", "trajopt", "birrt",
                                            "straight_line"};
  return ids;
}

bool is_known_method(const std::string& id) {
  const auto& ids = known_methods();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

void MethodContext::validate_for(const std::string& method) const {
  if (!is_known_method(method)) throw std::invalid_argument("unknown method id '" + method + "'");
  if (method == "diffusion_trajopt" || method == "diffusion") {
    if (keys == nullptr || model == nullptr || !schedule) {
      throw std::invalid_argument("method '" + method + "' needs key configurations and a model");
    }
    if (keys->size() != static_cast<std::size_t>(model->model.config().n_keys)) {
      throw std::invalid_argument("key count does not match the model");
    }
    if (model->model.config().horizon != horizon) {
      throw std::invalid_argument("model horizon does not match the evaluation horizon");
    }
  }
  if (method == "trajopt" && trajopt_seeds < 1) throw std::invalid_argument("trajopt_seeds must be >= 1");
}

Trajectory straight_line(const Configuration& q_s, const Configuration& q_g, int horizon) {
  if (horizon < 2) throw std::invalid_argument("horizon must be >= 2");
  Trajectory tau(horizon, q_s.size());
  for (int t = 0; t < horizon; ++t) {
    const double s = static_cast<double>(t) / (horizon - 1);
    tau.row(t) = ((1.0 - s) * q_s + s * q_g).transpose();
  }
  tau.row(0) = q_s.transpose();
  tau.row(horizon - 1) = q_g.transpose();
  return tau;
}

std::vector<Trajectory> trajopt_seeds(const PlanningProblem& problem, const ArmModel& arm,
                                      int horizon, int n, double scale, Rng& rng) {
  std::vector<Trajectory> seeds;
  seeds.push_back(straight_line(problem.q_s, problem.q_g, horizon));
  std::normal_distribution<double> normal(0.0, scale);
  for (int i = 1; i < n; ++i) {
    Trajectory tau = seeds.front();
    Eigen::VectorXd amp(arm.dof());
    for (int j = 0; j < arm.dof(); ++j) amp[j] = normal(rng);
    for (int t = 1; t + 1 < horizon; ++t) {
      const double bump = std::sin(std::numbers::pi * t / (horizon - 1));
      for (int j = 0; j < arm.dof(); ++j) {
        tau(t, j) = std::clamp(tau(t, j) + bump * amp[j], arm.joint_limits[j].lo, arm.joint_limits[j].hi);
      }
    }
    seeds.push_back(std::move(tau));
  }
  return seeds;
}

MethodRun run_method(const std::string& method, const PlanningProblem& problem,
                     const MethodContext& ctx, std::span<const int> budgets, std::uint64_t seed) {
  ctx.validate_for(method);
  MethodRun run;
  run.budgets = sorted_unique(budgets);
  if (run.budgets.empty()) throw std::invalid_argument("no budgets given");

  if (method == "diffusion_trajopt" || method == "diffusion") {
    auto start = Clock::now();
    const EnvRepresentation phi = env_representation(*ctx.keys, ctx.arm, problem.env);
    run.representation_ms = ms_since(start);
    start = Clock::now();
    const SamplingContext sc{ctx.model->model, *ctx.schedule, ctx.model->normalizer, ctx.arm};
    run.candidates = sample_batch(sc, ctx.sampler, problem, phi, ctx.guidance, seed);
    run.sampling_ms = ms_since(start);
    if (method == "diffusion") run.budgets = {0};
    start = Clock::now();
    const auto snaps = optimize_snapshots(run.candidates, problem, ctx.arm, ctx.trajopt, run.budgets);
    run.opt_ms = ms_since(start);
    select_per_budget(run, snaps, problem, ctx);
  } else if (method == "trajopt") {
    Rng rng(seed);
    run.candidates = trajopt_seeds(problem, ctx.arm, ctx.horizon, ctx.trajopt_seeds, ctx.perturb_scale, rng);
    const auto start = Clock::now();
    const auto snaps = optimize_snapshots(run.candidates, problem, ctx.arm, ctx.trajopt, run.budgets);
    run.opt_ms = ms_since(start);
    select_per_budget(run, snaps, problem, ctx);
  } else if (method == "straight_line") {
    run.budgets = {0};
    run.candidates = {straight_line(problem.q_s, problem.q_g, ctx.horizon)};
    run.trajectories = run.candidates;
    run.metrics.push_back(evaluate_trajectory(ctx.arm, problem.env, run.candidates[0], ctx.eval_n_sub));
  } else {  // birrt
    const auto start = Clock::now();
    for (int budget : run.budgets) {
      // Same stream for every budget, so a larger cap only extends the search.
      Rng rng(seed);
      RrtParams p = ctx.rrt;
      p.max_iterations = budget * ctx.rrt_iterations_per_budget;
      const PlanResult plan = birrt_plan(problem, ctx.arm, p, rng);
      Trajectory tau;
      TrajectoryMetrics m;
      if (plan.ok()) {
        const Path path = shortcut(plan.path, ctx.arm, problem.env, ctx.rrt_shortcut_iterations,
                                   p.check_resolution, rng);
        tau = path_to_trajectory(path);
        m = evaluate_trajectory(ctx.arm, problem.env, tau, ctx.eval_n_sub);
      } else {
        // No path: scored on the straight line, and never a success.
        tau = straight_line(problem.q_s, problem.q_g, ctx.horizon);
        m = evaluate_trajectory(ctx.arm, problem.env, tau, ctx.eval_n_sub);
        if (m.success) {
          m.success = false;
          m.collision_rate = 1.0;
        }
      }
      run.trajectories.push_back(std::move(tau));
      run.metrics.push_back(m);
    }
    run.opt_ms = ms_since(start);
  }
  return run;
}

std::vector<PlanningProblem> benchmark_problems(const DomainConfig& domain, int level, int n,
                                                std::uint64_t seed) {
  DomainConfig d = domain;
  d.level = level;
  const std::uint64_t level_seed = derive_seed(seed, static_cast<std::uint64_t>(level));
  std::vector<PlanningProblem> out;
  const std::uint64_t max_draws = static_cast<std::uint64_t>(n) * 20 + 100;
  for (std::uint64_t i = 0; static_cast<int>(out.size()) < n; ++i) {
    if (i >= max_draws) throw std::runtime_error("could not draw enough benchmark problems");
    std::optional<PlanningProblem> p = draw_problem(d, level_seed, i);
    if (p) out.push_back(std::move(*p));
  }
  return out;
}

BenchmarkResult run_benchmark(const DomainConfig& domain, const MethodContext& ctx,
                              const BenchmarkConfig& cfg) {
  if (cfg.n_problems <= 0) throw std::invalid_argument("n_problems must be > 0");
  for (const std::string& m : cfg.methods) ctx.validate_for(m);
  BenchmarkResult result;
  for (int level : cfg.levels) {
    const std::vector<PlanningProblem> problems = benchmark_problems(domain, level, cfg.n_problems, cfg.seed);
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      const std::string& method = cfg.methods[mi];
      // Common random numbers: every method sees the same stream per problem,
      // so diffusion and diffusion_trajopt share their samples.
      const std::uint64_t method_seed = derive_seed(derive_seed(cfg.seed, 1000), level);
      std::vector<MethodRun> runs(problems.size());
      parallel_for(problems.size(), cfg.workers, [&](std::size_t i) {
        runs[i] = run_method(method, problems[i], ctx, cfg.budgets, derive_seed(method_seed, i));
      });
      for (std::size_t b = 0; b < runs.front().budgets.size(); ++b) {
        for (std::size_t i = 0; i < runs.size(); ++i) {
          ProblemResult r;
          r.method = method;
          r.level = level;
          r.budget = runs[i].budgets[b];
          r.problem = static_cast<int>(i);
          r.metrics = runs[i].metrics[b];
          if (cfg.record_timings) {
            r.sampling_ms = runs[i].sampling_ms + runs[i].representation_ms;
            r.opt_ms = runs[i].opt_ms;
          }
          result.per_problem.push_back(std::move(r));
        }
      }
    }
  }
  result.rows = aggregate(result.per_problem);
  return result;
}

std::vector<BenchmarkRow> aggregate(std::span<const ProblemResult> results) {
  std::vector<BenchmarkRow> rows;
  std::map<std::tuple<std::string, int, int>, std::size_t> index;
  std::vector<int> failures;
  for (const ProblemResult& r : results) {
    const auto key = std::make_tuple(r.method, r.level, r.budget);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      BenchmarkRow row;
      row.method = r.method;
      row.level = r.level;
      row.budget = r.budget;
      rows.push_back(row);
      failures.push_back(0);
    }
    BenchmarkRow& row = rows[it->second];
    row.n_problems += 1;
    row.success_rate += r.metrics.success ? 1.0 : 0.0;
    row.collision_rate += r.metrics.collision_rate;
    row.penetration_depth += r.metrics.penetration_depth;
    if (!r.metrics.success) {
      row.failure_penetration_depth += r.metrics.penetration_depth;
      failures[it->second] += 1;
    }
    row.sampling_ms += r.sampling_ms;
    row.opt_ms += r.opt_ms;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    BenchmarkRow& row = rows[i];
    const double n = row.n_problems;
    row.success_rate /= n;
    row.collision_rate /= n;
    row.penetration_depth /= n;
    row.sampling_ms /= n;
    row.opt_ms /= n;
    if (failures[i] > 0) row.failure_penetration_depth /= failures[i];
  }
  return rows;
}

void write_benchmark_csv(std::ostream& out, std::span<const BenchmarkRow> rows) {
  out << "method,level,budget,success_rate,collision_rate,penetration_depth,n,sampling_ms,opt_ms,"
         "failure_penetration_depth\n";
  for (const BenchmarkRow& r : rows) {
    out << r.method << ',' << r.level << ',' << r.budget << ',' << fmt(r.success_rate) << ','
        << fmt(r.collision_rate) << ',' << fmt(r.penetration_depth) << ',' << r.n_problems << ','
        << fmt(r.sampling_ms) << ',' << fmt(r.opt_ms) << ',' << fmt(r.failure_penetration_depth) << '\n';
  }
}

void write_problem_csv(std::ostream& out, std::span<const ProblemResult> results) {
  out << "method,level,budget,problem,success,collision_rate,penetration_depth\n";
  for (const ProblemResult& r : results) {
    out << r.method << ',' << r.level << ',' << r.budget << ',' << r.problem << ','
        << (r.metrics.success ? 1 : 0) << ',' << fmt(r.metrics.collision_rate) << ','
        << fmt(r.metrics.penetration_depth) << '\n';
  }
}

void write_benchmark_outputs(const BenchmarkResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream rows;
  write_benchmark_csv(rows, result.rows);
  write_text_file(dir / "benchmark.csv", rows.str());
  std::ostringstream problems;
  write_problem_csv(problems, result.per_problem);
  write_text_file(dir / "problems.csv", problems.str());
  std::vector<int> levels;
  for (const BenchmarkRow& r : result.rows) {
    if (std::find(levels.begin(), levels.end(), r.level) == levels.end()) levels.push_back(r.level);
  }
  for (int level : levels) {
    write_text_file(dir / ("success_level" + std::to_string(level) + ".svg"),
                    success_plot_svg(result.rows, level));
  }
}

}  // namespace kcdiff
