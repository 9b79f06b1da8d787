#include "kcdiff/planners.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kcdiff {

namespace {

struct Tree {
  std::vector<Configuration> nodes;
  std::vector<int> parent;

  int add(Configuration q, int p) {
    nodes.push_back(std::move(q));
    parent.push_back(p);
    return static_cast<int>(nodes.size()) - 1;
  }

  [[nodiscard]] int nearest(const Configuration& q) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double dist = (nodes[i] - q).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  [[nodiscard]] Path branch(int node) const {
    Path out;
    for (int n = node; n >= 0; n = parent[n]) out.push_back(nodes[n]);
    return out;
  }
};

enum class Extend { Trapped, Advanced, Reached };

Extend extend(Tree& tree, const Configuration& target, const ArmModel& arm, const Environment& env,
              const RrtParams& params, int& new_node) {
  const int near = tree.nearest(target);
  const Configuration& from = tree.nodes[near];
  const Configuration delta = target - from;
  const double dist = delta.norm();
  const bool reaches = dist <= params.step_size;
  Configuration to = reaches ? target : Configuration(from + delta * (params.step_size / dist));
  if (!segment_free(arm, env, from, to, params.check_resolution)) return Extend::Trapped;
  new_node = tree.add(std::move(to), near);
  return reaches ? Extend::Reached : Extend::Advanced;
}

Configuration sample_uniform(const ArmModel& arm, Rng& rng) {
  Configuration q(arm.dof());
  for (int i = 0; i < arm.dof(); ++i) {
    q[i] = uniform(rng, arm.joint_limits[i].lo, arm.joint_limits[i].hi);
  }
  return q;
}

}  // namespace

const char* to_string(PlanStatus s) {
  switch (s) {
    case PlanStatus::Success: return "success";
    case PlanStatus::IterationBudget: return "iteration_budget";
    case PlanStatus::Timeout: return "timeout";
    case PlanStatus::InvalidEndpoints: return "invalid_endpoints";
  }
  return "unknown";
}

namespace {

// Upper bound on how far any point of the arm travels along the straight
// joint-space segment with increment delta: joint j moves every point beyond
// it on an arc of radius at most the remaining chain length.
double sweep_bound(const ArmModel& arm, const Configuration& delta) {
  double reach = 0.0;
  double bound = 0.0;
  for (int j = arm.dof() - 1; j >= 0; --j) {
    reach += arm.link_lengths[static_cast<std::size_t>(j)];
    bound += std::abs(delta[j]) * reach;
  }
  return bound;
}

// Clearance is 1-Lipschitz in the workspace displacement of each body, so an
// interval whose endpoint clearances both exceed the sweep bound is free
// (the bound covers link-link pairs, where both sides move). Otherwise bisect;
// anything still uncertified at the depth limit counts as colliding.
bool interval_free(const ArmModel& arm, const Environment& env, const Configuration& qa, double ca,
                   const Configuration& qb, double cb, int depth) {
  const double bound = sweep_bound(arm, qb - qa);
  if (std::min(ca, cb) > bound || (bound == 0.0 && std::min(ca, cb) >= 0.0)) return true;
  if (depth == 0) return false;
  const Configuration qm = 0.5 * (qa + qb);
  const double cm = signed_clearance(arm, env, qm);
  if (cm < 0.0) return false;
  return interval_free(arm, env, qa, ca, qm, cm, depth - 1) && interval_free(arm, env, qm, cm, qb, cb, depth - 1);
}

}  // namespace

bool segment_free(const ArmModel& arm, const Environment& env, const Configuration& a,
                  const Configuration& b, double resolution) {
  const double span = (b - a).cwiseAbs().maxCoeff();
  const int steps = std::max(1, static_cast<int>(std::ceil(span / resolution)));
  Configuration prev = a;
  double c_prev = signed_clearance(arm, env, a);
  if (c_prev < 0.0) return false;
  for (int j = 1; j <= steps; ++j) {
    const double alpha = static_cast<double>(j) / steps;
    Configuration q = (1.0 - alpha) * a + alpha * b;
    const double c = signed_clearance(arm, env, q);
    if (c < 0.0 || !interval_free(arm, env, prev, c_prev, q, c, 16)) return false;
    prev = std::move(q);
    c_prev = c;
  }
  return true;
}

bool path_free(const ArmModel& arm, const Environment& env, const Path& path, double resolution) {
  if (path.empty()) return false;
  if (path.size() == 1) return !in_collision(arm, env, path.front());
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!segment_free(arm, env, path[i], path[i + 1], resolution)) return false;
  }
  return true;
}

double path_length(const Path& path) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) len += (path[i + 1] - path[i]).norm();
  return len;
}

PlanResult birrt_plan(const PlanningProblem& problem, const ArmModel& arm, const RrtParams& params,
                      Rng& rng) {
  const Environment& env = problem.env;
  PlanResult result;
  if (in_collision(arm, env, problem.q_s) || in_collision(arm, env, problem.q_g)) {
    result.status = PlanStatus::InvalidEndpoints;
    return result;
  }
  if (problem.q_s == problem.q_g) {
    result.status = PlanStatus::Success;
    result.path = {problem.q_s};
    return result;
  }
  if (segment_free(arm, env, problem.q_s, problem.q_g, params.check_resolution)) {
    result.status = PlanStatus::Success;
    result.path = {problem.q_s, problem.q_g};
    return result;
  }

  const auto start_time = std::chrono::steady_clock::now();
  Tree start_tree;
  Tree goal_tree;
  start_tree.add(problem.q_s, -1);
  goal_tree.add(problem.q_g, -1);
  Tree* a = &start_tree;
  Tree* b = &goal_tree;
  std::bernoulli_distribution pick_goal(params.goal_bias);

  for (int it = 0; it < params.max_iterations; ++it) {
    result.iterations = it + 1;
    if (params.timeout > 0.0) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_time;
      if (elapsed.count() > params.timeout) {
        result.status = PlanStatus::Timeout;
        return result;
      }
    }
    const Configuration target = pick_goal(rng) ? b->nodes.front() : sample_uniform(arm, rng);
    int new_a = -1;
    if (extend(*a, target, arm, env, params, new_a) != Extend::Trapped) {
      const Configuration& q_new = a->nodes[new_a];
      int new_b = -1;
      Extend status = Extend::Advanced;
      while (status == Extend::Advanced) status = extend(*b, q_new, arm, env, params, new_b);
      if (status == Extend::Reached) {
        Path from_a = a->branch(new_a);  // q_new ... root_a
        Path from_b = b->branch(new_b);  // q_new ... root_b
        Path path(from_a.rbegin(), from_a.rend());
        path.insert(path.end(), from_b.begin() + 1, from_b.end());
        if (a == &goal_tree) path = Path(path.rbegin(), path.rend());
        result.status = PlanStatus::Success;
        result.path = std::move(path);
        return result;
      }
    }
    std::swap(a, b);
  }
  result.status = PlanStatus::IterationBudget;
  return result;
}

Path shortcut(const Path& path, const ArmModel& arm, const Environment& env, int iterations,
              double resolution, Rng& rng) {
  Path out = path;
  for (int it = 0; it < iterations && out.size() > 2; ++it) {
    std::uniform_int_distribution<std::size_t> pick(0, out.size() - 1);
    std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    if (i > j) std::swap(i, j);
    if (j - i < 2) continue;
    double skipped = 0.0;
    for (std::size_t k = i; k < j; ++k) skipped += (out[k + 1] - out[k]).norm();
    if ((out[j] - out[i]).norm() >= skipped) continue;
    if (!segment_free(arm, env, out[i], out[j], resolution)) continue;
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(i) + 1,
              out.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return out;
}

Trajectory resample_to_horizon(const Path& path, int horizon) {
  if (path.empty()) throw std::invalid_argument("cannot resample an empty path");
  if (horizon < 2) throw std::invalid_argument("horizon must be >= 2");
  const Eigen::Index d = path.front().size();
  Trajectory tau(horizon, d);
  if (path.size() == 1) {
    for (int r = 0; r < horizon; ++r) tau.row(r) = path.front().transpose();
    return tau;
  }
  std::vector<double> cumulative(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + (path[i] - path[i - 1]).norm();
  }
  const double total = cumulative.back();
  tau.row(0) = path.front().transpose();
  tau.row(horizon - 1) = path.back().transpose();
  std::size_t seg = 0;
  for (int r = 1; r + 1 < horizon; ++r) {
    const double s = total * r / (horizon - 1);
    while (seg + 2 < path.size() && cumulative[seg + 1] < s) ++seg;
    const double len = cumulative[seg + 1] - cumulative[seg];
    const double alpha = len > 0.0 ? std::clamp((s - cumulative[seg]) / len, 0.0, 1.0) : 0.0;
    tau.row(r) = ((1.0 - alpha) * path[seg] + alpha * path[seg + 1]).transpose();
  }
  return tau;
}

}  // namespace kcdiff
