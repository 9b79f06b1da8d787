#include "kcdiff/trajopt.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace kcdiff {

namespace {

void check_trajectory(const ArmModel& arm, const Trajectory& tau) {
  if (tau.rows() < 2) throw std::invalid_argument("trajectory needs at least 2 waypoints");
  if (tau.cols() != arm.dof()) throw std::invalid_argument("trajectory dimension mismatch");
}

double collision_impl(const ArmModel& arm, const Environment& env, const Trajectory& tau,
                      double d_safe, int n_sub, Trajectory* grad) {
  check_trajectory(arm, tau);
  if (n_sub < 1) throw std::invalid_argument("n_sub must be >= 1");
  const Eigen::Index d = tau.cols();
  double cost = 0.0;
  Eigen::VectorXd g(d);
  for (Eigen::Index t = 0; t + 1 < tau.rows(); ++t) {
    for (int j = 0; j <= n_sub; ++j) {
      const double alpha = static_cast<double>(j) / n_sub;
      const Configuration q = (1.0 - alpha) * tau.row(t).transpose() + alpha * tau.row(t + 1).transpose();
      if (grad) {
        g.setZero();
        cost += clearance_hinge(arm, env, q, d_safe, &g);
        grad->row(t) += (1.0 - alpha) * g.transpose();
        grad->row(t + 1) += alpha * g.transpose();
      } else {
        cost += clearance_hinge(arm, env, q, d_safe);
      }
    }
  }
  return cost;
}

}  // namespace

double collision_cost(const ArmModel& arm, const Environment& env, const Trajectory& tau,
                      double d_safe, int n_sub) {
  return collision_impl(arm, env, tau, d_safe, n_sub, nullptr);
}

double collision_cost(const ArmModel& arm, const Environment& env, const Trajectory& tau,
                      double d_safe, int n_sub, Trajectory& grad) {
  grad = Trajectory::Zero(tau.rows(), tau.cols());
  return collision_impl(arm, env, tau, d_safe, n_sub, &grad);
}

double smoothness_cost(const Trajectory& tau) {
  if (tau.rows() < 2) throw std::invalid_argument("trajectory needs at least 2 waypoints");
  const Eigen::Index n = tau.rows() - 1;
  return (tau.bottomRows(n) - tau.topRows(n)).squaredNorm();
}

Trajectory smoothness_gradient(const Trajectory& tau) {
  const Eigen::Index n = tau.rows() - 1;
  const Trajectory diff = tau.bottomRows(n) - tau.topRows(n);
  Trajectory grad = Trajectory::Zero(tau.rows(), tau.cols());
  grad.bottomRows(n) += 2.0 * diff;
  grad.topRows(n) -= 2.0 * diff;
  return grad;
}

CostBreakdown trajectory_cost(const ArmModel& arm, const Environment& env, const Trajectory& tau,
                              const TrajOptParams& params) {
  CostBreakdown c;
  c.collision = collision_cost(arm, env, tau, params.d_safe, params.n_sub);
  c.smoothness = smoothness_cost(tau);
  c.total = c.collision + params.lambda * c.smoothness;
  return c;
}

Trajectory cost_gradient(const ArmModel& arm, const Environment& env, const Trajectory& tau,
                         const TrajOptParams& params) {
  Trajectory grad;
  collision_cost(arm, env, tau, params.d_safe, params.n_sub, grad);
  grad += params.lambda * smoothness_gradient(tau);
  grad.row(0).setZero();
  grad.row(tau.rows() - 1).setZero();
  return grad;
}

OptimizeResult optimize(const Trajectory& seed, const PlanningProblem& problem,
                        const ArmModel& arm, const TrajOptParams& params,
                        const IterationObserver& observer) {
  check_trajectory(arm, seed);
  if (params.iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  OptimizeResult result;
  result.tau = seed;
  const Environment& env = problem.env;
  CostBreakdown current = trajectory_cost(arm, env, result.tau, params);
  double step = params.learning_rate;
  for (int it = 0; it < params.iterations; ++it) {
    const Trajectory grad = cost_gradient(arm, env, result.tau, params);
    bool accepted = false;
    if (grad.squaredNorm() > 0.0) {
      double trial_step = step;
      for (int h = 0; h <= params.max_halvings; ++h, trial_step *= 0.5) {
        Trajectory trial = result.tau - trial_step * grad;
        const CostBreakdown trial_cost = trajectory_cost(arm, env, trial, params);
        if (trial_cost.total <= current.total) {
          result.tau = std::move(trial);
          current = trial_cost;
          accepted = true;
          break;
        }
      }
    }
    result.trace.push_back(current);
    result.accepted.push_back(accepted);
    step *= params.decay;
    if (observer) observer(it + 1, result.tau);
  }
  return result;
}

void write_trace_csv(std::ostream& out, const std::vector<CostBreakdown>& trace) {
  out << "iteration,collision,smoothness,total\n";
  out.precision(17);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << i + 1 << ',' << trace[i].collision << ',' << trace[i].smoothness << ','
        << trace[i].total << '\n';
  }
}

}  // namespace kcdiff
