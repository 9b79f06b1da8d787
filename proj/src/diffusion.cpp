#include "kcdiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kcdiff {

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "cosine") return ScheduleKind::Cosine;
  if (s == "linear") return ScheduleKind::Linear;
  throw std::invalid_argument("unknown schedule '" + s + "'");
}

const char* to_string(ScheduleKind k) { return k == ScheduleKind::Cosine ? "cosine" : "linear"; }

NoiseSchedule make_schedule(ScheduleKind kind, int n) {
  if (n < 1) throw std::invalid_argument("schedule needs N >= 1");
  NoiseSchedule s;
  s.kind = kind;
  s.n_train_steps = n;
  s.alpha_bar.resize(static_cast<std::size_t>(n) + 1);
  s.alpha_bar[0] = 1.0;
  constexpr double kMaxBeta = 0.999;
  if (kind == ScheduleKind::Cosine) {
    constexpr double kOffset = 0.008;
    auto f = [&](int t) {
      const double c = std::cos((static_cast<double>(t) / n + kOffset) / (1.0 + kOffset) *
                                std::numbers::pi / 2.0);
      return c * c;
    };
    const double f0 = f(0);
    for (int t = 1; t <= n; ++t) {
      const double ratio = f(t) / f(t - 1);
      s.alpha_bar[t] = ratio > 1.0 - kMaxBeta ? f(t) / f0 : s.alpha_bar[t - 1] * (1.0 - kMaxBeta);
    }
  } else {
    // Betas from 1e-4 to 0.02 at N = 1000, rescaled for other N.
    const double scale = 1000.0 / n;
    const double lo = scale * 1e-4;
    const double hi = std::min(scale * 0.02, kMaxBeta);
    for (int t = 1; t <= n; ++t) {
      const double beta = n == 1 ? hi : lo + (hi - lo) * (t - 1) / (n - 1);
      s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - beta);
    }
  }
  return s;
}

Trajectory q_sample(const Trajectory& x0, int t, const Trajectory& eps, const NoiseSchedule& s) {
  const double a = s.ab(t);
  return std::sqrt(a) * x0 + std::sqrt(1.0 - a) * eps;
}

Trajectory v_target(const Trajectory& x0, const Trajectory& eps, int t, const NoiseSchedule& s) {
  const double a = s.ab(t);
  return std::sqrt(a) * eps - std::sqrt(1.0 - a) * x0;
}

Trajectory x0_from_v(const Trajectory& x_t, const Trajectory& v, int t, const NoiseSchedule& s) {
  const double a = s.ab(t);
  return std::sqrt(a) * x_t - std::sqrt(1.0 - a) * v;
}

Trajectory eps_from_v(const Trajectory& x_t, const Trajectory& v, int t, const NoiseSchedule& s) {
  const double a = s.ab(t);
  return std::sqrt(1.0 - a) * x_t + std::sqrt(a) * v;
}

Trajectory ddim_step(const Trajectory& x_t, const Trajectory& v_pred, int t, int t_prev, double eta,
                     const NoiseSchedule& s, Rng& rng) {
  if (!(t_prev < t)) throw std::invalid_argument("ddim_step needs t_prev < t");
  const Trajectory x0 = x0_from_v(x_t, v_pred, t, s);
  const Trajectory eps = eps_from_v(x_t, v_pred, t, s);
  const double a_t = s.ab(t);
  const double a_prev = s.ab(t_prev);
  const double sigma =
      eta * std::sqrt((1.0 - a_prev) / (1.0 - a_t)) * std::sqrt(1.0 - a_t / a_prev);
  const double dir = std::sqrt(std::max(0.0, 1.0 - a_prev - sigma * sigma));
  Trajectory out = std::sqrt(a_prev) * x0 + dir * eps;
  if (sigma > 0.0) out += sigma * standard_normal(rng, x_t.rows(), x_t.cols());
  return out;
}

void apply_endpoint_constraint(Trajectory& tau, const Configuration& q_s, const Configuration& q_g) {
  tau.row(0) = q_s.transpose();
  tau.row(tau.rows() - 1) = q_g.transpose();
}

std::vector<int> inference_timesteps(int n_train_steps, int n_infer_steps) {
  if (n_infer_steps < 1 || n_infer_steps > n_train_steps) {
    throw std::invalid_argument("n_infer_steps must lie in [1, N]");
  }
  std::vector<int> steps;
  steps.reserve(n_infer_steps);
  for (int k = n_infer_steps; k >= 1; --k) {
    steps.push_back(static_cast<int>(std::lround(static_cast<double>(k) * n_train_steps / n_infer_steps)));
  }
  return steps;
}

void GuidanceParams::validate() const {
  if (kernel_sigma < 0.0 || d_max < 0.0 || k_smooth < 0.0 || k_coll < 0.0) {
    throw std::invalid_argument("guidance weights must be non-negative");
  }
  if (!(g_max > 0.0)) throw std::invalid_argument("g_max must be positive");
  if (steps_per_iteration < 0 || n_sub < 1) throw std::invalid_argument("bad guidance step counts");
}

Json to_json(const GuidanceParams& gp) {
  return {{"enabled", gp.enabled},   {"kernel_sigma", gp.kernel_sigma},
          {"d_max", gp.d_max},       {"k_smooth", gp.k_smooth},
          {"k_coll", gp.k_coll},     {"g_max", gp.g_max},
          {"steps_per_iteration", gp.steps_per_iteration}, {"n_sub", gp.n_sub}};
}

GuidanceParams guidance_from_json(const Json& j) {
  GuidanceParams gp;
  gp.enabled = j.value("enabled", gp.enabled);
  gp.kernel_sigma = j.value("kernel_sigma", gp.kernel_sigma);
  gp.d_max = j.value("d_max", gp.d_max);
  gp.k_smooth = j.value("k_smooth", gp.k_smooth);
  gp.k_coll = j.value("k_coll", gp.k_coll);
  gp.g_max = j.value("g_max", gp.g_max);
  gp.steps_per_iteration = j.value("steps_per_iteration", gp.steps_per_iteration);
  gp.n_sub = j.value("n_sub", gp.n_sub);
  gp.validate();
  return gp;
}

Eigen::MatrixXd gaussian_smoothing_matrix(int horizon, double sigma) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Identity(horizon, horizon);
  if (sigma <= 0.0) return k;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  for (int i = 0; i < horizon; ++i) {
    double total = 0.0;
    for (int j = std::max(0, i - radius); j <= std::min(horizon - 1, i + radius); ++j) {
      const double w = std::exp(-0.5 * (i - j) * (i - j) / (sigma * sigma));
      k(i, j) = w;
      total += w;
    }
    k.row(i) /= total;
  }
  return k;
}

namespace {

double guidance_cost_impl(const Trajectory& tau_norm, const ArmModel& arm, const Environment& env,
                          const GuidanceParams& gp, const Normalizer& normalizer,
                          Trajectory* grad) {
  const Eigen::MatrixXd kernel = gaussian_smoothing_matrix(static_cast<int>(tau_norm.rows()), gp.kernel_sigma);
  const Trajectory smoothed = normalizer.denormalize(Trajectory(kernel * tau_norm));
  double cost = 0.0;
  Trajectory g_smoothed;
  if (grad) {
    cost += gp.k_coll * collision_cost(arm, env, smoothed, gp.d_max, gp.n_sub, g_smoothed);
    g_smoothed *= gp.k_coll;
    g_smoothed += gp.k_smooth * smoothness_gradient(smoothed);
    // Chain through the denormalization (per-joint scale) and the linear smoother.
    for (Eigen::Index r = 0; r < g_smoothed.rows(); ++r) {
      g_smoothed.row(r) = g_smoothed.row(r).cwiseProduct(normalizer.half_range().transpose());
    }
    *grad = kernel.transpose() * g_smoothed;
  } else {
    cost += gp.k_coll * collision_cost(arm, env, smoothed, gp.d_max, gp.n_sub);
  }
  cost += gp.k_smooth * smoothness_cost(smoothed);
  return cost;
}

}  // namespace

double guidance_cost(const Trajectory& tau_norm, const ArmModel& arm, const Environment& env,
                     const GuidanceParams& gp, const Normalizer& normalizer) {
  return guidance_cost_impl(tau_norm, arm, env, gp, normalizer, nullptr);
}

Trajectory guidance_cost_gradient(const Trajectory& tau_norm, const ArmModel& arm,
                                  const Environment& env, const GuidanceParams& gp,
                                  const Normalizer& normalizer) {
  Trajectory grad;
  guidance_cost_impl(tau_norm, arm, env, gp, normalizer, &grad);
  return grad;
}

Trajectory guidance_gradient(const Trajectory& tau_norm, const ArmModel& arm,
                             const Environment& env, const GuidanceParams& gp,
                             const Normalizer& normalizer) {
  Trajectory grad = guidance_cost_gradient(tau_norm, arm, env, gp, normalizer);
  grad = grad.cwiseMax(-gp.g_max).cwiseMin(gp.g_max);
  grad.row(0).setZero();
  grad.row(grad.rows() - 1).setZero();
  return grad;
}

void SamplerConfig::validate(int n_train_steps) const {
  if (n_infer_steps < 1 || n_infer_steps > n_train_steps) {
    throw std::invalid_argument("n_infer_steps must lie in [1, N]");
  }
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("eta must lie in [0, 1]");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

Json to_json(const SamplerConfig& c) {
  return {{"n_infer_steps", c.n_infer_steps}, {"eta", c.eta}, {"batch_size", c.batch_size}};
}

SamplerConfig sampler_from_json(const Json& j) {
  SamplerConfig c;
  c.n_infer_steps = j.value("n_infer_steps", c.n_infer_steps);
  c.eta = j.value("eta", c.eta);
  c.batch_size = j.value("batch_size", c.batch_size);
  return c;
}

std::vector<Trajectory> sample_batch(const SamplingContext& ctx, const SamplerConfig& cfg,
                                     const PlanningProblem& problem, const EnvRepresentation& phi,
                                     const GuidanceParams& gp, std::uint64_t seed,
                                     const DenoiseObserver& observer) {
  const DenoiserConfig& mc = ctx.model.config();
  cfg.validate(ctx.schedule.n_train_steps);
  if (static_cast<int>(phi.size()) != mc.n_keys) {
    throw std::invalid_argument("phi length does not match the model's key count");
  }
  const int B = cfg.batch_size;
  const Configuration qs = ctx.normalizer.normalize(problem.q_s);
  const Configuration qg = ctx.normalizer.normalize(problem.q_g);

  std::vector<Rng> rngs;
  std::vector<Trajectory> x;
  rngs.reserve(B);
  x.reserve(B);
  for (int b = 0; b < B; ++b) {
    rngs.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(b)));
    x.push_back(standard_normal(rngs.back(), mc.horizon, mc.dof));
    apply_endpoint_constraint(x.back(), qs, qg);
  }
  std::vector<ModelCondition> cond(B, ModelCondition{0, phi.as_vector(), qs, qg});

  const std::vector<int> steps = inference_timesteps(ctx.schedule.n_train_steps, cfg.n_infer_steps);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const int t = steps[i];
    const int t_prev = i + 1 < steps.size() ? steps[i + 1] : 0;
    for (ModelCondition& c : cond) c.step = t;
    const std::vector<Trajectory> v = ctx.model.forward(x, cond);
    for (int b = 0; b < B; ++b) {
      x[b] = ddim_step(x[b], v[b], t, t_prev, cfg.eta, ctx.schedule, rngs[b]);
      apply_endpoint_constraint(x[b], qs, qg);
      if (gp.enabled) {
        for (int g = 0; g < gp.steps_per_iteration; ++g) {
          x[b] -= guidance_gradient(x[b], ctx.arm, problem.env, gp, ctx.normalizer);
        }
      }
    }
    if (observer) observer(static_cast<int>(i), x);
  }
  std::vector<Trajectory> out;
  out.reserve(B);
  for (const Trajectory& xb : x) {
    Trajectory q = ctx.normalizer.denormalize(xb);
    // Exact endpoints in joint space (denormalize(normalize(q)) may round).
    apply_endpoint_constraint(q, problem.q_s, problem.q_g);
    out.push_back(std::move(q));
  }
  return out;
}

int colliding_waypoints(const ArmModel& arm, const Environment& env, const Trajectory& tau) {
  int count = 0;
  for (Eigen::Index r = 0; r < tau.rows(); ++r) {
    count += in_collision(arm, env, tau.row(r).transpose()) ? 1 : 0;
  }
  return count;
}

std::size_t best_trajectory_index(const std::vector<Trajectory>& candidates, const ArmModel& arm,
                                  const Environment& env, const TrajOptParams& params) {
  if (candidates.empty()) throw std::invalid_argument("no candidate trajectories");
  std::size_t best = 0;
  int best_count = colliding_waypoints(arm, env, candidates[0]);
  double best_cost = trajectory_cost(arm, env, candidates[0], params).total;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const int count = colliding_waypoints(arm, env, candidates[i]);
    if (count > best_count) continue;
    const double cost = trajectory_cost(arm, env, candidates[i], params).total;
    if (count < best_count || cost < best_cost) {
      best = i;
      best_count = count;
      best_cost = cost;
    }
  }
  return best;
}

const Trajectory& best_trajectory(const std::vector<Trajectory>& candidates, const ArmModel& arm,
                                  const Environment& env, const TrajOptParams& params) {
  return candidates[best_trajectory_index(candidates, arm, env, params)];
}

}  // namespace kcdiff
