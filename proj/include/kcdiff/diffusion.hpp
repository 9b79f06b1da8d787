#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kcdiff/denoiser.hpp"
#include "kcdiff/io.hpp"
#include "kcdiff/problem.hpp"
#include "kcdiff/random.hpp"
#include "kcdiff/trajopt.hpp"

namespace kcdiff {

enum class ScheduleKind { Cosine, Linear };

ScheduleKind schedule_kind_from_string(const std::string& s);
const char* to_string(ScheduleKind k);

/// alpha_bar[0] = 1, strictly decreasing to alpha_bar[N] > 0.
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::Cosine;
  int n_train_steps = 0;
  std::vector<double> alpha_bar;

  [[nodiscard]] double ab(int t) const { return alpha_bar.at(static_cast<std::size_t>(t)); }
};

NoiseSchedule make_schedule(ScheduleKind kind, int n_train_steps);

/// sqrt(ab_t) x0 + sqrt(1 - ab_t) eps
Trajectory q_sample(const Trajectory& x0, int t, const Trajectory& eps, const NoiseSchedule& s);
/// sqrt(ab_t) eps - sqrt(1 - ab_t) x0
Trajectory v_target(const Trajectory& x0, const Trajectory& eps, int t, const NoiseSchedule& s);
/// sqrt(ab_t) x_t - sqrt(1 - ab_t) v
Trajectory x0_from_v(const Trajectory& x_t, const Trajectory& v, int t, const NoiseSchedule& s);
/// sqrt(1 - ab_t) x_t + sqrt(ab_t) v
Trajectory eps_from_v(const Trajectory& x_t, const Trajectory& v, int t, const NoiseSchedule& s);

/// DDIM update t -> t_prev from a v prediction; eta = 0 is deterministic.
Trajectory ddim_step(const Trajectory& x_t, const Trajectory& v_pred, int t, int t_prev, double eta,
                     const NoiseSchedule& s, Rng& rng);

/// Overwrite rows 0 and T-1.
void apply_endpoint_constraint(Trajectory& tau, const Configuration& q_s, const Configuration& q_g);

/// Evenly spaced descending timesteps N = t_0 > ... > t_{n-1} >= 1; each DDIM
/// step goes to the next entry and the last one to 0.
std::vector<int> inference_timesteps(int n_train_steps, int n_infer_steps);

struct GuidanceParams {
  bool enabled = false;
  double kernel_sigma = 4.0;   // waypoints
  double d_max = 0.1;          // meters
  double k_smooth = 1e-9;
  double k_coll = 1e-2;
  double g_max = 1.0;
  int steps_per_iteration = 1;
  int n_sub = 8;

  void validate() const;
};

Json to_json(const GuidanceParams& gp);
GuidanceParams guidance_from_json(const Json& j);

/// Row-wise Gaussian smoothing along time (edge-renormalized weights) as an explicit T x T matrix.
Eigen::MatrixXd gaussian_smoothing_matrix(int horizon, double sigma);

/// Guidance cost k_smooth * smoothness + k_coll * hinge(d_max), both evaluated on
/// the smoothed, denormalized trajectory. Input is normalized.
double guidance_cost(const Trajectory& tau_norm, const ArmModel& arm, const Environment& env,
                     const GuidanceParams& gp, const Normalizer& normalizer);

/// Gradient of guidance_cost w.r.t. the normalized trajectory, each component
/// clamped to [-g_max, g_max], endpoint rows zero. Subtract it to descend.
Trajectory guidance_gradient(const Trajectory& tau_norm, const ArmModel& arm,
                             const Environment& env, const GuidanceParams& gp,
                             const Normalizer& normalizer);

/// Same gradient before clamping and endpoint zeroing.
Trajectory guidance_cost_gradient(const Trajectory& tau_norm, const ArmModel& arm,
                                  const Environment& env, const GuidanceParams& gp,
                                  const Normalizer& normalizer);

struct SamplerConfig {
  int n_infer_steps = 32;
  double eta = 0.0;
  int batch_size = 8;

  void validate(int n_train_steps) const;
};

Json to_json(const SamplerConfig& c);
SamplerConfig sampler_from_json(const Json& j);

/// Called after every denoising iteration with (iteration index, batch) in normalized coordinates.
using DenoiseObserver = std::function<void(int, const std::vector<Trajectory>&)>;

struct SamplingContext {
  const Denoiser& model;
  const NoiseSchedule& schedule;
  const Normalizer& normalizer;
  const ArmModel& arm;
};

/// Batched DDIM denoising conditioned on (phi, q_s, q_g, step). Batch element b
/// draws its noise from derive_seed(seed, b). Returns denormalized trajectories.
std::vector<Trajectory> sample_batch(const SamplingContext& ctx, const SamplerConfig& cfg,
                                     const PlanningProblem& problem, const EnvRepresentation& phi,
                                     const GuidanceParams& gp, std::uint64_t seed,
                                     const DenoiseObserver& observer = {});

/// Number of waypoints in collision.
int colliding_waypoints(const ArmModel& arm, const Environment& env, const Trajectory& tau);

/// Fewest colliding waypoints, then lowest total cost, then lowest index.
std::size_t best_trajectory_index(const std::vector<Trajectory>& candidates, const ArmModel& arm,
                                  const Environment& env, const TrajOptParams& params = {});

const Trajectory& best_trajectory(const std::vector<Trajectory>& candidates, const ArmModel& arm,
                                  const Environment& env, const TrajOptParams& params = {});

}  // namespace kcdiff
