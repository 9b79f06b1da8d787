#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kcdiff/denoiser.hpp"
#include "kcdiff/diffusion.hpp"
#include "kcdiff/io.hpp"
#include "kcdiff/keyconfig.hpp"
#include "kcdiff/problem.hpp"

namespace kcdiff {

struct TrainConfig {
  double w_diff = 1.0;
  double w_coll = 0.05;
  double w_smooth = 0.005;
  double lr = 1e-3;
  std::string lr_schedule = "constant";  // or "cosine": decays to lr_min over the planned steps
  double lr_min = 0.0;
  int warmup_steps = 0;                  // linear ramp from lr / warmup_steps to lr
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int epochs = 100;
  int max_steps = 0;          // 0 = no cap beyond epochs
  std::uint64_t seed = 0;
  int n_sub = 8;
  double d_safe = 0.01;
  int checkpoint_every = 0;   // steps; 0 disables

  void validate() const;
};

/// Learning rate for step `step` (0-based) of a run of `total` steps.
double learning_rate(const TrainConfig& c, std::int64_t step, std::int64_t total);

Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);

/// Parameters plus Adam moments and the metadata needed to sample from them.
struct TrainState {
  Denoiser model;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t step = 0;
  Normalizer normalizer;
  ScheduleKind schedule = ScheduleKind::Cosine;

  explicit TrainState(const DenoiserConfig& cfg);
};

void adam_update(TrainState& state, std::span<const double> grads, double lr, double beta1,
                 double beta2, double eps);

/// Binary container: "KCDIFFCK", u32 version, u64 header length, JSON header,
/// then little-endian float64 arrays in header order.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

struct LossTerms {
  double diffusion = 0.0;
  double collision = 0.0;
  double smoothness = 0.0;
  double total = 0.0;
};

/// One minibatch element: a normalized clean trajectory and its conditioning.
struct TrainingExample {
  const DatasetRecord* record = nullptr;
  Trajectory x0;         // normalized
  ModelCondition cond;   // step filled per draw
};

std::vector<TrainingExample> make_examples(std::span<const DatasetRecord> dataset,
                                           const Normalizer& normalizer);

struct LossContext {
  const NoiseSchedule& schedule;
  const TrainConfig& cfg;
  const ArmModel& arm;
  const Normalizer& normalizer;
};

/// Loss of one prediction v_pred for the endpoint-conditioned input x_t (rows 0
/// and T-1 clean) with target v_star. The diffusion term averages interior rows;
/// the auxiliary terms use x0_hat with its endpoint rows taken from x_t. When
/// d_v is given it receives d(total)/d(v_pred).
LossTerms prediction_loss(const Trajectory& v_pred, const Trajectory& x_t, const Trajectory& v_star,
                          int t, const Environment& env, const LossContext& ctx,
                          Trajectory* d_v = nullptr);

/// x_t = q_sample(x0) with the endpoint rows reset to x0's, then the mean over
/// the batch of w_diff * mean((v_pred - v)^2) + w_coll * collision + w_smooth * smoothness,
/// the auxiliary costs evaluated on the denormalized x0 reconstruction. When
/// grad is non-empty the parameter gradient is accumulated into it.
LossTerms batch_loss(const Denoiser& model, std::span<const TrainingExample> batch,
                     std::span<const int> steps, std::span<const Trajectory> noise,
                     const LossContext& ctx, std::span<double> grad = {});

/// Single-record form of batch_loss.
LossTerms training_loss(const Denoiser& model, const DatasetRecord& record, int t,
                        const Trajectory& eps, const LossContext& ctx);

struct TrainStepLog {
  std::int64_t step;
  LossTerms loss;
};

struct TrainResult {
  TrainState state;
  std::vector<LossTerms> epoch_means;
  std::vector<TrainStepLog> steps;
};

using CheckpointHook = std::function<void(const TrainState&)>;

/// Throws std::invalid_argument (empty dataset) when there is nothing to train on.
TrainResult train(std::span<const DatasetRecord> dataset, const KeyConfigSet& keys,
                  const TrainConfig& cfg, const NoiseSchedule& schedule,
                  const DenoiserConfig& model_cfg, const ArmModel& arm,
                  const CheckpointHook& on_checkpoint = {});

/// step,L_diff,L_coll,L_smooth,total
void write_loss_csv(std::ostream& out, const std::vector<TrainStepLog>& steps);

}  // namespace kcdiff
