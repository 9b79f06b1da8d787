#include "kcdiff/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace kcdiff {

void TrainConfig::validate() const {
  if (w_diff < 0.0 || w_coll < 0.0 || w_smooth < 0.0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (lr_schedule != "constant" && lr_schedule != "cosine") {
    throw std::invalid_argument("lr_schedule must be constant or cosine");
  }
  if (lr_min < 0.0 || lr_min > lr) throw std::invalid_argument("lr_min must lie in [0, lr]");
  if (warmup_steps < 0) throw std::invalid_argument("warmup_steps must be non-negative");
  if (batch_size < 1 || epochs < 0 || max_steps < 0 || n_sub < 1 || checkpoint_every < 0) {
    throw std::invalid_argument("bad training loop sizes");
  }
}

double learning_rate(const TrainConfig& c, std::int64_t step, std::int64_t total) {
  if (step < c.warmup_steps) return c.lr * static_cast<double>(step + 1) / c.warmup_steps;
  if (c.lr_schedule == "constant" || total - c.warmup_steps <= 1) return c.lr;
  const double progress = std::min(
      1.0, static_cast<double>(step - c.warmup_steps) / static_cast<double>(total - c.warmup_steps - 1));
  return c.lr_min + 0.5 * (c.lr - c.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

Json to_json(const TrainConfig& c) {
  return {{"w_diff", c.w_diff},     {"w_coll", c.w_coll},       {"w_smooth", c.w_smooth},
          {"lr", c.lr},             {"lr_schedule", c.lr_schedule}, {"lr_min", c.lr_min}, {"warmup_steps", c.warmup_steps},
          {"beta1", c.beta1},         {"beta2", c.beta2},
          {"adam_eps", c.adam_eps}, {"batch_size", c.batch_size}, {"epochs", c.epochs},
          {"max_steps", c.max_steps}, {"seed", c.seed},         {"n_sub", c.n_sub},
          {"d_safe", c.d_safe},     {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.w_diff = j.value("w_diff", c.w_diff);
  c.w_coll = j.value("w_coll", c.w_coll);
  c.w_smooth = j.value("w_smooth", c.w_smooth);
  c.lr = j.value("lr", c.lr);
  c.lr_schedule = j.value("lr_schedule", c.lr_schedule);
  c.lr_min = j.value("lr_min", c.lr_min);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.seed = j.value("seed", c.seed);
  c.n_sub = j.value("n_sub", c.n_sub);
  c.d_safe = j.value("d_safe", c.d_safe);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.validate();
  return c;
}

std::vector<TrainingExample> make_examples(std::span<const DatasetRecord> dataset,
                                           const Normalizer& normalizer) {
  std::vector<TrainingExample> out;
  out.reserve(dataset.size());
  for (const DatasetRecord& r : dataset) {
    if (!r.phi) throw std::invalid_argument("dataset record lacks a phi annotation");
    TrainingExample ex;
    ex.record = &r;
    ex.x0 = normalizer.normalize(r.tau);
    ex.cond.phi = r.phi->as_vector();
    ex.cond.q_s = normalizer.normalize(r.problem.q_s);
    ex.cond.q_g = normalizer.normalize(r.problem.q_g);
    out.push_back(std::move(ex));
  }
  return out;
}

LossTerms prediction_loss(const Trajectory& v_pred, const Trajectory& x_t, const Trajectory& v_star,
                          int t, const Environment& env, const LossContext& ctx, Trajectory* d_v) {
  const TrainConfig& cfg = ctx.cfg;
  const NoiseSchedule& sched = ctx.schedule;
  const Eigen::Index T = v_pred.rows();
  if (T < 3) throw std::invalid_argument("prediction_loss needs at least one interior waypoint");
  const bool aux = cfg.w_coll > 0.0 || cfg.w_smooth > 0.0;
  // Endpoint rows of x_t are clean (conditioned), so their v target depends on
  // noise the model never sees; the diffusion term covers interior rows only.
  const Eigen::Index inner = T - 2;
  const auto diff = (v_pred.middleRows(1, inner) - v_star.middleRows(1, inner)).eval();
  const double n_elem = static_cast<double>(diff.size());
  LossTerms l;
  l.diffusion = diff.squaredNorm() / n_elem;
  Trajectory g_q;
  if (aux) {
    Trajectory x0_hat = x0_from_v(x_t, v_pred, t, sched);
    x0_hat.row(0) = x_t.row(0);
    x0_hat.row(T - 1) = x_t.row(T - 1);
    const Trajectory q_hat = ctx.normalizer.denormalize(x0_hat);
    if (d_v) {
      l.collision = collision_cost(ctx.arm, env, q_hat, cfg.d_safe, cfg.n_sub, g_q);
      g_q *= cfg.w_coll;
      g_q += cfg.w_smooth * smoothness_gradient(q_hat);
      g_q.row(0).setZero();
      g_q.row(T - 1).setZero();
    } else {
      l.collision = collision_cost(ctx.arm, env, q_hat, cfg.d_safe, cfg.n_sub);
    }
    l.smoothness = smoothness_cost(q_hat);
  }
  l.total = cfg.w_diff * l.diffusion + cfg.w_coll * l.collision + cfg.w_smooth * l.smoothness;
  if (d_v) {
    d_v->setZero(T, v_pred.cols());
    d_v->middleRows(1, inner) = (2.0 * cfg.w_diff / n_elem) * diff;
    if (aux) {
      // q_hat = center + half * (sqrt(ab) x_t - sqrt(1 - ab) v) on interior rows
      const double coef = -std::sqrt(1.0 - sched.ab(t));
      for (Eigen::Index r = 1; r + 1 < T; ++r) {
        d_v->row(r) += coef * g_q.row(r).cwiseProduct(ctx.normalizer.half_range().transpose());
      }
    }
  }
  return l;
}

LossTerms batch_loss(const Denoiser& model, std::span<const TrainingExample> batch,
                     std::span<const int> steps, std::span<const Trajectory> noise,
                     const LossContext& ctx, std::span<double> grad) {
  const std::size_t B = batch.size();
  if (B == 0 || steps.size() != B || noise.size() != B) {
    throw std::invalid_argument("batch, steps and noise sizes differ");
  }
  const NoiseSchedule& sched = ctx.schedule;
  std::vector<Trajectory> x_t(B);
  std::vector<Trajectory> v_star(B);
  std::vector<ModelCondition> cond(B);
  for (std::size_t b = 0; b < B; ++b) {
    x_t[b] = q_sample(batch[b].x0, steps[b], noise[b], sched);
    // Endpoint conditioning as at sampling time: the model sees clean endpoint rows.
    x_t[b].row(0) = batch[b].x0.row(0);
    x_t[b].row(x_t[b].rows() - 1) = batch[b].x0.row(batch[b].x0.rows() - 1);
    v_star[b] = v_target(batch[b].x0, noise[b], steps[b], sched);
    cond[b] = batch[b].cond;
    cond[b].step = steps[b];
  }
  ForwardTape tape;
  const std::vector<Trajectory> v_pred = model.forward(x_t, cond, tape);

  const bool want_grad = !grad.empty();
  const double inv_b = 1.0 / static_cast<double>(B);
  LossTerms sum;
  std::vector<Trajectory> d_v(want_grad ? B : 0);
  for (std::size_t b = 0; b < B; ++b) {
    const LossTerms l = prediction_loss(v_pred[b], x_t[b], v_star[b], steps[b],
                                        batch[b].record->problem.env, ctx,
                                        want_grad ? &d_v[b] : nullptr);
    sum.diffusion += l.diffusion;
    sum.collision += l.collision;
    sum.smoothness += l.smoothness;
    sum.total += l.total;
    if (want_grad) d_v[b] *= inv_b;
  }
  if (want_grad) model.backward(tape, d_v, grad);
  sum.diffusion *= inv_b;
  sum.collision *= inv_b;
  sum.smoothness *= inv_b;
  sum.total *= inv_b;
  return sum;
}

LossTerms training_loss(const Denoiser& model, const DatasetRecord& record, int t,
                        const Trajectory& eps, const LossContext& ctx) {
  const std::vector<TrainingExample> ex = make_examples(std::span(&record, 1), ctx.normalizer);
  const int steps[1] = {t};
  return batch_loss(model, ex, steps, std::span(&eps, 1), ctx);
}

TrainResult train(std::span<const DatasetRecord> dataset, const KeyConfigSet& keys,
                  const TrainConfig& cfg, const NoiseSchedule& schedule,
                  const DenoiserConfig& model_cfg, const ArmModel& arm,
                  const CheckpointHook& on_checkpoint) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  if (model_cfg.n_keys != static_cast<int>(keys.size())) {
    throw std::invalid_argument("model n_keys differs from the key-configuration count");
  }
  if (model_cfg.n_train_steps != schedule.n_train_steps) {
    throw std::invalid_argument("model n_train_steps differs from the schedule");
  }
  TrainResult result{TrainState(model_cfg), {}, {}};
  TrainState& state = result.state;
  state.normalizer = Normalizer(arm);
  state.schedule = schedule.kind;
  state.model.initialize(derive_seed(cfg.seed, 0));

  const std::vector<TrainingExample> examples = make_examples(dataset, state.normalizer);
  for (const TrainingExample& ex : examples) {
    if (static_cast<int>(ex.cond.phi.size()) != model_cfg.n_keys) {
      throw std::invalid_argument("record phi length differs from the key count");
    }
  }
  Rng rng(derive_seed(cfg.seed, 1));
  std::uniform_int_distribution<int> pick_t(1, schedule.n_train_steps);
  const LossContext ctx{schedule, cfg, arm, state.normalizer};
  std::vector<double> grad(state.model.parameter_count());
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::int64_t per_epoch = (static_cast<std::int64_t>(examples.size()) + cfg.batch_size - 1) / cfg.batch_size;
  std::int64_t planned = per_epoch * cfg.epochs;
  if (cfg.max_steps > 0) planned = std::min<std::int64_t>(planned, cfg.max_steps);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.max_steps > 0 && state.step >= cfg.max_steps) break;
    std::shuffle(order.begin(), order.end(), rng);
    LossTerms epoch_sum;
    int n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      if (cfg.max_steps > 0 && state.step >= cfg.max_steps) break;
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<TrainingExample> batch;
      std::vector<int> steps;
      std::vector<Trajectory> noise;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(examples[order[i]]);
        steps.push_back(pick_t(rng));
        noise.push_back(standard_normal(rng, model_cfg.horizon, model_cfg.dof));
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const LossTerms l = batch_loss(state.model, batch, steps, noise, ctx, grad);
      adam_update(state, grad, learning_rate(cfg, state.step, planned), cfg.beta1, cfg.beta2, cfg.adam_eps);
      result.steps.push_back({state.step, l});
      epoch_sum.diffusion += l.diffusion;
      epoch_sum.collision += l.collision;
      epoch_sum.smoothness += l.smoothness;
      epoch_sum.total += l.total;
      ++n_batches;
      if (on_checkpoint && cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0) {
        on_checkpoint(state);
      }
    }
    if (n_batches > 0) {
      const double inv = 1.0 / n_batches;
      result.epoch_means.push_back({epoch_sum.diffusion * inv, epoch_sum.collision * inv,
                                    epoch_sum.smoothness * inv, epoch_sum.total * inv});
    }
  }
  return result;
}

void write_loss_csv(std::ostream& out, const std::vector<TrainStepLog>& steps) {
  out << "step,L_diff,L_coll,L_smooth,total\n";
  out.precision(17);
  for (const TrainStepLog& s : steps) {
    out << s.step << ',' << s.loss.diffusion << ',' << s.loss.collision << ','
        << s.loss.smoothness << ',' << s.loss.total << '\n';
  }
}

}  // namespace kcdiff
