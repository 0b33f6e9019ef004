#include "svaclr/train.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <numbers>

#include "svaclr/errors.hpp"
#include "svaclr/kernels.hpp"
#include "svaclr/runtime.hpp"

namespace svaclr {

const char* variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::infonce_noaug: return "infonce_noaug";
    case LossVariant::infonce_speed: return "infonce_speed";
    case LossVariant::soft_infonce: return "soft_infonce";
  }
  return "?";
}

double lr_at(const TrainConfig& config, std::uint64_t step,
             std::uint64_t steps_per_epoch) {
  const std::uint64_t total = config.epochs * steps_per_epoch;
  const std::uint64_t warm = config.warmup_epochs * steps_per_epoch;
  const double peak = config.peak_lr;
  const double final_lr = peak * config.final_lr_ratio;
  if (step < warm) {
    const double t =
        static_cast<double>(step) / static_cast<double>(warm);
    return peak / 10.0 + (peak - peak / 10.0) * t;
  }
  if (total <= warm + 1) return step >= total ? final_lr : peak;
  const std::uint64_t last = total - 1;
  const double t = step >= last
                       ? 1.0
                       : static_cast<double>(step - warm) /
                             static_cast<double>(last - warm);
  return final_lr +
         (peak - final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
              OptimizerState& state, double lr, double momentum) {
  if (params.size() != grads.size() || params.size() != state.velocity.size())
    throw ShapeError("sgd_step: params/grads/velocity count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    const Tensor& g = grads[t];
    Tensor& v = state.velocity[t];
    if (!p.same_shape(g) || !p.same_shape(v))
      throw ShapeError("sgd_step: shape mismatch at parameter " +
                       std::to_string(t) + ": param " + shape_str(p) +
                       ", grad " + shape_str(g));
    for (std::size_t i = 0; i < p.numel(); ++i)
      v.data[i] = momentum * v.data[i] + g.data[i];
    kernels::axpy(-lr, v.data.data(), p.data.data(), p.numel());
  }
  ++state.step;
}

namespace {

void validate_train_config(const Dataset& dataset, const TrainConfig& cfg) {
  if (cfg.batch_size < 2)
    throw ConfigError("train: batch_size must be >= 2");
  if (cfg.warmup_epochs >= cfg.epochs)
    throw ConfigError("train: warmup_epochs must be < epochs");
  if (cfg.peak_lr < 0.0) throw ConfigError("train: peak_lr must be >= 0");
  if (dataset.clips.size() < cfg.batch_size)
    throw ConfigError("train: dataset has " +
                      std::to_string(dataset.clips.size()) +
                      " clips, need at least batch_size = " +
                      std::to_string(cfg.batch_size));
  // view building and featurization run inside parallel regions; bounds are
  // checked here so failures surface as exceptions, not terminations
  if (cfg.augment.audio_window < 2 * kAudioFeatureDim)
    throw ConfigError("train: audio_window must be >= " +
                      std::to_string(2 * kAudioFeatureDim));
  const SpeedFactor top{cfg.augment.max_speed};
  if (valid_offset_count(dataset.spec.raw_audio_len, top,
                         cfg.augment.audio_window) == 0 ||
      valid_offset_count(dataset.spec.raw_video_frames, top,
                         cfg.augment.video_window) == 0)
    throw ConfigError("train: clips too short for the configured windows at "
                      "max_speed " +
                      std::to_string(cfg.augment.max_speed));
}

std::vector<std::size_t> shuffled_indices(std::size_t count,
                                          std::uint64_t seed,
                                          std::uint64_t epoch) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(mix_seed(seed, rng_stream::shuffle, epoch));
  for (std::size_t i = count; i > 1; --i) {
    const std::size_t j = rng.uniform_int(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace

PretrainResult pretrain(const Dataset& dataset, const TrainConfig& config,
                        const MetricsSink& on_metrics,
                        const CheckpointSink& on_checkpoint) {
  validate_train_config(dataset, config);

  Rng init_rng(mix_seed(config.seed, rng_stream::model_init));
  ModelParams model =
      init_params(config.model, config.loss.mapping, init_rng);

  std::vector<Tensor*> param_ptrs;
  for_each_param(model, [&](Tensor& t) { param_ptrs.push_back(&t); });

  OptimizerState opt;
  for (Tensor* p : param_ptrs)
    opt.velocity.push_back(Tensor::zeros(p->shape));

  const std::size_t n = config.batch_size;
  const std::uint64_t steps_per_epoch = dataset.clips.size() / n;
  const std::size_t n_views =
      config.variant == LossVariant::infonce_noaug ? 1 : 2;

  PretrainResult result;
  result.metrics.reserve(config.epochs * steps_per_epoch);

  std::vector<ViewSet> batch(n);
  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order =
        shuffled_indices(dataset.clips.size(), config.seed, epoch);
    for (std::uint64_t b = 0; b < steps_per_epoch; ++b) {
      const auto wall_start = std::chrono::steady_clock::now();
      const std::uint64_t step = epoch * steps_per_epoch + b;
      const double lr = lr_at(config, step, steps_per_epoch);

      SpeedFactor tau1{1}, tau2{1};
      if (config.variant != LossVariant::infonce_noaug) {
        Rng speed_rng(mix_seed(config.seed, rng_stream::batch_speed, step));
        std::tie(tau1, tau2) = sample_speed_pair(speed_rng, config.augment);
      }

      // Per-clip rng streams keyed by (step, position): the batch is
      // identical whether views are built sequentially or in parallel.
#pragma omp parallel for schedule(static) \
    num_threads(runtime::thread_cap())
      for (std::int64_t k = 0; k < static_cast<std::int64_t>(n); ++k) {
        const std::size_t clip_idx =
            order[b * n + static_cast<std::size_t>(k)];
        Rng view_rng(mix_seed(config.seed, rng_stream::view_offsets,
                              step * n + static_cast<std::uint64_t>(k)));
        batch[static_cast<std::size_t>(k)] =
            make_views(dataset.clips[clip_idx], clip_idx, tau1, tau2,
                       view_rng, config.augment);
      }

      const Tensor audio_rows = audio_feature_rows(batch, n_views);
      const Tensor video_rows = video_flat_rows(batch, n_views);

      Tape tape;
      const ParamNodes nodes = stage_params(tape, model);
      const ForwardNodes fwd = forward_rows(tape, nodes, audio_rows, video_rows);

      Tape::NodeId loss_node;
      std::array<double, 4> mean_lambda{};
      if (config.variant == LossVariant::infonce_noaug) {
        loss_node =
            vanilla_info_nce_node(tape, fwd.z_audio, fwd.z_video, config.loss);
        mean_lambda = {1.0, 0.0, 0.0, 0.0};  // single view pair
      } else {
        MappingNodes mapping;
        mapping.kind = model.mapping.kind;
        mapping.tensors = nodes.mapping;
        const auto weighting = config.variant == LossVariant::soft_infonce
                                   ? AffinityWeighting::learned
                                   : AffinityWeighting::uniform;
        const SoftLossGraph graph =
            soft_info_nce_node(tape, fwd.y_audio, fwd.y_video, fwd.z_audio,
                               fwd.z_video, n, mapping, config.loss, weighting);
        loss_node = graph.loss;
        for (const AffinityMatrix& lam : graph.lambdas)
          for (std::size_t e = 0; e < 4; ++e)
            mean_lambda[e] += lam.lambda[e] / static_cast<double>(n);
      }

      const double loss_value = tape.value(loss_node).data[0];
      if (!std::isfinite(loss_value))
        throw NumericError("pretrain: non-finite loss at step " +
                           std::to_string(step) + " (lr " +
                           std::to_string(lr) + ", loss " +
                           std::to_string(loss_value) + ")");

      const auto grads = tape.backward(loss_node);
      std::vector<Tensor> grad_list;
      grad_list.reserve(param_ptrs.size());
      for (std::size_t t = 0; t < nodes.all.size(); ++t) {
        const Tensor& g = grads[nodes.all[t]];
        grad_list.push_back(g.empty() ? Tensor::zeros(param_ptrs[t]->shape)
                                      : g);
      }
      sgd_step(param_ptrs, grad_list, opt, lr, config.momentum);

      MetricsRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.loss = loss_value;
      rec.mean_lambda = mean_lambda;
      rec.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - wall_start)
                        .count();
      if (on_metrics) on_metrics(rec);
      result.metrics.push_back(rec);
    }
    if (on_checkpoint && config.checkpoint_every > 0 &&
        (epoch + 1) % config.checkpoint_every == 0)
      on_checkpoint(model, epoch + 1);
  }

  result.model = std::move(model);
  return result;
}

}  // namespace svaclr
