#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "svaclr/datagen.hpp"
#include "svaclr/loss.hpp"
#include "svaclr/model.hpp"

namespace svaclr {

enum class LossVariant : std::uint32_t {
  infonce_noaug = 0,   // speed-1 views only, vanilla InfoNCE
  infonce_speed = 1,   // four views, uniform lambda
  soft_infonce = 2,    // four views, learned lambda
};

const char* variant_name(LossVariant v);

struct TrainConfig {
  std::uint32_t epochs = 30;
  std::uint32_t batch_size = 64;
  double peak_lr = 0.01;
  std::uint32_t warmup_epochs = 3;
  double final_lr_ratio = 0.15625;  // cosine floor as a fraction of peak_lr
  double momentum = 0.9;
  std::uint64_t seed = 0;
  LossVariant variant = LossVariant::soft_infonce;
  std::uint32_t checkpoint_every = 0;  // epochs; 0 = final checkpoint only
  AugmentConfig augment;
  LossConfig loss;
  ModelConfig model;
};

struct OptimizerState {
  std::vector<Tensor> velocity;  // canonical parameter order
  std::uint64_t step = 0;
};

struct MetricsRecord {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::array<double, 4> mean_lambda{};  // [p * 2 + q], mean over the batch
  double wall_ms = 0.0;  // in-memory only; excluded from serialized metrics
};

// Linear ramp from peak_lr/10 to peak_lr across the warmup steps, then
// cosine decay to peak_lr * final_lr_ratio at the final step.
double lr_at(const TrainConfig& config, std::uint64_t step,
             std::uint64_t steps_per_epoch);

// v <- momentum * v + g; p <- p - lr * v
void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
              OptimizerState& state, double lr, double momentum);

struct PretrainResult {
  ModelParams model;
  std::vector<MetricsRecord> metrics;
};

using MetricsSink = std::function<void(const MetricsRecord&)>;
using CheckpointSink =
    std::function<void(const ModelParams&, std::uint32_t epoch)>;

// Full pre-training loop: seeded shuffle per epoch, one speed pair per
// batch, views with per-clip rng streams, forward/backward on a fresh tape,
// SGD update, one metrics record per step. Aborts with NumericError when the
// loss goes non-finite.
PretrainResult pretrain(const Dataset& dataset, const TrainConfig& config,
                        const MetricsSink& on_metrics = {},
                        const CheckpointSink& on_checkpoint = {});

}  // namespace svaclr
