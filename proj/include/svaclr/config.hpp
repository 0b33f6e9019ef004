#pragma once

#include <string>

#include <json.hpp>

#include "svaclr/datagen.hpp"
#include "svaclr/train.hpp"

namespace svaclr {

// One JSON document configures a whole run. Unknown keys are rejected at
// every level; parsing materializes every default so the persisted resolved
// config replays the run bit-exactly.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir;
  DatasetSpec dataset;
  AugmentConfig augment;
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;  // scalar fields; sections are synced by finalize
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Propagates the top-level seed and the section configs into the nested
// TrainConfig/DatasetSpec, derives model input dims, and validates
// cross-field constraints (Nyquist at max speed, window fits, dims).
void finalize_run_config(RunConfig& cfg);

nlohmann::json run_config_to_json(const RunConfig& cfg);
void save_resolved_config(const RunConfig& cfg, const std::string& path);

LossVariant parse_variant(const std::string& name);

}  // namespace svaclr
