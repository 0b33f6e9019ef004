#include <doctest.h>

#include <string>

#include "svaclr/config.hpp"

using namespace svaclr;
using nlohmann::json;

TEST_CASE("empty config materializes every default") {
  const RunConfig cfg = parse_run_config(json::object());
  CHECK(cfg.dataset.num_classes == 8);
  CHECK(cfg.augment.max_speed == 4);
  CHECK(cfg.model.repr_dim == 64);
  CHECK(cfg.model.audio_in == 128);
  CHECK(cfg.model.video_in == 8 * 16);
  CHECK(cfg.loss.eta == 0.1);
  CHECK(cfg.train.epochs == 30);
  CHECK(cfg.train.final_lr_ratio == 0.15625);
  CHECK(cfg.train.variant == LossVariant::soft_infonce);

  const json resolved = run_config_to_json(cfg);
  CHECK(resolved.contains("seed"));
  CHECK(resolved["dataset"].contains("freq_ratio"));
  CHECK(resolved["train"]["warmup_epochs"] == 3);
  CHECK(resolved["loss"]["direction"] == "both");

  // re-parsing the resolved config reproduces it
  const RunConfig again = parse_run_config(resolved);
  CHECK(run_config_to_json(again) == resolved);
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    parse_run_config(json{{"speeed", 3}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("speeed") != std::string::npos);
  }

  try {
    parse_run_config(json{{"augment", {{"max_sped", 2}}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("max_sped") != std::string::npos);
    CHECK(msg.find("augment") != std::string::npos);
  }
}

TEST_CASE("type errors and enum values are validated") {
  CHECK_THROWS_AS(parse_run_config(json{{"seed", "abc"}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"train", {{"epochs", -3}}}}),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_run_config(json{{"dataset", {{"num_classes", -1}}}}),
      ConfigError);
  CHECK_THROWS_AS(
      parse_run_config(json{{"train", {{"variant", "info_nce"}}}}),
      ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"loss", {{"mapping", "mlp"}}}}),
                  ConfigError);
  CHECK_NOTHROW(parse_run_config(json{{"loss", {{"mapping", "nonlinear"}}}}));
}

TEST_CASE("cross-field validation") {
  // warmup must stay below epochs
  CHECK_THROWS_AS(parse_run_config(
                      json{{"train", {{"epochs", 3}, {"warmup_epochs", 3}}}}),
                  ConfigError);
  // Nyquist at max speed
  CHECK_THROWS_AS(parse_run_config(json{{"augment", {{"max_speed", 32}}}}),
                  ConfigError);
  // raw audio too short for the window at top speed
  CHECK_THROWS_AS(
      parse_run_config(json{{"dataset", {{"raw_audio_len", 600}}}}),
      ConfigError);
  // derived dims must match when given explicitly
  CHECK_THROWS_AS(parse_run_config(json{{"model", {{"video_in", 64}}}}),
                  ConfigError);
  CHECK_NOTHROW(parse_run_config(json{{"model", {{"video_in", 128}}}}));
  CHECK_THROWS_AS(parse_run_config(json{{"model", {{"audio_in", 64}}}}),
                  ConfigError);
}

TEST_CASE("seed propagates into the nested configs") {
  RunConfig cfg = parse_run_config(json{{"seed", 99}});
  CHECK(cfg.dataset.seed == 99);
  CHECK(cfg.train.seed == 99);
  cfg.seed = 7;
  finalize_run_config(cfg);
  CHECK(cfg.dataset.seed == 7);
  CHECK(cfg.train.seed == 7);
  CHECK(cfg.train.augment.max_speed == cfg.augment.max_speed);
}
