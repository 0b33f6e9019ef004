#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "svaclr/commands.hpp"
#include "svaclr/errors.hpp"

namespace {

// Exit codes: 2 config, 3 I/O, 4 numeric abort, 5 checkpoint.
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitCheckpoint = 5;

struct CommonFlags {
  std::string config_path;
  std::string data_dir;
  std::string out_dir;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::uint32_t> max_speed;
  std::vector<std::uint32_t> speeds;
};

svaclr::RunConfig load_with_overrides(const CommonFlags& flags) {
  svaclr::RunConfig cfg = svaclr::load_run_config(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.variant) cfg.train.variant = svaclr::parse_variant(*flags.variant);
  if (flags.max_speed) cfg.augment.max_speed = *flags.max_speed;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (cfg.out_dir.empty())
    throw svaclr::ConfigError("no output directory: pass --out or set \"out\"");
  svaclr::finalize_run_config(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "svaclr: speed co-augmented audio-visual contrastive pre-training on a "
      "synthetic paired corpus"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* gen = app.add_subcommand("generate",
                                 "synthesize the train/test dataset files");
  gen->add_option("--config", flags.config_path, "run config JSON")->required();
  gen->add_option("--out", flags.out_dir, "output directory");
  gen->add_option("--seed", flags.seed, "override the config seed");

  auto* pre = app.add_subcommand("pretrain", "run contrastive pre-training");
  pre->add_option("--config", flags.config_path, "run config JSON")->required();
  pre->add_option("--data", flags.data_dir, "dataset directory")->required();
  pre->add_option("--out", flags.out_dir, "output directory");
  pre->add_option("--seed", flags.seed, "override the config seed");
  pre->add_option("--variant", flags.variant,
                  "infonce_noaug | infonce_speed | soft_infonce");
  pre->add_option("--max-speed", flags.max_speed,
                  "override the speed library maximum S");

  auto* eval = app.add_subcommand(
      "eval", "cross-modal retrieval + linear probe of a checkpoint");
  eval->add_option("--checkpoint", flags.checkpoint, "checkpoint file")
      ->required();
  eval->add_option("--data", flags.data_dir, "dataset directory")->required();
  eval->add_option("--out", flags.out_dir, "output directory")->required();

  auto* probe = app.add_subcommand("probe",
                                   "linear probe of frozen representations");
  probe->add_option("--checkpoint", flags.checkpoint, "checkpoint file")
      ->required();
  probe->add_option("--data", flags.data_dir, "dataset directory")->required();
  probe->add_option("--out", flags.out_dir, "output directory")->required();

  auto* aff = app.add_subcommand("affinity",
                                 "cross-affinity report per class and speed");
  aff->add_option("--checkpoint", flags.checkpoint, "checkpoint file")
      ->required();
  aff->add_option("--data", flags.data_dir, "dataset directory")->required();
  aff->add_option("--out", flags.out_dir, "output directory")->required();
  aff->add_option("--speeds", flags.speeds,
                  "speeds to report (default: the whole library 1..S)");

  std::uint64_t gradcheck_seed = 0;
  auto* grad = app.add_subcommand(
      "gradcheck", "finite-difference audit of every loss gradient");
  grad->add_option("--seed", gradcheck_seed, "suite seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) {
      svaclr::commands::generate(load_with_overrides(flags), flags.out_dir);
    } else if (pre->parsed()) {
      const svaclr::RunConfig cfg = load_with_overrides(flags);
      svaclr::commands::pretrain(cfg, flags.data_dir, cfg.out_dir, &std::cerr);
    } else if (eval->parsed()) {
      svaclr::commands::evaluate(flags.checkpoint, flags.data_dir,
                                 flags.out_dir, true, true);
    } else if (probe->parsed()) {
      svaclr::commands::evaluate(flags.checkpoint, flags.data_dir,
                                 flags.out_dir, false, true);
    } else if (aff->parsed()) {
      svaclr::commands::affinity(flags.checkpoint, flags.data_dir,
                                 flags.out_dir, flags.speeds);
    } else if (grad->parsed()) {
      const auto report = svaclr::commands::gradcheck(gradcheck_seed, std::cout);
      return report.ok() ? 0 : 1;
    }
  } catch (const svaclr::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const svaclr::CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const svaclr::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const svaclr::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
