#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "svaclr/config.hpp"
#include "svaclr/eval.hpp"

namespace svaclr::commands {

// The CLI subcommand bodies, callable in-process. Each writes deterministic
// artifacts into out_dir; errors surface as the exception types the CLI maps
// to exit codes.

// -> train.svac, test.svac, config.resolved.json
void generate(const RunConfig& cfg, const std::string& out_dir);

// -> checkpoint.svck, metrics.jsonl, config.resolved.json
// (plus checkpoint_epochNNN.svck when train.checkpoint_every > 0)
void pretrain(const RunConfig& cfg, const std::string& data_dir,
              const std::string& out_dir, std::ostream* progress = nullptr);

// -> retrieval.csv and/or probe.csv
void evaluate(const std::string& checkpoint_path, const std::string& data_dir,
              const std::string& out_dir, bool with_retrieval,
              bool with_probe);

// -> affinity.csv; empty speeds = the whole configured library {1..S}
void affinity(const std::string& checkpoint_path, const std::string& data_dir,
              const std::string& out_dir,
              std::vector<std::uint32_t> speeds = {});

// Prints one line per check; returns the report for exit-code decisions.
GradCheckReport gradcheck(std::uint64_t seed, std::ostream& out);

// Shortest round-trip decimal form; deterministic across runs.
std::string format_double(double v);

}  // namespace svaclr::commands
