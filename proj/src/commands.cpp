#include "svaclr/commands.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "svaclr/errors.hpp"

namespace svaclr::commands {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

json metrics_to_json(const MetricsRecord& rec) {
  // wall_ms is intentionally not serialized: metrics files must be
  // byte-identical across runs of the same seed.
  return json{{"step", rec.step},
              {"epoch", rec.epoch},
              {"lr", rec.lr},
              {"loss", rec.loss},
              {"mean_lambda", rec.mean_lambda}};
}

RunConfig load_data_config(const std::string& data_dir) {
  return load_run_config(join(data_dir, "config.resolved.json"));
}

void check_dataset_matches(const Dataset& ds, const DatasetSpec& expect,
                           const std::string& origin) {
  if (ds.spec.num_classes != expect.num_classes ||
      ds.spec.raw_audio_len != expect.raw_audio_len ||
      ds.spec.raw_video_frames != expect.raw_video_frames ||
      ds.spec.frame_dim != expect.frame_dim ||
      ds.spec.sample_rate != expect.sample_rate)
    throw DatasetFormatError(
        DatasetFormatError::Code::dimension_mismatch,
        origin + ": dataset dimensions do not match the run config");
}

void check_checkpoint_matches(const ModelParams& model, const RunConfig& cfg,
                              const std::string& origin) {
  if (model.config.audio_in != cfg.model.audio_in ||
      model.config.video_in != cfg.model.video_in)
    throw CheckpointError(origin +
                          ": checkpoint input dims do not match the dataset "
                          "config (audio_in " +
                          std::to_string(model.config.audio_in) +
                          ", video_in " +
                          std::to_string(model.config.video_in) + ")");
}

void write_retrieval_csv(const std::array<RetrievalResult, 2>& results,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "direction,k,recall,num_queries\n";
  for (const RetrievalResult& r : results)
    for (const auto& [k, recall] : r.recall_at)
      out << direction_name(r.direction) << ',' << k << ','
          << format_double(recall) << ',' << r.num_queries << '\n';
  if (!out) throw IoError("stream failure on " + path);
}

void write_probe_csv(const std::vector<ProbeResult>& results,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "modality,top1,num_classes\n";
  for (const ProbeResult& r : results)
    out << r.modality << ',' << format_double(r.top1) << ',' << r.num_classes
        << '\n';
  if (!out) throw IoError("stream failure on " + path);
}

void write_affinity_csv(const AffinityReport& report,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "class,speed,alias,mean_lambda_sped,mean_lambda_orig\n";
  for (const AffinityReportRow& r : report.rows)
    out << r.cls << ',' << r.speed << ',' << (r.aliased ? 1 : 0) << ','
        << format_double(r.mean_lambda_sped) << ','
        << format_double(r.mean_lambda_orig) << '\n';
  if (!out) throw IoError("stream failure on " + path);
}

}  // namespace

void generate(const RunConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  const Dataset train = generate_dataset(cfg.dataset, Split::train);
  const Dataset test = generate_dataset(cfg.dataset, Split::test);
  write_dataset(train, join(out_dir, "train.svac"));
  write_dataset(test, join(out_dir, "test.svac"));
  save_resolved_config(cfg, join(out_dir, "config.resolved.json"));
}

void pretrain(const RunConfig& cfg, const std::string& data_dir,
              const std::string& out_dir, std::ostream* progress) {
  ensure_dir(out_dir);
  const Dataset train = read_dataset(join(data_dir, "train.svac"));
  check_dataset_matches(train, cfg.dataset, "pretrain");

  std::ofstream metrics(join(out_dir, "metrics.jsonl"));
  if (!metrics) throw IoError("cannot write " + join(out_dir, "metrics.jsonl"));

  const std::uint64_t steps_per_epoch =
      train.clips.size() / cfg.train.batch_size;
  const MetricsSink sink = [&](const MetricsRecord& rec) {
    metrics << metrics_to_json(rec).dump() << '\n';
    if (progress && (rec.step + 1) % steps_per_epoch == 0)
      *progress << "epoch " << rec.epoch << " step " << rec.step << " loss "
                << rec.loss << " lr " << rec.lr << " (" << std::fixed
                << std::setprecision(1) << rec.wall_ms << " ms/step)\n"
                << std::defaultfloat;
  };
  const CheckpointSink ckpt_sink = [&](const ModelParams& model,
                                       std::uint32_t epoch) {
    char name[48];
    std::snprintf(name, sizeof(name), "checkpoint_epoch%03u.svck", epoch);
    write_checkpoint(model, join(out_dir, name));
  };

  const PretrainResult result =
      svaclr::pretrain(train, cfg.train, sink, ckpt_sink);
  if (!metrics) throw IoError("stream failure on metrics.jsonl");
  metrics.close();

  write_checkpoint(result.model, join(out_dir, "checkpoint.svck"));
  save_resolved_config(cfg, join(out_dir, "config.resolved.json"));
}

void evaluate(const std::string& checkpoint_path, const std::string& data_dir,
              const std::string& out_dir, bool with_retrieval,
              bool with_probe) {
  const ModelParams model = read_checkpoint(checkpoint_path);
  const RunConfig cfg = load_data_config(data_dir);
  check_checkpoint_matches(model, cfg, checkpoint_path);
  ensure_dir(out_dir);

  const Dataset test = read_dataset(join(data_dir, "test.svac"));
  check_dataset_matches(test, cfg.dataset, "eval");

  if (with_retrieval) {
    const auto results =
        retrieval(model, test, cfg.augment, kDefaultRecallKs);
    write_retrieval_csv(results, join(out_dir, "retrieval.csv"));
  }
  if (with_probe) {
    const Dataset train = read_dataset(join(data_dir, "train.svac"));
    check_dataset_matches(train, cfg.dataset, "eval");
    const auto results = linear_probe(model, train, test, cfg.augment);
    write_probe_csv(results, join(out_dir, "probe.csv"));
  }
}

void affinity(const std::string& checkpoint_path, const std::string& data_dir,
              const std::string& out_dir, std::vector<std::uint32_t> speeds) {
  const RunConfig cfg = load_data_config(data_dir);
  if (speeds.empty())
    for (std::uint32_t s = 1; s <= cfg.augment.max_speed; ++s)
      speeds.push_back(s);
  for (const std::uint32_t s : speeds)
    if (s < 1 || s > cfg.augment.max_speed)
      throw ConfigError("affinity: speed " + std::to_string(s) +
                        " outside the configured library {1.." +
                        std::to_string(cfg.augment.max_speed) + "}");

  const ModelParams model = read_checkpoint(checkpoint_path);
  check_checkpoint_matches(model, cfg, checkpoint_path);
  ensure_dir(out_dir);

  const Dataset test = read_dataset(join(data_dir, "test.svac"));
  check_dataset_matches(test, cfg.dataset, "affinity");

  const AffinityReport report =
      affinity_report(model, test, cfg.dataset, cfg.augment, speeds, cfg.seed);
  write_affinity_csv(report, join(out_dir, "affinity.csv"));
}

GradCheckReport gradcheck(std::uint64_t seed, std::ostream& out) {
  const GradCheckReport report = loss_gradient_report(seed);
  for (const auto& entry : report.entries)
    out << (entry.max_err < 1e-6 ? "ok   " : "FAIL ") << entry.name
        << "  max_rel_err=" << format_double(entry.max_err) << '\n';
  out << (report.ok() ? "gradcheck passed" : "gradcheck FAILED")
      << " (worst " << format_double(report.worst) << ", tolerance 1e-6)\n";
  return report;
}

}  // namespace svaclr::commands
