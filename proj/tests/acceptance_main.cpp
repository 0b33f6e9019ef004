// Acceptance suite: one check per criterion, one PASS/FAIL line each.
// Run with no arguments for the full gate, or pass criterion numbers to run
// a subset (e.g. "acceptance 1 4 5").

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "svaclr/commands.hpp"
#include "svaclr/config.hpp"
#include "svaclr/eval.hpp"
#include "svaclr/runtime.hpp"
#include "svaclr/train.hpp"
#include "test_util.hpp"

using namespace svaclr;
using testutil::brute_force_infonce;
using testutil::random_tensor;
using testutil::random_unit_rows;

namespace {

using Clock = std::chrono::steady_clock;

struct Check {
  int id;
  std::string name;
  std::function<bool(std::string&)> run;
};

bool approx_zero(double v, double tol) { return std::abs(v) < tol; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- criterion 1
bool infonce_oracle(std::string& detail) {
  double worst = 0.0;
  for (const std::size_t n : {2, 3, 4}) {
    for (int trial = 0; trial < 10; ++trial) {
      Rng rng(mix_seed(2024, 1, n * 100 + trial));
      const Tensor za = random_unit_rows(rng, n, 16);
      const Tensor zv = random_unit_rows(rng, n, 16);
      LossConfig cfg;
      cfg.eta = 0.1;
      cfg.direction = Direction::audio_to_video;
      worst = std::max(worst,
                       std::abs(vanilla_info_nce(za, zv, cfg) -
                                brute_force_infonce(za, zv, cfg.eta)));
      cfg.direction = Direction::video_to_audio;
      worst = std::max(worst,
                       std::abs(vanilla_info_nce(za, zv, cfg) -
                                brute_force_infonce(zv, za, cfg.eta)));
    }
  }
  detail = "max |loss - oracle| = " + commands::format_double(worst);
  return worst < 1e-12;
}

// ---------------------------------------------------------------- criterion 2
bool gradient_fidelity(std::string& detail) {
  const GradCheckReport report = loss_gradient_report(2024, 20);
  detail = std::to_string(report.entries.size()) +
           " checks, worst rel err = " + commands::format_double(report.worst);
  return report.ok(1e-6);
}

// ---------------------------------------------------------------- criterion 3
bool affinity_normalization(std::string& detail) {
  Rng rng(33);
  MappingParams identity;
  double worst_sum = 0.0, worst_shift = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const AffinityMatrix lam = cross_affinity(random_unit_rows(rng, 2, 8),
                                              random_unit_rows(rng, 2, 8),
                                              identity);
    double total = 0.0;
    for (const double v : lam.lambda) {
      if (!(v > 0.0)) return false;
      total += v;
    }
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));

    const Tensor logits = random_tensor(rng, {4}, -5.0, 5.0);
    Tensor shifted = logits;
    const double c = rng.uniform(-20.0, 20.0);
    for (double& v : shifted.data) v += c;
    Tape t1, t2;
    const Tensor a = t1.value(affinity_from_logits_node(t1, t1.leaf(logits)));
    const Tensor b =
        t2.value(affinity_from_logits_node(t2, t2.leaf(shifted)));
    for (std::size_t e = 0; e < 4; ++e)
      worst_shift = std::max(worst_shift, std::abs(a.data[e] - b.data[e]));
  }
  detail = "worst sum dev = " + commands::format_double(worst_sum) +
           ", worst shift dev = " + commands::format_double(worst_shift);
  return worst_sum < 1e-12 && worst_shift < 1e-12;
}

// ---------------------------------------------------------------- criterion 4
bool reduction_identities(std::string& detail) {
  Rng rng(44);
  LossConfig cfg;
  cfg.eta = 0.25;

  // (a) uniform lambda + equal view-pair losses -> soft equals that loss
  const std::size_t n = 3;
  BatchEmbeddings batch;
  batch.n_clips = n;
  batch.n_views = 2;
  batch.z_audio = Tensor::zeros({n, 2, 4});
  batch.z_video = Tensor::zeros({n, 2, 4});
  for (std::size_t r = 0; r < 2 * n; ++r) {
    batch.z_audio.data[r * 4 + 1] = 1.0;
    batch.z_video.data[r * 4 + 1] = 1.0;
  }
  const std::vector<AffinityMatrix> uniform(n, AffinityMatrix::uniform());
  const double expect_a = std::log(1.0 + 2.0 * (n - 1));
  const double got_a = soft_info_nce(batch, uniform, cfg);
  if (!approx_zero(got_a - expect_a, 1e-12)) {
    detail = "(a) soft = " + commands::format_double(got_a) + " expected " +
             commands::format_double(expect_a);
    return false;
  }

  // (b) S=1 regime: uniform-lambda soft equals the mean InfoNCE term over
  // the four view pairs
  BatchEmbeddings rb;
  rb.n_clips = 4;
  rb.n_views = 2;
  rb.z_audio = Tensor({4, 2, 6}, random_unit_rows(rng, 8, 6).data);
  rb.z_video = Tensor({4, 2, 6}, random_unit_rows(rng, 8, 6).data);
  const std::vector<AffinityMatrix> uni4(4, AffinityMatrix::uniform());
  double pair_mean = 0.0;
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t q = 0; q < 2; ++q)
      for (std::size_t i = 0; i < 4; ++i)
        pair_mean +=
            0.5 * (info_nce_term(rb.z_audio, rb.z_video, i, p, q, cfg) +
                   info_nce_term(rb.z_video, rb.z_audio, i, q, p, cfg)) /
            16.0;
  const double got_b = soft_info_nce(rb, uni4, cfg);
  if (!approx_zero(got_b - pair_mean, 1e-12)) {
    detail = "(b) soft = " + commands::format_double(got_b) + " mean = " +
             commands::format_double(pair_mean);
    return false;
  }

  // (c) linear mapping with identity weights == identity mapping
  MappingParams identity;
  MappingParams linear;
  linear.kind = MappingKind::linear;
  Tensor eye = Tensor::zeros({8, 8});
  for (std::size_t i = 0; i < 8; ++i) eye.at2(i, i) = 1.0;
  linear.tensors = {eye};
  double worst_c = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor ya = random_unit_rows(rng, 2, 8);
    const Tensor yv = random_unit_rows(rng, 2, 8);
    const AffinityMatrix li = cross_affinity(ya, yv, linear);
    const AffinityMatrix id = cross_affinity(ya, yv, identity);
    for (std::size_t e = 0; e < 4; ++e)
      worst_c = std::max(worst_c, std::abs(li.lambda[e] - id.lambda[e]));
  }
  detail = "(a),(b) exact; (c) worst dev = " + commands::format_double(worst_c);
  return worst_c < 1e-12;
}

// ---------------------------------------------------------------- criterion 5
bool spectral_law(std::string& detail) {
  DatasetSpec spec;
  spec.noise_std = 0.0;  // noise-free per the criterion
  spec.seed = 17;
  const auto patterns = class_patterns(spec);
  int pairs = 0;
  for (std::uint32_t cls = 0; cls < spec.num_classes; ++cls) {
    for (const std::uint32_t s : {1u, 2u, 4u}) {
      const auto target = alias_class(cls, SpeedFactor{s}, spec);
      if (!target) continue;
      Rng ra(mix_seed(spec.seed, rng_stream::dataset_clip, cls));
      Rng rb(mix_seed(spec.seed, rng_stream::dataset_clip,
                      100 + *target));
      const Clip src = synth_clip(cls, ra, spec, patterns);
      const Clip ref = synth_clip(*target, rb, spec, patterns);
      for (const std::size_t offset : {0, 37, 210}) {
        const auto sped = audio_features(
            resample_audio(src.audio, SpeedFactor{s}, 512, offset));
        const auto base = audio_features(
            resample_audio(ref.audio, SpeedFactor{1}, 512, offset));
        if (dominant_bin(sped) != dominant_bin(base)) {
          detail = "class " + std::to_string(cls) + " speed " +
                   std::to_string(s) + ": bins " +
                   std::to_string(dominant_bin(sped)) + " vs " +
                   std::to_string(dominant_bin(base));
          return false;
        }
      }
      ++pairs;
    }
  }
  detail = std::to_string(pairs) + " in-range (class, speed) pairs, all exact";
  return true;
}

// ------------------------------------------------------------ criteria 6 + 7
struct LadderResults {
  std::vector<double> r1_noaug, r1_speed, r1_soft;
  int shift_hits = 0;  // seeds where aliased lambda median < non-aliased
  std::vector<std::vector<std::pair<std::uint32_t, double>>> curves;
  bool ran = false;
};

LadderResults g_ladder;

void run_ladder() {
  if (g_ladder.ran) return;
  g_ladder.ran = true;
  runtime::set_thread_cap(1);  // the budget is stated for a single core

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DatasetSpec spec;
    spec.seed = seed;
    const Dataset train_ds = generate_dataset(spec, Split::train);
    const Dataset test_ds = generate_dataset(spec, Split::test);

    for (const LossVariant variant :
         {LossVariant::infonce_noaug, LossVariant::infonce_speed,
          LossVariant::soft_infonce}) {
      TrainConfig cfg;
      cfg.seed = seed;
      cfg.variant = variant;
      const auto t0 = Clock::now();
      const PretrainResult result = pretrain(train_ds, cfg);
      const auto results =
          retrieval(result.model, test_ds, cfg.augment, kDefaultRecallKs);
      const double r1 = results[1].recall_at[0].second;  // video -> audio
      g_ladder.curves.push_back(results[0].recall_at);
      g_ladder.curves.push_back(results[1].recall_at);
      const double secs =
          std::chrono::duration<double>(Clock::now() - t0).count();
      std::fprintf(stderr,
                   "    seed %llu %-14s R@1(v->a) = %.4f  (%.0f s)\n",
                   static_cast<unsigned long long>(seed),
                   variant_name(variant), r1, secs);

      switch (variant) {
        case LossVariant::infonce_noaug:
          g_ladder.r1_noaug.push_back(r1);
          break;
        case LossVariant::infonce_speed:
          g_ladder.r1_speed.push_back(r1);
          break;
        case LossVariant::soft_infonce: {
          g_ladder.r1_soft.push_back(r1);
          const std::uint32_t speeds[] = {1, 2, 4};
          const AffinityReport report = affinity_report(
              result.model, test_ds, spec, cfg.augment, speeds, seed);
          std::vector<double> aliased, other;
          for (const AffinityReportRow& row : report.rows)
            (row.aliased ? aliased : other).push_back(row.mean_lambda_sped);
          if (median(aliased) < median(other)) ++g_ladder.shift_hits;
          break;
        }
      }
    }
  }
  runtime::set_thread_cap(0);  // back to the environment default
}

bool ablation_ladder(std::string& detail) {
  run_ladder();
  const double m_noaug = median(g_ladder.r1_noaug);
  const double m_speed = median(g_ladder.r1_speed);
  const double m_soft = median(g_ladder.r1_soft);
  detail = "median R@1 v->a: noaug " + commands::format_double(m_noaug) +
           ", speed " + commands::format_double(m_speed) + ", soft " +
           commands::format_double(m_soft);
  return m_speed > m_noaug && m_soft >= m_speed;
}

bool semantic_shift(std::string& detail) {
  run_ladder();
  detail = "aliased-lambda median below non-aliased in " +
           std::to_string(g_ladder.shift_hits) + "/5 seeds";
  return g_ladder.shift_hits >= 4;
}

// ---------------------------------------------------------------- criterion 8
bool determinism(std::string& detail) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "svaclr_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  RunConfig cfg = parse_run_config(nlohmann::json::parse(R"({
    "seed": 21,
    "dataset": {"num_classes": 4, "clips_per_class_train": 4,
                 "clips_per_class_test": 2, "raw_audio_len": 2048,
                 "raw_video_frames": 16, "frame_dim": 8},
    "augment": {"max_speed": 2, "video_window": 4},
    "model": {"encoder_hidden": 24, "repr_dim": 12, "proj_hidden": 12,
               "proj_dim": 8},
    "train": {"epochs": 2, "batch_size": 8, "warmup_epochs": 1}
  })"));

  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
  };

  const auto pipeline = [&](const std::string& tag, int threads) {
    runtime::set_thread_cap(threads);
    const std::string data = (root / ("data_" + tag)).string();
    const std::string run = (root / ("run_" + tag)).string();
    const std::string evals = (root / ("eval_" + tag)).string();
    commands::generate(cfg, data);
    commands::pretrain(cfg, data, run);
    commands::evaluate(run + "/checkpoint.svck", data, evals, true, true);
    commands::affinity(run + "/checkpoint.svck", data, evals);
    return std::vector<std::string>{
        slurp(data + "/train.svac"),      slurp(data + "/test.svac"),
        slurp(run + "/metrics.jsonl"),    slurp(run + "/checkpoint.svck"),
        slurp(evals + "/retrieval.csv"),  slurp(evals + "/probe.csv"),
        slurp(evals + "/affinity.csv"),
    };
  };

  const auto a = pipeline("t1", 1);
  const auto b = pipeline("t4", 4);
  const auto c = pipeline("t1b", 1);
  runtime::set_thread_cap(0);

  const char* names[] = {"train.svac",    "test.svac", "metrics.jsonl",
                         "checkpoint",    "retrieval", "probe",
                         "affinity"};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].empty()) {
      detail = std::string(names[i]) + " is empty";
      return false;
    }
    if (a[i] != b[i] || a[i] != c[i]) {
      detail = std::string(names[i]) + " differs across thread counts/reruns";
      return false;
    }
  }
  detail = "7 artifacts byte-identical across reruns and thread counts 1/4";
  return true;
}

// ---------------------------------------------------------------- criterion 9
bool retrieval_oracle(std::string& detail) {
  Tensor onehot = Tensor::zeros({10, 10});
  for (std::size_t i = 0; i < 10; ++i) onehot.at2(i, i) = 1.0;
  const auto fixture =
      retrieval_from_embeddings(onehot, onehot, kDefaultRecallKs);
  for (const RetrievalResult& r : fixture) {
    if (r.recall_at[0].second != 1.0 || r.recall_at[1].second != 1.0) {
      detail = "one-hot fixture missed R@1/R@5 = 1.0";
      return false;
    }
  }

  // monotonicity on random instances and on every curve the ladder produced
  std::vector<std::vector<std::pair<std::uint32_t, double>>> curves =
      g_ladder.curves;
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(900 + trial);
    const auto res = retrieval_from_embeddings(random_unit_rows(rng, 25, 8),
                                               random_unit_rows(rng, 25, 8),
                                               kDefaultRecallKs);
    curves.push_back(res[0].recall_at);
    curves.push_back(res[1].recall_at);
  }
  for (const auto& curve : curves)
    for (std::size_t i = 1; i < curve.size(); ++i)
      if (curve[i].second < curve[i - 1].second) {
        detail = "recall curve not monotone";
        return false;
      }
  detail = "one-hot fixture exact; " + std::to_string(curves.size()) +
           " recall curves monotone";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<Check> checks = {
      {1, "infonce-oracle-equivalence", infonce_oracle},
      {2, "gradient-fidelity", gradient_fidelity},
      {3, "affinity-normalization", affinity_normalization},
      {4, "reduction-identities", reduction_identities},
      {5, "resampling-spectral-law", spectral_law},
      {6, "ablation-ladder", ablation_ladder},
      {7, "semantic-shift-detection", semantic_shift},
      {8, "determinism", determinism},
      {9, "retrieval-oracle", retrieval_oracle},
  };

  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

  const double budgets[] = {1.0, 30.0, 0.0, 0.0, 5.0, 900.0, 0.0, 0.0, 0.0};

  int failures = 0;
  for (const Check& check : checks) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), check.id) == wanted.end())
      continue;
    std::string detail;
    const auto t0 = Clock::now();
    bool ok = false;
    try {
      ok = check.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(Clock::now() - t0).count();
    const double budget = budgets[check.id - 1];
    // criteria 6 and 7 share the ladder; only charge its runtime once
    const bool in_budget =
        budget == 0.0 || secs < budget || (check.id == 7);
    if (!in_budget) {
      ok = false;
      detail += " [over budget " + std::to_string(budget) + " s]";
    }
    std::printf("[%s] %d. %-28s %8.2f s  %s\n", ok && in_budget ? "PASS" : "FAIL",
                check.id, check.name.c_str(), secs, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures)
    std::printf("%d criterion(s) FAILED\n", failures);
  else
    std::printf("all criteria passed\n");
  return failures;
}
