#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svaclr/datagen.hpp"
#include "svaclr/loss.hpp"
#include "svaclr/model.hpp"

namespace svaclr {

struct RetrievalResult {
  Direction direction;
  std::vector<std::pair<std::uint32_t, double>> recall_at;  // (k, R@k)
  std::size_t num_queries = 0;
};

struct ProbeResult {
  std::string modality;  // "audio" | "video" | "concat"
  double top1 = 0.0;
  std::uint32_t num_classes = 0;
};

struct AffinityReportRow {
  std::uint32_t cls = 0;
  std::uint32_t speed = 1;
  bool aliased = false;  // speed > 1 and the sped audio lands on a class
  double mean_lambda_sped = 0.0;  // lambda[sped audio, original video]
  double mean_lambda_orig = 0.0;  // lambda[original audio, original video]
};

struct AffinityReport {
  std::vector<AffinityReportRow> rows;
};

inline constexpr std::uint32_t kDefaultRecallKs[] = {1, 5, 10, 20};

// Canonical evaluation views: speed-1 windows at offset 0 for both
// modalities; rows follow clip order.
struct EvalEmbeddings {
  Tensor y_audio, y_video;  // (M x repr_dim)
  Tensor z_audio, z_video;  // (M x proj_dim)
  std::vector<std::uint32_t> labels;
};

EvalEmbeddings eval_embeddings(const ModelParams& model, const Dataset& ds,
                               const AugmentConfig& augment);

// Cross-modal retrieval in projection space: rank the opposite modality's
// gallery by cosine similarity; a query scores at k when the gallery item of
// the same clip index ranks <= k. Ties rank the lower gallery index first.
// Returns [audio_to_video, video_to_audio].
std::array<RetrievalResult, 2> retrieval_from_embeddings(
    const Tensor& z_audio, const Tensor& z_video,
    std::span<const std::uint32_t> ks);

std::array<RetrievalResult, 2> retrieval(const ModelParams& model,
                                         const Dataset& test,
                                         const AugmentConfig& augment,
                                         std::span<const std::uint32_t> ks);

struct ProbeConfig {
  std::uint32_t epochs = 100;
  double lr = 0.1;
};

// Multinomial logistic regression on frozen features (zero init, full-batch
// gradient descent). Deterministic.
ProbeResult probe_from_features(const Tensor& train_x,
                                std::span<const std::uint32_t> train_labels,
                                const Tensor& test_x,
                                std::span<const std::uint32_t> test_labels,
                                std::uint32_t num_classes,
                                const ProbeConfig& cfg,
                                const std::string& modality);

// Probes audio y, video y, and their concatenation.
std::vector<ProbeResult> linear_probe(const ModelParams& model,
                                      const Dataset& train,
                                      const Dataset& test,
                                      const AugmentConfig& augment,
                                      const ProbeConfig& cfg = {});

// Per (class, speed): views built with forced tau1 = speed (audio) and
// tau2 = 1 (video), offsets from a seeded per-clip stream; reports the mean
// lambda for the [sped audio, original video] and [original audio, original
// video] entries. `spec` supplies the alias ladder.
AffinityReport affinity_report(const ModelParams& model, const Dataset& ds,
                               const DatasetSpec& spec,
                               const AugmentConfig& augment,
                               std::span<const std::uint32_t> speeds,
                               std::uint64_t seed);

}  // namespace svaclr
