#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svaclr/model.hpp"
#include "svaclr/tape.hpp"

namespace svaclr {

enum class Direction : std::uint32_t {
  audio_to_video = 0,
  video_to_audio = 1,
  both = 2,
};

const char* direction_name(Direction d);

struct LossConfig {
  double eta = 0.1;  // temperature
  Direction direction = Direction::both;
  MappingKind mapping = MappingKind::identity;
  bool detach_affinity = false;
  bool include_same_clip_other_view_as_negative = false;
};

// Per-clip 2x2 attention over {audio view p} x {video view q}; positive
// entries summing to 1 (softmax over the four flattened logits).
struct AffinityMatrix {
  std::array<double, 4> lambda{};  // [p * 2 + q]

  double at(std::size_t p, std::size_t q) const { return lambda[p * 2 + q]; }
  static AffinityMatrix uniform() {
    return AffinityMatrix{{0.25, 0.25, 0.25, 0.25}};
  }
};

// --- tape builders ---

struct MappingNodes {
  MappingKind kind = MappingKind::identity;
  std::vector<Tape::NodeId> tensors;
};

MappingNodes stage_mapping(Tape& tape, const MappingParams& mapping);

// l() applied to every row of y (rows x repr_dim).
Tape::NodeId apply_mapping(Tape& tape, Tape::NodeId y,
                           const MappingNodes& mapping);

// Softmax over the four flattened logits; logits has 4 elements.
Tape::NodeId affinity_from_logits_node(Tape& tape, Tape::NodeId logits);

// la, lv: the clip's two mapped view rows, each (2 x repr_dim). Returns the
// flattened lambda node (shape {4}).
Tape::NodeId clip_affinity_node(Tape& tape, Tape::NodeId la, Tape::NodeId lv);

// scores = z_query . z_key^T / eta, shape (rows x rows).
Tape::NodeId scaled_scores_node(Tape& tape, Tape::NodeId z_query,
                                Tape::NodeId z_key, double eta);

// One InfoNCE term (negative log softmax probability of the positive pair):
// query view p of clip i against key view q of clip i, denominator =
// positive + both key views of every other clip (the same-clip other view
// joins only when configured). z nodes are (n_clips * 2 x dim) with row
// 2*i + view.
Tape::NodeId info_nce_term_node(Tape& tape, Tape::NodeId z_query,
                                Tape::NodeId z_key, std::size_t n_clips,
                                std::size_t i, std::size_t p, std::size_t q,
                                const LossConfig& cfg);

// Mean over clips of single-view InfoNCE (negatives = N - 1 keys),
// averaged over directions when cfg.direction == both. z nodes are
// (n_clips x dim).
Tape::NodeId vanilla_info_nce_node(Tape& tape, Tape::NodeId z_audio,
                                   Tape::NodeId z_video,
                                   const LossConfig& cfg);

enum class AffinityWeighting { learned, uniform };

struct SoftLossGraph {
  Tape::NodeId loss;
  std::vector<AffinityMatrix> lambdas;  // per clip, as used in the loss
};

// SoftInfoNCE: mean over clips of sum_{p,q} lambda_i[p][q] *
// InfoNCE(i, p, q), per configured direction(s).
// y/z nodes are (n_clips * 2 x dim). With `uniform` weighting every lambda
// entry is the constant 0.25 and the mapping is not evaluated; with
// cfg.detach_affinity the learned lambdas re-enter the graph as constants.
SoftLossGraph soft_info_nce_node(Tape& tape, Tape::NodeId y_audio,
                                 Tape::NodeId y_video, Tape::NodeId z_audio,
                                 Tape::NodeId z_video, std::size_t n_clips,
                                 const MappingNodes& mapping,
                                 const LossConfig& cfg,
                                 AffinityWeighting weighting);

// --- value-level operations (scratch-tape wrappers) ---

// z tensors shaped {N, 2, d} (or (2N x d)).
double info_nce_term(const Tensor& z_query, const Tensor& z_key,
                     std::size_t i, std::size_t p, std::size_t q,
                     const LossConfig& cfg);

// z tensors restricted to original views: {N, d} (or {N, 1, d}).
double vanilla_info_nce(const Tensor& z_audio, const Tensor& z_video,
                        const LossConfig& cfg);

// Cross-modality attention on representations y: softmax over the four
// l(y_a^p) . l(y_v^q) logits (two views per modality, each 2 x repr_dim).
AffinityMatrix cross_affinity(const Tensor& y_audio_views,
                              const Tensor& y_video_views,
                              const MappingParams& mapping);

// SoftInfoNCE with explicit per-clip affinities (one per clip).
double soft_info_nce(const BatchEmbeddings& batch,
                     std::span<const AffinityMatrix> affinities,
                     const LossConfig& cfg);

// --- finite-difference fidelity suite (shared by the gradcheck command and
// the acceptance gate) ---

struct GradCheckReport {
  struct Entry {
    std::string name;
    double max_err;
  };
  std::vector<Entry> entries;
  double worst = 0.0;
  bool ok(double tol = 1e-6) const { return worst < tol; }
};

GradCheckReport loss_gradient_report(std::uint64_t seed,
                                     std::size_t instances = 20);

}  // namespace svaclr
