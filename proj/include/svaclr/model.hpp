#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svaclr/augment.hpp"
#include "svaclr/rng.hpp"
#include "svaclr/tape.hpp"
#include "svaclr/tensor.hpp"

namespace svaclr {

struct DenseLayer {
  Tensor weight;  // out x in
  Tensor bias;    // out
  bool relu = false;
};

struct Mlp {
  std::vector<DenseLayer> layers;
};

struct ModelConfig {
  std::uint32_t audio_in = 128;  // = kAudioFeatureDim
  std::uint32_t video_in = 128;  // = video_window * frame_dim
  std::uint32_t encoder_hidden = 128;
  std::uint32_t repr_dim = 64;
  std::uint32_t proj_hidden = 64;
  std::uint32_t proj_dim = 32;
  double init_scale = 1.0;
};

// Mapping l() applied inside the cross-affinity module.
enum class MappingKind : std::uint32_t { identity = 0, linear = 1, nonlinear = 2 };

const char* mapping_name(MappingKind kind);

// identity: no parameters. linear: one repr x repr matrix (initialised to the
// identity, the neutral start). nonlinear: 2-layer relu MLP repr -> repr.
struct MappingParams {
  MappingKind kind = MappingKind::identity;
  std::vector<Tensor> tensors;  // {} | {M} | {W1, b1, W2, b2}
};

// All trainable state: two encoders, two projectors, and the affinity
// mapping. Tensors are visited in this declaration order everywhere a
// canonical order matters (init draws, optimizer state, checkpoints).
struct ModelParams {
  ModelConfig config;
  Mlp audio_encoder;
  Mlp video_encoder;
  Mlp audio_projector;
  Mlp video_projector;
  MappingParams mapping;
};

template <class Params, class Fn>
void for_each_param(Params&& p, Fn&& fn) {
  for (auto* mlp : {&p.audio_encoder, &p.video_encoder, &p.audio_projector,
                    &p.video_projector}) {
    for (auto& layer : mlp->layers) {
      fn(layer.weight);
      fn(layer.bias);
    }
  }
  for (auto& t : p.mapping.tensors) fn(t);
}

// Weights ~ U(-b, b) with b = init_scale / sqrt(fan_in); biases zero. Draws
// happen in canonical parameter order.
ModelParams init_params(const ModelConfig& config, MappingKind mapping,
                        Rng& rng);

std::size_t param_count(const ModelParams& params);

// Per clip, per view embeddings: y (representation) and unit-norm z
// (projection), shape {n_clips, n_views, dim}.
struct BatchEmbeddings {
  std::size_t n_clips = 0;
  std::size_t n_views = 0;
  Tensor y_audio, y_video;  // {N, V, repr_dim}
  Tensor z_audio, z_video;  // {N, V, proj_dim}
};

// {N,V,d} and {N*V,d} share the same row-major layout; this just reshapes.
Tensor as_rows(const Tensor& t);

// --- tape builders (shared by training and evaluation paths) ---

struct MlpNodes {
  struct Layer {
    Tape::NodeId weight, bias;
    bool relu;
  };
  std::vector<Layer> layers;
};

struct ParamNodes {
  MlpNodes audio_encoder, video_encoder, audio_projector, video_projector;
  std::vector<Tape::NodeId> mapping;
  std::vector<Tape::NodeId> all;  // canonical order, aligned with for_each_param
};

ParamNodes stage_params(Tape& tape, const ModelParams& params);

// x: (rows x in) -> (rows x out)
Tape::NodeId mlp_apply(Tape& tape, const MlpNodes& mlp, Tape::NodeId x);

struct ForwardNodes {
  Tape::NodeId y_audio, y_video;  // (rows x repr_dim)
  Tape::NodeId z_audio, z_video;  // (rows x proj_dim), unit rows
};

// audio_rows: (rows x audio_in), video_rows: (rows x video_in)
ForwardNodes forward_rows(Tape& tape, const ParamNodes& nodes,
                          const Tensor& audio_rows, const Tensor& video_rows);

// --- value-level operations ---

// Accept a single input (rank 1) or a stack of rows (rank 2).
Tensor encode_audio(const ModelParams& params, const Tensor& features);
Tensor encode_video(const ModelParams& params, const Tensor& flat_frames);
Tensor project_audio(const ModelParams& params, const Tensor& y);
Tensor project_video(const ModelParams& params, const Tensor& y);

// Feature assembly: row v_count*i + p is view p of clip i. n_views is 1
// (original views only) or 2 (original + sped).
Tensor audio_feature_rows(std::span<const ViewSet> views, std::size_t n_views);
Tensor video_flat_rows(std::span<const ViewSet> views, std::size_t n_views);

BatchEmbeddings forward_batch(const ModelParams& params,
                              std::span<const ViewSet> views,
                              std::size_t n_views = 2);

// Checkpoint (little-endian): magic "SVCK", version u32 = 1, config echo
// (six u32 dims, f64 init_scale, u32 mapping kind), then every parameter
// tensor in canonical order as raw f64. Round-trips exactly.
void write_checkpoint(const ModelParams& params, const std::string& path);
ModelParams read_checkpoint(const std::string& path);

}  // namespace svaclr
