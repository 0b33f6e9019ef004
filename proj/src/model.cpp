#include "svaclr/model.hpp"

#include <omp.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "svaclr/binio.hpp"
#include "svaclr/errors.hpp"
#include "svaclr/runtime.hpp"

namespace svaclr {

namespace {
constexpr char kMagic[4] = {'S', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

Mlp make_mlp(std::uint32_t in, std::uint32_t hidden, std::uint32_t out,
             double init_scale, Rng& rng) {
  const auto dense = [&](std::uint32_t rows, std::uint32_t cols, bool relu) {
    DenseLayer layer;
    layer.weight = Tensor::zeros({rows, cols});
    const double bound = init_scale / std::sqrt(static_cast<double>(cols));
    if (bound > 0.0)
      for (double& v : layer.weight.data) v = rng.uniform(-bound, bound);
    layer.bias = Tensor::zeros({rows});
    layer.relu = relu;
    return layer;
  };
  Mlp mlp;
  mlp.layers.push_back(dense(hidden, in, true));
  mlp.layers.push_back(dense(out, hidden, false));
  return mlp;
}

void check_config(const ModelConfig& c) {
  if (c.audio_in < 1 || c.video_in < 1 || c.encoder_hidden < 1 ||
      c.repr_dim < 1 || c.proj_hidden < 1 || c.proj_dim < 1)
    throw ConfigError("model: all dimensions must be >= 1");
}
}  // namespace

const char* mapping_name(MappingKind kind) {
  switch (kind) {
    case MappingKind::identity: return "identity";
    case MappingKind::linear: return "linear";
    case MappingKind::nonlinear: return "nonlinear";
  }
  return "?";
}

ModelParams init_params(const ModelConfig& config, MappingKind mapping,
                        Rng& rng) {
  check_config(config);
  ModelParams p;
  p.config = config;
  p.audio_encoder = make_mlp(config.audio_in, config.encoder_hidden,
                             config.repr_dim, config.init_scale, rng);
  p.video_encoder = make_mlp(config.video_in, config.encoder_hidden,
                             config.repr_dim, config.init_scale, rng);
  p.audio_projector = make_mlp(config.repr_dim, config.proj_hidden,
                               config.proj_dim, config.init_scale, rng);
  p.video_projector = make_mlp(config.repr_dim, config.proj_hidden,
                               config.proj_dim, config.init_scale, rng);
  p.mapping.kind = mapping;
  const std::uint32_t d = config.repr_dim;
  if (mapping == MappingKind::linear) {
    Tensor eye = Tensor::zeros({d, d});
    for (std::uint32_t i = 0; i < d; ++i) eye.at2(i, i) = 1.0;
    p.mapping.tensors = {std::move(eye)};
  } else if (mapping == MappingKind::nonlinear) {
    Mlp m = make_mlp(d, d, d, config.init_scale, rng);
    p.mapping.tensors = {std::move(m.layers[0].weight),
                         std::move(m.layers[0].bias),
                         std::move(m.layers[1].weight),
                         std::move(m.layers[1].bias)};
  }
  return p;
}

std::size_t param_count(const ModelParams& params) {
  std::size_t n = 0;
  for_each_param(params, [&](const Tensor& t) { n += t.numel(); });
  return n;
}

Tensor as_rows(const Tensor& t) {
  if (t.rank() == 2) return t;
  if (t.rank() != 3)
    throw ShapeError("as_rows: expected rank-3 embeddings, got " +
                     shape_str(t));
  return Tensor({t.shape[0] * t.shape[1], t.shape[2]}, t.data);
}

ParamNodes stage_params(Tape& tape, const ModelParams& params) {
  ParamNodes nodes;
  const auto stage_mlp = [&](const Mlp& mlp) {
    MlpNodes out;
    for (const auto& layer : mlp.layers) {
      MlpNodes::Layer l;
      l.weight = tape.leaf(layer.weight);
      l.bias = tape.leaf(layer.bias);
      l.relu = layer.relu;
      nodes.all.push_back(l.weight);
      nodes.all.push_back(l.bias);
      out.layers.push_back(l);
    }
    return out;
  };
  nodes.audio_encoder = stage_mlp(params.audio_encoder);
  nodes.video_encoder = stage_mlp(params.video_encoder);
  nodes.audio_projector = stage_mlp(params.audio_projector);
  nodes.video_projector = stage_mlp(params.video_projector);
  for (const Tensor& t : params.mapping.tensors) {
    const Tape::NodeId id = tape.leaf(t);
    nodes.mapping.push_back(id);
    nodes.all.push_back(id);
  }
  return nodes;
}

Tape::NodeId mlp_apply(Tape& tape, const MlpNodes& mlp, Tape::NodeId x) {
  Tape::NodeId h = x;
  for (const auto& layer : mlp.layers) {
    const Tape::NodeId wt = tape.apply(OpKind::transpose, {layer.weight});
    h = tape.apply(OpKind::matmul, {h, wt});
    h = tape.apply(OpKind::add, {h, layer.bias});
    if (layer.relu) h = tape.apply(OpKind::relu, {h});
  }
  return h;
}

ForwardNodes forward_rows(Tape& tape, const ParamNodes& nodes,
                          const Tensor& audio_rows, const Tensor& video_rows) {
  ForwardNodes out;
  const Tape::NodeId xa = tape.leaf(audio_rows);
  const Tape::NodeId xv = tape.leaf(video_rows);
  out.y_audio = mlp_apply(tape, nodes.audio_encoder, xa);
  out.y_video = mlp_apply(tape, nodes.video_encoder, xv);
  const Tape::NodeId pa = mlp_apply(tape, nodes.audio_projector, out.y_audio);
  const Tape::NodeId pv = mlp_apply(tape, nodes.video_projector, out.y_video);
  OpAttrs norm_attrs;
  norm_attrs.axis = 1;
  out.z_audio = tape.apply(OpKind::l2_normalize, {pa}, norm_attrs);
  out.z_video = tape.apply(OpKind::l2_normalize, {pv}, norm_attrs);
  return out;
}

namespace {

Tensor run_mlp_value(const Mlp& mlp, const Tensor& input, bool normalize) {
  const bool single = input.rank() == 1;
  const Tensor rows =
      single ? Tensor({1, input.shape[0]}, input.data) : input;
  if (rows.rank() != 2)
    throw ShapeError("mlp: expected rank-1 or rank-2 input, got " +
                     shape_str(input));
  Tape tape;
  MlpNodes nodes;
  for (const auto& layer : mlp.layers)
    nodes.layers.push_back(
        {tape.leaf(layer.weight), tape.leaf(layer.bias), layer.relu});
  Tape::NodeId out = mlp_apply(tape, nodes, tape.leaf(rows));
  if (normalize) {
    OpAttrs attrs;
    attrs.axis = 1;
    out = tape.apply(OpKind::l2_normalize, {out}, attrs);
  }
  Tensor result = tape.value(out);
  if (single) return Tensor({result.shape[1]}, std::move(result.data));
  return result;
}

}  // namespace

Tensor encode_audio(const ModelParams& params, const Tensor& features) {
  return run_mlp_value(params.audio_encoder, features, false);
}

Tensor encode_video(const ModelParams& params, const Tensor& flat_frames) {
  return run_mlp_value(params.video_encoder, flat_frames, false);
}

Tensor project_audio(const ModelParams& params, const Tensor& y) {
  return run_mlp_value(params.audio_projector, y, true);
}

Tensor project_video(const ModelParams& params, const Tensor& y) {
  return run_mlp_value(params.video_projector, y, true);
}

Tensor audio_feature_rows(std::span<const ViewSet> views,
                          std::size_t n_views) {
  const std::size_t rows = views.size() * n_views;
  Tensor out = Tensor::zeros({rows, kAudioFeatureDim});
#pragma omp parallel for schedule(static) num_threads(runtime::thread_cap())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(views.size()); ++i) {
    for (std::size_t p = 0; p < n_views; ++p) {
      const Tensor f = audio_features(views[i].audio_views[p]);
      std::copy_n(f.data.data(), kAudioFeatureDim,
                  out.data.data() +
                      (static_cast<std::size_t>(i) * n_views + p) *
                          kAudioFeatureDim);
    }
  }
  return out;
}

Tensor video_flat_rows(std::span<const ViewSet> views, std::size_t n_views) {
  if (views.empty()) throw ShapeError("video_flat_rows: empty batch");
  const std::size_t dim = views[0].video_views[0].values.size();
  const std::size_t rows = views.size() * n_views;
  Tensor out = Tensor::zeros({rows, dim});
#pragma omp parallel for schedule(static) num_threads(runtime::thread_cap())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(views.size()); ++i) {
    for (std::size_t p = 0; p < n_views; ++p) {
      const auto& v = views[i].video_views[p].values;
      if (v.size() != dim)
        throw ShapeError("video_flat_rows: inconsistent view size");
      std::copy_n(v.data(), dim,
                  out.data.data() +
                      (static_cast<std::size_t>(i) * n_views + p) * dim);
    }
  }
  return out;
}

BatchEmbeddings forward_batch(const ModelParams& params,
                              std::span<const ViewSet> views,
                              std::size_t n_views) {
  if (views.size() < 2)
    throw ShapeError("forward_batch: need at least 2 clips");
  if (n_views < 1 || n_views > 2)
    throw ShapeError("forward_batch: n_views must be 1 or 2");
  const Tensor audio = audio_feature_rows(views, n_views);
  const Tensor video = video_flat_rows(views, n_views);

  Tape tape;
  const ParamNodes nodes = stage_params(tape, params);
  const ForwardNodes fwd = forward_rows(tape, nodes, audio, video);

  const auto reshape = [&](const Tensor& t) {
    return Tensor({views.size(), n_views, t.shape[1]}, t.data);
  };
  BatchEmbeddings out;
  out.n_clips = views.size();
  out.n_views = n_views;
  out.y_audio = reshape(tape.value(fwd.y_audio));
  out.y_video = reshape(tape.value(fwd.y_video));
  out.z_audio = reshape(tape.value(fwd.z_audio));
  out.z_video = reshape(tape.value(fwd.z_video));
  return out;
}

void write_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_checkpoint: cannot open " + path);
  out.write(kMagic, 4);
  io::write_u32(out, kVersion);
  const ModelConfig& c = params.config;
  io::write_u32(out, c.audio_in);
  io::write_u32(out, c.video_in);
  io::write_u32(out, c.encoder_hidden);
  io::write_u32(out, c.repr_dim);
  io::write_u32(out, c.proj_hidden);
  io::write_u32(out, c.proj_dim);
  io::write_f64(out, c.init_scale);
  io::write_u32(out, static_cast<std::uint32_t>(params.mapping.kind));
  for_each_param(params, [&](const Tensor& t) {
    for (double v : t.data) io::write_f64(out, v);
  });
  if (!out) throw IoError("write_checkpoint: stream failure on " + path);
}

ModelParams read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError(path + ": bad magic, not a checkpoint file");
  std::uint32_t version;
  try {
    version = io::read_u32(in, "version");
  } catch (const IoError&) {
    throw CheckpointError(path + ": truncated checkpoint header");
  }
  if (version != kVersion)
    throw CheckpointError(path + ": unsupported checkpoint version " +
                          std::to_string(version));

  try {
    ModelConfig c;
    c.audio_in = io::read_u32(in, "audio_in");
    c.video_in = io::read_u32(in, "video_in");
    c.encoder_hidden = io::read_u32(in, "encoder_hidden");
    c.repr_dim = io::read_u32(in, "repr_dim");
    c.proj_hidden = io::read_u32(in, "proj_hidden");
    c.proj_dim = io::read_u32(in, "proj_dim");
    c.init_scale = io::read_f64(in, "init_scale");
    const std::uint32_t kind = io::read_u32(in, "mapping kind");
    if (kind > 2)
      throw CheckpointError(path + ": unknown mapping kind " +
                            std::to_string(kind));

    // Reconstruct shapes from the config echo, then fill values.
    Rng dummy(0);
    ModelParams params =
        init_params(c, static_cast<MappingKind>(kind), dummy);
    for_each_param(params, [&](Tensor& t) {
      for (double& v : t.data) v = io::read_f64(in, "parameter value");
    });
    char extra;
    if (in.read(&extra, 1))
      throw CheckpointError(path + ": trailing bytes after parameters");
    return params;
  } catch (const DatasetFormatError&) {
    throw CheckpointError(path + ": truncated checkpoint");
  }
}

}  // namespace svaclr
