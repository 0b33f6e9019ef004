#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "svaclr/datagen.hpp"
#include "svaclr/model.hpp"
#include "test_util.hpp"

using namespace svaclr;
using testutil::random_tensor;

namespace {
ModelConfig small_config() {
  ModelConfig c;
  c.audio_in = 6;
  c.video_in = 8;
  c.encoder_hidden = 5;
  c.repr_dim = 4;
  c.proj_hidden = 4;
  c.proj_dim = 3;
  return c;
}
}  // namespace

TEST_CASE("init: zero scale, determinism, parameter count") {
  ModelConfig zero;
  zero.init_scale = 0.0;
  Rng rng(1);
  const ModelParams p0 = init_params(zero, MappingKind::identity, rng);
  for_each_param(p0, [](const Tensor& t) {
    for (const double v : t.data) CHECK(v == 0.0);
  });

  Rng ra(42), rb(42);
  const ModelParams a = init_params(ModelConfig{}, MappingKind::nonlinear, ra);
  const ModelParams b = init_params(ModelConfig{}, MappingKind::nonlinear, rb);
  bool equal = true;
  std::vector<const Tensor*> ta, tb;
  for_each_param(a, [&](const Tensor& t) { ta.push_back(&t); });
  for_each_param(b, [&](const Tensor& t) { tb.push_back(&t); });
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i)
    equal = equal && (ta[i]->data == tb[i]->data);
  CHECK(equal);

  // (128*128+128) + (128*64+64) per encoder, (64*64+64) + (64*32+32) per
  // projector, twice each
  Rng rc(0);
  const ModelParams d = init_params(ModelConfig{}, MappingKind::identity, rc);
  const std::size_t encoder = 128 * 128 + 128 + 64 * 128 + 64;
  const std::size_t projector = 64 * 64 + 64 + 32 * 64 + 32;
  CHECK(param_count(d) == 2 * encoder + 2 * projector);
}

TEST_CASE("zero input with zero bias encodes to zero") {
  Rng rng(2);
  const ModelParams p = init_params(small_config(), MappingKind::identity, rng);
  const Tensor y = encode_audio(p, Tensor::zeros({6}));
  for (const double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("projection is unit-norm and scale-invariant") {
  Rng rng(3);
  ModelParams p = init_params(small_config(), MappingKind::identity, rng);
  const Tensor y = random_tensor(rng, {4});

  const Tensor z = project_audio(p, y);
  double sq = 0;
  for (const double v : z.data) sq += v * v;
  CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-12);

  // scaling the projector output by 10 leaves z unchanged
  ModelParams scaled = p;
  for (double& v : scaled.audio_projector.layers[1].weight.data) v *= 10.0;
  for (double& v : scaled.audio_projector.layers[1].bias.data) v *= 10.0;
  const Tensor z2 = project_audio(scaled, y);
  for (std::size_t i = 0; i < z.numel(); ++i)
    CHECK(std::abs(z.data[i] - z2.data[i]) < 1e-12);

  // degenerate zero pre-normalization output
  ModelParams dead = p;
  for (auto& layer : dead.audio_projector.layers) {
    for (double& v : layer.weight.data) v = 0.0;
    for (double& v : layer.bias.data) v = 0.0;
  }
  CHECK_THROWS_AS(project_audio(dead, y), DomainError);
}

TEST_CASE("gradients flow through encoder and projector") {
  Rng rng(4);
  const ModelParams p = init_params(small_config(), MappingKind::identity, rng);
  const Tensor x = random_tensor(rng, {2, 6});

  const double err = grad_check(
      [&](Tape& t, Tape::NodeId id) {
        MlpNodes enc;
        for (const auto& layer : p.audio_encoder.layers)
          enc.layers.push_back(
              {t.leaf(layer.weight), t.leaf(layer.bias), layer.relu});
        MlpNodes proj;
        for (const auto& layer : p.audio_projector.layers)
          proj.layers.push_back(
              {t.leaf(layer.weight), t.leaf(layer.bias), layer.relu});
        auto y = mlp_apply(t, enc, id);
        auto z = mlp_apply(t, proj, y);
        OpAttrs norm;
        norm.axis = 1;
        z = t.apply(OpKind::l2_normalize, {z}, norm);
        return t.apply(OpKind::sum, {t.apply(OpKind::mul, {z, z})});
      },
      x);
  CHECK(err < 1e-6);
}

TEST_CASE("end-to-end grad_check over forward_rows on an N=2 instance") {
  Rng rng(5);
  ModelParams p = init_params(small_config(), MappingKind::identity, rng);
  // keep every pre-activation strictly positive so no relu sits at its kink
  // and no projector row degenerates to zero
  for_each_param(p, [](Tensor& t) {
    for (double& v : t.data) v = std::abs(v) + 0.05;
  });
  const Tensor audio = random_tensor(rng, {4, 6}, 0.5, 1.5);
  const Tensor video = random_tensor(rng, {4, 8}, 0.5, 1.5);
  const Tensor head = random_tensor(rng, {4, 3});

  // differentiate w.r.t. the first audio-encoder weight, through the whole
  // stack to a scalar head on z
  const double err = grad_check(
      [&](Tape& t, Tape::NodeId w0) {
        ModelParams local = p;
        ParamNodes nodes;
        const auto stage = [&](const Mlp& mlp, MlpNodes& out, bool patch) {
          for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
            const auto& layer = mlp.layers[i];
            const Tape::NodeId w =
                (patch && i == 0) ? w0 : t.leaf(layer.weight);
            out.layers.push_back({w, t.leaf(layer.bias), layer.relu});
          }
        };
        stage(local.audio_encoder, nodes.audio_encoder, true);
        stage(local.video_encoder, nodes.video_encoder, false);
        stage(local.audio_projector, nodes.audio_projector, false);
        stage(local.video_projector, nodes.video_projector, false);
        const ForwardNodes fwd = forward_rows(t, nodes, audio, video);
        const auto weighted =
            t.apply(OpKind::mul, {fwd.z_audio, t.leaf(head)});
        return t.apply(OpKind::sum, {weighted});
      },
      p.audio_encoder.layers[0].weight);
  CHECK(err < 1e-6);
}

TEST_CASE("batch forward equals stacked per-item forward") {
  Rng rng(6);
  const ModelParams p = init_params(small_config(), MappingKind::identity, rng);
  const Tensor rows = random_tensor(rng, {3, 6});
  const Tensor batch = encode_audio(p, rows);
  for (std::size_t r = 0; r < 3; ++r) {
    Tensor one = Tensor::zeros({6});
    std::copy_n(rows.data.data() + r * 6, 6, one.data.data());
    const Tensor y = encode_audio(p, one);
    for (std::size_t c = 0; c < 4; ++c) CHECK(y.data[c] == batch.at2(r, c));
  }
}

TEST_CASE("forward_batch layout, permutation equivariance, duplicates") {
  DatasetSpec spec;
  spec.seed = 31;
  const auto patterns = class_patterns(spec);
  AugmentConfig aug;
  ModelConfig mc;
  mc.video_in = aug.video_window * spec.frame_dim;
  Rng rng(7);
  const ModelParams p = init_params(mc, MappingKind::identity, rng);

  std::vector<ViewSet> views;
  for (std::size_t i = 0; i < 3; ++i) {
    Rng clip_rng(mix_seed(spec.seed, rng_stream::dataset_clip, i));
    const Clip clip = synth_clip(i % spec.num_classes, clip_rng, spec, patterns);
    Rng view_rng(mix_seed(77, rng_stream::view_offsets, i));
    views.push_back(
        make_views(clip, i, SpeedFactor{2}, SpeedFactor{2}, view_rng, aug));
  }

  const BatchEmbeddings emb = forward_batch(p, views);
  CHECK(emb.z_audio.shape == std::vector<std::size_t>{3, 2, 32});
  CHECK(emb.y_video.shape == std::vector<std::size_t>{3, 2, 64});

  std::vector<ViewSet> permuted = {views[2], views[0], views[1]};
  const BatchEmbeddings emb2 = forward_batch(p, permuted);
  const std::size_t stride = 2 * 32;
  for (std::size_t c = 0; c < 32; ++c) {
    CHECK(emb2.z_audio.data[c] == emb.z_audio.data[2 * stride + c]);
    CHECK(emb2.z_audio.data[stride + c] == emb.z_audio.data[c]);
  }

  std::vector<ViewSet> twins = {views[0], views[0]};
  const BatchEmbeddings emb3 = forward_batch(p, twins);
  for (std::size_t c = 0; c < 2 * 32; ++c)
    CHECK(emb3.z_audio.data[c] == emb3.z_audio.data[2 * 32 + c]);
}

TEST_CASE("checkpoint round-trip is exact; corrupt files rejected") {
  namespace fs = std::filesystem;
  const std::string dir =
      (fs::temp_directory_path() / "svaclr_model_test").string();
  fs::create_directories(dir);
  const std::string path = dir + "/model.svck";

  Rng rng(8);
  const ModelParams p =
      init_params(small_config(), MappingKind::nonlinear, rng);
  write_checkpoint(p, path);
  const ModelParams q = read_checkpoint(path);

  CHECK(q.mapping.kind == MappingKind::nonlinear);
  std::vector<const Tensor*> tp, tq;
  for_each_param(p, [&](const Tensor& t) { tp.push_back(&t); });
  for_each_param(q, [&](const Tensor& t) { tq.push_back(&t); });
  REQUIRE(tp.size() == tq.size());
  for (std::size_t i = 0; i < tp.size(); ++i) {
    CHECK(tp[i]->shape == tq[i]->shape);
    CHECK(tp[i]->data == tq[i]->data);
  }

  {
    std::ofstream bad(dir + "/bad.svck", std::ios::binary);
    bad << "NOPE and some trailing garbage";
  }
  CHECK_THROWS_AS(read_checkpoint(dir + "/bad.svck"), CheckpointError);

  // truncation
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    std::ofstream out(dir + "/short.svck", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(read_checkpoint(dir + "/short.svck"), CheckpointError);
}
