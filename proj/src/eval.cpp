#include "svaclr/eval.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "svaclr/errors.hpp"
#include "svaclr/kernels.hpp"
#include "svaclr/runtime.hpp"

namespace svaclr {

EvalEmbeddings eval_embeddings(const ModelParams& model, const Dataset& ds,
                               const AugmentConfig& augment) {
  if (ds.clips.empty()) throw DomainError("eval_embeddings: empty dataset");
  const std::size_t m = ds.clips.size();
  const SpeedFactor one{1};
  if (valid_offset_count(ds.spec.raw_audio_len, one, augment.audio_window) ==
          0 ||
      valid_offset_count(ds.spec.raw_video_frames, one,
                         augment.video_window) == 0)
    throw DomainError("eval_embeddings: clips too short for the windows");

  Tensor audio_rows = Tensor::zeros({m, kAudioFeatureDim});
  const std::size_t video_dim =
      static_cast<std::size_t>(augment.video_window) *
      ds.clips[0].video.frame_dim;
  Tensor video_rows = Tensor::zeros({m, video_dim});
  EvalEmbeddings out;
  out.labels.resize(m);

#pragma omp parallel for schedule(static) num_threads(runtime::thread_cap())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    const Clip& clip = ds.clips[static_cast<std::size_t>(i)];
    const Waveform w =
        resample_audio(clip.audio, one, augment.audio_window, 0);
    const Tensor feat = audio_features(w);
    std::copy_n(feat.data.data(), kAudioFeatureDim,
                audio_rows.data.data() +
                    static_cast<std::size_t>(i) * kAudioFeatureDim);
    const FrameSeq v =
        subsample_video(clip.video, one, augment.video_window, 0);
    std::copy_n(v.values.data(), video_dim,
                video_rows.data.data() + static_cast<std::size_t>(i) * video_dim);
    out.labels[static_cast<std::size_t>(i)] = clip.label;
  }

  out.y_audio = encode_audio(model, audio_rows);
  out.y_video = encode_video(model, video_rows);
  out.z_audio = project_audio(model, out.y_audio);
  out.z_video = project_video(model, out.y_video);
  return out;
}

namespace {

RetrievalResult rank_direction(const Tensor& z_query, const Tensor& z_gallery,
                               Direction direction,
                               std::span<const std::uint32_t> ks) {
  const std::size_t m = z_query.shape[0];
  const std::size_t g = z_gallery.shape[0];
  Tensor sims = Tensor::zeros({m, g});
  kernels::matmul_nt(z_query.data.data(), z_gallery.data.data(),
                     sims.data.data(), m, z_query.shape[1], g);

  std::vector<std::uint32_t> sorted_ks(ks.begin(), ks.end());
  std::sort(sorted_ks.begin(), sorted_ks.end());

  std::vector<std::size_t> ranks(m);
#pragma omp parallel for schedule(static) num_threads(runtime::thread_cap())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    const double* row = sims.data.data() + static_cast<std::size_t>(i) * g;
    const double match = row[i];
    std::size_t rank = 1;
    for (std::size_t j = 0; j < g; ++j) {
      if (row[j] > match) ++rank;
      // ties go to the lower gallery index
      else if (row[j] == match && j < static_cast<std::size_t>(i)) ++rank;
    }
    ranks[static_cast<std::size_t>(i)] = rank;
  }

  RetrievalResult result;
  result.direction = direction;
  result.num_queries = m;
  for (const std::uint32_t k : sorted_ks) {
    std::size_t hits = 0;
    for (const std::size_t r : ranks)
      if (r <= k) ++hits;
    result.recall_at.emplace_back(
        k, static_cast<double>(hits) / static_cast<double>(m));
  }
  return result;
}

}  // namespace

std::array<RetrievalResult, 2> retrieval_from_embeddings(
    const Tensor& z_audio, const Tensor& z_video,
    std::span<const std::uint32_t> ks) {
  if (z_audio.rank() != 2 || !z_audio.same_shape(z_video))
    throw ShapeError("retrieval: expected matching (M x d) embeddings, got " +
                     shape_str(z_audio) + " and " + shape_str(z_video));
  if (z_audio.shape[0] == 0) throw DomainError("retrieval: empty test set");
  return {rank_direction(z_audio, z_video, Direction::audio_to_video, ks),
          rank_direction(z_video, z_audio, Direction::video_to_audio, ks)};
}

std::array<RetrievalResult, 2> retrieval(const ModelParams& model,
                                         const Dataset& test,
                                         const AugmentConfig& augment,
                                         std::span<const std::uint32_t> ks) {
  const EvalEmbeddings emb = eval_embeddings(model, test, augment);
  return retrieval_from_embeddings(emb.z_audio, emb.z_video, ks);
}

ProbeResult probe_from_features(const Tensor& train_x,
                                std::span<const std::uint32_t> train_labels,
                                const Tensor& test_x,
                                std::span<const std::uint32_t> test_labels,
                                std::uint32_t num_classes,
                                const ProbeConfig& cfg,
                                const std::string& modality) {
  const std::size_t m = train_x.shape[0];
  const std::size_t d = train_x.shape[1];
  if (m == 0 || train_labels.size() != m)
    throw DomainError("linear_probe: bad training features");
  if (test_x.rank() != 2 || test_x.shape[1] != d ||
      test_labels.size() != test_x.shape[0])
    throw DomainError("linear_probe: test features do not match train");

  std::vector<std::size_t> histogram(num_classes, 0);
  for (const std::uint32_t y : train_labels) {
    if (y >= num_classes)
      throw DomainError("linear_probe: label out of range");
    ++histogram[y];
  }
  for (std::uint32_t c = 0; c < num_classes; ++c)
    if (histogram[c] == 0)
      throw DomainError("linear_probe: class " + std::to_string(c) +
                        " absent from train split");

  Tensor weight = Tensor::zeros({num_classes, d});
  Tensor bias = Tensor::zeros({num_classes});
  Tensor logits = Tensor::zeros({m, num_classes});
  Tensor grad_logits = Tensor::zeros({m, num_classes});
  Tensor grad_w = Tensor::zeros({num_classes, d});

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    kernels::matmul_nt(train_x.data.data(), weight.data.data(),
                       logits.data.data(), m, d, num_classes);
    for (std::size_t i = 0; i < m; ++i) {
      double* row = logits.data.data() + i * num_classes;
      double mx = row[0] + bias.data[0];
      for (std::uint32_t c = 0; c < num_classes; ++c) {
        row[c] += bias.data[c];
        mx = std::max(mx, row[c]);
      }
      double total = 0.0;
      for (std::uint32_t c = 0; c < num_classes; ++c) {
        row[c] = std::exp(row[c] - mx);
        total += row[c];
      }
      double* grow = grad_logits.data.data() + i * num_classes;
      for (std::uint32_t c = 0; c < num_classes; ++c) {
        const double p = row[c] / total;
        grow[c] = (p - (train_labels[i] == c ? 1.0 : 0.0)) /
                  static_cast<double>(m);
      }
    }
    kernels::matmul_tn(grad_logits.data.data(), train_x.data.data(),
                       grad_w.data.data(), num_classes, m, d);
    kernels::axpy(-cfg.lr, grad_w.data.data(), weight.data.data(),
                  weight.numel());
    for (std::uint32_t c = 0; c < num_classes; ++c) {
      double gb = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        gb += grad_logits.data[i * num_classes + c];
      bias.data[c] -= cfg.lr * gb;
    }
  }

  const std::size_t mt = test_x.shape[0];
  Tensor test_logits = Tensor::zeros({mt, num_classes});
  kernels::matmul_nt(test_x.data.data(), weight.data.data(),
                     test_logits.data.data(), mt, d, num_classes);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < mt; ++i) {
    const double* row = test_logits.data.data() + i * num_classes;
    std::uint32_t best = 0;
    double best_v = row[0] + bias.data[0];
    for (std::uint32_t c = 1; c < num_classes; ++c) {
      const double v = row[c] + bias.data[c];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    if (best == test_labels[i]) ++hits;
  }

  ProbeResult result;
  result.modality = modality;
  result.num_classes = num_classes;
  result.top1 = static_cast<double>(hits) / static_cast<double>(mt);
  return result;
}

std::vector<ProbeResult> linear_probe(const ModelParams& model,
                                      const Dataset& train,
                                      const Dataset& test,
                                      const AugmentConfig& augment,
                                      const ProbeConfig& cfg) {
  const EvalEmbeddings tr = eval_embeddings(model, train, augment);
  const EvalEmbeddings te = eval_embeddings(model, test, augment);
  const std::uint32_t classes = train.spec.num_classes;

  const auto concat_features = [](const Tensor& a, const Tensor& b) {
    const std::size_t rows = a.shape[0];
    Tensor out = Tensor::zeros({rows, a.shape[1] + b.shape[1]});
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(a.data.data() + r * a.shape[1], a.shape[1],
                  out.data.data() + r * out.shape[1]);
      std::copy_n(b.data.data() + r * b.shape[1], b.shape[1],
                  out.data.data() + r * out.shape[1] + a.shape[1]);
    }
    return out;
  };

  std::vector<ProbeResult> results;
  results.push_back(probe_from_features(tr.y_audio, tr.labels, te.y_audio,
                                        te.labels, classes, cfg, "audio"));
  results.push_back(probe_from_features(tr.y_video, tr.labels, te.y_video,
                                        te.labels, classes, cfg, "video"));
  results.push_back(probe_from_features(
      concat_features(tr.y_audio, tr.y_video), tr.labels,
      concat_features(te.y_audio, te.y_video), te.labels, classes, cfg,
      "concat"));
  return results;
}

AffinityReport affinity_report(const ModelParams& model, const Dataset& ds,
                               const DatasetSpec& spec,
                               const AugmentConfig& augment,
                               std::span<const std::uint32_t> speeds,
                               std::uint64_t seed) {
  for (const std::uint32_t s : speeds) {
    if (s < 1 || s > augment.max_speed)
      throw DomainError("affinity_report: speed " + std::to_string(s) +
                        " outside the configured library {1.." +
                        std::to_string(augment.max_speed) + "}");
    if (valid_offset_count(ds.spec.raw_audio_len, SpeedFactor{s},
                           augment.audio_window) == 0)
      throw DomainError("affinity_report: clips too short for speed " +
                        std::to_string(s));
  }
  if (ds.clips.empty()) throw DomainError("affinity_report: empty dataset");
  if (valid_offset_count(ds.spec.raw_video_frames, SpeedFactor{1},
                         augment.video_window) == 0)
    throw DomainError("affinity_report: clips too short for the video window");

  AffinityReport report;
  for (std::uint32_t cls = 0; cls < spec.num_classes; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.clips.size(); ++i)
      if (ds.clips[i].label == cls) members.push_back(i);
    if (members.empty()) continue;

    for (const std::uint32_t s : speeds) {
      std::vector<std::array<double, 4>> lambdas(members.size());
#pragma omp parallel for schedule(static) num_threads(runtime::thread_cap())
      for (std::int64_t k = 0; k < static_cast<std::int64_t>(members.size());
           ++k) {
        const std::size_t clip_idx = members[static_cast<std::size_t>(k)];
        Rng rng(mix_seed(seed, rng_stream::affinity_views,
                         (static_cast<std::uint64_t>(s) << 32) |
                             static_cast<std::uint64_t>(clip_idx)));
        const ViewSet vs =
            make_views(ds.clips[clip_idx], clip_idx, SpeedFactor{s},
                       SpeedFactor{1}, rng, augment);
        Tensor ya = Tensor::zeros({2, model.config.repr_dim});
        Tensor yv = Tensor::zeros({2, model.config.repr_dim});
        for (std::size_t p = 0; p < 2; ++p) {
          const Tensor fa = encode_audio(
              model, audio_features(vs.audio_views[p]));
          std::copy_n(fa.data.data(), fa.numel(),
                      ya.data.data() + p * model.config.repr_dim);
          const Tensor fv = encode_video(
              model,
              Tensor::vector(std::vector<double>(vs.video_views[p].values)));
          std::copy_n(fv.data.data(), fv.numel(),
                      yv.data.data() + p * model.config.repr_dim);
        }
        lambdas[static_cast<std::size_t>(k)] =
            cross_affinity(ya, yv, model.mapping).lambda;
      }

      AffinityReportRow row;
      row.cls = cls;
      row.speed = s;
      const auto alias = alias_class(cls, SpeedFactor{s}, spec);
      row.aliased = s > 1 && alias.has_value();
      for (const auto& lam : lambdas) {
        row.mean_lambda_sped += lam[1 * 2 + 0];  // [sped audio][orig video]
        row.mean_lambda_orig += lam[0 * 2 + 0];  // [orig audio][orig video]
      }
      row.mean_lambda_sped /= static_cast<double>(lambdas.size());
      row.mean_lambda_orig /= static_cast<double>(lambdas.size());
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace svaclr
