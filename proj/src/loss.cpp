#include "svaclr/loss.hpp"

#include <algorithm>
#include <cmath>

#include "svaclr/errors.hpp"

namespace svaclr {

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::audio_to_video: return "audio_to_video";
    case Direction::video_to_audio: return "video_to_audio";
    case Direction::both: return "both";
  }
  return "?";
}

MappingNodes stage_mapping(Tape& tape, const MappingParams& mapping) {
  MappingNodes nodes;
  nodes.kind = mapping.kind;
  for (const Tensor& t : mapping.tensors) nodes.tensors.push_back(tape.leaf(t));
  return nodes;
}

Tape::NodeId apply_mapping(Tape& tape, Tape::NodeId y,
                           const MappingNodes& mapping) {
  switch (mapping.kind) {
    case MappingKind::identity:
      return y;
    case MappingKind::linear: {
      const Tape::NodeId mt =
          tape.apply(OpKind::transpose, {mapping.tensors[0]});
      return tape.apply(OpKind::matmul, {y, mt});
    }
    case MappingKind::nonlinear: {
      const Tape::NodeId w1t =
          tape.apply(OpKind::transpose, {mapping.tensors[0]});
      Tape::NodeId h = tape.apply(OpKind::matmul, {y, w1t});
      h = tape.apply(OpKind::add, {h, mapping.tensors[1]});
      h = tape.apply(OpKind::relu, {h});
      const Tape::NodeId w2t =
          tape.apply(OpKind::transpose, {mapping.tensors[2]});
      h = tape.apply(OpKind::matmul, {h, w2t});
      return tape.apply(OpKind::add, {h, mapping.tensors[3]});
    }
  }
  throw DomainError("apply_mapping: unknown mapping kind");
}

Tape::NodeId affinity_from_logits_node(Tape& tape, Tape::NodeId logits) {
  if (tape.value(logits).numel() != 4)
    throw ShapeError("affinity: expected 4 logits, got " +
                     shape_str(tape.value(logits)));
  OpAttrs attrs;
  attrs.axis = kAllAxes;
  return tape.apply(OpKind::softmax, {logits}, attrs);
}

Tape::NodeId clip_affinity_node(Tape& tape, Tape::NodeId la,
                                Tape::NodeId lv) {
  const auto row = [&](Tape::NodeId m, std::size_t r) {
    OpAttrs attrs;
    attrs.axis = 0;
    attrs.start = r;
    attrs.extent = 1;
    return tape.apply(OpKind::slice, {m}, attrs);
  };
  std::array<Tape::NodeId, 4> logits{};
  for (std::size_t p = 0; p < 2; ++p) {
    const Tape::NodeId ap = row(la, p);
    for (std::size_t q = 0; q < 2; ++q) {
      const Tape::NodeId vq = row(lv, q);
      const Tape::NodeId dot = tape.apply(
          OpKind::sum, {tape.apply(OpKind::mul, {ap, vq})});
      logits[p * 2 + q] = dot;
    }
  }
  OpAttrs cat;
  cat.axis = 0;
  const Tape::NodeId flat = tape.apply(
      OpKind::concat, {logits[0], logits[1], logits[2], logits[3]}, cat);
  return affinity_from_logits_node(tape, flat);
}

Tape::NodeId scaled_scores_node(Tape& tape, Tape::NodeId z_query,
                                Tape::NodeId z_key, double eta) {
  if (!(eta > 0.0)) throw DomainError("info_nce: eta must be > 0");
  const Tape::NodeId kt = tape.apply(OpKind::transpose, {z_key});
  const Tape::NodeId sims = tape.apply(OpKind::matmul, {z_query, kt});
  OpAttrs attrs;
  attrs.scalar = 1.0 / eta;
  return tape.apply(OpKind::scale, {sims}, attrs);
}

namespace {

// -log softmax probability of the positive among the masked key columns.
// The log-sum-exp is shifted by the max allowed score (held constant, which
// leaves the gradient exact) so large scores never overflow.
Tape::NodeId masked_term(Tape& tape, Tape::NodeId scores, std::size_t row,
                         std::size_t pos_col,
                         const std::vector<double>& mask) {
  // read everything needed from the scores value up front: tape references
  // do not survive the apply() calls below
  std::size_t cols;
  double shift = -std::numeric_limits<double>::infinity();
  {
    const Tensor& s = tape.value(scores);
    cols = s.shape[1];
    for (std::size_t j = 0; j < cols; ++j)
      if (mask[j] > 0.0) shift = std::max(shift, s.at2(row, j));
  }

  OpAttrs slice_attrs;
  slice_attrs.axis = 0;
  slice_attrs.start = row;
  slice_attrs.extent = 1;
  const Tape::NodeId score_row =
      tape.apply(OpKind::slice, {scores}, slice_attrs);

  const Tape::NodeId shifted = tape.apply(
      OpKind::sub, {score_row, tape.leaf(Tensor::full({1, cols}, shift))});
  const Tape::NodeId masked = tape.apply(
      OpKind::mul, {tape.apply(OpKind::exp, {shifted}),
                    tape.leaf(Tensor({1, cols}, mask))});
  const Tape::NodeId lse = tape.apply(
      OpKind::add, {tape.apply(OpKind::log, {tape.apply(OpKind::sum, {masked})}),
                    tape.leaf(Tensor::scalar(shift))});

  Tensor onehot = Tensor::zeros({1, cols});
  onehot.data[pos_col] = 1.0;
  const Tape::NodeId pos = tape.apply(
      OpKind::sum, {tape.apply(OpKind::mul, {score_row, tape.leaf(onehot)})});
  return tape.apply(OpKind::sub, {lse, pos});
}

// Allowed key columns for query clip i with positive view q: the positive,
// every view of every other clip, and optionally the same clip's other view.
std::vector<double> keys_mask(std::size_t n_clips, std::size_t i,
                              std::size_t q, bool include_other_view) {
  std::vector<double> mask(2 * n_clips, 1.0);
  mask[2 * i + (1 - q)] = include_other_view ? 1.0 : 0.0;
  return mask;
}

Tape::NodeId mean_of(Tape& tape, std::span<const Tape::NodeId> terms) {
  OpAttrs cat;
  cat.axis = 0;
  const Tape::NodeId vec = tape.apply(OpKind::concat, terms, cat);
  OpAttrs sc;
  sc.scalar = 1.0 / static_cast<double>(terms.size());
  return tape.apply(OpKind::scale, {tape.apply(OpKind::sum, {vec})}, sc);
}

Tape::NodeId halve_sum(Tape& tape, Tape::NodeId a, Tape::NodeId b) {
  OpAttrs sc;
  sc.scalar = 0.5;
  return tape.apply(OpKind::scale, {tape.apply(OpKind::add, {a, b})}, sc);
}

void check_two_view_rows(const Tensor& z, std::size_t n_clips,
                         const char* what) {
  if (z.rank() != 2 || z.shape[0] != 2 * n_clips)
    throw ShapeError(std::string(what) + ": expected (" +
                     std::to_string(2 * n_clips) + " x d) rows, got " +
                     shape_str(z));
}

}  // namespace

Tape::NodeId info_nce_term_node(Tape& tape, Tape::NodeId z_query,
                                Tape::NodeId z_key, std::size_t n_clips,
                                std::size_t i, std::size_t p, std::size_t q,
                                const LossConfig& cfg) {
  if (n_clips < 2)
    throw DomainError("info_nce_term: need at least 2 clips for negatives");
  if (i >= n_clips || p >= 2 || q >= 2)
    throw DomainError("info_nce_term: view index out of range");
  check_two_view_rows(tape.value(z_query), n_clips, "info_nce_term");
  check_two_view_rows(tape.value(z_key), n_clips, "info_nce_term");
  const Tape::NodeId scores =
      scaled_scores_node(tape, z_query, z_key, cfg.eta);
  return masked_term(
      tape, scores, 2 * i + p, 2 * i + q,
      keys_mask(n_clips, i, q, cfg.include_same_clip_other_view_as_negative));
}

Tape::NodeId vanilla_info_nce_node(Tape& tape, Tape::NodeId z_audio,
                                   Tape::NodeId z_video,
                                   const LossConfig& cfg) {
  const Tensor& za = tape.value(z_audio);
  const Tensor& zv = tape.value(z_video);
  if (za.rank() != 2 || !za.same_shape(zv))
    throw ShapeError("vanilla_info_nce: expected matching (N x d) inputs, got " +
                     shape_str(za) + " and " + shape_str(zv));
  const std::size_t n = za.shape[0];
  if (n < 2)
    throw DomainError("vanilla_info_nce: need at least 2 clips for negatives");

  const std::vector<double> all(n, 1.0);
  const auto directional = [&](Tape::NodeId zq, Tape::NodeId zk) {
    const Tape::NodeId scores = scaled_scores_node(tape, zq, zk, cfg.eta);
    std::vector<Tape::NodeId> terms;
    terms.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      terms.push_back(masked_term(tape, scores, i, i, all));
    return mean_of(tape, terms);
  };

  switch (cfg.direction) {
    case Direction::audio_to_video:
      return directional(z_audio, z_video);
    case Direction::video_to_audio:
      return directional(z_video, z_audio);
    case Direction::both:
      return halve_sum(tape, directional(z_audio, z_video),
                       directional(z_video, z_audio));
  }
  throw DomainError("vanilla_info_nce: unknown direction");
}

SoftLossGraph soft_info_nce_node(Tape& tape, Tape::NodeId y_audio,
                                 Tape::NodeId y_video, Tape::NodeId z_audio,
                                 Tape::NodeId z_video, std::size_t n_clips,
                                 const MappingNodes& mapping,
                                 const LossConfig& cfg,
                                 AffinityWeighting weighting) {
  if (n_clips < 2)
    throw DomainError("soft_info_nce: need at least 2 clips for negatives");
  check_two_view_rows(tape.value(z_audio), n_clips, "soft_info_nce");
  check_two_view_rows(tape.value(z_video), n_clips, "soft_info_nce");

  const bool want_av = cfg.direction != Direction::video_to_audio;
  const bool want_va = cfg.direction != Direction::audio_to_video;
  const Tape::NodeId scores_av =
      want_av ? scaled_scores_node(tape, z_audio, z_video, cfg.eta) : 0;
  const Tape::NodeId scores_va =
      want_va ? scaled_scores_node(tape, z_video, z_audio, cfg.eta) : 0;

  Tape::NodeId mapped_a = 0, mapped_v = 0;
  if (weighting == AffinityWeighting::learned) {
    check_two_view_rows(tape.value(y_audio), n_clips, "soft_info_nce");
    check_two_view_rows(tape.value(y_video), n_clips, "soft_info_nce");
    mapped_a = apply_mapping(tape, y_audio, mapping);
    mapped_v = apply_mapping(tape, y_video, mapping);
  }

  SoftLossGraph graph;
  graph.lambdas.reserve(n_clips);
  std::vector<Tape::NodeId> contribs;
  contribs.reserve(n_clips);

  OpAttrs cat;
  cat.axis = 0;

  for (std::size_t i = 0; i < n_clips; ++i) {
    Tape::NodeId lambda_node;
    if (weighting == AffinityWeighting::learned) {
      OpAttrs pair_attrs;
      pair_attrs.axis = 0;
      pair_attrs.start = 2 * i;
      pair_attrs.extent = 2;
      const Tape::NodeId la =
          tape.apply(OpKind::slice, {mapped_a}, pair_attrs);
      const Tape::NodeId lv =
          tape.apply(OpKind::slice, {mapped_v}, pair_attrs);
      lambda_node = clip_affinity_node(tape, la, lv);
      AffinityMatrix lam;
      std::copy_n(tape.value(lambda_node).data.data(), 4, lam.lambda.data());
      graph.lambdas.push_back(lam);
      if (cfg.detach_affinity)
        lambda_node = tape.leaf(tape.value(lambda_node));
    } else {
      graph.lambdas.push_back(AffinityMatrix::uniform());
      lambda_node = tape.leaf(Tensor::full({4}, 0.25));
    }

    std::array<Tape::NodeId, 4> terms{};
    for (std::size_t p = 0; p < 2; ++p) {
      for (std::size_t q = 0; q < 2; ++q) {
        const auto mask_v = keys_mask(
            n_clips, i, q, cfg.include_same_clip_other_view_as_negative);
        const auto mask_a = keys_mask(
            n_clips, i, p, cfg.include_same_clip_other_view_as_negative);
        Tape::NodeId term;
        if (want_av && want_va) {
          term = halve_sum(
              tape,
              masked_term(tape, scores_av, 2 * i + p, 2 * i + q, mask_v),
              masked_term(tape, scores_va, 2 * i + q, 2 * i + p, mask_a));
        } else if (want_av) {
          term = masked_term(tape, scores_av, 2 * i + p, 2 * i + q, mask_v);
        } else {
          term = masked_term(tape, scores_va, 2 * i + q, 2 * i + p, mask_a);
        }
        terms[p * 2 + q] = term;
      }
    }
    const Tape::NodeId term_vec = tape.apply(
        OpKind::concat, {terms[0], terms[1], terms[2], terms[3]}, cat);
    contribs.push_back(tape.apply(
        OpKind::sum, {tape.apply(OpKind::mul, {lambda_node, term_vec})}));
  }

  graph.loss = mean_of(tape, contribs);
  return graph;
}

// --- value-level wrappers ---

namespace {
Tensor two_view_rows(const Tensor& z, const char* what) {
  if (z.rank() == 3) {
    if (z.shape[1] != 2)
      throw ShapeError(std::string(what) + ": expected 2 views per clip, got " +
                       shape_str(z));
    return as_rows(z);
  }
  if (z.rank() == 2) return z;
  throw ShapeError(std::string(what) + ": unexpected shape " + shape_str(z));
}
}  // namespace

double info_nce_term(const Tensor& z_query, const Tensor& z_key,
                     std::size_t i, std::size_t p, std::size_t q,
                     const LossConfig& cfg) {
  const Tensor zq = two_view_rows(z_query, "info_nce_term");
  const Tensor zk = two_view_rows(z_key, "info_nce_term");
  Tape tape;
  const Tape::NodeId term =
      info_nce_term_node(tape, tape.leaf(zq), tape.leaf(zk), zq.shape[0] / 2,
                         i, p, q, cfg);
  return tape.value(term).data[0];
}

double vanilla_info_nce(const Tensor& z_audio, const Tensor& z_video,
                        const LossConfig& cfg) {
  const auto squeeze = [](const Tensor& z) {
    if (z.rank() == 3 && z.shape[1] == 1)
      return Tensor({z.shape[0], z.shape[2]}, z.data);
    return z;
  };
  Tape tape;
  const Tape::NodeId loss = vanilla_info_nce_node(
      tape, tape.leaf(squeeze(z_audio)), tape.leaf(squeeze(z_video)), cfg);
  return tape.value(loss).data[0];
}

AffinityMatrix cross_affinity(const Tensor& y_audio_views,
                              const Tensor& y_video_views,
                              const MappingParams& mapping) {
  if (y_audio_views.rank() != 2 || y_audio_views.shape[0] != 2 ||
      !y_audio_views.same_shape(y_video_views))
    throw ShapeError("cross_affinity: expected matching (2 x repr) views, got " +
                     shape_str(y_audio_views) + " and " +
                     shape_str(y_video_views));
  Tape tape;
  const MappingNodes nodes = stage_mapping(tape, mapping);
  const Tape::NodeId la =
      apply_mapping(tape, tape.leaf(y_audio_views), nodes);
  const Tape::NodeId lv =
      apply_mapping(tape, tape.leaf(y_video_views), nodes);
  const Tape::NodeId lambda = clip_affinity_node(tape, la, lv);
  AffinityMatrix out;
  std::copy_n(tape.value(lambda).data.data(), 4, out.lambda.data());
  return out;
}

double soft_info_nce(const BatchEmbeddings& batch,
                     std::span<const AffinityMatrix> affinities,
                     const LossConfig& cfg) {
  if (batch.n_views != 2)
    throw ShapeError("soft_info_nce: batch must carry 2 views per modality");
  if (affinities.size() != batch.n_clips)
    throw ShapeError("soft_info_nce: expected one affinity per clip, got " +
                     std::to_string(affinities.size()) + " for " +
                     std::to_string(batch.n_clips) + " clips");

  Tape tape;
  const Tape::NodeId za = tape.leaf(as_rows(batch.z_audio));
  const Tape::NodeId zv = tape.leaf(as_rows(batch.z_video));
  const bool want_av = cfg.direction != Direction::video_to_audio;
  const bool want_va = cfg.direction != Direction::audio_to_video;
  const Tape::NodeId scores_av =
      want_av ? scaled_scores_node(tape, za, zv, cfg.eta) : 0;
  const Tape::NodeId scores_va =
      want_va ? scaled_scores_node(tape, zv, za, cfg.eta) : 0;

  double total = 0.0;
  for (std::size_t i = 0; i < batch.n_clips; ++i) {
    double clip_sum = 0.0;
    for (std::size_t p = 0; p < 2; ++p) {
      for (std::size_t q = 0; q < 2; ++q) {
        const auto mask_v = keys_mask(
            batch.n_clips, i, q, cfg.include_same_clip_other_view_as_negative);
        const auto mask_a = keys_mask(
            batch.n_clips, i, p, cfg.include_same_clip_other_view_as_negative);
        double term = 0.0;
        if (want_av && want_va) {
          const double av = tape.value(masked_term(tape, scores_av, 2 * i + p,
                                                   2 * i + q, mask_v))
                                .data[0];
          const double va = tape.value(masked_term(tape, scores_va, 2 * i + q,
                                                   2 * i + p, mask_a))
                                .data[0];
          term = 0.5 * (av + va);
        } else if (want_av) {
          term = tape.value(masked_term(tape, scores_av, 2 * i + p, 2 * i + q,
                                        mask_v))
                     .data[0];
        } else {
          term = tape.value(masked_term(tape, scores_va, 2 * i + q, 2 * i + p,
                                        mask_a))
                     .data[0];
        }
        clip_sum += affinities[i].at(p, q) * term;
      }
    }
    total += clip_sum;
  }
  return total / static_cast<double>(batch.n_clips);
}

// --- gradient fidelity suite ---

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo,
                     double hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

Tensor random_unit_rows(Rng& rng, std::size_t rows, std::size_t dim) {
  Tensor t = Tensor::zeros({rows, dim});
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double v = rng.normal();
      t.at2(r, c) = v;
      sq += v * v;
    }
    const double norm = std::sqrt(sq);
    for (std::size_t c = 0; c < dim; ++c) t.at2(r, c) /= norm;
  }
  return t;
}

MappingParams random_mapping(MappingKind kind, std::size_t dim, Rng& rng) {
  MappingParams m;
  m.kind = kind;
  if (kind == MappingKind::linear) {
    m.tensors = {random_tensor(rng, {dim, dim}, -0.5, 0.5)};
  } else if (kind == MappingKind::nonlinear) {
    m.tensors = {random_tensor(rng, {dim, dim}, -0.5, 0.5),
                 random_tensor(rng, {dim}, -0.1, 0.1),
                 random_tensor(rng, {dim, dim}, -0.5, 0.5),
                 random_tensor(rng, {dim}, -0.1, 0.1)};
  }
  return m;
}

}  // namespace

GradCheckReport loss_gradient_report(std::uint64_t seed,
                                     std::size_t instances) {
  constexpr std::size_t kClips = 2;
  constexpr std::size_t kRepr = 8;
  constexpr std::size_t kProj = 6;
  const double etas[] = {0.1, 0.5, 1.0};

  GradCheckReport report;
  const auto record = [&](const std::string& name, double err) {
    report.entries.push_back({name, err});
    report.worst = std::max(report.worst, err);
  };

  for (std::size_t inst = 0; inst < instances; ++inst) {
    Rng rng(mix_seed(seed, 101, inst));
    LossConfig cfg;
    cfg.eta = etas[inst % 3];
    const std::string tag = "#" + std::to_string(inst);

    {  // vanilla InfoNCE w.r.t. both embedding matrices
      const Tensor inputs[] = {random_unit_rows(rng, kClips, kProj),
                               random_unit_rows(rng, kClips, kProj)};
      const double err = grad_check_multi(
          [&](Tape& tape, std::span<const Tape::NodeId> ids) {
            return vanilla_info_nce_node(tape, ids[0], ids[1], cfg);
          },
          inputs);
      record("vanilla_infonce" + tag, err);
    }

    for (const MappingKind kind :
         {MappingKind::identity, MappingKind::linear, MappingKind::nonlinear}) {
      // scalar head: fixed random weighting of the four lambda entries
      const Tensor head = random_tensor(rng, {4}, -1.0, 1.0);
      const MappingParams mapping = random_mapping(kind, kRepr, rng);
      std::vector<Tensor> inputs = {random_unit_rows(rng, 2, kRepr),
                                    random_unit_rows(rng, 2, kRepr)};
      for (const Tensor& t : mapping.tensors) inputs.push_back(t);
      const double err = grad_check_multi(
          [&](Tape& tape, std::span<const Tape::NodeId> ids) {
            MappingNodes nodes;
            nodes.kind = kind;
            for (std::size_t t = 2; t < ids.size(); ++t)
              nodes.tensors.push_back(ids[t]);
            const Tape::NodeId la = apply_mapping(tape, ids[0], nodes);
            const Tape::NodeId lv = apply_mapping(tape, ids[1], nodes);
            const Tape::NodeId lambda = clip_affinity_node(tape, la, lv);
            return tape.apply(
                OpKind::sum,
                {tape.apply(OpKind::mul, {lambda, tape.leaf(head)})});
          },
          inputs);
      record(std::string("cross_affinity_") + mapping_name(kind) + tag, err);
    }

    {  // full SoftInfoNCE on an N=2 batch, identity mapping
      const Tensor inputs[] = {random_unit_rows(rng, 2 * kClips, kRepr),
                               random_unit_rows(rng, 2 * kClips, kRepr),
                               random_unit_rows(rng, 2 * kClips, kProj),
                               random_unit_rows(rng, 2 * kClips, kProj)};
      const double err = grad_check_multi(
          [&](Tape& tape, std::span<const Tape::NodeId> ids) {
            MappingNodes identity;
            return soft_info_nce_node(tape, ids[0], ids[1], ids[2], ids[3],
                                      kClips, identity, cfg,
                                      AffinityWeighting::learned)
                .loss;
          },
          inputs);
      record("soft_infonce" + tag, err);
    }
  }
  return report;
}

}  // namespace svaclr
