#include "svaclr/datagen.hpp"

#include <omp.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "svaclr/binio.hpp"
#include "svaclr/errors.hpp"
#include "svaclr/runtime.hpp"

namespace svaclr {

namespace {
constexpr char kMagic[4] = {'S', 'V', 'A', 'C'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

const char* split_name(Split s) {
  return s == Split::train ? "train" : "test";
}

void validate_spec(const DatasetSpec& spec, std::uint32_t max_speed) {
  if (spec.num_classes == 0 || spec.raw_audio_len == 0 ||
      spec.sample_rate == 0 || spec.raw_video_frames == 0 ||
      spec.frame_dim == 0)
    throw ConfigError("dataset: all counts must be positive");
  if (spec.clips_per_class_train == 0 || spec.clips_per_class_test == 0)
    throw ConfigError("dataset: clips_per_class must be positive");
  if (!(spec.base_freq > 0.0) || !(spec.freq_ratio > 0.0) ||
      spec.noise_std < 0.0)
    throw ConfigError("dataset: base_freq and freq_ratio must be positive");
  if (spec.num_classes > spec.frame_dim)
    throw ConfigError(
        "dataset: num_classes must be <= frame_dim to orthogonalize the "
        "class patterns");
  const double top_freq =
      spec.base_freq *
      std::pow(spec.freq_ratio, static_cast<double>(spec.num_classes - 1)) *
      static_cast<double>(max_speed);
  if (!(top_freq < static_cast<double>(spec.sample_rate) / 2.0))
    throw ConfigError(
        "dataset: base_freq * freq_ratio^(C-1) * max_speed = " +
        std::to_string(top_freq) + " violates Nyquist for sample_rate " +
        std::to_string(spec.sample_rate));
}

std::vector<std::vector<double>> class_patterns(const DatasetSpec& spec) {
  Rng rng(mix_seed(spec.seed, rng_stream::dataset_pattern));
  std::vector<std::vector<double>> patterns(spec.num_classes);
  for (auto& p : patterns) {
    p.resize(spec.frame_dim);
    for (double& v : p) v = rng.normal();
  }
  // Gram-Schmidt; unit-norm mutually orthogonal patterns make the video
  // class identity exact regardless of playback speed.
  for (std::size_t c = 0; c < patterns.size(); ++c) {
    auto& p = patterns[c];
    for (std::size_t prev = 0; prev < c; ++prev) {
      double dot = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i)
        dot += p[i] * patterns[prev][i];
      for (std::size_t i = 0; i < p.size(); ++i)
        p[i] -= dot * patterns[prev][i];
    }
    double sq = 0.0;
    for (double v : p) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm < 1e-9)
      throw NumericError("class_patterns: degenerate pattern draw");
    for (double& v : p) v /= norm;
  }
  return patterns;
}

Clip synth_clip(std::uint32_t cls, Rng& rng, const DatasetSpec& spec,
                const std::vector<std::vector<double>>& patterns) {
  if (cls >= spec.num_classes)
    throw DomainError("synth_clip: class " + std::to_string(cls) +
                      " out of range");
  Clip clip;
  clip.label = cls;

  const double freq =
      spec.base_freq * std::pow(spec.freq_ratio, static_cast<double>(cls));
  clip.audio.sample_rate = spec.sample_rate;
  clip.audio.samples.resize(spec.raw_audio_len);
  const double w =
      2.0 * std::numbers::pi * freq / static_cast<double>(spec.sample_rate);
  for (std::size_t k = 0; k < clip.audio.samples.size(); ++k) {
    double v = std::sin(w * static_cast<double>(k));
    if (spec.noise_std > 0.0) v += spec.noise_std * rng.normal();
    clip.audio.samples[k] = v;
  }

  const auto& pattern = patterns[cls];
  clip.video.frame_dim = spec.frame_dim;
  clip.video.values.resize(static_cast<std::size_t>(spec.raw_video_frames) *
                           spec.frame_dim);
  for (std::size_t t = 0; t < spec.raw_video_frames; ++t) {
    double* frame = clip.video.values.data() + t * spec.frame_dim;
    for (std::size_t i = 0; i < spec.frame_dim; ++i) {
      double v = pattern[i];
      if (spec.noise_std > 0.0) v += spec.noise_std * rng.normal();
      frame[i] = v;
    }
  }
  return clip;
}

std::optional<std::uint32_t> alias_class(std::uint32_t cls, SpeedFactor s,
                                         const DatasetSpec& spec) {
  if (s.value < 1) return std::nullopt;
  if (s.value == 1) return cls;
  // Shift k must satisfy freq_ratio^k == s on the class ladder.
  const double k = std::log(static_cast<double>(s.value)) /
                   std::log(spec.freq_ratio);
  const double rounded = std::round(k);
  if (std::abs(k - rounded) > 1e-9) return std::nullopt;
  const std::uint32_t shift = static_cast<std::uint32_t>(rounded);
  const std::uint32_t target = cls + shift;
  if (target >= spec.num_classes) return std::nullopt;
  return target;
}

Dataset generate_dataset(const DatasetSpec& spec, Split split) {
  validate_spec(spec, 1);
  const std::uint32_t per_class = split == Split::train
                                      ? spec.clips_per_class_train
                                      : spec.clips_per_class_test;
  const std::size_t total =
      static_cast<std::size_t>(per_class) * spec.num_classes;
  const auto patterns = class_patterns(spec);

  Dataset ds;
  ds.spec = spec;
  ds.split = split;
  ds.clips.resize(total);

  const std::uint64_t split_tag = static_cast<std::uint64_t>(split);
#pragma omp parallel for schedule(static) \
    num_threads(runtime::thread_cap())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(total); ++i) {
    const std::uint32_t cls =
        static_cast<std::uint32_t>(i) % spec.num_classes;
    Rng rng(mix_seed(spec.seed, rng_stream::dataset_clip,
                     (split_tag << 32) | static_cast<std::uint64_t>(i)));
    ds.clips[static_cast<std::size_t>(i)] =
        synth_clip(cls, rng, spec, patterns);
  }
  return ds;
}

void write_dataset(const Dataset& ds, std::ostream& out) {
  out.write(kMagic, 4);
  io::write_u32(out, kVersion);
  io::write_u32(out, static_cast<std::uint32_t>(ds.clips.size()));
  io::write_u32(out, ds.spec.num_classes);
  io::write_u32(out, ds.spec.raw_audio_len);
  io::write_u32(out, ds.spec.raw_video_frames);
  io::write_u32(out, ds.spec.frame_dim);
  io::write_u32(out, ds.spec.sample_rate);
  for (const Clip& clip : ds.clips) {
    io::write_u32(out, clip.label);
    for (double v : clip.audio.samples)
      io::write_f32(out, static_cast<float>(v));
    for (double v : clip.video.values)
      io::write_f32(out, static_cast<float>(v));
  }
  if (!out) throw IoError("write_dataset: stream failure");
}

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_dataset: cannot open " + path);
  write_dataset(ds, out);
}

Dataset read_dataset(std::istream& in, const std::string& origin) {
  char magic[4];
  in.read(magic, 4);
  if (!in)
    throw DatasetFormatError(DatasetFormatError::Code::truncated,
                             origin + ": truncated file (missing magic)");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw DatasetFormatError(DatasetFormatError::Code::bad_magic,
                             origin + ": bad magic, not a dataset file");
  const std::uint32_t version = io::read_u32(in, "version");
  if (version != kVersion)
    throw DatasetFormatError(
        DatasetFormatError::Code::bad_version,
        origin + ": unsupported version " + std::to_string(version));

  Dataset ds;
  const std::uint32_t num_clips = io::read_u32(in, "num_clips");
  ds.spec.num_classes = io::read_u32(in, "num_classes");
  ds.spec.raw_audio_len = io::read_u32(in, "raw_audio_len");
  ds.spec.raw_video_frames = io::read_u32(in, "raw_video_frames");
  ds.spec.frame_dim = io::read_u32(in, "frame_dim");
  ds.spec.sample_rate = io::read_u32(in, "sample_rate");
  if (ds.spec.num_classes == 0 || ds.spec.raw_audio_len == 0 ||
      ds.spec.raw_video_frames == 0 || ds.spec.frame_dim == 0 ||
      ds.spec.sample_rate == 0)
    throw DatasetFormatError(DatasetFormatError::Code::dimension_mismatch,
                             origin + ": zero dimension in header");

  ds.clips.resize(num_clips);
  for (std::uint32_t i = 0; i < num_clips; ++i) {
    Clip& clip = ds.clips[i];
    clip.label = io::read_u32(in, "clip label");
    if (clip.label >= ds.spec.num_classes)
      throw DatasetFormatError(
          DatasetFormatError::Code::dimension_mismatch,
          origin + ": clip label " + std::to_string(clip.label) +
              " >= num_classes " + std::to_string(ds.spec.num_classes));
    clip.audio.sample_rate = ds.spec.sample_rate;
    clip.audio.samples.resize(ds.spec.raw_audio_len);
    for (double& v : clip.audio.samples)
      v = static_cast<double>(io::read_f32(in, "audio sample"));
    clip.video.frame_dim = ds.spec.frame_dim;
    clip.video.values.resize(
        static_cast<std::size_t>(ds.spec.raw_video_frames) *
        ds.spec.frame_dim);
    for (double& v : clip.video.values)
      v = static_cast<double>(io::read_f32(in, "video value"));
  }
  return ds;
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_dataset: cannot open " + path);
  return read_dataset(in, path);
}

}  // namespace svaclr
