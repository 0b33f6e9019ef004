#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "svaclr/datagen.hpp"
#include "svaclr/runtime.hpp"

using namespace svaclr;

namespace {
std::string serialize(const Dataset& ds) {
  std::ostringstream out(std::ios::binary);
  write_dataset(ds, out);
  return out.str();
}

bool clips_equal(const Clip& a, const Clip& b) {
  return a.label == b.label && a.audio.samples == b.audio.samples &&
         a.video.values == b.video.values;
}
}  // namespace

TEST_CASE("synth_clip is deterministic and lands on the expected bin") {
  DatasetSpec spec;
  spec.seed = 4;
  const auto patterns = class_patterns(spec);

  Rng r1(mix_seed(spec.seed, rng_stream::dataset_clip, 7));
  Rng r2(mix_seed(spec.seed, rng_stream::dataset_clip, 7));
  const Clip a = synth_clip(2, r1, spec, patterns);
  const Clip b = synth_clip(2, r2, spec, patterns);
  CHECK(clips_equal(a, b));

  // class 0 at the defaults: f0 * window / rate = 16 * 512 / 2048 = bin 4
  Rng r3(mix_seed(spec.seed, rng_stream::dataset_clip, 0));
  const Clip c0 = synth_clip(0, r3, spec, patterns);
  const Waveform win = resample_audio(c0.audio, SpeedFactor{1}, 512, 0);
  CHECK(dominant_bin(audio_features(win)) == 4);
}

TEST_CASE("video frames cohere within a clip") {
  DatasetSpec spec;
  spec.seed = 11;
  const auto patterns = class_patterns(spec);
  Rng rng(mix_seed(spec.seed, rng_stream::dataset_clip, 3));
  const Clip clip = synth_clip(5, rng, spec, patterns);

  const auto cosine = [&](std::size_t s, std::size_t t) {
    double dot = 0, ns = 0, nt = 0;
    for (std::size_t i = 0; i < spec.frame_dim; ++i) {
      dot += clip.video.frame(s)[i] * clip.video.frame(t)[i];
      ns += clip.video.frame(s)[i] * clip.video.frame(s)[i];
      nt += clip.video.frame(t)[i] * clip.video.frame(t)[i];
    }
    return dot / std::sqrt(ns * nt);
  };
  for (std::size_t t = 1; t < clip.video.frame_count(); ++t)
    CHECK(cosine(0, t) > 0.9);
}

TEST_CASE("class patterns are orthonormal and shared across splits") {
  DatasetSpec spec;
  spec.seed = 99;
  const auto p = class_patterns(spec);
  REQUIRE(p.size() == spec.num_classes);
  for (std::size_t a = 0; a < p.size(); ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      double dot = 0;
      for (std::size_t i = 0; i < spec.frame_dim; ++i) dot += p[a][i] * p[b][i];
      CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("video class identity survives any speed") {
  DatasetSpec spec;
  spec.seed = 2;
  const auto patterns = class_patterns(spec);
  const Dataset ds = generate_dataset(spec, Split::test);

  std::size_t correct = 0, total = 0;
  for (const std::uint32_t s : {1u, 2u, 4u}) {
    for (const Clip& clip : ds.clips) {
      const FrameSeq v = subsample_video(clip.video, SpeedFactor{s}, 8, 0);
      std::vector<double> mean(spec.frame_dim, 0.0);
      for (std::size_t t = 0; t < v.frame_count(); ++t)
        for (std::size_t i = 0; i < spec.frame_dim; ++i)
          mean[i] += v.frame(t)[i] / static_cast<double>(v.frame_count());
      std::size_t best = 0;
      double best_cos = -2;
      for (std::size_t c = 0; c < patterns.size(); ++c) {
        double dot = 0, nm = 0;
        for (std::size_t i = 0; i < spec.frame_dim; ++i) {
          dot += mean[i] * patterns[c][i];
          nm += mean[i] * mean[i];
        }
        const double cosv = dot / std::sqrt(nm);
        if (cosv > best_cos) {
          best_cos = cosv;
          best = c;
        }
      }
      correct += (best == clip.label);
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.99);
}

TEST_CASE("alias_class ladder") {
  DatasetSpec spec;
  CHECK(alias_class(2, SpeedFactor{4}, spec) == 6);
  CHECK(alias_class(0, SpeedFactor{2}, spec) == 2);
  CHECK(alias_class(5, SpeedFactor{4}, spec) == std::nullopt);  // 9 >= 8
  CHECK(alias_class(3, SpeedFactor{1}, spec) == 3);
  CHECK(alias_class(0, SpeedFactor{3}, spec) == std::nullopt);  // off ladder
  CHECK(alias_class(7, SpeedFactor{2}, spec) == std::nullopt);
}

TEST_CASE("sped audio matches the alias class fundamental exactly") {
  DatasetSpec spec;
  spec.noise_std = 0.0;
  spec.seed = 5;
  const auto patterns = class_patterns(spec);
  for (std::uint32_t cls = 0; cls < spec.num_classes; ++cls) {
    for (const std::uint32_t s : {2u, 4u}) {
      const auto target = alias_class(cls, SpeedFactor{s}, spec);
      if (!target) continue;
      Rng ra(mix_seed(spec.seed, rng_stream::dataset_clip, cls));
      Rng rb(mix_seed(spec.seed, rng_stream::dataset_clip, *target));
      const Clip src = synth_clip(cls, ra, spec, patterns);
      const Clip dst = synth_clip(*target, rb, spec, patterns);
      const auto sped =
          audio_features(resample_audio(src.audio, SpeedFactor{s}, 512, 0));
      const auto ref =
          audio_features(resample_audio(dst.audio, SpeedFactor{1}, 512, 0));
      CHECK(dominant_bin(sped) == dominant_bin(ref));
    }
  }
}

TEST_CASE("dataset generation is a pure function, thread count irrelevant") {
  DatasetSpec spec;
  spec.clips_per_class_train = 4;
  spec.seed = 13;

  runtime::set_thread_cap(1);
  const Dataset a = generate_dataset(spec, Split::train);
  runtime::set_thread_cap(4);
  const Dataset b = generate_dataset(spec, Split::train);
  runtime::set_thread_cap(2);

  REQUIRE(a.clips.size() == b.clips.size());
  for (std::size_t i = 0; i < a.clips.size(); ++i)
    CHECK(clips_equal(a.clips[i], b.clips[i]));

  // uniform class histogram
  std::vector<int> hist(spec.num_classes, 0);
  for (const Clip& c : a.clips) ++hist[c.label];
  for (const int h : hist) CHECK(h == 4);
}

TEST_CASE("default split sizes") {
  DatasetSpec spec;
  CHECK(generate_dataset(spec, Split::train).clips.size() == 512);
  CHECK(generate_dataset(spec, Split::test).clips.size() == 128);
}

TEST_CASE("dataset file round-trip is byte-exact") {
  DatasetSpec spec;
  spec.clips_per_class_train = 2;
  spec.seed = 3;
  const Dataset ds = generate_dataset(spec, Split::train);

  const std::string bytes = serialize(ds);
  std::istringstream in(bytes, std::ios::binary);
  const Dataset back = read_dataset(in, "test");
  CHECK(serialize(back) == bytes);

  // header layout: magic(4) version(4) num_clips(4) num_classes(4) then
  // raw_audio_len at offset 16
  const std::uint32_t audio_len =
      static_cast<std::uint8_t>(bytes[16]) |
      (static_cast<std::uint8_t>(bytes[17]) << 8) |
      (static_cast<std::uint8_t>(bytes[18]) << 16) |
      (static_cast<std::uint8_t>(bytes[19]) << 24);
  CHECK(audio_len == 4096);
}

TEST_CASE("dataset file errors are distinct") {
  DatasetSpec spec;
  spec.clips_per_class_train = 1;
  spec.clips_per_class_test = 1;
  const Dataset ds = generate_dataset(spec, Split::test);
  const std::string bytes = serialize(ds);

  const auto code_of = [](const std::string& data) {
    std::istringstream in(data, std::ios::binary);
    try {
      read_dataset(in, "test");
    } catch (const DatasetFormatError& e) {
      return e.code;
    }
    throw std::runtime_error("expected DatasetFormatError");
  };

  std::string bad_magic = bytes;
  bad_magic[0] = 'Z';
  CHECK(code_of(bad_magic) == DatasetFormatError::Code::bad_magic);

  std::string bad_version = bytes;
  bad_version[4] = 9;
  CHECK(code_of(bad_version) == DatasetFormatError::Code::bad_version);

  CHECK(code_of(bytes.substr(0, bytes.size() / 2)) ==
        DatasetFormatError::Code::truncated);

  std::string bad_dim = bytes;
  bad_dim[16] = bad_dim[17] = bad_dim[18] = bad_dim[19] = 0;  // raw_audio_len
  CHECK(code_of(bad_dim) == DatasetFormatError::Code::dimension_mismatch);
}

TEST_CASE("spec validation rejects Nyquist violations") {
  DatasetSpec spec;
  CHECK_THROWS_AS(validate_spec(spec, 16), ConfigError);  // 16x top speed
  spec.num_classes = 32;  // > frame_dim
  CHECK_THROWS_AS(validate_spec(spec, 1), ConfigError);
}
