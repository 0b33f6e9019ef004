#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "svaclr/augment.hpp"
#include "svaclr/rng.hpp"

namespace svaclr {

// Synthetic paired corpus: audio class c is a sine at f0 * g^c, video class c
// is a static orthonormal pattern. With g = sqrt(2), speeding audio by 2^k
// lands exactly on the fundamental of class c + 2k, so speed changes the
// apparent audio class while video class identity is untouched.
struct DatasetSpec {
  std::uint32_t num_classes = 8;
  std::uint32_t clips_per_class_train = 64;
  std::uint32_t clips_per_class_test = 16;
  std::uint32_t raw_audio_len = 4096;
  std::uint32_t sample_rate = 2048;
  std::uint32_t raw_video_frames = 48;
  std::uint32_t frame_dim = 16;
  double base_freq = 16.0;
  double freq_ratio = 1.4142135623730951;  // sqrt(2)
  double noise_std = 0.05;
  std::uint64_t seed = 0;
};

enum class Split : std::uint32_t { train = 0, test = 1 };

const char* split_name(Split s);

struct Clip {
  std::uint32_t label = 0;
  Waveform audio;
  FrameSeq video;
};

struct Dataset {
  DatasetSpec spec;
  Split split = Split::train;
  std::vector<Clip> clips;
};

// Rejects specs that break Nyquist safety at max speed or the pattern
// orthogonalization (num_classes <= frame_dim).
void validate_spec(const DatasetSpec& spec, std::uint32_t max_speed);

// One orthonormal pattern per class, drawn once from the dataset seed and
// shared by both splits.
std::vector<std::vector<double>> class_patterns(const DatasetSpec& spec);

Clip synth_clip(std::uint32_t cls, Rng& rng, const DatasetSpec& spec,
                const std::vector<std::vector<double>>& patterns);

// The class whose speed-1 audio matches class `cls` played at speed `s`, if
// any: s = freq_ratio^k shifts by k classes (2*log2(s) for the default
// ratio). Off-ladder speeds and out-of-range shifts return nullopt.
std::optional<std::uint32_t> alias_class(std::uint32_t cls, SpeedFactor s,
                                         const DatasetSpec& spec);

// Pure function of (spec, split); clip i has label i % num_classes and its
// own rng stream, so parallel generation equals sequential generation.
Dataset generate_dataset(const DatasetSpec& spec, Split split);

// On-disk format (little-endian): magic "SVAC", version u32 = 1, then u32
// {num_clips, num_classes, raw_audio_len, raw_video_frames, frame_dim,
// sample_rate}, then per clip: label u32, audio as f32, video as f32.
// Values are promoted to f64 on load.
void write_dataset(const Dataset& ds, const std::string& path);
void write_dataset(const Dataset& ds, std::ostream& out);
Dataset read_dataset(const std::string& path);
Dataset read_dataset(std::istream& in, const std::string& origin);

}  // namespace svaclr
