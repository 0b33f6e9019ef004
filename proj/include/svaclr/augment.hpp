#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "svaclr/rng.hpp"
#include "svaclr/tensor.hpp"

namespace svaclr {

struct Waveform {
  std::vector<double> samples;
  std::uint32_t sample_rate = 0;
};

// Sequence of fixed-dimension frame feature vectors, row-major.
struct FrameSeq {
  std::vector<double> values;
  std::size_t frame_dim = 0;

  std::size_t frame_count() const {
    return frame_dim == 0 ? 0 : values.size() / frame_dim;
  }
  const double* frame(std::size_t t) const {
    return values.data() + t * frame_dim;
  }
};

// Integer playback-speed multiplier from the speed library {1..max_speed}.
struct SpeedFactor {
  std::uint32_t value = 1;
};

struct AugmentConfig {
  std::uint32_t max_speed = 4;
  std::uint32_t audio_window = 512;
  std::uint32_t video_window = 8;
  bool keep_original = true;
};

struct Clip;  // datagen.hpp

// The four co-augmented views of one clip: {original, sped} per modality.
struct ViewSet {
  std::array<Waveform, 2> audio_views;  // [original, sped by tau1]
  std::array<FrameSeq, 2> video_views;  // [original, sped by tau2]
  SpeedFactor tau1;
  SpeedFactor tau2;
  std::size_t clip_index = 0;
  std::uint32_t label = 0;  // carried for evaluation only
};

// tau1 and tau2 drawn independently and uniformly from {1..max_speed}.
std::pair<SpeedFactor, SpeedFactor> sample_speed_pair(
    Rng& rng, const AugmentConfig& config);

// Stride decimation: out[k] = w[offset + k*s]. The sample_rate field is left
// unchanged -- the content is sped, not the clock.
Waveform resample_audio(const Waveform& w, SpeedFactor s, std::size_t window,
                        std::size_t offset);
FrameSeq subsample_video(const FrameSeq& f, SpeedFactor s, std::size_t window,
                         std::size_t offset);

inline constexpr std::size_t kAudioFeatureDim = 128;

// log(1 + |DFT|) at bins 1..128 of the window. Uses the radix-2 FFT for
// power-of-two windows and the naive transform otherwise.
Tensor audio_features(const Waveform& w);

// Bin number (argmax index + 1) of the strongest feature; the dominant DFT
// bin of the window.
std::size_t dominant_bin(const Tensor& features);

// Number of valid window offsets for (length, speed, window).
std::size_t valid_offset_count(std::size_t length, SpeedFactor s,
                               std::size_t window);

// Views with independently drawn offsets. Draw order: audio original, audio
// sped, video original, video sped.
ViewSet make_views(const Clip& clip, std::size_t clip_index, SpeedFactor tau1,
                   SpeedFactor tau2, Rng& rng, const AugmentConfig& config);

}  // namespace svaclr
