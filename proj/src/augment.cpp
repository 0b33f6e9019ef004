#include "svaclr/augment.hpp"

#include <algorithm>
#include <cmath>

#include "svaclr/datagen.hpp"
#include "svaclr/dft.hpp"
#include "svaclr/errors.hpp"

namespace svaclr {

std::pair<SpeedFactor, SpeedFactor> sample_speed_pair(
    Rng& rng, const AugmentConfig& config) {
  if (config.max_speed < 1)
    throw DomainError("sample_speed_pair: max_speed must be >= 1");
  const auto draw = [&] {
    return SpeedFactor{
        static_cast<std::uint32_t>(rng.uniform_int(config.max_speed)) + 1};
  };
  const SpeedFactor tau1 = draw();
  const SpeedFactor tau2 = draw();
  return {tau1, tau2};
}

std::size_t valid_offset_count(std::size_t length, SpeedFactor s,
                               std::size_t window) {
  if (window < 1 || s.value < 1) return 0;
  const std::size_t span = (window - 1) * s.value;
  return span < length ? length - span : 0;
}

namespace {
void check_range(const char* what, std::size_t length, SpeedFactor s,
                 std::size_t window, std::size_t offset) {
  if (window < 1) throw DomainError(std::string(what) + ": window must be >= 1");
  if (s.value < 1) throw DomainError(std::string(what) + ": speed must be >= 1");
  const std::size_t required = offset + (window - 1) * s.value + 1;
  if (required > length)
    throw DomainError(std::string(what) + ": window " + std::to_string(window) +
                      " at speed " + std::to_string(s.value) + " and offset " +
                      std::to_string(offset) + " needs raw length >= " +
                      std::to_string(required) + ", have " +
                      std::to_string(length));
}
}  // namespace

Waveform resample_audio(const Waveform& w, SpeedFactor s, std::size_t window,
                        std::size_t offset) {
  check_range("resample_audio", w.samples.size(), s, window, offset);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(window);
  for (std::size_t k = 0; k < window; ++k)
    out.samples[k] = w.samples[offset + k * s.value];
  return out;
}

FrameSeq subsample_video(const FrameSeq& f, SpeedFactor s, std::size_t window,
                         std::size_t offset) {
  check_range("subsample_video", f.frame_count(), s, window, offset);
  FrameSeq out;
  out.frame_dim = f.frame_dim;
  out.values.resize(window * f.frame_dim);
  for (std::size_t k = 0; k < window; ++k)
    std::copy_n(f.frame(offset + k * s.value), f.frame_dim,
                out.values.data() + k * f.frame_dim);
  return out;
}

Tensor audio_features(const Waveform& w) {
  const std::size_t n = w.samples.size();
  if (n < 2 * kAudioFeatureDim)
    throw DomainError("audio_features: window length " + std::to_string(n) +
                      " too short for " + std::to_string(kAudioFeatureDim) +
                      " bins");
  const auto mags = dft::is_power_of_two(n)
                        ? dft::magnitude_fft(w.samples, 1, kAudioFeatureDim)
                        : dft::magnitude_naive(w.samples, 1, kAudioFeatureDim);
  Tensor out = Tensor::zeros({kAudioFeatureDim});
  for (std::size_t i = 0; i < kAudioFeatureDim; ++i)
    out.data[i] = std::log1p(mags[i]);
  return out;
}

std::size_t dominant_bin(const Tensor& features) {
  const auto it = std::max_element(features.data.begin(), features.data.end());
  return static_cast<std::size_t>(it - features.data.begin()) + 1;
}

ViewSet make_views(const Clip& clip, std::size_t clip_index, SpeedFactor tau1,
                   SpeedFactor tau2, Rng& rng, const AugmentConfig& config) {
  ViewSet vs;
  vs.tau1 = tau1;
  vs.tau2 = tau2;
  vs.clip_index = clip_index;
  vs.label = clip.label;

  const SpeedFactor one{1};
  const SpeedFactor audio_first = config.keep_original ? one : tau1;
  const SpeedFactor video_first = config.keep_original ? one : tau2;

  const auto draw_offset = [&](std::size_t length, SpeedFactor s,
                               std::size_t window) {
    const std::size_t count = valid_offset_count(length, s, window);
    if (count == 0)
      throw DomainError("make_views: clip too short for window at speed " +
                        std::to_string(s.value));
    return static_cast<std::size_t>(rng.uniform_int(count));
  };

  const std::size_t audio_len = clip.audio.samples.size();
  const std::size_t frames = clip.video.frame_count();

  vs.audio_views[0] = resample_audio(
      clip.audio, audio_first, config.audio_window,
      draw_offset(audio_len, audio_first, config.audio_window));
  vs.audio_views[1] =
      resample_audio(clip.audio, tau1, config.audio_window,
                     draw_offset(audio_len, tau1, config.audio_window));
  vs.video_views[0] = subsample_video(
      clip.video, video_first, config.video_window,
      draw_offset(frames, video_first, config.video_window));
  vs.video_views[1] =
      subsample_video(clip.video, tau2, config.video_window,
                      draw_offset(frames, tau2, config.video_window));
  return vs;
}

}  // namespace svaclr
