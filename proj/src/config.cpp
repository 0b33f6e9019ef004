#include "svaclr/config.hpp"

#include <fstream>
#include <limits>
#include <optional>
#include <set>

#include "svaclr/errors.hpp"

namespace svaclr {

using nlohmann::json;

namespace {

struct StrictSection {
  const json& j;
  std::string name;  // "" for top level
  std::set<std::string> known;

  StrictSection(const json& obj, std::string section)
      : j(obj), name(std::move(section)) {
    if (!j.is_object())
      throw ConfigError("config: section '" + label() + "' must be an object");
  }

  std::string label() const { return name.empty() ? "top level" : name; }

  template <class T>
  void opt(const char* key, T& out) {
    known.insert(key);
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    // negative or oversized numbers must not wrap into unsigned fields
    if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T> &&
                  !std::is_same_v<T, bool>) {
      if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError("config: key '" + key_path(key) +
                          "' must be a non-negative integer");
      if (v.is_number_integer() && v.get<std::int64_t>() < 0)
        throw ConfigError("config: key '" + key_path(key) +
                          "' must be a non-negative integer");
      const std::uint64_t u = v.get<std::uint64_t>();
      if (u > std::numeric_limits<T>::max())
        throw ConfigError("config: key '" + key_path(key) +
                          "' is out of range");
      out = static_cast<T>(u);
      return;
    }
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: key '" + key_path(key) + "' has wrong type");
    }
  }

  template <class T>
  void opt_optional(const char* key, std::optional<T>& out) {
    T v{};
    opt(key, v);
    if (j.contains(key)) out = v;
  }

  std::string str(const char* key, const std::string& fallback) {
    known.insert(key);
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string())
      throw ConfigError("config: key '" + key_path(key) + "' must be a string");
    return j.at(key).get<std::string>();
  }

  const json* section(const char* key) {
    known.insert(key);
    if (!j.contains(key)) return nullptr;
    return &j.at(key);
  }

  std::string key_path(const char* key) const {
    return name.empty() ? key : name + "." + key;
  }

  void finish() const {
    for (const auto& item : j.items())
      if (!known.contains(item.key()))
        throw ConfigError("config: unknown key '" + item.key() + "' in " +
                          label());
  }
};

Direction parse_direction(const std::string& s) {
  if (s == "audio_to_video") return Direction::audio_to_video;
  if (s == "video_to_audio") return Direction::video_to_audio;
  if (s == "both") return Direction::both;
  throw ConfigError("config: unknown direction '" + s +
                    "' (expected audio_to_video|video_to_audio|both)");
}

MappingKind parse_mapping(const std::string& s) {
  if (s == "identity") return MappingKind::identity;
  if (s == "linear") return MappingKind::linear;
  if (s == "nonlinear") return MappingKind::nonlinear;
  throw ConfigError("config: unknown mapping '" + s +
                    "' (expected identity|linear|nonlinear)");
}

}  // namespace

LossVariant parse_variant(const std::string& name) {
  if (name == "infonce_noaug") return LossVariant::infonce_noaug;
  if (name == "infonce_speed") return LossVariant::infonce_speed;
  if (name == "soft_infonce") return LossVariant::soft_infonce;
  throw ConfigError(
      "config: unknown variant '" + name +
      "' (expected infonce_noaug|infonce_speed|soft_infonce)");
}

RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  StrictSection top(j, "");
  top.opt("seed", cfg.seed);
  cfg.out_dir = top.str("out", cfg.out_dir);

  std::optional<std::uint32_t> audio_in_key, video_in_key;

  if (const json* s = top.section("dataset")) {
    StrictSection sec(*s, "dataset");
    sec.opt("num_classes", cfg.dataset.num_classes);
    sec.opt("clips_per_class_train", cfg.dataset.clips_per_class_train);
    sec.opt("clips_per_class_test", cfg.dataset.clips_per_class_test);
    sec.opt("raw_audio_len", cfg.dataset.raw_audio_len);
    sec.opt("sample_rate", cfg.dataset.sample_rate);
    sec.opt("raw_video_frames", cfg.dataset.raw_video_frames);
    sec.opt("frame_dim", cfg.dataset.frame_dim);
    sec.opt("base_freq", cfg.dataset.base_freq);
    sec.opt("freq_ratio", cfg.dataset.freq_ratio);
    sec.opt("noise_std", cfg.dataset.noise_std);
    sec.finish();
  }

  if (const json* s = top.section("augment")) {
    StrictSection sec(*s, "augment");
    sec.opt("max_speed", cfg.augment.max_speed);
    sec.opt("audio_window", cfg.augment.audio_window);
    sec.opt("video_window", cfg.augment.video_window);
    sec.opt("keep_original", cfg.augment.keep_original);
    sec.finish();
  }

  if (const json* s = top.section("model")) {
    StrictSection sec(*s, "model");
    sec.opt_optional("audio_in", audio_in_key);
    sec.opt_optional("video_in", video_in_key);
    sec.opt("encoder_hidden", cfg.model.encoder_hidden);
    sec.opt("repr_dim", cfg.model.repr_dim);
    sec.opt("proj_hidden", cfg.model.proj_hidden);
    sec.opt("proj_dim", cfg.model.proj_dim);
    sec.opt("init_scale", cfg.model.init_scale);
    sec.finish();
  }

  if (const json* s = top.section("loss")) {
    StrictSection sec(*s, "loss");
    sec.opt("eta", cfg.loss.eta);
    cfg.loss.direction =
        parse_direction(sec.str("direction", direction_name(cfg.loss.direction)));
    cfg.loss.mapping =
        parse_mapping(sec.str("mapping", mapping_name(cfg.loss.mapping)));
    sec.opt("detach_affinity", cfg.loss.detach_affinity);
    sec.opt("include_same_clip_other_view_as_negative",
            cfg.loss.include_same_clip_other_view_as_negative);
    sec.finish();
  }

  if (const json* s = top.section("train")) {
    StrictSection sec(*s, "train");
    sec.opt("epochs", cfg.train.epochs);
    sec.opt("batch_size", cfg.train.batch_size);
    sec.opt("peak_lr", cfg.train.peak_lr);
    sec.opt("warmup_epochs", cfg.train.warmup_epochs);
    sec.opt("final_lr_ratio", cfg.train.final_lr_ratio);
    sec.opt("momentum", cfg.train.momentum);
    cfg.train.variant =
        parse_variant(sec.str("variant", variant_name(cfg.train.variant)));
    sec.opt("checkpoint_every", cfg.train.checkpoint_every);
    sec.finish();
  }

  top.finish();

  // Input dims are derived from the featurizer and window geometry; explicit
  // values must agree.
  const std::uint32_t derived_video_in =
      cfg.augment.video_window * cfg.dataset.frame_dim;
  if (audio_in_key && *audio_in_key != kAudioFeatureDim)
    throw ConfigError("config: model.audio_in must be " +
                      std::to_string(kAudioFeatureDim) +
                      " (the audio feature dimension)");
  if (video_in_key && *video_in_key != derived_video_in)
    throw ConfigError("config: model.video_in must equal video_window * "
                      "frame_dim = " +
                      std::to_string(derived_video_in));

  finalize_run_config(cfg);
  return cfg;
}

void finalize_run_config(RunConfig& cfg) {
  cfg.model.audio_in = kAudioFeatureDim;
  cfg.model.video_in = cfg.augment.video_window * cfg.dataset.frame_dim;
  cfg.dataset.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  cfg.train.augment = cfg.augment;
  cfg.train.loss = cfg.loss;
  cfg.train.model = cfg.model;

  validate_spec(cfg.dataset, cfg.augment.max_speed);
  if (cfg.augment.max_speed < 1)
    throw ConfigError("config: augment.max_speed must be >= 1");
  if (cfg.augment.audio_window < 2 * kAudioFeatureDim)
    throw ConfigError("config: augment.audio_window must be >= " +
                      std::to_string(2 * kAudioFeatureDim) +
                      " to cover the feature bins");
  if (cfg.augment.video_window < 1)
    throw ConfigError("config: augment.video_window must be >= 1");
  const SpeedFactor top_speed{cfg.augment.max_speed};
  if (valid_offset_count(cfg.dataset.raw_audio_len, top_speed,
                         cfg.augment.audio_window) == 0)
    throw ConfigError(
        "config: raw_audio_len too short for audio_window at max_speed");
  if (valid_offset_count(cfg.dataset.raw_video_frames, top_speed,
                         cfg.augment.video_window) == 0)
    throw ConfigError(
        "config: raw_video_frames too short for video_window at max_speed");
  if (!(cfg.loss.eta > 0.0)) throw ConfigError("config: loss.eta must be > 0");
  if (cfg.train.batch_size < 2)
    throw ConfigError("config: train.batch_size must be >= 2");
  if (cfg.train.warmup_epochs >= cfg.train.epochs)
    throw ConfigError("config: train.warmup_epochs must be < train.epochs");
  if (!(cfg.train.peak_lr > 0.0))
    throw ConfigError("config: train.peak_lr must be > 0");
  if (!(cfg.train.final_lr_ratio > 0.0) || cfg.train.final_lr_ratio > 1.0)
    throw ConfigError("config: train.final_lr_ratio must be in (0, 1]");
  if (cfg.train.momentum < 0.0 || cfg.train.momentum >= 1.0)
    throw ConfigError("config: train.momentum must be in [0, 1)");
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json run_config_to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out_dir;
  j["dataset"] = {
      {"num_classes", cfg.dataset.num_classes},
      {"clips_per_class_train", cfg.dataset.clips_per_class_train},
      {"clips_per_class_test", cfg.dataset.clips_per_class_test},
      {"raw_audio_len", cfg.dataset.raw_audio_len},
      {"sample_rate", cfg.dataset.sample_rate},
      {"raw_video_frames", cfg.dataset.raw_video_frames},
      {"frame_dim", cfg.dataset.frame_dim},
      {"base_freq", cfg.dataset.base_freq},
      {"freq_ratio", cfg.dataset.freq_ratio},
      {"noise_std", cfg.dataset.noise_std},
  };
  j["augment"] = {
      {"max_speed", cfg.augment.max_speed},
      {"audio_window", cfg.augment.audio_window},
      {"video_window", cfg.augment.video_window},
      {"keep_original", cfg.augment.keep_original},
  };
  j["model"] = {
      {"audio_in", cfg.model.audio_in},
      {"video_in", cfg.model.video_in},
      {"encoder_hidden", cfg.model.encoder_hidden},
      {"repr_dim", cfg.model.repr_dim},
      {"proj_hidden", cfg.model.proj_hidden},
      {"proj_dim", cfg.model.proj_dim},
      {"init_scale", cfg.model.init_scale},
  };
  j["loss"] = {
      {"eta", cfg.loss.eta},
      {"direction", direction_name(cfg.loss.direction)},
      {"mapping", mapping_name(cfg.loss.mapping)},
      {"detach_affinity", cfg.loss.detach_affinity},
      {"include_same_clip_other_view_as_negative",
       cfg.loss.include_same_clip_other_view_as_negative},
  };
  j["train"] = {
      {"epochs", cfg.train.epochs},
      {"batch_size", cfg.train.batch_size},
      {"peak_lr", cfg.train.peak_lr},
      {"warmup_epochs", cfg.train.warmup_epochs},
      {"final_lr_ratio", cfg.train.final_lr_ratio},
      {"momentum", cfg.train.momentum},
      {"variant", variant_name(cfg.train.variant)},
      {"checkpoint_every", cfg.train.checkpoint_every},
  };
  return j;
}

void save_resolved_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("config: cannot write " + path);
  out << run_config_to_json(cfg).dump(2) << '\n';
  if (!out) throw IoError("config: stream failure on " + path);
}

}  // namespace svaclr
