#include <fstream>
#include <set>
#include <stdexcept>

#include "bu/experiment.hpp"

namespace bu {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

AudioArchitecture audio_architecture(const std::string& name) {
  AudioArchitecture a;
  a.name = name;
  if (name == "fcn40-small" || name == "fcn40-large") {
    a.mel_bands = 40;
    a.context = 5;
  } else if (name == "fcn64-small" || name == "fcn64-large") {
    a.mel_bands = 64;
    a.context = 10;
  } else {
    throw std::invalid_argument("unknown audio architecture '" + name + "'");
  }
  if (name.ends_with("large")) {
    a.hidden_layers = 4;
    a.hidden_units = 512;
    a.latent_dim = 128;
  } else {
    a.hidden_layers = 2;
    a.hidden_units = 128;
    a.latent_dim = 40;
  }
  return a;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over a mix of both inputs.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.kind == ExperimentKind::verify) {
    const auto& v = cfg.verify;
    if (v.samples == 0 || v.batch_normal == 0 || v.batch_anomaly == 0) {
      throw std::invalid_argument("verify: sample and batch counts must be positive");
    }
    if (v.batch_normal > v.samples || v.batch_anomaly > v.samples) {
      throw std::invalid_argument("verify: batch size exceeds the sample count");
    }
    if (!(v.step_size > 0.0)) throw std::invalid_argument("verify: step size must be positive");
    if (v.grid_resolution < 2) throw std::invalid_argument("verify: grid resolution must be at least 2");
  } else {
    const auto& a = cfg.audio;
    if (a.epochs == 0 || a.batches_per_epoch == 0 || a.files_per_batch == 0) {
      throw std::invalid_argument("audio: epoch, batch and file counts must be positive");
    }
    if (a.manifest.empty()) throw std::invalid_argument("audio: manifest path is required");
    if (!std::filesystem::exists(a.manifest)) {
      throw std::invalid_argument("audio: manifest " + a.manifest.string() + " does not exist");
    }
    if (a.features.mel_bands != a.architecture.mel_bands || a.features.context != a.architecture.context) {
      throw std::invalid_argument("audio: feature config does not match the architecture's input");
    }
    validate(a.features);
    validate(LrSchedule{a.schedule});
    if (a.test_anrs.empty()) throw std::invalid_argument("audio: at least one test ANR is required");
  }
  validate(resolved_objective(cfg));
}

ObjectiveConfig resolved_objective(const ExperimentConfig& cfg) {
  ObjectiveConfig o;
  o.kind = cfg.objective;
  if (cfg.kind == ExperimentKind::verify) {
    const double d = 2.0;
    o.clip = cfg.verify.clip.value_or(2.0 * d);
    o.kde.band_width = cfg.verify.band_width.value_or(2.0 * d);
    o.kde.weight_floor = cfg.verify.weight_floor;
    o.kde.normalize_batch = cfg.verify.normalize_batch;
  } else {
    const auto d = static_cast<double>(cfg.audio.features.dim());
    o.clip = cfg.audio.clip.value_or(2.0 * static_cast<double>(cfg.audio.features.mel_bands));
    o.kde.band_width = cfg.audio.band_width.value_or(1.0 / (2.0 * d));
    o.kde.weight_floor = cfg.audio.weight_floor;
    o.kde.normalize_batch = cfg.audio.normalize_batch;
  }
  return o;
}

ExperimentConfig experiment_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  reject_unknown_keys(j, {"experiment", "objective", "seed", "init_seed", "output_dir", "optimizer", "verify", "audio"},
                      "config");
  ExperimentConfig cfg;
  const auto kind = j.at("experiment").get<std::string>();
  if (kind == "verify") {
    cfg.kind = ExperimentKind::verify;
  } else if (kind == "audio") {
    cfg.kind = ExperimentKind::audio;
  } else {
    throw std::invalid_argument("experiment must be 'verify' or 'audio', got '" + kind + "'");
  }
  if (j.contains("objective")) cfg.objective = objective_from_string(j.at("objective").get<std::string>());
  read_if(j, "seed", cfg.seed);
  read_optional(j, "init_seed", cfg.init_seed);
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    reject_unknown_keys(o, {"beta1", "beta2", "delta"}, "optimizer");
    read_if(o, "beta1", cfg.optimizer.beta1);
    read_if(o, "beta2", cfg.optimizer.beta2);
    read_if(o, "delta", cfg.optimizer.delta);
  }

  if (j.contains("verify")) {
    const auto& v = j.at("verify");
    reject_unknown_keys(v,
                        {"samples", "batch_normal", "batch_anomaly", "updates", "step_size", "band_width", "clip",
                         "weight_floor", "normalize_batch", "grid_resolution"},
                        "verify");
    auto& s = cfg.verify;
    read_if(v, "samples", s.samples);
    read_if(v, "batch_normal", s.batch_normal);
    read_if(v, "batch_anomaly", s.batch_anomaly);
    read_if(v, "updates", s.updates);
    read_if(v, "step_size", s.step_size);
    read_optional(v, "band_width", s.band_width);
    read_optional(v, "clip", s.clip);
    read_if(v, "weight_floor", s.weight_floor);
    read_if(v, "normalize_batch", s.normalize_batch);
    read_if(v, "grid_resolution", s.grid_resolution);
  }

  if (j.contains("audio")) {
    const auto& a = j.at("audio");
    reject_unknown_keys(a,
                        {"manifest", "architecture", "epochs", "batches_per_epoch", "files_per_batch",
                         "learning_rate", "hold_epochs", "end_epoch", "final_divisor", "train_anr", "test_anrs",
                         "band_width", "clip", "weight_floor", "normalize_batch", "window", "input_dim"},
                        "audio");
    auto& s = cfg.audio;
    if (a.contains("manifest")) {
      std::filesystem::path p = a.at("manifest").get<std::string>();
      s.manifest = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    }
    if (a.contains("architecture")) s.architecture = audio_architecture(a.at("architecture").get<std::string>());
    read_if(a, "epochs", s.epochs);
    read_if(a, "batches_per_epoch", s.batches_per_epoch);
    read_if(a, "files_per_batch", s.files_per_batch);
    read_if(a, "learning_rate", s.schedule.base_rate);
    read_if(a, "hold_epochs", s.schedule.hold_epochs);
    read_if(a, "end_epoch", s.schedule.end_epoch);
    read_if(a, "final_divisor", s.schedule.final_divisor);
    if (a.contains("train_anr")) s.train_anr = parse_anr_range(a.at("train_anr").get<std::string>());
    read_if(a, "test_anrs", s.test_anrs);
    read_optional(a, "band_width", s.band_width);
    read_optional(a, "clip", s.clip);
    read_if(a, "weight_floor", s.weight_floor);
    read_if(a, "normalize_batch", s.normalize_batch);
    if (a.contains("window")) s.features.window = window_from_string(a.at("window").get<std::string>());
  }
  cfg.audio.features.mel_bands = cfg.audio.architecture.mel_bands;
  cfg.audio.features.context = cfg.audio.architecture.context;
  if (j.contains("audio") && j.at("audio").contains("input_dim") &&
      j.at("audio").at("input_dim").get<std::size_t>() != cfg.audio.features.dim()) {
    throw std::invalid_argument("audio: input_dim disagrees with the architecture's M * (2C + 1) = " +
                                std::to_string(cfg.audio.features.dim()));
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j, path.parent_path());
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = cfg.kind == ExperimentKind::verify ? "verify" : "audio";
  j["objective"] = std::string(to_string(cfg.objective));
  j["seed"] = cfg.seed;
  j["init_seed"] = optional_json(cfg.init_seed);
  j["output_dir"] = cfg.output_dir.generic_string();
  j["optimizer"] = {{"beta1", cfg.optimizer.beta1}, {"beta2", cfg.optimizer.beta2}, {"delta", cfg.optimizer.delta}};
  const auto obj = resolved_objective(cfg);
  if (cfg.kind == ExperimentKind::verify) {
    const auto& v = cfg.verify;
    j["verify"] = {{"samples", v.samples},
                   {"batch_normal", v.batch_normal},
                   {"batch_anomaly", v.batch_anomaly},
                   {"updates", v.updates},
                   {"step_size", v.step_size},
                   {"band_width", obj.kde.band_width},
                   {"clip", obj.clip},
                   {"weight_floor", v.weight_floor},
                   {"normalize_batch", v.normalize_batch},
                   {"grid_resolution", v.grid_resolution}};
  } else {
    const auto& a = cfg.audio;
    j["audio"] = {{"manifest", a.manifest.generic_string()},
                  {"architecture", a.architecture.name},
                  {"input_dim", a.features.dim()},
                  {"epochs", a.epochs},
                  {"batches_per_epoch", a.batches_per_epoch},
                  {"files_per_batch", a.files_per_batch},
                  {"learning_rate", a.schedule.base_rate},
                  {"hold_epochs", a.schedule.hold_epochs},
                  {"end_epoch", a.schedule.end_epoch},
                  {"final_divisor", a.schedule.final_divisor},
                  {"train_anr", std::to_string(a.train_anr.lo_db) + ":" + std::to_string(a.train_anr.hi_db)},
                  {"test_anrs", a.test_anrs},
                  {"band_width", obj.kde.band_width},
                  {"clip", obj.clip},
                  {"weight_floor", a.weight_floor},
                  {"normalize_batch", a.normalize_batch},
                  {"window", std::string(to_string(a.features.window))}};
  }
  return j;
}

}  // namespace bu
