#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bu/audio_features.hpp"
#include "bu/eval.hpp"
#include "bu/nn.hpp"
#include "bu/objectives.hpp"
#include "bu/optim.hpp"
#include "bu/synth.hpp"

namespace bu {

enum class ExperimentKind { verify, audio };

/// Annulus experiment. Unset band width / clip default to 2D (D = 2).
struct VerifySettings {
  std::size_t samples = 10000;
  std::size_t batch_normal = 500;
  std::size_t batch_anomaly = 500;
  std::size_t updates = 5000;
  double step_size = 1e-3;
  std::optional<double> band_width;
  std::optional<double> clip;
  double weight_floor = 1e-6;
  bool normalize_batch = false;
  std::size_t grid_resolution = 201;
};

/// Named audio autoencoder: fcn40-small, fcn40-large, fcn64-small, fcn64-large.
struct AudioArchitecture {
  std::string name = "fcn40-small";
  std::size_t mel_bands = 40;
  std::size_t context = 5;
  std::size_t hidden_layers = 2;
  std::size_t hidden_units = 128;
  std::size_t latent_dim = 40;
};

AudioArchitecture audio_architecture(const std::string& name);

/// Audio experiment. Unset band width defaults to 1/(2D), unset clip to 2M.
struct AudioSettings {
  std::filesystem::path manifest;
  AudioArchitecture architecture;
  FeatureConfig features;  // mel_bands and context are taken from the architecture
  std::size_t epochs = 200;
  std::size_t batches_per_epoch = 500;
  std::size_t files_per_batch = 10;
  WarmThenLinear schedule{};
  AnrRange train_anr{-30.0, 10.0};
  std::vector<double> test_anrs{-10.0, -15.0, -20.0};
  std::optional<double> band_width;
  std::optional<double> clip;
  double weight_floor = 1e-6;
  bool normalize_batch = true;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::verify;
  ObjectiveKind objective = ObjectiveKind::bu;
  std::uint64_t seed = 1;
  /// Initialization seed; derived from `seed` when unset, so objectives sharing a seed share
  /// their initial parameters.
  std::optional<std::uint64_t> init_seed;
  std::filesystem::path output_dir = "runs/out";
  AmsGradConfig optimizer;
  VerifySettings verify;
  AudioSettings audio;
};

void validate(const ExperimentConfig& cfg);

/// JSON (comments allowed). Relative manifest paths resolve against the config file's directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Objective configuration the run will use, with experiment defaults resolved.
ObjectiveConfig resolved_objective(const ExperimentConfig& cfg);

/// Independent sub-stream seeds from one run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct LossPoint {
  std::size_t update = 0;
  double total = 0.0;
  double normal_term = 0.0;
  double anomaly_term = 0.0;
};

struct VerifyOutcome {
  double kld_p = 0.0;  // D(p || q)
  double kld_u = 0.0;  // D(U || q)
  GridPdf pdf;
};

struct AnrAuc {
  double anr_db = 0.0;
  double frame_auc = 0.0;
  double clip_auc = 0.0;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<LossPoint> loss_curve;
  std::optional<AeModel> model;
  std::optional<VerifyOutcome> verify;
  std::vector<AnrAuc> audio;
  std::size_t input_dim = 0;
  double wall_seconds = 0.0;
};

RunReport run_verify(const ExperimentConfig& cfg);
RunReport run_audio(const ExperimentConfig& cfg);

/// Per-frame anomaly scores of a waveform.
std::vector<double> score_waveform(const AeModel& model, std::span<const double> wave, const FeatureConfig& features);

/// Frame-wise and max-over-clip AUC at each ANR. Each test anomaly sound is
/// mixed into a test-normal clip (cycled) at a random offset.
std::vector<AnrAuc> evaluate_audio(const AeModel& model, const AudioCorpus& corpus, const FeatureConfig& features,
                                   std::span<const double> anrs, std::uint64_t seed);

/// Writes the run's artifacts into `dir` via a staging directory, so a failed
/// export leaves nothing but the staging directory behind.
/// verify: loss.csv kld.csv pdf.pgm score.pgm pdf.csv model.bin config.echo
/// audio:  loss.csv auc.csv model.bin config.echo
std::vector<std::filesystem::path> export_artifacts(const RunReport& report, const std::filesystem::path& dir);

}  // namespace bu
