// batchuni: experiment driver for batch-uniformization autoencoder training.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bu/eval.hpp"
#include "bu/experiment.hpp"
#include "bu/model_io.hpp"
#include "bu/synth.hpp"
#include "bu/wav.hpp"

namespace fs = std::filesystem;

namespace {

struct RunOverrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> objective;
  std::optional<std::string> out;
};

void add_run_options(CLI::App* cmd, RunOverrides& o) {
  cmd->add_option("-c,--config", o.config, "Experiment config (JSON, comments allowed)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Run seed; controls all randomness");
  cmd->add_option("--objective", o.objective, "RE, SNP or BU");
  cmd->add_option("-o,--out", o.out, "Output directory");
}

bu::ExperimentConfig load_with_overrides(const RunOverrides& o) {
  auto cfg = bu::load_experiment_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.objective) cfg.objective = bu::objective_from_string(*o.objective);
  if (o.out) cfg.output_dir = *o.out;
  return cfg;
}

void print_written(const std::vector<fs::path>& files) {
  for (const auto& f : files) std::cout << "  wrote " << f.string() << '\n';
}

int cmd_verify(const RunOverrides& o, std::optional<std::size_t> updates) {
  auto cfg = load_with_overrides(o);
  if (cfg.kind != bu::ExperimentKind::verify) throw std::invalid_argument("config is not a verify experiment");
  if (updates) cfg.verify.updates = *updates;
  const auto report = bu::run_verify(cfg);
  std::printf("%s  D(p||q) = %.4f  D(U||q) = %.4f  (%zu updates, %.1f s)\n",
              std::string(bu::to_string(cfg.objective)).c_str(), report.verify->kld_p, report.verify->kld_u,
              cfg.verify.updates, report.wall_seconds);
  print_written(bu::export_artifacts(report, cfg.output_dir));
  return 0;
}

struct AudioOverrides {
  std::optional<std::string> manifest;
  std::optional<std::string> anr_range;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batches;
};

int cmd_train_audio(const RunOverrides& o, const AudioOverrides& a) {
  auto cfg = load_with_overrides(o);
  if (cfg.kind != bu::ExperimentKind::audio) throw std::invalid_argument("config is not an audio experiment");
  if (a.manifest) cfg.audio.manifest = *a.manifest;
  if (a.anr_range) cfg.audio.train_anr = bu::parse_anr_range(*a.anr_range);
  if (a.epochs) cfg.audio.epochs = *a.epochs;
  if (a.batches) cfg.audio.batches_per_epoch = *a.batches;
  const auto report = bu::run_audio(cfg);
  std::printf("%s  D = %zu  (%zu updates, %.1f s)\n", std::string(bu::to_string(cfg.objective)).c_str(),
              report.input_dim, report.loss_curve.size(), report.wall_seconds);
  for (const auto& r : report.audio) {
    std::printf("  ANR %6.1f dB  frame AUC %.4f  clip AUC %.4f\n", r.anr_db, r.frame_auc, r.clip_auc);
  }
  print_written(bu::export_artifacts(report, cfg.output_dir));
  return 0;
}

struct ScoreOptions {
  std::string model;
  std::string manifest;
  std::string out;
  std::size_t mel_bands = 40;
  std::size_t context = 5;
  std::string window = "hann";
};

int cmd_score(const ScoreOptions& s) {
  const auto model = bu::load_model(s.model);
  bu::FeatureConfig features;
  features.mel_bands = s.mel_bands;
  features.context = s.context;
  features.window = bu::window_from_string(s.window);
  if (features.dim() != model.input_dim()) {
    throw std::invalid_argument("model expects D = " + std::to_string(model.input_dim()) + " but M=" +
                                std::to_string(s.mel_bands) + ", C=" + std::to_string(s.context) + " gives D = " +
                                std::to_string(features.dim()));
  }
  std::ofstream out(s.out, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + s.out);
  out << "path,tag,label,max_score,mean_score,frames\n";
  for (const auto& e : bu::read_manifest(s.manifest)) {
    const auto wav = bu::read_wav(e.path, features.sample_rate);
    const auto scores = bu::score_waveform(model, wav.samples, features);
    double mean = 0.0;
    for (double v : scores) mean += v;
    mean /= static_cast<double>(scores.size());
    const int label = e.tag.find("anomaly") != std::string::npos ? 1 : 0;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu", bu::sequence_score(scores), mean, scores.size());
    out << e.path.generic_string() << ',' << e.tag << ',' << label << ',' << buf << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + s.out);
  std::cout << "wrote " << s.out << '\n';
  return 0;
}

int cmd_eval_auc(const std::string& scores_path, const std::optional<std::string>& roc_path) {
  std::ifstream in(scores_path);
  if (!in) throw std::runtime_error("cannot open " + scores_path);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.push_back(field);
  }
  const auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw std::invalid_argument(scores_path + " has no '" + name + "' column");
  };
  const auto label_col = col("label");
  const auto score_col = col("max_score");
  std::vector<double> normal;
  std::vector<double> anomaly;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != header.size()) throw std::invalid_argument("malformed line in " + scores_path + ": " + line);
    (std::stoi(fields[label_col]) != 0 ? anomaly : normal).push_back(std::stod(fields[score_col]));
  }
  std::printf("AUC %.6f  (%zu normal, %zu anomalous)\n", bu::auc(normal, anomaly), normal.size(), anomaly.size());
  if (roc_path) {
    bu::write_roc_csv(*roc_path, bu::roc_curve(normal, anomaly));
    std::cout << "wrote " << *roc_path << '\n';
  }
  return 0;
}

int cmd_export_grid(const std::string& model_path, const std::string& dir, std::size_t resolution) {
  const auto model = bu::load_model(model_path);
  bu::EvalGrid grid;
  grid.resolution = resolution;
  const auto pdf = bu::grid_pdf(model, grid);
  fs::create_directories(dir);
  bu::write_pgm(fs::path(dir) / "pdf.pgm", grid, pdf.density.values);
  bu::write_pgm(fs::path(dir) / "score.pgm", grid, pdf.scores);
  bu::write_grid_csv(fs::path(dir) / "pdf.csv", pdf);
  std::printf("ln Z = %.6f\n", pdf.log_normalizer);
  print_written({fs::path(dir) / "pdf.pgm", fs::path(dir) / "score.pgm", fs::path(dir) / "pdf.csv"});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch-uniformization autoencoder training for unsupervised anomaly detection"};
  app.require_subcommand(1);

  RunOverrides verify_opts;
  std::optional<std::size_t> verify_updates;
  auto* verify = app.add_subcommand("verify", "Annulus verification experiment (KLD to oracle densities)");
  add_run_options(verify, verify_opts);
  verify->add_option("--updates", verify_updates, "Number of AMSGrad updates");

  RunOverrides audio_opts;
  AudioOverrides audio_extra;
  auto* train = app.add_subcommand("train-audio", "Train on a WAV corpus and report per-ANR AUC");
  add_run_options(train, audio_opts);
  train->add_option("--manifest", audio_extra.manifest, "Corpus manifest");
  train->add_option("--anr-range", audio_extra.anr_range, "Training ANR range lo:hi in dB");
  train->add_option("--epochs", audio_extra.epochs, "Epoch count");
  train->add_option("--batches", audio_extra.batches, "Mini-batches per epoch");

  ScoreOptions score_opts;
  auto* score = app.add_subcommand("score", "Score every WAV in a manifest with a trained model");
  score->add_option("-m,--model", score_opts.model, "Model file")->required()->check(CLI::ExistingFile);
  score->add_option("--manifest", score_opts.manifest, "Manifest of clips to score")->required()->check(CLI::ExistingFile);
  score->add_option("-o,--out", score_opts.out, "Output CSV")->required();
  score->add_option("--mel-bands", score_opts.mel_bands, "Mel bands M")->capture_default_str();
  score->add_option("--context", score_opts.context, "Context half-width C")->capture_default_str();
  score->add_option("--window", score_opts.window, "hann or rectangular")->capture_default_str();

  std::string scores_path;
  std::optional<std::string> roc_path;
  auto* eval_auc = app.add_subcommand("eval-auc", "AUC (and optional ROC CSV) from a score CSV");
  eval_auc->add_option("scores", scores_path, "CSV written by 'score'")->required()->check(CLI::ExistingFile);
  eval_auc->add_option("--roc", roc_path, "Write threshold,tpr,fpr CSV");

  std::string grid_model;
  std::string grid_dir;
  std::size_t grid_resolution = 201;
  auto* export_grid = app.add_subcommand("export-grid", "Boltzmann density and score maps of a 2-D model");
  export_grid->add_option("-m,--model", grid_model, "Model file")->required()->check(CLI::ExistingFile);
  export_grid->add_option("-o,--out", grid_dir, "Output directory")->required();
  export_grid->add_option("--resolution", grid_resolution, "Cells per axis")->capture_default_str();

  std::string corpus_dir;
  std::uint64_t corpus_seed = 1;
  bu::ToyCorpusConfig corpus_cfg;
  auto* make_corpus = app.add_subcommand("make-corpus", "Generate the synthetic machine-sound corpus");
  make_corpus->add_option("-o,--out", corpus_dir, "Output directory")->required();
  make_corpus->add_option("--seed", corpus_seed, "Generator seed")->capture_default_str();
  make_corpus->add_option("--train-files", corpus_cfg.train_files)->capture_default_str();
  make_corpus->add_option("--rare-fraction", corpus_cfg.rare_fraction)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) return cmd_verify(verify_opts, verify_updates);
    if (*train) return cmd_train_audio(audio_opts, audio_extra);
    if (*score) return cmd_score(score_opts);
    if (*eval_auc) return cmd_eval_auc(scores_path, roc_path);
    if (*export_grid) return cmd_export_grid(grid_model, grid_dir, grid_resolution);
    if (*make_corpus) {
      const auto manifest = bu::generate_toy_corpus(corpus_dir, corpus_cfg, corpus_seed);
      std::cout << "wrote " << manifest.string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
