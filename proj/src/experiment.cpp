#include "bu/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unistd.h>

#include "bu/model_io.hpp"

namespace bu {

namespace {

enum Stream : std::uint64_t {
  kNormalData = 1,
  kAnomalyData = 2,
  kBatchOrder = 3,
  kInit = 4,
  kAudioBatches = 5,
  kAudioTest = 6,
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Cycles through a shuffled index permutation, reshuffling on each pass.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  Batch next(const Batch& data, std::size_t m) {
    Batch out(data.rows(), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.col(static_cast<Eigen::Index>(i)) = data.col(static_cast<Eigen::Index>(order_[pos_++]));
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t pos_ = 0;
};

LossPoint to_point(std::size_t update, const LossReport& r) {
  return {update, r.total, r.normal_term, r.anomaly_term};
}

std::uint64_t init_seed(const ExperimentConfig& cfg) {
  return cfg.init_seed.value_or(derive_seed(cfg.seed, kInit));
}

}  // namespace

RunReport run_verify(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::verify) throw std::invalid_argument("run_verify needs a verify config");
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto& v = cfg.verify;
  const auto objective = resolved_objective(cfg);

  AnnulusConfig data_cfg;
  data_cfg.count = v.samples;
  data_cfg.seed = derive_seed(cfg.seed, kNormalData);
  const Batch normal = gen_annulus(data_cfg, SampleClass::normal);
  data_cfg.seed = derive_seed(cfg.seed, kAnomalyData);
  const Batch anomaly = gen_annulus(data_cfg, SampleClass::anomaly);

  AeModel model = glorot_init(verification_architecture(), init_seed(cfg));
  auto state = AmsGradState::for_model(model, cfg.optimizer);
  BatchSampler normal_sampler(normal.cols(), derive_seed(cfg.seed, kBatchOrder));
  BatchSampler anomaly_sampler(anomaly.cols(), derive_seed(cfg.seed, kBatchOrder + 100));

  RunReport report;
  report.config = cfg;
  report.input_dim = 2;
  report.loss_curve.reserve(v.updates);
  for (std::size_t u = 0; u < v.updates; ++u) {
    const Batch xn = normal_sampler.next(normal, v.batch_normal);
    const Batch xa = anomaly_sampler.next(anomaly, v.batch_anomaly);
    auto lg = loss_and_gradient(model, xn, xa, objective);
    report.loss_curve.push_back(to_point(u + 1, lg.report));
    amsgrad_step(state, model, lg.gradient, v.step_size);
  }

  EvalGrid grid;
  grid.resolution = v.grid_resolution;
  VerifyOutcome outcome;
  outcome.pdf = grid_pdf(model, grid);
  outcome.kld_p = grid_kld(oracle_density(OracleKind::annulus_p, grid), outcome.pdf.density);
  outcome.kld_u = grid_kld(oracle_density(OracleKind::annulus_uniform, grid), outcome.pdf.density);
  report.verify = std::move(outcome);
  report.model = std::move(model);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<double> score_waveform(const AeModel& model, std::span<const double> wave, const FeatureConfig& features) {
  const auto seq = extract_features(wave, features);
  if (static_cast<std::size_t>(seq.frames.rows()) != model.input_dim()) {
    throw std::invalid_argument("feature dimension " + std::to_string(seq.frames.rows()) +
                                " does not match model input dimension " + std::to_string(model.input_dim()));
  }
  const Vector s = anomaly_scores(model, seq.frames);
  return {s.data(), s.data() + s.size()};
}

std::vector<AnrAuc> evaluate_audio(const AeModel& model, const AudioCorpus& corpus, const FeatureConfig& features,
                                   std::span<const double> anrs, std::uint64_t seed) {
  if (corpus.test_normal.empty() || corpus.test_anomaly.empty()) {
    throw std::invalid_argument("evaluation needs test-normal and test-anomaly clips");
  }
  std::vector<double> normal_frames;
  std::vector<double> normal_clips;
  for (const auto& clip : corpus.test_normal) {
    const auto s = score_waveform(model, clip, features);
    normal_frames.insert(normal_frames.end(), s.begin(), s.end());
    normal_clips.push_back(sequence_score(s));
  }

  std::vector<AnrAuc> out;
  for (std::size_t ai = 0; ai < anrs.size(); ++ai) {
    std::vector<double> anomaly_frames;
    std::vector<double> anomaly_clips;
    for (std::size_t j = 0; j < corpus.test_anomaly.size(); ++j) {
      const auto& sound = corpus.test_anomaly[j];
      Waveform mixed = corpus.test_normal[j % corpus.test_normal.size()];
      if (sound.size() > mixed.size()) {
        throw std::invalid_argument("test anomaly sound is longer than the test-normal clip it is mixed into");
      }
      std::mt19937_64 rng(derive_seed(seed, ai * 100003 + j));
      const auto start = std::uniform_int_distribution<std::size_t>(0, mixed.size() - sound.size())(rng);
      const double gain = anr_gain(std::span(mixed).subspan(start, sound.size()), sound, anrs[ai]);
      for (std::size_t i = 0; i < sound.size(); ++i) mixed[start + i] += gain * sound[i];

      const auto seq = extract_features(mixed, features);
      const Vector s = anomaly_scores(model, seq.frames);
      const auto hit = overlapping_frames(seq, start, sound.size());
      for (std::size_t k = 0; k < hit.size(); ++k) {
        if (hit[k]) anomaly_frames.push_back(s(static_cast<Eigen::Index>(k)));
      }
      anomaly_clips.push_back(s.maxCoeff());
    }
    out.push_back({anrs[ai], auc(normal_frames, anomaly_frames), auc(normal_clips, anomaly_clips)});
  }
  return out;
}

RunReport run_audio(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::audio) throw std::invalid_argument("run_audio needs an audio config");
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto& a = cfg.audio;
  const auto objective = resolved_objective(cfg);
  const AudioCorpus corpus = load_corpus(a.manifest, a.features.sample_rate);
  if (corpus.normal_segments.empty()) throw std::invalid_argument("manifest lists no usable normal audio");
  if (corpus.else_clips.empty()) throw std::invalid_argument("manifest lists no something-else clips");

  const std::size_t dim = a.features.dim();
  const auto arch = fcn_architecture(dim, a.architecture.hidden_layers, a.architecture.hidden_units,
                                     a.architecture.latent_dim);
  AeModel model = glorot_init(arch, init_seed(cfg));
  auto state = AmsGradState::for_model(model, cfg.optimizer);
  const LrSchedule schedule = a.schedule;

  RunReport report;
  report.config = cfg;
  report.input_dim = dim;
  MiniBatchOptions opts;
  opts.files_per_batch = a.files_per_batch;
  std::size_t update = 0;
  for (std::size_t epoch = 0; epoch < a.epochs; ++epoch) {
    const double lr = lr_at(schedule, epoch);
    for (std::size_t b = 0; b < a.batches_per_epoch; ++b) {
      const auto batch_seed = derive_seed(derive_seed(cfg.seed, kAudioBatches), update);
      const auto mb = build_audio_minibatch(corpus, a.features, a.train_anr, batch_seed, opts);
      auto lg = loss_and_gradient(model, mb.normal, mb.anomaly, objective);
      report.loss_curve.push_back(to_point(++update, lg.report));
      amsgrad_step(state, model, lg.gradient, lr);
    }
  }

  report.audio = evaluate_audio(model, corpus, a.features, a.test_anrs, derive_seed(cfg.seed, kAudioTest));
  report.model = std::move(model);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<std::filesystem::path> export_artifacts(const RunReport& report, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!report.model) throw std::invalid_argument("report carries no model");
  fs::create_directories(dir);
  const fs::path staging = dir / (".staging-" + std::to_string(::getpid()));
  fs::remove_all(staging);
  fs::create_directory(staging);

  auto open = [&](const std::string& name) {
    std::ofstream out(staging / name, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (staging / name).string());
    return out;
  };
  auto close = [](std::ofstream& out, const std::string& name) {
    out.close();
    if (!out) throw std::runtime_error("failed writing " + name);
  };

  std::vector<std::string> names;
  try {
    {
      auto out = open("loss.csv");
      out << "update,total,normal_term,anomaly_term\n";
      for (const auto& p : report.loss_curve) {
        out << p.update << ',' << fmt(p.total) << ',' << fmt(p.normal_term) << ',' << fmt(p.anomaly_term) << '\n';
      }
      close(out, "loss.csv");
      names.push_back("loss.csv");
    }
    if (report.verify) {
      auto out = open("kld.csv");
      out << "objective,kld_p_q,kld_u_q\n"
          << to_string(report.config.objective) << ',' << fmt(report.verify->kld_p) << ','
          << fmt(report.verify->kld_u) << '\n';
      close(out, "kld.csv");
      names.push_back("kld.csv");

      const auto& pdf = report.verify->pdf;
      write_pgm(staging / "pdf.pgm", pdf.density.grid, pdf.density.values);
      write_pgm(staging / "score.pgm", pdf.density.grid, pdf.scores);
      write_grid_csv(staging / "pdf.csv", pdf);
      names.insert(names.end(), {"pdf.pgm", "score.pgm", "pdf.csv"});
    } else {
      auto out = open("auc.csv");
      out << "objective,input_dim,anr_db,frame_auc,clip_auc\n";
      for (const auto& r : report.audio) {
        out << to_string(report.config.objective) << ',' << report.input_dim << ',' << fmt(r.anr_db) << ','
            << fmt(r.frame_auc) << ',' << fmt(r.clip_auc) << '\n';
      }
      close(out, "auc.csv");
      names.push_back("auc.csv");
    }
    save_model(staging / "model.bin", *report.model);
    names.push_back("model.bin");
    {
      auto out = open("config.echo");
      out << to_json(report.config).dump(2) << '\n';
      close(out, "config.echo");
      names.push_back("config.echo");
    }
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }

  std::vector<fs::path> written;
  for (const auto& n : names) {
    fs::rename(staging / n, dir / n);
    written.push_back(dir / n);
  }
  fs::remove(staging);
  return written;
}

}  // namespace bu
