#include "bu/audio_features.hpp"

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <fftw3.h>

namespace bu {

namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    std::lock_guard lock(planner_mutex());
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    if (in_ == nullptr || out_ == nullptr) {
      fftw_free(in_);
      fftw_free(out_);
      throw std::bad_alloc();
    }
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  double magnitude(std::size_t k) const { return std::hypot(out_[k][0], out_[k][1]); }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace

WindowKind window_from_string(std::string_view name) {
  if (name == "hann") return WindowKind::hann;
  if (name == "rectangular") return WindowKind::rectangular;
  throw std::invalid_argument("unknown window '" + std::string(name) + "'");
}

std::string_view to_string(WindowKind w) {
  return w == WindowKind::hann ? "hann" : "rectangular";
}

void validate(const FeatureConfig& cfg) {
  if (cfg.sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  if (cfg.hop == 0 || cfg.stft_len <= cfg.hop) {
    throw std::invalid_argument("STFT length must exceed the hop, which must be positive");
  }
  if (cfg.mel_bands == 0) throw std::invalid_argument("mel band count must be positive");
  if (!(cfg.log_floor > 0.0)) throw std::invalid_argument("log floor must be positive");
  if (!(cfg.fmin >= 0.0) || !(cfg.fmax > cfg.fmin) || cfg.fmax > cfg.sample_rate / 2.0) {
    throw std::invalid_argument("mel range must satisfy 0 <= fmin < fmax <= sample_rate / 2");
  }
}

Vector analysis_window(const FeatureConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(cfg.stft_len);
  if (cfg.window == WindowKind::rectangular) return Vector::Ones(n);
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

Matrix stft_mag(std::span<const double> wave, const FeatureConfig& cfg) {
  validate(cfg);
  if (wave.size() < cfg.stft_len) {
    throw std::invalid_argument("waveform of " + std::to_string(wave.size()) +
                                " samples is shorter than the STFT length " + std::to_string(cfg.stft_len));
  }
  const std::size_t frames = (wave.size() - cfg.stft_len) / cfg.hop + 1;
  const Vector window = analysis_window(cfg);
  Matrix spec(cfg.bins(), frames);
  RealFft fft(cfg.stft_len);
  for (std::size_t t = 0; t < frames; ++t) {
    double* in = fft.input();
    const std::size_t offset = t * cfg.hop;
    for (std::size_t i = 0; i < cfg.stft_len; ++i) in[i] = wave[offset + i] * window(static_cast<Eigen::Index>(i));
    fft.execute();
    for (std::size_t k = 0; k < cfg.bins(); ++k) {
      spec(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = fft.magnitude(k);
    }
  }
  return spec;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix mel_matrix(const FeatureConfig& cfg) {
  validate(cfg);
  const std::size_t bins = cfg.bins();
  const std::size_t bands = cfg.mel_bands;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(bands + 1));
  }
  Matrix mel = Matrix::Zero(bands, bins);
  for (std::size_t b = 0; b < bands; ++b) {
    const double lo = edges[b];
    const double centre = edges[b + 1];
    const double hi = edges[b + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.stft_len);
      double w = 0.0;
      if (f > lo && f <= centre) {
        w = (f - lo) / (centre - lo);
      } else if (f > centre && f < hi) {
        w = (hi - f) / (hi - centre);
      }
      mel(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = w;
    }
    if (mel.row(static_cast<Eigen::Index>(b)).sum() <= 0.0) {
      throw std::invalid_argument("mel band " + std::to_string(b) + " of " + std::to_string(bands) +
                                  " covers no STFT bin; too many bands for " + std::to_string(bins) +
                                  " bins");
    }
  }
  return mel;
}

FeatureSequence logmel_context(const Matrix& spectrogram, const FeatureConfig& cfg) {
  validate(cfg);
  if (static_cast<std::size_t>(spectrogram.rows()) != cfg.bins()) {
    throw std::invalid_argument("spectrogram has " + std::to_string(spectrogram.rows()) +
                                " bins, expected " + std::to_string(cfg.bins()));
  }
  const std::size_t width = 2 * cfg.context + 1;
  const auto frames = static_cast<std::size_t>(spectrogram.cols());
  if (frames < width) {
    throw std::invalid_argument("spectrogram has " + std::to_string(frames) + " frames; context needs " +
                                std::to_string(width));
  }
  const Matrix logmel = (mel_matrix(cfg) * spectrogram).cwiseMax(cfg.log_floor).array().log().matrix();
  const auto m = static_cast<Eigen::Index>(cfg.mel_bands);
  FeatureSequence seq;
  seq.hop = cfg.hop;
  seq.stft_len = cfg.stft_len;
  seq.context = cfg.context;
  seq.frames.resize(static_cast<Eigen::Index>(cfg.dim()), static_cast<Eigen::Index>(frames - width + 1));
  for (Eigen::Index k = 0; k < seq.frames.cols(); ++k) {
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(width); ++c) {
      seq.frames.col(k).segment(c * m, m) = logmel.col(k + c);
    }
  }
  return seq;
}

FeatureSequence extract_features(std::span<const double> wave, const FeatureConfig& cfg) {
  return logmel_context(stft_mag(wave, cfg), cfg);
}

}  // namespace bu
