#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "bu/nn.hpp"

namespace bu {

enum class WindowKind { hann, rectangular };

WindowKind window_from_string(std::string_view name);
std::string_view to_string(WindowKind w);

struct FeatureConfig {
  int sample_rate = 16000;
  std::size_t stft_len = 512;
  std::size_t hop = 256;
  std::size_t mel_bands = 40;
  std::size_t context = 5;
  WindowKind window = WindowKind::hann;
  double log_floor = 1e-10;
  double fmin = 0.0;
  double fmax = 8000.0;

  std::size_t bins() const { return stft_len / 2 + 1; }
  std::size_t dim() const { return mel_bands * (2 * context + 1); }
};

void validate(const FeatureConfig& cfg);

/// Periodic Hann or all-ones analysis window of length stft_len.
Vector analysis_window(const FeatureConfig& cfg);

/// Magnitude spectrogram, bins() x frames, frames = (len - stft_len) / hop + 1.
Matrix stft_mag(std::span<const double> wave, const FeatureConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// mel_bands x bins() triangular filterbank on the HTK mel scale, unnormalized.
Matrix mel_matrix(const FeatureConfig& cfg);

/// Context-stacked log-mel frames. Column k stacks the log-mel vectors of
/// spectrogram frames k .. k + 2C, so it is centred on frame k + C.
struct FeatureSequence {
  Batch frames;  // dim() x (spectrogram frames - 2C)
  std::size_t hop = 0;
  std::size_t stft_len = 0;
  std::size_t context = 0;

  std::size_t size() const { return static_cast<std::size_t>(frames.cols()); }
  /// Half-open waveform sample span [first, last) read by column k.
  std::size_t first_sample(std::size_t k) const { return k * hop; }
  std::size_t last_sample(std::size_t k) const { return (k + 2 * context) * hop + stft_len; }
};

FeatureSequence logmel_context(const Matrix& spectrogram, const FeatureConfig& cfg);

/// stft_mag followed by logmel_context.
FeatureSequence extract_features(std::span<const double> wave, const FeatureConfig& cfg);

}  // namespace bu
