#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace bu {

using Waveform = std::vector<double>;

struct WavData {
  int sample_rate = 0;
  Waveform samples;  // mono, scaled to [-1, 1)
};

/// Reads 16-bit PCM mono RIFF/WAVE. Other encodings and channel counts are
/// rejected. When `expected_rate` is nonzero the sample rate must match.
WavData read_wav(const std::filesystem::path& path, int expected_rate = 0);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, std::span<const double> samples, int sample_rate);

}  // namespace bu
