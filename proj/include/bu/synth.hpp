#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bu/audio_features.hpp"
#include "bu/nn.hpp"
#include "bu/wav.hpp"

namespace bu {

// ---------------------------------------------------------------------------
// Annulus verification data

enum class SampleClass { normal, anomaly };

/// Radii are uniform on [normal_r_min, normal_r_max] for the normal class and on
/// (anomaly_r_min, anomaly_r_max] for anomalies; angles uniform on [0, 2 pi).
struct AnnulusConfig {
  double normal_r_min = 0.0;
  double normal_r_max = 2.0;
  double anomaly_r_min = 2.0;
  double anomaly_r_max = 3.0;
  std::size_t count = 10000;
  std::uint64_t seed = 0;
};

void validate(const AnnulusConfig& cfg);

/// 2 x count batch of points x = r (cos psi, sin psi).
Batch gen_annulus(const AnnulusConfig& cfg, SampleClass cls);

// ---------------------------------------------------------------------------
// Anomaly mixing

double rms(std::span<const double> wave);

/// Gain alpha such that alpha * else_segment sits `anr_db` dB (RMS, 20 log10)
/// relative to normal_segment. Throws on silent input.
double anr_gain(std::span<const double> normal_segment, std::span<const double> else_segment, double anr_db);

struct AnrRange {
  double lo_db = -30.0;
  double hi_db = 10.0;
};

/// Parses "lo:hi" in dB.
AnrRange parse_anr_range(std::string_view text);

// ---------------------------------------------------------------------------
// Corpora

/// Manifest line: "<tag> <path>", paths relative to the manifest's directory.
/// Tags: normal, else, test-normal, test-anomaly. '#' starts a comment.
struct ManifestEntry {
  std::string tag;
  std::filesystem::path path;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest, std::span<const ManifestEntry> entries);

/// Splits every waveform into consecutive `seconds`-long pieces, dropping the remainder.
std::vector<Waveform> segment_waveforms(std::span<const Waveform> waves, int sample_rate, double seconds = 3.0);

struct AudioCorpus {
  std::vector<Waveform> normal_segments;  // pre-segmented training normals
  std::vector<Waveform> else_clips;       // something-else sounds for mixing
  std::vector<Waveform> test_normal;
  std::vector<Waveform> test_anomaly;     // raw anomaly sounds, mixed at test time
};

/// Loads every WAV listed in the manifest; normal files are segmented to 3 s.
AudioCorpus load_corpus(const std::filesystem::path& manifest, int sample_rate);

struct MixProvenance {
  std::vector<std::size_t> normal_segments;
  std::size_t else_clip = 0;
  std::size_t mix_start = 0;   // sample offset in the concatenated signal
  std::size_t mix_length = 0;  // zero when the mixed region is empty
  double anr_db = 0.0;
  double gain = 0.0;
};

struct MiniBatchPair {
  Batch normal;
  Batch anomaly;
  MixProvenance provenance;
};

struct MiniBatchOptions {
  std::size_t files_per_batch = 10;
  /// Test hook: mix at zero gain, leaving the mixed region empty.
  bool zero_gain = false;
};

/// Concatenates randomly chosen normal segments, mixes one random something-else
/// clip at a random offset and ANR, and splits the feature frames: frames whose
/// analysis span overlaps the mixed region form the anomaly batch.
MiniBatchPair build_audio_minibatch(const AudioCorpus& corpus, const FeatureConfig& features,
                                    AnrRange anr, std::uint64_t seed, const MiniBatchOptions& opts = {});

/// Columns of `seq` whose sample span intersects [start, start + length).
std::vector<bool> overlapping_frames(const FeatureSequence& seq, std::size_t start, std::size_t length);

// ---------------------------------------------------------------------------
// Synthetic machine-sound corpus

/// A steady harmonic hum as the frequent-normal state, a rarer whine as the
/// rare-normal state, noise bursts and chirps as something-else sounds, and
/// ringing knocks as test anomalies.
struct ToyCorpusConfig {
  int sample_rate = 16000;
  std::size_t train_files = 12;
  double train_file_seconds = 6.0;
  double rare_fraction = 0.1;  // probability a 3 s training segment is in the rare state
  std::size_t else_clips = 12;
  std::size_t test_normal = 12;
  double test_seconds = 3.0;
  double test_rare_fraction = 0.5;
  std::size_t test_anomaly = 12;
};

/// Writes WAVs and `manifest.txt` under `dir`; returns the manifest path.
std::filesystem::path generate_toy_corpus(const std::filesystem::path& dir, const ToyCorpusConfig& cfg,
                                          std::uint64_t seed);

}  // namespace bu
