#include "bu/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "bu/numeric.hpp"

namespace bu {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

}  // namespace

void validate(const AnnulusConfig& cfg) {
  if (cfg.count < 1) throw std::invalid_argument("annulus sample count must be positive");
  if (!(cfg.normal_r_min >= 0.0 && cfg.normal_r_min < cfg.normal_r_max)) {
    throw std::invalid_argument("normal radius range must be non-empty and non-negative");
  }
  if (!(cfg.anomaly_r_min < cfg.anomaly_r_max)) throw std::invalid_argument("anomaly radius range is empty");
  if (cfg.anomaly_r_min < cfg.normal_r_max && cfg.anomaly_r_max > cfg.normal_r_min) {
    throw std::invalid_argument("normal and anomaly radius ranges overlap");
  }
}

Batch gen_annulus(const AnnulusConfig& cfg, SampleClass cls) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);  // [0, 1)
  Batch x(2, static_cast<Eigen::Index>(cfg.count));
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    const double u = unit(rng);
    // Normal radii on the closed-low interval, anomaly radii on (lo, hi].
    const double r = cls == SampleClass::normal
                         ? cfg.normal_r_min + (cfg.normal_r_max - cfg.normal_r_min) * u
                         : cfg.anomaly_r_max - (cfg.anomaly_r_max - cfg.anomaly_r_min) * u;
    const double psi = kTwoPi * unit(rng);
    x(0, n) = r * std::cos(psi);
    x(1, n) = r * std::sin(psi);
  }
  return x;
}

double rms(std::span<const double> wave) {
  if (wave.empty()) return 0.0;
  CompensatedSum s;
  for (double v : wave) s.add(v * v);
  return std::sqrt(s.value() / static_cast<double>(wave.size()));
}

double anr_gain(std::span<const double> normal_segment, std::span<const double> else_segment, double anr_db) {
  const double rn = rms(normal_segment);
  const double re = rms(else_segment);
  if (!(rn > 0.0)) throw std::invalid_argument("anr_gain: normal segment is silent");
  if (!(re > 0.0)) throw std::invalid_argument("anr_gain: something-else segment is silent");
  return std::pow(10.0, anr_db / 20.0) * rn / re;
}

AnrRange parse_anr_range(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("ANR range must look like lo:hi, got '" + std::string(text) + "'");
  }
  AnrRange r{parse_double(text.substr(0, colon)), parse_double(text.substr(colon + 1))};
  if (r.lo_db > r.hi_db) throw std::invalid_argument("ANR range lower bound exceeds upper bound");
  return r;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open manifest " + manifest.string());
  const auto base = manifest.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tag;
    std::string path;
    if (!(ls >> tag)) continue;
    if (!(ls >> path)) {
      throw std::runtime_error(manifest.string() + ":" + std::to_string(lineno) + ": missing path");
    }
    if (tag != "normal" && tag != "else" && tag != "test-normal" && tag != "test-anomaly") {
      throw std::runtime_error(manifest.string() + ":" + std::to_string(lineno) + ": unknown tag '" + tag + "'");
    }
    std::filesystem::path p(path);
    entries.push_back({tag, p.is_absolute() ? p : base / p});
  }
  return entries;
}

void write_manifest(const std::filesystem::path& manifest, std::span<const ManifestEntry> entries) {
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + manifest.string());
  out << "# tag path (relative to this file)\n";
  const auto base = manifest.parent_path();
  for (const auto& e : entries) {
    out << e.tag << ' ' << std::filesystem::proximate(e.path, base).generic_string() << '\n';
  }
}

std::vector<Waveform> segment_waveforms(std::span<const Waveform> waves, int sample_rate, double seconds) {
  const auto len = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  if (len == 0) throw std::invalid_argument("segment length must be positive");
  std::vector<Waveform> out;
  for (const auto& w : waves) {
    for (std::size_t start = 0; start + len <= w.size(); start += len) {
      out.emplace_back(w.begin() + static_cast<std::ptrdiff_t>(start),
                       w.begin() + static_cast<std::ptrdiff_t>(start + len));
    }
  }
  return out;
}

AudioCorpus load_corpus(const std::filesystem::path& manifest, int sample_rate) {
  AudioCorpus corpus;
  std::vector<Waveform> normals;
  for (const auto& e : read_manifest(manifest)) {
    auto wav = read_wav(e.path, sample_rate).samples;
    if (e.tag == "normal") {
      normals.push_back(std::move(wav));
    } else if (e.tag == "else") {
      corpus.else_clips.push_back(std::move(wav));
    } else if (e.tag == "test-normal") {
      corpus.test_normal.push_back(std::move(wav));
    } else {
      corpus.test_anomaly.push_back(std::move(wav));
    }
  }
  corpus.normal_segments = segment_waveforms(normals, sample_rate);
  return corpus;
}

std::vector<bool> overlapping_frames(const FeatureSequence& seq, std::size_t start, std::size_t length) {
  std::vector<bool> hit(seq.size(), false);
  if (length == 0) return hit;
  const std::size_t end = start + length;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    hit[k] = seq.first_sample(k) < end && seq.last_sample(k) > start;
  }
  return hit;
}

MiniBatchPair build_audio_minibatch(const AudioCorpus& corpus, const FeatureConfig& features,
                                    AnrRange anr, std::uint64_t seed, const MiniBatchOptions& opts) {
  if (corpus.normal_segments.empty()) throw std::invalid_argument("normal corpus is empty");
  if (corpus.else_clips.empty()) throw std::invalid_argument("something-else corpus is empty");
  if (opts.files_per_batch == 0) throw std::invalid_argument("files_per_batch must be positive");

  std::mt19937_64 rng(seed);
  MiniBatchPair out;
  auto& prov = out.provenance;

  const std::size_t n_seg = corpus.normal_segments.size();
  if (n_seg >= opts.files_per_batch) {
    std::vector<std::size_t> idx(n_seg);
    for (std::size_t i = 0; i < n_seg; ++i) idx[i] = i;
    for (std::size_t i = 0; i < opts.files_per_batch; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n_seg - 1);
      std::swap(idx[i], idx[pick(rng)]);
      prov.normal_segments.push_back(idx[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, n_seg - 1);
    for (std::size_t i = 0; i < opts.files_per_batch; ++i) prov.normal_segments.push_back(pick(rng));
  }

  Waveform mixed;
  for (auto i : prov.normal_segments) {
    const auto& seg = corpus.normal_segments[i];
    mixed.insert(mixed.end(), seg.begin(), seg.end());
  }

  prov.else_clip = std::uniform_int_distribution<std::size_t>(0, corpus.else_clips.size() - 1)(rng);
  const auto& clip = corpus.else_clips[prov.else_clip];
  if (clip.empty()) throw std::invalid_argument("something-else clip is empty");
  if (clip.size() > mixed.size()) {
    throw std::invalid_argument("something-else clip (" + std::to_string(clip.size()) +
                                " samples) is longer than the concatenated normal signal (" +
                                std::to_string(mixed.size()) + " samples)");
  }
  prov.mix_start = std::uniform_int_distribution<std::size_t>(0, mixed.size() - clip.size())(rng);
  prov.anr_db = std::uniform_real_distribution<double>(anr.lo_db, anr.hi_db)(rng);

  if (opts.zero_gain) {
    prov.gain = 0.0;
    prov.mix_length = 0;
  } else {
    const std::span<const double> region(mixed.data() + prov.mix_start, clip.size());
    prov.gain = anr_gain(region, clip, prov.anr_db);
    prov.mix_length = clip.size();
    for (std::size_t i = 0; i < clip.size(); ++i) mixed[prov.mix_start + i] += prov.gain * clip[i];
  }

  const auto seq = extract_features(mixed, features);
  const auto hit = overlapping_frames(seq, prov.mix_start, prov.mix_length);
  const auto n_anom = static_cast<Eigen::Index>(std::count(hit.begin(), hit.end(), true));
  if (n_anom == 0) throw std::runtime_error("mini-batch has no anomalous frames; rejected");
  if (n_anom == static_cast<Eigen::Index>(seq.size())) {
    throw std::runtime_error("mini-batch has no normal frames; rejected");
  }
  out.anomaly.resize(seq.frames.rows(), n_anom);
  out.normal.resize(seq.frames.rows(), static_cast<Eigen::Index>(seq.size()) - n_anom);
  Eigen::Index ia = 0;
  Eigen::Index in = 0;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const auto col = seq.frames.col(static_cast<Eigen::Index>(k));
    if (hit[k]) {
      out.anomaly.col(ia++) = col;
    } else {
      out.normal.col(in++) = col;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct ToySynth {
  int sr;
  std::mt19937_64 rng;

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

  void add_noise(Waveform& w, double amp) {
    std::normal_distribution<double> n(0.0, amp);
    for (auto& v : w) v += n(rng);
  }

  // Frequent-normal state: harmonic hum with slow amplitude modulation.
  Waveform hum(std::size_t n) {
    Waveform w(n, 0.0);
    const double f0 = uniform(95.0, 105.0);
    const double mod = uniform(1.5, 2.5);
    std::vector<double> phase(6);
    for (auto& p : phase) p = uniform(0.0, kTwoPi);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sr;
      double s = 0.0;
      for (std::size_t h = 0; h < phase.size(); ++h) {
        s += 0.3 / static_cast<double>(h + 1) * std::sin(kTwoPi * f0 * static_cast<double>(h + 1) * t + phase[h]);
      }
      w[i] = s * (1.0 + 0.1 * std::sin(kTwoPi * mod * t));
    }
    add_noise(w, 0.005);
    return w;
  }

  // Rare-normal state: a wobbling high whine over a quieter hum.
  Waveform whine(std::size_t n) {
    Waveform w = hum(n);
    for (auto& v : w) v *= 0.4;
    const double fc = uniform(1700.0, 1900.0);
    double phase = uniform(0.0, kTwoPi);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sr;
      const double f = fc + 150.0 * std::sin(kTwoPi * 0.7 * t);
      phase += kTwoPi * f / sr;
      w[i] += 0.15 * std::sin(phase) + 0.05 * std::sin(2.0 * phase);
    }
    return w;
  }

  Waveform else_clip() {
    const auto n = static_cast<std::size_t>(uniform(0.3, 2.0) * sr);
    Waveform w(n, 0.0);
    const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
    if (kind == 0) {
      add_noise(w, 0.2);  // white burst
    } else if (kind == 1) {
      const double f1 = uniform(300.0, 1000.0);
      const double f2 = uniform(2000.0, 6000.0);
      double phase = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(n);
        phase += kTwoPi * (f1 + (f2 - f1) * frac) / sr;
        w[i] = 0.3 * std::sin(phase);
      }
    } else {
      // One-pole low-passed noise.
      std::normal_distribution<double> g(0.0, 1.0);
      const double a = uniform(0.8, 0.97);
      double y = 0.0;
      for (auto& v : w) {
        y = a * y + (1.0 - a) * g(rng);
        v = y;
      }
    }
    const std::size_t ramp = std::min<std::size_t>(n / 4, 160);
    for (std::size_t i = 0; i < ramp; ++i) {
      const double g = static_cast<double>(i) / static_cast<double>(ramp);
      w[i] *= g;
      w[n - 1 - i] *= g;
    }
    return w;
  }

  // Test anomaly: a train of ringing knocks.
  Waveform knocks() {
    const auto n = static_cast<std::size_t>(uniform(0.5, 1.5) * sr);
    Waveform w(n, 0.0);
    const double fk = uniform(2500.0, 4000.0);
    const double period = uniform(0.08, 0.25);
    for (double t0 = 0.0; t0 < static_cast<double>(n) / sr; t0 += period) {
      const auto s0 = static_cast<std::size_t>(t0 * sr);
      for (std::size_t i = s0; i < n && i < s0 + static_cast<std::size_t>(0.05 * sr); ++i) {
        const double t = static_cast<double>(i - s0) / sr;
        w[i] += 0.5 * std::exp(-t / 0.008) * std::sin(kTwoPi * fk * t);
      }
    }
    add_noise(w, 0.002);
    return w;
  }
};

}  // namespace

std::filesystem::path generate_toy_corpus(const std::filesystem::path& dir, const ToyCorpusConfig& cfg,
                                          std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "train");
  fs::create_directories(dir / "else");
  fs::create_directories(dir / "test");
  ToySynth synth{cfg.sample_rate, std::mt19937_64(seed)};
  std::vector<ManifestEntry> entries;

  const auto seg = static_cast<std::size_t>(3.0 * cfg.sample_rate);
  const auto train_len = static_cast<std::size_t>(cfg.train_file_seconds * cfg.sample_rate);
  for (std::size_t f = 0; f < cfg.train_files; ++f) {
    Waveform w;
    for (std::size_t done = 0; done < train_len; done += seg) {
      const std::size_t n = std::min(seg, train_len - done);
      const auto part = synth.uniform(0.0, 1.0) < cfg.rare_fraction ? synth.whine(n) : synth.hum(n);
      w.insert(w.end(), part.begin(), part.end());
    }
    const auto p = dir / "train" / ("normal_" + std::to_string(f) + ".wav");
    write_wav(p, w, cfg.sample_rate);
    entries.push_back({"normal", p});
  }
  for (std::size_t f = 0; f < cfg.else_clips; ++f) {
    const auto p = dir / "else" / ("else_" + std::to_string(f) + ".wav");
    write_wav(p, synth.else_clip(), cfg.sample_rate);
    entries.push_back({"else", p});
  }
  const auto test_len = static_cast<std::size_t>(cfg.test_seconds * cfg.sample_rate);
  for (std::size_t f = 0; f < cfg.test_normal; ++f) {
    const bool rare = static_cast<double>(f) < cfg.test_rare_fraction * static_cast<double>(cfg.test_normal);
    const auto p = dir / "test" / ("normal_" + std::to_string(f) + ".wav");
    write_wav(p, rare ? synth.whine(test_len) : synth.hum(test_len), cfg.sample_rate);
    entries.push_back({"test-normal", p});
  }
  for (std::size_t f = 0; f < cfg.test_anomaly; ++f) {
    const auto p = dir / "test" / ("anomaly_" + std::to_string(f) + ".wav");
    write_wav(p, synth.knocks(), cfg.sample_rate);
    entries.push_back({"test-anomaly", p});
  }
  const auto manifest = dir / "manifest.txt";
  write_manifest(manifest, entries);
  return manifest;
}

}  // namespace bu
