#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "bu/audio_features.hpp"
#include "bu/wav.hpp"

using namespace bu;
namespace fs = std::filesystem;

namespace {

Waveform sine(double hz, std::size_t n, int sr = 16000) {
  Waveform w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sr);
  return w;
}

// Energy of a one-sided spectrum column, counting mirrored bins twice.
double one_sided_energy(const Vector& col) {
  const auto last = col.size() - 1;
  return col(0) * col(0) + col(last) * col(last) + 2.0 * col.segment(1, last - 1).squaredNorm();
}

void put_u16(std::ofstream& o, std::uint16_t v) { o.write(reinterpret_cast<const char*>(&v), 2); }
void put_u32(std::ofstream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }

void write_raw_wav(const fs::path& p, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits) {
  std::ofstream o(p, std::ios::binary);
  const std::uint32_t data_bytes = 64u * channels * (bits / 8u);
  o.write("RIFF", 4);
  put_u32(o, 36 + data_bytes);
  o.write("WAVEfmt ", 8);
  put_u32(o, 16);
  put_u16(o, 1);
  put_u16(o, channels);
  put_u32(o, rate);
  put_u32(o, rate * channels * bits / 8u);
  put_u16(o, static_cast<std::uint16_t>(channels * bits / 8u));
  put_u16(o, bits);
  o.write("data", 4);
  put_u32(o, data_bytes);
  for (std::uint32_t i = 0; i < data_bytes; ++i) o.put(0);
}

}  // namespace

TEST_CASE("bin-centred sine: rectangular window puts it in one bin") {
  FeatureConfig f;
  f.window = WindowKind::rectangular;
  const auto spec = stft_mag(sine(500.0, 4096), f);  // bin 16
  for (Eigen::Index t = 0; t < spec.cols(); ++t) {
    const Vector col = spec.col(t);
    Eigen::Index peak = 0;
    col.maxCoeff(&peak);
    CHECK(peak == 16);
    CHECK(2.0 * col(16) * col(16) / one_sided_energy(col) >= 0.9);
  }
}

TEST_CASE("bin-centred sine: Hann window keeps it in the main lobe") {
  const FeatureConfig f;
  const auto spec = stft_mag(sine(500.0, 4096), f);
  for (Eigen::Index t = 0; t < spec.cols(); ++t) {
    const Vector col = spec.col(t);
    Eigen::Index peak = 0;
    col.maxCoeff(&peak);
    CHECK(peak == 16);
    const double lobe = 2.0 * col.segment(15, 3).squaredNorm();
    CHECK(lobe / one_sided_energy(col) >= 0.9);
    CHECK(col(15) / col(16) == doctest::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("zero input gives zero spectrum and floored log-mel") {
  const FeatureConfig f;
  const Waveform z(16000, 0.0);
  CHECK(stft_mag(z, f).isZero(0.0));
  const auto seq = extract_features(z, f);
  CHECK((seq.frames.array() - std::log(1e-10)).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("Parseval holds per frame") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Waveform w(8192);
  for (auto& v : w) v = n(rng);
  for (auto kind : {WindowKind::hann, WindowKind::rectangular}) {
    FeatureConfig f;
    f.window = kind;
    const auto spec = stft_mag(w, f);
    const Vector win = analysis_window(f);
    for (Eigen::Index t = 0; t < spec.cols(); ++t) {
      double time_energy = 0.0;
      for (Eigen::Index i = 0; i < 512; ++i) {
        const double v = w[static_cast<std::size_t>(t * 256 + i)] * win(i);
        time_energy += v * v;
      }
      REQUIRE(one_sided_energy(spec.col(t)) == doctest::Approx(512.0 * time_energy).epsilon(1e-6));
    }
  }
}

TEST_CASE("stft frame count and short input") {
  const FeatureConfig f;
  CHECK(stft_mag(Waveform(512, 0.0), f).cols() == 1);
  CHECK(stft_mag(Waveform(48000, 0.0), f).cols() == (48000 - 512) / 256 + 1);
  CHECK_THROWS_AS(stft_mag(Waveform(511, 0.0), f), std::invalid_argument);
}

TEST_CASE("periodic Hann window") {
  const Vector w = analysis_window(FeatureConfig{});
  CHECK(w(0) == 0.0);
  CHECK(w(256) == doctest::Approx(1.0));
  CHECK(w(1) == doctest::Approx(w(511)));
}

TEST_CASE("mel scale round trip") {
  for (double hz : {0.0, 100.0, 1000.0, 8000.0}) CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz));
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)));
}

TEST_CASE("mel filterbank shape") {
  for (std::size_t m : {40u, 64u}) {
    FeatureConfig f;
    f.mel_bands = m;
    const Matrix mel = mel_matrix(f);
    CHECK(mel.rows() == static_cast<Eigen::Index>(m));
    CHECK(mel.cols() == 257);
    CHECK(mel.minCoeff() >= 0.0);
    CHECK(mel.maxCoeff() <= 1.0);

    Eigen::Index prev = -1;
    for (Eigen::Index b = 0; b < mel.rows(); ++b) {
      Eigen::Index peak = 0;
      mel.row(b).maxCoeff(&peak);
      CHECK(peak >= prev);
      prev = peak;
      CHECK(mel.row(b).sum() > 0.0);
    }
    // A flat unit spectrum gives each band its row sum.
    const Vector flat = mel * Vector::Ones(257);
    CHECK((flat - mel.rowwise().sum()).norm() <= 1e-12);
    // Every bin strictly between the first and last band centres is covered.
    Eigen::Index first = 0;
    Eigen::Index last = 0;
    mel.row(0).maxCoeff(&first);
    mel.row(mel.rows() - 1).maxCoeff(&last);
    for (Eigen::Index k = first; k <= last; ++k) CHECK(mel.col(k).sum() > 0.0);
  }
  FeatureConfig crowded;
  crowded.mel_bands = 200;
  CHECK_THROWS_AS(mel_matrix(crowded), std::invalid_argument);
}

TEST_CASE("context stacking") {
  FeatureConfig f;
  f.context = 0;
  Matrix spec = Matrix::Random(257, 6).cwiseAbs();
  const auto flat = logmel_context(spec, f);
  CHECK(flat.frames.rows() == 40);
  CHECK(flat.frames.cols() == 6);
  const Matrix direct = (mel_matrix(f) * spec).cwiseMax(1e-10).array().log().matrix();
  CHECK((flat.frames - direct).cwiseAbs().maxCoeff() <= 1e-12);

  f.context = 2;
  const auto ctx = logmel_context(spec, f);
  CHECK(ctx.frames.rows() == 200);
  CHECK(ctx.frames.cols() == 2);
  for (Eigen::Index k = 0; k < 2; ++k) {
    for (Eigen::Index c = 0; c < 5; ++c) CHECK(ctx.frames.col(k).segment(c * 40, 40) == direct.col(k + c));
  }

  Matrix constant(257, 20);
  constant.colwise() = spec.col(0);
  f.context = 5;
  const auto same = logmel_context(constant, f);
  for (Eigen::Index c = 1; c < 11; ++c) CHECK(same.frames.col(0).segment(c * 40, 40) == same.frames.col(0).head(40));

  CHECK_THROWS_AS(logmel_context(Matrix::Ones(257, 10), f), std::invalid_argument);
  CHECK_THROWS_AS(logmel_context(Matrix::Ones(100, 20), f), std::invalid_argument);
}

TEST_CASE("feature dimensions of the named architectures") {
  FeatureConfig f;
  CHECK(f.dim() == 440);
  f.mel_bands = 64;
  f.context = 10;
  CHECK(f.dim() == 1344);
}

TEST_CASE("features shift by one column per hop") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.1);
  Waveform w(16000);
  for (auto& v : w) v = n(rng);
  const FeatureConfig f;
  const auto a = extract_features(w, f);
  const auto b = extract_features(std::span<const double>(w).subspan(256), f);
  REQUIRE(b.size() + 1 == a.size());
  CHECK((a.frames.rightCols(b.size()) - b.frames).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("wav round trip and rejection") {
  const fs::path dir = fs::temp_directory_path() / "bu_test_wav";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Waveform w = sine(440.0, 1600);
  for (auto& v : w) v *= 0.5;
  write_wav(dir / "a.wav", w, 16000);
  const auto back = read_wav(dir / "a.wav", 16000);
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.samples.size() == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) REQUIRE(std::abs(back.samples[i] - w[i]) <= 1.0 / 32768.0);

  CHECK_THROWS(read_wav(dir / "a.wav", 44100));
  write_raw_wav(dir / "stereo.wav", 2, 16000, 16);
  CHECK_THROWS(read_wav(dir / "stereo.wav"));
  write_raw_wav(dir / "pcm8.wav", 1, 16000, 8);
  CHECK_THROWS(read_wav(dir / "pcm8.wav"));
  write_raw_wav(dir / "ok.wav", 1, 16000, 16);
  CHECK(read_wav(dir / "ok.wav", 16000).samples.size() == 64);
  CHECK_THROWS(read_wav(dir / "missing.wav"));
  fs::remove_all(dir);
}
