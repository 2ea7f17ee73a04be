#include "bu/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace bu {

static_assert(std::endian::native == std::endian::little, "model format assumes a little-endian host");

namespace {

constexpr std::array<char, 4> kMagic{'B', 'U', 'A', 'E'};
constexpr std::uint32_t kMaxDim = 1u << 20;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw std::runtime_error("model stream truncated");
  }
  return value;
}

}  // namespace

void write_model(std::ostream& out, const AeModel& model) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kModelFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.encoder().size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.decoder().size()));
  for (const auto& l : model.layers()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.spec.in_dim));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.spec.out_dim));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(l.spec.activation));
  }
  for (const auto& l : model.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put<double>(out, l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) put<double>(out, l.bias(r));
  }
  if (!out) throw std::runtime_error("failed writing model stream");
}

AeModel read_model(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw std::runtime_error("not a model file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kModelFormatVersion) {
    throw std::runtime_error("unsupported model format version " + std::to_string(version));
  }
  const auto n_enc = get<std::uint32_t>(in);
  const auto n_dec = get<std::uint32_t>(in);
  if (n_enc == 0 || n_dec == 0 || n_enc + n_dec > 1024) {
    throw std::runtime_error("implausible layer counts in model file");
  }
  std::vector<Layer> layers;
  for (std::uint32_t k = 0; k < n_enc + n_dec; ++k) {
    LayerSpec s;
    s.in_dim = get<std::uint32_t>(in);
    s.out_dim = get<std::uint32_t>(in);
    const auto act = get<std::uint8_t>(in);
    if (act > 2) throw std::runtime_error("unknown activation code in model file");
    if (s.in_dim == 0 || s.out_dim == 0 || s.in_dim > kMaxDim || s.out_dim > kMaxDim) {
      throw std::runtime_error("implausible layer dimensions in model file");
    }
    s.activation = static_cast<Activation>(act);
    layers.push_back({s, Matrix(s.out_dim, s.in_dim), Vector(s.out_dim)});
  }
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = get<double>(in);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = get<double>(in);
  }
  return AeModel(std::move(layers), n_enc);
}

void save_model(const std::filesystem::path& path, const AeModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_model(out, model);
}

AeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model " + path.string());
  return read_model(in);
}

}  // namespace bu
