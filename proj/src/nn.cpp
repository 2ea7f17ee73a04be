#include "bu/nn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace bu {

namespace {

void apply_activation(Activation a, const Matrix& pre, Matrix& post) {
  switch (a) {
    case Activation::sigmoid:
      post = (1.0 + (-pre.array()).exp()).inverse().matrix();
      break;
    case Activation::relu:
      post = pre.cwiseMax(0.0);
      break;
    case Activation::identity:
      post = pre;
      break;
  }
}

// Multiplies `grad` (dL/dpost) in place by dpost/dpre.
void apply_activation_derivative(Activation a, const Matrix& pre, const Matrix& post, Matrix& grad) {
  switch (a) {
    case Activation::sigmoid:
      grad.array() *= post.array() * (1.0 - post.array());
      break;
    case Activation::relu:
      grad.array() *= (pre.array() > 0.0).cast<double>();
      break;
    case Activation::identity:
      break;
  }
}

std::string dim_error(const char* what, std::size_t expected, std::size_t got) {
  return std::string(what) + ": expected dimension " + std::to_string(expected) + ", got " +
         std::to_string(got);
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::relu:
      return "relu";
    case Activation::identity:
      return "identity";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view name) {
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

AeArchitecture verification_architecture() {
  return AeArchitecture{
      .encoder = {{2, 20, Activation::sigmoid}, {20, 10, Activation::sigmoid}},
      .decoder = {{10, 20, Activation::sigmoid}, {20, 2, Activation::identity}},
  };
}

AeArchitecture fcn_architecture(std::size_t input_dim, std::size_t hidden_layers,
                                std::size_t hidden_units, std::size_t latent_dim) {
  AeArchitecture arch;
  arch.encoder.push_back({input_dim, hidden_units, Activation::relu});
  for (std::size_t h = 0; h < hidden_layers; ++h) {
    arch.encoder.push_back({hidden_units, hidden_units, Activation::relu});
  }
  arch.encoder.push_back({hidden_units, latent_dim, Activation::relu});

  arch.decoder.push_back({latent_dim, hidden_units, Activation::relu});
  for (std::size_t h = 0; h < hidden_layers; ++h) {
    arch.decoder.push_back({hidden_units, hidden_units, Activation::relu});
  }
  arch.decoder.push_back({hidden_units, input_dim, Activation::identity});
  return arch;
}

void validate(const AeArchitecture& arch) {
  if (arch.encoder.empty() || arch.decoder.empty()) {
    throw std::invalid_argument("autoencoder needs at least one encoder and one decoder layer");
  }
  std::vector<LayerSpec> all(arch.encoder);
  all.insert(all.end(), arch.decoder.begin(), arch.decoder.end());
  for (std::size_t k = 0; k < all.size(); ++k) {
    if (all[k].in_dim == 0 || all[k].out_dim == 0) {
      throw std::invalid_argument("layer " + std::to_string(k) + " has a zero dimension");
    }
    if (k > 0 && all[k - 1].out_dim != all[k].in_dim) {
      throw std::invalid_argument("layer " + std::to_string(k) + " input " +
                                  std::to_string(all[k].in_dim) + " does not match previous output " +
                                  std::to_string(all[k - 1].out_dim));
    }
  }
  if (all.front().in_dim != all.back().out_dim) {
    throw std::invalid_argument("decoder output dimension must equal encoder input dimension");
  }
}

AeModel::AeModel(std::vector<Layer> layers, std::size_t encoder_depth)
    : layers_(std::move(layers)), encoder_depth_(encoder_depth) {
  if (encoder_depth_ == 0 || encoder_depth_ >= layers_.size()) {
    throw std::invalid_argument("encoder depth must leave at least one decoder layer");
  }
  validate(architecture());
  for (const auto& l : layers_) {
    if (static_cast<std::size_t>(l.weight.rows()) != l.spec.out_dim ||
        static_cast<std::size_t>(l.weight.cols()) != l.spec.in_dim ||
        static_cast<std::size_t>(l.bias.size()) != l.spec.out_dim) {
      throw std::invalid_argument("layer parameter shape disagrees with its spec");
    }
  }
}

std::size_t AeModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

AeArchitecture AeModel::architecture() const {
  AeArchitecture arch;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    (k < encoder_depth_ ? arch.encoder : arch.decoder).push_back(layers_[k].spec);
  }
  return arch;
}

std::vector<std::span<double>> AeModel::parameter_views() {
  std::vector<std::span<double>> views;
  views.reserve(layers_.size() * 2);
  for (auto& l : layers_) {
    views.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    views.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return views;
}

bool operator==(const AeModel& a, const AeModel& b) {
  if (a.encoder_depth_ != b.encoder_depth_ || a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t k = 0; k < a.layers_.size(); ++k) {
    const auto& la = a.layers_[k];
    const auto& lb = b.layers_[k];
    if (la.spec.in_dim != lb.spec.in_dim || la.spec.out_dim != lb.spec.out_dim ||
        la.spec.activation != lb.spec.activation) {
      return false;
    }
    if (la.weight != lb.weight || la.bias != lb.bias) return false;
  }
  return true;
}

GradientSet GradientSet::zeros_like(const AeModel& model) {
  GradientSet g;
  for (const auto& l : model.layers()) {
    g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector::Zero(l.bias.size()));
  }
  return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (other.weight.size() != weight.size()) throw std::invalid_argument("gradient sets differ in depth");
  for (std::size_t k = 0; k < weight.size(); ++k) {
    weight[k] += other.weight[k];
    bias[k] += other.bias[k];
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double scale) {
  for (std::size_t k = 0; k < weight.size(); ++k) {
    weight[k] *= scale;
    bias[k] *= scale;
  }
  return *this;
}

std::vector<std::span<const double>> GradientSet::views() const {
  std::vector<std::span<const double>> v;
  v.reserve(weight.size() * 2);
  for (std::size_t k = 0; k < weight.size(); ++k) {
    v.emplace_back(weight[k].data(), static_cast<std::size_t>(weight[k].size()));
    v.emplace_back(bias[k].data(), static_cast<std::size_t>(bias[k].size()));
  }
  return v;
}

bool GradientSet::congruent_with(const AeModel& model) const {
  const auto layers = model.layers();
  if (weight.size() != layers.size() || bias.size() != layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (weight[k].rows() != layers[k].weight.rows() || weight[k].cols() != layers[k].weight.cols() ||
        bias[k].size() != layers[k].bias.size()) {
      return false;
    }
  }
  return true;
}

double GradientSet::max_abs() const {
  double m = 0.0;
  for (std::size_t k = 0; k < weight.size(); ++k) {
    if (weight[k].size() > 0) m = std::max(m, weight[k].cwiseAbs().maxCoeff());
    if (bias[k].size() > 0) m = std::max(m, bias[k].cwiseAbs().maxCoeff());
  }
  return m;
}

AeModel glorot_init(const AeArchitecture& arch, std::uint64_t seed) {
  validate(arch);
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  auto init = [&](const LayerSpec& spec) {
    const double bound = std::sqrt(6.0 / static_cast<double>(spec.in_dim + spec.out_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer l{spec, Matrix(spec.out_dim, spec.in_dim), Vector::Zero(spec.out_dim)};
    // Row-major fill order so the draw sequence matches the serialized layout.
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = dist(rng);
    }
    layers.push_back(std::move(l));
  };
  for (const auto& s : arch.encoder) init(s);
  for (const auto& s : arch.decoder) init(s);
  return AeModel(std::move(layers), arch.encoder.size());
}

ForwardResult forward(const AeModel& model, const Batch& x) {
  if (static_cast<std::size_t>(x.rows()) != model.input_dim()) {
    throw std::invalid_argument(dim_error("forward", model.input_dim(), x.rows()));
  }
  ForwardResult r;
  const auto layers = model.layers();
  r.cache.pre.resize(layers.size());
  r.cache.post.resize(layers.size() + 1);
  r.cache.post[0] = x;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    r.cache.pre[k].noalias() = layers[k].weight * r.cache.post[k];
    r.cache.pre[k].colwise() += layers[k].bias;
    apply_activation(layers[k].spec.activation, r.cache.pre[k], r.cache.post[k + 1]);
  }
  r.reconstruction = r.cache.post.back();
  return r;
}

Batch reconstruct(const AeModel& model, const Batch& x) {
  if (static_cast<std::size_t>(x.rows()) != model.input_dim()) {
    throw std::invalid_argument(dim_error("reconstruct", model.input_dim(), x.rows()));
  }
  Matrix h = x;
  for (const auto& l : model.layers()) {
    Matrix pre = l.weight * h;
    pre.colwise() += l.bias;
    apply_activation(l.spec.activation, pre, h);
  }
  return h;
}

GradientSet backward(const AeModel& model, const ForwardCache& cache, const Batch& upstream) {
  const auto layers = model.layers();
  if (cache.pre.size() != layers.size() || cache.post.size() != layers.size() + 1) {
    throw std::invalid_argument("forward cache depth does not match the model");
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (static_cast<std::size_t>(cache.pre[k].rows()) != layers[k].spec.out_dim ||
        static_cast<std::size_t>(cache.post[k].rows()) != layers[k].spec.in_dim) {
      throw std::invalid_argument("forward cache shapes do not match the model");
    }
  }
  if (upstream.rows() != cache.post.back().rows() || upstream.cols() != cache.post.back().cols()) {
    throw std::invalid_argument("upstream gradient shape does not match the reconstruction");
  }

  GradientSet g;
  g.weight.resize(layers.size());
  g.bias.resize(layers.size());
  Matrix delta = upstream;
  for (std::size_t k = layers.size(); k-- > 0;) {
    apply_activation_derivative(layers[k].spec.activation, cache.pre[k], cache.post[k + 1], delta);
    g.weight[k].noalias() = delta * cache.post[k].transpose();
    g.bias[k] = delta.rowwise().sum();
    if (k > 0) {
      Matrix next = layers[k].weight.transpose() * delta;
      delta = std::move(next);
    }
  }
  return g;
}

}  // namespace bu
