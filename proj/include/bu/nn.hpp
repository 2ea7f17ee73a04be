#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace bu {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A mini-batch of feature vectors, one sample per column (D x M).
using Batch = Eigen::MatrixXd;

enum class Activation : std::uint8_t { sigmoid = 0, relu = 1, identity = 2 };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct LayerSpec {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  Activation activation = Activation::identity;
};

/// Encoder and decoder layer lists. The encoder output is the latent code.
struct AeArchitecture {
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;
};

/// 2 / 20, 10, 20 / 2 with sigmoid everywhere except the decoder output.
AeArchitecture verification_architecture();

/// Encoder: input layer, `hidden_layers` hidden layers of `hidden_units`, output of
/// `latent_dim`. The decoder mirrors it. ReLU on every layer but the final one.
AeArchitecture fcn_architecture(std::size_t input_dim, std::size_t hidden_layers,
                                std::size_t hidden_units, std::size_t latent_dim);

/// Throws std::invalid_argument if layer dimensions do not chain.
void validate(const AeArchitecture& arch);

struct Layer {
  LayerSpec spec;
  Matrix weight;  // out_dim x in_dim
  Vector bias;    // out_dim
};

/// Dense autoencoder. Layers are stored encoder-first; the first
/// `encoder_depth()` layers form the encoder.
class AeModel {
 public:
  AeModel(std::vector<Layer> layers, std::size_t encoder_depth);

  std::size_t input_dim() const { return layers_.front().spec.in_dim; }
  std::size_t latent_dim() const { return layers_[encoder_depth_ - 1].spec.out_dim; }
  std::size_t encoder_depth() const { return encoder_depth_; }
  std::size_t parameter_count() const;

  std::span<const Layer> layers() const { return layers_; }
  std::span<Layer> layers() { return layers_; }
  std::span<const Layer> encoder() const { return std::span(layers_).first(encoder_depth_); }
  std::span<const Layer> decoder() const { return std::span(layers_).subspan(encoder_depth_); }

  AeArchitecture architecture() const;

  /// Flat views over every parameter array: W0, b0, W1, b1, ...
  std::vector<std::span<double>> parameter_views();

  friend bool operator==(const AeModel& a, const AeModel& b);

 private:
  std::vector<Layer> layers_;
  std::size_t encoder_depth_;
};

/// Gradient arrays congruent with an AeModel.
struct GradientSet {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  static GradientSet zeros_like(const AeModel& model);

  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double scale);

  std::vector<std::span<const double>> views() const;
  bool congruent_with(const AeModel& model) const;
  double max_abs() const;
};

/// Pre- and post-activation values of every layer for one batched forward.
/// post[0] is the input; post[k + 1] is the output of layer k.
struct ForwardCache {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;

  std::size_t batch_size() const { return post.empty() ? 0 : post.front().cols(); }
};

struct ForwardResult {
  Batch reconstruction;
  ForwardCache cache;
};

AeModel glorot_init(const AeArchitecture& arch, std::uint64_t seed);

/// Batched forward pass; column j of the result reconstructs column j of `x`.
ForwardResult forward(const AeModel& model, const Batch& x);

/// Forward pass without keeping the cache.
Batch reconstruct(const AeModel& model, const Batch& x);

/// Gradient of a loss with respect to every parameter, summed over the batch,
/// given dLoss/dReconstruction for each column.
GradientSet backward(const AeModel& model, const ForwardCache& cache, const Batch& upstream);

}  // namespace bu
