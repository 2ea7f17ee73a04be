#pragma once

#include "bu/nn.hpp"

namespace bu {

struct KdeConfig {
  /// Kernel exp(-band_width * ||x - y||^2); larger means narrower.
  double band_width = 1.0;
  double weight_floor = 1e-6;
  bool normalize_batch = false;
};

void validate(const KdeConfig& cfg);

struct NormalizedBatch {
  Batch samples;
  Vector mean;
  Vector stddev;  // population convention; zero-variance dimensions report 1
};

/// Per-dimension standardization to zero mean and unit population variance.
NormalizedBatch batch_normalize(const Batch& batch);

/// Gaussian KDE evaluated at each batch member over the batch itself,
/// self-term included: K(x_i) = (1/M) sum_j exp(-band_width ||x_i - x_j||^2).
Vector kde_density(const Batch& batch, double band_width);

struct WeightVector {
  Vector weights;    // 1 / (K + floor)
  Vector densities;  // K
};

/// Inverse-density sample weights. Weights depend on inputs only.
WeightVector kde_weights(const Batch& batch, const KdeConfig& cfg);

}  // namespace bu
