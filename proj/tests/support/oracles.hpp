#pragma once

// Test-only reference computations. Nothing here calls backward() or the
// library's gradient code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "bu/nn.hpp"

namespace bu::test {

/// Central finite-difference gradient of `loss` w.r.t. every parameter,
/// returned as flat arrays in parameter_views() order.
inline std::vector<std::vector<double>> finite_difference(AeModel model, const std::function<double(const AeModel&)>& loss,
                                                          double step = 1e-5) {
  std::vector<std::vector<double>> out;
  auto views = model.parameter_views();
  for (auto& v : views) {
    std::vector<double> g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + step;
      const double up = loss(model);
      v[i] = saved - step;
      const double down = loss(model);
      v[i] = saved;
      g[i] = (up - down) / (2.0 * step);
    }
    out.push_back(std::move(g));
  }
  return out;
}

struct GradCheck {
  double worst_relative = 0.0;
  double worst_absolute = 0.0;
  std::size_t failures = 0;
  std::size_t checked = 0;
};

/// Entry passes if |a - n| <= abs_floor or |a - n| / max(|a|, |n|) <= rel_tol.
inline GradCheck compare_gradients(const std::vector<std::span<const double>>& analytic,
                                   const std::vector<std::vector<double>>& numeric, double rel_tol = 1e-4,
                                   double abs_floor = 1e-8) {
  GradCheck r;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    for (std::size_t i = 0; i < analytic[k].size(); ++i) {
      const double a = analytic[k][i];
      const double n = numeric[k][i];
      const double diff = std::abs(a - n);
      ++r.checked;
      r.worst_absolute = std::max(r.worst_absolute, diff);
      const double scale = std::max(std::abs(a), std::abs(n));
      const double rel = scale > 0.0 ? diff / scale : 0.0;
      // Report relative error only where the gradient is not buried in step noise.
      if (scale >= 1e-4) r.worst_relative = std::max(r.worst_relative, rel);
      if (diff > abs_floor && rel > rel_tol) ++r.failures;
    }
  }
  return r;
}

/// Random chained architecture with input dimension <= max_dim.
inline AeArchitecture random_architecture(std::mt19937_64& rng, std::size_t max_dim = 8) {
  std::uniform_int_distribution<std::size_t> dim(1, max_dim);
  std::uniform_int_distribution<int> act(0, 2);
  std::uniform_int_distribution<int> depth(1, 2);
  const std::size_t d = dim(rng);
  AeArchitecture arch;
  std::size_t prev = d;
  const int enc = depth(rng);
  const int dec = depth(rng);
  for (int k = 0; k < enc; ++k) {
    const std::size_t out = dim(rng);
    arch.encoder.push_back({prev, out, static_cast<Activation>(act(rng))});
    prev = out;
  }
  for (int k = 0; k < dec; ++k) {
    const std::size_t out = k + 1 == dec ? d : dim(rng);
    arch.decoder.push_back({prev, out, k + 1 == dec ? Activation::identity : static_cast<Activation>(act(rng))});
    prev = out;
  }
  return arch;
}

/// Glorot model with random (non-zero) biases so every code path is exercised.
inline AeModel random_model(std::mt19937_64& rng, std::size_t max_dim = 8) {
  auto model = glorot_init(random_architecture(rng, max_dim), rng());
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& l : model.layers()) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = n(rng);
  }
  return model;
}

inline Batch random_batch(std::mt19937_64& rng, std::size_t dim, std::size_t count, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Batch b(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    for (Eigen::Index i = 0; i < b.rows(); ++i) b(i, j) = n(rng);
  }
  return b;
}

/// Objective value recomputed from reconstructions with plain loops.
/// kind: 0 = RE, 1 = SNP, 2 = BU (inverse-KDE weights, floor 1e-6, no normalization).
inline double reference_objective(const AeModel& m, const Batch& xn, const Batch& xa, int kind, double clip,
                                  double band_width) {
  const Batch rn = reconstruct(m, xn);
  const auto mn = xn.cols();
  std::vector<double> w(static_cast<std::size_t>(mn), 1.0);
  if (kind == 2) {
    for (Eigen::Index i = 0; i < mn; ++i) {
      double k = 0.0;
      for (Eigen::Index j = 0; j < mn; ++j) k += std::exp(-band_width * (xn.col(i) - xn.col(j)).squaredNorm());
      w[static_cast<std::size_t>(i)] = 1.0 / (k / static_cast<double>(mn) + 1e-6);
    }
  }
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i < mn; ++i) {
    num += w[static_cast<std::size_t>(i)] * (xn.col(i) - rn.col(i)).squaredNorm();
    den += w[static_cast<std::size_t>(i)];
  }
  double loss = num / den;
  if (kind != 0) {
    const Batch ra = reconstruct(m, xa);
    double la = 0.0;
    for (Eigen::Index j = 0; j < xa.cols(); ++j) la += clip * std::tanh((xa.col(j) - ra.col(j)).squaredNorm() / clip);
    loss -= la / static_cast<double>(xa.cols());
  }
  return loss;
}

/// Brute-force AUC: count pairs, ties as one half.
inline double pairwise_auc(std::span<const double> normal, std::span<const double> anomaly) {
  double wins = 0.0;
  for (double a : anomaly) {
    for (double n : normal) wins += a > n ? 1.0 : (a == n ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(normal.size() * anomaly.size());
}

}  // namespace bu::test
