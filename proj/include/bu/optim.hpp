#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "bu/nn.hpp"

namespace bu {

struct AmsGradConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double delta = 1e-8;
};

/// AMSGrad moments, one flat array per parameter array.
///
/// Update for gradient g at step t (1-based):
///   m <- b1 m + (1 - b1) g
///   v <- b2 v + (1 - b2) g^2
///   v_hat <- max(v_hat, v)
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v_hat) + delta)
/// Only the first moment is bias-corrected.
struct AmsGradState {
  AmsGradConfig hyper;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::vector<std::vector<double>> v_hat;

  AmsGradState() = default;
  AmsGradState(std::span<const std::size_t> sizes, AmsGradConfig cfg = {});

  static AmsGradState for_model(const AeModel& model, AmsGradConfig cfg = {});
};

void amsgrad_step(AmsGradState& state, std::span<const std::span<double>> params,
                  std::span<const std::span<const double>> grads, double learning_rate);

void amsgrad_step(AmsGradState& state, AeModel& model, const GradientSet& grads, double learning_rate);

struct ConstantRate {
  double rate = 1e-3;
};

/// `base_rate` until `hold_epochs`, then linear down to base_rate / final_divisor
/// at `end_epoch`, constant afterwards.
struct WarmThenLinear {
  double base_rate = 1e-4;
  std::size_t hold_epochs = 100;
  std::size_t end_epoch = 200;
  double final_divisor = 100.0;
};

using LrSchedule = std::variant<ConstantRate, WarmThenLinear>;

void validate(const LrSchedule& schedule);
double lr_at(const LrSchedule& schedule, std::size_t epoch);

}  // namespace bu
