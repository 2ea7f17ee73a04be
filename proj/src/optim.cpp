#include "bu/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bu {

AmsGradState::AmsGradState(std::span<const std::size_t> sizes, AmsGradConfig cfg) : hyper(cfg) {
  for (auto n : sizes) {
    m.emplace_back(n, 0.0);
    v.emplace_back(n, 0.0);
    v_hat.emplace_back(n, 0.0);
  }
}

AmsGradState AmsGradState::for_model(const AeModel& model, AmsGradConfig cfg) {
  std::vector<std::size_t> sizes;
  for (const auto& l : model.layers()) {
    sizes.push_back(static_cast<std::size_t>(l.weight.size()));
    sizes.push_back(static_cast<std::size_t>(l.bias.size()));
  }
  return AmsGradState(sizes, cfg);
}

void amsgrad_step(AmsGradState& state, std::span<const std::span<double>> params,
                  std::span<const std::span<const double>> grads, double learning_rate) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("amsgrad: parameter, gradient and state array counts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() || params[k].size() != state.m[k].size()) {
      throw std::invalid_argument("amsgrad: array " + std::to_string(k) + " has mismatched shape");
    }
  }

  const auto [b1, b2, delta] = state.hyper;
  ++state.step;
  const double correction = 1.0 - std::pow(b1, static_cast<double>(state.step));
  // b1 == 0 makes the correction exactly 1.
  const double m_scale = correction > 0.0 ? 1.0 / correction : 1.0;

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    auto& vh = state.v_hat[k];
    const auto g = grads[k];
    auto p = params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      vh[i] = std::max(vh[i], v[i]);
      p[i] -= learning_rate * (m[i] * m_scale) / (std::sqrt(vh[i]) + delta);
    }
  }
}

void amsgrad_step(AmsGradState& state, AeModel& model, const GradientSet& grads, double learning_rate) {
  if (!grads.congruent_with(model)) {
    throw std::invalid_argument("amsgrad: gradient set is not congruent with the model");
  }
  const auto params = model.parameter_views();
  const auto g = grads.views();
  amsgrad_step(state, params, g, learning_rate);
}

void validate(const LrSchedule& schedule) {
  if (const auto* c = std::get_if<ConstantRate>(&schedule)) {
    if (!(c->rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    return;
  }
  const auto& w = std::get<WarmThenLinear>(schedule);
  if (!(w.base_rate > 0.0) || !(w.final_divisor > 0.0)) {
    throw std::invalid_argument("learning rate and final divisor must be positive");
  }
  if (w.hold_epochs >= w.end_epoch) {
    throw std::invalid_argument("hold_epochs must be smaller than end_epoch");
  }
}

double lr_at(const LrSchedule& schedule, std::size_t epoch) {
  if (const auto* c = std::get_if<ConstantRate>(&schedule)) return c->rate;
  const auto& w = std::get<WarmThenLinear>(schedule);
  const double final_rate = w.base_rate / w.final_divisor;
  if (epoch < w.hold_epochs) return w.base_rate;
  if (epoch >= w.end_epoch) return final_rate;
  const double frac = static_cast<double>(epoch - w.hold_epochs) /
                      static_cast<double>(w.end_epoch - w.hold_epochs);
  return w.base_rate + (final_rate - w.base_rate) * frac;
}

}  // namespace bu
