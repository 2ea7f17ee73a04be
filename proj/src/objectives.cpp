#include "bu/objectives.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bu/numeric.hpp"

namespace bu {

namespace {

void require_nonempty(const Batch& b, const char* what) {
  if (b.cols() < 1) throw std::invalid_argument(std::string(what) + " batch is empty");
}

double mean_of(const Vector& v) {
  return compensated_sum(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))) /
         static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::re:
      return "RE";
    case ObjectiveKind::snp:
      return "SNP";
    case ObjectiveKind::bu:
      return "BU";
  }
  return "?";
}

ObjectiveKind objective_from_string(std::string_view name) {
  if (name == "RE" || name == "re") return ObjectiveKind::re;
  if (name == "SNP" || name == "snp") return ObjectiveKind::snp;
  if (name == "BU" || name == "bu") return ObjectiveKind::bu;
  throw std::invalid_argument("unknown objective '" + std::string(name) + "' (expected RE, SNP or BU)");
}

void validate(const ObjectiveConfig& cfg) {
  if (cfg.kind != ObjectiveKind::re && !(cfg.clip > 0.0)) {
    throw std::invalid_argument("clipping parameter must be positive for SNP and BU");
  }
  if (cfg.kind == ObjectiveKind::bu) validate(cfg.kde);
}

double anomaly_score(const AeModel& model, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != model.input_dim()) {
    throw std::invalid_argument("anomaly_score: input dimension " + std::to_string(x.size()) +
                                " does not match model dimension " + std::to_string(model.input_dim()));
  }
  const Batch r = reconstruct(model, x);
  return (x - r.col(0)).squaredNorm();
}

Vector anomaly_scores(const AeModel& model, const Batch& x) {
  const Batch r = reconstruct(model, x);
  return (x - r).colwise().squaredNorm().transpose();
}

double clipped_mean(const Vector& scores, double clip) {
  if (scores.size() < 1) throw std::invalid_argument("anomaly batch is empty");
  if (!(clip > 0.0)) throw std::invalid_argument("clipping parameter must be positive");
  CompensatedSum s;
  for (Eigen::Index j = 0; j < scores.size(); ++j) s.add(clip * std::tanh(scores(j) / clip));
  return s.value() / static_cast<double>(scores.size());
}

double weighted_mean(const Vector& scores, const Vector& weights) {
  if (scores.size() != weights.size() || scores.size() < 1) {
    throw std::invalid_argument("weighted_mean: scores and weights must be non-empty and equal length");
  }
  CompensatedSum num;
  CompensatedSum den;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    num.add(weights(i) * scores(i));
    den.add(weights(i));
  }
  return num.value() / den.value();
}

LossReport loss_re(const AeModel& model, const Batch& normal) {
  require_nonempty(normal, "normal");
  LossReport r;
  r.normal_scores = anomaly_scores(model, normal);
  r.weights = Vector::Ones(normal.cols());
  r.normal_term = mean_of(r.normal_scores);
  r.total = r.normal_term;
  return r;
}

double loss_la(const AeModel& model, const Batch& anomaly, double clip) {
  require_nonempty(anomaly, "anomaly");
  return clipped_mean(anomaly_scores(model, anomaly), clip);
}

LossReport loss_snp(const AeModel& model, const Batch& normal, const Batch& anomaly, double clip) {
  require_nonempty(anomaly, "anomaly");
  LossReport r = loss_re(model, normal);
  r.anomaly_scores = anomaly_scores(model, anomaly);
  r.anomaly_term = clipped_mean(r.anomaly_scores, clip);
  r.total = r.normal_term - r.anomaly_term;
  return r;
}

LossReport loss_bu(const AeModel& model, const Batch& normal, const Batch& anomaly,
                   const ObjectiveConfig& cfg) {
  require_nonempty(normal, "normal");
  require_nonempty(anomaly, "anomaly");
  LossReport r;
  r.weights = kde_weights(normal, cfg.kde).weights;
  r.normal_scores = anomaly_scores(model, normal);
  r.normal_term = weighted_mean(r.normal_scores, r.weights);
  r.anomaly_scores = anomaly_scores(model, anomaly);
  r.anomaly_term = clipped_mean(r.anomaly_scores, cfg.clip);
  r.total = r.normal_term - r.anomaly_term;
  return r;
}

LossAndGradient weighted_loss_and_gradient(const AeModel& model, const Batch& normal,
                                           const Batch* anomaly, const Vector& weights,
                                           double clip) {
  require_nonempty(normal, "normal");
  if (weights.size() != normal.cols()) throw std::invalid_argument("one weight per normal sample required");

  LossAndGradient out;
  auto& r = out.report;
  r.weights = weights;

  // Normal term: sum_i (w_i / W) A_i, dA_i/drecon_i = 2 (recon_i - x_i).
  auto fn = forward(model, normal);
  const Batch residual_n = fn.reconstruction - normal;
  r.normal_scores = residual_n.colwise().squaredNorm().transpose();
  r.normal_term = weighted_mean(r.normal_scores, weights);
  double weight_total = 0.0;
  {
    CompensatedSum s;
    for (Eigen::Index i = 0; i < weights.size(); ++i) s.add(weights(i));
    weight_total = s.value();
  }
  Batch upstream_n = residual_n * (2.0 / weight_total);
  upstream_n.array().rowwise() *= weights.transpose().array();
  out.gradient = backward(model, fn.cache, upstream_n);
  r.total = r.normal_term;

  if (anomaly != nullptr) {
    require_nonempty(*anomaly, "anomaly");
    if (!(clip > 0.0)) throw std::invalid_argument("clipping parameter must be positive");
    // L_a = (1/M_a) sum_j clip tanh(A_j / clip); dL_a/dA_j = sech^2(A_j / clip) / M_a.
    auto fa = forward(model, *anomaly);
    const Batch residual_a = fa.reconstruction - *anomaly;
    r.anomaly_scores = residual_a.colwise().squaredNorm().transpose();
    r.anomaly_term = clipped_mean(r.anomaly_scores, clip);
    const double m_a = static_cast<double>(anomaly->cols());
    Vector coeff(anomaly->cols());
    for (Eigen::Index j = 0; j < coeff.size(); ++j) {
      const double t = std::tanh(r.anomaly_scores(j) / clip);
      coeff(j) = -(1.0 - t * t) * 2.0 / m_a;  // minus: the term is subtracted
    }
    Batch upstream_a = residual_a;
    upstream_a.array().rowwise() *= coeff.transpose().array();
    out.gradient += backward(model, fa.cache, upstream_a);
    r.total = r.normal_term - r.anomaly_term;
  }
  return out;
}

LossAndGradient loss_and_gradient(const AeModel& model, const Batch& normal, const Batch& anomaly,
                                  const ObjectiveConfig& cfg) {
  validate(cfg);
  require_nonempty(normal, "normal");
  switch (cfg.kind) {
    case ObjectiveKind::re:
      return weighted_loss_and_gradient(model, normal, nullptr, Vector::Ones(normal.cols()), cfg.clip);
    case ObjectiveKind::snp:
      return weighted_loss_and_gradient(model, normal, &anomaly, Vector::Ones(normal.cols()), cfg.clip);
    case ObjectiveKind::bu:
      return weighted_loss_and_gradient(model, normal, &anomaly, kde_weights(normal, cfg.kde).weights,
                                        cfg.clip);
  }
  throw std::logic_error("unhandled objective kind");
}

}  // namespace bu
