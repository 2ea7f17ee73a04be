#pragma once

#include <string_view>

#include "bu/kde.hpp"
#include "bu/nn.hpp"

namespace bu {

enum class ObjectiveKind { re, snp, bu };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind objective_from_string(std::string_view name);

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::re;
  double clip = 1.0;  // lambda in the tanh-clipped anomaly term
  KdeConfig kde;
};

void validate(const ObjectiveConfig& cfg);

struct LossReport {
  double total = 0.0;
  double normal_term = 0.0;
  double anomaly_term = 0.0;  // L_a, zero for RE
  Vector normal_scores;
  Vector anomaly_scores;
  Vector weights;  // normal-sample weights; all ones for RE and SNP
};

/// Squared reconstruction error ||x - D(E(x))||^2.
double anomaly_score(const AeModel& model, const Vector& x);

/// One score per batch column.
Vector anomaly_scores(const AeModel& model, const Batch& x);

/// Mean reconstruction error over the normal batch.
LossReport loss_re(const AeModel& model, const Batch& normal);

/// (1/M_a) sum_j clip * tanh(A_j / clip), in [0, clip].
double loss_la(const AeModel& model, const Batch& anomaly, double clip);
double clipped_mean(const Vector& scores, double clip);

LossReport loss_snp(const AeModel& model, const Batch& normal, const Batch& anomaly, double clip);

/// Inverse-density weighted mean of normal scores (self-normalized) minus L_a.
LossReport loss_bu(const AeModel& model, const Batch& normal, const Batch& anomaly,
                   const ObjectiveConfig& cfg);

/// Weighted mean sum_i w_i s_i / sum_i w_i.
double weighted_mean(const Vector& scores, const Vector& weights);

struct LossAndGradient {
  LossReport report;
  GradientSet gradient;
};

/// Loss and its exact parameter gradient for the configured objective.
/// `anomaly` is ignored for RE. Gradients accumulate in batch-index order.
LossAndGradient loss_and_gradient(const AeModel& model, const Batch& normal, const Batch& anomaly,
                                  const ObjectiveConfig& cfg);

/// Same, with caller-supplied normal-sample weights (BU semantics with fixed weights).
LossAndGradient weighted_loss_and_gradient(const AeModel& model, const Batch& normal,
                                           const Batch* anomaly, const Vector& weights,
                                           double clip);

}  // namespace bu
