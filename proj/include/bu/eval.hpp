#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "bu/nn.hpp"

namespace bu {

/// Square grid over [lo, hi]^2 evaluated at cell centres.
struct EvalGrid {
  double lo = -3.0;
  double hi = 3.0;
  std::size_t resolution = 201;

  double step() const { return (hi - lo) / static_cast<double>(resolution); }
  double cell_area() const { return step() * step(); }
  double centre(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * step(); }
  std::size_t cells() const { return resolution * resolution; }

  friend bool operator==(const EvalGrid&, const EvalGrid&) = default;
};

void validate(const EvalGrid& grid);

/// Cell values in row-major order: index = iy * resolution + ix, where x1 is
/// the column coordinate and x2 the row coordinate.
struct GridDensity {
  EvalGrid grid;
  std::vector<double> values;

  /// Riemann sum of values x cell area.
  double mass() const;
};

/// Boltzmann density of an AE on the grid: exp(-A) / Z with Z integrated numerically.
struct GridPdf {
  GridDensity density;
  std::vector<double> scores;  // A(x) per cell
  double log_normalizer = 0.0; // ln Z
};

/// 2 x cells() batch of cell centres, same order as GridDensity::values.
Batch grid_points(const EvalGrid& grid);

GridPdf grid_pdf(const AeModel& model, const EvalGrid& grid);

enum class OracleKind {
  annulus_p,       // density of the normal annulus data, proportional to 1/r on r <= 2
  annulus_uniform  // constant on r <= 2
};

/// Oracle density normalized on the grid. For annulus_p, the cell containing the
/// origin uses the exact cell average of 1/r instead of its (infinite) centre value.
GridDensity oracle_density(OracleKind kind, const EvalGrid& grid, double radius = 2.0);

/// KL divergence sum p ln(p/q) * cell area, with 0 ln 0 = 0 and q floored at 1e-300.
double grid_kld(const GridDensity& p, const GridDensity& q);

/// max(q) / min(q) over cells whose centre lies within `radius` of the origin.
double interior_contrast(const GridDensity& q, double radius);

// ---------------------------------------------------------------------------
// Decisions and ROC

enum class Decision { normal, anomaly };
enum class DecisionMode { frame_wise, max_over_sequence };

struct DecisionConfig {
  double threshold = 0.0;
  DecisionMode mode = DecisionMode::frame_wise;
};

/// Anomaly iff score >= threshold.
Decision decide(double score, const DecisionConfig& cfg);

/// A sequence is anomalous if any frame reaches the threshold; in
/// max_over_sequence mode the maximum frame score is compared once.
Decision decide(std::span<const double> frame_scores, const DecisionConfig& cfg);

/// max_t A(x_t).
double sequence_score(std::span<const double> frame_scores);

/// P(anomaly score > normal score) + 0.5 P(equal), via ranks. Throws on empty input.
double auc(std::span<const double> normal_scores, std::span<const double> anomaly_scores);

struct RocPoint {
  double threshold;
  double tpr;
  double fpr;
};

/// One point per distinct score (decision score >= threshold), plus the
/// (+inf, 0, 0) end, ordered by decreasing threshold.
std::vector<RocPoint> roc_curve(std::span<const double> normal_scores, std::span<const double> anomaly_scores);

/// Trapezoidal area under a roc_curve.
double roc_area(std::span<const RocPoint> roc);

// ---------------------------------------------------------------------------
// Exports

/// CSV with header "threshold,tpr,fpr".
void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> roc);

/// CSV with header "x1,x2,density,score", one line per cell.
void write_grid_csv(const std::filesystem::path& path, const GridPdf& pdf);

/// Binary 8-bit PGM (P5). Values are min-max scaled to 0..255 (a constant
/// image maps to 0); the top image row is the largest x2.
void write_pgm(const std::filesystem::path& path, const EvalGrid& grid, std::span<const double> values);

}  // namespace bu
