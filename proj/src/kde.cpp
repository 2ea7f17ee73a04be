#include "bu/kde.hpp"

#include <cmath>
#include <stdexcept>

namespace bu {

void validate(const KdeConfig& cfg) {
  if (!(cfg.band_width > 0.0)) throw std::invalid_argument("KDE band width must be positive");
  if (!(cfg.weight_floor > 0.0)) throw std::invalid_argument("KDE weight floor must be positive");
}

NormalizedBatch batch_normalize(const Batch& batch) {
  if (batch.cols() < 2) throw std::invalid_argument("batch_normalize needs at least two samples");
  NormalizedBatch out;
  out.mean = batch.rowwise().mean();
  out.samples = batch.colwise() - out.mean;
  out.stddev = (out.samples.array().square().rowwise().sum() / static_cast<double>(batch.cols()))
                   .sqrt()
                   .matrix();
  for (Eigen::Index d = 0; d < out.stddev.size(); ++d) {
    // Exact-constant dimensions have a tiny nonzero spread from rounding in the
    // mean; treat anything at rounding level as zero variance.
    const double scale = std::max(1.0, std::abs(out.mean(d)));
    if (out.stddev(d) <= 1e-12 * scale) {
      out.stddev(d) = 1.0;
      out.samples.row(d).setZero();
    } else {
      out.samples.row(d) /= out.stddev(d);
    }
  }
  return out;
}

Vector kde_density(const Batch& batch, double band_width) {
  const Eigen::Index m = batch.cols();
  if (m < 1) throw std::invalid_argument("kde_density needs a non-empty batch");
  if (!(band_width > 0.0)) throw std::invalid_argument("KDE band width must be positive");

  Vector k = Vector::Ones(m);  // self-terms
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double e = std::exp(-band_width * (batch.col(i) - batch.col(j)).squaredNorm());
      k(i) += e;
      k(j) += e;
    }
  }
  return k / static_cast<double>(m);
}

WeightVector kde_weights(const Batch& batch, const KdeConfig& cfg) {
  validate(cfg);
  WeightVector w;
  if (cfg.normalize_batch && batch.cols() >= 2) {
    w.densities = kde_density(batch_normalize(batch).samples, cfg.band_width);
  } else {
    w.densities = kde_density(batch, cfg.band_width);
  }
  w.weights = (w.densities.array() + cfg.weight_floor).inverse().matrix();
  return w;
}

}  // namespace bu
