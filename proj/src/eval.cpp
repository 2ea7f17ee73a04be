#include "bu/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "bu/numeric.hpp"
#include "bu/objectives.hpp"

namespace bu {

namespace {

void require_same_grid(const GridDensity& a, const GridDensity& b) {
  if (!(a.grid == b.grid) || a.values.size() != b.values.size() || a.values.size() != a.grid.cells()) {
    throw std::invalid_argument("grid densities are defined on different grids");
  }
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void validate(const EvalGrid& grid) {
  if (grid.resolution < 2) throw std::invalid_argument("grid resolution must be at least 2");
  if (!(grid.hi > grid.lo)) throw std::invalid_argument("grid range is empty");
}

double GridDensity::mass() const {
  return compensated_sum(values) * grid.cell_area();
}

Batch grid_points(const EvalGrid& grid) {
  validate(grid);
  Batch pts(2, static_cast<Eigen::Index>(grid.cells()));
  for (std::size_t iy = 0; iy < grid.resolution; ++iy) {
    for (std::size_t ix = 0; ix < grid.resolution; ++ix) {
      const auto c = static_cast<Eigen::Index>(iy * grid.resolution + ix);
      pts(0, c) = grid.centre(ix);
      pts(1, c) = grid.centre(iy);
    }
  }
  return pts;
}

GridPdf grid_pdf(const AeModel& model, const EvalGrid& grid) {
  if (model.input_dim() != 2) {
    throw std::invalid_argument("grid_pdf needs a 2-D model, got input dimension " +
                                std::to_string(model.input_dim()));
  }
  const Vector scores = anomaly_scores(model, grid_points(grid));
  GridPdf pdf;
  pdf.scores.assign(scores.data(), scores.data() + scores.size());
  const double a_min = scores.minCoeff();
  pdf.density.grid = grid;
  pdf.density.values.resize(pdf.scores.size());
  CompensatedSum z;
  for (std::size_t c = 0; c < pdf.scores.size(); ++c) {
    pdf.density.values[c] = std::exp(-(pdf.scores[c] - a_min));
    z.add(pdf.density.values[c]);
  }
  const double shifted_z = z.value() * grid.cell_area();
  for (auto& v : pdf.density.values) v /= shifted_z;
  pdf.log_normalizer = std::log(shifted_z) - a_min;
  return pdf;
}

GridDensity oracle_density(OracleKind kind, const EvalGrid& grid, double radius) {
  validate(grid);
  GridDensity d;
  d.grid = grid;
  d.values.assign(grid.cells(), 0.0);
  const double h = grid.step();
  for (std::size_t iy = 0; iy < grid.resolution; ++iy) {
    for (std::size_t ix = 0; ix < grid.resolution; ++ix) {
      const double r = std::hypot(grid.centre(ix), grid.centre(iy));
      if (r > radius) continue;
      double v = 1.0;
      if (kind == OracleKind::annulus_p) {
        // Mean of 1/r over a square cell of side h centred on the origin: 4 asinh(1) / h.
        v = r < 1e-9 * h ? 4.0 * std::asinh(1.0) / h : 1.0 / r;
      }
      d.values[iy * grid.resolution + ix] = v;
    }
  }
  const double mass = d.mass();
  if (!(mass > 0.0)) throw std::invalid_argument("oracle support does not intersect the grid");
  for (auto& v : d.values) v /= mass;
  return d;
}

double grid_kld(const GridDensity& p, const GridDensity& q) {
  require_same_grid(p, q);
  CompensatedSum s;
  for (std::size_t c = 0; c < p.values.size(); ++c) {
    const double pc = p.values[c];
    if (pc <= 0.0) continue;
    s.add(pc * std::log(pc / std::max(q.values[c], 1e-300)));
  }
  return s.value() * p.grid.cell_area();
}

double interior_contrast(const GridDensity& q, double radius) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  const auto& g = q.grid;
  for (std::size_t iy = 0; iy < g.resolution; ++iy) {
    for (std::size_t ix = 0; ix < g.resolution; ++ix) {
      if (std::hypot(g.centre(ix), g.centre(iy)) > radius) continue;
      const double v = q.values[iy * g.resolution + ix];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > 0.0)) throw std::invalid_argument("no positive grid cells inside the radius");
  return hi / lo;
}

Decision decide(double score, const DecisionConfig& cfg) {
  return score >= cfg.threshold ? Decision::anomaly : Decision::normal;
}

double sequence_score(std::span<const double> frame_scores) {
  if (frame_scores.empty()) throw std::invalid_argument("sequence has no frames");
  return *std::max_element(frame_scores.begin(), frame_scores.end());
}

Decision decide(std::span<const double> frame_scores, const DecisionConfig& cfg) {
  if (cfg.mode == DecisionMode::max_over_sequence) return decide(sequence_score(frame_scores), cfg);
  if (frame_scores.empty()) throw std::invalid_argument("sequence has no frames");
  for (double s : frame_scores) {
    if (decide(s, cfg) == Decision::anomaly) return Decision::anomaly;
  }
  return Decision::normal;
}

double auc(std::span<const double> normal_scores, std::span<const double> anomaly_scores) {
  if (normal_scores.empty() || anomaly_scores.empty()) {
    throw std::invalid_argument("auc needs non-empty normal and anomaly score lists");
  }
  struct Item {
    double score;
    bool anomalous;
  };
  std::vector<Item> items;
  items.reserve(normal_scores.size() + anomaly_scores.size());
  for (double s : normal_scores) items.push_back({s, false});
  for (double s : anomaly_scores) items.push_back({s, true});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  // Sum of (1-based, tie-averaged) ranks of anomalous items.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    std::size_t anomalous = 0;
    while (j < items.size() && items[j].score == items[i].score) {
      anomalous += items[j].anomalous ? 1 : 0;
      ++j;
    }
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += mean_rank * static_cast<double>(anomalous);
    i = j;
  }
  const auto na = static_cast<double>(anomaly_scores.size());
  const auto nn = static_cast<double>(normal_scores.size());
  return (rank_sum - na * (na + 1.0) / 2.0) / (na * nn);
}

std::vector<RocPoint> roc_curve(std::span<const double> normal_scores, std::span<const double> anomaly_scores) {
  if (normal_scores.empty() || anomaly_scores.empty()) {
    throw std::invalid_argument("roc_curve needs non-empty normal and anomaly score lists");
  }
  std::vector<double> n(normal_scores.begin(), normal_scores.end());
  std::vector<double> a(anomaly_scores.begin(), anomaly_scores.end());
  std::sort(n.begin(), n.end(), std::greater<>());
  std::sort(a.begin(), a.end(), std::greater<>());
  std::vector<double> thresholds(n);
  thresholds.insert(thresholds.end(), a.begin(), a.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<RocPoint> roc;
  roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t in = 0;
  std::size_t ia = 0;
  for (double t : thresholds) {
    while (in < n.size() && n[in] >= t) ++in;
    while (ia < a.size() && a[ia] >= t) ++ia;
    roc.push_back({t, static_cast<double>(ia) / static_cast<double>(a.size()),
                   static_cast<double>(in) / static_cast<double>(n.size())});
  }
  return roc;
}

double roc_area(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    area += 0.5 * (roc[i].tpr + roc[i - 1].tpr) * (roc[i].fpr - roc[i - 1].fpr);
  }
  return area;
}

void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> roc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "threshold,tpr,fpr\n";
  for (const auto& p : roc) out << fmt_double(p.threshold) << ',' << fmt_double(p.tpr) << ',' << fmt_double(p.fpr) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_grid_csv(const std::filesystem::path& path, const GridPdf& pdf) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& g = pdf.density.grid;
  out << "x1,x2,density,score\n";
  for (std::size_t iy = 0; iy < g.resolution; ++iy) {
    for (std::size_t ix = 0; ix < g.resolution; ++ix) {
      const std::size_t c = iy * g.resolution + ix;
      out << fmt_double(g.centre(ix)) << ',' << fmt_double(g.centre(iy)) << ','
          << fmt_double(pdf.density.values[c]) << ',' << fmt_double(pdf.scores[c]) << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_pgm(const std::filesystem::path& path, const EvalGrid& grid, std::span<const double> values) {
  if (values.size() != grid.cells()) throw std::invalid_argument("value count does not match the grid");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn;
  const double span = *mx - *mn;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << grid.resolution << ' ' << grid.resolution << "\n255\n";
  for (std::size_t row = 0; row < grid.resolution; ++row) {
    const std::size_t iy = grid.resolution - 1 - row;
    for (std::size_t ix = 0; ix < grid.resolution; ++ix) {
      const double v = values[iy * grid.resolution + ix];
      const double scaled = span > 0.0 ? (v - lo) / span * 255.0 : 0.0;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace bu
