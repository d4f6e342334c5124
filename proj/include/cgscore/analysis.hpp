#pragma once

// Statistics over score tables: rank correlations, label-noise detection
// curves, pruning orders, per-class distributions, and the random-matrix
// diagnostics for the inverse ~ 2I regime.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "cgscore/dataset.hpp"
#include "cgscore/errors.hpp"
#include "cgscore/kernel.hpp"
#include "cgscore/linalg.hpp"
#include "cgscore/multiclass.hpp"
#include "cgscore/rng.hpp"

namespace cgscore {

struct CorrelationResult {
  double spearman = 0.0;
  double pearson = 0.0;
  std::size_t n = 0;
};

struct DetectionCurve {
  std::vector<double> fractions;
  std::vector<double> recall;
  double auc = 0.0;
};

// ---------------------------------------------------------------------------
// Correlations.
// ---------------------------------------------------------------------------

// 1-based fractional ranks; ties receive the average of their rank span.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvalidInput("pearson: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw InvalidInput("pearson: need at least 2 points");
  const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) throw InvalidInput("pearson: zero-variance input");
  return cov / std::sqrt(var_a * var_b);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvalidInput("spearman: length mismatch");
  return pearson(average_ranks(a), average_ranks(b));
}

inline CorrelationResult correlate(const std::vector<double>& a, const std::vector<double>& b) {
  return {spearman(a, b), pearson(a, b), a.size()};
}

// ---------------------------------------------------------------------------
// Label-noise detection.
// ---------------------------------------------------------------------------

inline std::vector<double> default_fraction_grid(std::size_t points = 100) {
  if (points < 1) throw InvalidInput("fraction grid needs at least 1 point");
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k)
    grid[k] = static_cast<double>(k + 1) / static_cast<double>(points);
  return grid;
}

// recall(f) = share of flipped instances inside the top ceil(f*n) scores
// (highest first, ties by ascending index). auc is the trapezoidal integral
// over the grid normalized by the grid span; a single-point grid returns its
// recall.
inline DetectionCurve detection_curve(const std::vector<double>& scores, const NoiseMask& mask,
                                      const std::vector<double>& grid = default_fraction_grid()) {
  const std::size_t n = scores.size();
  if (mask.flipped.size() != n) throw InvalidInput("detection_curve: mask length mismatch");
  if (grid.empty()) throw InvalidInput("detection_curve: empty fraction grid");
  for (double f : grid)
    if (!(f > 0.0 && f <= 1.0)) throw InvalidInput("detection_curve: fractions must be in (0, 1]");
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw InvalidInput("detection_curve: fraction grid must be ascending");
  const std::size_t total_flipped = mask.flip_count();
  if (total_flipped == 0) throw InvalidInput("detection_curve: mask has no flipped instances");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  // flipped count among the first k examined, for every prefix
  std::vector<std::size_t> hits(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) hits[k + 1] = hits[k] + (mask.flipped[order[k]] != 0);

  DetectionCurve curve;
  curve.fractions = grid;
  curve.recall.reserve(grid.size());
  for (double f : grid) {
    // epsilon guard keeps ceil(f * n) exact when f * n is mathematically an
    // integer but rounds up in floating point (e.g. 0.2 * 2000)
    const double target = std::ceil(f * static_cast<double>(n) - 1e-9);
    const auto examined =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::min<double>(
                                     static_cast<double>(n), target)));
    curve.recall.push_back(static_cast<double>(hits[examined]) /
                           static_cast<double>(total_flipped));
  }

  if (grid.size() == 1) {
    curve.auc = curve.recall.front();
  } else {
    double area = 0.0;
    for (std::size_t k = 1; k < grid.size(); ++k)
      area += 0.5 * (curve.recall[k] + curve.recall[k - 1]) * (grid[k] - grid[k - 1]);
    curve.auc = area / (grid.back() - grid.front());
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Partial-score sign rule.
// ---------------------------------------------------------------------------

struct SignSplit {
  std::size_t pos_noisy = 0;
  std::size_t neg_noisy = 0;
  std::size_t pos_clean = 0;
  std::size_t neg_clean = 0;
};

// Counts instances by sign of the cross term 2 y_i (y_-i . h_i), split by
// noisy/clean status. Zero counts as negative.
inline SignSplit partial_sign_split(const ScoreTable& table, const NoiseMask& mask) {
  if (table.rows.size() != mask.flipped.size())
    throw InvalidInput("partial_sign_split: table/mask length mismatch");
  SignSplit split;
  for (const auto& row : table.rows) {
    if (row.index >= mask.flipped.size())
      throw InvalidInput("partial_sign_split: row index out of mask range");
    const bool noisy = mask.flipped[row.index] != 0;
    const bool positive = row.partial_cross > 0.0;
    if (noisy)
      (positive ? split.pos_noisy : split.neg_noisy) += 1;
    else
      (positive ? split.pos_clean : split.neg_clean) += 1;
  }
  return split;
}

// ---------------------------------------------------------------------------
// Pruning order.
// ---------------------------------------------------------------------------

enum class PruneDirection { kLowFirst, kHighFirst };

// Class-stratified removal order: within each class instances sort by score
// (ties by ascending index), then classes are interleaved round-robin in
// ascending class id, so every prefix stays balanced to +-1 per class until a
// class runs out.
inline std::vector<std::size_t> prune_order(const ScoreTable& table, PruneDirection direction) {
  if (table.rows.empty()) throw InvalidInput("prune_order: empty table");

  std::map<std::int32_t, std::vector<const ScoreTableRow*>> per_class;
  for (const auto& row : table.rows) per_class[row.label].push_back(&row);

  for (auto& [label, rows] : per_class) {
    std::sort(rows.begin(), rows.end(), [&](const ScoreTableRow* a, const ScoreTableRow* b) {
      if (a->cg != b->cg)
        return direction == PruneDirection::kLowFirst ? a->cg < b->cg : a->cg > b->cg;
      return a->index < b->index;
    });
  }

  std::vector<std::size_t> order;
  order.reserve(table.rows.size());
  for (std::size_t round = 0; order.size() < table.rows.size(); ++round)
    for (const auto& [label, rows] : per_class)
      if (round < rows.size()) order.push_back(rows[round]->index);
  return order;
}

// ---------------------------------------------------------------------------
// Per-class distribution statistics.
// ---------------------------------------------------------------------------

struct ClassStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::vector<std::size_t> histogram;
  double bin_lo = 0.0;
  double bin_hi = 0.0;
};

// Histogram bins are fixed over the global score range so classes compare
// directly; a degenerate range collapses into bin 0.
inline std::map<std::int32_t, ClassStats> class_stats(const ScoreTable& table,
                                                      std::size_t bins = 20) {
  if (table.rows.empty()) throw InvalidInput("class_stats: empty table");
  if (bins < 1) throw InvalidInput("class_stats: need at least 1 bin");

  double lo = table.rows.front().cg, hi = lo;
  for (const auto& row : table.rows) {
    lo = std::min(lo, row.cg);
    hi = std::max(hi, row.cg);
  }
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 0.0;

  std::map<std::int32_t, ClassStats> stats;
  std::map<std::int32_t, std::vector<double>> values;
  for (const auto& row : table.rows) values[row.label].push_back(row.cg);

  for (auto& [label, scores] : values) {
    ClassStats cs;
    cs.bin_lo = lo;
    cs.bin_hi = hi;
    cs.histogram.assign(bins, 0);
    double mean = 0.0;
    for (double v : scores) mean += v;
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double v : scores) var += (v - mean) * (v - mean);
    var /= static_cast<double>(scores.size());
    cs.mean = mean;
    cs.stddev = std::sqrt(var);
    for (double v : scores) {
      std::size_t bin = 0;
      if (width > 0.0)
        bin = std::min(bins - 1, static_cast<std::size_t>((v - lo) / width));
      cs.histogram[bin] += 1;
    }
    stats[label] = cs;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Random-matrix diagnostics.
// ---------------------------------------------------------------------------

struct InverseIdentityDiagnostic {
  double mean_diag = 0.0;
  double offdiag_rms = 0.0;
  double ratio = 0.0;  // offdiag_rms / mean_diag
};

// Measures how close the inverse is to a multiple of the identity; the
// regime that justifies the geometric approximation of the score.
inline InverseIdentityDiagnostic inverse_identity_diagnostic(const InverseGram& inv) {
  const Eigen::Index m = inv.size();
  if (m < 2) throw InvalidInput("inverse_identity_diagnostic: need at least 2x2");
  InverseIdentityDiagnostic diag;
  diag.mean_diag = inv.entries.diagonal().mean();
  const double total_sq = inv.entries.squaredNorm();
  const double diag_sq = inv.entries.diagonal().squaredNorm();
  diag.offdiag_rms =
      std::sqrt(std::max(0.0, total_sq - diag_sq) / static_cast<double>(m * (m - 1)));
  diag.ratio = diag.offdiag_rms / diag.mean_diag;
  return diag;
}

struct SpectrumComparison {
  std::vector<double> eig_h;      // ascending
  std::vector<double> eig_model;  // ascending
  double rel_gap = 0.0;
};

namespace detail {

// N x N matrix of i.i.d. N(0, 1/N) entries, filled row-major; redrawn (up to
// a bounded retry count) when numerically singular.
inline Eigen::MatrixXd sample_random_factor(Eigen::Index n, Xoshiro256PlusPlus& rng,
                                            Eigen::PartialPivLU<Eigen::MatrixXd>& lu) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd x(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) x(i, j) = scale * rng.normal();
    lu.compute(x);
    if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 1e-14) return x;
  }
  throw NumericalError("sigma_spectrum_check: could not sample an invertible factor");
}

}  // namespace detail

// Estimates Sigma from trials of (X^T)^-1 H X^-1 with X ~ i.i.d. N(0, 1/N),
// then compares the spectrum of X'^T Sigma X' (fresh X') against H's.
// Purely diagnostic: reports the gap, asserts nothing.
inline SpectrumComparison sigma_spectrum_check(const GramMatrix& h, unsigned trials,
                                               std::uint64_t seed) {
  if (trials < 1) throw InvalidInput("sigma_spectrum_check: trials must be at least 1");
  const Eigen::Index n = h.size();
  if (n < 2) throw InvalidInput("sigma_spectrum_check: matrix too small");

  Xoshiro256PlusPlus rng(seed);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(n, n);
  for (unsigned t = 0; t < trials; ++t) {
    detail::sample_random_factor(n, rng, lu);
    const Eigen::MatrixXd x_inv = lu.inverse();
    sigma.noalias() += x_inv.transpose() * h.entries * x_inv;
  }
  sigma /= static_cast<double>(trials);
  sigma = 0.5 * (sigma + sigma.transpose()).eval();

  const Eigen::MatrixXd fresh = detail::sample_random_factor(n, rng, lu);
  Eigen::MatrixXd model = fresh.transpose() * sigma * fresh;
  model = 0.5 * (model + model.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_h(h.entries, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_m(model, Eigen::EigenvaluesOnly);

  SpectrumComparison cmp;
  cmp.eig_h.assign(eig_h.eigenvalues().data(), eig_h.eigenvalues().data() + n);
  cmp.eig_model.assign(eig_m.eigenvalues().data(), eig_m.eigenvalues().data() + n);
  double gap_sq = 0.0, ref_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double diff = cmp.eig_h[static_cast<std::size_t>(i)] -
                        cmp.eig_model[static_cast<std::size_t>(i)];
    gap_sq += diff * diff;
    ref_sq += cmp.eig_h[static_cast<std::size_t>(i)] * cmp.eig_h[static_cast<std::size_t>(i)];
  }
  cmp.rel_gap = std::sqrt(gap_sq / ref_sq);
  return cmp;
}

}  // namespace cgscore
