#pragma once

// Per-instance complexity-gap scores and their sub-terms for a binary view.
//
// With (h_i, d_i) the i-th inverse column blocks and t = y_-i . h_i,
//
//   cg(i) = (t / sqrt(d_i) + y_i sqrt(d_i))^2
//         = t^2 / d_i  +  2 y_i t  +  y_i^2 d_i
//
// The squared form is the one evaluated; the three-term expansion can cancel
// catastrophically when t/sqrt(d_i) and y_i sqrt(d_i) nearly oppose.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "cgscore/errors.hpp"
#include "cgscore/linalg.hpp"
#include "cgscore/parallel.hpp"

namespace cgscore {

struct ScoreRecord {
  std::size_t index = 0;  // row id within the scored view
  double sign = 0.0;      // y_i
  double cg = 0.0;
  double partial_sq = 0.0;     // t^2 / d_i
  double partial_cross = 0.0;  // 2 y_i t; sign separates mislabeled from clean
  double partial_diag = 0.0;   // y_i^2 d_i
  double cg_prime = std::numeric_limits<double>::quiet_NaN();
  double margin = std::numeric_limits<double>::quiet_NaN();
  double cg_approx = std::numeric_limits<double>::quiet_NaN();
  double acc_proxy = 0.0;  // (H^-1 y)_i
  double v_norm = 0.0;     // (2 / m) * cg
};

namespace detail {

inline void check_sign(double s) {
  if (s != 1.0 && s != -1.0) throw InvalidInput("labels must be exactly +1 or -1");
}

}  // namespace detail

// Score of instance i from the shared inverse. Fills the inverse-derived
// fields; the Gram-side diagnostics (cg_prime, margin, cg_approx) come from
// the ops below and are filled by cg_all.
inline ScoreRecord cg_score(const InverseGram& inv, const Eigen::VectorXd& y, Eigen::Index i) {
  const Eigen::Index m = inv.size();
  if (i < 0 || i >= m) throw InvalidInput("cg_score: index out of range");
  if (y.size() != m) throw InvalidInput("cg_score: label length mismatch");
  detail::check_sign(y[i]);

  const double d = inv.entries(i, i);
  if (!(d > 0.0)) throw InternalError("cg_score: corrupt inverse, d_i <= 0");
  // t = y_-i . h_i, read from the full column without materializing h_i
  const double t = inv.entries.col(i).dot(y) - d * y[i];

  ScoreRecord rec;
  rec.index = static_cast<std::size_t>(i);
  rec.sign = y[i];
  const double root_d = std::sqrt(d);
  const double s = t / root_d + y[i] * root_d;
  rec.cg = s * s;
  rec.partial_sq = t * t / d;
  rec.partial_cross = 2.0 * y[i] * t;
  rec.partial_diag = y[i] * y[i] * d;
  rec.acc_proxy = t + y[i] * d;
  rec.v_norm = 2.0 * rec.cg / static_cast<double>(m);
  return rec;
}

// CG'(i) = 2 y_i (g_i . y_-i) + y_i^2 c_i, straight from H with no inversion.
inline double cg_prime(const GramMatrix& h, const Eigen::VectorXd& y, Eigen::Index i) {
  const Eigen::Index m = h.size();
  if (i < 0 || i >= m) throw InvalidInput("cg_prime: index out of range");
  if (y.size() != m) throw InvalidInput("cg_prime: label length mismatch");
  detail::check_sign(y[i]);
  const double ci = h.entries(i, i);
  const double g_dot = h.entries.col(i).dot(y) - ci * y[i];
  return 2.0 * y[i] * g_dot + y[i] * y[i] * ci;
}

// y_i (y_-i . g_i): kernel mass of the same class minus the other class.
// Positive for class-typical instances, near zero on the boundary, negative
// for mislabeled ones.
inline double similarity_margin(const GramMatrix& h, const Eigen::VectorXd& y, Eigen::Index i) {
  const Eigen::Index m = h.size();
  if (i < 0 || i >= m) throw InvalidInput("similarity_margin: index out of range");
  if (y.size() != m) throw InvalidInput("similarity_margin: label length mismatch");
  detail::check_sign(y[i]);
  return y[i] * (h.entries.col(i).dot(y) - h.entries(i, i) * y[i]);
}

// Closed-form approximation of cg in the inverse ~ 2I regime. Diagnostic
// only; never a substitute for cg in pipelines.
inline double cg_approx(double margin) { return 8.0 * margin * margin - 8.0 * margin + 2.0; }

// All m records from one inversion plus O(m^2) column reads. Output is
// ordered by index regardless of the thread budget.
inline std::vector<ScoreRecord> cg_all(const GramMatrix& h, const Eigen::VectorXd& y,
                                       std::optional<double> ridge = {},
                                       double pivot_tol = kDefaultPivotTol) {
  const Eigen::Index m = h.size();
  if (m < 2) throw InvalidInput("cg_all: need at least 2 instances");
  if (y.size() != m) throw InvalidInput("cg_all: label length mismatch");
  for (Eigen::Index i = 0; i < m; ++i) detail::check_sign(y[i]);

  const InverseGram inv = invert_spd(h, ridge, pivot_tol);

  std::vector<ScoreRecord> records(static_cast<std::size_t>(m));
  parallel::parallel_for(static_cast<std::size_t>(m), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      ScoreRecord rec = cg_score(inv, y, i);
      rec.margin = similarity_margin(h, y, i);
      rec.cg_prime = cg_prime(h, y, i);
      rec.cg_approx = cg_approx(rec.margin);
      records[k] = rec;
    }
  });
  return records;
}

}  // namespace cgscore
