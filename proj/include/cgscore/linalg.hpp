#pragma once

// SPD inversion and the leave-one-out identities.
//
// Writing the Gram matrix and its inverse in block form with row/column i
// permuted last,
//
//   H = | H_-i  g_i |        H^-1 = | A'    h_i |
//       | g_i^T c_i |               | h_i^T d_i |
//
// the inverse of the minor follows from the Schur complement:
//
//   (H_-i)^-1 = A' - h_i h_i^T / d_i
//
// so one full inversion serves all n leave-one-out queries.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include "cgscore/errors.hpp"
#include "cgscore/kernel.hpp"

namespace cgscore {

inline constexpr double kDefaultPivotTol = 1e-10;

struct InverseGram {
  Eigen::MatrixXd entries;  // m x m, symmetric
  double min_pivot = 0.0;   // smallest Cholesky pivot seen while factoring

  Eigen::Index size() const { return entries.rows(); }
};

namespace detail {

// Blocked lower Cholesky, in place: on return the lower triangle of `a` holds
// L with H = L L^T. Pivots are the diagonal values before their square root;
// the first pivot <= pivot_tol aborts with its index. Returns the smallest
// pivot encountered.
inline double cholesky_in_place(Eigen::MatrixXd& a, double pivot_tol) {
  const Eigen::Index m = a.rows();
  constexpr Eigen::Index kBlock = 128;
  double min_pivot = std::numeric_limits<double>::infinity();

  for (Eigen::Index k = 0; k < m; k += kBlock) {
    const Eigen::Index b = std::min(kBlock, m - k);
    for (Eigen::Index j = 0; j < b; ++j) {
      const Eigen::Index c = k + j;
      const double pivot = a(c, c) - a.row(c).segment(k, j).squaredNorm();
      min_pivot = std::min(min_pivot, pivot);
      if (!(pivot > pivot_tol))
        throw NotPositiveDefinite(static_cast<std::size_t>(c), pivot);
      const double ljj = std::sqrt(pivot);
      a(c, c) = ljj;
      const Eigen::Index below = m - c - 1;
      if (below > 0) {
        if (j > 0)
          a.col(c).tail(below).noalias() -=
              a.block(c + 1, k, below, j) * a.row(c).segment(k, j).transpose();
        a.col(c).tail(below) /= ljj;
      }
    }
    const Eigen::Index rest = m - k - b;
    if (rest > 0) {
      auto panel = a.block(k + b, k, rest, b);
      a.block(k + b, k + b, rest, rest)
          .selfadjointView<Eigen::Lower>()
          .rankUpdate(panel, -1.0);
    }
  }
  return min_pivot;
}

}  // namespace detail

// Full inverse of H (or H + ridge*I) via Cholesky. Fails with the offending
// pivot index when the matrix is not positive definite at pivot_tol; ridge
// regularization is opt-in, never automatic.
inline InverseGram invert_spd(const GramMatrix& h, std::optional<double> ridge = {},
                              double pivot_tol = kDefaultPivotTol) {
  if (h.size() < 1) throw InvalidInput("cannot invert an empty matrix");
  if (ridge && !(*ridge >= 0.0)) throw InvalidInput("ridge must be non-negative");

  Eigen::MatrixXd work = h.entries;
  if (ridge) work.diagonal().array() += *ridge;

  InverseGram inv;
  inv.min_pivot = detail::cholesky_in_place(work, pivot_tol);

  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(work.rows(), work.cols());
  work.triangularView<Eigen::Lower>().solveInPlace(x);
  work.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  inv.entries = 0.5 * (x + x.transpose());
  return inv;
}

// The (h_i, d_i) column of the inverse: d_i = inv(i, i) and h_i = column i
// with entry i removed, ordered by the remaining original indices.
inline std::pair<Eigen::VectorXd, double> loo_column(const InverseGram& inv, Eigen::Index i) {
  const Eigen::Index m = inv.size();
  if (i < 0 || i >= m) throw InvalidInput("loo_column: index out of range");
  const double d = inv.entries(i, i);
  if (!(d > 0.0)) throw InternalError("loo_column: non-positive diagonal in inverse");
  Eigen::VectorXd h(m - 1);
  h.head(i) = inv.entries.col(i).head(i);
  h.tail(m - 1 - i) = inv.entries.col(i).tail(m - 1 - i);
  return {std::move(h), d};
}

// Inverse of H with row/column i deleted, read from the full inverse.
inline Eigen::MatrixXd loo_inverse(const GramMatrix& h, const InverseGram& inv, Eigen::Index i) {
  if (h.size() != inv.size()) throw InternalError("loo_inverse: size mismatch");
  const Eigen::Index m = inv.size();
  if (i < 0 || i >= m) throw InvalidInput("loo_inverse: index out of range");
  auto [hi, di] = loo_column(inv, i);

  Eigen::MatrixXd minor(m - 1, m - 1);
  minor.topLeftCorner(i, i) = inv.entries.topLeftCorner(i, i);
  minor.topRightCorner(i, m - 1 - i) = inv.entries.topRightCorner(i, m - 1 - i);
  minor.bottomLeftCorner(m - 1 - i, i) = inv.entries.bottomLeftCorner(m - 1 - i, i);
  minor.bottomRightCorner(m - 1 - i, m - 1 - i) =
      inv.entries.bottomRightCorner(m - 1 - i, m - 1 - i);

  minor.noalias() -= (hi * hi.transpose()) / di;
  return minor;
}

namespace detail {

// Eigen's LLT only aborts on a strictly negative pivot, so an exactly
// singular matrix can pass on round-off; apply the same pivot tolerance the
// production factorization uses.
inline void require_positive_definite(const Eigen::LLT<Eigen::MatrixXd>& llt,
                                      const char* context) {
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite(0, std::numeric_limits<double>::quiet_NaN(), context);
  const auto diag = llt.matrixLLT().diagonal();
  for (Eigen::Index k = 0; k < diag.size(); ++k) {
    const double pivot = diag[k] * diag[k];
    if (!(pivot > kDefaultPivotTol))
      throw NotPositiveDefinite(static_cast<std::size_t>(k), pivot, context);
  }
}

}  // namespace detail

// Definitional score via two separate factorizations; the test oracle for the
// single-inversion path. Deliberately routed through Eigen's LLT so it shares
// no code with invert_spd.
inline double direct_cg_oracle(const GramMatrix& h, const Eigen::VectorXd& y, Eigen::Index i) {
  const Eigen::Index m = h.size();
  if (i < 0 || i >= m) throw InvalidInput("direct_cg_oracle: index out of range");
  if (y.size() != m) throw InvalidInput("direct_cg_oracle: label length mismatch");

  Eigen::LLT<Eigen::MatrixXd> full(h.entries);
  detail::require_positive_definite(full, "oracle: full matrix");
  const double whole = y.dot(full.solve(y));

  Eigen::MatrixXd hm(m - 1, m - 1);
  hm.topLeftCorner(i, i) = h.entries.topLeftCorner(i, i);
  hm.topRightCorner(i, m - 1 - i) = h.entries.topRightCorner(i, m - 1 - i);
  hm.bottomLeftCorner(m - 1 - i, i) = h.entries.bottomLeftCorner(m - 1 - i, i);
  hm.bottomRightCorner(m - 1 - i, m - 1 - i) = h.entries.bottomRightCorner(m - 1 - i, m - 1 - i);
  Eigen::VectorXd ym(m - 1);
  ym.head(i) = y.head(i);
  ym.tail(m - 1 - i) = y.tail(m - 1 - i);

  Eigen::LLT<Eigen::MatrixXd> minor(hm);
  detail::require_positive_definite(minor, "oracle: minor");
  return whole - ym.dot(minor.solve(ym));
}

}  // namespace cgscore
