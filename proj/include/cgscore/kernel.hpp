#pragma once

// The ReLU arc-cosine Gram matrix over a signed binary view of a dataset.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cgscore/dataset.hpp"
#include "cgscore/errors.hpp"
#include "cgscore/parallel.hpp"

namespace cgscore {

inline constexpr double kCosineClampTol = 1e-9;
inline constexpr double kPi = 3.14159265358979323846;

// One-vs-rest relabeling of a dataset subset: indices into the source rows
// plus a +-1 sign per entry.
struct BinaryView {
  std::vector<std::size_t> indices;
  Eigen::VectorXd signs;

  std::size_t size() const { return indices.size(); }
};

struct GramMatrix {
  Eigen::MatrixXd entries;  // m x m, symmetric, diagonal 1/2

  Eigen::Index size() const { return entries.rows(); }
};

inline void validate_binary_view(const BinaryView& view, std::size_t dataset_rows) {
  if (view.size() < 2) throw InvalidInput("binary view needs at least 2 instances");
  if (static_cast<std::size_t>(view.signs.size()) != view.size())
    throw InvalidInput("binary view signs/indices length mismatch");
  std::vector<std::uint8_t> seen(dataset_rows, 0);
  bool has_pos = false, has_neg = false;
  for (std::size_t k = 0; k < view.size(); ++k) {
    const std::size_t idx = view.indices[k];
    if (idx >= dataset_rows)
      throw InvalidInput("view index " + std::to_string(idx) + " out of range");
    if (seen[idx]++) throw InvalidInput("duplicate view index " + std::to_string(idx));
    const double s = view.signs[static_cast<Eigen::Index>(k)];
    if (s == 1.0)
      has_pos = true;
    else if (s == -1.0)
      has_neg = true;
    else
      throw InvalidInput("view sign must be exactly +1 or -1");
  }
  if (!has_pos || !has_neg) throw InvalidInput("binary view must contain both signs");
}

// kernel(rho) = rho * (pi - arccos(rho)) / (2 pi) for a cosine similarity rho.
// Values beyond [-1, 1] by more than 1e-9 indicate non-normalized input and
// are rejected rather than clamped.
inline double relu_kernel(double rho) {
  if (!std::isfinite(rho) || std::abs(rho) > 1.0 + kCosineClampTol)
    throw InvalidInput("cosine similarity " + std::to_string(rho) +
                       " outside [-1, 1]; input rows are not unit norm");
  rho = std::min(1.0, std::max(-1.0, rho));
  return rho * (kPi - std::acos(rho)) / (2.0 * kPi);
}

// H(i, j) = relu_kernel(<x_vi, x_vj>). Entries are computed once per
// unordered pair and mirrored, so the result is exactly symmetric. Diagonal
// entries use rho = 1 directly (rows are unit norm by the Dataset invariant),
// which makes them exactly 1/2.
inline GramMatrix gram(const Dataset& ds, const BinaryView& view) {
  validate_binary_view(view, static_cast<std::size_t>(ds.n()));
  const auto m = static_cast<Eigen::Index>(view.size());

  FeatureMatrix rows(m, ds.d());
  for (Eigen::Index k = 0; k < m; ++k)
    rows.row(k) = ds.features.row(static_cast<Eigen::Index>(view.indices[static_cast<std::size_t>(k)]));

  GramMatrix h;
  h.entries.noalias() = rows * rows.transpose();

  const double diagonal = relu_kernel(1.0);
  Eigen::MatrixXd& e = h.entries;
  parallel::parallel_for(static_cast<std::size_t>(m), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      e(ii, ii) = diagonal;
      for (Eigen::Index j = ii + 1; j < m; ++j) {
        const double v = relu_kernel(e(ii, j));
        e(ii, j) = v;
        e(j, ii) = v;
      }
    }
  });
  return h;
}

// ---------------------------------------------------------------------------
// CGH1 debug dump: bytes "CGH1", u32 m, m*m float64 little-endian.
// ---------------------------------------------------------------------------

inline void save_gram(const GramMatrix& h, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  const auto m = static_cast<std::uint32_t>(h.size());
  std::vector<std::uint8_t> header{'C', 'G', 'H', '1'};
  detail::put_u32(header, m);
  out.write(reinterpret_cast<const char*>(header.data()), 8);
  for (Eigen::Index i = 0; i < h.size(); ++i)
    for (Eigen::Index j = 0; j < h.size(); ++j) {
      const double v = h.entries(i, j);
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      std::uint8_t le[8];
      for (int b = 0; b < 8; ++b) le[b] = static_cast<std::uint8_t>((bits >> (8 * b)) & 0xFF);
      out.write(reinterpret_cast<const char*>(le), 8);
    }
  if (!out) throw InvalidInput("write failed: " + path);
}

inline GramMatrix load_gram(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "CGH1", 4) != 0)
    throw InvalidInput(path + ": bad CGH1 magic");
  const std::uint32_t m = detail::get_u32(bytes.data() + 4);
  if (bytes.size() != 8ull + 8ull * m * m) throw InvalidInput(path + ": truncated payload");
  GramMatrix h;
  h.entries.resize(m, m);
  const std::uint8_t* p = bytes.data() + 8;
  for (std::uint32_t i = 0; i < m; ++i)
    for (std::uint32_t j = 0; j < m; ++j, p += 8) {
      std::uint64_t bits = 0;
      for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
      double v;
      std::memcpy(&v, &bits, 8);
      h.entries(i, j) = v;
    }
  return h;
}

}  // namespace cgscore
