#pragma once

// Labeled datasets: ingestion, synthesis, normalization, label-noise
// injection, and the CSV / CGM1 persistence formats.
//
// A Dataset always holds unit-L2-norm rows; every constructor path either
// normalizes or validates, so downstream kernel code can rely on it.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cgscore/errors.hpp"
#include "cgscore/hash.hpp"
#include "cgscore/rng.hpp"

namespace cgscore {

// Instances are rows; row-major so one instance is contiguous.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row norms after explicit normalization are exact to a few ulps.
inline constexpr double kRowNormTol = 1e-9;
// CGM1 stores float32 features; quantization perturbs norms by ~6e-8.
inline constexpr double kRowNormTolF32 = 1e-6;
inline constexpr double kMinRowNorm = 1e-12;

struct Dataset {
  FeatureMatrix features;            // n x d, unit-norm rows
  std::vector<std::int32_t> labels;  // length n, non-negative class ids

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index d() const { return features.cols(); }

  std::vector<std::int32_t> distinct_labels() const {
    std::set<std::int32_t> s(labels.begin(), labels.end());
    return {s.begin(), s.end()};
  }
};

struct NoiseMask {
  std::vector<std::uint8_t> flipped;        // 1 = label was corrupted
  std::vector<std::int32_t> original_labels;

  std::size_t flip_count() const {
    std::size_t c = 0;
    for (auto f : flipped) c += (f != 0);
    return c;
  }
};

inline void validate_dataset(const Dataset& ds, double norm_tol = kRowNormTol) {
  if (ds.n() < 2) throw InvalidInput("dataset needs at least 2 instances");
  if (ds.d() < 1) throw InvalidInput("dataset needs at least 1 feature");
  if (static_cast<Eigen::Index>(ds.labels.size()) != ds.n())
    throw InvalidInput("label count does not match row count");
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    if (ds.labels[static_cast<std::size_t>(i)] < 0)
      throw InvalidInput("negative class id at row " + std::to_string(i));
    const double norm = ds.features.row(i).norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > norm_tol)
      throw InvalidInput("row " + std::to_string(i) + " is not unit norm (" +
                         std::to_string(norm) + ")");
  }
}

inline Dataset make_dataset(FeatureMatrix features, std::vector<std::int32_t> labels,
                            double norm_tol = kRowNormTol) {
  Dataset ds{std::move(features), std::move(labels)};
  validate_dataset(ds, norm_tol);
  return ds;
}

// Each row divided by its L2 norm. Rows with norm <= 1e-12 are rejected.
inline FeatureMatrix normalize_rows(FeatureMatrix m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (!std::isfinite(norm) || norm <= kMinRowNorm)
      throw InvalidInput("row " + std::to_string(i) + " has zero or near-zero norm");
    m.row(i) /= norm;
  }
  return m;
}

// ---------------------------------------------------------------------------
// CSV format: header `f0,...,f{d-1},label`, UTF-8, '.' decimal separator.
// On load the exact feature column names are not enforced, only that exactly
// one column is named `label`; rows are L2-normalized in place.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

inline double parse_double(const std::string& cell, const char* what, std::size_t row) {
  if (cell.empty()) throw InvalidInput(std::string("empty ") + what + " cell at data row " +
                                       std::to_string(row));
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || !std::isfinite(v))
    throw InvalidInput(std::string("non-finite or unparsable ") + what + " '" + cell +
                       "' at data row " + std::to_string(row));
  return v;
}

inline std::int32_t parse_label(const std::string& cell, std::size_t row) {
  if (cell.empty()) throw InvalidInput("empty label cell at data row " + std::to_string(row));
  char* end = nullptr;
  const long v = std::strtol(cell.c_str(), &end, 10);
  if (end != cell.c_str() + cell.size() || v < 0)
    throw InvalidInput("label '" + cell + "' at data row " + std::to_string(row) +
                       " is not a non-negative integer");
  return static_cast<std::int32_t>(v);
}

}  // namespace detail

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path + ": empty file");
  const auto header = detail::split_csv_line(line);
  Eigen::Index label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "label") {
      if (label_col >= 0) throw InvalidInput(path + ": duplicate `label` column");
      label_col = static_cast<Eigen::Index>(c);
    }
  }
  if (label_col < 0) throw InvalidInput(path + ": missing `label` column");
  const Eigen::Index d = static_cast<Eigen::Index>(header.size()) - 1;
  if (d < 1) throw InvalidInput(path + ": no feature columns");

  std::vector<double> values;
  std::vector<std::int32_t> labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != d + 1)
      throw InvalidInput(path + ": data row " + std::to_string(row) + " has " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(d + 1));
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(cells.size()); ++c) {
      if (c == label_col)
        labels.push_back(detail::parse_label(cells[static_cast<std::size_t>(c)], row));
      else
        values.push_back(detail::parse_double(cells[static_cast<std::size_t>(c)], "feature", row));
    }
    ++row;
  }
  if (row < 2) throw InvalidInput(path + ": need at least 2 data rows");

  FeatureMatrix features(static_cast<Eigen::Index>(row), d);
  std::memcpy(features.data(), values.data(), values.size() * sizeof(double));
  features = normalize_rows(std::move(features));
  return make_dataset(std::move(features), std::move(labels));
}

// Floats are printed with 17 significant digits so a reload reproduces the
// exact double values before renormalization.
inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  for (Eigen::Index c = 0; c < ds.d(); ++c) out << 'f' << c << ',';
  out << "label\n";
  char buf[64];
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index c = 0; c < ds.d(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.features(i, c));
      out << buf << ',';
    }
    out << ds.labels[static_cast<std::size_t>(i)] << '\n';
  }
  if (!out) throw InvalidInput("write failed: " + path);
}

// ---------------------------------------------------------------------------
// CGM1 binary format (little endian):
//   bytes "CGM1", u32 n, u32 d, n*d float32 row-major features, n int32 labels
// Loading does not renormalize, so save -> load -> save is byte-stable; row
// norms are validated at float32 precision instead.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

inline float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_cgm1(const Dataset& ds) {
  const auto n = static_cast<std::uint32_t>(ds.n());
  const auto d = static_cast<std::uint32_t>(ds.d());
  std::vector<std::uint8_t> out;
  out.reserve(12 + 4ull * n * d + 4ull * n);
  for (char c : {'C', 'G', 'M', '1'}) out.push_back(static_cast<std::uint8_t>(c));
  detail::put_u32(out, n);
  detail::put_u32(out, d);
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    for (Eigen::Index c = 0; c < ds.d(); ++c)
      detail::put_f32(out, static_cast<float>(ds.features(i, c)));
  for (auto label : ds.labels) detail::put_u32(out, static_cast<std::uint32_t>(label));
  return out;
}

inline Dataset parse_cgm1(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "CGM1", 4) != 0)
    throw InvalidInput(origin + ": bad CGM1 magic");
  const std::uint32_t n = detail::get_u32(bytes.data() + 4);
  const std::uint32_t d = detail::get_u32(bytes.data() + 8);
  const std::uint64_t cells = static_cast<std::uint64_t>(n) * d;
  if (n < 2 || d < 1 || cells > (1ull << 33))
    throw InvalidInput(origin + ": dimensions out of range (n=" + std::to_string(n) +
                       ", d=" + std::to_string(d) + ")");
  const std::uint64_t expected = 12ull + 4ull * cells + 4ull * n;
  if (bytes.size() != expected)
    throw InvalidInput(origin + ": truncated or oversized payload (" +
                       std::to_string(bytes.size()) + " bytes, expected " +
                       std::to_string(expected) + ")");

  FeatureMatrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const std::uint8_t* p = bytes.data() + 12;
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    for (Eigen::Index c = 0; c < features.cols(); ++c, p += 4)
      features(i, c) = static_cast<double>(detail::get_f32(p));
  std::vector<std::int32_t> labels(n);
  for (std::uint32_t i = 0; i < n; ++i, p += 4)
    labels[i] = static_cast<std::int32_t>(detail::get_u32(p));
  return make_dataset(std::move(features), std::move(labels), kRowNormTolF32);
}

inline Dataset load_binary(const std::string& path) {
  return parse_cgm1(detail::read_file_bytes(path), path);
}

inline void save_binary(const Dataset& ds, const std::string& path) {
  const auto bytes = serialize_cgm1(ds);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidInput("write failed: " + path);
}

// Fingerprint of a dataset = FNV-1a over its CGM1 serialization, so hashing a
// CGM1 file and hashing the in-memory dataset agree.
inline std::uint64_t dataset_fingerprint(const Dataset& ds) {
  const auto bytes = serialize_cgm1(ds);
  return fnv1a64(bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// Synthetic two-class Gaussian benchmark.
// ---------------------------------------------------------------------------

// Raw draws before normalization: class 0 rows first, then class 1. Row i of
// class s has feature 0 ~ N(+-mean_offset, variance) and features 1..d-1 ~
// N(0, variance); draws are row-major in a single xoshiro stream.
inline FeatureMatrix synth_gaussian_raw(Eigen::Index n_per_class, Eigen::Index d,
                                        double mean_offset, double variance,
                                        std::uint64_t seed) {
  if (n_per_class < 1 || d < 1) throw InvalidInput("synth_gaussian: sizes must be positive");
  if (!(variance > 0.0)) throw InvalidInput("synth_gaussian: variance must be positive");
  const double sigma = std::sqrt(variance);
  Xoshiro256PlusPlus rng(seed);
  FeatureMatrix raw(2 * n_per_class, d);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double offset = i < n_per_class ? mean_offset : -mean_offset;
    for (Eigen::Index c = 0; c < d; ++c)
      raw(i, c) = sigma * rng.normal() + (c == 0 ? offset : 0.0);
  }
  return raw;
}

inline Dataset synth_gaussian(Eigen::Index n_per_class = 1000, Eigen::Index d = 3000,
                              double mean_offset = 1.0, double variance = 0.25,
                              std::uint64_t seed = 0) {
  FeatureMatrix features =
      normalize_rows(synth_gaussian_raw(n_per_class, d, mean_offset, variance, seed));
  std::vector<std::int32_t> labels(static_cast<std::size_t>(2 * n_per_class), 0);
  for (std::size_t i = static_cast<std::size_t>(n_per_class); i < labels.size(); ++i)
    labels[i] = 1;
  return make_dataset(std::move(features), std::move(labels));
}

// ---------------------------------------------------------------------------
// Label noise.
// ---------------------------------------------------------------------------

// Flips exactly round(fraction * n) labels, chosen uniformly without
// replacement; each flip draws uniformly among the *other* classes present.
// Flip targets are drawn in ascending index order so results are reproducible.
inline std::pair<Dataset, NoiseMask> inject_label_noise(const Dataset& ds, double fraction,
                                                        std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw InvalidInput("noise fraction must be in [0, 1]");
  const auto n = static_cast<std::size_t>(ds.n());
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));

  NoiseMask mask;
  mask.flipped.assign(n, 0);
  mask.original_labels = ds.labels;
  Dataset noisy = ds;
  if (count == 0) return {std::move(noisy), std::move(mask)};

  const auto classes = ds.distinct_labels();
  if (classes.size() < 2)
    throw InvalidInput("cannot inject label noise into a single-class dataset");

  Xoshiro256PlusPlus rng(seed);
  const auto targets = sample_without_replacement(n, count, rng);
  for (std::size_t idx : targets) {
    const std::int32_t original = ds.labels[idx];
    // index of `original` among the sorted distinct classes
    std::size_t self = 0;
    while (classes[self] != original) ++self;
    const std::size_t pick = static_cast<std::size_t>(rng.uniform_below(classes.size() - 1));
    const std::size_t chosen = pick < self ? pick : pick + 1;
    noisy.labels[idx] = classes[chosen];
    mask.flipped[idx] = 1;
  }
  return {std::move(noisy), std::move(mask)};
}

}  // namespace cgscore
