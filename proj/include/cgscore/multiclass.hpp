#pragma once

// One-vs-rest conversion and stochastic subsampled scoring for k-class data,
// plus the score CSV serialization.

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgscore/dataset.hpp"
#include "cgscore/errors.hpp"
#include "cgscore/kernel.hpp"
#include "cgscore/rng.hpp"
#include "cgscore/scoring.hpp"

namespace cgscore {

struct StochasticConfig {
  unsigned neg_ratio = 1;  // negatives sampled per positive
  unsigned runs = 1;
  std::uint64_t seed = 0;
  std::optional<double> ridge;
};

struct ScoreTableRow {
  std::size_t index = 0;  // source dataset row
  std::int32_t label = 0;
  unsigned runs_used = 0;
  // arithmetic means over runs
  double cg = 0.0;
  double cg_prime = 0.0;
  double partial_sq = 0.0;
  double partial_cross = 0.0;
  double partial_diag = 0.0;
  double cg_approx = 0.0;
  double v_norm = 0.0;
};

struct ScoreTable {
  std::vector<ScoreTableRow> rows;  // ascending index, one per instance
  std::uint64_t fingerprint = 0;    // dataset_fingerprint of the scored data
  StochasticConfig config;
};

// View for scoring class_c: all its instances signed +1 (ascending index),
// then min(neg_ratio * p, pool) negatives sampled uniformly without
// replacement from all other classes pooled, signed -1 (ascending index).
// Deterministic in (seed, class_c, run_index); a fully covered pool skips the
// sampler entirely.
inline BinaryView binary_view_for_class(const Dataset& ds, std::int32_t class_c,
                                        unsigned neg_ratio, std::uint64_t seed,
                                        unsigned run_index) {
  if (neg_ratio < 1) throw InvalidInput("neg_ratio must be at least 1");
  std::vector<std::size_t> positives, pool;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] == class_c)
      positives.push_back(i);
    else
      pool.push_back(i);
  }
  if (positives.empty())
    throw InvalidInput("class " + std::to_string(class_c) + " not present in dataset");
  if (pool.empty())
    throw InvalidInput("class " + std::to_string(class_c) + " has no negatives available");

  const std::size_t want =
      std::min<std::size_t>(static_cast<std::size_t>(neg_ratio) * positives.size(), pool.size());
  std::vector<std::size_t> negatives;
  if (want == pool.size()) {
    negatives = pool;
  } else {
    Xoshiro256PlusPlus rng(
        derive_stream_seed(seed, static_cast<std::uint64_t>(class_c), run_index));
    const auto picks = sample_without_replacement(pool.size(), want, rng);
    negatives.reserve(want);
    for (auto p : picks) negatives.push_back(pool[p]);
  }

  BinaryView view;
  view.indices = positives;
  view.indices.insert(view.indices.end(), negatives.begin(), negatives.end());
  view.signs.resize(static_cast<Eigen::Index>(view.indices.size()));
  view.signs.head(static_cast<Eigen::Index>(positives.size())).setConstant(1.0);
  view.signs.tail(static_cast<Eigen::Index>(negatives.size())).setConstant(-1.0);
  return view;
}

namespace detail {

struct Kahan {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

struct RowAccumulator {
  Kahan cg, cg_prime, partial_sq, partial_cross, partial_diag, cg_approx, v_norm;
};

}  // namespace detail

// Mean scores for the positives of class_c, averaged over `runs` independent
// negative subsamples in ascending run order with compensated summation.
// A run whose Gram matrix is singular aborts the class, naming run and class.
inline std::vector<ScoreTableRow> score_class(const Dataset& ds, std::int32_t class_c,
                                              const StochasticConfig& config) {
  if (config.runs < 1) throw InvalidInput("runs must be at least 1");

  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    if (ds.labels[i] == class_c) positives.push_back(i);
  if (positives.empty())
    throw InvalidInput("class " + std::to_string(class_c) + " not present in dataset");

  std::vector<detail::RowAccumulator> acc(positives.size());
  for (unsigned run = 0; run < config.runs; ++run) {
    const BinaryView view = binary_view_for_class(ds, class_c, config.neg_ratio, config.seed, run);
    const GramMatrix h = gram(ds, view);
    std::vector<ScoreRecord> records;
    try {
      records = cg_all(h, view.signs, config.ridge);
    } catch (const NotPositiveDefinite& e) {
      throw NotPositiveDefinite(e.pivot_index(), e.pivot(),
                                "class " + std::to_string(class_c) + ", run " +
                                    std::to_string(run));
    }
    // positives occupy view positions 0..p-1 in every run
    for (std::size_t j = 0; j < positives.size(); ++j) {
      acc[j].cg.add(records[j].cg);
      acc[j].cg_prime.add(records[j].cg_prime);
      acc[j].partial_sq.add(records[j].partial_sq);
      acc[j].partial_cross.add(records[j].partial_cross);
      acc[j].partial_diag.add(records[j].partial_diag);
      acc[j].cg_approx.add(records[j].cg_approx);
      acc[j].v_norm.add(records[j].v_norm);
    }
  }

  const double inv_runs = 1.0 / static_cast<double>(config.runs);
  std::vector<ScoreTableRow> rows(positives.size());
  for (std::size_t j = 0; j < positives.size(); ++j) {
    ScoreTableRow& r = rows[j];
    r.index = positives[j];
    r.label = class_c;
    r.runs_used = config.runs;
    r.cg = acc[j].cg.sum * inv_runs;
    r.cg_prime = acc[j].cg_prime.sum * inv_runs;
    r.partial_sq = acc[j].partial_sq.sum * inv_runs;
    r.partial_cross = acc[j].partial_cross.sum * inv_runs;
    r.partial_diag = acc[j].partial_diag.sum * inv_runs;
    r.cg_approx = acc[j].cg_approx.sum * inv_runs;
    r.v_norm = acc[j].v_norm.sum * inv_runs;
  }
  return rows;
}

// Full table: every class scored one-vs-rest, every instance exactly once.
inline ScoreTable score_all(const Dataset& ds, const StochasticConfig& config) {
  const auto classes = ds.distinct_labels();
  if (classes.size() < 2) throw InvalidInput("scoring needs at least 2 classes");

  ScoreTable table;
  table.config = config;
  table.fingerprint = dataset_fingerprint(ds);
  table.rows.resize(static_cast<std::size_t>(ds.n()));
  for (std::int32_t c : classes) {
    for (auto& row : score_class(ds, c, config)) table.rows[row.index] = row;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Score CSV: index,label,cg,cg_prime,partial_sq,partial_cross,partial_diag,
//            cg_approx,v_norm  (floats printed with 17 significant digits)
// ---------------------------------------------------------------------------

inline constexpr const char* kScoreCsvHeader =
    "index,label,cg,cg_prime,partial_sq,partial_cross,partial_diag,cg_approx,v_norm";

inline void write_score_csv(const ScoreTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  out << kScoreCsvHeader << '\n';
  char buf[64];
  for (const auto& r : table.rows) {
    out << r.index << ',' << r.label;
    for (double v : {r.cg, r.cg_prime, r.partial_sq, r.partial_cross, r.partial_diag, r.cg_approx,
                     r.v_norm}) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw InvalidInput("write failed: " + path);
}

inline ScoreTable read_score_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kScoreCsvHeader)
    throw InvalidInput(path + ": not a score CSV (unexpected header)");

  ScoreTable table;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 9)
      throw InvalidInput(path + ": row " + std::to_string(row_no) + " has " +
                         std::to_string(cells.size()) + " cells, expected 9");
    ScoreTableRow r;
    r.index = static_cast<std::size_t>(detail::parse_label(cells[0], row_no));
    r.label = detail::parse_label(cells[1], row_no);
    r.cg = detail::parse_double(cells[2], "score", row_no);
    r.cg_prime = detail::parse_double(cells[3], "score", row_no);
    r.partial_sq = detail::parse_double(cells[4], "score", row_no);
    r.partial_cross = detail::parse_double(cells[5], "score", row_no);
    r.partial_diag = detail::parse_double(cells[6], "score", row_no);
    r.cg_approx = detail::parse_double(cells[7], "score", row_no);
    r.v_norm = detail::parse_double(cells[8], "score", row_no);
    table.rows.push_back(r);
    ++row_no;
  }
  if (table.rows.empty()) throw InvalidInput(path + ": no data rows");
  return table;
}

}  // namespace cgscore
