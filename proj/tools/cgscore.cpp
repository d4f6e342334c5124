// cgscore: training-free data valuation from a ReLU-kernel Gram matrix.
//
// Subcommands wire datasets through scoring to analysis reports. Every
// stochastic command requires an explicit --seed; given identical flags the
// outputs are byte-identical regardless of --threads.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cgscore/cgscore.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInternal = 4;

struct ManifestEntry {
  std::string command;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::string> inputs;  // path -> fnv1a64 of file bytes
  std::optional<std::uint64_t> seed;
};

std::string file_fingerprint(const std::string& path) {
  const auto bytes = cgscore::detail::read_file_bytes(path);
  return cgscore::to_hex(cgscore::fnv1a64(bytes.data(), bytes.size()));
}

void write_manifest(const ManifestEntry& entry, const std::string& out_path, double duration_ms) {
  json j;
  j["command"] = entry.command;
  j["version"] = cgscore::kVersion;
  j["flags"] = entry.flags;
  j["inputs"] = entry.inputs;
  if (entry.seed) j["seed"] = *entry.seed;
  j["duration_ms"] = duration_ms;
  std::ofstream out(out_path + ".manifest.json");
  if (!out) throw cgscore::InvalidInput("cannot write " + out_path + ".manifest.json");
  out << j.dump(2) << '\n';
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

cgscore::Dataset load_dataset(const std::string& path, const std::string& format) {
  std::string kind = format;
  if (kind == "auto") {
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".cgm1") {
      kind = "cgm1";
    } else if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
      kind = "csv";
    } else {
      // sniff the magic
      std::ifstream probe(path, std::ios::binary);
      char magic[4] = {};
      probe.read(magic, 4);
      kind = (probe && std::string(magic, 4) == "CGM1") ? "cgm1" : "csv";
    }
  }
  return kind == "cgm1" ? cgscore::load_binary(path) : cgscore::load_csv(path);
}

cgscore::NoiseMask load_mask_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cgscore::InvalidInput("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw cgscore::InvalidInput(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "index,flipped,original_label")
    throw cgscore::InvalidInput(path + ": not a noise-mask CSV (unexpected header)");
  cgscore::NoiseMask mask;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = cgscore::detail::split_csv_line(line);
    if (cells.size() != 3)
      throw cgscore::InvalidInput(path + ": row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " cells, expected 3");
    const auto index = static_cast<std::size_t>(cgscore::detail::parse_label(cells[0], row));
    if (index != row) throw cgscore::InvalidInput(path + ": non-contiguous index at row " +
                                                  std::to_string(row));
    const auto flag = cgscore::detail::parse_label(cells[1], row);
    if (flag != 0 && flag != 1)
      throw cgscore::InvalidInput(path + ": flipped must be 0 or 1 at row " + std::to_string(row));
    mask.flipped.push_back(static_cast<std::uint8_t>(flag));
    mask.original_labels.push_back(cgscore::detail::parse_label(cells[2], row));
    ++row;
  }
  if (mask.flipped.empty()) throw cgscore::InvalidInput(path + ": no data rows");
  return mask;
}

void save_mask_csv(const cgscore::NoiseMask& mask, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw cgscore::InvalidInput("cannot write " + path);
  out << "index,flipped,original_label\n";
  for (std::size_t i = 0; i < mask.flipped.size(); ++i)
    out << i << ',' << static_cast<int>(mask.flipped[i]) << ',' << mask.original_labels[i]
        << '\n';
  if (!out) throw cgscore::InvalidInput("write failed: " + path);
}

// Score files for `correlate`: our score CSV (cg column), or any CSV with a
// `score`/`cg` column, or a single-column list; aligned by row order.
std::vector<double> load_score_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cgscore::InvalidInput("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw cgscore::InvalidInput(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = cgscore::detail::split_csv_line(line);
  std::size_t column = 0;
  bool header_row = false;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "cg" || header[c] == "score") {
      column = c;
      header_row = true;
      break;
    }
  }

  std::vector<double> values;
  std::size_t row = 0;
  if (!header_row) {
    if (header.size() != 1)
      throw cgscore::InvalidInput(path + ": no `cg` or `score` column and not single-column");
    values.push_back(cgscore::detail::parse_double(header[0], "score", row++));
  }
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = cgscore::detail::split_csv_line(line);
    if (column >= cells.size())
      throw cgscore::InvalidInput(path + ": short row " + std::to_string(row));
    values.push_back(cgscore::detail::parse_double(cells[column], "score", row));
    ++row;
  }
  if (values.size() < 2) throw cgscore::InvalidInput(path + ": need at least 2 scores");
  return values;
}

json detection_to_json(const cgscore::DetectionCurve& curve) {
  return json{{"fractions", curve.fractions}, {"recall", curve.recall}, {"auc", curve.auc}};
}

json class_stats_to_json(const std::map<std::int32_t, cgscore::ClassStats>& stats) {
  json j = json::object();
  for (const auto& [label, cs] : stats) {
    j[std::to_string(label)] = {{"mean", cs.mean},
                                {"std", cs.stddev},
                                {"histogram", cs.histogram},
                                {"bin_lo", cs.bin_lo},
                                {"bin_hi", cs.bin_hi}};
  }
  return j;
}

void write_json_report(const json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw cgscore::InvalidInput("cannot write " + path);
  out << j.dump(2) << '\n';
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"Complexity-gap data valuation toolkit"};
  app.require_subcommand(1);

  unsigned threads = 1;
  if (const char* env = std::getenv("CGV_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed > 0) threads = static_cast<unsigned>(parsed);
  }
  app.add_option("--threads", threads, "Worker thread budget (default: CGV_THREADS or 1)");

  // --- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate the two-class Gaussian benchmark");
  std::int64_t synth_n = 1000, synth_d = 3000;
  double synth_offset = 1.0, synth_variance = 0.25, synth_noise = 0.0;
  std::uint64_t synth_seed = 0;
  std::string synth_out, synth_mask_out;
  synth->add_option("--n-per-class", synth_n, "Instances per class")->check(CLI::PositiveNumber);
  synth->add_option("--dim", synth_d, "Feature dimension")->check(CLI::PositiveNumber);
  synth->add_option("--offset", synth_offset, "Mean offset of feature 0");
  synth->add_option("--variance", synth_variance, "Isotropic variance");
  synth->add_option("--noise", synth_noise, "Label noise fraction in [0,1]");
  synth->add_option("--seed", synth_seed, "RNG seed")->required();
  synth->add_option("--out", synth_out, "Output CGM1 path")->required();
  synth->add_option("--mask-out", synth_mask_out, "Noise mask CSV path (default: <out>.mask.csv)");

  // --- score ---------------------------------------------------------------
  auto* score = app.add_subcommand("score", "Compute per-instance scores");
  std::string score_input, score_format = "auto", score_out;
  unsigned score_ratio = 1, score_runs = 1;
  std::uint64_t score_seed = 0;
  double score_ridge = -1.0;
  score->add_option("--input", score_input, "Dataset file (CSV or CGM1)")->required();
  score->add_option("--format", score_format, "Input format")
      ->check(CLI::IsMember({"auto", "csv", "cgm1"}));
  score->add_option("--ratio", score_ratio, "Negatives per positive")->check(CLI::PositiveNumber);
  score->add_option("--runs", score_runs, "Subsampling runs to average")
      ->check(CLI::PositiveNumber);
  score->add_option("--seed", score_seed, "RNG seed")->required();
  score->add_option("--ridge", score_ridge, "Opt-in ridge added to the Gram diagonal");
  score->add_option("--out", score_out, "Output score CSV path")->required();

  // --- detect --------------------------------------------------------------
  auto* detect = app.add_subcommand("detect", "Noise-detection curve from scores and a mask");
  std::string detect_scores, detect_mask, detect_out;
  std::size_t detect_grid = 100, detect_bins = 20;
  detect->add_option("--scores", detect_scores, "Score CSV")->required();
  detect->add_option("--mask", detect_mask, "Noise mask CSV")->required();
  detect->add_option("--out", detect_out, "Report JSON path (default: stdout)");
  detect->add_option("--grid-points", detect_grid, "Fraction grid resolution")
      ->check(CLI::PositiveNumber);
  detect->add_option("--bins", detect_bins, "Histogram bins for class stats")
      ->check(CLI::PositiveNumber);

  // --- prune ---------------------------------------------------------------
  auto* prune = app.add_subcommand("prune", "Class-stratified removal order");
  std::string prune_scores, prune_direction = "low-first", prune_out;
  prune->add_option("--scores", prune_scores, "Score CSV")->required();
  prune->add_option("--direction", prune_direction, "low-first or high-first")
      ->check(CLI::IsMember({"low-first", "high-first"}));
  prune->add_option("--out", prune_out, "Output CSV path")->required();

  // --- correlate -----------------------------------------------------------
  auto* correlate = app.add_subcommand("correlate", "Rank correlation between two score files");
  std::string corr_a, corr_b, corr_out;
  correlate->add_option("--a", corr_a, "First score file")->required();
  correlate->add_option("--b", corr_b, "Second score file")->required();
  correlate->add_option("--out", corr_out, "Report JSON path (default: stdout)");

  // --- diagnose ------------------------------------------------------------
  auto* diagnose = app.add_subcommand("diagnose", "Inverse-identity and spectrum diagnostics");
  std::string diag_input, diag_format = "auto", diag_out, diag_dump_gram;
  std::uint64_t diag_seed = 0;
  unsigned diag_trials = 10;
  double diag_ridge = -1.0;
  diagnose->add_option("--input", diag_input, "Dataset file (CSV or CGM1)")->required();
  diagnose->add_option("--format", diag_format, "Input format")
      ->check(CLI::IsMember({"auto", "csv", "cgm1"}));
  diagnose->add_option("--seed", diag_seed, "RNG seed")->required();
  diagnose->add_option("--trials", diag_trials, "Sigma-estimation trials")
      ->check(CLI::PositiveNumber);
  diagnose->add_option("--ridge", diag_ridge, "Opt-in ridge added to the Gram diagonal");
  diagnose->add_option("--out", diag_out, "Report JSON path (default: stdout)");
  diagnose->add_option("--dump-gram", diag_dump_gram, "Optional CGH1 dump of the Gram matrix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }
  cgscore::parallel::set_max_threads(threads);

  if (synth->parsed()) {
    Timer timer;
    cgscore::Dataset ds =
        cgscore::synth_gaussian(synth_n, synth_d, synth_offset, synth_variance, synth_seed);
    cgscore::NoiseMask mask;
    mask.flipped.assign(static_cast<std::size_t>(ds.n()), 0);
    mask.original_labels = ds.labels;
    if (synth_noise > 0.0) {
      auto [noisy, noise_mask] = cgscore::inject_label_noise(ds, synth_noise, synth_seed);
      ds = std::move(noisy);
      mask = std::move(noise_mask);
    }
    cgscore::save_binary(ds, synth_out);
    const std::string mask_path =
        synth_mask_out.empty() ? synth_out + ".mask.csv" : synth_mask_out;
    save_mask_csv(mask, mask_path);

    ManifestEntry entry{"synth",
                        {{"n-per-class", std::to_string(synth_n)},
                         {"dim", std::to_string(synth_d)},
                         {"offset", format_double(synth_offset)},
                         {"variance", format_double(synth_variance)},
                         {"noise", format_double(synth_noise)},
                         {"out", synth_out},
                         {"mask-out", mask_path},
                         {"threads", std::to_string(threads)}},
                        {},
                        synth_seed};
    write_manifest(entry, synth_out, timer.ms());
    return kExitOk;
  }

  if (score->parsed()) {
    Timer timer;
    const cgscore::Dataset ds = load_dataset(score_input, score_format);
    cgscore::StochasticConfig config;
    config.neg_ratio = score_ratio;
    config.runs = score_runs;
    config.seed = score_seed;
    if (score->count("--ridge")) {
      if (score_ridge < 0.0) throw cgscore::InvalidInput("--ridge must be non-negative");
      config.ridge = score_ridge;
    }
    const cgscore::ScoreTable table = cgscore::score_all(ds, config);
    cgscore::write_score_csv(table, score_out);

    json sidecar;
    sidecar["seed"] = config.seed;
    sidecar["neg_ratio"] = config.neg_ratio;
    sidecar["runs"] = config.runs;
    if (config.ridge)
      sidecar["ridge"] = *config.ridge;
    else
      sidecar["ridge"] = nullptr;
    sidecar["fingerprint"] = cgscore::to_hex(table.fingerprint);
    std::ofstream side(score_out + ".json");
    if (!side) throw cgscore::InvalidInput("cannot write " + score_out + ".json");
    side << sidecar.dump(2) << '\n';

    ManifestEntry entry{"score",
                        {{"input", score_input},
                         {"format", score_format},
                         {"ratio", std::to_string(score_ratio)},
                         {"runs", std::to_string(score_runs)},
                         {"ridge", config.ridge ? format_double(*config.ridge) : "none"},
                         {"out", score_out},
                         {"threads", std::to_string(threads)}},
                        {{score_input, file_fingerprint(score_input)}},
                        score_seed};
    write_manifest(entry, score_out, timer.ms());
    return kExitOk;
  }

  if (detect->parsed()) {
    Timer timer;
    const cgscore::ScoreTable table = cgscore::read_score_csv(detect_scores);
    const cgscore::NoiseMask mask = load_mask_csv(detect_mask);
    if (table.rows.size() != mask.flipped.size())
      throw cgscore::InvalidInput("scores (" + std::to_string(table.rows.size()) + ") and mask (" +
                                  std::to_string(mask.flipped.size()) + ") lengths differ");
    std::vector<double> scores;
    scores.reserve(table.rows.size());
    for (const auto& row : table.rows) scores.push_back(row.cg);

    const auto curve =
        cgscore::detection_curve(scores, mask, cgscore::default_fraction_grid(detect_grid));
    const auto split = cgscore::partial_sign_split(table, mask);

    json report;
    report["detection"] = detection_to_json(curve);
    report["class_stats"] = class_stats_to_json(cgscore::class_stats(table, detect_bins));
    report["sign_split"] = {{"pos_noisy", split.pos_noisy},
                            {"neg_noisy", split.neg_noisy},
                            {"pos_clean", split.pos_clean},
                            {"neg_clean", split.neg_clean}};
    write_json_report(report, detect_out);
    if (!detect_out.empty()) {
      ManifestEntry entry{"detect",
                          {{"scores", detect_scores},
                           {"mask", detect_mask},
                           {"grid-points", std::to_string(detect_grid)},
                           {"bins", std::to_string(detect_bins)},
                           {"out", detect_out}},
                          {{detect_scores, file_fingerprint(detect_scores)},
                           {detect_mask, file_fingerprint(detect_mask)}},
                          {}};
      write_manifest(entry, detect_out, timer.ms());
    }
    return kExitOk;
  }

  if (prune->parsed()) {
    Timer timer;
    const cgscore::ScoreTable table = cgscore::read_score_csv(prune_scores);
    const auto direction = prune_direction == "low-first" ? cgscore::PruneDirection::kLowFirst
                                                          : cgscore::PruneDirection::kHighFirst;
    const auto order = cgscore::prune_order(table, direction);

    std::map<std::size_t, const cgscore::ScoreTableRow*> by_index;
    for (const auto& row : table.rows) by_index[row.index] = &row;
    std::ofstream out(prune_out);
    if (!out) throw cgscore::InvalidInput("cannot write " + prune_out);
    out << "rank,index,label,score\n";
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const auto* row = by_index.at(order[rank]);
      out << rank << ',' << row->index << ',' << row->label << ',' << format_double(row->cg)
          << '\n';
    }
    if (!out) throw cgscore::InvalidInput("write failed: " + prune_out);

    ManifestEntry entry{"prune",
                        {{"scores", prune_scores},
                         {"direction", prune_direction},
                         {"out", prune_out}},
                        {{prune_scores, file_fingerprint(prune_scores)}},
                        {}};
    write_manifest(entry, prune_out, timer.ms());
    return kExitOk;
  }

  if (correlate->parsed()) {
    const auto a = load_score_column(corr_a);
    const auto b = load_score_column(corr_b);
    if (a.size() != b.size())
      throw cgscore::InvalidInput("score files differ in length (" + std::to_string(a.size()) +
                                  " vs " + std::to_string(b.size()) + ")");
    const auto result = cgscore::correlate(a, b);
    json report;
    report["correlations"] = json::array({{{"a", corr_a},
                                           {"b", corr_b},
                                           {"spearman", result.spearman},
                                           {"pearson", result.pearson},
                                           {"n", result.n}}});
    write_json_report(report, corr_out);
    return kExitOk;
  }

  if (diagnose->parsed()) {
    Timer timer;
    const cgscore::Dataset ds = load_dataset(diag_input, diag_format);
    const auto classes = ds.distinct_labels();
    if (classes.size() < 2) throw cgscore::InvalidInput("diagnose needs at least 2 classes");
    // full one-vs-rest view for the smallest class id
    const cgscore::BinaryView view = cgscore::binary_view_for_class(
        ds, classes.front(), std::numeric_limits<unsigned>::max() / 2, diag_seed, 0);
    const cgscore::GramMatrix h = cgscore::gram(ds, view);
    if (!diag_dump_gram.empty()) cgscore::save_gram(h, diag_dump_gram);

    std::optional<double> ridge;
    if (diagnose->count("--ridge")) {
      if (diag_ridge < 0.0) throw cgscore::InvalidInput("--ridge must be non-negative");
      ridge = diag_ridge;
    }
    const cgscore::InverseGram inv = cgscore::invert_spd(h, ridge);
    const auto identity = cgscore::inverse_identity_diagnostic(inv);
    const auto spectrum = cgscore::sigma_spectrum_check(h, diag_trials, diag_seed);

    json report;
    report["diagnostics"] = {{"mean_diag", identity.mean_diag},
                             {"offdiag_rms", identity.offdiag_rms},
                             {"ratio", identity.ratio},
                             {"min_pivot", inv.min_pivot},
                             {"positive_class", classes.front()},
                             {"matrix_size", h.size()}};
    report["spectrum"] = {{"eig_h", spectrum.eig_h},
                          {"eig_model", spectrum.eig_model},
                          {"rel_gap", spectrum.rel_gap},
                          {"trials", diag_trials}};
    write_json_report(report, diag_out);
    if (!diag_out.empty()) {
      ManifestEntry entry{"diagnose",
                          {{"input", diag_input},
                           {"trials", std::to_string(diag_trials)},
                           {"ridge", ridge ? format_double(*ridge) : "none"},
                           {"out", diag_out},
                           {"threads", std::to_string(threads)}},
                          {{diag_input, file_fingerprint(diag_input)}},
                          diag_seed};
      write_manifest(entry, diag_out, timer.ms());
    }
    return kExitOk;
  }

  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cgscore::InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const cgscore::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}
