#pragma once

#include "gatlab/trainer.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gatlab::experiment {

struct ExperimentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key = value config format; '#' starts a comment, list values are
// comma-separated.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_kv_file(const std::filesystem::path& path);
KeyValues parse_kv_text(const std::string& text);
std::vector<std::string> split_list(const std::string& s);
std::vector<int> parse_int_list(const std::string& s);
std::vector<double> parse_double_list(const std::string& s);

std::uint64_t hash_string(const std::string& s);

/// Cora-shaped synthetic default used when no dataset directory is given.
Dataset default_synthetic(Index num_nodes = 2700, std::uint64_t seed = 7);

Dataset load_or_synthesize(const std::string& dataset_dir, Index synthetic_nodes = 2700);

struct RunSpec {
  std::string dataset_dir;  // empty -> default synthetic
  std::vector<std::string> variants{"gat"};
  std::vector<int> depths{2};
  int num_seeds = 10;
  std::uint64_t seed_base = 0;
  trainer::HParams hp;
  trainer::SweepGrid grid;  // non-empty learning_rates triggers a sweep
  model::ModelConfig base_config;
  Index synthetic_nodes = 2700;
  int workers = 1;
};

RunSpec spec_from_kv(const KeyValues& kv);

struct TableRow {
  std::string dataset, variant;
  int depth = 0;
  int num_seeds = 0;
  double mean = 0.0, stddev = 0.0;
};

std::vector<std::uint64_t> make_seeds(int count, std::uint64_t base);

void write_trace_csv(const std::filesystem::path& path,
                     const std::vector<metrics::EpochTrace>& traces,
                     const std::string& provenance);
std::vector<metrics::EpochTrace> read_trace_csv(const std::filesystem::path& path);

struct DepthReport {
  double q = 0.0, l_real = 0.0;
  int l_selected = 0;
};

DepthReport depth_report(const Dataset& d);
int cmd_depth(const std::string& dataset_dir, const std::filesystem::path& out_dir);

/// Runs every (variant, depth) cell of the spec, writes per-run traces under
/// out/runs/ and the aggregate table as table.csv + table.json.
std::vector<TableRow> cmd_run(const RunSpec& spec, const std::filesystem::path& out_dir);

/// Re-aggregates stored traces and checks them against table.csv; rewrites
/// report.csv. Throws on any cell mismatch beyond 1e-12.
std::vector<TableRow> cmd_report(const std::filesystem::path& out_dir);

struct ProbeOptions {
  std::string dataset_dir;  // empty -> synthetic default
  std::vector<int> depths;  // empty -> preset default
  int num_seeds = 5;
  std::uint64_t seed_base = 0;
  trainer::HParams hp;
  int hidden_dim = 16;
  Index synthetic_nodes = 2700;
  int workers = 1;
};

const std::vector<std::string>& probe_names();

/// Emits the plot-data CSV behind one of the paper-style probe figures.
std::filesystem::path cmd_probe(const std::string& preset, const ProbeOptions& opt,
                                const std::filesystem::path& out_dir);

struct ConvertInputs {
  std::filesystem::path edges, features, labels, splits;
  std::string name = "converted";
};

int cmd_prep_synthetic(const SyntheticParams& params, const std::filesystem::path& out_dir);
int cmd_prep_convert(const ConvertInputs& in, const std::filesystem::path& out_dir);

}  // namespace gatlab::experiment
