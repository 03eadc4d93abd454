#pragma once

#include "gatlab/metrics.hpp"
#include "gatlab/model.hpp"

#include <cstdint>
#include <vector>

namespace gatlab::trainer {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HParams {
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  double beta = 0.5;  // residual strength, merged into the model config
  int epochs = 200;
  int patience = 50;  // epochs without val-accuracy improvement before stop
  double dropout = 0.0;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<metrics::EpochTrace> traces;
  int best_epoch = 0;  // max val accuracy, earliest on ties
  double val_at_best = 0.0;
  double test_at_best = 0.0;
  std::uint64_t params_digest = 0;
};

/// Adam loop on masked cross-entropy plus an explicit L2 decay term.
/// Deterministic given hp.seed; throws TrainError on NaN/Inf loss.
TrainResult train(model::Model& m, const Dataset& dataset, const HParams& hp);

/// Recomputes best-epoch selection from traces using validation columns only.
int select_best_epoch(const std::vector<metrics::EpochTrace>& traces);

struct SeedStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> per_seed;  // test_at_best, in seed order
  std::vector<TrainResult> results;
};

/// One independent model + training run per seed; hp.beta and hp.dropout are
/// merged into the config before building.
SeedStats run_seeds(const model::ModelConfig& config, const Dataset& dataset,
                    const HParams& hp_base, const std::vector<std::uint64_t>& seeds,
                    int workers = 1);

struct SweepGrid {
  std::vector<double> learning_rates;
  std::vector<double> weight_decays;
  std::vector<double> betas;  // optional; empty keeps hp_base.beta
};

struct SweepRow {
  HParams hp;
  double val_mean = 0.0;
  double test_mean = 0.0;
  bool diverged = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  HParams best;
  double best_val_mean = 0.0;
};

/// Exhaustive product sweep selecting by mean validation accuracy at the best
/// epoch; ties break toward smaller learning rate, then smaller weight decay.
SweepResult hparam_sweep(const SweepGrid& grid, const model::ModelConfig& config,
                         const Dataset& dataset, const HParams& hp_base,
                         const std::vector<std::uint64_t>& seeds, int workers = 1);

}  // namespace gatlab::trainer
