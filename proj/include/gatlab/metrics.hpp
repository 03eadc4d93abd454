#pragma once

#include "gatlab/model.hpp"

#include <cstdint>
#include <vector>

namespace gatlab::metrics {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Smoothness metric: mean over ordered row pairs of half the Euclidean
/// distance between row-normalized representations. Exact up to
/// `exact_limit` rows; above that a seeded pair-sampling estimate.
double smv(const Matrix& x, Index exact_limit = 4000, int sample_pairs = 20000,
           std::uint64_t seed = 0);

/// Mean absolute Pearson correlation over ordered column pairs. Constant
/// columns contribute 0.
double corr(const Matrix& x);

double accuracy(const Matrix& logits, const std::vector<int>& labels,
                const std::vector<std::uint8_t>& mask);

/// Mean absolute entry of the first graph-attention layer's transform
/// gradient (pre-MLP excluded).
double grad_first_layer_mean_abs(const std::vector<Matrix>& grads_by_param,
                                 const model::Model& m);

struct EpochTrace {
  int epoch = 0;
  double loss = 0.0;
  double acc_train = 0.0, acc_val = 0.0, acc_test = 0.0;
  double smv = 0.0, corr = 0.0;
  double grad_l1_mean = 0.0;
};

inline double overfit_gap(const EpochTrace& t) { return t.acc_train - t.acc_test; }

}  // namespace gatlab::metrics
