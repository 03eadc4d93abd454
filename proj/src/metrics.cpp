#include "gatlab/metrics.hpp"

#include <cmath>
#include <random>

namespace gatlab::metrics {

namespace {

// Row-normalized copy; a zero row normalizes to the all-zero vector.
Matrix normalize_rows(const Matrix& x) {
  Matrix xn = x;
  for (Index i = 0; i < xn.rows(); ++i) {
    const double norm = xn.row(i).norm();
    if (norm > 0.0) xn.row(i) /= norm;
  }
  return xn;
}

}  // namespace

double smv(const Matrix& x, Index exact_limit, int sample_pairs, std::uint64_t seed) {
  const Index n = x.rows();
  if (n < 2) throw MetricError("smv requires at least two rows");
  const Matrix xn = normalize_rows(x);
  if (n <= exact_limit) {
    double total = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) total += 0.5 * (xn.row(i) - xn.row(j)).norm();
    // ordered pairs count twice, distances are symmetric
    return 2.0 * total / (static_cast<double>(n) * static_cast<double>(n - 1));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  double total = 0.0;
  int taken = 0;
  while (taken < sample_pairs) {
    const Index i = pick(rng);
    const Index j = pick(rng);
    if (i == j) continue;
    total += 0.5 * (xn.row(i) - xn.row(j)).norm();
    ++taken;
  }
  return total / static_cast<double>(sample_pairs);
}

double corr(const Matrix& x) {
  const Index n = x.rows();
  const Index d = x.cols();
  if (d < 2) throw MetricError("corr requires at least two columns");
  if (n < 2) throw MetricError("corr requires at least two rows");
  Matrix centered = x.rowwise() - x.colwise().mean();
  Eigen::VectorXd norms(d);
  for (Index j = 0; j < d; ++j) norms(j) = centered.col(j).norm();
  double total = 0.0;
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) {
      if (norms(i) == 0.0 || norms(j) == 0.0) continue;  // constant column, |p| := 0
      total += std::abs(centered.col(i).dot(centered.col(j)) / (norms(i) * norms(j)));
    }
  }
  return 2.0 * total / (static_cast<double>(d) * static_cast<double>(d - 1));
}

double accuracy(const Matrix& logits, const std::vector<int>& labels,
                const std::vector<std::uint8_t>& mask) {
  const Index n = logits.rows();
  if (static_cast<Index>(labels.size()) != n || static_cast<Index>(mask.size()) != n)
    throw MetricError("accuracy: labels/mask length mismatch");
  Index correct = 0, total = 0;
  for (Index i = 0; i < n; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    // ties break toward the lowest class index
    Index best = 0;
    for (Index j = 1; j < logits.cols(); ++j)
      if (logits(i, j) > logits(i, best)) best = j;
    if (static_cast<int>(best) == labels[static_cast<std::size_t>(i)]) ++correct;
    ++total;
  }
  if (total == 0) throw MetricError("accuracy: empty mask");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double grad_first_layer_mean_abs(const std::vector<Matrix>& grads_by_param,
                                 const model::Model& m) {
  if (m.first_attention_w < 0) throw MetricError("model has no attention layer to probe");
  const auto idx = static_cast<std::size_t>(m.first_attention_w);
  if (idx >= grads_by_param.size() || grads_by_param[idx].size() == 0)
    throw MetricError("missing gradient for the first attention layer");
  return grads_by_param[idx].cwiseAbs().mean();
}

}  // namespace gatlab::metrics
