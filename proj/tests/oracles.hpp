// Test-only reference implementations: dense, loop-based oracles that stay
// independent of the tape-based implementation they check.
#pragma once

#include "gatlab/graph.hpp"
#include "gatlab/tensor.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace oracles {

using gatlab::AdjacencyCSR;
using gatlab::Index;
using gatlab::Matrix;

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      for (Index k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

// Dense evaluation of one attention layer over all edges of g: per-pair
// scores, row softmax over neighbors, weighted aggregation, optional scaled
// residual, then sigma.
inline Matrix dense_gat_layer(const Matrix& h, const Matrix& w, const Matrix& a,
                              const AdjacencyCSR& g, gatlab::ad::Act score_act,
                              double leaky_slope, gatlab::ad::Act sigma,
                              const Matrix* anchor = nullptr, const Matrix* w_res = nullptr,
                              double beta = 0.0) {
  const Index n = g.num_nodes;
  const Matrix wh = h * w;
  const Index width = wh.cols();
  Matrix out = Matrix::Zero(n, width);
  for (Index i = 0; i < n; ++i) {
    const auto nbrs = g.neighbors(i);
    std::vector<double> scores;
    for (Index j : nbrs) {
      double s = 0.0;
      for (Index k = 0; k < width; ++k) s += a(k, 0) * wh(i, k) + a(width + k, 0) * wh(j, k);
      scores.push_back(gatlab::ad::apply_act(s, score_act, leaky_slope));
    }
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double denom = 0.0;
    for (double& s : scores) {
      s = std::exp(s - mx);
      denom += s;
    }
    for (std::size_t k = 0; k < nbrs.size(); ++k)
      out.row(i) += (scores[k] / denom) * wh.row(nbrs[k]);
  }
  if (anchor != nullptr && beta != 0.0) {
    const Matrix res = w_res != nullptr ? (*anchor * *w_res).eval() : *anchor;
    out += beta * res;
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < width; ++j)
      out(i, j) = gatlab::ad::apply_act(out(i, j), sigma, leaky_slope);
  return out;
}

// Identity-transform propagation steps after one dense transform, mirroring
// the decoupled layer contract.
inline Matrix dense_decoupled(const Matrix& h, const Matrix& w, const Matrix& a,
                              const AdjacencyCSR& g, gatlab::ad::Act score_act,
                              double leaky_slope, gatlab::ad::Act sigma, int steps) {
  Matrix cur = h * w;
  for (Index i = 0; i < cur.rows(); ++i)
    for (Index j = 0; j < cur.cols(); ++j)
      cur(i, j) = gatlab::ad::apply_act(cur(i, j), sigma, leaky_slope);
  const Matrix identity = Matrix::Identity(cur.cols(), cur.cols());
  for (int s = 0; s < steps; ++s)
    cur = dense_gat_layer(cur, identity, a, g, score_act, leaky_slope,
                          gatlab::ad::Act::Identity);
  return cur;
}

inline double naive_smv(const Matrix& x) {
  const Index n = x.rows();
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double ni = x.row(i).norm();
      const double nj = x.row(j).norm();
      Eigen::RowVectorXd xi = ni > 0 ? (x.row(i) / ni).eval() : Eigen::RowVectorXd::Zero(x.cols());
      Eigen::RowVectorXd xj = nj > 0 ? (x.row(j) / nj).eval() : Eigen::RowVectorXd::Zero(x.cols());
      total += 0.5 * (xi - xj).norm();
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

inline double naive_pearson(const Matrix& x, Index i, Index j) {
  const Index n = x.rows();
  double mi = 0.0, mj = 0.0;
  for (Index r = 0; r < n; ++r) {
    mi += x(r, i);
    mj += x(r, j);
  }
  mi /= static_cast<double>(n);
  mj /= static_cast<double>(n);
  double num = 0.0, di = 0.0, dj = 0.0;
  for (Index r = 0; r < n; ++r) {
    num += (x(r, i) - mi) * (x(r, j) - mj);
    di += (x(r, i) - mi) * (x(r, i) - mi);
    dj += (x(r, j) - mj) * (x(r, j) - mj);
  }
  if (di == 0.0 || dj == 0.0) return 0.0;
  return num / std::sqrt(di * dj);
}

inline double naive_corr(const Matrix& x) {
  const Index d = x.cols();
  double total = 0.0;
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      if (i != j) total += std::abs(naive_pearson(x, i, j));
  return total / (static_cast<double>(d) * static_cast<double>(d - 1));
}

inline AdjacencyCSR random_graph(Index n, double edge_prob, std::mt19937_64& rng,
                                 bool self_loops = true) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  gatlab::EdgeList edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (unit(rng) < edge_prob) edges.emplace_back(i, j);
  return gatlab::build_csr(edges, n, self_loops);
}

}  // namespace oracles
