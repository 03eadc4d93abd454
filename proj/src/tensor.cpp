#include "gatlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gatlab::ad {

Act act_from_string(const std::string& s) {
  if (s == "identity") return Act::Identity;
  if (s == "leaky_relu") return Act::LeakyRelu;
  if (s == "elu") return Act::Elu;
  if (s == "tanh") return Act::Tanh;
  if (s == "sigmoid") return Act::Sigmoid;
  throw TapeError("unknown activation kind: " + s);
}

std::string to_string(Act a) {
  switch (a) {
    case Act::Identity: return "identity";
    case Act::LeakyRelu: return "leaky_relu";
    case Act::Elu: return "elu";
    case Act::Tanh: return "tanh";
    case Act::Sigmoid: return "sigmoid";
  }
  return "?";
}

double apply_act(double x, Act kind, double leaky_slope) {
  switch (kind) {
    case Act::Identity: return x;
    case Act::LeakyRelu: return x > 0.0 ? x : leaky_slope * x;
    case Act::Elu: return x > 0.0 ? x : std::expm1(x);
    case Act::Tanh: return std::tanh(x);
    case Act::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

double apply_act_grad(double x, Act kind, double leaky_slope) {
  switch (kind) {
    case Act::Identity: return 1.0;
    case Act::LeakyRelu: return x > 0.0 ? 1.0 : leaky_slope;
    case Act::Elu: return x > 0.0 ? 1.0 : std::exp(x);
    case Act::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Act::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&)> pull) {
  check_open();
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix v) { return push(std::move(v), false, {}); }

Var Tape::param(Matrix v) { return push(std::move(v), true, {}); }

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!consumed_) throw TapeError("gradients unavailable before backward");
  if (n.grad.size() == 0)
    throw TapeError("no gradient recorded for this tensor (requires_grad unset or unused)");
  return n.grad;
}

Matrix& Tape::grad_buf(Var v) {
  Node& n = node(v);
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  if (!node(v).requires_grad) return;
  grad_buf(v) += g;
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows())
    throw TapeError("matmul: inner dimensions disagree (" + std::to_string(A.cols()) + " vs " +
                    std::to_string(B.rows()) + ")");
  Var out;
  out = push(A * B, requires_grad(a) || requires_grad(b), [a, b, out_id = nodes_.size()](Tape& t) {
    const Matrix& g = t.nodes_[out_id].grad;
    if (t.node(a).requires_grad) t.accumulate(a, g * t.value(b).transpose());
    if (t.node(b).requires_grad) t.accumulate(b, t.value(a).transpose() * g);
  });
  return out;
}

Var Tape::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw TapeError("add: shape mismatch");
  return push(A + B, requires_grad(a) || requires_grad(b),
              [a, b, out_id = nodes_.size()](Tape& t) {
                const Matrix& g = t.nodes_[out_id].grad;
                t.accumulate(a, g);
                t.accumulate(b, g);
              });
}

Var Tape::add_rowvec(Var a, Var row) {
  const Matrix& A = value(a);
  const Matrix& R = value(row);
  if (R.rows() != 1 || R.cols() != A.cols()) throw TapeError("add_rowvec: expected 1 x cols(a)");
  return push(A.rowwise() + R.row(0), requires_grad(a) || requires_grad(row),
              [a, row, out_id = nodes_.size()](Tape& t) {
                const Matrix& g = t.nodes_[out_id].grad;
                t.accumulate(a, g);
                if (t.node(row).requires_grad) t.accumulate(row, g.colwise().sum());
              });
}

Var Tape::scale(Var a, double c) {
  return push(value(a) * c, requires_grad(a), [a, c, out_id = nodes_.size()](Tape& t) {
    t.accumulate(a, t.nodes_[out_id].grad * c);
  });
}

Var Tape::gather_rows(Var a, std::vector<Index> rows) {
  const Matrix& A = value(a);
  Matrix out(static_cast<Index>(rows.size()), A.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= A.rows()) throw TapeError("gather_rows: index out of range");
    out.row(static_cast<Index>(k)) = A.row(rows[k]);
  }
  return push(std::move(out), requires_grad(a),
              [a, rows = std::move(rows), out_id = nodes_.size()](Tape& t) {
                const Matrix& g = t.nodes_[out_id].grad;
                Matrix& ga = t.grad_buf(a);
                for (std::size_t k = 0; k < rows.size(); ++k)
                  ga.row(rows[k]) += g.row(static_cast<Index>(k));
              });
}

Var Tape::activation(Var a, Act kind, double leaky_slope) {
  const Matrix& A = value(a);
  Matrix out = A.unaryExpr([&](double x) { return apply_act(x, kind, leaky_slope); });
  return push(std::move(out), requires_grad(a),
              [a, kind, leaky_slope, out_id = nodes_.size()](Tape& t) {
                const Matrix& g = t.nodes_[out_id].grad;
                const Matrix& in = t.value(a);
                t.accumulate(a, g.cwiseProduct(in.unaryExpr([&](double x) {
                  return apply_act_grad(x, kind, leaky_slope);
                })));
              });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw TapeError("concat_cols: empty list");
  const Index rows = value(parts[0]).rows();
  Index cols = 0;
  bool rg = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw TapeError("concat_cols: row mismatch");
    cols += value(p).cols();
    rg = rg || requires_grad(p);
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  return push(std::move(out), rg, [parts, out_id = nodes_.size()](Tape& t) {
    const Matrix& g = t.nodes_[out_id].grad;
    Index at = 0;
    for (Var p : parts) {
      const Index c = t.value(p).cols();
      t.accumulate(p, g.middleCols(at, c));
      at += c;
    }
  });
}

Var Tape::mean_of(const std::vector<Var>& parts) {
  if (parts.empty()) throw TapeError("mean_of: empty list");
  Matrix out = value(parts[0]);
  bool rg = requires_grad(parts[0]);
  for (std::size_t k = 1; k < parts.size(); ++k) {
    if (value(parts[k]).rows() != out.rows() || value(parts[k]).cols() != out.cols())
      throw TapeError("mean_of: shape mismatch");
    out += value(parts[k]);
    rg = rg || requires_grad(parts[k]);
  }
  out /= static_cast<double>(parts.size());
  return push(std::move(out), rg, [parts, out_id = nodes_.size()](Tape& t) {
    const Matrix g = t.nodes_[out_id].grad / static_cast<double>(parts.size());
    for (Var p : parts) t.accumulate(p, g);
  });
}

Var Tape::dropout(Var a, double rate, std::uint64_t seed, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw TapeError("dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return a;
  const Matrix& A = value(a);
  Matrix mask(A.rows(), A.cols());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep = 1.0 - rate;
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j) mask(i, j) = unit(rng) < keep ? 1.0 / keep : 0.0;
  Matrix out = A.cwiseProduct(mask);
  return push(std::move(out), requires_grad(a),
              [a, mask = std::move(mask), out_id = nodes_.size()](Tape& t) {
                t.accumulate(a, t.nodes_[out_id].grad.cwiseProduct(mask));
              });
}

Var Tape::segment_softmax(Var scores, const EdgeSegments& seg) {
  const Matrix& S = value(scores);
  if (S.cols() != 1 || S.rows() != seg.num_entries())
    throw TapeError("segment_softmax: scores must be E x 1 aligned with segments");
  Matrix out(S.rows(), 1);
  for (Index i = 0; i < seg.num_nodes(); ++i) {
    const Index lo = seg.row_offsets[static_cast<std::size_t>(i)];
    const Index hi = seg.row_offsets[static_cast<std::size_t>(i) + 1];
    if (lo == hi)
      throw TapeError("segment_softmax: node " + std::to_string(i) +
                      " has no in-edges; enable self-loops");
    double mx = S(lo, 0);
    for (Index k = lo + 1; k < hi; ++k) mx = std::max(mx, S(k, 0));
    double denom = 0.0;
    for (Index k = lo; k < hi; ++k) {
      out(k, 0) = std::exp(S(k, 0) - mx);
      denom += out(k, 0);
    }
    for (Index k = lo; k < hi; ++k) out(k, 0) /= denom;
  }
  return push(std::move(out), requires_grad(scores),
              [scores, &seg, out_id = nodes_.size()](Tape& t) {
                const Matrix& g = t.nodes_[out_id].grad;
                const Matrix& alpha = t.nodes_[out_id].value;
                Matrix gs(alpha.rows(), 1);
                for (Index i = 0; i < seg.num_nodes(); ++i) {
                  const Index lo = seg.row_offsets[static_cast<std::size_t>(i)];
                  const Index hi = seg.row_offsets[static_cast<std::size_t>(i) + 1];
                  double dot = 0.0;
                  for (Index k = lo; k < hi; ++k) dot += alpha(k, 0) * g(k, 0);
                  for (Index k = lo; k < hi; ++k) gs(k, 0) = alpha(k, 0) * (g(k, 0) - dot);
                }
                t.accumulate(scores, gs);
              });
}

Var Tape::segment_weighted_sum(Var alpha, Var m, const EdgeSegments& seg) {
  const Matrix& A = value(alpha);
  const Matrix& M = value(m);
  if (A.cols() != 1 || A.rows() != seg.num_entries() || M.rows() != seg.num_entries())
    throw TapeError("segment_weighted_sum: misaligned edge arrays");
  Matrix out = Matrix::Zero(seg.num_nodes(), M.cols());
  for (Index i = 0; i < seg.num_nodes(); ++i) {
    const Index lo = seg.row_offsets[static_cast<std::size_t>(i)];
    const Index hi = seg.row_offsets[static_cast<std::size_t>(i) + 1];
    for (Index k = lo; k < hi; ++k) out.row(i) += A(k, 0) * M.row(k);
  }
  return push(std::move(out), requires_grad(alpha) || requires_grad(m),
              [alpha, m, &seg, out_id = nodes_.size()](Tape& t) {
                const Matrix& g = t.nodes_[out_id].grad;
                const Matrix& A = t.value(alpha);
                const Matrix& M = t.value(m);
                const bool need_a = t.node(alpha).requires_grad;
                const bool need_m = t.node(m).requires_grad;
                Matrix ga = need_a ? Matrix(A.rows(), 1) : Matrix();
                Matrix gm = need_m ? Matrix(M.rows(), M.cols()) : Matrix();
                for (Index i = 0; i < seg.num_nodes(); ++i) {
                  const Index lo = seg.row_offsets[static_cast<std::size_t>(i)];
                  const Index hi = seg.row_offsets[static_cast<std::size_t>(i) + 1];
                  for (Index k = lo; k < hi; ++k) {
                    if (need_a) ga(k, 0) = g.row(i).dot(M.row(k));
                    if (need_m) gm.row(k) = A(k, 0) * g.row(i);
                  }
                }
                if (need_a) t.accumulate(alpha, ga);
                if (need_m) t.accumulate(m, gm);
              });
}

Var Tape::masked_cross_entropy(Var logits, const std::vector<int>& labels,
                               const std::vector<std::uint8_t>& mask) {
  const Matrix& L = value(logits);
  const Index n = L.rows();
  const Index c = L.cols();
  if (static_cast<Index>(labels.size()) != n || static_cast<Index>(mask.size()) != n)
    throw TapeError("masked_cross_entropy: labels/mask length mismatch");
  Index count = 0;
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) throw TapeError("masked_cross_entropy: label out of range");
    const double mx = L.row(i).maxCoeff();
    double lse = 0.0;
    for (Index j = 0; j < c; ++j) lse += std::exp(L(i, j) - mx);
    total += std::log(lse) + mx - L(i, y);
    ++count;
  }
  if (count == 0) throw TapeError("masked_cross_entropy: empty mask");
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(count);
  return push(std::move(out), requires_grad(logits),
              [logits, labels, mask, count, out_id = nodes_.size()](Tape& t) {
                const double g = t.nodes_[out_id].grad(0, 0);
                const Matrix& L = t.value(logits);
                Matrix gl = Matrix::Zero(L.rows(), L.cols());
                for (Index i = 0; i < L.rows(); ++i) {
                  if (!mask[static_cast<std::size_t>(i)]) continue;
                  const double mx = L.row(i).maxCoeff();
                  Eigen::RowVectorXd p = (L.row(i).array() - mx).exp();
                  p /= p.sum();
                  gl.row(i) = p * (g / static_cast<double>(count));
                  gl(i, labels[static_cast<std::size_t>(i)]) -= g / static_cast<double>(count);
                }
                t.accumulate(logits, gl);
              });
}

Var Tape::sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), requires_grad(a), [a, out_id = nodes_.size()](Tape& t) {
    const double g = t.nodes_[out_id].grad(0, 0);
    t.accumulate(a, Matrix::Constant(t.value(a).rows(), t.value(a).cols(), g));
  });
}

Var Tape::sum_squares(Var a) {
  Matrix out(1, 1);
  out(0, 0) = value(a).squaredNorm();
  return push(std::move(out), requires_grad(a), [a, out_id = nodes_.size()](Tape& t) {
    const double g = t.nodes_[out_id].grad(0, 0);
    t.accumulate(a, 2.0 * g * t.value(a));
  });
}

void Tape::backward(Var loss) {
  check_open();
  const Node& l = node(loss);
  if (l.value.rows() != 1 || l.value.cols() != 1)
    throw TapeError("backward: loss must be a 1 x 1 scalar");
  consumed_ = true;
  grad_buf(loss)(0, 0) = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.pull && n.grad.size() != 0) n.pull(*this);
  }
}

double grad_check(const ForwardFn& forward, std::vector<Matrix> params, double eps,
                  int max_entries, std::uint64_t seed) {
  auto eval = [&](const std::vector<Matrix>& ps) {
    Tape t;
    std::vector<Var> vars;
    vars.reserve(ps.size());
    for (const Matrix& p : ps) vars.push_back(t.param(p));
    const Var loss = forward(t, vars);
    const Matrix& v = t.value(loss);
    if (v.rows() != 1 || v.cols() != 1) throw TapeError("grad_check: forward must return a scalar");
    return v(0, 0);
  };

  {
    const double a = eval(params);
    const double b = eval(params);
    if (a != b)
      throw TapeError("grad_check: forward is not deterministic; disable dropout");
  }

  std::vector<Matrix> analytic;
  {
    Tape t;
    std::vector<Var> vars;
    for (const Matrix& p : params) vars.push_back(t.param(p));
    const Var loss = forward(t, vars);
    t.backward(loss);
    for (Var v : vars) {
      try {
        analytic.push_back(t.grad(v));
      } catch (const TapeError&) {
        analytic.push_back(Matrix::Zero(t.value(v).rows(), t.value(v).cols()));
      }
    }
  }

  struct Entry {
    std::size_t p;
    Index i, j;
  };
  std::vector<Entry> entries;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (Index i = 0; i < params[p].rows(); ++i)
      for (Index j = 0; j < params[p].cols(); ++j) entries.push_back({p, i, j});
  if (static_cast<int>(entries.size()) > max_entries) {
    std::mt19937_64 rng(seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(static_cast<std::size_t>(max_entries));
  }

  double worst = 0.0;
  for (const Entry& e : entries) {
    const double orig = params[e.p](e.i, e.j);
    params[e.p](e.i, e.j) = orig + eps;
    const double up = eval(params);
    params[e.p](e.i, e.j) = orig - eps;
    const double dn = eval(params);
    params[e.p](e.i, e.j) = orig;
    const double num = (up - dn) / (2.0 * eps);
    const double ana = analytic[e.p](e.i, e.j);
    const double denom = std::max(std::abs(num) + std::abs(ana), 1e-8);
    worst = std::max(worst, std::abs(num - ana) / denom);
  }
  return worst;
}

}  // namespace gatlab::ad
