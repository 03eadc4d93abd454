#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace gatlab {

using Matrix = Eigen::MatrixXd;
using Index = std::int64_t;

namespace ad {

struct TapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Act { Identity, LeakyRelu, Elu, Tanh, Sigmoid };

Act act_from_string(const std::string& s);
std::string to_string(Act a);

/// Per-edge destination segments: entry k of the edge array belongs to the
/// in-neighborhood of node dst[k]; row_offsets delimits the segments and is
/// shared with the graph's CSR layout.
struct EdgeSegments {
  std::vector<Index> row_offsets;
  std::vector<Index> dst;

  Index num_nodes() const { return static_cast<Index>(row_offsets.size()) - 1; }
  Index num_entries() const { return static_cast<Index>(dst.size()); }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over dense 64-bit matrices. Single-threaded; one
/// backward() per tape.
class Tape {
 public:
  Var constant(Matrix v);
  Var param(Matrix v);  // requires-grad leaf

  const Matrix& value(Var v) const { return node(v).value; }
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_rowvec(Var a, Var row);  // row broadcast over rows of a
  Var scale(Var a, double c);
  Var gather_rows(Var a, std::vector<Index> rows);
  Var activation(Var a, Act kind, double leaky_slope = 0.2);
  Var concat_cols(const std::vector<Var>& parts);
  Var mean_of(const std::vector<Var>& parts);
  Var dropout(Var a, double rate, std::uint64_t seed, bool training);
  // Segment ops keep a reference to `seg` for the backward pass; the
  // segments must outlive the tape.
  Var segment_softmax(Var scores, const EdgeSegments& seg);
  Var segment_weighted_sum(Var alpha, Var m, const EdgeSegments& seg);
  Var masked_cross_entropy(Var logits, const std::vector<int>& labels,
                           const std::vector<std::uint8_t>& mask);
  Var sum(Var a);
  Var sum_squares(Var a);

  /// Seeds d(loss)/d(loss) = 1 and pulls gradients back through the tape.
  /// The tape is consumed: no further ops or backward calls are allowed.
  void backward(Var loss);

  /// Transfers ownership of an auxiliary object (e.g. segments built on the
  /// fly) to the tape so backward closures referencing it stay valid.
  template <class T>
  const T& adopt(T obj) {
    auto p = std::make_shared<T>(std::move(obj));
    keep_alive_.push_back(p);
    return *p;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&)> pull;  // empty for leaves
  };

  std::vector<Node> nodes_;
  std::vector<std::shared_ptr<void>> keep_alive_;
  bool consumed_ = false;

  Node& node(Var v) {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
      throw TapeError("invalid tape handle");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  const Node& node(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
      throw TapeError("invalid tape handle");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  Matrix& grad_buf(Var v);
  void accumulate(Var v, const Matrix& g);
  Var push(Matrix value, bool requires_grad, std::function<void(Tape&)> pull);
  void check_open() const {
    if (consumed_) throw TapeError("tape already consumed by backward");
  }
};

double apply_act(double x, Act kind, double leaky_slope);
double apply_act_grad(double x, Act kind, double leaky_slope);

/// Forward closure for gradient checking: builds the scalar loss on the given
/// tape from parameter leaves (one Var per parameter matrix, same order).
using ForwardFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Central-difference check of backward() on a subsample of parameter
/// entries. Throws TapeError if two evaluations of the forward disagree
/// (nondeterministic forward, e.g. live dropout). Returns the worst relative
/// error over checked entries.
double grad_check(const ForwardFn& forward, std::vector<Matrix> params, double eps = 1e-5,
                  int max_entries = 200, std::uint64_t seed = 0);

}  // namespace ad
}  // namespace gatlab
