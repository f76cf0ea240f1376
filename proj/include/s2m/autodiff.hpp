#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "s2m/error.hpp"

namespace s2m::ad {

using Matrix = Eigen::MatrixXd;

// Dense reverse-mode tape over 2-D f64 matrices. Every op evaluates eagerly
// and records a backward rule; backward() runs the rules in reverse creation
// order (creation order is topological by construction). One backward pass
// per tape; gradients of all requires-grad nodes are zeroed at its start, so
// non-participating parameters read back zero.
class Tape {
 public:
  using Id = std::int32_t;

  // check_finite: validate every op result and raise NumericError naming the
  // first offending node. Costs one pass over each result.
  explicit Tape(bool check_finite = false) : check_finite_(check_finite) {}

  Id leaf(Matrix value, bool requires_grad = false, std::string label = {});

  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id hadamard(Id a, Id b);
  Id matmul(Id a, Id b);
  Id scale(Id a, double factor);
  Id relu(Id a);  // subgradient at 0 is 0

  // Gathers rows; backward scatter-adds, so duplicated rows accumulate.
  Id select_rows(Id a, std::vector<int> rows);
  Id concat_rows(Id a, Id b);

  // (R, 1) column of per-row Euclidean norms. Rows with zero norm get zero
  // gradient (the subgradient choice that keeps losses finite).
  Id row_norms(Id a);
  Id sum(Id a);  // (1, 1) total

  // Per-frame block product: x is (F*J, d) in frame-major node order,
  // a is (J, J); output row (t, j) = sum_i a(j, i) * x(t, i).
  Id spatial_matmul(Id a, Id x);
  // Per-joint product across frames: a is (F, F);
  // output row (t, j) = sum_s a(t, s) * x(s, j).
  Id temporal_matmul(Id a, Id x);

  void backward(Id loss);

  const Matrix& value(Id id) const { return nodes_[check(id)].value; }
  // Valid after backward(); zero matrix for untouched requires-grad nodes.
  const Matrix& grad(Id id) const;
  bool requires_grad(Id id) const { return nodes_[check(id)].requires_grad; }
  const std::string& label(Id id) const { return nodes_[check(id)].label; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::string label;
    std::function<void(Tape&)> backward;
  };

  Id push(Matrix value, bool requires_grad, std::string label,
          std::function<void(Tape&)> backward);
  Id check(Id id) const;
  // Accumulate into a node's gradient unless it does not require one.
  void accumulate(Id id, const Matrix& grad);
  template <typename Expr>
  void accumulate_expr(Id id, const Expr& grad);

  std::vector<Node> nodes_;
  bool check_finite_;
  bool ran_backward_ = false;
};

}  // namespace s2m::ad
