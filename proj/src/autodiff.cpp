#include "s2m/autodiff.hpp"

#include <cmath>
#include <utility>

namespace s2m::ad {

Tape::Id Tape::push(Matrix value, bool requires_grad, std::string label,
                    std::function<void(Tape&)> backward) {
  if (check_finite_ && !value.allFinite()) {
    throw NumericError("non-finite values in tensor '" +
                       (label.empty() ? "unnamed" : label) + "' (node #" +
                       std::to_string(nodes_.size()) + ")");
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.label = std::move(label);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::check(Id id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw IndexError("tape node " + std::to_string(id) + " does not exist");
  }
  return id;
}

void Tape::accumulate(Id id, const Matrix& grad) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return;
  node.grad += grad;
}

template <typename Expr>
void Tape::accumulate_expr(Id id, const Expr& grad) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return;
  node.grad.noalias() += grad;
}

const Matrix& Tape::grad(Id id) const {
  const Node& node = nodes_[check(id)];
  if (!node.requires_grad) {
    throw ValueError("node '" + node.label + "' does not require gradients");
  }
  if (!ran_backward_) {
    throw ValueError("grad() before backward()");
  }
  return node.grad;
}

Tape::Id Tape::leaf(Matrix value, bool requires_grad, std::string label) {
  return push(std::move(value), requires_grad, std::move(label), {});
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shapes (" + std::to_string(a.rows()) +
                     "x" + std::to_string(a.cols()) + ") and (" +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                     ") differ");
  }
}

}  // namespace

Tape::Id Tape::add(Id a, Id b) {
  check(a);
  check(b);
  check_same_shape(nodes_[a].value, nodes_[b].value, "add");
  const bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  Id out = push(nodes_[a].value + nodes_[b].value, rg, "add", {});
  nodes_[out].backward = [a, b, out](Tape& t) {
    t.accumulate(a, t.nodes_[out].grad);
    t.accumulate(b, t.nodes_[out].grad);
  };
  return out;
}

Tape::Id Tape::sub(Id a, Id b) {
  check(a);
  check(b);
  check_same_shape(nodes_[a].value, nodes_[b].value, "sub");
  const bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  Id out = push(nodes_[a].value - nodes_[b].value, rg, "sub", {});
  nodes_[out].backward = [a, b, out](Tape& t) {
    t.accumulate(a, t.nodes_[out].grad);
    t.accumulate_expr(b, -t.nodes_[out].grad);
  };
  return out;
}

Tape::Id Tape::hadamard(Id a, Id b) {
  check(a);
  check(b);
  check_same_shape(nodes_[a].value, nodes_[b].value, "hadamard");
  const bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  Id out = push(nodes_[a].value.cwiseProduct(nodes_[b].value), rg, "hadamard", {});
  nodes_[out].backward = [a, b, out](Tape& t) {
    const Matrix& g = t.nodes_[out].grad;
    t.accumulate_expr(a, g.cwiseProduct(t.nodes_[b].value));
    t.accumulate_expr(b, g.cwiseProduct(t.nodes_[a].value));
  };
  return out;
}

Tape::Id Tape::matmul(Id a, Id b) {
  check(a);
  check(b);
  if (nodes_[a].value.cols() != nodes_[b].value.rows()) {
    throw ShapeError("matmul: inner dimensions " +
                     std::to_string(nodes_[a].value.cols()) + " and " +
                     std::to_string(nodes_[b].value.rows()) + " differ");
  }
  const bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  Id out = push(nodes_[a].value * nodes_[b].value, rg, "matmul", {});
  nodes_[out].backward = [a, b, out](Tape& t) {
    const Matrix& g = t.nodes_[out].grad;
    t.accumulate_expr(a, g * t.nodes_[b].value.transpose());
    t.accumulate_expr(b, t.nodes_[a].value.transpose() * g);
  };
  return out;
}

Tape::Id Tape::scale(Id a, double factor) {
  check(a);
  Id out = push(nodes_[a].value * factor, nodes_[a].requires_grad, "scale", {});
  nodes_[out].backward = [a, out, factor](Tape& t) {
    t.accumulate_expr(a, factor * t.nodes_[out].grad);
  };
  return out;
}

Tape::Id Tape::relu(Id a) {
  check(a);
  Id out = push(nodes_[a].value.cwiseMax(0.0), nodes_[a].requires_grad, "relu", {});
  nodes_[out].backward = [a, out](Tape& t) {
    const Matrix mask =
        (t.nodes_[a].value.array() > 0.0).cast<double>().matrix();
    t.accumulate_expr(a, t.nodes_[out].grad.cwiseProduct(mask));
  };
  return out;
}

Tape::Id Tape::select_rows(Id a, std::vector<int> rows) {
  check(a);
  const Matrix& v = nodes_[a].value;
  Matrix picked(static_cast<Eigen::Index>(rows.size()), v.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= v.rows()) {
      throw IndexError("select_rows: row " + std::to_string(rows[k]) +
                       " out of range [0, " + std::to_string(v.rows() - 1) + "]");
    }
    picked.row(static_cast<Eigen::Index>(k)) = v.row(rows[k]);
  }
  Id out = push(std::move(picked), nodes_[a].requires_grad, "select_rows", {});
  nodes_[out].backward = [a, out, rows = std::move(rows)](Tape& t) {
    if (!t.nodes_[a].requires_grad) return;
    const Matrix& g = t.nodes_[out].grad;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      t.nodes_[a].grad.row(rows[k]) += g.row(static_cast<Eigen::Index>(k));
    }
  };
  return out;
}

Tape::Id Tape::concat_rows(Id a, Id b) {
  check(a);
  check(b);
  const Matrix& va = nodes_[a].value;
  const Matrix& vb = nodes_[b].value;
  if (va.cols() != vb.cols()) {
    throw ShapeError("concat_rows: column counts " + std::to_string(va.cols()) +
                     " and " + std::to_string(vb.cols()) + " differ");
  }
  Matrix joined(va.rows() + vb.rows(), va.cols());
  joined.topRows(va.rows()) = va;
  joined.bottomRows(vb.rows()) = vb;
  const bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  Id out = push(std::move(joined), rg, "concat_rows", {});
  nodes_[out].backward = [a, b, out](Tape& t) {
    const Matrix& g = t.nodes_[out].grad;
    const Eigen::Index ra = t.nodes_[a].value.rows();
    t.accumulate_expr(a, g.topRows(ra));
    t.accumulate_expr(b, g.bottomRows(g.rows() - ra));
  };
  return out;
}

Tape::Id Tape::row_norms(Id a) {
  check(a);
  const Matrix& v = nodes_[a].value;
  Matrix norms(v.rows(), 1);
  for (Eigen::Index r = 0; r < v.rows(); ++r) norms(r, 0) = v.row(r).norm();
  Id out = push(std::move(norms), nodes_[a].requires_grad, "row_norms", {});
  nodes_[out].backward = [a, out](Tape& t) {
    if (!t.nodes_[a].requires_grad) return;
    const Matrix& g = t.nodes_[out].grad;
    const Matrix& v = t.nodes_[a].value;
    const Matrix& n = t.nodes_[out].value;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      if (n(r, 0) > 0.0) {
        t.nodes_[a].grad.row(r) += (g(r, 0) / n(r, 0)) * v.row(r);
      }
    }
  };
  return out;
}

Tape::Id Tape::sum(Id a) {
  check(a);
  Matrix total(1, 1);
  total(0, 0) = nodes_[a].value.sum();
  Id out = push(std::move(total), nodes_[a].requires_grad, "sum", {});
  nodes_[out].backward = [a, out](Tape& t) {
    if (!t.nodes_[a].requires_grad) return;
    t.nodes_[a].grad.array() += t.nodes_[out].grad(0, 0);
  };
  return out;
}

Tape::Id Tape::spatial_matmul(Id a, Id x) {
  check(a);
  check(x);
  const Matrix& av = nodes_[a].value;
  const Matrix& xv = nodes_[x].value;
  if (av.rows() != av.cols()) {
    throw ShapeError("spatial_matmul: spatial matrix must be square");
  }
  const Eigen::Index joints = av.rows();
  if (joints == 0 || xv.rows() % joints != 0) {
    throw ShapeError("spatial_matmul: node rows " + std::to_string(xv.rows()) +
                     " not a multiple of " + std::to_string(joints) + " joints");
  }
  const Eigen::Index frames = xv.rows() / joints;
  Matrix y(xv.rows(), xv.cols());
  for (Eigen::Index t = 0; t < frames; ++t) {
    y.middleRows(t * joints, joints).noalias() =
        av * xv.middleRows(t * joints, joints);
  }
  const bool rg = nodes_[a].requires_grad || nodes_[x].requires_grad;
  Id out = push(std::move(y), rg, "spatial_matmul", {});
  nodes_[out].backward = [a, x, out, frames, joints](Tape& t) {
    const Matrix& g = t.nodes_[out].grad;
    const Matrix& av = t.nodes_[a].value;
    const Matrix& xv = t.nodes_[x].value;
    if (t.nodes_[a].requires_grad) {
      for (Eigen::Index f = 0; f < frames; ++f) {
        t.nodes_[a].grad.noalias() += g.middleRows(f * joints, joints) *
                                      xv.middleRows(f * joints, joints).transpose();
      }
    }
    if (t.nodes_[x].requires_grad) {
      for (Eigen::Index f = 0; f < frames; ++f) {
        t.nodes_[x].grad.middleRows(f * joints, joints).noalias() +=
            av.transpose() * g.middleRows(f * joints, joints);
      }
    }
  };
  return out;
}

Tape::Id Tape::temporal_matmul(Id a, Id x) {
  check(a);
  check(x);
  const Matrix& av = nodes_[a].value;
  const Matrix& xv = nodes_[x].value;
  if (av.rows() != av.cols()) {
    throw ShapeError("temporal_matmul: temporal matrix must be square");
  }
  const Eigen::Index frames = av.rows();
  if (frames == 0 || xv.rows() % frames != 0) {
    throw ShapeError("temporal_matmul: node rows " + std::to_string(xv.rows()) +
                     " not a multiple of " + std::to_string(frames) + " frames");
  }
  const Eigen::Index joints = xv.rows() / frames;
  Matrix y = Matrix::Zero(xv.rows(), xv.cols());
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index s = 0; s < frames; ++s) {
      const double w = av(t, s);
      if (w == 0.0) continue;
      y.middleRows(t * joints, joints) += w * xv.middleRows(s * joints, joints);
    }
  }
  const bool rg = nodes_[a].requires_grad || nodes_[x].requires_grad;
  Id out = push(std::move(y), rg, "temporal_matmul", {});
  nodes_[out].backward = [a, x, out, frames, joints](Tape& t) {
    const Matrix& g = t.nodes_[out].grad;
    const Matrix& av = t.nodes_[a].value;
    const Matrix& xv = t.nodes_[x].value;
    if (t.nodes_[a].requires_grad) {
      for (Eigen::Index ti = 0; ti < frames; ++ti) {
        for (Eigen::Index s = 0; s < frames; ++s) {
          t.nodes_[a].grad(ti, s) +=
              g.middleRows(ti * joints, joints)
                  .cwiseProduct(xv.middleRows(s * joints, joints))
                  .sum();
        }
      }
    }
    if (t.nodes_[x].requires_grad) {
      for (Eigen::Index s = 0; s < frames; ++s) {
        for (Eigen::Index ti = 0; ti < frames; ++ti) {
          const double w = av(ti, s);
          if (w == 0.0) continue;
          t.nodes_[x].grad.middleRows(s * joints, joints) +=
              w * g.middleRows(ti * joints, joints);
        }
      }
    }
  };
  return out;
}

void Tape::backward(Id loss) {
  check(loss);
  const Node& top = nodes_[loss];
  if (top.value.rows() != 1 || top.value.cols() != 1) {
    throw ShapeError("backward: loss must be scalar, got " +
                     std::to_string(top.value.rows()) + "x" +
                     std::to_string(top.value.cols()));
  }
  if (!top.requires_grad) {
    throw ValueError("backward: loss is not connected to any parameter");
  }
  for (Node& node : nodes_) {
    if (node.requires_grad) {
      node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    }
  }
  nodes_[loss].grad(0, 0) = 1.0;
  ran_backward_ = true;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->requires_grad && it->backward) it->backward(*this);
  }
}

}  // namespace s2m::ad
