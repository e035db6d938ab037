#pragma once

#include <memory>
#include <vector>

#include "gcsntk/types.hpp"

namespace gcsntk {

/// Reverse-mode tape over the closed set of primitive operations the
/// condensation pipeline needs. Values are computed eagerly at record time;
/// backward() walks the record in exact reverse order and accumulates
/// adjoints into every node that depends on a leaf.
///
/// The arc-cosine ops clamp their argument into [-1, 1] in the forward
/// pass; the backward pass clamps into [-1 + 1e-7, 1 - 1e-7] to bound the
/// 1/sqrt(1 - rho^2) factor at the endpoints.
class Tape {
 public:
  using NodeId = int;

  static constexpr double kBackwardClamp = 1e-7;

  /// Constant by value / by reference (referee must outlive the tape).
  NodeId constant(Matrix v);
  NodeId constant_ref(const Matrix* v);
  /// Learnable leaf; receives an accumulated adjoint in backward().
  NodeId leaf(Matrix v);

  // C = op(A) op(B) with optional transposes.
  NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);
  // C = S A with S a constant sparse matrix (not owned).
  NodeId sparse_matmul(const SparseMatrix* s, NodeId a);
  // C = diag(v) A with v a column-vector node.
  NodeId row_scale(NodeId v, NodeId a);
  // C = A diag(v).
  NodeId col_scale(NodeId a, NodeId v);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId row_sum(NodeId a);    // [n x m] -> [n x 1]
  NodeId take_diag(NodeId a);  // [m x m] -> [m x 1]
  NodeId pow_elem(NodeId a, double exponent);
  NodeId sigmoid(NodeId a);
  NodeId sym_avg(NodeId a);       // (A + A^T) / 2
  NodeId set_diag_one(NodeId a);  // diagonal forced to 1, adjoint zeroed there
  NodeId take_rows(NodeId a, std::vector<Index> rows);
  // kappa maps applied elementwise to a correlation-valued node.
  NodeId kappa_dot(NodeId rho, double alpha);
  NodeId kappa_hat(NodeId rho, double alpha);
  // C = (A + lambda I)^{-1} B via SPD factorization (jitter retry inside).
  // Adjoint of A is -(A + lambda I)^{-1} Gbar C^T, no symmetrization.
  NodeId spd_solve(NodeId a, NodeId b, double lambda);
  // C = 0.5 || target - pred ||_F^2 as a 1x1 node.
  NodeId mse_half(NodeId pred, NodeId target);
  // Identity forward, zero backward.
  NodeId detach(NodeId a);

  const Matrix& value(NodeId id) const;
  bool requires_grad(NodeId id) const;

  /// Seeds d(loss)/d(loss) = 1 and accumulates adjoints in reverse
  /// topological (= reverse record) order.
  void backward(NodeId loss);

  /// Accumulated adjoint of a node; zero-sized if none reached it.
  const Matrix& adjoint(NodeId id) const;

  std::size_t num_ops() const { return ops_.size(); }

 private:
  enum class OpKind {
    MatMul,
    SparseMatMul,
    RowScale,
    ColScale,
    Hadamard,
    Add,
    Scale,
    RowSum,
    TakeDiag,
    PowElem,
    Sigmoid,
    SymAvg,
    SetDiagOne,
    TakeRows,
    KappaDot,
    KappaHat,
    SpdSolve,
    MseHalf,
    Detach,
  };

  struct Node {
    Matrix value;
    const Matrix* view = nullptr;  // set for constant_ref
    Matrix adjoint;
    bool requires_grad = false;

    const Matrix& val() const { return view ? *view : value; }
  };

  struct Op {
    OpKind kind;
    NodeId a = -1;
    NodeId b = -1;
    NodeId out = -1;
    double scalar = 0.0;  // scale factor / exponent / alpha / lambda
    bool trans_a = false;
    bool trans_b = false;
    const SparseMatrix* sparse = nullptr;
    std::shared_ptr<Eigen::LLT<Matrix>> factorization;
    std::vector<Index> rows;
  };

  NodeId push_node(Matrix v, bool requires);
  NodeId record(Op op, Matrix value);
  void accumulate(NodeId id, const Matrix& grad);

  std::vector<Node> nodes_;
  std::vector<Op> ops_;
};

}  // namespace gcsntk
