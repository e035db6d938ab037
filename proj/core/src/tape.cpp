#include "gcsntk/tape.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "gcsntk/errors.hpp"

namespace gcsntk {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::ArrayXXd clamp_unit(const Matrix& m) {
  return m.array().min(1.0).max(-1.0);
}

Eigen::ArrayXXd clamp_backward(const Matrix& m) {
  return m.array().min(1.0 - Tape::kBackwardClamp).max(-1.0 + Tape::kBackwardClamp);
}

std::shared_ptr<Eigen::LLT<Matrix>> factorize_spd(const Matrix& a, double lambda) {
  const Index m = a.rows();
  Matrix reg = a + lambda * Matrix::Identity(m, m);
  auto llt = std::make_shared<Eigen::LLT<Matrix>>(reg);
  if (llt->info() == Eigen::Success) return llt;
  const double jitter = 1e-10 * reg.trace() / static_cast<double>(m);
  reg.diagonal().array() += jitter;
  llt = std::make_shared<Eigen::LLT<Matrix>>(reg);
  if (llt->info() == Eigen::Success) return llt;
  Eigen::LDLT<Matrix> ldlt(reg);
  const double smallest = ldlt.vectorD().minCoeff();
  throw SingularSystemError("tape spd_solve: factorization failed (smallest pivot " +
                                std::to_string(smallest) + ")",
                            smallest);
}

}  // namespace

Tape::NodeId Tape::push_node(Matrix v, bool requires) {
  Node n;
  n.value = std::move(v);
  n.requires_grad = requires;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::constant(Matrix v) { return push_node(std::move(v), false); }

Tape::NodeId Tape::constant_ref(const Matrix* v) {
  Node n;
  n.view = v;
  n.requires_grad = false;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::leaf(Matrix v) { return push_node(std::move(v), true); }

Tape::NodeId Tape::record(Op op, Matrix value) {
  bool requires = false;
  if (op.a >= 0) requires |= nodes_[static_cast<std::size_t>(op.a)].requires_grad;
  if (op.b >= 0) requires |= nodes_[static_cast<std::size_t>(op.b)].requires_grad;
  if (op.kind == OpKind::Detach) requires = false;
  op.out = push_node(std::move(value), requires);
  ops_.push_back(std::move(op));
  return ops_.back().out;
}

const Matrix& Tape::value(NodeId id) const {
  return nodes_[static_cast<std::size_t>(id)].val();
}

bool Tape::requires_grad(NodeId id) const {
  return nodes_[static_cast<std::size_t>(id)].requires_grad;
}

const Matrix& Tape::adjoint(NodeId id) const {
  return nodes_[static_cast<std::size_t>(id)].adjoint;
}

void Tape::accumulate(NodeId id, const Matrix& grad) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (n.adjoint.size() == 0) n.adjoint = Matrix::Zero(n.val().rows(), n.val().cols());
  n.adjoint += grad;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b, bool trans_a, bool trans_b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  const Index inner_a = trans_a ? va.rows() : va.cols();
  const Index inner_b = trans_b ? vb.cols() : vb.rows();
  if (inner_a != inner_b) throw DimensionError("tape matmul: shape mismatch");
  Matrix out;
  if (!trans_a && !trans_b)
    out = va * vb;
  else if (!trans_a && trans_b)
    out = va * vb.transpose();
  else if (trans_a && !trans_b)
    out = va.transpose() * vb;
  else
    out = va.transpose() * vb.transpose();
  Op op{OpKind::MatMul, a, b};
  op.trans_a = trans_a;
  op.trans_b = trans_b;
  return record(std::move(op), std::move(out));
}

Tape::NodeId Tape::sparse_matmul(const SparseMatrix* s, NodeId a) {
  const Matrix& va = value(a);
  if (s->cols() != va.rows()) throw DimensionError("tape sparse_matmul: shape mismatch");
  Matrix out = (*s) * va;
  Op op{OpKind::SparseMatMul, a, -1};
  op.sparse = s;
  return record(std::move(op), std::move(out));
}

Tape::NodeId Tape::row_scale(NodeId v, NodeId a) {
  const Matrix& vv = value(v);
  const Matrix& va = value(a);
  if (vv.cols() != 1 || vv.rows() != va.rows())
    throw DimensionError("tape row_scale: vector shape mismatch");
  Matrix out = vv.col(0).asDiagonal() * va;
  return record(Op{OpKind::RowScale, v, a}, std::move(out));
}

Tape::NodeId Tape::col_scale(NodeId a, NodeId v) {
  const Matrix& va = value(a);
  const Matrix& vv = value(v);
  if (vv.cols() != 1 || vv.rows() != va.cols())
    throw DimensionError("tape col_scale: vector shape mismatch");
  Matrix out = va * vv.col(0).asDiagonal();
  return record(Op{OpKind::ColScale, a, v}, std::move(out));
}

Tape::NodeId Tape::hadamard(NodeId a, NodeId b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw DimensionError("tape hadamard: shape mismatch");
  return record(Op{OpKind::Hadamard, a, b}, va.cwiseProduct(vb));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw DimensionError("tape add: shape mismatch");
  return record(Op{OpKind::Add, a, b}, va + vb);
}

Tape::NodeId Tape::scale(NodeId a, double s) {
  Op op{OpKind::Scale, a, -1};
  op.scalar = s;
  return record(std::move(op), s * value(a));
}

Tape::NodeId Tape::row_sum(NodeId a) {
  return record(Op{OpKind::RowSum, a, -1}, value(a).rowwise().sum());
}

Tape::NodeId Tape::take_diag(NodeId a) {
  const Matrix& va = value(a);
  if (va.rows() != va.cols()) throw DimensionError("tape take_diag: not square");
  return record(Op{OpKind::TakeDiag, a, -1}, Matrix(va.diagonal()));
}

Tape::NodeId Tape::pow_elem(NodeId a, double exponent) {
  Op op{OpKind::PowElem, a, -1};
  op.scalar = exponent;
  return record(std::move(op), value(a).array().pow(exponent).matrix());
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  Matrix out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
  return record(Op{OpKind::Sigmoid, a, -1}, std::move(out));
}

Tape::NodeId Tape::sym_avg(NodeId a) {
  const Matrix& va = value(a);
  if (va.rows() != va.cols()) throw DimensionError("tape sym_avg: not square");
  return record(Op{OpKind::SymAvg, a, -1}, 0.5 * (va + va.transpose()));
}

Tape::NodeId Tape::set_diag_one(NodeId a) {
  Matrix out = value(a);
  out.diagonal().setOnes();
  return record(Op{OpKind::SetDiagOne, a, -1}, std::move(out));
}

Tape::NodeId Tape::take_rows(NodeId a, std::vector<Index> rows) {
  const Matrix& va = value(a);
  Matrix out(static_cast<Index>(rows.size()), va.cols());
  for (Index i = 0; i < out.rows(); ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= va.rows()) throw RangeError("tape take_rows: row out of range");
    out.row(i) = va.row(r);
  }
  Op op{OpKind::TakeRows, a, -1};
  op.rows = std::move(rows);
  return record(std::move(op), std::move(out));
}

Tape::NodeId Tape::kappa_dot(NodeId rho, double alpha) {
  const double sc = alpha / (2.0 * kPi);
  Matrix out = (sc * (kPi - clamp_unit(value(rho)).acos())).matrix();
  Op op{OpKind::KappaDot, rho, -1};
  op.scalar = alpha;
  return record(std::move(op), std::move(out));
}

Tape::NodeId Tape::kappa_hat(NodeId rho, double alpha) {
  const double sc = alpha / (2.0 * kPi);
  Eigen::ArrayXXd r = clamp_unit(value(rho));
  Matrix out = (sc * (kPi - r.acos() + (1.0 - r.square()).max(0.0).sqrt())).matrix();
  Op op{OpKind::KappaHat, rho, -1};
  op.scalar = alpha;
  return record(std::move(op), std::move(out));
}

Tape::NodeId Tape::spd_solve(NodeId a, NodeId b, double lambda) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.rows() != va.cols() || va.cols() != vb.rows())
    throw DimensionError("tape spd_solve: shape mismatch");
  Op op{OpKind::SpdSolve, a, b};
  op.scalar = lambda;
  op.factorization = factorize_spd(va, lambda);
  Matrix out = op.factorization->solve(vb);
  return record(std::move(op), std::move(out));
}

Tape::NodeId Tape::mse_half(NodeId pred, NodeId target) {
  const Matrix& vp = value(pred);
  const Matrix& vt = value(target);
  if (vp.rows() != vt.rows() || vp.cols() != vt.cols())
    throw DimensionError("tape mse_half: shape mismatch");
  Matrix out(1, 1);
  out(0, 0) = 0.5 * (vt - vp).squaredNorm();
  return record(Op{OpKind::MseHalf, pred, target}, std::move(out));
}

Tape::NodeId Tape::detach(NodeId a) {
  return record(Op{OpKind::Detach, a, -1}, value(a));
}

void Tape::backward(NodeId loss) {
  Node& seed = nodes_[static_cast<std::size_t>(loss)];
  if (seed.val().size() != 1)
    throw DimensionError("tape backward: loss node must be 1x1");
  seed.adjoint = Matrix::Ones(1, 1);

  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    const Op& op = *it;
    const Node& out = nodes_[static_cast<std::size_t>(op.out)];
    if (!out.requires_grad || out.adjoint.size() == 0) continue;
    const Matrix& g = out.adjoint;

    switch (op.kind) {
      case OpKind::MatMul: {
        const Matrix& va = value(op.a);
        const Matrix& vb = value(op.b);
        // C = op(A) op(B): chain through each transpose flag combination.
        if (!op.trans_a && !op.trans_b) {
          accumulate(op.a, g * vb.transpose());
          accumulate(op.b, va.transpose() * g);
        } else if (!op.trans_a && op.trans_b) {
          accumulate(op.a, g * vb);
          accumulate(op.b, g.transpose() * va);
        } else if (op.trans_a && !op.trans_b) {
          accumulate(op.a, vb * g.transpose());
          accumulate(op.b, va * g);
        } else {
          accumulate(op.a, vb.transpose() * g.transpose());
          accumulate(op.b, g.transpose() * va.transpose());
        }
        break;
      }
      case OpKind::SparseMatMul:
        accumulate(op.a, op.sparse->transpose() * g);
        break;
      case OpKind::RowScale: {
        const Matrix& vv = value(op.a);
        const Matrix& va = value(op.b);
        accumulate(op.a, g.cwiseProduct(va).rowwise().sum());
        accumulate(op.b, vv.col(0).asDiagonal() * g);
        break;
      }
      case OpKind::ColScale: {
        const Matrix& va = value(op.a);
        const Matrix& vv = value(op.b);
        accumulate(op.a, g * vv.col(0).asDiagonal());
        accumulate(op.b, g.cwiseProduct(va).colwise().sum().transpose());
        break;
      }
      case OpKind::Hadamard:
        accumulate(op.a, g.cwiseProduct(value(op.b)));
        accumulate(op.b, g.cwiseProduct(value(op.a)));
        break;
      case OpKind::Add:
        accumulate(op.a, g);
        accumulate(op.b, g);
        break;
      case OpKind::Scale:
        accumulate(op.a, op.scalar * g);
        break;
      case OpKind::RowSum:
        accumulate(op.a, g.col(0).replicate(1, value(op.a).cols()));
        break;
      case OpKind::TakeDiag: {
        Matrix ga = Matrix::Zero(value(op.a).rows(), value(op.a).cols());
        ga.diagonal() = g.col(0);
        accumulate(op.a, ga);
        break;
      }
      case OpKind::PowElem: {
        const double p = op.scalar;
        Matrix deriv = (p * value(op.a).array().pow(p - 1.0)).matrix();
        accumulate(op.a, g.cwiseProduct(deriv));
        break;
      }
      case OpKind::Sigmoid: {
        const Matrix& s = out.val();
        accumulate(op.a, g.cwiseProduct(s.cwiseProduct(Matrix::Ones(s.rows(), s.cols()) - s)));
        break;
      }
      case OpKind::SymAvg:
        accumulate(op.a, 0.5 * (g + g.transpose()));
        break;
      case OpKind::SetDiagOne: {
        Matrix ga = g;
        ga.diagonal().setZero();
        accumulate(op.a, ga);
        break;
      }
      case OpKind::TakeRows: {
        Matrix ga = Matrix::Zero(value(op.a).rows(), value(op.a).cols());
        for (Index i = 0; i < g.rows(); ++i)
          ga.row(op.rows[static_cast<std::size_t>(i)]) += g.row(i);
        accumulate(op.a, ga);
        break;
      }
      case OpKind::KappaDot: {
        // d/d rho (alpha/2pi)(pi - arccos rho) = (alpha/2pi) / sqrt(1 - rho^2)
        const double sc = op.scalar / (2.0 * kPi);
        Eigen::ArrayXXd r = clamp_backward(value(op.a));
        Matrix deriv = (sc / (1.0 - r.square()).sqrt()).matrix();
        accumulate(op.a, g.cwiseProduct(deriv));
        break;
      }
      case OpKind::KappaHat: {
        // d/d rho = (alpha/2pi) sqrt((1 - rho) / (1 + rho))
        const double sc = op.scalar / (2.0 * kPi);
        Eigen::ArrayXXd r = clamp_backward(value(op.a));
        Matrix deriv = (sc * ((1.0 - r) / (1.0 + r)).sqrt()).matrix();
        accumulate(op.a, g.cwiseProduct(deriv));
        break;
      }
      case OpKind::SpdSolve: {
        const Matrix& w = out.val();
        Matrix solved = op.factorization->solve(g);
        accumulate(op.a, -solved * w.transpose());
        accumulate(op.b, solved);
        break;
      }
      case OpKind::MseHalf: {
        const double gs = g(0, 0);
        accumulate(op.a, gs * (value(op.a) - value(op.b)));
        accumulate(op.b, gs * (value(op.b) - value(op.a)));
        break;
      }
      case OpKind::Detach:
        break;
    }
  }
}

}  // namespace gcsntk
