#include "gcsntk/krr.hpp"

#include <cmath>
#include <string>

#include "gcsntk/errors.hpp"

namespace gcsntk {

namespace {

// Factorizes K + lambda I, with the one-shot jitter retry.
std::shared_ptr<Eigen::LLT<Matrix>> factorize_regularized(const Matrix& k,
                                                          double lambda) {
  if (k.rows() != k.cols())
    throw DimensionError("solve_regularized: kernel must be square");
  if (lambda < 0.0) throw RangeError("solve_regularized: lambda must be >= 0");
  const Index m = k.rows();
  Matrix reg = k + lambda * Matrix::Identity(m, m);
  auto llt = std::make_shared<Eigen::LLT<Matrix>>(reg);
  if (llt->info() == Eigen::Success) return llt;

  const double jitter = 1e-10 * reg.trace() / static_cast<double>(m);
  reg.diagonal().array() += jitter;
  llt = std::make_shared<Eigen::LLT<Matrix>>(reg);
  if (llt->info() == Eigen::Success) return llt;

  Eigen::LDLT<Matrix> ldlt(reg);
  const double smallest = ldlt.vectorD().minCoeff();
  throw SingularSystemError(
      "solve_regularized: factorization failed after jitter retry "
      "(smallest pivot " +
          std::to_string(smallest) + ")",
      smallest);
}

}  // namespace

KRRSolution::KRRSolution(const Matrix& k_ss, double lambda, const Matrix& y_s)
    : lambda_(lambda), factorization_(factorize_regularized(k_ss, lambda)) {
  if (y_s.rows() != k_ss.rows())
    throw DimensionError("KRRSolution: kernel and label row counts differ");
  weights_ = factorization_->solve(y_s);
}

Matrix KRRSolution::solve(const Matrix& b) const { return factorization_->solve(b); }

Matrix KRRSolution::predict(const Matrix& k_ts) const {
  if (k_ts.cols() != weights_.rows())
    throw DimensionError("predict: cross-kernel/weights shape mismatch");
  return k_ts * weights_;
}

Matrix solve_regularized(const Matrix& k, double lambda, const Matrix& b) {
  if (b.rows() != k.rows())
    throw DimensionError("solve_regularized: right-hand side rows mismatch");
  return factorize_regularized(k, lambda)->solve(b);
}

Matrix fit_predict(const Matrix& k_ss, const Matrix& k_ts, const Matrix& y_s,
                   double lambda) {
  if (k_ts.cols() != k_ss.rows())
    throw DimensionError("fit_predict: cross-kernel/kernel shape mismatch");
  return k_ts * solve_regularized(k_ss, lambda, y_s);
}

double mse_loss(const Matrix& pred, const Matrix& y_t) {
  if (pred.rows() != y_t.rows() || pred.cols() != y_t.cols())
    throw DimensionError("mse_loss: shapes differ");
  return 0.5 * (y_t - pred).squaredNorm();
}

double accuracy(const Matrix& pred, const std::vector<int>& labels) {
  if (pred.rows() == 0) throw UndefinedAccuracyError("accuracy of empty input");
  if (pred.rows() != static_cast<Index>(labels.size()))
    throw DimensionError("accuracy: prediction/label row counts differ");
  Index hits = 0;
  for (Index i = 0; i < pred.rows(); ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= pred.cols())
      throw RangeError("accuracy: label " + std::to_string(label) +
                       " outside prediction columns");
    int best = 0;
    for (Index j = 1; j < pred.cols(); ++j)
      if (pred(i, j) > pred(i, best)) best = static_cast<int>(j);
    if (best == label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.rows());
}

}  // namespace gcsntk
