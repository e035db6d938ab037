#pragma once

#include <memory>
#include <vector>

#include "gcsntk/types.hpp"

namespace gcsntk {

/// Closed-form ridge solution (K_SS + lambda I)^{-1} Y_S with the
/// factorization retained for reuse across predicts and for solve adjoints.
class KRRSolution {
 public:
  KRRSolution(const Matrix& k_ss, double lambda, const Matrix& y_s);

  const Matrix& weights() const { return weights_; }
  double lambda() const { return lambda_; }

  /// Solves (K + lambda I) Z = B with the stored factorization.
  Matrix solve(const Matrix& b) const;

  Matrix predict(const Matrix& k_ts) const;

 private:
  Matrix weights_;
  double lambda_;
  std::shared_ptr<Eigen::LLT<Matrix>> factorization_;
};

/// (K + lambda I)^{-1} B through a symmetric positive-definite
/// factorization; retries once with jitter 1e-10 * trace / M on the
/// diagonal, then throws SingularSystemError reporting the smallest pivot.
Matrix solve_regularized(const Matrix& k, double lambda, const Matrix& b);

/// K_TS (K_SS + lambda I)^{-1} Y_S.
Matrix fit_predict(const Matrix& k_ss, const Matrix& k_ts, const Matrix& y_s,
                   double lambda);

/// 0.5 || Y_T - pred ||_F^2.
double mse_loss(const Matrix& pred, const Matrix& y_t);

/// Fraction of rows whose argmax (ties toward the lowest class index)
/// matches the label.
double accuracy(const Matrix& pred, const std::vector<int>& labels);

}  // namespace gcsntk
