#pragma once

#include <utility>
#include <vector>

#include "gcsntk/graph.hpp"
#include "gcsntk/types.hpp"

namespace gcsntk {

enum class KernelKind { Dot, Ntk, Sntk };

/// Normalized mode divides kernel entries by the geometric mean of the
/// tracked self-diagonals before the arc-cosine maps and rescales after;
/// PaperLiteral clamps entries into [-1, 1] and applies the maps directly.
enum class KernelMode { Normalized, PaperLiteral };

struct KernelConfig {
  KernelKind kind = KernelKind::Sntk;
  int aggregation_rounds = 1;  // K (sntk only)
  int depth = 1;               // L
  double alpha = 2.0;          // activation scale; 1 gives the literal maps
  KernelMode mode = KernelMode::Normalized;

  void validate() const;
};

/// Evolving pair of kernel matrices plus the uniform self-diagonal scalars
/// used for correlation normalization. After an aggregation round both
/// diagonals are exactly 1; each kappa layer multiplies them by alpha/2.
struct KernelState {
  Matrix sigma;
  Matrix theta;
  double diag_left = 1.0;
  double diag_right = 1.0;
};

/// X (X')^T.
Matrix dot_kernel(const Matrix& x, const Matrix& x_prime);

/// The elementwise arc-cosine maps: returns (sigma_dot, sigma_hat) where
///   sigma_dot = (alpha/2pi) (pi - arccos rho)
///   sigma_hat = (alpha/2pi) (pi - arccos rho + sqrt(1 - rho^2))
/// rho is clamped into [-1, 1] before evaluation.
std::pair<double, double> kappa_pair(double rho, double alpha);
void kappa_pair(const Matrix& rho, double alpha, Matrix& sigma_dot,
                Matrix& sigma_hat);

/// Advances (sigma, theta) by one kappa layer under the given mode:
/// theta <- theta .* sigma_dot + sigma_hat. In normalized mode the state's
/// self-diagonal scalars provide the correlation denominator and are scaled
/// by alpha/2 afterwards.
void kappa_layer(KernelState& state, const KernelConfig& config);

/// c_i = 1 / sqrt( (A_hat Sigma_self A_hat^T)_ii ) for the current
/// self-kernel of one side. Throws DegenerateAggregationError when a
/// diagonal entry is not strictly positive.
Vector aggregation_coefficients(const Matrix& sigma_self, const SparseMatrix& a_hat);
Vector aggregation_coefficients(const Matrix& sigma_self, const Matrix& a_hat);

/// diag(c) A_hat Sigma (A_hat')^T diag(c'): one closed-neighborhood
/// aggregation with the coefficients outside the double sum.
Matrix aggregate(const Matrix& sigma, const SparseMatrix& a_hat_left,
                 const SparseMatrix& a_hat_right, const Vector& c_left,
                 const Vector& c_right);
Matrix aggregate(const Matrix& sigma, const SparseMatrix& a_hat_left,
                 const Matrix& a_hat_right, const Vector& c_left,
                 const Vector& c_right);
Matrix aggregate(const Matrix& sigma, const Matrix& a_hat_left,
                 const Matrix& a_hat_right, const Vector& c_left,
                 const Vector& c_right);

/// Plain NTK between feature rows: initializes Theta = Sigma = X (X')^T and
/// applies `depth` kappa layers. In normalized mode per-row self-diagonals
/// are tracked as vectors through the same recursion.
Matrix ntk(const Matrix& x, const Matrix& x_prime, int depth, double alpha,
           KernelMode mode);

/// The per-round aggregation coefficients of one graph against itself,
/// recomputed each round from the evolving self-kernel. Round 1 never
/// materializes the self-kernel (row norms of A_hat X); later rounds keep
/// it restricted to the co-neighborhood sparsity pattern of A_hat^{2j},
/// which is exactly the set of entries later rounds read.
std::vector<Vector> round_coefficients(const SparseMatrix& a_hat, const Matrix& x,
                                       const KernelConfig& config);

/// Structure-based NTK between two graphs (or a graph and itself):
/// K rounds of coefficient-normalized neighborhood aggregation, each
/// followed by L kappa layers.
Matrix sntk(const Graph& g, const Graph& g_prime, const KernelConfig& config);

/// Dispatches on config.kind; the general entry point for kernel dumps.
Matrix kernel_matrix(const Graph& g, const Graph& g_prime,
                     const KernelConfig& config);

/// Everything about the target side that is constant across optimization
/// steps: the self-looped adjacency, per-round aggregation coefficients
/// (sntk), and initial per-row self-kernel diagonal (ntk, normalized mode).
class TargetContext {
 public:
  TargetContext(const Graph& target, const KernelConfig& config);

  const Graph& graph() const { return *graph_; }
  const KernelConfig& config() const { return config_; }
  const SparseMatrix& a_hat() const { return a_hat_; }
  const std::vector<Vector>& round_coeffs() const { return round_coeffs_; }
  const Vector& diag0() const { return diag0_; }

 private:
  const Graph* graph_;
  KernelConfig config_;
  SparseMatrix a_hat_;
  std::vector<Vector> round_coeffs_;
  Vector diag0_;
};

struct KernelPair {
  Matrix k_ts;  // [n x m] target-by-condensed
  Matrix k_ss;  // [m x m] condensed self-kernel, symmetric
};

/// Computes K_TS and K_SS in one pass sharing intermediate state. The
/// condensed adjacency must already be materialized (identity for the
/// features-only variant).
KernelPair cross_and_self(const TargetContext& ctx, const Matrix& x_s,
                          const Matrix& a_s_hat);

}  // namespace gcsntk
