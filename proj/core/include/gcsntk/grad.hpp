#pragma once

#include <functional>
#include <optional>

#include "gcsntk/condensed.hpp"
#include "gcsntk/kernel.hpp"
#include "gcsntk/types.hpp"

namespace gcsntk {

/// Which condensed-graph parameterization is being learned: features only
/// (identity condensed adjacency) or features plus a learnable weighted
/// adjacency.
enum class Variant { X, XA };

/// Which target rows the condensation loss covers.
enum class LossRows { Train, TrainVal };

struct LossOptions {
  double lambda = 1.0;
  LossRows rows = LossRows::Train;
  /// Treat the aggregation coefficients of the condensed side as constants
  /// during backward (ablation knob); default flows gradients through them.
  bool stop_grad_coeffs = false;
};

struct GradReport {
  double loss = 0.0;
  Matrix grad_x;                   // [M x d]
  std::optional<Matrix> grad_adj;  // [M x M], XA only
  double max_abs_grad = 0.0;
};

/// Runs the full forward pipeline (materialize condensed adjacency ->
/// kernels -> ridge fit -> MSE loss) on a tape and backpropagates to the
/// condensed parameters. Throws NumericalError naming the pipeline stage on
/// a non-finite intermediate.
GradReport loss_and_grad(const TargetContext& ctx, const CondensedGraph& condensed,
                         Variant variant, const LossOptions& options);

/// The same tape forward without the backward pass.
double loss_only(const TargetContext& ctx, const CondensedGraph& condensed,
                 Variant variant, const LossOptions& options);

/// Central finite differences per coordinate: (f(x+se_i) - f(x-se_i)) / 2s.
Vector finite_diff(const std::function<double(const Vector&)>& f,
                   const Vector& point, double step);

/// Elementwise relative error with an absolute fallback for analytic
/// entries below 1e-8.
double relative_error(double analytic, double numeric);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  double max_rel_error_x = 0.0;
  double max_rel_error_adj = 0.0;  // 0 when no adjacency block
};

/// Compares loss_and_grad against the finite-difference oracle over every
/// condensed parameter coordinate.
GradCheckReport gradient_check(const TargetContext& ctx,
                               const CondensedGraph& condensed, Variant variant,
                               const LossOptions& options, double step = 1e-5);

}  // namespace gcsntk
