#include "gcsntk/grad.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "gcsntk/tape.hpp"

namespace gcsntk {

namespace {

using NodeId = Tape::NodeId;

void check_finite(const Tape& tape, NodeId node, const char* stage) {
  if (!tape.value(node).allFinite())
    throw NumericalError(stage, "non-finite intermediate value");
}

void check_strictly_positive(const Tape& tape, NodeId node, const char* what) {
  const Matrix& v = tape.value(node);
  for (Index i = 0; i < v.rows(); ++i)
    if (!(v(i, 0) > 0.0))
      throw DegenerateAggregationError(std::string(what) +
                                       ": nonpositive aggregated self-kernel "
                                       "diagonal at condensed node " +
                                       std::to_string(i));
}

struct Pipeline {
  Tape tape;
  NodeId x_s = -1;
  NodeId adj_param = -1;
  NodeId loss = -1;
};

std::vector<Index> loss_row_indices(const Graph& g, LossRows rows) {
  std::vector<Index> out = g.splits().train;
  if (rows == LossRows::TrainVal)
    out.insert(out.end(), g.splits().val.begin(), g.splits().val.end());
  return out;
}

// One kappa layer on a tape stream. `delta` is the uniform self-diagonal
// (constant per stage); returns the new sigma node and updates theta.
void tape_kappa_layer(Tape& t, NodeId& sigma, NodeId& theta, double delta,
                      const KernelConfig& cfg) {
  NodeId rho_raw;
  NodeId sigma_hat;
  if (cfg.mode == KernelMode::Normalized) {
    rho_raw = t.scale(sigma, 1.0 / delta);
    sigma_hat = t.scale(t.kappa_hat(rho_raw, cfg.alpha), delta);
  } else {
    rho_raw = sigma;
    sigma_hat = t.kappa_hat(rho_raw, cfg.alpha);
  }
  NodeId sigma_dot = t.kappa_dot(rho_raw, cfg.alpha);
  theta = t.add(t.hadamard(theta, sigma_dot), sigma_hat);
  sigma = sigma_hat;
}

// One normalized NTK layer with vector self-diagonals dl (constant) and a
// dr node; builds rho = sigma / sqrt(dl dr^T) and rescales sigma_hat back.
void tape_ntk_layer(Tape& t, NodeId& sigma, NodeId& theta, NodeId dl, NodeId dr,
                    const KernelConfig& cfg) {
  NodeId denom = t.pow_elem(t.matmul(dl, dr, false, true), 0.5);
  NodeId rho_raw = t.hadamard(sigma, t.pow_elem(denom, -1.0));
  NodeId sigma_hat = t.hadamard(denom, t.kappa_hat(rho_raw, cfg.alpha));
  NodeId sigma_dot = t.kappa_dot(rho_raw, cfg.alpha);
  theta = t.add(t.hadamard(theta, sigma_dot), sigma_hat);
  sigma = sigma_hat;
}

Pipeline build_pipeline(const TargetContext& ctx, const CondensedGraph& cond,
                        Variant variant, const LossOptions& opt) {
  const KernelConfig& cfg = ctx.config();
  const Graph& target = ctx.graph();
  const Index m = cond.size();
  if (variant == Variant::XA && !cond.adj_param)
    throw ConfigError("loss_and_grad: variant XA requires adj_param");
  if (!cond.x_s.allFinite())
    throw NumericalError("input", "condensed features must be finite");

  Pipeline p;
  Tape& t = p.tape;

  p.x_s = t.leaf(cond.x_s);

  // Materialize the condensed self-looped adjacency.
  NodeId a_s;
  if (variant == Variant::XA) {
    p.adj_param = t.leaf(*cond.adj_param);
    a_s = t.set_diag_one(t.sym_avg(t.sigmoid(p.adj_param)));
  } else {
    a_s = t.constant(Matrix::Identity(m, m));
  }

  NodeId x_t = t.constant_ref(&target.features());
  NodeId sig_ts = t.matmul(x_t, p.x_s, false, true);
  NodeId the_ts = sig_ts;
  NodeId sig_ss = t.matmul(p.x_s, p.x_s, false, true);
  NodeId the_ss = sig_ss;
  check_finite(t, sig_ts, "kernel-init");
  check_finite(t, sig_ss, "kernel-init");

  if (cfg.kind == KernelKind::Ntk) {
    if (cfg.mode == KernelMode::Normalized) {
      NodeId dr0 = t.take_diag(sig_ss);
      double diag_scale = 1.0;
      for (int l = 0; l < cfg.depth; ++l) {
        NodeId dl = t.constant(Matrix(diag_scale * ctx.diag0()));
        NodeId dr = t.scale(dr0, diag_scale);
        tape_ntk_layer(t, sig_ts, the_ts, dl, dr, cfg);
        tape_ntk_layer(t, sig_ss, the_ss, dr, dr, cfg);
        diag_scale *= cfg.alpha / 2.0;
      }
    } else {
      for (int l = 0; l < cfg.depth; ++l) {
        tape_kappa_layer(t, sig_ts, the_ts, 1.0, cfg);
        tape_kappa_layer(t, sig_ss, the_ss, 1.0, cfg);
      }
    }
    check_finite(t, the_ts, "kappa-layers");
  } else if (cfg.kind == KernelKind::Sntk) {
    for (int k = 0; k < cfg.aggregation_rounds; ++k) {
      // Condensed-side coefficients from the evolving self-kernel.
      NodeId diag_agg = t.row_sum(t.hadamard(t.matmul(a_s, sig_ss), a_s));
      check_strictly_positive(t, diag_agg, "aggregation-coefficients");
      NodeId c_s = t.pow_elem(diag_agg, -0.5);
      if (opt.stop_grad_coeffs) c_s = t.detach(c_s);
      NodeId c_t = t.constant(
          Matrix(ctx.round_coeffs()[static_cast<std::size_t>(k)]));

      auto aggregate_ts = [&](NodeId s) {
        NodeId u = t.matmul(t.sparse_matmul(&ctx.a_hat(), s), a_s, false, true);
        return t.col_scale(t.row_scale(c_t, u), c_s);
      };
      auto aggregate_ss = [&](NodeId s) {
        NodeId u = t.matmul(t.matmul(a_s, s), a_s, false, true);
        return t.col_scale(t.row_scale(c_s, u), c_s);
      };
      sig_ts = aggregate_ts(sig_ts);
      the_ts = aggregate_ts(the_ts);
      sig_ss = aggregate_ss(sig_ss);
      the_ss = aggregate_ss(the_ss);
      check_finite(t, sig_ts, "aggregation");

      double delta = 1.0;
      for (int l = 0; l < cfg.depth; ++l) {
        tape_kappa_layer(t, sig_ts, the_ts, delta, cfg);
        tape_kappa_layer(t, sig_ss, the_ss, delta, cfg);
        delta *= cfg.alpha / 2.0;
      }
      check_finite(t, the_ts, "kappa-layers");
    }
  }
  // Dot kind: the_ts/the_ss already hold X_T X_S^T and X_S X_S^T.

  std::vector<Index> rows = loss_row_indices(target, opt.rows);
  std::vector<int> row_labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    row_labels[i] = target.labels()[static_cast<std::size_t>(rows[i])];

  NodeId k_rows = t.take_rows(the_ts, rows);
  NodeId y_s = t.constant(cond.y_s);
  NodeId weights = t.spd_solve(the_ss, y_s, opt.lambda);
  check_finite(t, weights, "solve");
  NodeId pred = t.matmul(k_rows, weights);
  NodeId y_rows = t.constant(one_hot(row_labels, static_cast<int>(cond.y_s.cols())));
  p.loss = t.mse_half(pred, y_rows);
  check_finite(t, p.loss, "loss");
  return p;
}

}  // namespace

GradReport loss_and_grad(const TargetContext& ctx, const CondensedGraph& condensed,
                         Variant variant, const LossOptions& options) {
  Pipeline p = build_pipeline(ctx, condensed, variant, options);
  p.tape.backward(p.loss);

  GradReport report;
  report.loss = p.tape.value(p.loss)(0, 0);
  report.grad_x = p.tape.adjoint(p.x_s);
  if (report.grad_x.size() == 0)
    report.grad_x = Matrix::Zero(condensed.x_s.rows(), condensed.x_s.cols());
  report.max_abs_grad = report.grad_x.cwiseAbs().maxCoeff();
  if (variant == Variant::XA) {
    Matrix ga = p.tape.adjoint(p.adj_param);
    if (ga.size() == 0) ga = Matrix::Zero(condensed.size(), condensed.size());
    report.max_abs_grad = std::max(report.max_abs_grad, ga.cwiseAbs().maxCoeff());
    report.grad_adj = std::move(ga);
  }
  if (!std::isfinite(report.loss) || !report.grad_x.allFinite() ||
      (report.grad_adj && !report.grad_adj->allFinite()))
    throw NumericalError("backward", "non-finite gradient");
  return report;
}

double loss_only(const TargetContext& ctx, const CondensedGraph& condensed,
                 Variant variant, const LossOptions& options) {
  Pipeline p = build_pipeline(ctx, condensed, variant, options);
  return p.tape.value(p.loss)(0, 0);
}

Vector finite_diff(const std::function<double(const Vector&)>& f,
                   const Vector& point, double step) {
  if (!(step > 0.0)) throw RangeError("finite_diff: step must be > 0");
  Vector grad(point.size());
  Vector x = point;
  for (Index i = 0; i < point.size(); ++i) {
    x[i] = point[i] + step;
    const double fp = f(x);
    x[i] = point[i] - step;
    const double fm = f(x);
    x[i] = point[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericalError("finite_diff", "non-finite function evaluation");
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

double relative_error(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  if (std::abs(analytic) < 1e-8) return diff;
  return diff / std::abs(analytic);
}

GradCheckReport gradient_check(const TargetContext& ctx,
                               const CondensedGraph& condensed, Variant variant,
                               const LossOptions& options, double step) {
  GradReport analytic = loss_and_grad(ctx, condensed, variant, options);

  const Index nx = condensed.x_s.size();
  const Index na =
      (variant == Variant::XA) ? condensed.adj_param->size() : Index(0);
  Vector point(nx + na);
  for (Index i = 0; i < nx; ++i) point[i] = condensed.x_s.data()[i];
  for (Index i = 0; i < na; ++i) point[nx + i] = condensed.adj_param->data()[i];

  auto f = [&](const Vector& v) {
    CondensedGraph c = condensed;
    for (Index i = 0; i < nx; ++i) c.x_s.data()[i] = v[i];
    if (variant == Variant::XA)
      for (Index i = 0; i < na; ++i) c.adj_param->data()[i] = v[nx + i];
    return loss_only(ctx, c, variant, options);
  };
  Vector numeric = finite_diff(f, point, step);

  GradCheckReport report;
  double sum = 0.0;
  for (Index i = 0; i < nx; ++i) {
    const double e = relative_error(analytic.grad_x.data()[i], numeric[i]);
    report.max_rel_error_x = std::max(report.max_rel_error_x, e);
    sum += e;
  }
  for (Index i = 0; i < na; ++i) {
    const double e = relative_error(analytic.grad_adj->data()[i], numeric[nx + i]);
    report.max_rel_error_adj = std::max(report.max_rel_error_adj, e);
    sum += e;
  }
  report.max_rel_error = std::max(report.max_rel_error_x, report.max_rel_error_adj);
  report.mean_rel_error = sum / static_cast<double>(nx + na);
  return report;
}

}  // namespace gcsntk
