#include "gcsntk/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace gcsntk {

namespace {

constexpr double kPi = std::numbers::pi;

double clamp_unit(double v) { return std::min(1.0, std::max(-1.0, v)); }

void check_positive_diag(const Vector& d, const char* what) {
  for (Index i = 0; i < d.size(); ++i)
    if (!(d[i] > 0.0))
      throw DegenerateAggregationError(std::string(what) +
                                       ": nonpositive aggregated self-kernel "
                                       "diagonal at node " +
                                       std::to_string(i));
}

Vector inv_sqrt(const Vector& d) { return d.array().rsqrt(); }

SparseMatrix binarized(SparseMatrix m) {
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) it.valueRef() = 1.0;
  return m;
}

// Evolves self-kernel values through L kappa layers, elementwise in place.
void evolve_layers_values(double* vals, Index count, const KernelConfig& cfg) {
  const double sc = cfg.alpha / (2.0 * kPi);
  double delta = 1.0;
  for (int l = 0; l < cfg.depth; ++l) {
    for (Index i = 0; i < count; ++i) {
      double rho;
      if (cfg.mode == KernelMode::Normalized)
        rho = clamp_unit(vals[i] / delta);
      else
        rho = clamp_unit(vals[i]);
      const double hat =
          sc * (kPi - std::acos(rho) + std::sqrt(std::max(0.0, 1.0 - rho * rho)));
      vals[i] = (cfg.mode == KernelMode::Normalized) ? delta * hat : hat;
    }
    delta *= cfg.alpha / 2.0;
  }
}

// diag(A_hat S A_hat^T) for sparse S, without forming the full product.
Vector sparse_agg_diag(const SparseMatrix& a_hat, const SparseMatrix& s) {
  SparseMatrix t = (a_hat * s).pruned();
  SparseMatrix w = t.cwiseProduct(a_hat);
  return w * Vector::Ones(a_hat.cols());
}

}  // namespace

void KernelConfig::validate() const {
  if (aggregation_rounds < 1)
    throw ConfigError("kernel: aggregation rounds K must be >= 1");
  if (depth < 1) throw ConfigError("kernel: recursion depth L must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("kernel: alpha must be > 0");
}

Matrix dot_kernel(const Matrix& x, const Matrix& x_prime) {
  if (x.cols() != x_prime.cols())
    throw DimensionError("dot_kernel: feature dimensions differ");
  return x * x_prime.transpose();
}

std::pair<double, double> kappa_pair(double rho, double alpha) {
  const double r = clamp_unit(rho);
  const double sc = alpha / (2.0 * kPi);
  const double dot = sc * (kPi - std::acos(r));
  const double hat = dot + sc * std::sqrt(std::max(0.0, 1.0 - r * r));
  return {dot, hat};
}

void kappa_pair(const Matrix& rho, double alpha, Matrix& sigma_dot,
                Matrix& sigma_hat) {
  const double sc = alpha / (2.0 * kPi);
  Eigen::ArrayXXd r = rho.array().min(1.0).max(-1.0);
  Eigen::ArrayXXd acos_r = r.acos();
  sigma_dot = (sc * (kPi - acos_r)).matrix();
  sigma_hat = (sc * (kPi - acos_r + (1.0 - r.square()).max(0.0).sqrt())).matrix();
}

void kappa_layer(KernelState& state, const KernelConfig& config) {
  Matrix sigma_dot, sigma_hat;
  if (config.mode == KernelMode::Normalized) {
    const double denom = std::sqrt(state.diag_left * state.diag_right);
    kappa_pair(Matrix(state.sigma / denom), config.alpha, sigma_dot, sigma_hat);
    sigma_hat *= denom;
    state.diag_left *= config.alpha / 2.0;
    state.diag_right *= config.alpha / 2.0;
  } else {
    kappa_pair(state.sigma, config.alpha, sigma_dot, sigma_hat);
  }
  state.theta = state.theta.cwiseProduct(sigma_dot) + sigma_hat;
  state.sigma = std::move(sigma_hat);
}

Vector aggregation_coefficients(const Matrix& sigma_self, const SparseMatrix& a_hat) {
  if (sigma_self.rows() != sigma_self.cols())
    throw DimensionError("aggregation_coefficients: self-kernel must be square");
  if (a_hat.cols() != sigma_self.rows())
    throw DimensionError("aggregation_coefficients: adjacency/kernel mismatch");
  Matrix t = a_hat * sigma_self;
  Vector d = Vector::Zero(a_hat.rows());
  for (Index i = 0; i < a_hat.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(a_hat, i); it; ++it)
      d[i] += t(i, it.col()) * it.value();
  check_positive_diag(d, "aggregation_coefficients");
  return inv_sqrt(d);
}

Vector aggregation_coefficients(const Matrix& sigma_self, const Matrix& a_hat) {
  if (sigma_self.rows() != sigma_self.cols())
    throw DimensionError("aggregation_coefficients: self-kernel must be square");
  if (a_hat.cols() != sigma_self.rows())
    throw DimensionError("aggregation_coefficients: adjacency/kernel mismatch");
  Matrix t = a_hat * sigma_self;
  Vector d = t.cwiseProduct(a_hat).rowwise().sum();
  check_positive_diag(d, "aggregation_coefficients");
  return inv_sqrt(d);
}

namespace {

template <class Left, class Right>
Matrix aggregate_impl(const Matrix& sigma, const Left& a_left, const Right& a_right,
                      const Vector& c_left, const Vector& c_right) {
  if (a_left.cols() != sigma.rows() || a_right.cols() != sigma.cols())
    throw DimensionError("aggregate: adjacency/kernel shape mismatch");
  if (c_left.size() != a_left.rows() || c_right.size() != a_right.rows())
    throw DimensionError("aggregate: coefficient length mismatch");
  Matrix t = a_left * sigma;
  Matrix u = t * a_right.transpose();
  return c_left.asDiagonal() * u * c_right.asDiagonal();
}

}  // namespace

Matrix aggregate(const Matrix& sigma, const SparseMatrix& a_hat_left,
                 const SparseMatrix& a_hat_right, const Vector& c_left,
                 const Vector& c_right) {
  return aggregate_impl(sigma, a_hat_left, a_hat_right, c_left, c_right);
}

Matrix aggregate(const Matrix& sigma, const SparseMatrix& a_hat_left,
                 const Matrix& a_hat_right, const Vector& c_left,
                 const Vector& c_right) {
  return aggregate_impl(sigma, a_hat_left, a_hat_right, c_left, c_right);
}

Matrix aggregate(const Matrix& sigma, const Matrix& a_hat_left,
                 const Matrix& a_hat_right, const Vector& c_left,
                 const Vector& c_right) {
  return aggregate_impl(sigma, a_hat_left, a_hat_right, c_left, c_right);
}

namespace {

// One normalized NTK layer with per-row self-diagonal vectors.
void ntk_layer_normalized(Matrix& sigma, Matrix& theta, const Vector& diag_left,
                          const Vector& diag_right, double alpha) {
  Matrix denom =
      (diag_left * diag_right.transpose()).array().max(0.0).sqrt().matrix();
  Matrix rho = sigma.cwiseQuotient(denom.cwiseMax(1e-300));
  Matrix sigma_dot, sigma_hat;
  kappa_pair(rho, alpha, sigma_dot, sigma_hat);
  sigma_hat = denom.cwiseProduct(sigma_hat);
  theta = theta.cwiseProduct(sigma_dot) + sigma_hat;
  sigma = std::move(sigma_hat);
}

void ntk_layer_literal(Matrix& sigma, Matrix& theta, double alpha) {
  Matrix sigma_dot, sigma_hat;
  kappa_pair(sigma, alpha, sigma_dot, sigma_hat);
  theta = theta.cwiseProduct(sigma_dot) + sigma_hat;
  sigma = std::move(sigma_hat);
}

}  // namespace

Matrix ntk(const Matrix& x, const Matrix& x_prime, int depth, double alpha,
           KernelMode mode) {
  if (x.cols() != x_prime.cols())
    throw DimensionError("ntk: feature dimensions differ");
  if (depth < 1) throw ConfigError("ntk: depth must be >= 1");
  Matrix sigma = x * x_prime.transpose();
  Matrix theta = sigma;
  if (mode == KernelMode::Normalized) {
    Vector dl = x.rowwise().squaredNorm();
    Vector dr = x_prime.rowwise().squaredNorm();
    for (int l = 0; l < depth; ++l) {
      ntk_layer_normalized(sigma, theta, dl, dr, alpha);
      dl *= alpha / 2.0;
      dr *= alpha / 2.0;
    }
  } else {
    for (int l = 0; l < depth; ++l) ntk_layer_literal(sigma, theta, alpha);
  }
  return theta;
}

std::vector<Vector> round_coefficients(const SparseMatrix& a_hat, const Matrix& x,
                                       const KernelConfig& config) {
  if (a_hat.cols() != x.rows())
    throw DimensionError("round_coefficients: adjacency/features mismatch");
  const int rounds = config.aggregation_rounds;
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(rounds));

  // Round 1: c_i = 1 / ||(A_hat X)_i||, no self-kernel needed.
  Matrix p = a_hat * x;
  Vector d = p.rowwise().squaredNorm();
  check_positive_diag(d, "round_coefficients");
  out.push_back(inv_sqrt(d));
  if (rounds == 1) return out;

  // Later rounds read the evolving self-kernel only on co-neighborhood
  // pairs: round r+1 needs diag(A_hat S A_hat^T), and building S at stage j
  // needs the previous stage on pattern(A_hat^{2(j+1)}).
  std::vector<SparseMatrix> pattern(static_cast<std::size_t>(rounds));
  pattern[1] = binarized((a_hat * a_hat).pruned());
  for (int j = 2; j <= rounds - 1; ++j)
    pattern[static_cast<std::size_t>(j)] = binarized(
        (pattern[static_cast<std::size_t>(j - 1)] * pattern[1]).pruned());

  SparseMatrix s = pattern[static_cast<std::size_t>(rounds - 1)];
  for (Index k = 0; k < s.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(s, k); it; ++it)
      it.valueRef() = x.row(it.row()).dot(x.row(it.col()));

  for (int r = 1; r <= rounds - 1; ++r) {
    const Vector& c = out.back();
    SparseMatrix t = (a_hat * s).pruned();
    SparseMatrix u = (t * a_hat).pruned();  // a_hat symmetric
    u = u.cwiseProduct(pattern[static_cast<std::size_t>(std::max(1, rounds - 1 - r))]);
    for (Index k = 0; k < u.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(u, k); it; ++it)
        it.valueRef() *= c[it.row()] * c[it.col()];
    evolve_layers_values(u.valuePtr(), u.nonZeros(), config);
    s = std::move(u);
    Vector dr = sparse_agg_diag(a_hat, s);
    check_positive_diag(dr, "round_coefficients");
    out.push_back(inv_sqrt(dr));
  }
  return out;
}

Matrix sntk(const Graph& g, const Graph& g_prime, const KernelConfig& config) {
  config.validate();
  if (config.kind != KernelKind::Sntk)
    throw ConfigError("sntk: config.kind must be sntk");
  if (g.feature_dim() != g_prime.feature_dim())
    throw DimensionError("sntk: feature dimensions differ");

  const bool self = (&g == &g_prime);
  SparseMatrix a_left = add_self_loops(g.adjacency());
  SparseMatrix a_right = self ? a_left : add_self_loops(g_prime.adjacency());
  auto left_coeffs = round_coefficients(a_left, g.features(), config);
  auto right_coeffs =
      self ? left_coeffs : round_coefficients(a_right, g_prime.features(), config);

  KernelState st;
  st.sigma = g.features() * g_prime.features().transpose();
  st.theta = st.sigma;
  for (int k = 0; k < config.aggregation_rounds; ++k) {
    st.sigma = aggregate(st.sigma, a_left, a_right, left_coeffs[k], right_coeffs[k]);
    st.theta = aggregate(st.theta, a_left, a_right, left_coeffs[k], right_coeffs[k]);
    st.diag_left = st.diag_right = 1.0;
    for (int l = 0; l < config.depth; ++l) kappa_layer(st, config);
  }
  if (self) return 0.5 * (st.theta + st.theta.transpose());
  return st.theta;
}

Matrix kernel_matrix(const Graph& g, const Graph& g_prime,
                     const KernelConfig& config) {
  config.validate();
  const bool self = (&g == &g_prime);
  Matrix out;
  switch (config.kind) {
    case KernelKind::Dot:
      out = dot_kernel(g.features(), g_prime.features());
      break;
    case KernelKind::Ntk:
      out = ntk(g.features(), g_prime.features(), config.depth, config.alpha,
                config.mode);
      break;
    case KernelKind::Sntk:
      return sntk(g, g_prime, config);
  }
  if (self) out = 0.5 * (out + out.transpose());
  return out;
}

TargetContext::TargetContext(const Graph& target, const KernelConfig& config)
    : graph_(&target), config_(config) {
  config_.validate();
  a_hat_ = add_self_loops(target.adjacency());
  if (config_.kind == KernelKind::Sntk)
    round_coeffs_ = round_coefficients(a_hat_, target.features(), config_);
  if (config_.kind == KernelKind::Ntk && config_.mode == KernelMode::Normalized)
    diag0_ = target.features().rowwise().squaredNorm();
}

KernelPair cross_and_self(const TargetContext& ctx, const Matrix& x_s,
                          const Matrix& a_s_hat) {
  const KernelConfig& cfg = ctx.config();
  const Matrix& x_t = ctx.graph().features();
  if (x_s.cols() != x_t.cols())
    throw DimensionError("cross_and_self: feature dimensions differ");
  if (a_s_hat.rows() != x_s.rows() || a_s_hat.cols() != x_s.rows())
    throw DimensionError("cross_and_self: condensed adjacency must be [M x M]");

  KernelPair out;
  if (cfg.kind == KernelKind::Dot) {
    out.k_ts = x_t * x_s.transpose();
    Matrix ss = x_s * x_s.transpose();
    out.k_ss = 0.5 * (ss + ss.transpose());
    return out;
  }

  Matrix sig_ts = x_t * x_s.transpose();
  Matrix the_ts = sig_ts;
  Matrix sig_ss = x_s * x_s.transpose();
  Matrix the_ss = sig_ss;

  if (cfg.kind == KernelKind::Ntk) {
    if (cfg.mode == KernelMode::Normalized) {
      Vector dl = ctx.diag0();
      Vector dr = sig_ss.diagonal();
      for (int l = 0; l < cfg.depth; ++l) {
        ntk_layer_normalized(sig_ts, the_ts, dl, dr, cfg.alpha);
        ntk_layer_normalized(sig_ss, the_ss, dr, dr, cfg.alpha);
        dl *= cfg.alpha / 2.0;
        dr *= cfg.alpha / 2.0;
      }
    } else {
      for (int l = 0; l < cfg.depth; ++l) {
        ntk_layer_literal(sig_ts, the_ts, cfg.alpha);
        ntk_layer_literal(sig_ss, the_ss, cfg.alpha);
      }
    }
    out.k_ts = std::move(the_ts);
    out.k_ss = 0.5 * (the_ss + the_ss.transpose());
    return out;
  }

  // Sntk: K aggregation rounds, target-side coefficients precomputed, the
  // condensed side recomputed each round from its evolving self-kernel.
  KernelState ts{std::move(sig_ts), std::move(the_ts), 1.0, 1.0};
  KernelState ss{std::move(sig_ss), std::move(the_ss), 1.0, 1.0};
  for (int k = 0; k < cfg.aggregation_rounds; ++k) {
    const Vector& c_t = ctx.round_coeffs()[static_cast<std::size_t>(k)];
    Vector c_s = aggregation_coefficients(ss.sigma, a_s_hat);
    ts.sigma = aggregate(ts.sigma, ctx.a_hat(), a_s_hat, c_t, c_s);
    ts.theta = aggregate(ts.theta, ctx.a_hat(), a_s_hat, c_t, c_s);
    ss.sigma = aggregate(ss.sigma, a_s_hat, a_s_hat, c_s, c_s);
    ss.theta = aggregate(ss.theta, a_s_hat, a_s_hat, c_s, c_s);
    ts.diag_left = ts.diag_right = 1.0;
    ss.diag_left = ss.diag_right = 1.0;
    for (int l = 0; l < cfg.depth; ++l) {
      kappa_layer(ts, cfg);
      kappa_layer(ss, cfg);
    }
  }
  out.k_ts = std::move(ts.theta);
  out.k_ss = 0.5 * (ss.theta + ss.theta.transpose());
  return out;
}

}  // namespace gcsntk
