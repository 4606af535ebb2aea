#include "acosqe/positional.hpp"

#include <algorithm>
#include <cmath>

#include "acosqe/errors.hpp"

namespace acosqe {

int srd_distance(int i, const Span& entity) {
  return std::min(std::abs(i - entity.start), std::abs(i - entity.end));
}

namespace {
void validate_entity(int n, const Span& entity) {
  if (entity.start < 0 || entity.end < entity.start || entity.end >= n)
    throw SpanOutOfRangeError(0);
}
}  // namespace

std::vector<double> context_mask(int n, const std::optional<Span>& entity, int srd) {
  if (n < 1) throw EmptySequenceError("context_mask: empty sequence");
  std::vector<double> cm(n, 1.0);
  if (!entity) return cm;  // implicit target: everything is context
  validate_entity(n, *entity);
  for (int i = 0; i < n; ++i)
    cm[i] = srd_distance(i, *entity) <= srd ? 1.0 : 0.0;
  return cm;
}

std::vector<double> context_weight(int n, const std::optional<Span>& entity,
                                   int srd, int max_len, CwMode mode) {
  if (n < 1) throw EmptySequenceError("context_weight: empty sequence");
  if (max_len < n) throw NumericError("context_weight: max_len must cover n");
  std::vector<double> cw(n, 1.0);
  if (!entity) return cw;
  validate_entity(n, *entity);
  for (int i = 0; i < n; ++i) {
    int d = srd_distance(i, *entity);
    if (d <= srd) continue;  // inside the focus window: weight 1
    double raw = static_cast<double>(d - srd + 1) / max_len;
    double w = mode == CwMode::kLiteral ? raw : 1.0 - raw;
    cw[i] = std::clamp(w, 0.0, 1.0);
  }
  return cw;
}

Tensor fuse_features(const Tensor& h, const std::vector<double>& cm,
                     const Tensor& cw, const Tensor& proj, FuseMode mode) {
  if (h.shape().size() != 2) throw ShapeMismatchError("fuse_features: h must be n x d");
  int n = h.rows(), d = h.cols();
  if (static_cast<int>(cm.size()) != n)
    throw ShapeMismatchError("fuse_features: cm length mismatch");
  if (cw.shape().size() != 1 || static_cast<int>(cw.size()) != n)
    throw ShapeMismatchError("fuse_features: cw length mismatch");
  if (proj.shape().size() != 2 || proj.rows() != 2 * d)
    throw ShapeMismatchError("fuse_features: proj must be 2d x out");

  Tensor masked = mode == FuseMode::kCwOnly
                      ? Tensor::zeros({n, d})
                      : scale_rows(h, Tensor::from({n}, cm));
  Tensor weighted =
      mode == FuseMode::kCmOnly ? Tensor::zeros({n, d}) : scale_rows(h, cw);
  return matmul(hcat(masked, weighted), proj);
}

// ---------------------------------------------------------------------------
// solvers

namespace {

void check_state(const Tensor& z) {
  const double* p = z.data();
  for (int64_t i = 0; i < z.size(); ++i)
    if (!std::isfinite(p[i]))
      throw NonFiniteStateError("ode state left the finite range");
}

Tensor rk4_fixed(Tensor z, const OdeRhs& f, double t0, double t1, int steps) {
  double h = (t1 - t0) / steps;
  for (int s = 0; s < steps; ++s) {
    double t = t0 + s * h;
    Tensor k1 = f(z, t);
    Tensor k2 = f(add(z, scale(k1, h / 2)), t + h / 2);
    Tensor k3 = f(add(z, scale(k2, h / 2)), t + h / 2);
    Tensor k4 = f(add(z, scale(k3, h)), t + h);
    Tensor incr = add(add(k1, k4), scale(add(k2, k3), 2.0));
    z = add(z, scale(incr, h / 6.0));
    check_state(z);
  }
  return z;
}

// Dormand-Prince 4(5) embedded pair
Tensor dopri45(Tensor z, const OdeRhs& f, const OdeConfig& cfg) {
  static const double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static const double c[7] = {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static const double b5[7] = {35.0 / 384,     0.0,        500.0 / 1113, 125.0 / 192,
                               -2187.0 / 6784, 11.0 / 84,  0.0};
  static const double b4[7] = {5179.0 / 57600,    0.0,          7571.0 / 16695,
                               393.0 / 640,       -92097.0 / 339200,
                               187.0 / 2100,      1.0 / 40};

  double span = cfg.t1 - cfg.t0;
  double t = cfg.t0;
  double h = span / 16.0;  // conservative opener; the controller adapts fast
  const double h_min = std::abs(span) * 1e-12;
  int taken = 0;
  while (t < cfg.t1 - 1e-15 * std::abs(span)) {
    if (++taken > cfg.max_steps)
      throw TooLargeError("ode_evolve: adaptive solver exceeded max_steps");
    if (std::abs(h) < h_min)
      throw StepUnderflowError("ode_evolve: step size underflow");
    if (t + h > cfg.t1) h = cfg.t1 - t;

    Tensor k[7];
    k[0] = f(z, t);
    for (int s = 1; s < 7; ++s) {
      Tensor zs = z;
      for (int j = 0; j < s; ++j)
        if (a[s][j] != 0.0) zs = add(zs, scale(k[j], h * a[s][j]));
      k[s] = f(zs, t + c[s] * h);
    }
    Tensor z5 = z;
    for (int s = 0; s < 7; ++s)
      if (b5[s] != 0.0) z5 = add(z5, scale(k[s], h * b5[s]));

    // error estimate from the embedded 4th-order solution; values only
    double err = 0.0;
    {
      const double* pz = z.data();
      const double* p5 = z5.data();
      int64_t m = z.size();
      std::vector<double> z4(static_cast<size_t>(m));
      for (int64_t i = 0; i < m; ++i) z4[i] = pz[i];
      for (int s = 0; s < 7; ++s) {
        if (b4[s] == 0.0) continue;
        const double* pk = k[s].data();
        for (int64_t i = 0; i < m; ++i) z4[i] += h * b4[s] * pk[i];
      }
      double acc = 0.0;
      for (int64_t i = 0; i < m; ++i) {
        double sc = cfg.atol + cfg.rtol * std::max(std::abs(pz[i]), std::abs(p5[i]));
        double e = (p5[i] - z4[i]) / sc;
        acc += e * e;
      }
      err = std::sqrt(acc / static_cast<double>(m));
    }

    if (!std::isfinite(err)) throw NonFiniteStateError("ode_evolve: error estimate diverged");
    if (err <= 1.0) {
      t += h;
      z = z5;
      check_state(z);
    }
    double factor = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    h *= std::clamp(factor, 0.2, 5.0);
  }
  return z;
}

}  // namespace

Tensor ode_evolve(const Tensor& z0, const OdeRhs& rhs, const OdeConfig& cfg) {
  if (!z0.defined() || z0.size() < 1)
    throw EmptySequenceError("ode_evolve: empty state");
  if (cfg.t1 < cfg.t0) throw NumericError("ode_evolve: t1 must be >= t0");
  if (cfg.t1 == cfg.t0) return z0;
  if (cfg.adaptive) return dopri45(z0, rhs, cfg);
  if (cfg.steps < 1) throw NumericError("ode_evolve: steps must be positive");
  return rk4_fixed(z0, rhs, cfg.t0, cfg.t1, cfg.steps);
}

Tensor OdeMlp::operator()(const Tensor& z, double t) const {
  if (z.shape().size() == 1) {
    Tensor x = concat_vec(z, Tensor::scalar(t));
    Tensor h = tanh_op(add(matvec(w1, x), b1));
    return add(matvec(w2, h), b2);
  }
  int n = z.rows();
  Tensor x = hcat(z, Tensor::full({n, 1}, t));
  Tensor h = tanh_op(add_rowwise(matmul_nt(x, w1), b1));
  return add_rowwise(matmul_nt(h, w2), b2);
}

Tensor evolve_context_weights(const Tensor& cw, const OdeContextParams& p,
                              const OdeConfig& cfg) {
  if (cw.shape().size() != 1) throw ShapeMismatchError("evolve_context_weights: cw must be a vector");
  int n = static_cast<int>(cw.size());
  int s = static_cast<int>(p.lift_w.size());
  // z0[i,:] = cw[i] * lift_w + lift_b
  Tensor z0 = add_rowwise(matmul(reshape(cw, {n, 1}), reshape(p.lift_w, {1, s})),
                          p.lift_b);
  OdeRhs rhs = [&p](const Tensor& z, double t) { return p.field(z, t); };
  Tensor z1 = ode_evolve(z0, rhs, cfg);
  Tensor gate = sigmoid(add_broadcast_scalar(matvec(z1, p.readout_w), p.readout_b));
  return mul(cw, gate);
}

}  // namespace acosqe
