#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "acosqe/config.hpp"
#include "acosqe/corpus.hpp"
#include "acosqe/tensor.hpp"

namespace acosqe {

// Semantic relative distance of token i from an entity span:
// 0 inside the span, otherwise the gap to the nearest span token.
int srd_distance(int i, const Span& entity);

// Binary context mask: 1 where the distance is at most srd.  A missing span
// (implicit aspect) keeps every token in context.
std::vector<double> context_mask(int n, const std::optional<Span>& entity, int srd);

// Graded context weight.  Tokens within srd get weight 1.  Beyond that the
// literal mode uses (d - srd + 1) / max_len, which grows with distance; the
// figure-consistent mode uses (max_len - (d - srd + 1)) / max_len so that
// far tokens fade out.  Values are clamped to [0, 1].
std::vector<double> context_weight(int n, const std::optional<Span>& entity,
                                   int srd, int max_len, CwMode mode);

// Combine hidden states with the positional features:
// out = [H * diag-by-row(cm) | H * diag-by-row(cw)] @ proj, the disabled half
// replaced by zeros in the single-feature modes.
enum class FuseMode { kFusion, kCmOnly, kCwOnly };
Tensor fuse_features(const Tensor& h, const std::vector<double>& cm,
                     const Tensor& cw, const Tensor& proj, FuseMode mode);

// ---------------------------------------------------------------------------
// ODE evolution of the context weights

struct OdeConfig {
  double t0 = 0.0;
  double t1 = 1.0;
  int steps = 8;          // fixed-step count for the RK4 path
  bool adaptive = false;  // embedded 4(5) pair with step control
  double rtol = 0.1;
  double atol = 1e-6;
  int max_steps = 1000;
};

using OdeRhs = std::function<Tensor(const Tensor&, double)>;

// Integrate dz/dt = rhs(z, t) from t0 to t1.  Differentiable: gradients flow
// through the unrolled solver steps.  Step-size control in the adaptive mode
// reads values only.
Tensor ode_evolve(const Tensor& z0, const OdeRhs& rhs, const OdeConfig& cfg);

// Two-layer tanh dynamics over [z; t].  w1 is (hidden, s+1), w2 is (s, hidden).
// Works on a single state vector (s) or a batch of states as rows (n, s);
// every row shares the same clock t.
struct OdeMlp {
  Tensor w1, b1, w2, b2;
  Tensor operator()(const Tensor& z, double t) const;
};

// Per-token evolution of the context weights: each token's scalar weight is
// lifted to an s-dim state, all states evolve under one shared dynamics
// field, and a sigmoid readout turns the final states into multiplicative
// modulation factors.  Returns the modulated weights, elementwise
// cw[i] * sigma(readout(z_i(t1))).
struct OdeContextParams {
  Tensor lift_w, lift_b;        // (s), (s)
  OdeMlp field;                 // shared dynamics
  Tensor readout_w, readout_b;  // (s), (1)
};
Tensor evolve_context_weights(const Tensor& cw, const OdeContextParams& p,
                              const OdeConfig& cfg);

}  // namespace acosqe
