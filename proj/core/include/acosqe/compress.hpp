#pragma once

#include <map>
#include <string>
#include <vector>

#include "acosqe/param_store.hpp"
#include "acosqe/rng.hpp"
#include "acosqe/tensor.hpp"

namespace acosqe {

// ---------------------------------------------------------------------------
// low-rank adapters

// y = (W0 + B A) x with A (r, d_in) and B (d_out, r); B starts at zero so the
// adapted layer equals the base layer until training moves it.
struct LoraAdapter {
  std::string target;
  Tensor a;
  Tensor b;
  int r = 0;
};

LoraAdapter make_lora(const std::string& target, int d_out, int d_in, int r,
                      Rng& rng);

// vector x -> vector; rank-2 x is treated as row vectors (n, d_in) -> (n, d_out)
Tensor lora_apply(const Tensor& w0, const LoraAdapter& adapter, const Tensor& x);

// SVD-shaped adapter: delta = P diag(lambda) Q, with a binary retention mask
// over the singular triplets.
struct AdaloraAdapter {
  std::string target;
  Tensor p;       // (d_out, r)
  Tensor lambda;  // (r)
  Tensor q;       // (r, d_in)
  std::vector<uint8_t> retained;  // 1 = triplet active
  int init_r = 0;
  int target_r = 0;
};

AdaloraAdapter make_adalora(const std::string& target, int d_out, int d_in,
                            int init_r, int target_r, Rng& rng);

// P diag(lambda . retained) Q as a dense (d_out, d_in) matrix
Tensor adalora_delta(const AdaloraAdapter& adapter);

// |P^T P - I|_F^2 + |Q^T Q - I|_F^2
Tensor orthogonality_penalty(const Tensor& p, const Tensor& q);

// Per-element exponential moving average of |grad * param|, the signal the
// rank allocator ranks triplets by.
class SensitivityEma {
 public:
  explicit SensitivityEma(double decay = 0.85) : decay_(decay) {}
  // values/grads must be equal length; first update seeds the average
  void update(const std::string& name, const std::vector<double>& values,
              const std::vector<double>& grads);
  void set(const std::string& name, std::vector<double> ema);  // direct seed
  const std::vector<double>* find(const std::string& name) const;
  double decay() const { return decay_; }

 private:
  double decay_;
  std::map<std::string, std::vector<double>> ema_;
};

// Re-derive the retention masks so that the total retained rank follows a
// cubic interpolation from the summed init_r down to the summed target_r over
// total_steps.  Importance of triplet k is the lambda sensitivity plus the
// mean sensitivities of P column k and Q row k.  Masks are recomputed from
// scratch, so a triplet can come back while the budget still exceeds it.
void adalora_step_prune(std::vector<AdaloraAdapter*>& adapters,
                        const SensitivityEma& sens, int step, int total_steps);

int adalora_budget(int init_total, int target_total, int step, int total_steps);

// ---------------------------------------------------------------------------
// one-shot pruning with weight reconstruction

// H = X X^T + lambda * mean(diag(X X^T)) * I for column inputs X (d, N)
Tensor hessian_accumulate(const Tensor& x, double lambda = 0.01);

struct ObsStats {
  double epsilon = 0.0;
  std::vector<double> delta;
};

// removal error and survivor compensation for zeroing w[m] in one row
ObsStats obs_stats(const Tensor& w_row, const Tensor& h_inv, int m);

struct SparseMask {
  int rows = 0;
  int cols = 0;
  std::vector<uint8_t> keep;  // row-major, 1 = weight kept
  double achieved_sparsity = 0.0;
};

struct PruneResult {
  Tensor w;
  SparseMask mask;
};

// Per-row lowest-error mask from the shared inverse Hessian, then sequential
// left-to-right reconstruction processed in column blocks.  Row quotas sum to
// round(sparsity * rows * cols).
PruneResult sparsegpt_prune_layer(const Tensor& w, const Tensor& x,
                                  double sparsity, double lambda = 0.01,
                                  int block = 8);

// symmetric positive definite inverse via Cholesky (shared with obs callers)
Tensor spd_inverse(const Tensor& h);

// CSV: layer,rows,cols,sparsity for every rank-2 entry, then a "global" row
// whose rows/cols columns carry the layer count and total element count.
std::string sparsity_report(const ParamStore& store,
                            const std::map<std::string, SparseMask>& masks);

}  // namespace acosqe
