#pragma once

#include <functional>

#include "acosqe/param_store.hpp"

namespace acosqe {

struct GradCheckOptions {
  double h = 1e-5;              // central-difference step
  int max_coords_per_param = 8; // sampled coordinates per parameter
  uint64_t seed = 20240517;     // coordinate sampling seed
  double scale_floor = 1e-4;    // gradient scale below which the comparison
                                // turns absolute (fd noise dominates there)
};

// Compares reverse-mode gradients of the scalar produced by `f` against
// central differences over sampled coordinates of every parameter in
// `params`.  Returns the maximum of
//   |analytic - fd| / max(scale_floor, |fd|, |analytic|),
// i.e. relative error on live coordinates and absolute error (scaled by
// 1/scale_floor) where the gradient is too small for central differences
// to resolve.  Throws NonFiniteValueError on non-finite values.
double check_gradients(const std::function<Tensor(ParamLeaves&)>& f,
                       ParamStore& params, const GradCheckOptions& opts = {});

}  // namespace acosqe
