#include "acosqe/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "acosqe/errors.hpp"
#include "acosqe/rng.hpp"

namespace acosqe {

double check_gradients(const std::function<Tensor(ParamLeaves&)>& f,
                       ParamStore& params, const GradCheckOptions& opts) {
  // one analytic sweep
  ParamLeaves leaves(params);
  Tensor loss = f(leaves);
  if (!std::isfinite(loss.item()))
    throw NonFiniteValueError("check_gradients: loss is not finite");
  loss.backward();
  params.zero_grads();
  leaves.accumulate_into(params);

  auto eval = [&]() {
    ParamLeaves fresh(params);
    Tensor out = f(fresh);
    double v = out.item();
    if (!std::isfinite(v))
      throw NonFiniteValueError("check_gradients: perturbed loss is not finite");
    return v;
  };

  Rng rng(opts.seed);
  double worst = 0.0;
  for (const auto& name : params.names()) {
    auto& vals = params.values(name);
    const auto& analytic = params.grad(name);
    int count = static_cast<int>(vals.size());
    int samples = std::min(count, opts.max_coords_per_param);
    for (int s = 0; s < samples; ++s) {
      int idx = samples == count ? s : rng.uniform_int(0, count - 1);
      double saved = vals[idx];
      vals[idx] = saved + opts.h;
      double up = eval();
      vals[idx] = saved - opts.h;
      double down = eval();
      vals[idx] = saved;
      double fd = (up - down) / (2.0 * opts.h);
      double denom = std::max({opts.scale_floor, std::abs(fd),
                               std::abs(analytic[idx])});
      worst = std::max(worst, std::abs(analytic[idx] - fd) / denom);
    }
  }
  return worst;
}

}  // namespace acosqe
