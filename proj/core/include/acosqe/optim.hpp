#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "acosqe/param_store.hpp"

namespace acosqe {

// Adam with bias correction.  step() consumes the store's accumulated
// gradients (and zeroes them); moment buffers are keyed by parameter name in
// sorted order, so updates are deterministic.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void freeze(const std::string& name) { frozen_.insert(name); }
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  void step(ParamStore& store) {
    ++t_;
    double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (const auto& name : store.names()) {
      if (frozen_.count(name)) continue;
      std::vector<double>& g = store.grad(name);
      std::vector<double>& v = store.values(name);
      auto& [m1, m2] = state_[name];
      if (m1.size() != g.size()) {
        m1.assign(g.size(), 0.0);
        m2.assign(g.size(), 0.0);
      }
      for (size_t i = 0; i < g.size(); ++i) {
        m1[i] = b1_ * m1[i] + (1.0 - b1_) * g[i];
        m2[i] = b2_ * m2[i] + (1.0 - b2_) * g[i] * g[i];
        double mhat = m1[i] / c1;
        double vhat = m2[i] / c2;
        v[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
    store.zero_grads();
  }

 private:
  double lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
  std::set<std::string> frozen_;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> state_;
};

}  // namespace acosqe
