#include "acosqe/compress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "acosqe/errors.hpp"

namespace acosqe {

// ---------------------------------------------------------------------------
// adapters

LoraAdapter make_lora(const std::string& target, int d_out, int d_in, int r,
                      Rng& rng) {
  if (r < 1) throw NumericError("make_lora: rank must be >= 1");
  LoraAdapter ad;
  ad.target = target;
  ad.r = r;
  std::vector<double> a(static_cast<size_t>(r) * d_in);
  double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (double& v : a) v = rng.uniform(-scale, scale);
  ad.a = Tensor::from({r, d_in}, std::move(a), true);
  ad.b = Tensor::zeros({d_out, r}, true);  // zero init: adapted == base at start
  return ad;
}

Tensor lora_apply(const Tensor& w0, const LoraAdapter& adapter, const Tensor& x) {
  int d_out = w0.rows(), d_in = w0.cols();
  if (adapter.a.shape().size() != 2 || adapter.a.cols() != d_in ||
      adapter.b.shape().size() != 2 || adapter.b.rows() != d_out ||
      adapter.b.cols() != adapter.a.rows())
    throw ShapeMismatchError("lora_apply: adapter shapes do not conform");
  if (x.shape().size() == 1) {
    if (static_cast<int>(x.size()) != d_in)
      throw ShapeMismatchError("lora_apply: input length");
    return add(matvec(w0, x), matvec(adapter.b, matvec(adapter.a, x)));
  }
  if (x.cols() != d_in) throw ShapeMismatchError("lora_apply: input width");
  return add(matmul_nt(x, w0), matmul_nt(matmul_nt(x, adapter.a), adapter.b));
}

AdaloraAdapter make_adalora(const std::string& target, int d_out, int d_in,
                            int init_r, int target_r, Rng& rng) {
  if (init_r < 1) throw NumericError("make_adalora: init_r must be >= 1");
  if (target_r > init_r)
    throw BudgetInfeasibleError("make_adalora: target_r exceeds init_r");
  AdaloraAdapter ad;
  ad.target = target;
  ad.init_r = init_r;
  ad.target_r = target_r;
  std::vector<double> p(static_cast<size_t>(d_out) * init_r);
  std::vector<double> q(static_cast<size_t>(init_r) * d_in);
  double sp = 1.0 / std::sqrt(static_cast<double>(init_r));
  double sq = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (double& v : p) v = rng.uniform(-sp, sp);
  for (double& v : q) v = rng.uniform(-sq, sq);
  ad.p = Tensor::from({d_out, init_r}, std::move(p), true);
  ad.lambda = Tensor::zeros({init_r}, true);  // zero singular values at start
  ad.q = Tensor::from({init_r, d_in}, std::move(q), true);
  ad.retained.assign(static_cast<size_t>(init_r), 1);
  return ad;
}

Tensor adalora_delta(const AdaloraAdapter& adapter) {
  int r = static_cast<int>(adapter.lambda.size());
  if (adapter.p.shape().size() != 2 || adapter.p.cols() != r ||
      adapter.q.shape().size() != 2 || adapter.q.rows() != r ||
      static_cast<int>(adapter.retained.size()) != r)
    throw ShapeMismatchError("adalora_delta: adapter shapes do not conform");
  std::vector<double> m(adapter.retained.begin(), adapter.retained.end());
  Tensor masked = mul(adapter.lambda, Tensor::from({r}, std::move(m)));
  return matmul(scale_cols(adapter.p, masked), adapter.q);
}

Tensor orthogonality_penalty(const Tensor& p, const Tensor& q) {
  auto gram_residual = [](const Tensor& m) {
    Tensor g = matmul_tn(m, m);  // (cols, cols)
    int c = g.rows();
    std::vector<double> eye(static_cast<size_t>(c) * c, 0.0);
    for (int i = 0; i < c; ++i) eye[static_cast<size_t>(i) * c + i] = 1.0;
    return sum_squares(sub(g, Tensor::from({c, c}, std::move(eye))));
  };
  return add(gram_residual(p), gram_residual(q));
}

void SensitivityEma::update(const std::string& name,
                            const std::vector<double>& values,
                            const std::vector<double>& grads) {
  if (values.size() != grads.size())
    throw ShapeMismatchError("SensitivityEma: values/grads length mismatch");
  auto it = ema_.find(name);
  if (it == ema_.end()) {
    std::vector<double> fresh(values.size());
    for (size_t i = 0; i < values.size(); ++i)
      fresh[i] = std::abs(values[i] * grads[i]);
    ema_.emplace(name, std::move(fresh));
    return;
  }
  if (it->second.size() != values.size())
    throw ShapeMismatchError("SensitivityEma: size changed between updates");
  for (size_t i = 0; i < values.size(); ++i)
    it->second[i] = decay_ * it->second[i] +
                    (1.0 - decay_) * std::abs(values[i] * grads[i]);
}

void SensitivityEma::set(const std::string& name, std::vector<double> ema) {
  ema_[name] = std::move(ema);
}

const std::vector<double>* SensitivityEma::find(const std::string& name) const {
  auto it = ema_.find(name);
  return it == ema_.end() ? nullptr : &it->second;
}

int adalora_budget(int init_total, int target_total, int step, int total_steps) {
  if (target_total > init_total)
    throw BudgetInfeasibleError("rank budget target exceeds initial rank");
  if (total_steps < 1 || step >= total_steps) return target_total;
  double frac = 1.0 - static_cast<double>(std::max(step, 0)) / total_steps;
  double b = target_total + (init_total - target_total) * frac * frac * frac;
  return static_cast<int>(std::llround(b));
}

void adalora_step_prune(std::vector<AdaloraAdapter*>& adapters,
                        const SensitivityEma& sens, int step, int total_steps) {
  int init_total = 0, target_total = 0;
  for (const auto* ad : adapters) {
    if (ad->target_r > ad->init_r)
      throw BudgetInfeasibleError("adapter '" + ad->target +
                                  "': target_r exceeds init_r");
    init_total += ad->init_r;
    target_total += ad->target_r;
  }
  int budget = adalora_budget(init_total, target_total, step, total_steps);

  struct Triplet {
    double importance;
    int adapter;
    int k;
  };
  std::vector<Triplet> all;
  for (size_t ai = 0; ai < adapters.size(); ++ai) {
    AdaloraAdapter* ad = adapters[ai];
    int r = ad->init_r;
    int d_out = ad->p.rows();
    int d_in = ad->q.cols();
    const std::vector<double>* sl = sens.find(ad->target + ".lambda");
    const std::vector<double>* sp = sens.find(ad->target + ".p");
    const std::vector<double>* sq = sens.find(ad->target + ".q");
    for (int k = 0; k < r; ++k) {
      // fall back to parameter magnitude before any sensitivity is recorded
      double imp = sl ? (*sl)[k] : std::abs(ad->lambda.at(k));
      double acc = 0.0;
      if (sp) {
        for (int i = 0; i < d_out; ++i) acc += (*sp)[static_cast<size_t>(i) * r + k];
        imp += acc / d_out;
      }
      if (sq) {
        acc = 0.0;
        for (int j = 0; j < d_in; ++j) acc += (*sq)[static_cast<size_t>(k) * d_in + j];
        imp += acc / d_in;
      }
      all.push_back({imp, static_cast<int>(ai), k});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Triplet& a, const Triplet& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    if (a.adapter != b.adapter) return a.adapter < b.adapter;
    return a.k < b.k;
  });
  for (auto* ad : adapters)
    std::fill(ad->retained.begin(), ad->retained.end(), uint8_t{0});
  for (int i = 0; i < budget && i < static_cast<int>(all.size()); ++i)
    adapters[all[i].adapter]->retained[all[i].k] = 1;
}

// ---------------------------------------------------------------------------
// dense SPD helpers

namespace {

// lower Cholesky factor of a dense SPD matrix; throws when a pivot collapses
std::vector<double> chol_lower(const double* a, int n) {
  std::vector<double> l(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[static_cast<size_t>(i) * n + j];
      for (int k = 0; k < j; ++k)
        s -= l[static_cast<size_t>(i) * n + k] * l[static_cast<size_t>(j) * n + k];
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s))
          throw SingularHessianError("Cholesky pivot " + std::to_string(i) +
                                     " is not positive");
        l[static_cast<size_t>(i) * n + i] = std::sqrt(s);
      } else {
        l[static_cast<size_t>(i) * n + j] = s / l[static_cast<size_t>(j) * n + j];
      }
    }
  }
  return l;
}

// solve L y = b then L^T x = y
void chol_solve(const std::vector<double>& l, int n, double* b) {
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l[static_cast<size_t>(i) * n + k] * b[k];
    b[i] = s / l[static_cast<size_t>(i) * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= l[static_cast<size_t>(k) * n + i] * b[k];
    b[i] = s / l[static_cast<size_t>(i) * n + i];
  }
}

}  // namespace

Tensor spd_inverse(const Tensor& h) {
  if (h.shape().size() != 2 || h.rows() != h.cols())
    throw ShapeMismatchError("spd_inverse: matrix must be square");
  int n = h.rows();
  std::vector<double> l = chol_lower(h.data(), n);
  Tensor inv = Tensor::zeros({n, n});
  double* out = inv.mutable_data();
  std::vector<double> col(n);
  for (int j = 0; j < n; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0;
    chol_solve(l, n, col.data());
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i) * n + j] = col[i];
  }
  // symmetrize against round-off so downstream factorizations stay stable
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) {
      double m = 0.5 * (out[static_cast<size_t>(i) * n + j] +
                        out[static_cast<size_t>(j) * n + i]);
      out[static_cast<size_t>(i) * n + j] = m;
      out[static_cast<size_t>(j) * n + i] = m;
    }
  return inv;
}

// ---------------------------------------------------------------------------
// pruning

Tensor hessian_accumulate(const Tensor& x, double lambda) {
  if (x.shape().size() != 2) throw ShapeMismatchError("hessian_accumulate: X must be d x N");
  int d = x.rows(), cols = x.cols();
  if (cols < 1) throw NoInputsError("hessian_accumulate: no calibration columns");
  Tensor h = Tensor::zeros({d, d});
  gemm_acc(h.mutable_data(), x.data(), x.data(), d, d, cols, false, true);
  double* hp = h.mutable_data();
  double trace = 0.0;
  for (int i = 0; i < d; ++i) trace += hp[static_cast<size_t>(i) * d + i];
  double damp = lambda * trace / d;
  for (int i = 0; i < d; ++i) hp[static_cast<size_t>(i) * d + i] += damp;
  return h;
}

ObsStats obs_stats(const Tensor& w_row, const Tensor& h_inv, int m) {
  if (w_row.shape().size() != 1) throw ShapeMismatchError("obs_stats: w must be a vector");
  int d = static_cast<int>(w_row.size());
  if (h_inv.shape().size() != 2 || h_inv.rows() != d || h_inv.cols() != d)
    throw ShapeMismatchError("obs_stats: inverse Hessian shape");
  if (m < 0 || m >= d) throw LabelOutOfRangeError("obs_stats: index out of range");
  double diag = h_inv.at(m, m);
  if (!(diag > 0.0) || !std::isfinite(diag))
    throw SingularHessianError("obs_stats: [H^-1]_mm is not positive");
  ObsStats st;
  double wm = w_row.at(m);
  st.epsilon = wm * wm / diag;
  st.delta.assign(d, 0.0);
  double coef = -wm / diag;
  for (int i = 0; i < d; ++i) st.delta[i] = coef * h_inv.at(i, m);
  return st;
}

PruneResult sparsegpt_prune_layer(const Tensor& w, const Tensor& x,
                                  double sparsity, double lambda, int block) {
  if (w.shape().size() != 2) throw ShapeMismatchError("prune: W must be a matrix");
  if (sparsity < 0.0 || sparsity > 1.0)
    throw NumericError("prune: sparsity must lie in [0,1]");
  int r = w.rows(), c = w.cols();
  if (x.shape().size() != 2 || x.rows() != c)
    throw ShapeMismatchError("prune: calibration X must be (in, N)");
  if (x.cols() < 1) throw NoInputsError("prune: empty calibration batch");
  if (block < 1) block = c;

  Tensor h = hessian_accumulate(x, lambda);
  Tensor h_inv = spd_inverse(h);
  // upper factor U with H^-1 = U^T U; its rows drive the sequential updates
  std::vector<double> l2 = chol_lower(h_inv.data(), c);
  std::vector<double> u(static_cast<size_t>(c) * c, 0.0);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j <= i; ++j)
      u[static_cast<size_t>(j) * c + i] = l2[static_cast<size_t>(i) * c + j];

  // row quotas: every row gets floor(sparsity*c); the remainder of
  // round(sparsity*r*c) is handed out one per row from the top
  int64_t total_zeros = std::llround(sparsity * static_cast<double>(r) * c);
  int base = static_cast<int>(total_zeros / r);
  int extra = static_cast<int>(total_zeros - static_cast<int64_t>(base) * r);

  SparseMask mask;
  mask.rows = r;
  mask.cols = c;
  mask.keep.assign(static_cast<size_t>(r) * c, 1);
  const double* wp = w.data();
  std::vector<std::pair<double, int>> eps(c);
  for (int i = 0; i < r; ++i) {
    int quota = base + (i < extra ? 1 : 0);
    if (quota <= 0) continue;
    if (quota > c) quota = c;
    for (int j = 0; j < c; ++j) {
      double wij = wp[static_cast<size_t>(i) * c + j];
      eps[j] = {wij * wij / h_inv.at(j, j), j};
    }
    std::partial_sort(eps.begin(), eps.begin() + quota, eps.end());
    for (int q = 0; q < quota; ++q)
      mask.keep[static_cast<size_t>(i) * c + eps[q].second] = 0;
  }
  int64_t zeros = 0;
  for (uint8_t k : mask.keep)
    if (!k) ++zeros;
  mask.achieved_sparsity = static_cast<double>(zeros) / (static_cast<double>(r) * c);

  // blockwise sequential reconstruction; trailing columns get the block's
  // accumulated corrections after the block closes
  Tensor out = Tensor::from({r, c}, w.to_vector());
  double* op = out.mutable_data();
  std::vector<double> err(static_cast<size_t>(r) * block);
  for (int b0 = 0; b0 < c; b0 += block) {
    int b1 = std::min(b0 + block, c);
    std::fill(err.begin(), err.end(), 0.0);
    for (int j = b0; j < b1; ++j) {
      double ujj = u[static_cast<size_t>(j) * c + j];
      if (!(std::abs(ujj) > 0.0))
        throw SingularHessianError("prune: zero pivot in reconstruction");
      for (int i = 0; i < r; ++i) {
        if (mask.keep[static_cast<size_t>(i) * c + j]) continue;
        double e = op[static_cast<size_t>(i) * c + j] / ujj;
        err[static_cast<size_t>(i) * block + (j - b0)] = e;
        for (int t = j; t < b1; ++t)
          op[static_cast<size_t>(i) * c + t] -= e * u[static_cast<size_t>(j) * c + t];
      }
    }
    for (int i = 0; i < r; ++i)
      for (int j = b0; j < b1; ++j) {
        double e = err[static_cast<size_t>(i) * block + (j - b0)];
        if (e == 0.0) continue;
        for (int t = b1; t < c; ++t)
          op[static_cast<size_t>(i) * c + t] -= e * u[static_cast<size_t>(j) * c + t];
      }
  }
  // clamp masked weights to exact zero (the update above zeroes them modulo
  // round-off)
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      if (!mask.keep[static_cast<size_t>(i) * c + j])
        op[static_cast<size_t>(i) * c + j] = 0.0;

  return {out, std::move(mask)};
}

std::string sparsity_report(const ParamStore& store,
                            const std::map<std::string, SparseMask>& masks) {
  std::ostringstream csv;
  csv << "layer,rows,cols,sparsity\n";
  csv.setf(std::ios::fixed);
  csv.precision(6);
  int64_t total_elems = 0, total_zeros = 0;
  int layers = 0;
  for (const auto& name : store.names()) {
    const auto& shape = store.shape(name);
    if (shape.size() != 2) continue;  // only weight matrices count as layers
    int64_t elems = static_cast<int64_t>(shape[0]) * shape[1];
    int64_t zeros = 0;
    auto it = masks.find(name);
    if (it != masks.end()) {
      for (uint8_t k : it->second.keep)
        if (!k) ++zeros;
    } else {
      for (double v : store.values(name))
        if (v == 0.0) ++zeros;
    }
    ++layers;
    total_elems += elems;
    total_zeros += zeros;
    csv << name << "," << shape[0] << "," << shape[1] << ","
        << (elems ? static_cast<double>(zeros) / elems : 0.0) << "\n";
  }
  csv << "global," << layers << "," << total_elems << ","
      << (total_elems ? static_cast<double>(total_zeros) / total_elems : 0.0)
      << "\n";
  return csv.str();
}

}  // namespace acosqe
