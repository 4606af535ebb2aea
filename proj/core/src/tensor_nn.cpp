#include <cmath>
#include <cstring>

#include "acosqe/tensor.hpp"

namespace acosqe {

namespace {

std::shared_ptr<TensorNode> make_node(std::vector<int> shape) {
  auto n = std::make_shared<TensorNode>();
  int64_t count = 1;
  for (int d : shape) count *= d;
  n->shape = std::move(shape);
  n->val = std::make_shared<std::vector<double>>(static_cast<size_t>(count), 0.0);
  return n;
}

Tensor finish(std::shared_ptr<TensorNode> n, std::vector<Tensor> parents,
              std::function<void()> backprop) {
  bool req = false;
  for (const auto& p : parents)
    if (p.requires_grad()) req = true;
  n->requires_grad = req;
  if (req) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return Tensor(std::move(n));
}

double logsumexp_span(const double* src, int len) {
  double mx = src[0];
  for (int i = 1; i < len; ++i) mx = std::max(mx, src[i]);
  double z = 0.0;
  for (int i = 0; i < len; ++i) z += std::exp(src[i] - mx);
  return mx + std::log(z);
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor softmax_xent_rows(const Tensor& logits, const std::vector<int>& targets,
                         const std::vector<uint8_t>& mask) {
  int r = logits.rows(), c = logits.cols();
  if (static_cast<int>(targets.size()) != r || static_cast<int>(mask.size()) != r)
    throw ShapeMismatchError("softmax_xent_rows: targets/mask length mismatch");
  int active = 0;
  for (uint8_t m : mask)
    if (m) ++active;
  if (active == 0) throw EmptySequenceError();
  for (int i = 0; i < r; ++i)
    if (mask[i] && (targets[i] < 0 || targets[i] >= c))
      throw LabelOutOfRangeError("softmax_xent_rows: target out of range");

  auto n = make_node({1});
  double acc = 0.0;
  for (int i = 0; i < r; ++i) {
    if (!mask[i]) continue;
    const double* rowp = logits.data() + static_cast<size_t>(i) * c;
    acc += logsumexp_span(rowp, c) - rowp[targets[i]];
  }
  (*n->val)[0] = acc / active;
  TensorNode* self = n.get();
  TensorNode* nl = logits.node();
  std::vector<int> tcopy = targets;
  std::vector<uint8_t> mcopy = mask;
  return finish(std::move(n), {logits},
                [self, nl, r, c, active, tcopy = std::move(tcopy),
                 mcopy = std::move(mcopy)]() {
    if (!nl->requires_grad) return;
    nl->ensure_grad();
    double g = self->grad[0] / active;
    for (int i = 0; i < r; ++i) {
      if (!mcopy[i]) continue;
      const double* rowp = nl->val->data() + static_cast<size_t>(i) * c;
      double* gout = nl->grad.data() + static_cast<size_t>(i) * c;
      double lse = logsumexp_span(rowp, c);
      for (int j = 0; j < c; ++j) {
        double p = std::exp(rowp[j] - lse);
        gout[j] += g * (p - (j == tcopy[i] ? 1.0 : 0.0));
      }
    }
  });
}

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
  int v = table.rows(), d = table.cols();
  int n_rows = static_cast<int>(ids.size());
  for (int id : ids)
    if (id < 0 || id >= v)
      throw LabelOutOfRangeError("embedding_rows: id out of range");
  auto n = make_node({n_rows, d});
  for (int i = 0; i < n_rows; ++i)
    std::memcpy(n->val->data() + static_cast<size_t>(i) * d,
                table.data() + static_cast<size_t>(ids[i]) * d, sizeof(double) * d);
  TensorNode* self = n.get();
  TensorNode* nt = table.node();
  std::vector<int> idc = ids;
  return finish(std::move(n), {table}, [self, nt, d, n_rows, idc = std::move(idc)]() {
    if (!nt->requires_grad) return;
    nt->ensure_grad();
    for (int i = 0; i < n_rows; ++i) {
      double* trow = nt->grad.data() + static_cast<size_t>(idc[i]) * d;
      const double* g = self->grad.data() + static_cast<size_t>(i) * d;
      for (int j = 0; j < d; ++j) trow[j] += g[j];
    }
  });
}

// ---------------------------------------------------------------------------
// RMS normalisation: y_i = gain_i * x_i / sqrt(mean(x^2) + eps)

namespace {
void rms_forward_row(const double* x, const double* gain, double* y, int d,
                     double eps, double* inv_rms_out) {
  double ss = 0.0;
  for (int i = 0; i < d; ++i) ss += x[i] * x[i];
  double inv = 1.0 / std::sqrt(ss / d + eps);
  for (int i = 0; i < d; ++i) y[i] = gain[i] * x[i] * inv;
  *inv_rms_out = inv;
}

void rms_backward_row(const double* x, const double* gain, const double* g,
                      double inv, int d, double* dx, double* dgain) {
  // y_i = g_i x_i r,  r = (mean(x^2)+eps)^{-1/2}
  // dx_j = r g_j dy_j - (r^3 x_j / d) * sum_i dy_i g_i x_i
  double inner = 0.0;
  for (int i = 0; i < d; ++i) inner += g[i] * gain[i] * x[i];
  double r3_over_d = inv * inv * inv / d;
  for (int j = 0; j < d; ++j) {
    dx[j] += inv * gain[j] * g[j] - r3_over_d * x[j] * inner;
    dgain[j] += x[j] * inv * g[j];
  }
}
}  // namespace

Tensor rms_norm(const Tensor& a, const Tensor& gain, double eps) {
  if (a.shape().size() != 1 || gain.shape() != a.shape())
    throw ShapeMismatchError("rms_norm: vector and gain must share shape");
  int d = a.shape()[0];
  if (d == 0) throw EmptySequenceError();
  auto n = make_node({d});
  double inv = 0.0;
  rms_forward_row(a.data(), gain.data(), n->val->data(), d, eps, &inv);
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  TensorNode* ng = gain.node();
  return finish(std::move(n), {a, gain}, [self, na, ng, d, inv]() {
    std::vector<double> dummy_x(na->requires_grad ? 0 : d, 0.0);
    std::vector<double> dummy_g(ng->requires_grad ? 0 : d, 0.0);
    if (na->requires_grad) na->ensure_grad();
    if (ng->requires_grad) ng->ensure_grad();
    double* dx = na->requires_grad ? na->grad.data() : dummy_x.data();
    double* dg = ng->requires_grad ? ng->grad.data() : dummy_g.data();
    rms_backward_row(na->val->data(), ng->val->data(), self->grad.data(), inv, d,
                     dx, dg);
  });
}

Tensor rms_norm_rows(const Tensor& m, const Tensor& gain, double eps) {
  int r = m.rows(), d = m.cols();
  if (gain.shape().size() != 1 || gain.shape()[0] != d)
    throw ShapeMismatchError("rms_norm_rows: gain length mismatch");
  auto n = make_node({r, d});
  auto invs = std::make_shared<std::vector<double>>(r, 0.0);
  for (int i = 0; i < r; ++i)
    rms_forward_row(m.data() + static_cast<size_t>(i) * d, gain.data(),
                    n->val->data() + static_cast<size_t>(i) * d, d, eps,
                    &(*invs)[i]);
  TensorNode* self = n.get();
  TensorNode* nm = m.node();
  TensorNode* ng = gain.node();
  return finish(std::move(n), {m, gain}, [self, nm, ng, r, d, invs]() {
    std::vector<double> scratch_x, scratch_g;
    if (!nm->requires_grad) scratch_x.assign(static_cast<size_t>(r) * d, 0.0);
    if (!ng->requires_grad) scratch_g.assign(d, 0.0);
    if (nm->requires_grad) nm->ensure_grad();
    if (ng->requires_grad) ng->ensure_grad();
    for (int i = 0; i < r; ++i) {
      double* dx = nm->requires_grad
                       ? nm->grad.data() + static_cast<size_t>(i) * d
                       : scratch_x.data() + static_cast<size_t>(i) * d;
      double* dg = ng->requires_grad ? ng->grad.data() : scratch_g.data();
      rms_backward_row(nm->val->data() + static_cast<size_t>(i) * d,
                       ng->val->data(),
                       self->grad.data() + static_cast<size_t>(i) * d, (*invs)[i],
                       d, dx, dg);
    }
  });
}

// ---------------------------------------------------------------------------
// SwiGLU: gate = u * sigmoid(beta*u) * v

Tensor swish_gate(const Tensor& u, const Tensor& v, double beta) {
  if (u.shape() != v.shape()) throw ShapeMismatchError("swish_gate: shape mismatch");
  auto n = make_node(u.shape());
  const double* pu = u.data();
  const double* pv = v.data();
  double* out = n->val->data();
  int64_t count = u.size();
  for (int64_t i = 0; i < count; ++i) {
    double s = 1.0 / (1.0 + std::exp(-beta * pu[i]));
    out[i] = pu[i] * s * pv[i];
  }
  TensorNode* self = n.get();
  TensorNode* nu = u.node();
  TensorNode* nv = v.node();
  return finish(std::move(n), {u, v}, [self, nu, nv, beta]() {
    int64_t count = self->numel();
    const double* pu = nu->val->data();
    const double* pv = nv->val->data();
    const double* g = self->grad.data();
    if (nu->requires_grad) {
      nu->ensure_grad();
      for (int64_t i = 0; i < count; ++i) {
        double s = 1.0 / (1.0 + std::exp(-beta * pu[i]));
        double dswish = s + beta * pu[i] * s * (1.0 - s);
        nu->grad[i] += g[i] * pv[i] * dswish;
      }
    }
    if (nv->requires_grad) {
      nv->ensure_grad();
      for (int64_t i = 0; i < count; ++i) {
        double s = 1.0 / (1.0 + std::exp(-beta * pu[i]));
        nv->grad[i] += g[i] * pu[i] * s;
      }
    }
  });
}

Tensor swiglu_ffn(const Tensor& x, const Tensor& w, const Tensor& v,
                  const Tensor& w2, double beta) {
  // Row-vector convention: x (d), W (d,f), V (d,f), W2 (f,o).
  bool vec_in = x.shape().size() == 1;
  Tensor xm = vec_in ? reshape(x, {1, x.shape()[0]}) : x;
  Tensor u = matmul(xm, w);
  Tensor gate = swish_gate(u, matmul(xm, v), beta);
  Tensor out = matmul(gate, w2);
  if (vec_in) return reshape(out, {out.cols()});
  return out;
}

// ---------------------------------------------------------------------------
// rotary embedding

Tensor rope_rotate(const Tensor& v, const std::vector<double>& angles) {
  if (v.shape().size() != 1) throw ShapeMismatchError("rope_rotate: vector required");
  int d = v.shape()[0];
  if (d % 2 != 0) throw OddDimensionError("rope_rotate: dimension must be even");
  if (static_cast<int>(angles.size()) != d / 2)
    throw ShapeMismatchError("rope_rotate: need one angle per pair");
  auto n = make_node({d});
  const double* p = v.data();
  double* out = n->val->data();
  for (int j = 0; j < d / 2; ++j) {
    double c = std::cos(angles[j]);
    double s = std::sin(angles[j]);
    out[2 * j] = c * p[2 * j] - s * p[2 * j + 1];
    out[2 * j + 1] = s * p[2 * j] + c * p[2 * j + 1];
  }
  TensorNode* self = n.get();
  TensorNode* nv = v.node();
  std::vector<double> acopy = angles;
  return finish(std::move(n), {v}, [self, nv, d, acopy = std::move(acopy)]() {
    if (!nv->requires_grad) return;
    nv->ensure_grad();
    const double* g = self->grad.data();
    for (int j = 0; j < d / 2; ++j) {
      double c = std::cos(acopy[j]);
      double s = std::sin(acopy[j]);
      // transpose of the rotation
      nv->grad[2 * j] += c * g[2 * j] + s * g[2 * j + 1];
      nv->grad[2 * j + 1] += -s * g[2 * j] + c * g[2 * j + 1];
    }
  });
}

namespace {
std::vector<double> rope_angles(int d, int m, double theta_base) {
  std::vector<double> angles(d / 2);
  for (int j = 0; j < d / 2; ++j) {
    double theta = std::pow(theta_base, -2.0 * j / d);
    angles[j] = m * theta;
  }
  return angles;
}
}  // namespace

Tensor rope_apply(const Tensor& v, int m, double theta_base) {
  if (v.shape().size() != 1) throw ShapeMismatchError("rope_apply: vector required");
  int d = v.shape()[0];
  if (d % 2 != 0) throw OddDimensionError("rope_apply: dimension must be even");
  if (m < 0) throw NumericError("rope_apply: position must be non-negative");
  return rope_rotate(v, rope_angles(d, m, theta_base));
}

Tensor rope_rows(const Tensor& m, double theta_base, int start_pos) {
  int r = m.rows(), d = m.cols();
  if (d % 2 != 0) throw OddDimensionError("rope_rows: dimension must be even");
  auto n = make_node({r, d});
  // precompute cos/sin per (row, pair)
  auto trig = std::make_shared<std::vector<double>>(static_cast<size_t>(r) * d);
  for (int i = 0; i < r; ++i) {
    const double* p = m.data() + static_cast<size_t>(i) * d;
    double* out = n->val->data() + static_cast<size_t>(i) * d;
    double* t = trig->data() + static_cast<size_t>(i) * d;
    for (int j = 0; j < d / 2; ++j) {
      double theta = std::pow(theta_base, -2.0 * j / d);
      double a = (start_pos + i) * theta;
      double c = std::cos(a), s = std::sin(a);
      t[2 * j] = c;
      t[2 * j + 1] = s;
      out[2 * j] = c * p[2 * j] - s * p[2 * j + 1];
      out[2 * j + 1] = s * p[2 * j] + c * p[2 * j + 1];
    }
  }
  TensorNode* self = n.get();
  TensorNode* nm = m.node();
  return finish(std::move(n), {m}, [self, nm, r, d, trig]() {
    if (!nm->requires_grad) return;
    nm->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double* g = self->grad.data() + static_cast<size_t>(i) * d;
      const double* t = trig->data() + static_cast<size_t>(i) * d;
      double* out = nm->grad.data() + static_cast<size_t>(i) * d;
      for (int j = 0; j < d / 2; ++j) {
        double c = t[2 * j], s = t[2 * j + 1];
        out[2 * j] += c * g[2 * j] + s * g[2 * j + 1];
        out[2 * j + 1] += -s * g[2 * j] + c * g[2 * j + 1];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// recurrent cells

Tensor lstm_cell(const Tensor& x, const Tensor& hc, const Tensor& wx,
                 const Tensor& wh, const Tensor& b) {
  if (x.shape().size() != 1 || hc.shape().size() != 1 || hc.shape()[0] % 2 != 0)
    throw ShapeMismatchError("lstm_cell: x and [h;c] must be vectors, state even");
  int d = x.shape()[0];
  int h = hc.shape()[0] / 2;
  if (wx.rows() != 4 * h || wx.cols() != d || wh.rows() != 4 * h || wh.cols() != h ||
      b.shape()[0] != 4 * h)
    throw ShapeMismatchError("lstm_cell: weight shapes");
  auto n = make_node({2 * h});
  // gates a = wx x + wh h_prev + b, order [i f g o]
  auto cache = std::make_shared<std::vector<double>>(5 * h);  // i f g o tanh(c')
  {
    const double* px = x.data();
    const double* ph = hc.data();
    const double* pc = hc.data() + h;
    std::vector<double> a(4 * h, 0.0);
    for (int rg = 0; rg < 4 * h; ++rg) {
      const double* wxr = wx.data() + static_cast<size_t>(rg) * d;
      const double* whr = wh.data() + static_cast<size_t>(rg) * h;
      double acc = b.at(rg);
      for (int j = 0; j < d; ++j) acc += wxr[j] * px[j];
      for (int j = 0; j < h; ++j) acc += whr[j] * ph[j];
      a[rg] = acc;
    }
    double* out_h = n->val->data();
    double* out_c = n->val->data() + h;
    for (int j = 0; j < h; ++j) {
      double ig = 1.0 / (1.0 + std::exp(-a[j]));
      double fg = 1.0 / (1.0 + std::exp(-a[h + j]));
      double gg = std::tanh(a[2 * h + j]);
      double og = 1.0 / (1.0 + std::exp(-a[3 * h + j]));
      double cn = fg * pc[j] + ig * gg;
      double tc = std::tanh(cn);
      out_c[j] = cn;
      out_h[j] = og * tc;
      (*cache)[j] = ig;
      (*cache)[h + j] = fg;
      (*cache)[2 * h + j] = gg;
      (*cache)[3 * h + j] = og;
      (*cache)[4 * h + j] = tc;
    }
  }
  TensorNode* self = n.get();
  TensorNode* nx = x.node();
  TensorNode* nhc = hc.node();
  TensorNode* nwx = wx.node();
  TensorNode* nwh = wh.node();
  TensorNode* nb = b.node();
  return finish(std::move(n), {x, hc, wx, wh, b},
                [self, nx, nhc, nwx, nwh, nb, d, h, cache]() {
    const double* gh = self->grad.data();
    const double* gc_in = self->grad.data() + h;
    const double* pc_prev = nhc->val->data() + h;
    std::vector<double> da(4 * h);
    std::vector<double> dc_prev(h), dh_prev(h, 0.0);
    for (int j = 0; j < h; ++j) {
      double ig = (*cache)[j];
      double fg = (*cache)[h + j];
      double gg = (*cache)[2 * h + j];
      double og = (*cache)[3 * h + j];
      double tc = (*cache)[4 * h + j];
      double dct = gc_in[j] + gh[j] * og * (1.0 - tc * tc);
      double dog = gh[j] * tc;
      double dig = dct * gg;
      double dfg = dct * pc_prev[j];
      double dgg = dct * ig;
      da[j] = dig * ig * (1.0 - ig);
      da[h + j] = dfg * fg * (1.0 - fg);
      da[2 * h + j] = dgg * (1.0 - gg * gg);
      da[3 * h + j] = dog * og * (1.0 - og);
      dc_prev[j] = dct * fg;
    }
    if (nwx->requires_grad) {
      nwx->ensure_grad();
      const double* px = nx->val->data();
      for (int rg = 0; rg < 4 * h; ++rg) {
        double g = da[rg];
        if (g == 0.0) continue;
        double* wr = nwx->grad.data() + static_cast<size_t>(rg) * d;
        for (int j = 0; j < d; ++j) wr[j] += g * px[j];
      }
    }
    if (nwh->requires_grad) {
      nwh->ensure_grad();
      const double* ph = nhc->val->data();
      for (int rg = 0; rg < 4 * h; ++rg) {
        double g = da[rg];
        if (g == 0.0) continue;
        double* wr = nwh->grad.data() + static_cast<size_t>(rg) * h;
        for (int j = 0; j < h; ++j) wr[j] += g * ph[j];
      }
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (int rg = 0; rg < 4 * h; ++rg) nb->grad[rg] += da[rg];
    }
    if (nx->requires_grad) {
      nx->ensure_grad();
      for (int rg = 0; rg < 4 * h; ++rg) {
        double g = da[rg];
        if (g == 0.0) continue;
        const double* wr = nwx->val->data() + static_cast<size_t>(rg) * d;
        for (int j = 0; j < d; ++j) nx->grad[j] += g * wr[j];
      }
    }
    if (nhc->requires_grad) {
      nhc->ensure_grad();
      for (int rg = 0; rg < 4 * h; ++rg) {
        double g = da[rg];
        if (g == 0.0) continue;
        const double* wr = nwh->val->data() + static_cast<size_t>(rg) * h;
        for (int j = 0; j < h; ++j) dh_prev[j] += g * wr[j];
      }
      for (int j = 0; j < h; ++j) {
        nhc->grad[j] += dh_prev[j];
        nhc->grad[h + j] += dc_prev[j];
      }
    }
  });
}

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const Tensor& wx,
                const Tensor& wh, const Tensor& b) {
  int d = x.shape()[0];
  int h = h_prev.shape()[0];
  if (wx.rows() != 3 * h || wx.cols() != d || wh.rows() != 3 * h || wh.cols() != h ||
      b.shape()[0] != 3 * h)
    throw ShapeMismatchError("gru_cell: weight shapes");
  auto n = make_node({h});
  // gate order [z r n]; candidate n = tanh(Wn x + bn + r .* (Un h))
  auto cache = std::make_shared<std::vector<double>>(4 * h);  // z r n  Un*h
  {
    const double* px = x.data();
    const double* ph = h_prev.data();
    std::vector<double> ax(3 * h);
    std::vector<double> ah(3 * h);
    for (int rg = 0; rg < 3 * h; ++rg) {
      const double* wxr = wx.data() + static_cast<size_t>(rg) * d;
      const double* whr = wh.data() + static_cast<size_t>(rg) * h;
      double accx = b.at(rg);
      for (int j = 0; j < d; ++j) accx += wxr[j] * px[j];
      double acch = 0.0;
      for (int j = 0; j < h; ++j) acch += whr[j] * ph[j];
      ax[rg] = accx;
      ah[rg] = acch;
    }
    double* out = n->val->data();
    for (int j = 0; j < h; ++j) {
      double z = 1.0 / (1.0 + std::exp(-(ax[j] + ah[j])));
      double r = 1.0 / (1.0 + std::exp(-(ax[h + j] + ah[h + j])));
      double unh = ah[2 * h + j];
      double cand = std::tanh(ax[2 * h + j] + r * unh);
      out[j] = (1.0 - z) * cand + z * ph[j];
      (*cache)[j] = z;
      (*cache)[h + j] = r;
      (*cache)[2 * h + j] = cand;
      (*cache)[3 * h + j] = unh;
    }
  }
  TensorNode* self = n.get();
  TensorNode* nx = x.node();
  TensorNode* nh = h_prev.node();
  TensorNode* nwx = wx.node();
  TensorNode* nwh = wh.node();
  TensorNode* nb = b.node();
  return finish(std::move(n), {x, h_prev, wx, wh, b},
                [self, nx, nh, nwx, nwh, nb, d, h, cache]() {
    const double* g = self->grad.data();
    const double* ph = nh->val->data();
    // da[.] gradients on pre-activations; for the n gate we track the x-side
    // (dan) and the r*(Un h) product separately
    std::vector<double> da(3 * h);      // z r n (x-side pre-activation)
    std::vector<double> d_unh(h);       // gradient on Un*h
    for (int j = 0; j < h; ++j) {
      double z = (*cache)[j];
      double r = (*cache)[h + j];
      double cand = (*cache)[2 * h + j];
      double unh = (*cache)[3 * h + j];
      double dcand = g[j] * (1.0 - z);
      double dz = g[j] * (ph[j] - cand);
      double dan = dcand * (1.0 - cand * cand);
      double dr = dan * unh;
      d_unh[j] = dan * r;
      da[j] = dz * z * (1.0 - z);
      da[h + j] = dr * r * (1.0 - r);
      da[2 * h + j] = dan;
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (int rg = 0; rg < 3 * h; ++rg) nb->grad[rg] += da[rg];
    }
    if (nwx->requires_grad) {
      nwx->ensure_grad();
      const double* px = nx->val->data();
      for (int rg = 0; rg < 3 * h; ++rg) {
        double gv = da[rg];
        if (gv == 0.0) continue;
        double* wr = nwx->grad.data() + static_cast<size_t>(rg) * d;
        for (int j = 0; j < d; ++j) wr[j] += gv * px[j];
      }
    }
    if (nwh->requires_grad) {
      nwh->ensure_grad();
      for (int rg = 0; rg < 2 * h; ++rg) {
        double gv = da[rg];
        if (gv == 0.0) continue;
        double* wr = nwh->grad.data() + static_cast<size_t>(rg) * h;
        for (int j = 0; j < h; ++j) wr[j] += gv * ph[j];
      }
      for (int jj = 0; jj < h; ++jj) {
        double gv = d_unh[jj];
        if (gv == 0.0) continue;
        double* wr = nwh->grad.data() + static_cast<size_t>(2 * h + jj) * h;
        for (int j = 0; j < h; ++j) wr[j] += gv * ph[j];
      }
    }
    if (nx->requires_grad) {
      nx->ensure_grad();
      for (int rg = 0; rg < 3 * h; ++rg) {
        double gv = da[rg];
        if (gv == 0.0) continue;
        const double* wr = nwx->val->data() + static_cast<size_t>(rg) * d;
        for (int j = 0; j < d; ++j) nx->grad[j] += gv * wr[j];
      }
    }
    if (nh->requires_grad) {
      nh->ensure_grad();
      for (int j = 0; j < h; ++j) {
        double z = (*cache)[j];
        nh->grad[j] += g[j] * z;
      }
      for (int rg = 0; rg < 2 * h; ++rg) {
        double gv = da[rg];
        if (gv == 0.0) continue;
        const double* wr = nwh->val->data() + static_cast<size_t>(rg) * h;
        for (int j = 0; j < h; ++j) nh->grad[j] += gv * wr[j];
      }
      for (int jj = 0; jj < h; ++jj) {
        double gv = d_unh[jj];
        if (gv == 0.0) continue;
        const double* wr = nwh->val->data() + static_cast<size_t>(2 * h + jj) * h;
        for (int j = 0; j < h; ++j) nh->grad[j] += gv * wr[j];
      }
    }
  });
}

}  // namespace acosqe
