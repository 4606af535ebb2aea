#include "acosqe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <unordered_set>

namespace acosqe {

namespace {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeMismatchError("negative dimension");
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

std::shared_ptr<TensorNode> make_node(std::vector<int> shape) {
  auto n = std::make_shared<TensorNode>();
  int64_t count = shape_numel(shape);
  n->shape = std::move(shape);
  n->val = std::make_shared<std::vector<double>>(static_cast<size_t>(count), 0.0);
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeMismatchError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

// Wire a freshly computed node into the tape.  When no parent needs
// gradients the parents and closure are dropped so inference graphs stay
// skinny and die early.
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

}  // namespace

// ---------------------------------------------------------------------------
// Tensor basics

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  auto n = make_node(std::move(shape));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
  auto n = make_node(std::move(shape));
  std::fill(n->val->begin(), n->val->end(), v);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data,
                    bool requires_grad) {
  int64_t count = shape_numel(shape);
  if (count != static_cast<int64_t>(data.size()))
    throw ShapeMismatchError("from: data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->val = std::make_shared<std::vector<double>>(std::move(data));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::leaf_shared(std::vector<int> shape,
                           std::shared_ptr<std::vector<double>> data) {
  if (shape_numel(shape) != static_cast<int64_t>(data->size()))
    throw ShapeMismatchError("leaf_shared: storage does not match shape");
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->val = std::move(data);
  n->requires_grad = true;
  return Tensor(std::move(n));
}

const std::vector<int>& Tensor::shape() const { return node_->shape; }
int64_t Tensor::size() const { return node_->numel(); }

int Tensor::rows() const {
  if (node_->shape.size() != 2) throw ShapeMismatchError("rows(): not rank 2");
  return node_->shape[0];
}
int Tensor::cols() const {
  if (node_->shape.size() != 2) throw ShapeMismatchError("cols(): not rank 2");
  return node_->shape[1];
}

double Tensor::item() const {
  if (size() != 1) throw ShapeMismatchError("item(): tensor is not scalar");
  return (*node_->val)[0];
}

const double* Tensor::data() const { return node_->val->data(); }
double* Tensor::mutable_data() { return node_->val->data(); }
double Tensor::at(int i) const { return (*node_->val)[static_cast<size_t>(i)]; }
double Tensor::at(int r, int c) const {
  return (*node_->val)[static_cast<size_t>(r) * cols() + c];
}
std::vector<double> Tensor::to_vector() const { return *node_->val; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

const std::vector<double>& Tensor::grad() const {
  const_cast<TensorNode*>(node_.get())->ensure_grad();
  return node_->grad;
}

void Tensor::backward() {
  if (!node_) throw NumericError("backward() on empty tensor");
  if (size() != 1) throw ShapeMismatchError("backward() root must be scalar");
  // iterative post-order topological sort
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  struct Frame {
    TensorNode* node;
    size_t next_child;
  };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  seen.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_child < f.node->parents.size()) {
      TensorNode* child = f.node->parents[f.next_child++].node();
      if (child && child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop();
  }
}

void check_all_finite(const Tensor& t, const char* what) {
  const double* p = t.data();
  for (int64_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(p[i]))
      throw NonFiniteValueError(std::string(what) + ": non-finite value");
  }
}

// ---------------------------------------------------------------------------
// gemm kernels.  C (m,n) += op(A) op(B); A is (m,k) or (k,m) when ta.

void gemm_acc(double* c, const double* a, const double* b, int m, int n, int k,
              bool ta, bool tb) {
  if (!ta && !tb) {
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<size_t>(i) * n;
      const double* arow = a + static_cast<size_t>(i) * k;
      for (int p = 0; p < k; ++p) {
        double av = arow[p];
        if (av == 0.0) continue;
        const double* brow = b + static_cast<size_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!ta && tb) {
    // B stored (n,k); C[i][j] = dot(A row i, B row j)
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<size_t>(i) * n;
      const double* arow = a + static_cast<size_t>(i) * k;
      for (int j = 0; j < n; ++j) {
        const double* brow = b + static_cast<size_t>(j) * k;
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
        crow[j] += acc;
      }
    }
  } else if (ta && !tb) {
    // A stored (k,m)
    for (int p = 0; p < k; ++p) {
      const double* arow = a + static_cast<size_t>(p) * m;
      const double* brow = b + static_cast<size_t>(p) * n;
      for (int i = 0; i < m; ++i) {
        double av = arow[i];
        if (av == 0.0) continue;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    // A stored (k,m), B stored (n,k)
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const double* brow = b + static_cast<size_t>(j) * k;
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += a[static_cast<size_t>(p) * m + i] * brow[p];
        crow[j] += acc;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto n = make_node(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* out = n->val->data();
  int64_t count = a.size();
  for (int64_t i = 0; i < count; ++i) out[i] = pa[i] + pb[i];
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  return finish(std::move(n), {a, b}, [self, na, nb]() {
    int64_t count = self->numel();
    if (na->requires_grad) {
      na->ensure_grad();
      for (int64_t i = 0; i < count; ++i) na->grad[i] += self->grad[i];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (int64_t i = 0; i < count; ++i) nb->grad[i] += self->grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto n = make_node(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* out = n->val->data();
  int64_t count = a.size();
  for (int64_t i = 0; i < count; ++i) out[i] = pa[i] - pb[i];
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  return finish(std::move(n), {a, b}, [self, na, nb]() {
    int64_t count = self->numel();
    if (na->requires_grad) {
      na->ensure_grad();
      for (int64_t i = 0; i < count; ++i) na->grad[i] += self->grad[i];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (int64_t i = 0; i < count; ++i) nb->grad[i] -= self->grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto n = make_node(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* out = n->val->data();
  int64_t count = a.size();
  for (int64_t i = 0; i < count; ++i) out[i] = pa[i] * pb[i];
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  return finish(std::move(n), {a, b}, [self, na, nb]() {
    int64_t count = self->numel();
    if (na->requires_grad) {
      na->ensure_grad();
      const double* vb = nb->val->data();
      for (int64_t i = 0; i < count; ++i) na->grad[i] += self->grad[i] * vb[i];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      const double* va = na->val->data();
      for (int64_t i = 0; i < count; ++i) nb->grad[i] += self->grad[i] * va[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  auto n = make_node(a.shape());
  const double* pa = a.data();
  double* out = n->val->data();
  int64_t count = a.size();
  for (int64_t i = 0; i < count; ++i) out[i] = pa[i] * c;
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  return finish(std::move(n), {a}, [self, na, c]() {
    if (!na->requires_grad) return;
    na->ensure_grad();
    int64_t count = self->numel();
    for (int64_t i = 0; i < count; ++i) na->grad[i] += self->grad[i] * c;
  });
}

Tensor add_const(const Tensor& a, double c) {
  auto n = make_node(a.shape());
  const double* pa = a.data();
  double* out = n->val->data();
  int64_t count = a.size();
  for (int64_t i = 0; i < count; ++i) out[i] = pa[i] + c;
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  return finish(std::move(n), {a}, [self, na]() {
    if (!na->requires_grad) return;
    na->ensure_grad();
    int64_t count = self->numel();
    for (int64_t i = 0; i < count; ++i) na->grad[i] += self->grad[i];
  });
}

Tensor sigmoid(const Tensor& a) {
  auto n = make_node(a.shape());
  const double* pa = a.data();
  double* out = n->val->data();
  int64_t count = a.size();
  for (int64_t i = 0; i < count; ++i) out[i] = 1.0 / (1.0 + std::exp(-pa[i]));
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  return finish(std::move(n), {a}, [self, na]() {
    if (!na->requires_grad) return;
    na->ensure_grad();
    const double* y = self->val->data();
    int64_t count = self->numel();
    for (int64_t i = 0; i < count; ++i)
      na->grad[i] += self->grad[i] * y[i] * (1.0 - y[i]);
  });
}

Tensor tanh_op(const Tensor& a) {
  auto n = make_node(a.shape());
  const double* pa = a.data();
  double* out = n->val->data();
  int64_t count = a.size();
  for (int64_t i = 0; i < count; ++i) out[i] = std::tanh(pa[i]);
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  return finish(std::move(n), {a}, [self, na]() {
    if (!na->requires_grad) return;
    na->ensure_grad();
    const double* y = self->val->data();
    int64_t count = self->numel();
    for (int64_t i = 0; i < count; ++i)
      na->grad[i] += self->grad[i] * (1.0 - y[i] * y[i]);
  });
}

Tensor sum(const Tensor& a) {
  auto n = make_node({1});
  const double* pa = a.data();
  double acc = 0.0;
  int64_t count = a.size();
  for (int64_t i = 0; i < count; ++i) acc += pa[i];
  (*n->val)[0] = acc;
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  return finish(std::move(n), {a}, [self, na]() {
    if (!na->requires_grad) return;
    na->ensure_grad();
    double g = self->grad[0];
    for (auto& v : na->grad) v += g;
  });
}

Tensor mean(const Tensor& a) {
  int64_t count = a.size();
  if (count == 0) throw EmptySequenceError();
  return scale(sum(a), 1.0 / static_cast<double>(count));
}

Tensor sum_squares(const Tensor& a) {
  auto n = make_node({1});
  const double* pa = a.data();
  double acc = 0.0;
  int64_t count = a.size();
  for (int64_t i = 0; i < count; ++i) acc += pa[i] * pa[i];
  (*n->val)[0] = acc;
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  return finish(std::move(n), {a}, [self, na]() {
    if (!na->requires_grad) return;
    na->ensure_grad();
    double g = self->grad[0];
    const double* v = na->val->data();
    int64_t count = na->numel();
    for (int64_t i = 0; i < count; ++i) na->grad[i] += 2.0 * g * v[i];
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  auto n = make_node({1});
  const double* pa = a.data();
  const double* pb = b.data();
  double acc = 0.0;
  int64_t count = a.size();
  for (int64_t i = 0; i < count; ++i) acc += pa[i] * pb[i];
  (*n->val)[0] = acc;
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  return finish(std::move(n), {a, b}, [self, na, nb]() {
    double g = self->grad[0];
    int64_t count = na->numel();
    if (na->requires_grad) {
      na->ensure_grad();
      const double* vb = nb->val->data();
      for (int64_t i = 0; i < count; ++i) na->grad[i] += g * vb[i];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      const double* va = na->val->data();
      for (int64_t i = 0; i < count; ++i) nb->grad[i] += g * va[i];
    }
  });
}

// ---------------------------------------------------------------------------
// shaping

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (shape_numel(shape) != a.size())
    throw ShapeMismatchError("reshape: element count mismatch");
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->val = a.node()->val;  // zero-copy view
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  return finish(std::move(n), {a}, [self, na]() {
    if (!na->requires_grad) return;
    na->ensure_grad();
    int64_t count = self->numel();
    for (int64_t i = 0; i < count; ++i) na->grad[i] += self->grad[i];
  });
}

Tensor concat_vec(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 1 || b.shape().size() != 1)
    throw ShapeMismatchError("concat_vec: vectors required");
  int la = a.shape()[0], lb = b.shape()[0];
  auto n = make_node({la + lb});
  double* out = n->val->data();
  std::memcpy(out, a.data(), sizeof(double) * la);
  std::memcpy(out + la, b.data(), sizeof(double) * lb);
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  return finish(std::move(n), {a, b}, [self, na, nb, la, lb]() {
    if (na->requires_grad) {
      na->ensure_grad();
      for (int i = 0; i < la; ++i) na->grad[i] += self->grad[i];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (int i = 0; i < lb; ++i) nb->grad[i] += self->grad[la + i];
    }
  });
}

Tensor slice_vec(const Tensor& a, int offset, int len) {
  if (a.shape().size() != 1) throw ShapeMismatchError("slice_vec: vector required");
  if (offset < 0 || len < 0 || offset + len > a.shape()[0])
    throw ShapeMismatchError("slice_vec: range out of bounds");
  auto n = make_node({len});
  std::memcpy(n->val->data(), a.data() + offset, sizeof(double) * len);
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  return finish(std::move(n), {a}, [self, na, offset, len]() {
    if (!na->requires_grad) return;
    na->ensure_grad();
    for (int i = 0; i < len; ++i) na->grad[offset + i] += self->grad[i];
  });
}

Tensor row(const Tensor& m, int i) {
  int r = m.rows(), c = m.cols();
  if (i < 0 || i >= r) throw ShapeMismatchError("row: index out of range");
  auto n = make_node({c});
  std::memcpy(n->val->data(), m.data() + static_cast<size_t>(i) * c,
              sizeof(double) * c);
  TensorNode* self = n.get();
  TensorNode* nm = m.node();
  return finish(std::move(n), {m}, [self, nm, i, c]() {
    if (!nm->requires_grad) return;
    nm->ensure_grad();
    for (int j = 0; j < c; ++j)
      nm->grad[static_cast<size_t>(i) * c + j] += self->grad[j];
  });
}

Tensor hcat(const Tensor& a, const Tensor& b) {
  int r = a.rows();
  if (b.rows() != r) throw ShapeMismatchError("hcat: row count mismatch");
  int ca = a.cols(), cb = b.cols();
  auto n = make_node({r, ca + cb});
  double* out = n->val->data();
  const double* pa = a.data();
  const double* pb = b.data();
  for (int i = 0; i < r; ++i) {
    std::memcpy(out + static_cast<size_t>(i) * (ca + cb), pa + static_cast<size_t>(i) * ca,
                sizeof(double) * ca);
    std::memcpy(out + static_cast<size_t>(i) * (ca + cb) + ca,
                pb + static_cast<size_t>(i) * cb, sizeof(double) * cb);
  }
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  return finish(std::move(n), {a, b}, [self, na, nb, r, ca, cb]() {
    int w = ca + cb;
    if (na->requires_grad) {
      na->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < ca; ++j)
          na->grad[static_cast<size_t>(i) * ca + j] +=
              self->grad[static_cast<size_t>(i) * w + j];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < cb; ++j)
          nb->grad[static_cast<size_t>(i) * cb + j] +=
              self->grad[static_cast<size_t>(i) * w + ca + j];
    }
  });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw EmptySequenceError("stack_rows: no rows");
  int d = static_cast<int>(rows[0].size());
  for (const auto& r : rows)
    if (r.shape().size() != 1 || static_cast<int>(r.size()) != d)
      throw ShapeMismatchError("stack_rows: rows must be equal-length vectors");
  int k = static_cast<int>(rows.size());
  auto n = make_node({k, d});
  double* out = n->val->data();
  for (int i = 0; i < k; ++i)
    std::memcpy(out + static_cast<size_t>(i) * d, rows[i].data(),
                sizeof(double) * d);
  TensorNode* self = n.get();
  std::vector<TensorNode*> srcs;
  srcs.reserve(rows.size());
  for (const auto& r : rows) srcs.push_back(r.node());
  return finish(std::move(n), rows, [self, srcs = std::move(srcs), d]() {
    for (size_t i = 0; i < srcs.size(); ++i) {
      if (!srcs[i]->requires_grad) continue;
      srcs[i]->ensure_grad();
      for (int j = 0; j < d; ++j)
        srcs[i]->grad[j] += self->grad[i * d + j];
    }
  });
}

// ---------------------------------------------------------------------------
// matmul family

Tensor matmul(const Tensor& a, const Tensor& b) {
  int m = a.rows(), k = a.cols();
  if (b.rows() != k) throw ShapeMismatchError("matmul: inner dims differ");
  int n_cols = b.cols();
  auto n = make_node({m, n_cols});
  gemm_acc(n->val->data(), a.data(), b.data(), m, n_cols, k, false, false);
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  return finish(std::move(n), {a, b}, [self, na, nb, m, n_cols, k]() {
    if (na->requires_grad) {
      na->ensure_grad();
      // dA += dC * B^T
      gemm_acc(na->grad.data(), self->grad.data(), nb->val->data(), m, k, n_cols,
               false, true);
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      // dB += A^T * dC
      gemm_acc(nb->grad.data(), na->val->data(), self->grad.data(), k, n_cols, m,
               true, false);
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  int m = a.rows(), k = a.cols();
  if (b.cols() != k) throw ShapeMismatchError("matmul_nt: inner dims differ");
  int n_cols = b.rows();
  auto n = make_node({m, n_cols});
  gemm_acc(n->val->data(), a.data(), b.data(), m, n_cols, k, false, true);
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  return finish(std::move(n), {a, b}, [self, na, nb, m, n_cols, k]() {
    if (na->requires_grad) {
      na->ensure_grad();
      // dA += dC * B
      gemm_acc(na->grad.data(), self->grad.data(), nb->val->data(), m, k, n_cols,
               false, false);
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      // dB += dC^T * A
      gemm_acc(nb->grad.data(), self->grad.data(), na->val->data(), n_cols, k, m,
               true, false);
    }
  });
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  int k = a.rows(), m = a.cols();
  if (b.rows() != k) throw ShapeMismatchError("matmul_tn: inner dims differ");
  int n_cols = b.cols();
  auto n = make_node({m, n_cols});
  gemm_acc(n->val->data(), a.data(), b.data(), m, n_cols, k, true, false);
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  return finish(std::move(n), {a, b}, [self, na, nb, m, n_cols, k]() {
    if (na->requires_grad) {
      na->ensure_grad();
      // dA (k,m) += B * dC^T
      gemm_acc(na->grad.data(), nb->val->data(), self->grad.data(), k, m, n_cols,
               false, true);
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      // dB (k,n) += A * dC
      gemm_acc(nb->grad.data(), na->val->data(), self->grad.data(), k, n_cols, m,
               false, false);
    }
  });
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  int m = a.rows(), k = a.cols();
  if (x.shape().size() != 1 || x.shape()[0] != k)
    throw ShapeMismatchError("matvec: dimension mismatch");
  auto n = make_node({m});
  const double* pa = a.data();
  const double* px = x.data();
  double* out = n->val->data();
  for (int i = 0; i < m; ++i) {
    const double* arow = pa + static_cast<size_t>(i) * k;
    double acc = 0.0;
    for (int p = 0; p < k; ++p) acc += arow[p] * px[p];
    out[i] = acc;
  }
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  TensorNode* nx = x.node();
  return finish(std::move(n), {a, x}, [self, na, nx, m, k]() {
    const double* g = self->grad.data();
    if (na->requires_grad) {
      na->ensure_grad();
      const double* vx = nx->val->data();
      for (int i = 0; i < m; ++i) {
        double gi = g[i];
        if (gi == 0.0) continue;
        double* arow = na->grad.data() + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) arow[p] += gi * vx[p];
      }
    }
    if (nx->requires_grad) {
      nx->ensure_grad();
      const double* va = na->val->data();
      for (int i = 0; i < m; ++i) {
        double gi = g[i];
        if (gi == 0.0) continue;
        const double* arow = va + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) nx->grad[p] += gi * arow[p];
      }
    }
  });
}

Tensor add_rowwise(const Tensor& m, const Tensor& v) {
  int r = m.rows(), c = m.cols();
  if (v.shape().size() != 1 || v.shape()[0] != c)
    throw ShapeMismatchError("add_rowwise: dimension mismatch");
  auto n = make_node({r, c});
  const double* pm = m.data();
  const double* pv = v.data();
  double* out = n->val->data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<size_t>(i) * c + j] = pm[static_cast<size_t>(i) * c + j] + pv[j];
  TensorNode* self = n.get();
  TensorNode* nm = m.node();
  TensorNode* nv = v.node();
  return finish(std::move(n), {m, v}, [self, nm, nv, r, c]() {
    if (nm->requires_grad) {
      nm->ensure_grad();
      int64_t count = self->numel();
      for (int64_t i = 0; i < count; ++i) nm->grad[i] += self->grad[i];
    }
    if (nv->requires_grad) {
      nv->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          nv->grad[j] += self->grad[static_cast<size_t>(i) * c + j];
    }
  });
}

Tensor scale_rows(const Tensor& m, const Tensor& s) {
  int r = m.rows(), c = m.cols();
  if (s.shape().size() != 1 || s.shape()[0] != r)
    throw ShapeMismatchError("scale_rows: dimension mismatch");
  auto n = make_node({r, c});
  const double* pm = m.data();
  const double* ps = s.data();
  double* out = n->val->data();
  for (int i = 0; i < r; ++i) {
    double si = ps[i];
    for (int j = 0; j < c; ++j)
      out[static_cast<size_t>(i) * c + j] = pm[static_cast<size_t>(i) * c + j] * si;
  }
  TensorNode* self = n.get();
  TensorNode* nm = m.node();
  TensorNode* ns = s.node();
  return finish(std::move(n), {m, s}, [self, nm, ns, r, c]() {
    if (nm->requires_grad) {
      nm->ensure_grad();
      const double* vs = ns->val->data();
      for (int i = 0; i < r; ++i) {
        double si = vs[i];
        for (int j = 0; j < c; ++j)
          nm->grad[static_cast<size_t>(i) * c + j] +=
              self->grad[static_cast<size_t>(i) * c + j] * si;
      }
    }
    if (ns->requires_grad) {
      ns->ensure_grad();
      const double* vm = nm->val->data();
      for (int i = 0; i < r; ++i) {
        double acc = 0.0;
        for (int j = 0; j < c; ++j)
          acc += self->grad[static_cast<size_t>(i) * c + j] *
                 vm[static_cast<size_t>(i) * c + j];
        ns->grad[i] += acc;
      }
    }
  });
}

Tensor scale_cols(const Tensor& m, const Tensor& s) {
  int r = m.rows(), c = m.cols();
  if (s.shape().size() != 1 || s.shape()[0] != c)
    throw ShapeMismatchError("scale_cols: dimension mismatch");
  auto n = make_node({r, c});
  const double* pm = m.data();
  const double* ps = s.data();
  double* out = n->val->data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<size_t>(i) * c + j] = pm[static_cast<size_t>(i) * c + j] * ps[j];
  TensorNode* self = n.get();
  TensorNode* nm = m.node();
  TensorNode* ns = s.node();
  return finish(std::move(n), {m, s}, [self, nm, ns, r, c]() {
    if (nm->requires_grad) {
      nm->ensure_grad();
      const double* vs = ns->val->data();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          nm->grad[static_cast<size_t>(i) * c + j] +=
              self->grad[static_cast<size_t>(i) * c + j] * vs[j];
    }
    if (ns->requires_grad) {
      ns->ensure_grad();
      const double* vm = nm->val->data();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          ns->grad[j] += self->grad[static_cast<size_t>(i) * c + j] *
                         vm[static_cast<size_t>(i) * c + j];
    }
  });
}

Tensor add_broadcast_scalar(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) throw ShapeMismatchError("add_broadcast_scalar: scalar required");
  auto n = make_node(a.shape());
  const double* pa = a.data();
  double sv = s.item();
  double* out = n->val->data();
  int64_t count = a.size();
  for (int64_t i = 0; i < count; ++i) out[i] = pa[i] + sv;
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  TensorNode* ns = s.node();
  return finish(std::move(n), {a, s}, [self, na, ns]() {
    int64_t count = self->numel();
    if (na->requires_grad) {
      na->ensure_grad();
      for (int64_t i = 0; i < count; ++i) na->grad[i] += self->grad[i];
    }
    if (ns->requires_grad) {
      ns->ensure_grad();
      double acc = 0.0;
      for (int64_t i = 0; i < count; ++i) acc += self->grad[i];
      ns->grad[0] += acc;
    }
  });
}

// ---------------------------------------------------------------------------
// softmax family

namespace {
// softmax of src[0..len) into dst, numerically stable
void softmax_span(const double* src, double* dst, int len) {
  double mx = src[0];
  for (int i = 1; i < len; ++i) mx = std::max(mx, src[i]);
  double z = 0.0;
  for (int i = 0; i < len; ++i) {
    dst[i] = std::exp(src[i] - mx);
    z += dst[i];
  }
  double inv = 1.0 / z;
  for (int i = 0; i < len; ++i) dst[i] *= inv;
}

double logsumexp_span(const double* src, int len) {
  double mx = src[0];
  for (int i = 1; i < len; ++i) mx = std::max(mx, src[i]);
  if (!std::isfinite(mx)) {
    // all -inf: log of zero mass
    return mx;
  }
  double z = 0.0;
  for (int i = 0; i < len; ++i) z += std::exp(src[i] - mx);
  return mx + std::log(z);
}
}  // namespace

Tensor softmax_vec(const Tensor& a) {
  if (a.shape().size() != 1) throw ShapeMismatchError("softmax_vec: vector required");
  int len = a.shape()[0];
  if (len == 0) throw EmptySequenceError();
  auto n = make_node(a.shape());
  softmax_span(a.data(), n->val->data(), len);
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  return finish(std::move(n), {a}, [self, na, len]() {
    if (!na->requires_grad) return;
    na->ensure_grad();
    const double* y = self->val->data();
    const double* g = self->grad.data();
    double inner = 0.0;
    for (int i = 0; i < len; ++i) inner += g[i] * y[i];
    for (int i = 0; i < len; ++i) na->grad[i] += y[i] * (g[i] - inner);
  });
}

Tensor logsumexp_vec(const Tensor& a) {
  if (a.shape().size() != 1) throw ShapeMismatchError("logsumexp_vec: vector required");
  int len = a.shape()[0];
  if (len == 0) throw EmptySequenceError();
  auto n = make_node({1});
  (*n->val)[0] = logsumexp_span(a.data(), len);
  TensorNode* self = n.get();
  TensorNode* na = a.node();
  return finish(std::move(n), {a}, [self, na, len]() {
    if (!na->requires_grad) return;
    na->ensure_grad();
    double g = self->grad[0];
    double lse = (*self->val)[0];
    const double* v = na->val->data();
    for (int i = 0; i < len; ++i) na->grad[i] += g * std::exp(v[i] - lse);
  });
}

Tensor softmax_rows(const Tensor& m) {
  int r = m.rows(), c = m.cols();
  auto n = make_node({r, c});
  for (int i = 0; i < r; ++i)
    softmax_span(m.data() + static_cast<size_t>(i) * c,
                 n->val->data() + static_cast<size_t>(i) * c, c);
  TensorNode* self = n.get();
  TensorNode* nm = m.node();
  return finish(std::move(n), {m}, [self, nm, r, c]() {
    if (!nm->requires_grad) return;
    nm->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double* y = self->val->data() + static_cast<size_t>(i) * c;
      const double* g = self->grad.data() + static_cast<size_t>(i) * c;
      double* out = nm->grad.data() + static_cast<size_t>(i) * c;
      double inner = 0.0;
      for (int j = 0; j < c; ++j) inner += g[j] * y[j];
      for (int j = 0; j < c; ++j) out[j] += y[j] * (g[j] - inner);
    }
  });
}

Tensor causal_softmax_rows(const Tensor& m) {
  int r = m.rows(), c = m.cols();
  if (c < r) throw ShapeMismatchError("causal_softmax_rows: need cols >= rows");
  auto n = make_node({r, c});
  for (int i = 0; i < r; ++i) {
    int len = i + 1 + (c - r);  // allow rectangular scores with leading context
    softmax_span(m.data() + static_cast<size_t>(i) * c,
                 n->val->data() + static_cast<size_t>(i) * c, len);
    for (int j = len; j < c; ++j) (*n->val)[static_cast<size_t>(i) * c + j] = 0.0;
  }
  TensorNode* self = n.get();
  TensorNode* nm = m.node();
  return finish(std::move(n), {m}, [self, nm, r, c]() {
    if (!nm->requires_grad) return;
    nm->ensure_grad();
    for (int i = 0; i < r; ++i) {
      int len = i + 1 + (c - r);
      const double* y = self->val->data() + static_cast<size_t>(i) * c;
      const double* g = self->grad.data() + static_cast<size_t>(i) * c;
      double* out = nm->grad.data() + static_cast<size_t>(i) * c;
      double inner = 0.0;
      for (int j = 0; j < len; ++j) inner += g[j] * y[j];
      for (int j = 0; j < len; ++j) out[j] += y[j] * (g[j] - inner);
    }
  });
}

Tensor cross_entropy_vec(const Tensor& logits, int target) {
  if (logits.shape().size() != 1)
    throw ShapeMismatchError("cross_entropy_vec: vector required");
  int len = logits.shape()[0];
  if (target < 0 || target >= len)
    throw LabelOutOfRangeError("cross_entropy_vec: target out of range");
  auto n = make_node({1});
  double lse = logsumexp_span(logits.data(), len);
  (*n->val)[0] = lse - logits.at(target);
  TensorNode* self = n.get();
  TensorNode* nl = logits.node();
  return finish(std::move(n), {logits}, [self, nl, len, target]() {
    if (!nl->requires_grad) return;
    nl->ensure_grad();
    double g = self->grad[0];
    const double* v = nl->val->data();
    double lse = logsumexp_span(v, len);
    for (int i = 0; i < len; ++i) {
      double p = std::exp(v[i] - lse);
      nl->grad[i] += g * (p - (i == target ? 1.0 : 0.0));
    }
  });
}

}  // namespace acosqe
