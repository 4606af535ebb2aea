#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "acosqe/errors.hpp"

namespace acosqe {

struct TensorNode;

// Dense f64 tensor participating in a reverse-mode tape.  Row major, rank 1
// or 2 throughout the project.  Copying a Tensor copies a handle, not data.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double v, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar(double v);
  // Leaf whose storage is shared with the caller (used for model parameters:
  // many tapes can reference one value buffer, each with its own grad).
  static Tensor leaf_shared(std::vector<int> shape,
                            std::shared_ptr<std::vector<double>> data);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  int64_t size() const;
  int rows() const;  // rank-2 only
  int cols() const;
  double item() const;  // size-1 only

  const double* data() const;
  double* mutable_data();
  double at(int i) const;
  double at(int r, int c) const;
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  // Valid after backward() has run over a graph containing this node.
  const std::vector<double>& grad() const;

  // Reverse-mode sweep from this (scalar) node.  Single use per graph.
  void backward();

  TensorNode* node() const { return node_.get(); }

 private:
  std::shared_ptr<TensorNode> node_;
};

struct TensorNode {
  std::vector<int> shape;
  std::shared_ptr<std::vector<double>> val;
  std::vector<double> grad;
  std::vector<Tensor> parents;
  std::function<void()> backprop;
  bool requires_grad = false;

  int64_t numel() const { return static_cast<int64_t>(val->size()); }
  void ensure_grad() {
    if (grad.size() != val->size()) grad.assign(val->size(), 0.0);
  }
};

// ---------------------------------------------------------------------------
// elementwise / reductions
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor sum(const Tensor& a);          // -> scalar
Tensor mean(const Tensor& a);         // -> scalar
Tensor sum_squares(const Tensor& a);  // -> scalar
Tensor dot(const Tensor& a, const Tensor& b);  // vectors -> scalar

// shaping
Tensor reshape(const Tensor& a, std::vector<int> shape);  // zero-copy view
Tensor concat_vec(const Tensor& a, const Tensor& b);
Tensor slice_vec(const Tensor& a, int offset, int len);
Tensor row(const Tensor& m, int i);              // matrix row as vector
Tensor hcat(const Tensor& a, const Tensor& b);   // (n,p)+(n,q) -> (n,p+q)
Tensor stack_rows(const std::vector<Tensor>& rows);  // k vectors d -> (k,d)

// linear algebra; matmul variants avoid materialised transposes
Tensor matmul(const Tensor& a, const Tensor& b);     // (m,k)x(k,n)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // A * B^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // A^T * B
Tensor matvec(const Tensor& a, const Tensor& x);     // (m,n)x(n) -> (m)
Tensor add_rowwise(const Tensor& m, const Tensor& v);      // m[i,:] + v
Tensor scale_rows(const Tensor& m, const Tensor& s);       // m[i,:] * s[i]
Tensor scale_cols(const Tensor& m, const Tensor& s);       // m[:,j] * s[j]
Tensor add_broadcast_scalar(const Tensor& a, const Tensor& s);

// softmax family
Tensor softmax_vec(const Tensor& a);
Tensor logsumexp_vec(const Tensor& a);  // -> scalar
Tensor softmax_rows(const Tensor& m);
Tensor causal_softmax_rows(const Tensor& m);  // entries j>i masked out
Tensor cross_entropy_vec(const Tensor& logits, int target);  // -> scalar
// Mean next-token cross entropy over rows with mask[i] != 0.
Tensor softmax_xent_rows(const Tensor& logits, const std::vector<int>& targets,
                         const std::vector<uint8_t>& mask);

// lookup
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids);

// normalisation / activations with bespoke backward
Tensor rms_norm(const Tensor& a, const Tensor& gain, double eps = 1e-8);
Tensor rms_norm_rows(const Tensor& m, const Tensor& gain, double eps = 1e-8);
// u * sigmoid(beta*u) * v, elementwise (the gate inside a SwiGLU block)
Tensor swish_gate(const Tensor& u, const Tensor& v, double beta);
// full position-wise block: (Swish_beta(x W) . (x V)) W2 for row-vector x
Tensor swiglu_ffn(const Tensor& x, const Tensor& w, const Tensor& v,
                  const Tensor& w2, double beta);

// rotary position embedding
Tensor rope_rotate(const Tensor& v, const std::vector<double>& angles);
Tensor rope_apply(const Tensor& v, int m, double theta_base);
// one sequence: row i rotated for position start_pos + i
Tensor rope_rows(const Tensor& m, double theta_base, int start_pos = 0);

// recurrent cells; state vectors are [h;c] for LSTM, h for GRU
Tensor lstm_cell(const Tensor& x, const Tensor& hc, const Tensor& wx,
                 const Tensor& wh, const Tensor& b);
Tensor gru_cell(const Tensor& x, const Tensor& h, const Tensor& wx,
                const Tensor& wh, const Tensor& b);

// plumbing shared by kernels and bespoke backward passes
void gemm_acc(double* c, const double* a, const double* b, int m, int n, int k,
              bool ta, bool tb);
void check_all_finite(const Tensor& t, const char* what);

}  // namespace acosqe
