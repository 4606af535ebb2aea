#include "acosqe/seq.hpp"

#include <cmath>

#include "acosqe/errors.hpp"

namespace acosqe {

namespace {

void validate_rnn(const Tensor& x, const RnnDirParams& p, int gates,
                  const char* what) {
  if (x.shape().size() != 2) throw ShapeMismatchError(std::string(what) + ": input must be n x d");
  if (x.rows() < 1) throw EmptySequenceError(std::string(what) + ": empty sequence");
  int d = x.cols();
  if (p.wx.shape().size() != 2 || p.wx.cols() != d || p.wx.rows() % gates != 0)
    throw ShapeMismatchError(std::string(what) + ": wx shape");
  int h = p.wx.rows() / gates;
  if (p.wh.shape().size() != 2 || p.wh.rows() != gates * h || p.wh.cols() != h)
    throw ShapeMismatchError(std::string(what) + ": wh shape");
  if (p.b.shape().size() != 1 || static_cast<int>(p.b.size()) != gates * h)
    throw ShapeMismatchError(std::string(what) + ": bias shape");
}

std::vector<Tensor> lstm_run(const Tensor& x, const RnnDirParams& p, bool reverse) {
  int n = x.rows();
  int h = p.wx.rows() / 4;
  Tensor hc = Tensor::zeros({2 * h});
  std::vector<Tensor> states(n);
  for (int step = 0; step < n; ++step) {
    int t = reverse ? n - 1 - step : step;
    hc = lstm_cell(row(x, t), hc, p.wx, p.wh, p.b);
    states[t] = slice_vec(hc, 0, h);
  }
  return states;
}

std::vector<Tensor> gru_run(const Tensor& x, const RnnDirParams& p, bool reverse) {
  int n = x.rows();
  Tensor h = Tensor::zeros({p.wx.rows() / 3});
  std::vector<Tensor> states(n);
  for (int step = 0; step < n; ++step) {
    int t = reverse ? n - 1 - step : step;
    h = gru_cell(row(x, t), h, p.wx, p.wh, p.b);
    states[t] = h;
  }
  return states;
}

}  // namespace

Tensor bilstm_encode(const Tensor& x, const RnnDirParams& fw, const RnnDirParams& bw) {
  validate_rnn(x, fw, 4, "bilstm");
  validate_rnn(x, bw, 4, "bilstm");
  return hcat(stack_rows(lstm_run(x, fw, false)), stack_rows(lstm_run(x, bw, true)));
}

Tensor bigru_encode(const Tensor& x, const RnnDirParams& fw, const RnnDirParams& bw) {
  validate_rnn(x, fw, 3, "bigru");
  validate_rnn(x, bw, 3, "bigru");
  return hcat(stack_rows(gru_run(x, fw, false)), stack_rows(gru_run(x, bw, true)));
}

Tensor self_attention(const Tensor& x, const AttentionParams& p) {
  if (x.shape().size() != 2) throw ShapeMismatchError("self_attention: input must be n x d");
  int d = x.cols();
  if (p.wq.shape().size() != 2 || p.wq.rows() != d ||
      p.wk.shape() != p.wq.shape() || p.wv.shape() != p.wq.shape())
    throw ShapeMismatchError("self_attention: projection shapes");
  int dk = p.wq.cols();
  if (p.wo.shape().size() != 2 || p.wo.rows() != dk || p.wo.cols() != d)
    throw ShapeMismatchError("self_attention: output projection shape");
  Tensor q = matmul(x, p.wq);
  Tensor k = matmul(x, p.wk);
  Tensor v = matmul(x, p.wv);
  Tensor scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dk)));
  Tensor attn = softmax_rows(scores);
  return matmul(matmul(attn, v), p.wo);
}

Tensor head_pool(const Tensor& h) {
  if (h.shape().size() != 2 || h.rows() < 1)
    throw ShapeMismatchError("head_pool: input must be a non-empty matrix");
  return row(h, 0);
}

}  // namespace acosqe
