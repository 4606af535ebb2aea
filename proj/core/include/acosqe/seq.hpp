#pragma once

#include "acosqe/tensor.hpp"

namespace acosqe {

// One direction of a recurrent encoder.  For the LSTM flavour wx is (4h, d),
// wh is (4h, h) and b is (4h); the GRU flavour uses 3h.
struct RnnDirParams {
  Tensor wx, wh, b;
};

// Bidirectional encoders over an n x d input matrix; output is n x 2h with
// the forward and backward hidden states concatenated per position.
Tensor bilstm_encode(const Tensor& x, const RnnDirParams& fw, const RnnDirParams& bw);
Tensor bigru_encode(const Tensor& x, const RnnDirParams& fw, const RnnDirParams& bw);

// Single-head scaled dot-product self attention with output projection.
// wq, wk, wv are (d, dk); wo is (dk, d).  No causal mask (the tagger sees
// both directions).
struct AttentionParams {
  Tensor wq, wk, wv, wo;
};
Tensor self_attention(const Tensor& x, const AttentionParams& p);

// Sentence-level summary vector: the first position's features.
Tensor head_pool(const Tensor& h);

}  // namespace acosqe
