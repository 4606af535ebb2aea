#pragma once

#include <vector>

#include "acosqe/tensor.hpp"

namespace acosqe {

// Linear-chain CRF over L labels with boundary transitions. The transition
// matrix has shape (L+2, L+2); row/col L is the START state and L+1 is END.
// Emissions are an n x L matrix of per-position label scores.

inline int crf_start_index(int labels) { return labels; }
inline int crf_end_index(int labels) { return labels + 1; }

// score of one tag path: sum of emissions plus transitions including
// START->y_0 and y_{n-1}->END
Tensor crf_score(const Tensor& emissions, const Tensor& transitions,
                 const std::vector<int>& tags);

// log of the partition sum over all L^n paths, computed by the forward
// recursion; differentiable wrt both inputs
Tensor crf_log_partition(const Tensor& emissions, const Tensor& transitions);

// negative log likelihood of a tag path: log_partition - score
Tensor crf_nll(const Tensor& emissions, const Tensor& transitions,
               const std::vector<int>& tags);

// most probable path; ties broken toward the lowest label index
std::vector<int> viterbi_decode(const Tensor& emissions, const Tensor& transitions);

// additive mask for BIO structure: 0 where a transition is legal, -1e4 where
// it is not (I-X-k may only follow B-X-k or I-X-k). Shape (L+2, L+2) for the
// pair-tag scheme with k_max suffixes.
Tensor bio_constraint_matrix(int k_max);

// reference implementations that enumerate all L^n paths; they throw
// TooLargeError when L^n exceeds 100000
double brute_force_log_partition(const Tensor& emissions, const Tensor& transitions);
std::vector<int> brute_force_best_path(const Tensor& emissions,
                                       const Tensor& transitions);

}  // namespace acosqe
