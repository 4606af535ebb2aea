#pragma once

#include <string>
#include <vector>

#include "acosqe/corpus.hpp"

namespace acosqe {

struct MatchCounts {
  long n_tp = 0;
  long n_pred = 0;
  long n_gold = 0;
};

// which quadruple fields take part in the exact-match comparison
enum class SubtaskKind { kAcos, kCs, kTasd, kAste };

const char* to_string(SubtaskKind k);
SubtaskKind subtask_from_string(const std::string& s);  // throws DataError

// Duplicate projections within one side collapse before counting.
MatchCounts exact_match_counts(const std::vector<Quadruple>& pred,
                               const std::vector<Quadruple>& gold,
                               SubtaskKind kind);

// micro aggregation: per-sentence counts summed
MatchCounts corpus_match_counts(const std::vector<std::vector<Quadruple>>& pred,
                                const std::vector<std::vector<Quadruple>>& gold,
                                SubtaskKind kind);

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Prf1 prf1(const MatchCounts& counts);  // 0/0 reads as 0 throughout

// header `subtask,precision,recall,f1`; one row per subtask, percentages with
// two decimals
std::string metrics_report_csv(const std::vector<std::vector<Quadruple>>& pred,
                               const std::vector<std::vector<Quadruple>>& gold);

}  // namespace acosqe
