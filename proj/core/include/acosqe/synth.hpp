#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acosqe/corpus.hpp"

namespace acosqe {

// Templated review generator over closed lexicons.  Category follows the
// aspect word; a few opinion words flip polarity depending on what they pair
// with; "not" negates.  Counts per sentence kind are exact, not expected
// values, so a fixed seed reproduces the corpus byte for byte.
struct SynthConfig {
  int train_sentences = 1500;
  int test_sentences = 300;
  uint64_t seed = 42;
  double implicit_fraction = 0.10;   // single-pair sentences with no aspect span
  double two_pair_fraction = 0.22;   // contrastive/additive two-pair sentences
  double three_pair_fraction = 0.06;
  double negation_fraction = 0.25;   // chance an opinion arrives as "not <word>"
};

struct SynthCorpus {
  std::vector<Example> train;
  std::vector<Example> test;
  std::string ledger_json;  // per-split distribution declarations
};

SynthCorpus make_synthetic_corpus(const SynthConfig& cfg);

// train.jsonl, test.jsonl, ledger.json under out_dir (created if missing)
void write_synthetic_corpus(const std::string& out_dir, const SynthConfig& cfg);

}  // namespace acosqe
