#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acosqe/auxlm.hpp"
#include "acosqe/config.hpp"
#include "acosqe/corpus.hpp"
#include "acosqe/param_store.hpp"
#include "acosqe/tensor.hpp"

namespace acosqe {

// word-level lookup for the extraction stage; id 0 is the unknown word
class WordVocab {
 public:
  static constexpr int kUnk = 0;

  static WordVocab build(const std::vector<std::vector<std::string>>& token_lists);
  int size() const { return static_cast<int>(words_.size()) + 1; }
  int id(const std::string& w) const;

  // '\n'-joined word list as codepoint doubles, for checkpointing
  std::vector<double> pack() const;
  static WordVocab unpack(const std::vector<double>& packed);

 private:
  std::vector<std::string> words_;  // sorted; id = index + 1
  std::map<std::string, int> index_;
};

struct AcosModel {
  ParamStore store;
  WordVocab vocab;
  TrainConfig cfg;  // architecture and inference knobs travel with the params
};

struct AoeOutput {
  Tensor emissions;                     // n_aug x |tags|
  std::vector<AspectOpinionPair> pairs;  // spans inside the original sentence
};

struct AcsOutput {
  Tensor category_dist;  // over cfg.categories
  Tensor polarity_dist;  // positive / negative / neutral
};

// fresh parameter store for the given vocabulary and sizes
void init_acos_params(ParamStore& store, const TrainConfig& cfg, int vocab_size,
                      Rng& rng);

// tagging stage: embedding -> BiLSTM -> linear emissions -> constrained CRF
// decode.  Hints (possibly empty) are appended to the sentence before
// encoding; decoded spans falling outside the original sentence are dropped.
AoeOutput aoe_forward(const Sentence& sentence, const std::string& hints,
                      ParamLeaves& leaves, const AcosModel& model);

// classification stage for one (possibly implicit) aspect span
AcsOutput acs_forward(const Sentence& sentence,
                      const std::optional<Span>& aspect,
                      const std::string& hints, ParamLeaves& leaves,
                      const AcosModel& model);

// mean CRF negative log likelihood + mean gold-pair cross entropies + the
// l2-weighted head penalties, one differentiable scalar
Tensor joint_loss(const std::vector<Example>& batch,
                  const std::vector<std::string>& hints, ParamLeaves& leaves,
                  const AcosModel& model);

// full two-stage extraction; aux may be null (no hints are generated then)
std::vector<Quadruple> extract_quadruples(const std::string& text,
                                          const AcosModel& model,
                                          const AuxModel* aux = nullptr,
                                          int max_new_tokens = 160,
                                          double repetition_penalty = 1.0);

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> dev_f1;
  int best_epoch = -1;
};

// Adam training with gold-pair teacher forcing (spans and hint text both come
// from the gold annotation); best dev-F1 parameters are restored at the end.
AcosModel train(const std::vector<Example>& corpus, const TrainConfig& cfg,
                TrainReport* report = nullptr);

// corpus-level pipelined evaluation: extract from each sentence, compare
// against gold
std::vector<std::vector<Quadruple>> predict_corpus(
    const std::vector<Example>& data, const AcosModel& model,
    const AuxModel* aux, int max_new_tokens = 160,
    double repetition_penalty = 1.0);

void save_acos_checkpoint(const std::string& path, const AcosModel& model);
AcosModel load_acos_checkpoint(const std::string& path);

}  // namespace acosqe
