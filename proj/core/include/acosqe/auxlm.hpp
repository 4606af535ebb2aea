#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acosqe/compress.hpp"
#include "acosqe/config.hpp"
#include "acosqe/corpus.hpp"
#include "acosqe/param_store.hpp"
#include "acosqe/tensor.hpp"

namespace acosqe {

// Character-level vocabulary over Unicode codepoints with three specials.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;

  static Vocab build(const std::vector<std::string>& texts);
  int size() const { return static_cast<int>(chars_.size()) + 3; }
  int id(uint32_t cp) const;  // kUnk when unseen
  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;  // specials skipped

  // codepoint table packed as doubles for checkpointing
  std::vector<double> pack() const;
  static Vocab unpack(const std::vector<double>& packed);

 private:
  std::vector<uint32_t> chars_;       // id = index + 3
  std::map<uint32_t, int> index_;
};

struct LmConfig {
  int layers = 2;
  int dim = 32;  // even
  int ffn = 64;
  int context = 512;
  double beta = 1.0;
  double rope_base = 10000.0;
};

LmConfig lm_config_from(const AuxConfig& aux);

// Parameter names: auxlm.embed, auxlm.b{i}.attn.{gain,wq,wk,wv,wo},
// auxlm.b{i}.ffn.{gain,w_gate,w_up,w_down}, auxlm.final_gain, auxlm.head.
void init_lm_params(ParamStore& store, const LmConfig& cfg, int vocab_size,
                    Rng& rng);

// matmul weights eligible for one-shot pruning (embedding excluded: lookups
// have no calibration inputs)
std::vector<std::string> lm_prunable_layers(const LmConfig& cfg);

// layer name -> observed input columns, collected during forward passes and
// consumed by the pruning calibration
using ActivationSink = std::map<std::string, std::vector<std::vector<double>>>;

// Pre-norm decoder: per block x += Attn(RMSNorm(x)); x += SwiGLU(RMSNorm(x));
// rotary positions on q/k; causal masking.  Returns (n, vocab) logits.
Tensor lm_forward(const std::vector<int>& ids, ParamLeaves& leaves,
                  const LmConfig& cfg, ActivationSink* capture = nullptr);

// ---------------------------------------------------------------------------
// prompts and hints

std::string format_prompt(const std::string& text);

struct HintTuple {
  std::string aspect;  // "None" marks an implicit aspect
  std::optional<std::string> opinion;
  std::optional<std::string> category;
  std::optional<std::string> polarity;
};

struct Hints {
  std::string text;
  std::optional<std::vector<HintTuple>> parse;  // absent when ill-formed
};

// Grammar, one hint per line: `as=<t> | ot=<t> | ac=<c> | sp=<p>`, later
// fields optional but only as a left-to-right prefix.
std::optional<std::vector<HintTuple>> parse_hints(const std::string& text);
Hints make_hints(const std::string& text);

// Gold hint text for an example (span surfaces recovered from codepoint
// offsets, so original spacing is preserved).
std::string serialize_hints(const Example& ex, HintLevel level);

// text + separator + hints; empty hint text returns text unchanged
std::string augment_input(const std::string& text, const std::string& hint_text,
                          const std::string& separator);

// ---------------------------------------------------------------------------
// reward loss (exposed for testing; reward-model training is out of scope)

double margin_for_preference(int strength);  // 0 / 0.5 / 1.0
double reward_loss(double r_chosen, double r_rejected, double margin);
Tensor reward_loss(const Tensor& r_chosen, const Tensor& r_rejected,
                   double margin);

// ---------------------------------------------------------------------------
// model bundle

struct AuxModel {
  ParamStore store;
  Vocab vocab;
  LmConfig cfg;
};

struct AuxTrainReport {
  std::vector<double> epoch_loss;
};

// Builds the vocabulary from the training lines, initializes parameters from
// cfg.seed and trains next-char prediction on prompt+hints with the loss
// masked to the hint block (the model learns to complete, not to recite).
AuxModel train_aux(const std::vector<Example>& data, const AuxConfig& cfg,
                   AuxTrainReport* report = nullptr);

// Greedy decode from the formatted prompt; emitted-token logits are divided
// (sign-aware) by repetition_penalty; stops at eos, budget, or context edge.
Hints generate_hints(const AuxModel& model, const std::string& text,
                     int max_new_tokens, double repetition_penalty);

// mean masked cross entropy of gold hint completions (held-out corpus)
double aux_eval_ce(const AuxModel& model, const std::vector<Example>& data,
                   HintLevel level);

// fraction of examples whose generated hints parse under the grammar
double aux_parse_rate(const AuxModel& model, const std::vector<Example>& data,
                      int max_new_tokens, double repetition_penalty);

// One-shot pruning of every prunable LM layer at the given sparsity, using
// calibration activations captured from the given examples' training lines.
std::map<std::string, SparseMask> prune_aux(AuxModel& model,
                                            const std::vector<Example>& calib,
                                            HintLevel level, double sparsity);

void save_aux_checkpoint(const std::string& path, const AuxModel& model);
AuxModel load_aux_checkpoint(const std::string& path);

}  // namespace acosqe
