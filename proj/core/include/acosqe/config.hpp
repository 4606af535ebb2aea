#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace acosqe {

enum class TokenizeMode { kPerCharacter, kWhitespace };
enum class CwMode { kLiteral, kFigureConsistent };
enum class HintLevel { kAspect, kAspectOpinion, kAspectOpinionCategory, kFull };

// Default category inventory (travel domain, eight classes).
std::vector<std::string> default_categories();

// Stage-2 extractor settings.
struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 32;
  int epochs = 100;
  int srd = 3;
  uint64_t seed = 42;
  int embedding_dim = 64;
  int hidden_lstm = 64;
  int hidden_gru = 64;
  int k_max = 4;
  int max_len = 64;
  CwMode cw_mode = CwMode::kFigureConsistent;
  bool freeze_embedding = false;
  bool use_hints = true;
  TokenizeMode tokenize_mode = TokenizeMode::kWhitespace;
  std::string separator = " ⊢ ";  // wraps the hint block when augmenting
  std::vector<std::string> categories = default_categories();
  double l2_sp = 1e-5;
  double l2_ac = 1e-5;
  // neural-ODE sizing for the positional-weight evolution
  int ode_state = 8;
  int ode_hidden = 110;
  int ode_steps = 8;
  // early stopping: epochs without dev-F1 improvement before halting (0 = off)
  int patience = 10;
  double dev_fraction = 0.1;
};

// Stage-1 auxiliary language model settings.
struct AuxConfig {
  double learning_rate = 2e-3;
  int batch_size = 16;
  int epochs = 10;
  uint64_t seed = 42;
  int layers = 2;
  int dim = 32;   // even (rotary pairs)
  int ffn = 64;
  int context = 512;  // must cover prompt + hint block
  double beta = 1.0;
  HintLevel hint_level = HintLevel::kFull;
  int max_new_tokens = 160;
  double repetition_penalty = 1.0;
};

// Flat key=value file; '#' starts a comment, blank lines ignored.  Values
// are taken verbatim after the first '='.
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

TrainConfig train_config_from(const std::map<std::string, std::string>& kv);
AuxConfig aux_config_from(const std::map<std::string, std::string>& kv);

const char* to_string(CwMode m);
const char* to_string(TokenizeMode m);
const char* to_string(HintLevel l);

}  // namespace acosqe
