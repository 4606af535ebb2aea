#include "acosqe/config.hpp"

#include <fstream>
#include <sstream>

#include "acosqe/errors.hpp"

namespace acosqe {

std::vector<std::string> default_categories() {
  return {"scenery", "service", "management", "environment",
          "price",   "attraction", "facility", "feature"};
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    size_t eq = line.find('=', first);
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(first, eq - first);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    if (key.empty())
      throw DataError("config line " + std::to_string(lineno) + ": empty key");
    // value is verbatim (may legitimately start/end with spaces, e.g. separators)
    kv[key] = line.substr(eq + 1);
  }
  return kv;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

namespace {

double as_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing junk");
    return d;
  } catch (const std::exception&) {
    throw DataError("config key '" + key + "': bad number '" + v + "'");
  }
}

int as_int(const std::string& v, const std::string& key) {
  double d = as_double(v, key);
  return static_cast<int>(d);
}

uint64_t as_u64(const std::string& v, const std::string& key) {
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw DataError("config key '" + key + "': bad integer '" + v + "'");
  }
}

bool as_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw DataError("config key '" + key + "': bad boolean '" + v + "'");
}

std::vector<std::string> split_csv(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

TrainConfig train_config_from(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "learning_rate") c.learning_rate = as_double(v, k);
    else if (k == "batch_size") c.batch_size = as_int(v, k);
    else if (k == "epochs") c.epochs = as_int(v, k);
    else if (k == "srd") c.srd = as_int(v, k);
    else if (k == "seed") c.seed = as_u64(v, k);
    else if (k == "embedding_dim") c.embedding_dim = as_int(v, k);
    else if (k == "hidden_lstm") c.hidden_lstm = as_int(v, k);
    else if (k == "hidden_gru") c.hidden_gru = as_int(v, k);
    else if (k == "k_max") c.k_max = as_int(v, k);
    else if (k == "max_len") c.max_len = as_int(v, k);
    else if (k == "cw_mode") {
      if (v == "literal") c.cw_mode = CwMode::kLiteral;
      else if (v == "figure_consistent") c.cw_mode = CwMode::kFigureConsistent;
      else throw DataError("config key 'cw_mode': unknown mode '" + v + "'");
    } else if (k == "freeze_embedding") c.freeze_embedding = as_bool(v, k);
    else if (k == "use_hints") c.use_hints = as_bool(v, k);
    else if (k == "tokenize_mode") {
      if (v == "whitespace") c.tokenize_mode = TokenizeMode::kWhitespace;
      else if (v == "per_character") c.tokenize_mode = TokenizeMode::kPerCharacter;
      else throw DataError("config key 'tokenize_mode': unknown mode '" + v + "'");
    } else if (k == "separator") c.separator = v;
    else if (k == "categories") c.categories = split_csv(v);
    else if (k == "l2_sp") c.l2_sp = as_double(v, k);
    else if (k == "l2_ac") c.l2_ac = as_double(v, k);
    else if (k == "ode_state") c.ode_state = as_int(v, k);
    else if (k == "ode_hidden") c.ode_hidden = as_int(v, k);
    else if (k == "ode_steps") c.ode_steps = as_int(v, k);
    else if (k == "patience") c.patience = as_int(v, k);
    else if (k == "dev_fraction") c.dev_fraction = as_double(v, k);
    // aux_* keys are consumed by aux_config_from; anything else is a typo
    else if (k.rfind("aux_", 0) != 0 && k != "hint_level" && k != "max_new_tokens" &&
             k != "repetition_penalty")
      throw DataError("unknown config key '" + k + "'");
  }
  return c;
}

AuxConfig aux_config_from(const std::map<std::string, std::string>& kv) {
  AuxConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "aux_learning_rate") c.learning_rate = as_double(v, k);
    else if (k == "aux_batch_size") c.batch_size = as_int(v, k);
    else if (k == "aux_epochs") c.epochs = as_int(v, k);
    else if (k == "aux_seed" || k == "seed") c.seed = as_u64(v, k);
    else if (k == "aux_layers") c.layers = as_int(v, k);
    else if (k == "aux_dim") c.dim = as_int(v, k);
    else if (k == "aux_ffn") c.ffn = as_int(v, k);
    else if (k == "aux_context") c.context = as_int(v, k);
    else if (k == "aux_beta") c.beta = as_double(v, k);
    else if (k == "hint_level") {
      if (v == "as") c.hint_level = HintLevel::kAspect;
      else if (v == "as_ot") c.hint_level = HintLevel::kAspectOpinion;
      else if (v == "as_ot_ac") c.hint_level = HintLevel::kAspectOpinionCategory;
      else if (v == "as_ot_ac_sp" || v == "full") c.hint_level = HintLevel::kFull;
      else throw DataError("config key 'hint_level': unknown level '" + v + "'");
    } else if (k == "max_new_tokens") c.max_new_tokens = as_int(v, k);
    else if (k == "repetition_penalty") c.repetition_penalty = as_double(v, k);
  }
  return c;
}

const char* to_string(CwMode m) {
  return m == CwMode::kLiteral ? "literal" : "figure_consistent";
}
const char* to_string(TokenizeMode m) {
  return m == TokenizeMode::kWhitespace ? "whitespace" : "per_character";
}
const char* to_string(HintLevel l) {
  switch (l) {
    case HintLevel::kAspect: return "as";
    case HintLevel::kAspectOpinion: return "as_ot";
    case HintLevel::kAspectOpinionCategory: return "as_ot_ac";
    default: return "as_ot_ac_sp";
  }
}

}  // namespace acosqe
