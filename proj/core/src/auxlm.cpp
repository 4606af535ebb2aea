#include "acosqe/auxlm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>
#include <sstream>

#include "acosqe/errors.hpp"
#include "acosqe/optim.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace acosqe {

// ---------------------------------------------------------------------------
// vocabulary

Vocab Vocab::build(const std::vector<std::string>& texts) {
  std::set<uint32_t> seen;
  for (const auto& t : texts)
    for (uint32_t cp : utf8_codepoints(t)) seen.insert(cp);
  Vocab v;
  v.chars_.assign(seen.begin(), seen.end());  // sorted: deterministic ids
  for (size_t i = 0; i < v.chars_.size(); ++i)
    v.index_[v.chars_[i]] = static_cast<int>(i) + 3;
  return v;
}

int Vocab::id(uint32_t cp) const {
  auto it = index_.find(cp);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> out;
  for (uint32_t cp : utf8_codepoints(text)) out.push_back(id(cp));
  return out;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::vector<uint32_t> cps;
  for (int i : ids) {
    if (i < 3) continue;
    if (i - 3 >= static_cast<int>(chars_.size()))
      throw LabelOutOfRangeError("Vocab::decode: id out of range");
    cps.push_back(chars_[i - 3]);
  }
  return codepoints_to_utf8(cps);
}

std::vector<double> Vocab::pack() const {
  std::vector<double> out;
  out.reserve(chars_.size());
  for (uint32_t cp : chars_) out.push_back(static_cast<double>(cp));
  return out;
}

Vocab Vocab::unpack(const std::vector<double>& packed) {
  Vocab v;
  for (double d : packed) {
    auto cp = static_cast<uint32_t>(d);
    v.chars_.push_back(cp);
  }
  for (size_t i = 0; i < v.chars_.size(); ++i)
    v.index_[v.chars_[i]] = static_cast<int>(i) + 3;
  return v;
}

// ---------------------------------------------------------------------------
// parameters

LmConfig lm_config_from(const AuxConfig& aux) {
  LmConfig cfg;
  cfg.layers = aux.layers;
  cfg.dim = aux.dim;
  cfg.ffn = aux.ffn;
  cfg.context = aux.context;
  cfg.beta = aux.beta;
  return cfg;
}

namespace {
std::string block_prefix(int layer) { return "auxlm.b" + std::to_string(layer) + "."; }
}  // namespace

void init_lm_params(ParamStore& store, const LmConfig& cfg, int vocab_size,
                    Rng& rng) {
  if (cfg.dim % 2 != 0)
    throw OddDimensionError("init_lm_params: model dim must be even");
  if (cfg.layers < 1 || cfg.dim < 2 || cfg.ffn < 1 || cfg.context < 1)
    throw NumericError("init_lm_params: dims must be positive");
  store.create_normal("auxlm.embed", {vocab_size, cfg.dim}, rng, 0.02);
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = block_prefix(l);
    store.put(p + "attn.gain", {cfg.dim}, std::vector<double>(cfg.dim, 1.0));
    store.create_fan_in(p + "attn.wq", {cfg.dim, cfg.dim}, rng);
    store.create_fan_in(p + "attn.wk", {cfg.dim, cfg.dim}, rng);
    store.create_fan_in(p + "attn.wv", {cfg.dim, cfg.dim}, rng);
    store.create_fan_in(p + "attn.wo", {cfg.dim, cfg.dim}, rng);
    store.put(p + "ffn.gain", {cfg.dim}, std::vector<double>(cfg.dim, 1.0));
    store.create_fan_in(p + "ffn.w_gate", {cfg.ffn, cfg.dim}, rng);
    store.create_fan_in(p + "ffn.w_up", {cfg.ffn, cfg.dim}, rng);
    store.create_fan_in(p + "ffn.w_down", {cfg.dim, cfg.ffn}, rng);
  }
  store.put("auxlm.final_gain", {cfg.dim}, std::vector<double>(cfg.dim, 1.0));
  store.create_fan_in("auxlm.head", {vocab_size, cfg.dim}, rng);
}

std::vector<std::string> lm_prunable_layers(const LmConfig& cfg) {
  std::vector<std::string> out;
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = block_prefix(l);
    for (const char* f : {"attn.wq", "attn.wk", "attn.wv", "attn.wo",
                          "ffn.w_gate", "ffn.w_up", "ffn.w_down"})
      out.push_back(p + f);
  }
  out.push_back("auxlm.head");
  return out;
}

// ---------------------------------------------------------------------------
// forward

namespace {

void capture_rows(ActivationSink* sink, const std::string& name, const Tensor& m) {
  if (!sink) return;
  int r = m.rows(), c = m.cols();
  auto& cols = (*sink)[name];
  const double* p = m.data();
  for (int i = 0; i < r; ++i)
    cols.emplace_back(p + static_cast<size_t>(i) * c,
                      p + static_cast<size_t>(i + 1) * c);
}

}  // namespace

Tensor lm_forward(const std::vector<int>& ids, ParamLeaves& leaves,
                  const LmConfig& cfg, ActivationSink* capture) {
  if (ids.empty()) throw EmptySequenceError("lm_forward: empty input");
  if (static_cast<int>(ids.size()) > cfg.context)
    throw ContextOverflowError("lm_forward: " + std::to_string(ids.size()) +
                               " tokens exceed context " +
                               std::to_string(cfg.context));
  double att_scale = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  Tensor x = embedding_rows(leaves.get("auxlm.embed"), ids);
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = block_prefix(l);
    Tensor normed = rms_norm_rows(x, leaves.get(p + "attn.gain"));
    capture_rows(capture, p + "attn.wq", normed);
    capture_rows(capture, p + "attn.wk", normed);
    capture_rows(capture, p + "attn.wv", normed);
    Tensor q = rope_rows(matmul_nt(normed, leaves.get(p + "attn.wq")), cfg.rope_base);
    Tensor k = rope_rows(matmul_nt(normed, leaves.get(p + "attn.wk")), cfg.rope_base);
    Tensor v = matmul_nt(normed, leaves.get(p + "attn.wv"));
    Tensor attn = causal_softmax_rows(scale(matmul_nt(q, k), att_scale));
    Tensor ctx = matmul(attn, v);
    capture_rows(capture, p + "attn.wo", ctx);
    x = add(x, matmul_nt(ctx, leaves.get(p + "attn.wo")));

    Tensor normed2 = rms_norm_rows(x, leaves.get(p + "ffn.gain"));
    capture_rows(capture, p + "ffn.w_gate", normed2);
    capture_rows(capture, p + "ffn.w_up", normed2);
    Tensor gate = matmul_nt(normed2, leaves.get(p + "ffn.w_gate"));
    Tensor up = matmul_nt(normed2, leaves.get(p + "ffn.w_up"));
    Tensor act = swish_gate(gate, up, cfg.beta);
    capture_rows(capture, p + "ffn.w_down", act);
    x = add(x, matmul_nt(act, leaves.get(p + "ffn.w_down")));
  }
  Tensor fin = rms_norm_rows(x, leaves.get("auxlm.final_gain"));
  capture_rows(capture, "auxlm.head", fin);
  return matmul_nt(fin, leaves.get("auxlm.head"));
}

// ---------------------------------------------------------------------------
// prompts and hints

std::string format_prompt(const std::string& text) {
  if (text.empty()) throw EmptyTextError();
  return "Instruction: {extract aspects and sentiment terms from the following "
         "text and classify sentiment polarity and evaluation category}, "
         "input:{" +
         text + "}, output:";
}

namespace {

const char* kHintKeys[4] = {"as", "ot", "ac", "sp"};

std::string span_surface(const Sentence& s, const Span& span) {
  std::vector<uint32_t> cps = utf8_codepoints(s.text);
  int a = s.token_offsets[span.start].first;
  int b = s.token_offsets[span.end].second;
  return codepoints_to_utf8(
      std::vector<uint32_t>(cps.begin() + a, cps.begin() + b));
}

int level_fields(HintLevel level) {
  switch (level) {
    case HintLevel::kAspect: return 1;
    case HintLevel::kAspectOpinion: return 2;
    case HintLevel::kAspectOpinionCategory: return 3;
    default: return 4;
  }
}

}  // namespace

std::optional<std::vector<HintTuple>> parse_hints(const std::string& text) {
  std::vector<HintTuple> out;
  if (text.empty()) return out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) return std::nullopt;
    // split on " | "
    std::vector<std::string> parts;
    size_t pos = 0;
    while (true) {
      size_t bar = line.find(" | ", pos);
      if (bar == std::string::npos) {
        parts.push_back(line.substr(pos));
        break;
      }
      parts.push_back(line.substr(pos, bar - pos));
      pos = bar + 3;
    }
    if (parts.empty() || parts.size() > 4) return std::nullopt;
    HintTuple ht;
    for (size_t i = 0; i < parts.size(); ++i) {
      std::string want = std::string(kHintKeys[i]) + "=";
      if (parts[i].rfind(want, 0) != 0) return std::nullopt;
      std::string value = parts[i].substr(want.size());
      if (value.empty()) return std::nullopt;
      switch (i) {
        case 0: ht.aspect = value; break;
        case 1: ht.opinion = value; break;
        case 2: ht.category = value; break;
        default: ht.polarity = value; break;
      }
    }
    out.push_back(std::move(ht));
  }
  return out;
}

Hints make_hints(const std::string& text) {
  Hints h;
  h.text = text;
  h.parse = parse_hints(text);
  return h;
}

std::string serialize_hints(const Example& ex, HintLevel level) {
  int fields = level_fields(level);
  std::string out;
  for (size_t i = 0; i < ex.second.size(); ++i) {
    const Quadruple& q = ex.second[i];
    if (i) out += "\n";
    out += "as=";
    out += q.aspect ? span_surface(ex.first, *q.aspect) : "None";
    if (fields >= 2) out += " | ot=" + span_surface(ex.first, q.opinion);
    if (fields >= 3) out += " | ac=" + q.category;
    if (fields >= 4) out += std::string(" | sp=") + to_string(q.polarity);
  }
  return out;
}

std::string augment_input(const std::string& text, const std::string& hint_text,
                          const std::string& separator) {
  if (hint_text.empty()) return text;
  return text + separator + hint_text;
}

// ---------------------------------------------------------------------------
// reward loss

double margin_for_preference(int strength) {
  if (strength <= 0) return 0.0;
  return strength == 1 ? 0.5 : 1.0;
}

double reward_loss(double r_chosen, double r_rejected, double margin) {
  double x = r_chosen - r_rejected - margin;
  // -log sigmoid(x) = softplus(-x), computed without overflow
  if (x > 0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

Tensor reward_loss(const Tensor& r_chosen, const Tensor& r_rejected,
                   double margin) {
  Tensor x = add_const(sub(r_chosen, r_rejected), -margin);
  return logsumexp_vec(concat_vec(Tensor::scalar(0.0), scale(x, -1.0)));
}

// ---------------------------------------------------------------------------
// training

namespace {

struct PreparedLine {
  std::vector<int> input;      // ids[0 .. n-2]
  std::vector<int> targets;    // ids[1 .. n-1]
  std::vector<uint8_t> mask;   // 1 on hint-block targets (incl. eos)
};

PreparedLine prepare_line(const Vocab& vocab, const std::string& prompt,
                          const std::string& hints, int context) {
  std::vector<int> ids = vocab.encode(prompt);
  int prompt_len = static_cast<int>(ids.size());
  std::vector<int> tail = vocab.encode(hints);
  ids.insert(ids.end(), tail.begin(), tail.end());
  ids.push_back(Vocab::kEos);
  int n = static_cast<int>(ids.size());
  if (n > context)
    throw ContextOverflowError("training line of " + std::to_string(n) +
                               " tokens exceeds context " +
                               std::to_string(context));
  PreparedLine out;
  out.input.assign(ids.begin(), ids.end() - 1);
  out.targets.assign(ids.begin() + 1, ids.end());
  out.mask.assign(out.targets.size(), 0);
  for (size_t i = 0; i < out.mask.size(); ++i)
    if (static_cast<int>(i) + 1 >= prompt_len) out.mask[i] = 1;
  return out;
}

double line_loss_value(const AuxModel& model, const PreparedLine& line) {
  ParamLeaves leaves(model.store);
  Tensor logits = lm_forward(line.input, leaves, model.cfg);
  return softmax_xent_rows(logits, line.targets, line.mask).item();
}

}  // namespace

AuxModel train_aux(const std::vector<Example>& data, const AuxConfig& cfg,
                   AuxTrainReport* report) {
  if (data.empty()) throw EmptyCorpusError("train_aux: empty corpus");
  AuxModel model;
  model.cfg = lm_config_from(cfg);

  std::vector<std::string> prompts(data.size()), hints(data.size());
  std::vector<std::string> lines(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    prompts[i] = format_prompt(data[i].first.text);
    hints[i] = serialize_hints(data[i], cfg.hint_level);
    lines[i] = prompts[i] + hints[i];
  }
  model.vocab = Vocab::build(lines);

  Rng rng(cfg.seed);
  init_lm_params(model.store, model.cfg, model.vocab.size(), rng);

  std::vector<PreparedLine> prep(data.size());
  for (size_t i = 0; i < data.size(); ++i)
    prep[i] = prepare_line(model.vocab, prompts[i], hints[i], model.cfg.context);

  Adam opt(cfg.learning_rate);
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // deterministic Fisher-Yates on our own stream
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);
    double epoch_loss = 0.0;
    for (size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      size_t b1 = std::min(b0 + cfg.batch_size, order.size());
      int bsz = static_cast<int>(b1 - b0);
      std::vector<ParamLeaves> tapes;
      tapes.reserve(bsz);
      for (int i = 0; i < bsz; ++i) tapes.emplace_back(model.store);
      std::vector<double> item_loss(bsz, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
      for (int i = 0; i < bsz; ++i) {
        const PreparedLine& line = prep[order[b0 + i]];
        Tensor logits = lm_forward(line.input, tapes[i], model.cfg);
        Tensor loss = softmax_xent_rows(logits, line.targets, line.mask);
        item_loss[i] = loss.item();
        scale(loss, 1.0 / bsz).backward();
      }
      // merge in item order: gradients are bitwise reproducible for any
      // thread count
      for (int i = 0; i < bsz; ++i) tapes[i].accumulate_into(model.store);
      opt.step(model.store);
      for (double l : item_loss) epoch_loss += l;
    }
    if (report) report->epoch_loss.push_back(epoch_loss / data.size());
  }
  return model;
}

double aux_eval_ce(const AuxModel& model, const std::vector<Example>& data,
                   HintLevel level) {
  if (data.empty()) throw EmptyCorpusError("aux_eval_ce: empty corpus");
  double acc = 0.0;
  for (const auto& ex : data) {
    PreparedLine line =
        prepare_line(model.vocab, format_prompt(ex.first.text),
                     serialize_hints(ex, level), model.cfg.context);
    acc += line_loss_value(model, line);
  }
  return acc / data.size();
}

// ---------------------------------------------------------------------------
// generation: value-domain decoder with per-layer attention caches so each
// new character costs O(n) instead of a full-sequence forward

namespace {

struct DecodeState {
  const AuxModel& m;
  int n = 0;
  std::vector<std::vector<double>> kc, vc;  // per layer, rows appended
  std::vector<double> logits;

  explicit DecodeState(const AuxModel& model)
      : m(model), kc(model.cfg.layers), vc(model.cfg.layers) {
    int reserve = model.cfg.context * model.cfg.dim;
    for (auto& c : kc) c.reserve(reserve);
    for (auto& c : vc) c.reserve(reserve);
  }

  static void rms_value(const std::vector<double>& x, const std::vector<double>& gain,
                        std::vector<double>& out) {
    int d = static_cast<int>(x.size());
    double ss = 0.0;
    for (double v : x) ss += v * v;
    double inv = 1.0 / std::sqrt(ss / d + 1e-8);
    out.resize(d);
    for (int i = 0; i < d; ++i) out[i] = gain[i] * x[i] * inv;
  }

  static void matvec_value(const std::vector<double>& w, int rows, int cols,
                           const std::vector<double>& x, std::vector<double>& out) {
    out.assign(rows, 0.0);
    for (int i = 0; i < rows; ++i) {
      const double* wr = w.data() + static_cast<size_t>(i) * cols;
      double s = 0.0;
      for (int j = 0; j < cols; ++j) s += wr[j] * x[j];
      out[i] = s;
    }
  }

  void rope_value(std::vector<double>& v, int pos) const {
    int d = m.cfg.dim;
    for (int j = 0; j < d / 2; ++j) {
      double theta = std::pow(m.cfg.rope_base, -2.0 * j / d);
      double a = pos * theta;
      double c = std::cos(a), s = std::sin(a);
      double x0 = v[2 * j], x1 = v[2 * j + 1];
      v[2 * j] = c * x0 - s * x1;
      v[2 * j + 1] = s * x0 + c * x1;
    }
  }

  void append(int id) {
    const LmConfig& cfg = m.cfg;
    if (n >= cfg.context)
      throw ContextOverflowError("decode past the context window");
    int d = cfg.dim;
    const std::vector<double>& embed = m.store.values("auxlm.embed");
    std::vector<double> x(embed.begin() + static_cast<size_t>(id) * d,
                          embed.begin() + static_cast<size_t>(id + 1) * d);
    std::vector<double> normed, q, k, v, proj;
    double att_scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int l = 0; l < cfg.layers; ++l) {
      std::string p = block_prefix(l);
      rms_value(x, m.store.values(p + "attn.gain"), normed);
      matvec_value(m.store.values(p + "attn.wq"), d, d, normed, q);
      matvec_value(m.store.values(p + "attn.wk"), d, d, normed, k);
      matvec_value(m.store.values(p + "attn.wv"), d, d, normed, v);
      rope_value(q, n);
      rope_value(k, n);
      kc[l].insert(kc[l].end(), k.begin(), k.end());
      vc[l].insert(vc[l].end(), v.begin(), v.end());
      int len = n + 1;
      std::vector<double> scores(len);
      double mx = -std::numeric_limits<double>::infinity();
      for (int t = 0; t < len; ++t) {
        const double* kr = kc[l].data() + static_cast<size_t>(t) * d;
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += q[j] * kr[j];
        scores[t] = s * att_scale;
        mx = std::max(mx, scores[t]);
      }
      double z = 0.0;
      for (int t = 0; t < len; ++t) {
        scores[t] = std::exp(scores[t] - mx);
        z += scores[t];
      }
      std::vector<double> ctx(d, 0.0);
      for (int t = 0; t < len; ++t) {
        double w = scores[t] / z;
        const double* vr = vc[l].data() + static_cast<size_t>(t) * d;
        for (int j = 0; j < d; ++j) ctx[j] += w * vr[j];
      }
      matvec_value(m.store.values(p + "attn.wo"), d, d, ctx, proj);
      for (int j = 0; j < d; ++j) x[j] += proj[j];

      rms_value(x, m.store.values(p + "ffn.gain"), normed);
      std::vector<double> gate, up;
      matvec_value(m.store.values(p + "ffn.w_gate"), cfg.ffn, d, normed, gate);
      matvec_value(m.store.values(p + "ffn.w_up"), cfg.ffn, d, normed, up);
      for (int j = 0; j < cfg.ffn; ++j) {
        double s = 1.0 / (1.0 + std::exp(-cfg.beta * gate[j]));
        gate[j] = gate[j] * s * up[j];
      }
      matvec_value(m.store.values(p + "ffn.w_down"), d, cfg.ffn, gate, proj);
      for (int j = 0; j < d; ++j) x[j] += proj[j];
    }
    rms_value(x, m.store.values("auxlm.final_gain"), normed);
    const std::vector<double>& head = m.store.values("auxlm.head");
    int vsz = static_cast<int>(head.size()) / d;
    matvec_value(head, vsz, d, normed, logits);
    ++n;
  }
};

}  // namespace

Hints generate_hints(const AuxModel& model, const std::string& text,
                     int max_new_tokens, double repetition_penalty) {
  if (max_new_tokens < 0)
    throw NumericError("generate_hints: max_new_tokens must be >= 0");
  if (repetition_penalty < 1.0)
    throw NumericError("generate_hints: repetition_penalty must be >= 1");
  std::vector<int> prompt_ids = model.vocab.encode(format_prompt(text));
  if (static_cast<int>(prompt_ids.size()) > model.cfg.context)
    throw ContextOverflowError("generate_hints: prompt exceeds context");

  DecodeState st(model);
  for (int id : prompt_ids) st.append(id);

  std::vector<int> out;
  std::set<int> emitted;
  for (int step = 0; step < max_new_tokens; ++step) {
    std::vector<double> logits = st.logits;
    if (repetition_penalty != 1.0) {
      for (int id : emitted) {
        // scale toward zero-probability: positive logits shrink, negative grow
        if (logits[id] > 0)
          logits[id] /= repetition_penalty;
        else
          logits[id] *= repetition_penalty;
      }
    }
    int best = 0;
    for (size_t i = 1; i < logits.size(); ++i)
      if (logits[i] > logits[best]) best = static_cast<int>(i);
    if (best == Vocab::kEos) break;
    out.push_back(best);
    emitted.insert(best);
    if (st.n >= model.cfg.context) break;  // capacity-truncated generation
    st.append(best);
  }
  return make_hints(model.vocab.decode(out));
}

double aux_parse_rate(const AuxModel& model, const std::vector<Example>& data,
                      int max_new_tokens, double repetition_penalty) {
  if (data.empty()) throw EmptyCorpusError("aux_parse_rate: empty corpus");
  int good = 0;
  for (const auto& ex : data) {
    Hints h = generate_hints(model, ex.first.text, max_new_tokens,
                             repetition_penalty);
    if (h.parse && !h.parse->empty()) ++good;
  }
  return static_cast<double>(good) / data.size();
}

// ---------------------------------------------------------------------------
// pruning glue

std::map<std::string, SparseMask> prune_aux(AuxModel& model,
                                            const std::vector<Example>& calib,
                                            HintLevel level, double sparsity) {
  if (calib.empty()) throw NoInputsError("prune_aux: empty calibration set");
  ActivationSink sink;
  for (const auto& ex : calib) {
    PreparedLine line =
        prepare_line(model.vocab, format_prompt(ex.first.text),
                     serialize_hints(ex, level), model.cfg.context);
    ParamLeaves leaves(model.store);
    lm_forward(line.input, leaves, model.cfg, &sink);
  }
  std::map<std::string, SparseMask> masks;
  for (const std::string& name : lm_prunable_layers(model.cfg)) {
    auto it = sink.find(name);
    if (it == sink.end() || it->second.empty())
      throw NoInputsError("prune_aux: no activations captured for " + name);
    const auto& shape = model.store.shape(name);
    int rows = shape[0], cols = shape[1];
    if (it->second[0].size() != static_cast<size_t>(cols))
      throw ShapeMismatchError("prune_aux: activation width mismatch for " + name);
    int n = static_cast<int>(it->second.size());
    Tensor x = Tensor::zeros({cols, n});
    double* xp = x.mutable_data();
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < cols; ++r)
        xp[static_cast<size_t>(r) * n + c] = it->second[c][r];
    Tensor w = Tensor::from({rows, cols}, model.store.values(name));
    PruneResult res = sparsegpt_prune_layer(w, x, sparsity);
    model.store.values(name) = res.w.to_vector();
    masks.emplace(name, std::move(res.mask));
  }
  return masks;
}

// ---------------------------------------------------------------------------
// persistence

void save_aux_checkpoint(const std::string& path, const AuxModel& model) {
  ParamStore copy = model.store;
  copy.put("auxlm.vocab.pack",
           {static_cast<int>(model.vocab.pack().size())}, model.vocab.pack());
  copy.put("auxlm.meta", {6},
           {static_cast<double>(model.cfg.layers), static_cast<double>(model.cfg.dim),
            static_cast<double>(model.cfg.ffn), static_cast<double>(model.cfg.context),
            model.cfg.beta, model.cfg.rope_base});
  save_checkpoint(path, copy);
}

AuxModel load_aux_checkpoint(const std::string& path) {
  ParamStore raw;
  load_checkpoint(path, raw);
  if (!raw.contains("auxlm.meta")) throw DataError("aux checkpoint: bad meta record");
  const std::vector<double>& meta = raw.values("auxlm.meta");
  if (meta.size() != 6) throw DataError("aux checkpoint: bad meta record");
  AuxModel model;
  model.cfg.layers = static_cast<int>(meta[0]);
  model.cfg.dim = static_cast<int>(meta[1]);
  model.cfg.ffn = static_cast<int>(meta[2]);
  model.cfg.context = static_cast<int>(meta[3]);
  model.cfg.beta = meta[4];
  model.cfg.rope_base = meta[5];
  model.vocab = Vocab::unpack(raw.values("auxlm.vocab.pack"));
  // keep only the weights; the two metadata records above are re-derived on save
  for (const std::string& name : raw.names())
    if (name != "auxlm.meta" && name != "auxlm.vocab.pack")
      model.store.put(name, raw.shape(name), raw.values(name));
  return model;
}

}  // namespace acosqe
