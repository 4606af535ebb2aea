#include "acosqe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "acosqe/crf.hpp"
#include "acosqe/errors.hpp"
#include "acosqe/metrics.hpp"
#include "acosqe/optim.hpp"
#include "acosqe/positional.hpp"
#include "acosqe/rng.hpp"
#include "acosqe/seq.hpp"

namespace acosqe {

// ---------------------------------------------------------------------------
// word vocabulary

WordVocab WordVocab::build(const std::vector<std::vector<std::string>>& token_lists) {
  std::set<std::string> seen;
  for (const auto& toks : token_lists)
    for (const auto& t : toks) seen.insert(t);
  WordVocab v;
  v.words_.assign(seen.begin(), seen.end());
  for (size_t i = 0; i < v.words_.size(); ++i)
    v.index_[v.words_[i]] = static_cast<int>(i) + 1;
  return v;
}

int WordVocab::id(const std::string& w) const {
  auto it = index_.find(w);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<double> WordVocab::pack() const {
  std::string joined;
  for (size_t i = 0; i < words_.size(); ++i) {
    if (i) joined += '\n';
    joined += words_[i];
  }
  std::vector<double> out;
  for (uint32_t cp : utf8_codepoints(joined)) out.push_back(cp);
  return out;
}

WordVocab WordVocab::unpack(const std::vector<double>& packed) {
  std::vector<uint32_t> cps;
  cps.reserve(packed.size());
  for (double d : packed) cps.push_back(static_cast<uint32_t>(d));
  std::string joined = codepoints_to_utf8(cps);
  WordVocab v;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) v.words_.push_back(word);
    word.clear();
  };
  for (char c : joined) {
    if (c == '\n') flush();
    else word += c;
  }
  flush();
  for (size_t i = 0; i < v.words_.size(); ++i)
    v.index_[v.words_[i]] = static_cast<int>(i) + 1;
  return v;
}

// ---------------------------------------------------------------------------
// parameters

namespace {

int fuse_dim(const TrainConfig& cfg) { return cfg.hidden_gru; }
int attn_dk(const TrainConfig& cfg) { return std::max(1, cfg.hidden_gru / 2); }

}  // namespace

void init_acos_params(ParamStore& store, const TrainConfig& cfg, int vocab_size,
                      Rng& rng) {
  if (cfg.embedding_dim < 1 || cfg.hidden_lstm < 1 || cfg.hidden_gru < 1)
    throw NumericError("init_acos_params: dims must be positive");
  int emb = cfg.embedding_dim;
  int hl = cfg.hidden_lstm, hg = cfg.hidden_gru;
  int L = tag_count(cfg.k_max);
  int s = cfg.ode_state, oh = cfg.ode_hidden;
  int df = fuse_dim(cfg), dk = attn_dk(cfg);
  int K = static_cast<int>(cfg.categories.size());

  store.create_normal("acos.embed", {vocab_size, emb}, rng, 0.02);

  for (const char* dir : {"fw", "bw"}) {
    std::string p = std::string("aoe.lstm.") + dir + ".";
    store.create_fan_in(p + "wx", {4 * hl, emb}, rng);
    store.create_fan_in(p + "wh", {4 * hl, hl}, rng);
    store.put(p + "b", {4 * hl}, std::vector<double>(4 * hl, 0.0));
  }
  store.create_fan_in("aoe.emit.w", {L, 2 * hl}, rng);
  store.put("aoe.emit.b", {L}, std::vector<double>(L, 0.0));
  store.put("aoe.trans", {L + 2, L + 2},
            std::vector<double>(static_cast<size_t>(L + 2) * (L + 2), 0.0));

  for (const char* dir : {"fw", "bw"}) {
    std::string p = std::string("acs.gru.") + dir + ".";
    store.create_fan_in(p + "wx", {3 * hg, emb}, rng);
    store.create_fan_in(p + "wh", {3 * hg, hg}, rng);
    store.put(p + "b", {3 * hg}, std::vector<double>(3 * hg, 0.0));
  }
  store.create_fan_in("acs.fuse.proj", {2 * 2 * hg, df}, rng);
  store.create_fan_in("acs.ode.lift_w", {s}, rng);
  store.put("acs.ode.lift_b", {s}, std::vector<double>(s, 0.0));
  store.create_fan_in("acs.ode.w1", {oh, s + 1}, rng);
  store.put("acs.ode.b1", {oh}, std::vector<double>(oh, 0.0));
  store.create_fan_in("acs.ode.w2", {s, oh}, rng);
  store.put("acs.ode.b2", {s}, std::vector<double>(s, 0.0));
  store.create_fan_in("acs.ode.readout_w", {s}, rng);
  store.put("acs.ode.readout_b", {1}, std::vector<double>(1, 0.0));
  store.create_fan_in("acs.attn.wq", {df, dk}, rng);
  store.create_fan_in("acs.attn.wk", {df, dk}, rng);
  store.create_fan_in("acs.attn.wv", {df, dk}, rng);
  store.create_fan_in("acs.attn.wo", {dk, df}, rng);
  store.create_fan_in("acs.head_ac.w", {K, df}, rng);
  store.put("acs.head_ac.b", {K}, std::vector<double>(K, 0.0));
  store.create_fan_in("acs.head_sp.w", {3, df}, rng);
  store.put("acs.head_sp.b", {3}, std::vector<double>(3, 0.0));
}

// ---------------------------------------------------------------------------
// forward paths

namespace {

Sentence augmented_sentence(const Sentence& s, const std::string& hints,
                            const TrainConfig& cfg) {
  if (hints.empty()) return s;
  return tokenize(augment_input(s.text, hints, cfg.separator),
                  cfg.tokenize_mode);
}

std::vector<int> word_ids(const WordVocab& vocab, const Sentence& s) {
  std::vector<int> ids;
  ids.reserve(s.tokens.size());
  for (const auto& t : s.tokens) ids.push_back(vocab.id(t));
  return ids;
}

RnnDirParams dir_params(ParamLeaves& leaves, const std::string& prefix) {
  return {leaves.get(prefix + ".wx"), leaves.get(prefix + ".wh"),
          leaves.get(prefix + ".b")};
}

// emissions over the augmented token sequence
Tensor aoe_emissions(const std::vector<int>& ids, ParamLeaves& leaves) {
  Tensor x = embedding_rows(leaves.get("acos.embed"), ids);
  RnnDirParams fw = dir_params(leaves, "aoe.lstm.fw");
  RnnDirParams bw = dir_params(leaves, "aoe.lstm.bw");
  Tensor h = bilstm_encode(x, fw, bw);
  return add_rowwise(matmul_nt(h, leaves.get("aoe.emit.w")),
                     leaves.get("aoe.emit.b"));
}

Tensor effective_transitions(ParamLeaves& leaves, int k_max) {
  return add(leaves.get("aoe.trans"), bio_constraint_matrix(k_max));
}

// category and polarity logits for one aspect slot
std::pair<Tensor, Tensor> acs_logits(const Sentence& sentence,
                                     const std::optional<Span>& aspect,
                                     const std::string& hints,
                                     ParamLeaves& leaves,
                                     const AcosModel& model) {
  const TrainConfig& cfg = model.cfg;
  int n_orig = static_cast<int>(sentence.tokens.size());
  if (aspect && (aspect->start < 0 || aspect->end < aspect->start ||
                 aspect->end >= n_orig))
    throw SpanOutOfRangeError(0);
  Sentence aug = augmented_sentence(sentence, hints, cfg);
  std::vector<int> ids = word_ids(model.vocab, aug);
  int n = static_cast<int>(ids.size());

  Tensor x = embedding_rows(leaves.get("acos.embed"), ids);
  RnnDirParams fw = dir_params(leaves, "acs.gru.fw");
  RnnDirParams bw = dir_params(leaves, "acs.gru.bw");
  Tensor h = bigru_encode(x, fw, bw);

  std::vector<double> cm = context_mask(n, aspect, cfg.srd);
  int max_eff = std::max(cfg.max_len, n);
  std::vector<double> cw_raw =
      context_weight(n, aspect, cfg.srd, max_eff, cfg.cw_mode);
  Tensor cw = Tensor::from({n}, cw_raw);

  OdeContextParams ode;
  ode.lift_w = leaves.get("acs.ode.lift_w");
  ode.lift_b = leaves.get("acs.ode.lift_b");
  ode.field = OdeMlp{leaves.get("acs.ode.w1"), leaves.get("acs.ode.b1"),
                     leaves.get("acs.ode.w2"), leaves.get("acs.ode.b2")};
  ode.readout_w = leaves.get("acs.ode.readout_w");
  ode.readout_b = leaves.get("acs.ode.readout_b");
  OdeConfig ocfg;
  ocfg.steps = cfg.ode_steps;
  Tensor cw_evolved = evolve_context_weights(cw, ode, ocfg);

  Tensor fused = fuse_features(h, cm, cw_evolved, leaves.get("acs.fuse.proj"),
                               FuseMode::kFusion);
  AttentionParams ap{leaves.get("acs.attn.wq"), leaves.get("acs.attn.wk"),
                     leaves.get("acs.attn.wv"), leaves.get("acs.attn.wo")};
  Tensor pooled = head_pool(self_attention(fused, ap));
  Tensor cat = add(matvec(leaves.get("acs.head_ac.w"), pooled),
                   leaves.get("acs.head_ac.b"));
  Tensor sp = add(matvec(leaves.get("acs.head_sp.w"), pooled),
                  leaves.get("acs.head_sp.b"));
  return {cat, sp};
}

int category_index(const TrainConfig& cfg, const std::string& cat) {
  for (size_t i = 0; i < cfg.categories.size(); ++i)
    if (cfg.categories[i] == cat) return static_cast<int>(i);
  throw UnknownCategoryError(0, cat);
}

int argmax_values(const Tensor& t) {
  const double* p = t.data();
  int n = static_cast<int>(t.size()), best = 0;
  for (int i = 1; i < n; ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

}  // namespace

AoeOutput aoe_forward(const Sentence& sentence, const std::string& hints,
                      ParamLeaves& leaves, const AcosModel& model) {
  Sentence aug = augmented_sentence(sentence, hints, model.cfg);
  std::vector<int> ids = word_ids(model.vocab, aug);
  AoeOutput out;
  out.emissions = aoe_emissions(ids, leaves);
  Tensor trans = effective_transitions(leaves, model.cfg.k_max);
  std::vector<int> path = viterbi_decode(out.emissions, trans);
  TagSequence tags;
  tags.tags = path;
  int n_orig = static_cast<int>(sentence.tokens.size());
  for (const auto& pair : decode_tags(tags, model.cfg.k_max)) {
    bool inside = pair.opinion.end < n_orig &&
                  (!pair.aspect || pair.aspect->end < n_orig);
    if (inside) out.pairs.push_back(pair);
  }
  return out;
}

AcsOutput acs_forward(const Sentence& sentence,
                      const std::optional<Span>& aspect,
                      const std::string& hints, ParamLeaves& leaves,
                      const AcosModel& model) {
  auto [cat, sp] = acs_logits(sentence, aspect, hints, leaves, model);
  return {softmax_vec(cat), softmax_vec(sp)};
}

Tensor joint_loss(const std::vector<Example>& batch,
                  const std::vector<std::string>& hints, ParamLeaves& leaves,
                  const AcosModel& model) {
  if (batch.empty()) throw EmptyCorpusError("joint_loss: empty batch");
  if (hints.size() != batch.size())
    throw ShapeMismatchError("joint_loss: one hint string per example");
  const TrainConfig& cfg = model.cfg;
  Tensor trans = effective_transitions(leaves, cfg.k_max);

  Tensor nll_sum = Tensor::scalar(0.0);
  Tensor sp_sum = Tensor::scalar(0.0);
  Tensor ac_sum = Tensor::scalar(0.0);
  int n_pairs = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Example& ex = batch[i];
    Sentence aug = augmented_sentence(ex.first, hints[i], cfg);
    std::vector<int> ids = word_ids(model.vocab, aug);
    Tensor em = aoe_emissions(ids, leaves);
    TagSequence gold = encode_tags(aug, ex.second, cfg.k_max);
    nll_sum = add(nll_sum, crf_nll(em, trans, gold.tags));
    for (const Quadruple& q : ex.second) {
      auto [cat, sp] = acs_logits(ex.first, q.aspect, hints[i], leaves, model);
      ac_sum = add(ac_sum, cross_entropy_vec(cat, category_index(cfg, q.category)));
      sp_sum = add(sp_sum, cross_entropy_vec(sp, static_cast<int>(q.polarity)));
      ++n_pairs;
    }
  }
  Tensor loss = scale(nll_sum, 1.0 / batch.size());
  if (n_pairs > 0) {
    loss = add(loss, scale(sp_sum, 1.0 / n_pairs));
    loss = add(loss, scale(ac_sum, 1.0 / n_pairs));
  }
  loss = add(loss, scale(sum_squares(leaves.get("acs.head_sp.w")), cfg.l2_sp));
  loss = add(loss, scale(sum_squares(leaves.get("acs.head_ac.w")), cfg.l2_ac));
  return loss;
}

// ---------------------------------------------------------------------------
// extraction

namespace {

std::vector<Quadruple> extract_with_hints(const Sentence& s,
                                          const std::string& hints,
                                          const AcosModel& model) {
  ParamLeaves leaves(model.store);
  AoeOutput aoe = aoe_forward(s, hints, leaves, model);
  std::vector<Quadruple> out;
  for (const auto& pair : aoe.pairs) {
    auto [cat, sp] = acs_logits(s, pair.aspect, hints, leaves, model);
    Quadruple q;
    q.category = model.cfg.categories[argmax_values(cat)];
    q.aspect = pair.aspect;
    q.opinion = pair.opinion;
    q.polarity = static_cast<Polarity>(argmax_values(sp));
    if (std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
  }
  return out;
}

}  // namespace

std::vector<Quadruple> extract_quadruples(const std::string& text,
                                          const AcosModel& model,
                                          const AuxModel* aux,
                                          int max_new_tokens,
                                          double repetition_penalty) {
  if (text.empty()) throw EmptyTextError();
  Sentence s = tokenize(text, model.cfg.tokenize_mode);
  std::string hints;
  if (model.cfg.use_hints && aux)
    hints = generate_hints(*aux, text, max_new_tokens, repetition_penalty).text;
  return extract_with_hints(s, hints, model);
}

std::vector<std::vector<Quadruple>> predict_corpus(
    const std::vector<Example>& data, const AcosModel& model,
    const AuxModel* aux, int max_new_tokens, double repetition_penalty) {
  std::vector<std::vector<Quadruple>> out;
  out.reserve(data.size());
  for (const auto& ex : data)
    out.push_back(extract_quadruples(ex.first.text, model, aux, max_new_tokens,
                                     repetition_penalty));
  return out;
}

// ---------------------------------------------------------------------------
// training

AcosModel train(const std::vector<Example>& corpus, const TrainConfig& cfg,
                TrainReport* report) {
  if (corpus.empty()) throw EmptyCorpusError("train: empty corpus");
  Rng rng(cfg.seed);

  std::vector<size_t> perm(corpus.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.uniform_int(0, static_cast<int>(i) - 1)]);
  auto n_dev = static_cast<size_t>(std::lround(cfg.dev_fraction * corpus.size()));
  if (n_dev >= corpus.size()) n_dev = corpus.size() - 1;
  std::vector<size_t> dev_idx(perm.begin(), perm.begin() + n_dev);
  std::vector<size_t> train_idx(perm.begin() + n_dev, perm.end());

  std::vector<std::string> hint_text(corpus.size());
  if (cfg.use_hints)
    for (size_t i = 0; i < corpus.size(); ++i)
      hint_text[i] = serialize_hints(corpus[i], HintLevel::kFull);

  std::vector<std::vector<std::string>> token_lists;
  token_lists.reserve(train_idx.size());
  for (size_t i : train_idx)
    token_lists.push_back(
        augmented_sentence(corpus[i].first, hint_text[i], cfg).tokens);

  AcosModel model;
  model.cfg = cfg;
  model.vocab = WordVocab::build(token_lists);
  init_acos_params(model.store, cfg, model.vocab.size(), rng);

  Adam opt(cfg.learning_rate);
  if (cfg.freeze_embedding) opt.freeze("acos.embed");

  std::vector<std::vector<Quadruple>> dev_gold;
  for (size_t i : dev_idx) dev_gold.push_back(corpus[i].second);

  double best_f1 = -1.0;
  int best_epoch = -1, since_best = 0;
  std::map<std::string, std::vector<double>> best_params;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = train_idx.size(); i > 1; --i)
      std::swap(train_idx[i - 1],
                train_idx[rng.uniform_int(0, static_cast<int>(i) - 1)]);
    double epoch_loss = 0.0;
    size_t seen = 0;
    for (size_t b0 = 0; b0 < train_idx.size(); b0 += cfg.batch_size) {
      size_t b1 = std::min(b0 + cfg.batch_size, train_idx.size());
      std::vector<Example> batch;
      std::vector<std::string> batch_hints;
      for (size_t j = b0; j < b1; ++j) {
        batch.push_back(corpus[train_idx[j]]);
        batch_hints.push_back(hint_text[train_idx[j]]);
      }
      ParamLeaves tape(model.store);
      Tensor loss = joint_loss(batch, batch_hints, tape, model);
      epoch_loss += loss.item() * batch.size();
      seen += batch.size();
      loss.backward();
      tape.accumulate_into(model.store);
      opt.step(model.store);
    }
    if (report && seen) report->epoch_loss.push_back(epoch_loss / seen);

    if (!dev_idx.empty()) {
      // dev extraction sees the same teacher-forced hint text as training
      std::vector<std::vector<Quadruple>> dev_pred;
      for (size_t i : dev_idx)
        dev_pred.push_back(
            extract_with_hints(corpus[i].first, hint_text[i], model));
      double f1 =
          prf1(corpus_match_counts(dev_pred, dev_gold, SubtaskKind::kAcos)).f1;
      if (report) report->dev_f1.push_back(f1);
      if (f1 > best_f1 + 1e-12) {
        best_f1 = f1;
        best_epoch = epoch;
        best_params = model.store.snapshot();
        since_best = 0;
      } else if (++since_best >= cfg.patience && cfg.patience > 0) {
        break;
      }
    }
  }
  if (!best_params.empty()) model.store.restore(best_params);
  if (report) report->best_epoch = best_epoch;
  return model;
}

// ---------------------------------------------------------------------------
// persistence

namespace {

std::vector<double> string_pack(const std::string& s) {
  std::vector<double> out;
  for (uint32_t cp : utf8_codepoints(s)) out.push_back(cp);
  return out;
}

std::string string_unpack(const std::vector<double>& packed) {
  std::vector<uint32_t> cps;
  cps.reserve(packed.size());
  for (double d : packed) cps.push_back(static_cast<uint32_t>(d));
  return codepoints_to_utf8(cps);
}

}  // namespace

void save_acos_checkpoint(const std::string& path, const AcosModel& model) {
  const TrainConfig& c = model.cfg;
  ParamStore copy = model.store;
  std::vector<double> vocab_pack = model.vocab.pack();
  copy.put("acos.vocab.pack", {static_cast<int>(vocab_pack.size())}, vocab_pack);
  std::string cats;
  for (size_t i = 0; i < c.categories.size(); ++i) {
    if (i) cats += '\n';
    cats += c.categories[i];
  }
  std::vector<double> cats_pack = string_pack(cats);
  copy.put("acos.categories.pack", {static_cast<int>(cats_pack.size())}, cats_pack);
  std::vector<double> sep_pack = string_pack(c.separator);
  copy.put("acos.separator.pack", {static_cast<int>(sep_pack.size())}, sep_pack);
  copy.put("acos.meta", {13},
           {static_cast<double>(c.embedding_dim), static_cast<double>(c.hidden_lstm),
            static_cast<double>(c.hidden_gru), static_cast<double>(c.k_max),
            static_cast<double>(c.max_len), static_cast<double>(c.srd),
            static_cast<double>(static_cast<int>(c.cw_mode)),
            c.use_hints ? 1.0 : 0.0,
            static_cast<double>(static_cast<int>(c.tokenize_mode)),
            static_cast<double>(c.ode_state), static_cast<double>(c.ode_hidden),
            static_cast<double>(c.ode_steps),
            static_cast<double>(c.categories.size())});
  save_checkpoint(path, copy);
}

AcosModel load_acos_checkpoint(const std::string& path) {
  AcosModel model;
  ParamStore raw;
  load_checkpoint(path, raw);
  if (!raw.contains("acos.meta")) throw DataError("checkpoint: bad meta record");
  const std::vector<double>& meta = raw.values("acos.meta");
  if (meta.size() != 13) throw DataError("checkpoint: bad meta record");
  TrainConfig c;
  c.embedding_dim = static_cast<int>(meta[0]);
  c.hidden_lstm = static_cast<int>(meta[1]);
  c.hidden_gru = static_cast<int>(meta[2]);
  c.k_max = static_cast<int>(meta[3]);
  c.max_len = static_cast<int>(meta[4]);
  c.srd = static_cast<int>(meta[5]);
  c.cw_mode = static_cast<CwMode>(static_cast<int>(meta[6]));
  c.use_hints = meta[7] != 0.0;
  c.tokenize_mode = static_cast<TokenizeMode>(static_cast<int>(meta[8]));
  c.ode_state = static_cast<int>(meta[9]);
  c.ode_hidden = static_cast<int>(meta[10]);
  c.ode_steps = static_cast<int>(meta[11]);
  c.separator = string_unpack(raw.values("acos.separator.pack"));
  std::string cats = string_unpack(raw.values("acos.categories.pack"));
  c.categories.clear();
  std::string word;
  for (char ch : cats) {
    if (ch == '\n') {
      c.categories.push_back(word);
      word.clear();
    } else {
      word += ch;
    }
  }
  if (!word.empty()) c.categories.push_back(word);
  if (c.categories.size() != static_cast<size_t>(meta[12]))
    throw DataError("checkpoint: category list does not match meta");
  model.cfg = c;
  model.vocab = WordVocab::unpack(raw.values("acos.vocab.pack"));
  // keep only the weights; metadata records are re-derived on save
  static const std::set<std::string> meta_keys = {
      "acos.meta", "acos.vocab.pack", "acos.categories.pack",
      "acos.separator.pack"};
  for (const std::string& name : raw.names())
    if (!meta_keys.count(name))
      model.store.put(name, raw.shape(name), raw.values(name));
  return model;
}

}  // namespace acosqe
