#include "acosqe/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "acosqe/errors.hpp"

namespace acosqe {

Polarity polarity_from_string(const std::string& s) {
  if (s == "positive") return Polarity::kPositive;
  if (s == "negative") return Polarity::kNegative;
  if (s == "neutral") return Polarity::kNeutral;
  throw DataError("unknown polarity '" + s + "'");
}

const char* to_string(Polarity p) {
  switch (p) {
    case Polarity::kPositive: return "positive";
    case Polarity::kNegative: return "negative";
    default: return "neutral";
  }
}

// ---------------------------------------------------------------------------
// tag scheme

int tag_count(int k_max) { return 1 + 4 * k_max; }
int tag_o() { return 0; }

int tag_index(TagKind kind, bool begin, int suffix) {
  int base = 1 + 4 * (suffix - 1);
  int off = (kind == TagKind::kAspect ? 0 : 2) + (begin ? 0 : 1);
  return base + off;
}

std::string tag_name(int index, int k_max) {
  if (index == 0) return "O";
  if (index < 0 || index >= tag_count(k_max))
    throw LabelOutOfRangeError("tag_name: index out of range");
  int suffix = (index - 1) / 4 + 1;
  int off = (index - 1) % 4;
  static const char* stems[4] = {"B-AC-", "I-AC-", "B-OT-", "I-OT-"};
  return stems[off] + std::to_string(suffix);
}

// ---------------------------------------------------------------------------
// UTF-8

std::vector<uint32_t> utf8_codepoints(const std::string& text) {
  std::vector<uint32_t> out;
  size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    uint32_t cp = 0;
    int extra = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1f;
      extra = 1;
    } else if ((c >> 4) == 0xe) {
      cp = c & 0x0f;
      extra = 2;
    } else if ((c >> 3) == 0x1e) {
      cp = c & 0x07;
      extra = 3;
    } else {
      throw DataError("invalid UTF-8 byte in text");
    }
    if (i + extra >= text.size()) throw DataError("truncated UTF-8 sequence");
    for (int k = 1; k <= extra; ++k) {
      unsigned char cc = static_cast<unsigned char>(text[i + k]);
      if ((cc >> 6) != 0x2) throw DataError("invalid UTF-8 continuation byte");
      cp = (cp << 6) | (cc & 0x3f);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string codepoints_to_utf8(const std::vector<uint32_t>& cps) {
  std::string out;
  for (uint32_t cp : cps) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xc0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xe0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
      out += static_cast<char>(0xf0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    }
  }
  return out;
}

namespace {
bool is_space_cp(uint32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0x0b ||
         cp == 0x0c || cp == 0xa0 || cp == 0x3000;
}
}  // namespace

Sentence tokenize(const std::string& text, TokenizeMode mode) {
  if (text.empty()) throw EmptyTextError();
  std::vector<uint32_t> cps = utf8_codepoints(text);
  Sentence s;
  s.text = text;
  if (mode == TokenizeMode::kPerCharacter) {
    for (size_t i = 0; i < cps.size(); ++i) {
      if (is_space_cp(cps[i])) continue;
      s.tokens.push_back(codepoints_to_utf8({cps[i]}));
      s.token_offsets.emplace_back(static_cast<int>(i), static_cast<int>(i + 1));
    }
  } else {
    size_t i = 0;
    while (i < cps.size()) {
      while (i < cps.size() && is_space_cp(cps[i])) ++i;
      if (i >= cps.size()) break;
      size_t start = i;
      while (i < cps.size() && !is_space_cp(cps[i])) ++i;
      s.tokens.push_back(codepoints_to_utf8(
          std::vector<uint32_t>(cps.begin() + start, cps.begin() + i)));
      s.token_offsets.emplace_back(static_cast<int>(start), static_cast<int>(i));
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

Span parse_span(const nlohmann::json& j, int line, const char* field) {
  if (!j.is_object() || !j.contains("start") || !j.contains("end") ||
      !j["start"].is_number_integer() || !j["end"].is_number_integer())
    throw SchemaError(line, field);
  Span s{j["start"].get<int>(), j["end"].get<int>()};
  return s;
}

void check_span(const Span& s, int n_tokens, int line) {
  if (s.start < 0 || s.end < s.start || s.end >= n_tokens)
    throw SpanOutOfRangeError(line);
}

Example parse_example(const nlohmann::json& j, int line, const CorpusConfig& cfg) {
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
    throw SchemaError(line, "text");
  std::string text = j["text"].get<std::string>();
  if (text.empty()) throw SchemaError(line, "text");
  Sentence sent = tokenize(text, cfg.mode);
  if (sent.tokens.empty()) throw SchemaError(line, "text");
  std::vector<Quadruple> quads;
  if (!j.contains("quads") || !j["quads"].is_array())
    throw SchemaError(line, "quads");
  for (const auto& q : j["quads"]) {
    if (!q.is_object()) throw SchemaError(line, "quads");
    Quadruple quad;
    if (!q.contains("category") || !q["category"].is_string())
      throw SchemaError(line, "category");
    quad.category = q["category"].get<std::string>();
    if (std::find(cfg.categories.begin(), cfg.categories.end(), quad.category) ==
        cfg.categories.end())
      throw UnknownCategoryError(line, quad.category);
    if (!q.contains("polarity") || !q["polarity"].is_string())
      throw SchemaError(line, "polarity");
    try {
      quad.polarity = polarity_from_string(q["polarity"].get<std::string>());
    } catch (const DataError&) {
      throw SchemaError(line, "polarity");
    }
    if (!q.contains("aspect")) throw SchemaError(line, "aspect");
    if (!q["aspect"].is_null()) {
      quad.aspect = parse_span(q["aspect"], line, "aspect");
      check_span(*quad.aspect, static_cast<int>(sent.tokens.size()), line);
    }
    if (!q.contains("opinion")) throw SchemaError(line, "opinion");
    quad.opinion = parse_span(q["opinion"], line, "opinion");
    check_span(quad.opinion, static_cast<int>(sent.tokens.size()), line);
    quads.push_back(std::move(quad));
  }
  return {std::move(sent), std::move(quads)};
}

}  // namespace

std::vector<Example> parse_dataset_text(const std::string& text,
                                        const CorpusConfig& cfg) {
  std::vector<Example> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw SchemaError(lineno, "json");
    }
    out.push_back(parse_example(j, lineno, cfg));
  }
  return out;
}

std::vector<Example> parse_dataset(const std::string& path, const CorpusConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read dataset '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset_text(buf.str(), cfg);
}

std::string example_to_json(const Example& ex) {
  nlohmann::json j;
  j["text"] = ex.first.text;
  nlohmann::json quads = nlohmann::json::array();
  for (const auto& q : ex.second) {
    nlohmann::json qj;
    qj["category"] = q.category;
    if (q.aspect)
      qj["aspect"] = {{"start", q.aspect->start}, {"end", q.aspect->end}};
    else
      qj["aspect"] = nullptr;
    qj["opinion"] = {{"start", q.opinion.start}, {"end", q.opinion.end}};
    qj["polarity"] = to_string(q.polarity);
    quads.push_back(qj);
  }
  j["quads"] = quads;
  return j.dump();
}

void write_dataset(const std::string& path, const std::vector<Example>& data) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write dataset '" + path + "'");
  for (const auto& ex : data) out << example_to_json(ex) << "\n";
}

// ---------------------------------------------------------------------------
// tag codec

TagSequence encode_tags(const Sentence& s, const std::vector<Quadruple>& quads,
                        int k_max) {
  int n = static_cast<int>(s.tokens.size());
  if (static_cast<int>(quads.size()) > k_max)
    throw TooManyPairsError("sentence has " + std::to_string(quads.size()) +
                            " pairs but k_max is " + std::to_string(k_max));
  TagSequence out;
  out.tags.assign(n, tag_o());
  auto place = [&](const Span& span, TagKind kind, int suffix) {
    if (span.start < 0 || span.end >= n || span.end < span.start)
      throw SpanOutOfRangeError(0);
    for (int i = span.start; i <= span.end; ++i) {
      if (out.tags[i] != tag_o())
        throw OverlapError("token " + std::to_string(i) + " tagged twice");
      out.tags[i] = tag_index(kind, i == span.start, suffix);
    }
  };
  for (size_t k = 0; k < quads.size(); ++k) {
    int suffix = static_cast<int>(k) + 1;
    if (quads[k].aspect) place(*quads[k].aspect, TagKind::kAspect, suffix);
    place(quads[k].opinion, TagKind::kOpinion, suffix);
  }
  return out;
}

std::vector<AspectOpinionPair> decode_tags(const TagSequence& tags, int k_max) {
  int n = static_cast<int>(tags.tags.size());
  int count = tag_count(k_max);
  for (int t : tags.tags)
    if (t < 0 || t >= count)
      throw LabelOutOfRangeError("decode_tags: tag out of range");

  // First maximal contiguous segment per (kind, suffix). A segment starts at a
  // B tag or at an I tag that does not extend the previous position (dangling
  // I is repaired to a begin).
  std::map<int, std::optional<Span>> aspects, opinions;
  for (int i = 0; i < n; ++i) {
    int t = tags.tags[i];
    if (t == tag_o()) continue;
    int suffix = (t - 1) / 4 + 1;
    int off = (t - 1) % 4;
    bool is_aspect = off < 2;
    bool begin = off % 2 == 0;
    auto& slot = is_aspect ? aspects[suffix] : opinions[suffix];
    int prev = i > 0 ? tags.tags[i - 1] : tag_o();
    bool extends = !begin && prev != tag_o() && (prev - 1) / 4 + 1 == suffix &&
                   ((prev - 1) % 4 < 2) == is_aspect;
    if (extends && slot && slot->end == i - 1) {
      slot->end = i;
    } else if (!slot) {
      slot = Span{i, i};
    }
    // a second segment for an already-closed slot is ignored
  }

  std::vector<AspectOpinionPair> out;
  for (auto& [suffix, op] : opinions) {
    if (!op) continue;
    AspectOpinionPair p;
    auto it = aspects.find(suffix);
    if (it != aspects.end()) p.aspect = it->second;  // absent -> implicit
    p.opinion = *op;
    out.push_back(p);
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<Example>& data) {
  CorpusStats st;
  for (const auto& [sent, quads] : data) {
    st.sentences += 1;
    st.tokens += static_cast<int64_t>(sent.tokens.size());
    for (const auto& q : quads) {
      st.quads += 1;
      if (!q.aspect) st.implicit_aspects += 1;
      st.per_category[q.category] += 1;
      st.per_polarity[static_cast<int>(q.polarity)] += 1;
    }
  }
  return st;
}

}  // namespace acosqe
