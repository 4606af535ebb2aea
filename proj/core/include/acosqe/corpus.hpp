#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "acosqe/config.hpp"

namespace acosqe {

// Token span, inclusive on both ends.
struct Span {
  int start = 0;
  int end = 0;
  friend bool operator==(const Span& a, const Span& b) {
    return a.start == b.start && a.end == b.end;
  }
  friend auto operator<=>(const Span& a, const Span& b) = default;
};

enum class Polarity { kPositive = 0, kNegative = 1, kNeutral = 2 };

Polarity polarity_from_string(const std::string& s);  // throws DataError
const char* to_string(Polarity p);

struct Quadruple {
  std::string category;
  std::optional<Span> aspect;  // nullopt = implicit aspect
  Span opinion;
  Polarity polarity = Polarity::kNeutral;
  friend bool operator==(const Quadruple&, const Quadruple&) = default;
};

struct Sentence {
  std::string text;
  std::vector<std::string> tokens;
  // character (codepoint) offsets into text, end exclusive, ascending
  std::vector<std::pair<int, int>> token_offsets;
};

struct TagSequence {
  std::vector<int> tags;
};

using Example = std::pair<Sentence, std::vector<Quadruple>>;

struct CorpusStats {
  int64_t sentences = 0;
  int64_t tokens = 0;
  int64_t quads = 0;
  int64_t implicit_aspects = 0;
  std::map<std::string, int64_t> per_category;
  std::array<int64_t, 3> per_polarity = {0, 0, 0};
};

// ---------------------------------------------------------------------------
// tag scheme: index 0 is O; suffix k (1-based) owns the block
// [B-AC-k, I-AC-k, B-OT-k, I-OT-k] at 1 + 4*(k-1).

int tag_count(int k_max);
int tag_o();
enum class TagKind { kAspect, kOpinion };
int tag_index(TagKind kind, bool begin, int suffix);
std::string tag_name(int index, int k_max);

struct AspectOpinionPair {
  std::optional<Span> aspect;
  Span opinion;
  friend bool operator==(const AspectOpinionPair&, const AspectOpinionPair&) = default;
};

// ---------------------------------------------------------------------------

// UTF-8 decoding helper: codepoints plus their codepoint index range is
// everything the tokenizers need.
std::vector<uint32_t> utf8_codepoints(const std::string& text);
std::string codepoints_to_utf8(const std::vector<uint32_t>& cps);

Sentence tokenize(const std::string& text, TokenizeMode mode);

struct CorpusConfig {
  TokenizeMode mode = TokenizeMode::kWhitespace;
  std::vector<std::string> categories = default_categories();
  int k_max = 4;
};

// JSONL dataset: one {"text":..., "quads":[...]} object per line.  Spans are
// token indices (inclusive); aspect null means implicit.  Errors carry the
// 1-based line number.
std::vector<Example> parse_dataset(const std::string& path, const CorpusConfig& cfg);
std::vector<Example> parse_dataset_text(const std::string& text, const CorpusConfig& cfg);
std::string example_to_json(const Example& ex);
void write_dataset(const std::string& path, const std::vector<Example>& data);

// quad k (1-based list position) contributes B/I-AC-k and B/I-OT-k tags
TagSequence encode_tags(const Sentence& s, const std::vector<Quadruple>& quads,
                        int k_max);
// dangling I-tags open spans; suffixes with an opinion but no aspect emit an
// implicit pair, aspect-only suffixes are dropped
std::vector<AspectOpinionPair> decode_tags(const TagSequence& tags, int k_max);

CorpusStats corpus_stats(const std::vector<Example>& data);

}  // namespace acosqe
