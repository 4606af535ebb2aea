#include "acosqe/metrics.hpp"

#include <cstdio>
#include <set>

#include "acosqe/errors.hpp"

namespace acosqe {

const char* to_string(SubtaskKind k) {
  switch (k) {
    case SubtaskKind::kAcos: return "acos";
    case SubtaskKind::kCs: return "cs";
    case SubtaskKind::kTasd: return "tasd";
    default: return "aste";
  }
}

SubtaskKind subtask_from_string(const std::string& s) {
  if (s == "acos") return SubtaskKind::kAcos;
  if (s == "cs") return SubtaskKind::kCs;
  if (s == "tasd") return SubtaskKind::kTasd;
  if (s == "aste") return SubtaskKind::kAste;
  throw DataError("unknown subtask: " + s);
}

namespace {

std::string span_key(const Span& s) {
  return std::to_string(s.start) + "," + std::to_string(s.end);
}

std::string aspect_key(const std::optional<Span>& a) {
  return a ? span_key(*a) : std::string("~");
}

// canonical comparable form of the fields a subtask keeps
std::string project(const Quadruple& q, SubtaskKind kind) {
  switch (kind) {
    case SubtaskKind::kAcos:
      return q.category + "|" + aspect_key(q.aspect) + "|" + span_key(q.opinion) +
             "|" + to_string(q.polarity);
    case SubtaskKind::kCs:
      return q.category + "|" + to_string(q.polarity);
    case SubtaskKind::kTasd:
      return aspect_key(q.aspect) + "|" + q.category + "|" + to_string(q.polarity);
    default:  // ASTE
      return aspect_key(q.aspect) + "|" + span_key(q.opinion) + "|" +
             to_string(q.polarity);
  }
}

std::set<std::string> projected_set(const std::vector<Quadruple>& quads,
                                    SubtaskKind kind) {
  std::set<std::string> out;
  for (const auto& q : quads) out.insert(project(q, kind));
  return out;
}

}  // namespace

MatchCounts exact_match_counts(const std::vector<Quadruple>& pred,
                               const std::vector<Quadruple>& gold,
                               SubtaskKind kind) {
  std::set<std::string> p = projected_set(pred, kind);
  std::set<std::string> g = projected_set(gold, kind);
  MatchCounts out;
  out.n_pred = static_cast<long>(p.size());
  out.n_gold = static_cast<long>(g.size());
  for (const auto& key : p)
    if (g.count(key)) ++out.n_tp;
  return out;
}

MatchCounts corpus_match_counts(const std::vector<std::vector<Quadruple>>& pred,
                                const std::vector<std::vector<Quadruple>>& gold,
                                SubtaskKind kind) {
  if (pred.size() != gold.size())
    throw ShapeMismatchError("corpus_match_counts: prediction/gold list sizes differ");
  MatchCounts total;
  for (size_t i = 0; i < pred.size(); ++i) {
    MatchCounts c = exact_match_counts(pred[i], gold[i], kind);
    total.n_tp += c.n_tp;
    total.n_pred += c.n_pred;
    total.n_gold += c.n_gold;
  }
  return total;
}

Prf1 prf1(const MatchCounts& counts) {
  Prf1 out;
  if (counts.n_pred > 0)
    out.precision = static_cast<double>(counts.n_tp) / counts.n_pred;
  if (counts.n_gold > 0)
    out.recall = static_cast<double>(counts.n_tp) / counts.n_gold;
  if (out.precision + out.recall > 0)
    out.f1 = 2 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

std::string metrics_report_csv(const std::vector<std::vector<Quadruple>>& pred,
                               const std::vector<std::vector<Quadruple>>& gold) {
  std::string out = "subtask,precision,recall,f1\n";
  for (SubtaskKind kind : {SubtaskKind::kAcos, SubtaskKind::kCs,
                           SubtaskKind::kTasd, SubtaskKind::kAste}) {
    Prf1 m = prf1(corpus_match_counts(pred, gold, kind));
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s,%.2f,%.2f,%.2f\n", to_string(kind),
                  100.0 * m.precision, 100.0 * m.recall, 100.0 * m.f1);
    out += buf;
  }
  return out;
}

}  // namespace acosqe
