#include <doctest.h>

#include <string>
#include <vector>

#include "acosqe/corpus.hpp"
#include "acosqe/errors.hpp"
#include "acosqe/metrics.hpp"
#include "acosqe/rng.hpp"

using namespace acosqe;

namespace {

Quadruple quad(const char* cat, std::optional<Span> as, Span ot, Polarity sp) {
  return {cat, as, ot, sp};
}

}  // namespace

TEST_CASE("prf1 fixture: 1 hit over 2 predicted and 2 gold") {
  MatchCounts c{1, 2, 2};
  Prf1 r = prf1(c);
  CHECK(r.precision == doctest::Approx(0.5));
  CHECK(r.recall == doctest::Approx(0.5));
  CHECK(r.f1 == doctest::Approx(0.5));
}

TEST_CASE("prf1 degenerate cases collapse to zero") {
  CHECK(prf1({0, 0, 0}).f1 == 0.0);
  CHECK(prf1({0, 0, 3}).precision == 0.0);
  CHECK(prf1({0, 3, 0}).recall == 0.0);
}

TEST_CASE("exact match requires every projected element to agree") {
  std::vector<Quadruple> gold = {
      quad("scenery", Span{1, 1}, Span{3, 3}, Polarity::kPositive)};
  SUBCASE("full agreement") {
    auto c = exact_match_counts(gold, gold, SubtaskKind::kAcos);
    CHECK(c.n_tp == 1);
    CHECK(c.n_pred == 1);
    CHECK(c.n_gold == 1);
  }
  SUBCASE("polarity flip breaks every subtask: all projections keep it") {
    std::vector<Quadruple> pred = {
        quad("scenery", Span{1, 1}, Span{3, 3}, Polarity::kNegative)};
    for (auto k : {SubtaskKind::kAcos, SubtaskKind::kCs, SubtaskKind::kTasd,
                   SubtaskKind::kAste})
      CHECK(exact_match_counts(pred, gold, k).n_tp == 0);
  }
  SUBCASE("opinion mismatch leaves cs and tasd intact") {
    std::vector<Quadruple> pred = {
        quad("scenery", Span{1, 1}, Span{2, 2}, Polarity::kPositive)};
    CHECK(exact_match_counts(pred, gold, SubtaskKind::kAcos).n_tp == 0);
    CHECK(exact_match_counts(pred, gold, SubtaskKind::kCs).n_tp == 1);
    CHECK(exact_match_counts(pred, gold, SubtaskKind::kTasd).n_tp == 1);
  }
  SUBCASE("implicit and explicit aspects differ") {
    std::vector<Quadruple> pred = {
        quad("scenery", std::nullopt, Span{3, 3}, Polarity::kPositive)};
    CHECK(exact_match_counts(pred, gold, SubtaskKind::kAcos).n_tp == 0);
    CHECK(exact_match_counts(pred, gold, SubtaskKind::kCs).n_tp == 1);
  }
}

TEST_CASE("projection deduplicates identical tuples") {
  std::vector<Quadruple> pred = {
      quad("price", std::nullopt, Span{2, 2}, Polarity::kNegative),
      quad("price", std::nullopt, Span{4, 4}, Polarity::kNegative)};
  std::vector<Quadruple> gold = {
      quad("price", std::nullopt, Span{2, 2}, Polarity::kNegative)};
  // both predictions project to the same (category, polarity) pair
  auto c = exact_match_counts(pred, gold, SubtaskKind::kCs);
  CHECK(c.n_pred == 1);
  CHECK(c.n_tp == 1);
}

TEST_CASE("projection monotonicity and symmetry hold on random quad sets") {
  Rng rng(321);
  const char* cats[] = {"a", "b", "c"};
  for (int trial = 0; trial < 1000; ++trial) {
    auto draw = [&](int n) {
      std::vector<Quadruple> out;
      for (int i = 0; i < n; ++i) {
        std::optional<Span> as;
        if (rng.uniform_int(0, 1))
          as = Span{rng.uniform_int(0, 3), rng.uniform_int(3, 5)};
        out.push_back(quad(cats[rng.uniform_int(0, 2)], as,
                           Span{rng.uniform_int(0, 3), rng.uniform_int(3, 5)},
                           static_cast<Polarity>(rng.uniform_int(0, 2))));
      }
      return out;
    };
    auto pred = draw(rng.uniform_int(1, 3));
    auto gold = draw(rng.uniform_int(1, 3));
    // any quad matched at the strict level stays matched after projection
    for (const auto& q : pred) {
      std::vector<Quadruple> one = {q};
      if (exact_match_counts(one, gold, SubtaskKind::kAcos).n_tp == 1)
        for (auto k : {SubtaskKind::kCs, SubtaskKind::kTasd, SubtaskKind::kAste})
          CHECK(exact_match_counts(one, gold, k).n_tp == 1);
    }
    // projection can only merge predictions, never mint new ones
    auto fwd = exact_match_counts(pred, gold, SubtaskKind::kAcos);
    auto cs = exact_match_counts(pred, gold, SubtaskKind::kCs);
    CHECK(cs.n_pred <= fwd.n_pred);
    CHECK(cs.n_gold <= fwd.n_gold);
    if (fwd.n_tp > 0) CHECK(cs.n_tp > 0);
    // and swapping the roles mirrors precision and recall
    auto rev = exact_match_counts(gold, pred, SubtaskKind::kAcos);
    CHECK(fwd.n_tp == rev.n_tp);
    CHECK(fwd.n_pred == rev.n_gold);
    CHECK(prf1(fwd).precision == doctest::Approx(prf1(rev).recall));
  }
}

TEST_CASE("corpus counts accumulate across sentences") {
  std::vector<std::vector<Quadruple>> pred = {
      {quad("a", std::nullopt, Span{0, 0}, Polarity::kPositive)},
      {quad("b", std::nullopt, Span{1, 1}, Polarity::kNegative),
       quad("c", std::nullopt, Span{2, 2}, Polarity::kNeutral)}};
  std::vector<std::vector<Quadruple>> gold = {
      {quad("a", std::nullopt, Span{0, 0}, Polarity::kPositive)},
      {quad("b", std::nullopt, Span{1, 1}, Polarity::kPositive)}};
  auto c = corpus_match_counts(pred, gold, SubtaskKind::kAcos);
  CHECK(c.n_tp == 1);
  CHECK(c.n_pred == 3);
  CHECK(c.n_gold == 2);
  SUBCASE("size mismatch is refused") {
    pred.pop_back();
    CHECK_THROWS_AS(corpus_match_counts(pred, gold, SubtaskKind::kAcos),
                    ShapeMismatchError);
  }
}

TEST_CASE("csv report prints percentages for all four subtasks") {
  std::vector<std::vector<Quadruple>> both = {
      {quad("a", Span{0, 0}, Span{1, 1}, Polarity::kPositive),
       quad("b", std::nullopt, Span{2, 2}, Polarity::kNegative)}};
  std::string csv = metrics_report_csv(both, both);
  CHECK(csv ==
        "subtask,precision,recall,f1\n"
        "acos,100.00,100.00,100.00\n"
        "cs,100.00,100.00,100.00\n"
        "tasd,100.00,100.00,100.00\n"
        "aste,100.00,100.00,100.00\n");
}

TEST_CASE("subtask names round trip") {
  for (auto k : {SubtaskKind::kAcos, SubtaskKind::kCs, SubtaskKind::kTasd,
                 SubtaskKind::kAste})
    CHECK(subtask_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(subtask_from_string("nope"), DataError);
}
