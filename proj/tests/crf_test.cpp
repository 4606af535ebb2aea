#include <doctest.h>

#include <cmath>
#include <vector>

#include "acosqe/corpus.hpp"
#include "acosqe/crf.hpp"
#include "acosqe/errors.hpp"
#include "acosqe/gradcheck.hpp"
#include "acosqe/param_store.hpp"
#include "acosqe/rng.hpp"

using namespace acosqe;

TEST_CASE("log partition for one position with zero transitions is logsumexp") {
  // emissions [[1,2]], all transitions 0: logZ = log(e^1 + e^2) = 2.313262
  Tensor em = Tensor::from({1, 2}, {1.0, 2.0});
  Tensor tr = Tensor::zeros({4, 4});
  CHECK(crf_log_partition(em, tr).item() ==
        doctest::Approx(2.313262).epsilon(1e-6));
}

TEST_CASE("uniform scores give nll = n log L") {
  // zero emissions and transitions, L=3, n=2: every path scores 0,
  // logZ = log 9, nll = 2 log 3 = 2.197225 for any tag path
  Tensor em = Tensor::zeros({2, 3});
  Tensor tr = Tensor::zeros({5, 5});
  CHECK(crf_nll(em, tr, {0, 2}).item() ==
        doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("forward recursion matches brute-force enumeration") {
  Rng rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    int n = rng.uniform_int(1, 5);
    int labels = rng.uniform_int(2, 4);
    std::vector<double> ev(n * labels), tv((labels + 2) * (labels + 2));
    for (auto& v : ev) v = rng.normal();
    for (auto& v : tv) v = rng.normal();
    Tensor em = Tensor::from({n, labels}, ev);
    Tensor tr = Tensor::from({labels + 2, labels + 2}, tv);
    double want = brute_force_log_partition(em, tr);
    CHECK(crf_log_partition(em, tr).item() == doctest::Approx(want).epsilon(1e-8));
    CHECK(viterbi_decode(em, tr) == brute_force_best_path(em, tr));
  }
}

TEST_CASE("brute force refuses oversized label spaces") {
  Tensor em = Tensor::zeros({10, 5});
  Tensor tr = Tensor::zeros({7, 7});
  CHECK_THROWS_AS(brute_force_log_partition(em, tr), TooLargeError);
}

TEST_CASE("viterbi breaks ties toward the lowest label index") {
  Tensor em = Tensor::zeros({3, 4});
  Tensor tr = Tensor::zeros({6, 6});
  CHECK(viterbi_decode(em, tr) == std::vector<int>{0, 0, 0});
}

TEST_CASE("crf nll gradients match finite differences") {
  ParamStore store;
  Rng rng(17);
  int n = 4, labels = 3;
  store.create_uniform("em", {n, labels}, rng, 0.7);
  store.create_uniform("tr", {labels + 2, labels + 2}, rng, 0.7);
  std::vector<int> tags = {0, 2, 1, 1};
  double err = check_gradients(
      [&](ParamLeaves& l) { return crf_nll(l.get("em"), l.get("tr"), tags); },
      store);
  CHECK(err < 1e-5);
}

TEST_CASE("bio constraint matrix only blocks illegal I-transitions") {
  int k_max = 2;
  int labels = tag_count(k_max);
  Tensor c = bio_constraint_matrix(k_max);
  REQUIRE(c.rows() == labels + 2);
  REQUIRE(c.cols() == labels + 2);
  auto at = [&](int from, int to) { return c.data()[from * c.cols() + to]; };

  int b_ac1 = tag_index(TagKind::kAspect, true, 1);
  int i_ac1 = tag_index(TagKind::kAspect, false, 1);
  int i_ot1 = tag_index(TagKind::kOpinion, false, 1);
  int i_ac2 = tag_index(TagKind::kAspect, false, 2);

  CHECK(at(b_ac1, i_ac1) == 0.0);              // B-AC-1 -> I-AC-1 legal
  CHECK(at(i_ac1, i_ac1) == 0.0);              // I extends itself
  CHECK(at(b_ac1, i_ot1) == -1e4);             // wrong kind
  CHECK(at(b_ac1, i_ac2) == -1e4);             // wrong suffix
  CHECK(at(tag_o(), i_ac1) == -1e4);           // I straight after O
  CHECK(at(crf_start_index(labels), i_ac1) == -1e4);  // I at sentence start
  CHECK(at(tag_o(), b_ac1) == 0.0);
  CHECK(at(b_ac1, crf_end_index(labels)) == 0.0);

  SUBCASE("viterbi under the constraint never emits dangling I") {
    Rng rng(88);
    for (int trial = 0; trial < 10; ++trial) {
      int n = rng.uniform_int(2, 6);
      std::vector<double> ev(n * labels);
      for (auto& v : ev) v = 3.0 * rng.normal();
      Tensor em = Tensor::from({n, labels}, ev);
      auto path = viterbi_decode(em, c);
      for (int i = 0; i < n; ++i) {
        int t = path[i];
        if (t == tag_o()) continue;
        if ((t - 1) % 2 == 0) continue;  // B tag
        int prev = i > 0 ? path[i - 1] : -1;
        // I must continue a same-kind same-suffix segment
        CHECK(prev != -1);
        CHECK((prev == t || prev == t - 1));
      }
    }
  }
}
