#include <doctest.h>

#include <cmath>
#include <vector>

#include "acosqe/errors.hpp"
#include "acosqe/gradcheck.hpp"
#include "acosqe/param_store.hpp"
#include "acosqe/positional.hpp"
#include "acosqe/rng.hpp"

using namespace acosqe;

TEST_CASE("srd distance is zero inside the span and grows outward") {
  Span e{4, 5};
  CHECK(srd_distance(4, e) == 0);
  CHECK(srd_distance(5, e) == 0);
  CHECK(srd_distance(1, e) == 3);
  CHECK(srd_distance(8, e) == 3);
}

TEST_CASE("context mask keeps tokens within srd of the entity") {
  // entity (4,5), srd 3, 10 tokens: distance at i=1 is 3 -> in, i=0 is 4 -> out
  auto cm = context_mask(10, Span{4, 5}, 3);
  REQUIRE(cm.size() == 10);
  CHECK(cm[0] == 0.0);
  CHECK(cm[1] == 1.0);
  CHECK(cm[4] == 1.0);
  CHECK(cm[8] == 1.0);
  CHECK(cm[9] == 0.0);

  SUBCASE("implicit aspect keeps everything") {
    auto all = context_mask(5, std::nullopt, 3);
    for (double v : all) CHECK(v == 1.0);
  }
  SUBCASE("empty sequence is refused") {
    CHECK_THROWS_AS(context_mask(0, std::nullopt, 3), EmptySequenceError);
  }
  SUBCASE("span outside the sequence is refused") {
    CHECK_THROWS_AS(context_mask(4, Span{4, 5}, 3), SpanOutOfRangeError);
  }
}

TEST_CASE("context weight fades with distance in figure-consistent mode") {
  // entity (4,5), srd 3, max_len 10: i=0 has d=4, raw=(4-3+1)/10=0.2
  auto lit = context_weight(10, Span{4, 5}, 3, 10, CwMode::kLiteral);
  auto fig = context_weight(10, Span{4, 5}, 3, 10, CwMode::kFigureConsistent);
  CHECK(lit[0] == doctest::Approx(0.2));
  CHECK(fig[0] == doctest::Approx(0.8));
  CHECK(lit[4] == 1.0);  // inside the span
  CHECK(fig[4] == 1.0);
  CHECK(lit[1] == 1.0);  // within srd
  CHECK(fig[1] == 1.0);

  SUBCASE("figure-consistent weights never increase with distance") {
    auto w = context_weight(40, Span{20, 20}, 3, 64, CwMode::kFigureConsistent);
    for (int i = 20; i + 1 < 40; ++i) CHECK(w[i + 1] <= w[i] + 1e-12);
    for (int i = 20; i > 0; --i) CHECK(w[i - 1] <= w[i] + 1e-12);
  }
  SUBCASE("max_len must cover the sequence") {
    CHECK_THROWS_AS(context_weight(10, Span{4, 5}, 3, 9, CwMode::kLiteral),
                    NumericError);
  }
  SUBCASE("implicit aspect keeps everything") {
    auto w = context_weight(6, std::nullopt, 3, 10, CwMode::kFigureConsistent);
    for (double v : w) CHECK(v == 1.0);
  }
}

TEST_CASE("fuse modes zero out the disabled half") {
  int n = 3, d = 2, out = 2;
  ParamStore store;
  Rng rng(9);
  store.create_uniform("h", {n, d}, rng, 0.8);
  store.create_uniform("proj", {2 * d, out}, rng, 0.8);
  ParamLeaves leaves(store);
  std::vector<double> cm = {1.0, 0.0, 1.0};
  Tensor cw = Tensor::from({n}, {0.9, 0.5, 0.1});

  Tensor both = fuse_features(leaves.get("h"), cm, cw, leaves.get("proj"),
                              FuseMode::kFusion);
  REQUIRE(both.rows() == n);
  REQUIRE(both.cols() == out);

  // cm-only must not react to cw changes
  Tensor cw2 = Tensor::from({n}, {0.1, 0.9, 0.5});
  Tensor a = fuse_features(leaves.get("h"), cm, cw, leaves.get("proj"),
                           FuseMode::kCmOnly);
  Tensor b = fuse_features(leaves.get("h"), cm, cw2, leaves.get("proj"),
                           FuseMode::kCmOnly);
  for (int i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);

  // cw-only must not react to cm changes
  std::vector<double> cm2 = {0.0, 1.0, 0.0};
  Tensor c = fuse_features(leaves.get("h"), cm, cw, leaves.get("proj"),
                           FuseMode::kCwOnly);
  Tensor e = fuse_features(leaves.get("h"), cm2, cw, leaves.get("proj"),
                           FuseMode::kCwOnly);
  for (int i = 0; i < c.size(); ++i) CHECK(c.data()[i] == e.data()[i]);

  SUBCASE("gradients flow through the fusion") {
    double err = check_gradients(
        [&](ParamLeaves& l) {
          Tensor cwl = Tensor::from({n}, {0.9, 0.5, 0.1});
          return sum_squares(fuse_features(l.get("h"), cm, cwl, l.get("proj"),
                                           FuseMode::kFusion));
        },
        store);
    CHECK(err < 1e-5);
  }
}

TEST_CASE("rk4 integrates exponential decay to e^-1") {
  OdeConfig cfg;
  cfg.steps = 100;
  Tensor z0 = Tensor::from({1}, {1.0});
  auto rhs = [](const Tensor& z, double) { return scale(z, -1.0); };
  Tensor z1 = ode_evolve(z0, rhs, cfg);
  CHECK(std::abs(z1.data()[0] - 0.367879441) < 1e-6);
}

TEST_CASE("rk4 rotates a vector by the matrix field") {
  // dz/dt = [[0,-1],[1,0]] z gives z(t) = (cos t, sin t): a quarter turn
  // carries (1,0) to (0,1)
  OdeConfig cfg;
  cfg.t1 = M_PI / 2;
  cfg.steps = 100;
  Tensor z0 = Tensor::from({2}, {1.0, 0.0});
  auto rhs = [](const Tensor& z, double) {
    return Tensor::from({2}, {-z.data()[1], z.data()[0]});
  };
  Tensor z1 = ode_evolve(z0, rhs, cfg);
  CHECK(std::abs(z1.data()[0] - 0.0) < 1e-5);
  CHECK(std::abs(z1.data()[1] - 1.0) < 1e-5);
}

TEST_CASE("rk4 halving the step shrinks the error by about sixteen") {
  Tensor z0 = Tensor::from({1}, {1.0});
  auto rhs = [](const Tensor& z, double) { return scale(z, -1.0); };
  auto err_at = [&](int steps) {
    OdeConfig cfg;
    cfg.steps = steps;
    return std::abs(ode_evolve(z0, rhs, cfg).data()[0] - std::exp(-1.0));
  };
  double e8 = err_at(8), e16 = err_at(16);
  CHECK(e8 / e16 >= 8.0);  // fourth order: the ideal factor is 16
}

TEST_CASE("adaptive solver matches the fixed-step result") {
  OdeConfig fixed;
  fixed.steps = 200;
  OdeConfig ada;
  ada.adaptive = true;
  ada.rtol = 1e-8;
  ada.atol = 1e-10;
  Tensor z0 = Tensor::from({2}, {1.0, 0.25});
  auto rhs = [](const Tensor& z, double t) {
    return Tensor::from({2}, {-z.data()[0] + 0.1 * std::sin(t), -0.5 * z.data()[1]});
  };
  Tensor a = ode_evolve(z0, rhs, fixed);
  Tensor b = ode_evolve(z0, rhs, ada);
  CHECK(std::abs(a.data()[0] - b.data()[0]) < 1e-6);
  CHECK(std::abs(a.data()[1] - b.data()[1]) < 1e-6);

  SUBCASE("step budget is enforced") {
    OdeConfig tight;
    tight.adaptive = true;
    tight.rtol = 1e-13;
    tight.atol = 1e-15;
    tight.max_steps = 3;
    CHECK_THROWS_AS(ode_evolve(z0, rhs, tight), TooLargeError);
  }
}

TEST_CASE("ode evolution is differentiable through the solver") {
  ParamStore store;
  Rng rng(23);
  int s = 3, hidden = 5;
  store.create_uniform("z0", {s}, rng, 0.5);
  store.create_uniform("w1", {hidden, s + 1}, rng, 0.6);
  store.create_uniform("b1", {hidden}, rng, 0.2);
  store.create_uniform("w2", {s, hidden}, rng, 0.6);
  store.create_uniform("b2", {s}, rng, 0.2);
  OdeConfig cfg;
  cfg.steps = 4;
  double err = check_gradients(
      [&](ParamLeaves& l) {
        OdeMlp field{l.get("w1"), l.get("b1"), l.get("w2"), l.get("b2")};
        auto rhs = [&](const Tensor& z, double t) { return field(z, t); };
        return sum_squares(ode_evolve(l.get("z0"), rhs, cfg));
      },
      store);
  CHECK(err < 1e-4);
}

TEST_CASE("context weight evolution modulates and stays differentiable") {
  ParamStore store;
  Rng rng(61);
  int s = 3, hidden = 4, n = 4;
  store.create_uniform("lift_w", {s}, rng, 0.5);
  store.create_uniform("lift_b", {s}, rng, 0.2);
  store.create_uniform("w1", {hidden, s + 1}, rng, 0.5);
  store.create_uniform("b1", {hidden}, rng, 0.2);
  store.create_uniform("w2", {s, hidden}, rng, 0.5);
  store.create_uniform("b2", {s}, rng, 0.2);
  store.create_uniform("readout_w", {s}, rng, 0.5);
  store.create_uniform("readout_b", {1}, rng, 0.2);
  OdeConfig cfg;
  cfg.steps = 3;

  Tensor cw = Tensor::from({n}, {1.0, 0.8, 0.3, 0.0});
  ParamLeaves l2(store);
  OdeContextParams p2{l2.get("lift_w"), l2.get("lift_b"),
                      OdeMlp{l2.get("w1"), l2.get("b1"), l2.get("w2"),
                             l2.get("b2")},
                      l2.get("readout_w"), l2.get("readout_b")};
  Tensor out = evolve_context_weights(cw, p2, cfg);
  REQUIRE(out.size() == n);
  // sigmoid modulation keeps the sign and the zero
  for (int i = 0; i < n; ++i) {
    CHECK(out.data()[i] >= 0.0);
    CHECK(out.data()[i] <= cw.data()[i] + 1e-12);
  }
  CHECK(out.data()[3] == 0.0);

  double err = check_gradients(
      [&](ParamLeaves& l) {
        OdeContextParams pp{l.get("lift_w"), l.get("lift_b"),
                            OdeMlp{l.get("w1"), l.get("b1"), l.get("w2"),
                                   l.get("b2")},
                            l.get("readout_w"), l.get("readout_b")};
        Tensor cwl = Tensor::from({n}, {1.0, 0.8, 0.3, 0.0});
        return sum_squares(evolve_context_weights(cwl, pp, cfg));
      },
      store);
  CHECK(err < 1e-4);
}
