// Copyright 2026 The riskbn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "riskbn/expr.hpp"
#include "support/oracles.hpp"

using namespace riskbn;

TEST_CASE("plain sums parse into unit-weight terms") {
  ExprPtr e = parse_expr("X1 + X2 + X3");
  REQUIRE(e->kind == ExprKind::WeightedSum);
  REQUIRE(e->terms.size() == 3);
  for (auto& [c, t] : e->terms) {
    CHECK(c == 1.0);
    CHECK(t->kind == ExprKind::Var);
  }
  CHECK(e->bias == 0.0);
}

TEST_CASE("distribution with linear location parses") {
  ExprPtr e = parse_expr("Normal(2.7 + 0.15*X1, 8.91)");
  REQUIRE(e->kind == ExprKind::Dist);
  CHECK(e->dist == DistName::Normal);
  REQUIRE(e->params.size() == 2);
  CHECK(e->params[0]->kind == ExprKind::WeightedSum);
  CHECK(e->params[1]->kind == ExprKind::Constant);
  CHECK(e->params[1]->value == Catch::Approx(8.91));
}

TEST_CASE("if() builds a Boolean-guarded expression") {
  ExprPtr e = parse_expr("if(E0, F_prev, T1)");
  REQUIRE(e->kind == ExprKind::Partitioned);
  CHECK(e->guard == "E0");
  REQUIRE(e->cases.size() == 2);
  CHECK(e->cases[0].first == "True");
  CHECK(e->cases[1].first == "False");
}

TEST_CASE("syntax errors carry a position") {
  CHECK_THROWS_AS(parse_expr("X1 + "), parse_error);
  CHECK_THROWS_AS(parse_expr("Frobnicate(1)"), parse_error);
  CHECK_THROWS_AS(parse_expr("Normal(1)"), parse_error);  // arity
}

TEST_CASE("weighted distribution sums canonicalize into mixtures") {
  ExprPtr e = parse_expr("0.2*Gamma(5, 1.5) + 0.3*Normal(25, 2) + 0.4*Normal(50, 3) + 0.1*Gamma(100, 2)");
  REQUIRE(e->kind == ExprKind::Mixture);
  REQUIRE(e->weights.size() == 4);
  CHECK(e->weights[0] == Catch::Approx(0.2));
  CHECK(e->weights[3] == Catch::Approx(0.1));
}

TEST_CASE("mixture weights must sum to one") {
  CHECK_THROWS_AS(parse_expr("0.5*Normal(0,1) + 0.6*Normal(5,1)"), structural_error);
}

namespace {

ExprPtr random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_real_distribution<double> coeff(-3.0, 3.0);
  std::uniform_int_distribution<int> pick(0, depth > 0 ? 3 : 1);
  switch (pick(rng)) {
    case 0: return make_const(std::round(coeff(rng) * 16.0) / 16.0);
    case 1: return make_var("X" + std::to_string(rng() % 5 + 1));
    case 2: {
      std::vector<std::pair<double, ExprPtr>> terms;
      int k = 2 + static_cast<int>(rng() % 3);
      for (int i = 0; i < k; ++i)
        terms.emplace_back(std::round(coeff(rng) * 16.0) / 16.0, make_var("X" + std::to_string(rng() % 5 + 1)));
      auto e = std::make_shared<Expr>();
      e->kind = ExprKind::WeightedSum;
      e->terms = terms;
      e->bias = std::round(coeff(rng) * 16.0) / 16.0;
      return canonicalize(e);
    }
    default:
      return make_dist(DistName::Normal, {random_expr(rng, 0), make_const(1.0 + std::fabs(coeff(rng)))});
  }
}

}  // namespace

TEST_CASE("printer output reparses to the same expression") {
  std::mt19937_64 rng(20260810);
  for (int trial = 0; trial < 200; ++trial) {
    ExprPtr e = canonicalize(random_expr(rng, 1));
    ExprPtr back = parse_expr(print_expr(e));
    INFO(print_expr(e));
    CHECK(expr_equal(e, back));
  }
}

TEST_CASE("pair-block factorization matches the unfactored sum") {
  int counter = 0;
  auto fresh = [&counter] { return "B" + std::to_string(++counter); };

  SECTION("three-parent sum produces one intermediate") {
    ExprPtr e = parse_expr("0.5*X1 + 2*X2 + 0.25*X3");
    BfResult bf = bf_expression(e, fresh);
    REQUIRE(bf.intermediates.size() == 1);
    // Block 1 pairs the first two terms, the rewrite adds the third.
    auto vars = free_vars(bf.intermediates[0].expr);
    CHECK(vars == std::set<std::string>{"X1", "X2"});
    auto rvars = free_vars(bf.rewritten);
    CHECK(rvars == std::set<std::string>{"B1", "X3"});
  }

  SECTION("two-parent sum is untouched") {
    ExprPtr e = parse_expr("X1 + X2");
    BfResult bf = bf_expression(e, fresh);
    CHECK(bf.intermediates.empty());
    CHECK(expr_equal(bf.rewritten, canonicalize(e)));
  }

  SECTION("five-term sum gives three blocks and identical values") {
    ExprPtr e = parse_expr("1.5 + 0.3*X1 + 0.7*X2 - 1.1*X3 + 2*X4 + 0.4*X5");
    BfResult bf = bf_expression(e, fresh);
    REQUIRE(bf.intermediates.size() == 3);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
      Assignment a;
      for (int i = 1; i <= 5; ++i) a.values["X" + std::to_string(i)] = u(rng);
      double direct = eval_value(e, a);
      Assignment chained = a;
      for (auto& block : bf.intermediates)
        chained.values[block.name] = eval_value(block.expr, chained);
      double composed = eval_value(bf.rewritten, chained);
      REQUIRE(composed == Catch::Approx(direct).margin(1e-12));
    }
  }

  SECTION("wide non-sum expressions are rejected") {
    ExprPtr e = make_product(make_product(make_var("X1"), make_var("X2")), make_var("X3"));
    CHECK_THROWS_AS(bf_expression(e, fresh), structural_error);
  }
}

TEST_CASE("evaluation of values and densities") {
  Assignment a;
  a.values["X1"] = 2.0;
  a.values["X2"] = 3.0;
  CHECK(eval_value(parse_expr("X1 + X2"), a) == Catch::Approx(5.0));

  auto d = eval_density(parse_expr("Normal(2.7 + 0.15*X1, 8.91)"), a);
  REQUIRE(d.comps.size() == 1);
  CHECK(d.comps[0].p0 == Catch::Approx(3.0));
  CHECK(d.comps[0].p1 == Catch::Approx(8.91));

  auto ex = eval_density(parse_expr("Exponential(1)"), {});
  CHECK(ex.pdf(0.0) == Catch::Approx(1.0));

  Assignment missing;
  missing.values["X1"] = 1.0;
  CHECK_THROWS_AS(eval_value(parse_expr("X1 + X2"), missing), structural_error);
  CHECK_THROWS_AS(eval_density(parse_expr("Normal(0, -1)"), {}), numeric_error);
}

TEST_CASE("geometric counts failures before the first success") {
  Dist g{DistName::Geometric, 0.5, 0.0};
  CHECK(g.pdf(0.0) == Catch::Approx(0.5));
  CHECK(g.pdf(1.0) == Catch::Approx(0.25));
  CHECK(g.mean() == Catch::Approx(1.0));
}

TEST_CASE("gamma uses the shape/scale convention") {
  Dist g{DistName::Gamma, 100.0, 2.0};
  CHECK(g.mean() == Catch::Approx(200.0));
  CHECK(g.variance() == Catch::Approx(400.0));
}

TEST_CASE("mixture densities integrate to one on their truncated support") {
  ExprPtr e = parse_expr("0.2*Gamma(5, 1.5) + 0.3*Normal(25, 2) + 0.4*Normal(50, 3) + 0.1*Gamma(100, 2)");
  auto d = eval_density(e, {});
  auto [lo, hi] = d.support(1e-9);
  double integral = riskbn::testing::simpson([&](double x) { return d.pdf(x); }, lo, hi, 20000);
  CHECK(integral == Catch::Approx(1.0).margin(1e-6));
  CHECK(d.mean() == Catch::Approx(49.0));
}
