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

#include "riskbn/junction_tree.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"

using namespace riskbn;
using namespace riskbn::testing;

TEST_CASE("triangulating a tree adds no fill-in") {
  // Chain 0-1-2-3.
  std::set<std::pair<int, int>> edges{{0, 1}, {1, 2}, {2, 3}};
  auto tri = triangulate(4, edges);
  CHECK(tri.fill_in.empty());
  CHECK(tri.cliques.size() == 3);
}

TEST_CASE("a four-cycle gets one fill-in edge") {
  std::set<std::pair<int, int>> edges{{0, 1}, {1, 2}, {2, 3}, {0, 3}};
  auto tri = triangulate(4, edges);
  CHECK(tri.fill_in.size() == 1);
  for (auto& c : tri.cliques) CHECK(c.size() == 3);
}

TEST_CASE("the factorized 5-chain still triangulates to a 5-clique") {
  std::mt19937_64 rng(31);
  auto [bfg, ann] = binary_factorize(random_dense_gaussian(5, rng));
  UndirectedGraph moral = moralize(bfg);
  std::map<std::string, int> pos;
  for (std::size_t i = 0; i < moral.ids.size(); ++i) pos[moral.ids[i]] = static_cast<int>(i);
  std::set<std::pair<int, int>> edges;
  for (auto& [a, b] : moral.edges) edges.insert({a, b});
  auto tri = triangulate(static_cast<int>(moral.ids.size()), edges);
  std::size_t largest = 0;
  std::vector<int> big;
  for (auto& c : tri.cliques)
    if (c.size() > largest) {
      largest = c.size();
      big = c;
    }
  CHECK(largest == 5);
  // The 5-clique contains X1, X2, X3 and the two first-stage intermediates.
  std::set<std::string> names;
  for (int v : big) names.insert(moral.ids[v]);
  CHECK(names == std::set<std::string>{"X1", "X2", "X3", "E1", "E2"});
}

TEST_CASE("clique trees satisfy the running intersection property") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    Network net = random_sparse_binary(8, 3, rng);
    DdSettings s;
    DiscreteModel model(net, {}, s);
    UndirectedGraph moral = moralize(net);
    std::set<std::pair<int, int>> edges;
    for (auto& [a, b] : moral.edges)
      edges.insert({std::min(model.var(moral.ids[a]), model.var(moral.ids[b])),
                    std::max(model.var(moral.ids[a]), model.var(moral.ids[b]))});
    auto tri = triangulate(8, edges);
    JunctionTree jt = build_jt(tri.cliques, model.cards());

    // For every variable, the cliques containing it form a connected
    // subtree.
    for (int v = 0; v < 8; ++v) {
      std::vector<int> with;
      for (std::size_t c = 0; c < jt.cliques.size(); ++c)
        if (std::binary_search(jt.cliques[c].begin(), jt.cliques[c].end(), v))
          with.push_back(static_cast<int>(c));
      if (with.size() <= 1) continue;
      // BFS restricted to cliques containing v.
      std::set<int> in(with.begin(), with.end());
      std::set<int> seen{with[0]};
      std::vector<int> stack{with[0]};
      while (!stack.empty()) {
        int c = stack.back();
        stack.pop_back();
        for (int ei : jt.neighbors[c]) {
          const auto& e = jt.tree_edges[ei];
          int other = e.a == c ? e.b : e.a;
          if (in.count(other) && !seen.count(other) &&
              std::binary_search(e.separator.begin(), e.separator.end(), v)) {
            seen.insert(other);
            stack.push_back(other);
          }
        }
      }
      CHECK(seen.size() == in.size());
    }
  }
}

TEST_CASE("chain networks build chains of two-cliques") {
  Network chain;
  chain.nodes.push_back(binary_node("A", {}, {0.3}));
  chain.nodes.push_back(binary_node("B", {"A"}, {0.2, 0.6}));
  chain.nodes.push_back(binary_node("C", {"B"}, {0.4, 0.1}));
  DdSettings s;
  DiscreteModel model(chain, {}, s);
  InferenceResult r;
  jt_single_pass(model, r);

  // Marginals equal direct chain-rule computation.
  auto exact = enumerate_marginals(chain);
  for (auto& [id, probs] : exact) {
    REQUIRE(r.discrete.count(id));
    for (std::size_t k = 0; k < probs.size(); ++k)
      CHECK(r.discrete[id][k] == Catch::Approx(probs[k]).margin(1e-12));
  }
}

TEST_CASE("propagation matches enumeration on random nets up to 12 nodes") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 12; ++trial) {
    int n = 6 + trial % 7;
    Network net = random_sparse_binary(n, 3, rng);
    Evidence ev;
    if (trial % 3 == 1) ev.states["N0"] = "True";
    DdSettings s;
    InferenceResult r = ddjt(net, ev);
    std::map<std::string, std::string> fix(ev.states.begin(), ev.states.end());
    auto exact = enumerate_marginals(net, fix);
    for (auto& [id, probs] : exact)
      for (std::size_t k = 0; k < probs.size(); ++k)
        CHECK(r.discrete[id][k] == Catch::Approx(probs[k]).margin(1e-12));
  }
}

TEST_CASE("calibration holds on every edge after propagation") {
  std::mt19937_64 rng(34);
  Network net = random_sparse_binary(10, 3, rng);
  DdSettings s;
  DiscreteModel model(net, {}, s);
  InferenceResult r;
  jt_single_pass(model, r);
  CHECK(r.residual < 1e-9);
}

TEST_CASE("inconsistent evidence raises") {
  Network net;
  net.nodes.push_back(binary_node("A", {}, {1.0}));  // always False
  net.nodes.push_back(binary_node("B", {"A"}, {0.5, 0.5}));
  Evidence ev;
  ev.states["A"] = "True";
  CHECK_THROWS_AS(ddjt(net, ev), numeric_error);
}

TEST_CASE("convolution and deconvolution through the refinement loop") {
  Network net;
  net.nodes.push_back(continuous_node("X", "Normal(5, 5)"));
  net.nodes.push_back(continuous_node("Y", "Normal(10, 10)"));
  net.nodes.push_back(continuous_node("Z", "X + Y"));

  SECTION("forward: Z has mean 15 and variance near 15") {
    DdSettings s;
    s.dd_iterations = 25;
    InferenceResult r = ddjt(net, {}, s);
    CHECK(r.marginals["Z"].mean() == Catch::Approx(15.0).margin(0.1));
    CHECK(r.marginals["Z"].variance() == Catch::Approx(15.0).epsilon(0.10));
  }

  SECTION("backward: observing Z = 30 updates X to about N(10, 10/3)") {
    DdSettings s;
    s.dd_iterations = 25;
    Evidence ev;
    ev.values["Z"] = 30.0;
    InferenceResult r = ddjt(net, ev, s);
    CHECK(r.marginals["X"].mean() == Catch::Approx(10.0).margin(0.2));
    CHECK(r.marginals["X"].variance() == Catch::Approx(10.0 / 3.0).epsilon(0.15));
  }
}

TEST_CASE("all-discrete networks skip refinement entirely") {
  std::mt19937_64 rng(35);
  Network net = random_sparse_binary(6, 2, rng);
  InferenceResult r = ddjt(net, {});
  CHECK(r.iterations == 1);
}
