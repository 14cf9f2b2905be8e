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

#include "riskbn/region_graph.hpp"
#include "support/builders.hpp"
#include "support/fixtures.hpp"

using namespace riskbn;
using namespace riskbn::testing;

namespace {

std::pair<Network, BfgAnnotation> factorized_chain(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Network dense = random_dense_gaussian(n, rng);
  return binary_factorize(dense);
}

std::vector<int> label_of(const RegionGraph& rg, const std::vector<std::string>& names) {
  std::vector<int> out;
  for (const auto& n : names)
    out.push_back(static_cast<int>(std::find(rg.ids.begin(), rg.ids.end(), n) - rg.ids.begin()));
  std::sort(out.begin(), out.end());
  return out;
}

int find_region(const RegionGraph& rg, const std::vector<std::string>& names, int level) {
  auto want = label_of(rg, names);
  for (std::size_t i = 0; i < rg.regions.size(); ++i)
    if (rg.regions[i].level == level && rg.regions[i].label == want) return static_cast<int>(i);
  return -1;
}

}  // namespace

TEST_CASE("cluster-variation closure of disjoint-overlap triplets is a two-level tree") {
  // Outer regions {E1,X1,X2}, {E2,X3,X4}, {E1,E2,X5} over variables 0..6.
  // ids: X1=0 X2=1 X3=2 X4=3 X5=4 E1=5 E2=6
  RegionGraph rg = cvm({{5, 0, 1}, {6, 2, 3}, {5, 6, 4}});
  CHECK(rg.max_level() == 2);
  auto level2 = rg.level_indices(2);
  REQUIRE(level2.size() == 2);  // {E1} and {E2}
  std::size_t edges = 0;
  for (int i : level2) {
    CHECK(rg.regions[i].label.size() == 1);
    CHECK(rg.regions[i].count == -1);
    edges += rg.regions[i].parents.size();
  }
  CHECK(edges == 4);  // five regions, four edges: singly connected
  for (int i : rg.level_indices(1)) CHECK(rg.regions[i].count == 1);
}

TEST_CASE("a single outer region is its own graph") {
  RegionGraph rg = cvm({{0, 1, 2}});
  REQUIRE(rg.regions.size() == 1);
  CHECK(rg.regions[0].count == 1);
}

TEST_CASE("the full closure of the five-chain triplets adds a third level") {
  auto [bfg, ann] = factorized_chain(5, 101);
  TripletScheme scheme = identify_primary_triplets(bfg, ann);
  identify_interaction_triplets(bfg, ann, scheme);
  std::vector<std::vector<int>> outer;
  for (const auto& t : scheme.primary) outer.push_back(t.label);
  for (const auto& t : scheme.interaction) outer.push_back(t.label);
  RegionGraph rg = cvm(outer);
  CHECK(rg.max_level() == 3);
  // Counting-number recursion holds by construction; spot check: every
  // level-3 region's count equals 1 - sum over its ancestors.
  for (int i : rg.level_indices(3)) {
    std::set<int> anc;
    std::vector<int> stack{i};
    while (!stack.empty()) {
      int r = stack.back();
      stack.pop_back();
      for (int p : rg.regions[r].parents)
        if (anc.insert(p).second) stack.push_back(p);
    }
    int expect = 1;
    for (int a : anc) expect -= rg.regions[a].count;
    CHECK(rg.regions[i].count == expect);
  }
}

TEST_CASE("primary triplets and moral edges of the five-chain") {
  auto [bfg, ann] = factorized_chain(5, 102);
  TripletScheme s = identify_primary_triplets(bfg, ann);
  REQUIRE(s.primary.size() == 6);

  RegionGraph probe;
  probe.ids = topo_order(bfg);
  std::set<std::vector<int>> labels;
  for (const auto& t : s.primary) labels.insert(t.label);
  CHECK(labels.count(label_of(probe, {"X1", "X2", "X3"})));
  CHECK(labels.count(label_of(probe, {"X1", "X2", "E1"})));
  CHECK(labels.count(label_of(probe, {"X1", "X2", "E2"})));
  CHECK(labels.count(label_of(probe, {"X3", "E1", "X4"})));
  CHECK(labels.count(label_of(probe, {"X3", "E2", "E3"})));
  CHECK(labels.count(label_of(probe, {"X4", "E3", "X5"})));

  // Moral edges pair an original with an intermediate: exactly three here.
  REQUIRE(s.moral_edges.size() == 3);
  std::set<std::pair<std::string, std::string>> moral;
  for (auto& [o, e] : s.moral_edges) moral.insert({probe.ids[o], probe.ids[e]});
  CHECK(moral == std::set<std::pair<std::string, std::string>>{
                     {"X3", "E1"}, {"X3", "E2"}, {"X4", "E3"}});
}

TEST_CASE("triplet counts follow the closed forms across chain sizes") {
  for (int n = 5; n <= 10; ++n) {
    auto [bfg, ann] = factorized_chain(n, 200 + n);
    TripletScheme s = identify_primary_triplets(bfg, ann);
    identify_interaction_triplets(bfg, ann, s);
    std::size_t m = static_cast<std::size_t>(n);
    CHECK(s.primary.size() == m - 2 + (m - 2) * (m - 3) / 2);
    CHECK(s.moral_edges.size() == (m - 2) * (m - 3) / 2);
    CHECK(s.interaction.size() == s.moral_edges.size());
  }
}

TEST_CASE("interaction triplets use the shared parent, balancing the root pair") {
  auto [bfg, ann] = factorized_chain(5, 103);
  TripletScheme s = identify_primary_triplets(bfg, ann);
  identify_interaction_triplets(bfg, ann, s);
  REQUIRE(s.interaction.size() == 3);

  RegionGraph probe;
  probe.ids = topo_order(bfg);
  std::set<std::vector<int>> labels;
  for (const auto& t : s.interaction) labels.insert(t.label);

  // The (X4, E3) moral edge has a single shared parent X3.
  CHECK(labels.count(label_of(probe, {"X3", "X4", "E3"})));
  // The two (X3, E*) edges balance X1 and X2: one triplet holds each.
  bool variant_a = labels.count(label_of(probe, {"X1", "X3", "E1"})) &&
                   labels.count(label_of(probe, {"X2", "X3", "E2"}));
  bool variant_b = labels.count(label_of(probe, {"X2", "X3", "E1"})) &&
                   labels.count(label_of(probe, {"X1", "X3", "E2"}));
  CHECK((variant_a || variant_b));
}

TEST_CASE("initial two-level graph carries the mirrored counting numbers") {
  auto [bfg, ann] = factorized_chain(5, 104);
  TripletScheme s = identify_primary_triplets(bfg, ann);
  identify_interaction_triplets(bfg, ann, s);
  RegionGraph rg = rg_init_from_triplets(bfg, ann, s);

  CHECK(rg.level_indices(1).size() == 9);
  CHECK(rg.level_indices(2).size() == 10);

  int root_int = find_region(rg, {"X1", "X2"}, 2);
  REQUIRE(root_int >= 0);
  CHECK(rg.regions[root_int].count == -2);
  for (int i : rg.level_indices(2))
    if (i != root_int) CHECK(rg.regions[i].count == -1);

  // Root-pair decomposition: c(X1X2) = c(X1X3) + c(X2X3).
  int c13 = rg.regions[find_region(rg, {"X1", "X3"}, 2)].count;
  int c23 = rg.regions[find_region(rg, {"X2", "X3"}, 2)].count;
  CHECK(rg.regions[root_int].count == c13 + c23);
}

TEST_CASE("the root-pair counting decomposition holds for n in 5..10") {
  for (int n = 5; n <= 10; ++n) {
    auto [bfg, ann] = factorized_chain(n, 300 + n);
    TripletScheme s = identify_primary_triplets(bfg, ann);
    identify_interaction_triplets(bfg, ann, s);
    RegionGraph rg = rg_init_from_triplets(bfg, ann, s);
    int root_int = find_region(rg, {"X1", "X2"}, 2);
    int r13 = find_region(rg, {"X1", "X3"}, 2);
    int r23 = find_region(rg, {"X2", "X3"}, 2);
    REQUIRE(root_int >= 0);
    REQUIRE(r13 >= 0);
    REQUIRE(r23 >= 0);
    CHECK(rg.regions[root_int].count == rg.regions[r13].count + rg.regions[r23].count);
  }
}

TEST_CASE("intersection classes separate hybrid, cognate and root pairs") {
  auto [bfg, ann] = factorized_chain(5, 105);
  TripletScheme s = identify_primary_triplets(bfg, ann);
  identify_interaction_triplets(bfg, ann, s);
  RegionGraph rg = rg_init_from_triplets(bfg, ann, s);
  auto classes = classify_intersections(rg, bfg, ann);

  int root_int = find_region(rg, {"X1", "X2"}, 2);
  CHECK(classes.at(root_int) == IntersectionClass::Root);
  int c23 = find_region(rg, {"X2", "X3"}, 2);
  CHECK(classes.at(c23) == IntersectionClass::Cognate);
  int h = find_region(rg, {"X3", "E1"}, 2);
  REQUIRE(h >= 0);
  CHECK(classes.at(h) == IntersectionClass::Hybrid);

  // All hybrid intersections carry counting number -1.
  for (auto& [idx, cls] : classes)
    if (cls == IntersectionClass::Hybrid) CHECK(rg.regions[idx].count == -1);
}

TEST_CASE("cognate pruning balances every variable to a unit count") {
  for (int n = 5; n <= 10; ++n) {
    auto [bfg, ann] = factorized_chain(n, 400 + n);
    RegionGraph rg = trc(bfg, ann);
    auto counts = variable_counts(rg);
    for (auto& [v, c] : counts) CHECK(c == 1);
    std::size_t pruned = 0;
    for (const auto& r : rg.regions)
      if (r.pruned) ++pruned;
    CHECK(pruned == static_cast<std::size_t>(n - 2));
    // The root intersection is never pruned.
    int root_int = find_region(rg, {"X1", "X2"}, 2);
    REQUIRE(root_int >= 0);
    CHECK_FALSE(rg.regions[root_int].pruned);
  }
}

TEST_CASE("pruning drops the lower-indexed original from each cognate pair") {
  auto [bfg, ann] = factorized_chain(5, 106);
  TripletScheme s = identify_primary_triplets(bfg, ann);
  identify_interaction_triplets(bfg, ann, s);
  RegionGraph rg = rg_init_from_triplets(bfg, ann, s);
  prune_cognate(rg, bfg, ann);
  for (const auto& r : rg.regions) {
    if (!r.pruned) continue;
    REQUIRE(r.label.size() == 1);
    REQUIRE(r.label_before_prune.size() == 2);
    // The survivor is the higher-indexed member.
    CHECK(r.label[0] == std::max(r.label_before_prune[0], r.label_before_prune[1]));
  }
}

TEST_CASE("structural counts match the closed forms for n in 5..12") {
  struct Expect {
    int n;
    std::size_t level1, intersections, edges;
  } cases[] = {{5, 9, 10, 21}, {6, 16, 17, 38}, {8, 36, 37, 87}};
  for (auto& c : cases) {
    auto [bfg, ann] = factorized_chain(c.n, 500 + c.n);
    RegionGraph rg = trc(bfg, ann);
    auto sc = structural_counts(rg, c.n);
    CHECK(sc.level1 == c.level1);
    CHECK(sc.intersections == c.intersections);
    CHECK(sc.edges == c.edges);
    CHECK(sc.pruned == static_cast<std::size_t>(c.n - 2));
    CHECK(sc.matches_formulas);
  }
  for (int n : {7, 9, 10, 11, 12}) {
    auto [bfg, ann] = factorized_chain(n, 600 + n);
    CHECK(structural_counts(trc(bfg, ann), n).matches_formulas);
  }
}

TEST_CASE("small chains collapse into a single region") {
  auto [bfg, ann] = factorized_chain(4, 107);
  RegionGraph rg = trc(bfg, ann);
  REQUIRE(rg.regions.size() == 1);
  CHECK(rg.regions[0].label.size() == 5);
  CHECK(rg.regions[0].factors.size() == 5);
}

TEST_CASE("entropy balance holds after pruning and fails before") {
  auto [bfg, ann] = factorized_chain(5, 108);
  std::vector<int> cards(8, 2);

  RegionGraph balanced = trc(bfg, ann);
  auto rep = maxent_check(balanced, cards);
  CHECK(rep.balanced);
  CHECK(rep.weighted_region_entropy == Catch::Approx(8.0 * std::log(2.0)).margin(1e-12));

  TripletScheme s = identify_primary_triplets(bfg, ann);
  identify_interaction_triplets(bfg, ann, s);
  RegionGraph unpruned = rg_init_from_triplets(bfg, ann, s);
  CHECK_FALSE(maxent_check(unpruned, cards).balanced);
}

TEST_CASE("entropy balance holds for the pairwise construction on a tree") {
  // Chain A - B - C: outer regions {A,B}, {B,C}; the single separator {B}
  // carries count -1, so all three variables count once.
  RegionGraph rg = cvm({{0, 1}, {1, 2}});
  auto rep = maxent_check(rg, {2, 3, 2});
  CHECK(rep.balanced);
  CHECK(rep.independent_entropy == Catch::Approx(2.0 * std::log(2.0) + std::log(3.0)));
}

TEST_CASE("maxent holds for every chain construction 5..10") {
  for (int n = 5; n <= 10; ++n) {
    auto [bfg, ann] = factorized_chain(n, 700 + n);
    RegionGraph rg = trc(bfg, ann);
    std::vector<int> cards(rg.ids.size(), 3);
    CHECK(maxent_check(rg, cards).balanced);
  }
}

TEST_CASE("join-graph export mirrors the region structure") {
  SECTION("a singly connected graph exports as its own tree") {
    RegionGraph rg = cvm({{5, 0, 1}, {6, 2, 3}, {5, 6, 4}});
    JoinGraph jg = rg_to_join_graph(rg);
    CHECK(jg.clusters.size() == 3);
    CHECK(jg.separators.size() == 2);
    for (auto& s : jg.separators) CHECK(s.full_label.empty());
  }

  SECTION("the five-chain export annotates pruned separators") {
    auto [bfg, ann] = factorized_chain(5, 109);
    RegionGraph rg = trc(bfg, ann);
    JoinGraph jg = rg_to_join_graph(rg);
    CHECK(jg.clusters.size() == 9);
    // One chain edge per intersection parent pair: the root pair has 3
    // parents (2 edges), the other nine have 2 parents (1 edge) each.
    CHECK(jg.separators.size() == 11);
    std::size_t pruned = 0;
    for (auto& s : jg.separators)
      if (!s.full_label.empty()) ++pruned;
    CHECK(pruned == 3);
  }
}

TEST_CASE("the fixture chains build valid region graphs too") {
  auto [net5, ann5] = kappa5_binary();
  RegionGraph rg5 = trc(net5, ann5);
  CHECK(structural_counts(rg5, 5).matches_formulas);
  for (auto& [v, c] : variable_counts(rg5)) CHECK(c == 1);

  auto [net8, ann8] = kappa8_binary();
  RegionGraph rg8 = trc(net8, ann8);
  CHECK(structural_counts(rg8, 8).matches_formulas);
  for (auto& [v, c] : variable_counts(rg8)) CHECK(c == 1);
  std::vector<int> cards(rg8.ids.size(), 2);
  CHECK(maxent_check(rg8, cards).balanced);
}
