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

#pragma once

// Region-graph machinery: generic cluster-variation construction, counting
// numbers, the triplet construction for factorized chain graphs (primary and
// interaction triplets, two-level initialization, cognate-intersection
// pruning), entropy balance checks, and a join-graph export.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "riskbn/common.hpp"
#include "riskbn/network.hpp"

namespace riskbn {

struct Region {
  std::vector<int> label;   // sorted variable ids
  int level = 1;            // 1-based
  int count = 1;            // counting number
  std::vector<int> parents;
  std::vector<int> children;
  std::vector<int> factors;  // node/factor indices multiplied into this region
  bool pruned = false;
  std::vector<int> label_before_prune;
};

struct RegionGraph {
  std::vector<Region> regions;
  std::vector<std::string> ids;  // variable id names, indexed by variable
  int root_triplet = -1;         // index of the level-1 region holding the chain root

  std::vector<int> level_indices(int level) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < regions.size(); ++i)
      if (regions[i].level == level) out.push_back(static_cast<int>(i));
    return out;
  }
  int max_level() const {
    int m = 0;
    for (const auto& r : regions) m = std::max(m, r.level);
    return m;
  }
  std::string label_name(const std::vector<int>& label) const {
    std::string s;
    for (int v : label) s += ids.empty() ? "v" + std::to_string(v) : ids[v];
    return s;
  }
};

// ---------------------------------------------------------------------------
// Counting numbers: c_R = 1 - sum over all ancestors.

inline void counting_numbers(RegionGraph& rg) {
  // Process levels top-down; ancestors are collected through parent edges.
  std::vector<std::vector<int>> order_by_level(rg.max_level() + 1);
  for (std::size_t i = 0; i < rg.regions.size(); ++i)
    order_by_level[rg.regions[i].level].push_back(static_cast<int>(i));
  std::vector<std::set<int>> ancestors(rg.regions.size());
  for (int level = 1; level <= rg.max_level(); ++level)
    for (int r : order_by_level[level]) {
      for (int p : rg.regions[r].parents) {
        ancestors[r].insert(p);
        ancestors[r].insert(ancestors[p].begin(), ancestors[p].end());
      }
      int c = 1;
      for (int a : ancestors[r]) c -= rg.regions[a].count;
      rg.regions[r].count = c;
    }
}

inline std::map<int, int> variable_counts(const RegionGraph& rg) {
  std::map<int, int> out;
  for (const auto& r : rg.regions)
    for (int v : r.label) out[v] += r.count;
  return out;
}

// ---------------------------------------------------------------------------
// Generic cluster-variation construction: close the outer regions under
// intersection level by level, discarding any candidate that is a subset of
// another candidate on the same level; edges run between consecutive levels
// by containment.

inline RegionGraph cvm(const std::vector<std::vector<int>>& outer, int max_levels = 0) {
  RegionGraph rg;
  std::set<std::vector<int>> seen;
  for (auto label : outer) {
    std::sort(label.begin(), label.end());
    label.erase(std::unique(label.begin(), label.end()), label.end());
    for (const auto& other : outer) {
      std::vector<int> o = other;
      std::sort(o.begin(), o.end());
      if (o != label && std::includes(o.begin(), o.end(), label.begin(), label.end()))
        throw structural_error("outer regions must not be subsets of one another");
    }
    if (!seen.insert(label).second) continue;
    Region r;
    r.label = label;
    r.level = 1;
    rg.regions.push_back(std::move(r));
  }

  int level = 1;
  while (max_levels <= 0 || level < max_levels) {
    auto current = rg.level_indices(level);
    if (current.size() < 2) break;
    // Candidate labels: pairwise intersections within the current level.
    std::set<std::vector<int>> candidates;
    for (std::size_t i = 0; i < current.size(); ++i)
      for (std::size_t j = i + 1; j < current.size(); ++j) {
        std::vector<int> inter;
        const auto& a = rg.regions[current[i]].label;
        const auto& b = rg.regions[current[j]].label;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
        if (!inter.empty() && !seen.count(inter)) candidates.insert(inter);
      }
    // Discard candidates that are subsets of other candidates.
    std::vector<std::vector<int>> kept;
    for (const auto& c : candidates) {
      bool subset = false;
      for (const auto& d : candidates)
        if (c != d && std::includes(d.begin(), d.end(), c.begin(), c.end())) subset = true;
      if (!subset) kept.push_back(c);
    }
    if (kept.empty()) break;
    for (const auto& label : kept) {
      Region r;
      r.label = label;
      r.level = level + 1;
      int self = static_cast<int>(rg.regions.size());
      for (int p : current)
        if (std::includes(rg.regions[p].label.begin(), rg.regions[p].label.end(), label.begin(),
                          label.end())) {
          r.parents.push_back(p);
          rg.regions[p].children.push_back(self);
        }
      seen.insert(label);
      rg.regions.push_back(std::move(r));
    }
    ++level;
  }
  counting_numbers(rg);
  return rg;
}

// ---------------------------------------------------------------------------
// Triplet identification on a factorized chain graph.

struct Triplet {
  int child;                 // variable owning the CPD (or -1 for interaction)
  std::vector<int> label;    // sorted three-variable label
};

struct TripletScheme {
  std::vector<Triplet> primary;
  std::vector<std::pair<int, int>> moral_edges;  // (original, intermediate) parent pairs
  std::vector<Triplet> interaction;
  int root_child = -1;  // child variable of the root triplet
};

namespace detail {

struct BfgIndex {
  std::vector<std::string> order;           // topological ids
  std::map<std::string, int> var;           // id -> variable index
  std::vector<std::vector<int>> parents;    // per variable
  std::vector<bool> intermediate;           // per variable
  std::vector<int> original_rank;           // per variable: rank among originals, -1 otherwise
};

inline BfgIndex index_bfg(const Network& bfg, const BfgAnnotation& ann) {
  BfgIndex ix;
  ix.order = topo_order(bfg);
  for (std::size_t i = 0; i < ix.order.size(); ++i) ix.var[ix.order[i]] = static_cast<int>(i);
  ix.parents.resize(ix.order.size());
  ix.intermediate.assign(ix.order.size(), false);
  ix.original_rank.assign(ix.order.size(), -1);
  for (std::size_t i = 0; i < ix.order.size(); ++i) {
    for (const auto& p : bfg.parents(bfg.node(ix.order[i])))
      ix.parents[i].push_back(ix.var.at(p));
    std::sort(ix.parents[i].begin(), ix.parents[i].end());
    if (ann.is_intermediate(ix.order[i])) ix.intermediate[i] = true;
  }
  int rank = 0;
  for (const auto& id : ix.order)
    if (!ann.is_intermediate(id)) ix.original_rank[ix.var.at(id)] = rank++;
  return ix;
}

}  // namespace detail

// Primary triplets: every two-parent child together with its parents.  A
// moral edge is the (original, intermediate) parent pair of such a child.
inline TripletScheme identify_primary_triplets(const Network& bfg, const BfgAnnotation& ann) {
  auto ix = detail::index_bfg(bfg, ann);
  TripletScheme scheme;
  for (std::size_t v = 0; v < ix.order.size(); ++v) {
    if (ix.parents[v].size() > 2)
      throw structural_error(detail::cat("node '", ix.order[v], "' has more than two parents"));
    if (ix.parents[v].size() != 2) continue;
    Triplet t;
    t.child = static_cast<int>(v);
    t.label = ix.parents[v];
    t.label.push_back(static_cast<int>(v));
    std::sort(t.label.begin(), t.label.end());
    scheme.primary.push_back(t);
    int p0 = ix.parents[v][0], p1 = ix.parents[v][1];
    bool mixed = ix.intermediate[p0] != ix.intermediate[p1];
    if (mixed) {
      int orig = ix.intermediate[p0] ? p1 : p0;
      int inter = ix.intermediate[p0] ? p0 : p1;
      scheme.moral_edges.emplace_back(orig, inter);
    } else if (!ix.intermediate[p0] && !ix.intermediate[p1] && !ix.intermediate[v]) {
      if (scheme.root_child < 0) scheme.root_child = static_cast<int>(v);
    }
  }
  return scheme;
}

// Interaction triplets: for each moral edge, the pair plus one shared parent.
// When the shared-parent set has two members (the chain root and the
// single-parent variable), the pick balances how often each has been used.
inline void identify_interaction_triplets(const Network& bfg, const BfgAnnotation& ann,
                                          TripletScheme& scheme) {
  auto ix = detail::index_bfg(bfg, ann);
  std::map<int, int> usage;  // variable -> number of interaction triplets containing it
  for (auto& [orig, inter] : scheme.moral_edges) {
    std::vector<int> common;
    std::set_intersection(ix.parents[orig].begin(), ix.parents[orig].end(),
                          ix.parents[inter].begin(), ix.parents[inter].end(),
                          std::back_inserter(common));
    int chosen = -1;
    if (common.empty()) continue;  // no shared parent, no interaction triplet
    if (common.size() == 1) {
      chosen = common[0];
    } else {
      // Two candidates; keep the usage counts balanced, preferring the
      // lower-indexed variable on ties.
      int a = common[0], b = common[1];
      chosen = usage[a] > usage[b] ? b : a;
    }
    Triplet t;
    t.child = -1;
    t.label = {orig, inter, chosen};
    std::sort(t.label.begin(), t.label.end());
    scheme.interaction.push_back(t);
    ++usage[chosen];
  }
}

// ---------------------------------------------------------------------------
// Two-level initial region graph from the triplet scheme.

inline RegionGraph rg_init_from_triplets(const Network& bfg, const BfgAnnotation& ann,
                                         const TripletScheme& scheme) {
  auto ix = detail::index_bfg(bfg, ann);
  RegionGraph rg;
  rg.ids = ix.order;

  // Level 1: primary triplets (carrying their CPD factors) then interaction
  // triplets; duplicate labels are merged with factors unioned.
  std::map<std::vector<int>, int> by_label;
  auto add_level1 = [&](const Triplet& t) -> int {
    auto it = by_label.find(t.label);
    if (it != by_label.end()) return it->second;
    Region r;
    r.label = t.label;
    r.level = 1;
    int idx = static_cast<int>(rg.regions.size());
    by_label[t.label] = idx;
    rg.regions.push_back(std::move(r));
    return idx;
  };
  for (const auto& t : scheme.primary) {
    int idx = add_level1(t);
    rg.regions[idx].factors.push_back(t.child);
    if (t.child == scheme.root_child) rg.root_triplet = idx;
  }
  for (const auto& t : scheme.interaction) add_level1(t);

  // Parentless and single-parent CPDs are absorbed into the root triplet.
  for (std::size_t v = 0; v < ix.order.size(); ++v) {
    if (ix.parents[v].size() >= 2) continue;
    if (rg.root_triplet < 0) throw structural_error("no root triplet to absorb a small factor");
    Region& root = rg.regions[rg.root_triplet];
    bool inside = true;
    for (int pv : ix.parents[v])
      if (!std::binary_search(root.label.begin(), root.label.end(), pv)) inside = false;
    if (!std::binary_search(root.label.begin(), root.label.end(), static_cast<int>(v)))
      inside = false;
    if (!inside)
      throw structural_error(detail::cat("factor for '", ix.order[v],
                                         "' does not fit inside the root triplet"));
    root.factors.push_back(static_cast<int>(v));
  }

  // Level 2: pairwise intersections, keeping only maximal labels; each
  // connects to every containing level-1 region.
  auto level1 = rg.level_indices(1);
  std::set<std::vector<int>> candidates;
  for (std::size_t i = 0; i < level1.size(); ++i)
    for (std::size_t j = i + 1; j < level1.size(); ++j) {
      std::vector<int> inter;
      const auto& a = rg.regions[level1[i]].label;
      const auto& b = rg.regions[level1[j]].label;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
      if (!inter.empty()) candidates.insert(inter);
    }
  for (const auto& c : candidates) {
    bool subset = false;
    for (const auto& d : candidates)
      if (c != d && std::includes(d.begin(), d.end(), c.begin(), c.end())) subset = true;
    if (subset) continue;
    Region r;
    r.label = c;
    r.level = 2;
    int self = static_cast<int>(rg.regions.size());
    for (int p : level1)
      if (std::includes(rg.regions[p].label.begin(), rg.regions[p].label.end(), c.begin(), c.end())) {
        r.parents.push_back(p);
        rg.regions[p].children.push_back(self);
      }
    rg.regions.push_back(std::move(r));
  }
  counting_numbers(rg);
  return rg;
}

// ---------------------------------------------------------------------------
// Intersection classes.

enum class IntersectionClass { Hybrid, Cognate, Root };

inline std::map<int, IntersectionClass> classify_intersections(const RegionGraph& rg,
                                                               const Network& bfg,
                                                               const BfgAnnotation& ann) {
  auto ix = detail::index_bfg(bfg, ann);
  // The root intersection pairs the two lowest-ranked originals.
  std::vector<int> first_two;
  for (std::size_t v = 0; v < ix.order.size() && first_two.size() < 2; ++v)
    if (ix.original_rank[v] == 0 || ix.original_rank[v] == 1) first_two.push_back(static_cast<int>(v));
  std::sort(first_two.begin(), first_two.end());

  std::map<int, IntersectionClass> out;
  for (std::size_t i = 0; i < rg.regions.size(); ++i) {
    const Region& r = rg.regions[i];
    if (r.level != 2 || r.pruned) continue;
    if (r.label.size() != 2)
      throw structural_error(detail::cat("intersection ", rg.label_name(r.label),
                                         " does not match any intersection class"));
    bool a_inter = ix.intermediate[r.label[0]];
    bool b_inter = ix.intermediate[r.label[1]];
    if (a_inter && b_inter)
      throw structural_error(detail::cat("intersection ", rg.label_name(r.label),
                                         " does not match any intersection class"));
    if (a_inter != b_inter) {
      out[static_cast<int>(i)] = IntersectionClass::Hybrid;
    } else {
      out[static_cast<int>(i)] =
          r.label == first_two ? IntersectionClass::Root : IntersectionClass::Cognate;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cognate-intersection pruning: drop the lower-indexed original from cognate
// pairs until every original variable is counted exactly once.  The root
// intersection is never touched.

inline void prune_cognate(RegionGraph& rg, const Network& bfg, const BfgAnnotation& ann) {
  auto ix = detail::index_bfg(bfg, ann);
  auto classes = classify_intersections(rg, bfg, ann);

  std::vector<int> originals;
  for (std::size_t v = 0; v < ix.order.size(); ++v)
    if (!ix.intermediate[v]) originals.push_back(static_cast<int>(v));
  std::sort(originals.begin(), originals.end(),
            [&](int a, int b) { return ix.original_rank[a] < ix.original_rank[b]; });

  const int cap = 4 * static_cast<int>(rg.regions.size()) + 16;
  int steps = 0;
  bool balanced = false;
  while (!balanced) {
    balanced = true;
    for (int v : originals) {
      auto counts = variable_counts(rg);
      if (counts[v] == 1) continue;
      // Remove v from the first unpruned cognate intersection where v is the
      // lower-ranked (parent) member.
      bool acted = false;
      for (std::size_t i = 0; i < rg.regions.size() && !acted; ++i) {
        Region& r = rg.regions[i];
        if (r.level != 2 || r.pruned) continue;
        auto cls = classes.find(static_cast<int>(i));
        if (cls == classes.end() || cls->second != IntersectionClass::Cognate) continue;
        if (r.label.size() != 2) continue;
        int lower = ix.original_rank[r.label[0]] < ix.original_rank[r.label[1]] ? r.label[0] : r.label[1];
        if (lower != v) continue;
        r.label_before_prune = r.label;
        r.label = {r.label[0] == v ? r.label[1] : r.label[0]};
        r.pruned = true;
        acted = true;
      }
      if (acted) balanced = false;
      if (++steps > cap)
        throw structural_error("cognate pruning failed to reach unit counting numbers");
    }
    // Re-check: done only when every original counts once.
    auto counts = variable_counts(rg);
    for (int v : originals)
      if (counts[v] != 1) {
        if (balanced)
          throw structural_error(detail::cat("variable ", rg.ids[v],
                                             " cannot be balanced by cognate pruning"));
        break;
      }
  }
}

// ---------------------------------------------------------------------------
// Full construction.  Chains of dimension <= 4 collapse into a single region
// holding every factor.

inline RegionGraph trc(const Network& bfg, const BfgAnnotation& ann) {
  auto ix = detail::index_bfg(bfg, ann);
  int n_orig = 0;
  for (std::size_t v = 0; v < ix.order.size(); ++v)
    if (!ix.intermediate[v]) ++n_orig;

  if (n_orig <= 4) {
    RegionGraph rg;
    rg.ids = ix.order;
    Region r;
    for (std::size_t v = 0; v < ix.order.size(); ++v) {
      r.label.push_back(static_cast<int>(v));
      r.factors.push_back(static_cast<int>(v));
    }
    r.level = 1;
    r.count = 1;
    rg.root_triplet = 0;
    rg.regions.push_back(std::move(r));
    return rg;
  }

  TripletScheme scheme = identify_primary_triplets(bfg, ann);
  if (scheme.root_child < 0) throw structural_error("no root primary triplet found");
  identify_interaction_triplets(bfg, ann, scheme);
  RegionGraph rg = rg_init_from_triplets(bfg, ann, scheme);
  prune_cognate(rg, bfg, ann);
  return rg;
}

// ---------------------------------------------------------------------------
// Structural counts against the closed forms for an n-variable chain.

struct StructuralCounts {
  std::size_t level1 = 0;
  std::size_t intersections = 0;
  std::size_t pruned = 0;
  std::size_t edges = 0;
  bool matches_formulas = false;
};

inline StructuralCounts structural_counts(const RegionGraph& rg, int n) {
  StructuralCounts out;
  for (const auto& r : rg.regions) {
    if (r.level == 1) ++out.level1;
    if (r.level == 2) {
      ++out.intersections;
      out.edges += r.parents.size();
      if (r.pruned) ++out.pruned;
    }
  }
  const std::size_t m = static_cast<std::size_t>(n - 2);
  out.matches_formulas = out.level1 == m * m && out.intersections == m * m + 1 &&
                         out.pruned == m &&
                         out.edges == static_cast<std::size_t>((n - 2) * (5 * n - 11) / 2);
  return out;
}

// ---------------------------------------------------------------------------
// Entropy balance: with uniform beliefs the weighted region entropies must
// add up to the independent uniform entropy of every variable.

struct MaxentReport {
  double weighted_region_entropy = 0.0;
  double independent_entropy = 0.0;
  std::vector<std::pair<std::string, double>> contributions;
  bool balanced = false;
};

inline MaxentReport maxent_check(const RegionGraph& rg, const std::vector<int>& cards) {
  MaxentReport rep;
  std::set<int> universe;
  for (const auto& r : rg.regions) {
    double h = 0.0;
    for (int v : r.label) {
      h += std::log(static_cast<double>(cards.at(v)));
      universe.insert(v);
    }
    rep.weighted_region_entropy += r.count * h;
    rep.contributions.emplace_back(rg.label_name(r.label), r.count * h);
  }
  for (int v : universe) rep.independent_entropy += std::log(static_cast<double>(cards.at(v)));
  rep.balanced =
      std::fabs(rep.weighted_region_entropy - rep.independent_entropy) <
      1e-9 * std::max(1.0, std::fabs(rep.independent_entropy));
  return rep;
}

// ---------------------------------------------------------------------------
// Join-graph export: clusters are the level-1 regions; every intersection
// becomes a chain of separator edges through its parents.

struct JoinGraph {
  struct Separator {
    int a, b;                       // cluster indices
    std::vector<int> label;         // current (possibly pruned) separator label
    std::vector<int> full_label;    // pre-prune label when different
  };
  std::vector<std::vector<int>> clusters;
  std::vector<Separator> separators;
};

inline JoinGraph rg_to_join_graph(const RegionGraph& rg) {
  JoinGraph jg;
  auto level1 = rg.level_indices(1);
  std::map<int, int> cluster_of;
  for (std::size_t i = 0; i < level1.size(); ++i) {
    cluster_of[level1[i]] = static_cast<int>(i);
    jg.clusters.push_back(rg.regions[level1[i]].label);
  }
  for (const auto& r : rg.regions) {
    if (r.level != 2) continue;
    for (std::size_t k = 0; k + 1 < r.parents.size(); ++k) {
      JoinGraph::Separator s;
      s.a = cluster_of.at(r.parents[k]);
      s.b = cluster_of.at(r.parents[k + 1]);
      s.label = r.label;
      if (r.pruned) s.full_label = r.label_before_prune;
      jg.separators.push_back(std::move(s));
    }
  }
  return jg;
}

}  // namespace riskbn
