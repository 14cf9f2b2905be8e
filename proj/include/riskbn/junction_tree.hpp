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

// Exact inference: triangulation, clique-tree construction, two-phase
// absorption/distribution propagation, and the discretize-propagate-refine
// outer loop for hybrid models.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "riskbn/discrete_model.hpp"
#include "riskbn/factor.hpp"
#include "riskbn/network.hpp"

namespace riskbn {

// ---------------------------------------------------------------------------
// Triangulation (min-fill elimination with degree tie-breaking) and maximal
// clique extraction.

struct Triangulation {
  std::set<std::pair<int, int>> chordal_edges;  // original + fill-in
  std::vector<std::vector<int>> cliques;        // maximal, each sorted
  std::vector<std::pair<int, int>> fill_in;
};

inline Triangulation triangulate(int nvars, const std::set<std::pair<int, int>>& edges) {
  Triangulation out;
  out.chordal_edges = edges;
  std::vector<std::set<int>> adj(nvars);
  for (auto& [a, b] : edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  std::vector<bool> eliminated(nvars, false);
  std::vector<std::vector<int>> elim_cliques;

  for (int step = 0; step < nvars; ++step) {
    int best = -1;
    long best_fill = -1;
    int best_degree = -1;
    for (int v = 0; v < nvars; ++v) {
      if (eliminated[v]) continue;
      long fill = 0;
      std::vector<int> nb;
      for (int u : adj[v])
        if (!eliminated[u]) nb.push_back(u);
      for (std::size_t i = 0; i < nb.size(); ++i)
        for (std::size_t j = i + 1; j < nb.size(); ++j)
          if (!adj[nb[i]].count(nb[j])) ++fill;
      int degree = static_cast<int>(nb.size());
      if (best < 0 || fill < best_fill || (fill == best_fill && degree < best_degree)) {
        best = v;
        best_fill = fill;
        best_degree = degree;
      }
    }
    std::vector<int> nb;
    for (int u : adj[best])
      if (!eliminated[u]) nb.push_back(u);
    for (std::size_t i = 0; i < nb.size(); ++i)
      for (std::size_t j = i + 1; j < nb.size(); ++j)
        if (adj[nb[i]].insert(nb[j]).second) {
          adj[nb[j]].insert(nb[i]);
          auto e = std::minmax(nb[i], nb[j]);
          out.fill_in.emplace_back(e.first, e.second);
          out.chordal_edges.insert({e.first, e.second});
        }
    std::vector<int> clique = nb;
    clique.push_back(best);
    std::sort(clique.begin(), clique.end());
    elim_cliques.push_back(std::move(clique));
    eliminated[best] = true;
  }

  // Keep only maximal cliques (stable order of first appearance).
  for (const auto& c : elim_cliques) {
    bool subsumed = false;
    for (const auto& other : elim_cliques) {
      if (&other == &c || other.size() <= c.size()) continue;
      if (std::includes(other.begin(), other.end(), c.begin(), c.end())) {
        subsumed = true;
        break;
      }
    }
    if (!subsumed) {
      bool dup = false;
      for (const auto& kept : out.cliques)
        if (kept == c) {
          dup = true;
          break;
        }
      if (!dup) out.cliques.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Clique tree

struct JunctionTree {
  std::vector<std::vector<int>> cliques;     // sorted variable ids
  std::vector<Factor> potentials;            // one per clique
  struct Edge {
    int a, b;
    std::vector<int> separator;              // sorted intersection
    Factor sep_potential;
  };
  std::vector<Edge> tree_edges;
  std::vector<std::vector<int>> neighbors;   // clique -> incident edge indices
};

// Maximum-weight spanning tree over pairwise intersections (per connected
// component, so forests are handled naturally).
inline JunctionTree build_jt(const std::vector<std::vector<int>>& cliques,
                             const std::vector<int>& cards) {
  JunctionTree jt;
  jt.cliques = cliques;
  const int n = static_cast<int>(cliques.size());
  struct Cand {
    int w, a, b;
  };
  std::vector<Cand> cands;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      std::vector<int> inter;
      std::set_intersection(cliques[i].begin(), cliques[i].end(), cliques[j].begin(), cliques[j].end(),
                            std::back_inserter(inter));
      if (!inter.empty()) cands.push_back({static_cast<int>(inter.size()), i, j});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.w > y.w; });
  std::vector<int> comp(n);
  for (int i = 0; i < n; ++i) comp[i] = i;
  std::function<int(int)> find = [&](int x) { return comp[x] == x ? x : comp[x] = find(comp[x]); };
  jt.neighbors.assign(n, {});
  for (const auto& c : cands) {
    int ra = find(c.a), rb = find(c.b);
    if (ra == rb) continue;
    comp[ra] = rb;
    JunctionTree::Edge e;
    e.a = c.a;
    e.b = c.b;
    std::set_intersection(cliques[c.a].begin(), cliques[c.a].end(), cliques[c.b].begin(),
                          cliques[c.b].end(), std::back_inserter(e.separator));
    std::vector<int> scard;
    for (int v : e.separator) scard.push_back(cards[v]);
    e.sep_potential = Factor(e.separator, scard, 1.0);
    jt.neighbors[c.a].push_back(static_cast<int>(jt.tree_edges.size()));
    jt.neighbors[c.b].push_back(static_cast<int>(jt.tree_edges.size()));
    jt.tree_edges.push_back(std::move(e));
  }
  // Uniform clique potentials until factors are assigned.
  for (int i = 0; i < n; ++i) {
    std::vector<int> card;
    for (int v : cliques[i]) card.push_back(cards[v]);
    jt.potentials.emplace_back(cliques[i], card, 1.0);
  }
  return jt;
}

// Multiply each factor into the first clique containing its scope.
inline void assign_factors_to_jt(JunctionTree& jt, const std::vector<Factor>& factors) {
  for (const auto& f : factors) {
    bool placed = false;
    for (std::size_t c = 0; c < jt.cliques.size(); ++c) {
      if (std::includes(jt.cliques[c].begin(), jt.cliques[c].end(), f.vars.begin(), f.vars.end())) {
        jt.potentials[c] = multiply(jt.potentials[c], f);
        placed = true;
        break;
      }
    }
    if (!placed) throw structural_error("factor scope not contained in any clique");
  }
}

// Hugin-style two-phase propagation.  After this every pair of neighbouring
// cliques agrees on its separator marginal.
inline void jt_propagate(JunctionTree& jt) {
  const int n = static_cast<int>(jt.cliques.size());
  if (n == 0) return;

  auto pass = [&](int from, int edge_idx) {
    auto& e = jt.tree_edges[edge_idx];
    int to = (e.a == from) ? e.b : e.a;
    Factor msg = marginalize(jt.potentials[from], e.separator);
    Factor update = divide(msg, e.sep_potential);
    jt.potentials[to] = multiply(jt.potentials[to], update);
    e.sep_potential = std::move(msg);
    return to;
  };

  std::vector<bool> visited(n, false);
  // Collect towards each component's root, then distribute.
  for (int root = 0; root < n; ++root) {
    if (visited[root]) continue;
    // DFS order within the component.
    std::vector<std::pair<int, int>> order;  // (clique, via edge)
    std::vector<int> stack{root};
    visited[root] = true;
    std::vector<int> parent_edge(n, -1);
    std::vector<int> dfs;
    while (!stack.empty()) {
      int c = stack.back();
      stack.pop_back();
      dfs.push_back(c);
      for (int ei : jt.neighbors[c]) {
        const auto& e = jt.tree_edges[ei];
        int other = (e.a == c) ? e.b : e.a;
        if (!visited[other]) {
          visited[other] = true;
          parent_edge[other] = ei;
          stack.push_back(other);
        }
      }
    }
    // Absorption: leaves towards the root.
    for (auto it = dfs.rbegin(); it != dfs.rend(); ++it) {
      int c = *it;
      if (parent_edge[c] >= 0) pass(c, parent_edge[c]);
    }
    // Distribution: root towards the leaves.
    for (int c : dfs)
      for (int ei : jt.neighbors[c]) {
        const auto& e = jt.tree_edges[ei];
        int other = (e.a == c) ? e.b : e.a;
        if (parent_edge[other] == ei) pass(c, ei);
      }
  }
}

// Normalized marginal of a single variable from any containing clique.
inline Factor jt_marginal(const JunctionTree& jt, int var) {
  for (std::size_t c = 0; c < jt.cliques.size(); ++c)
    if (std::binary_search(jt.cliques[c].begin(), jt.cliques[c].end(), var))
      return normalize(marginalize(jt.potentials[c], {var}));
  throw structural_error(detail::cat("variable ", var, " not present in any clique"));
}

// Largest separator-marginal disagreement across tree edges (0 when
// calibrated).
inline double jt_calibration_residual(const JunctionTree& jt) {
  double worst = 0.0;
  for (const auto& e : jt.tree_edges) {
    Factor ma = normalize(marginalize(jt.potentials[e.a], e.separator));
    Factor mb = normalize(marginalize(jt.potentials[e.b], e.separator));
    for (std::size_t i = 0; i < ma.data.size(); ++i)
      worst = std::max(worst, std::fabs(ma.data[i] - mb.data[i]));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// One full discrete inference pass over a DiscreteModel.

struct InferenceResult {
  std::map<std::string, DiscretizedDensity> marginals;  // continuous nodes
  std::map<std::string, std::vector<double>> discrete;  // discrete nodes
  int iterations = 0;        // outer refinement iterations executed
  double entropy_error = 0;  // final summed bin error
  double residual = 0;       // engine consistency residual
  bool converged = true;
};

inline void jt_single_pass(const DiscreteModel& model, InferenceResult& out) {
  auto factors = model.build_factors();
  for (auto& [v, s] : model.evidence_bins())
    for (auto& f : factors) f = reduce_evidence(f, v, s);

  UndirectedGraph moral = moralize(model.net());
  std::set<std::pair<int, int>> edges;
  for (auto& [a, b] : moral.edges) {
    int va = model.var(moral.ids[a]), vb = model.var(moral.ids[b]);
    edges.insert({std::min(va, vb), std::max(va, vb)});
  }
  auto tri = triangulate(static_cast<int>(model.order().size()), edges);
  JunctionTree jt = build_jt(tri.cliques, model.cards());
  assign_factors_to_jt(jt, factors);
  jt_propagate(jt);
  out.residual = jt_calibration_residual(jt);

  for (const auto& id : model.order()) {
    Factor m = jt_marginal(jt, model.var(id));
    if (model.net().node(id).kind == NodeKind::Discrete) {
      out.discrete[id] = m.data;
    } else {
      DiscretizedDensity d;
      d.partition = model.partition(id);
      d.mass = m.data;
      out.marginals[id] = std::move(d);
    }
  }
}

// Dynamic-discretization outer loop with exact clique-tree inner inference.
inline InferenceResult ddjt(const Network& net, const Evidence& ev, const DdSettings& settings = {}) {
  DiscreteModel model(net, ev, settings);
  InferenceResult res;
  if (!model.any_continuous()) {
    jt_single_pass(model, res);
    res.iterations = 1;
    return res;
  }
  std::vector<double> history;
  for (int iter = 0; iter < settings.dd_iterations; ++iter) {
    InferenceResult pass;
    jt_single_pass(model, pass);
    res = std::move(pass);
    res.iterations = iter + 1;
    double err = model.refine_partitions(res.marginals);
    res.entropy_error = err;
    history.push_back(err);

    double scale = 0.0;
    for (const auto& [id, d] : res.marginals) {
      double h = 0.0;
      for (double m : d.mass)
        if (m > 0.0) h -= m * std::log(m);
      scale += std::fabs(h);
    }
    if (err < settings.stop.low_error * std::max(1.0, scale)) break;
    if (static_cast<int>(history.size()) > settings.stop.stable_window) {
      bool stable = true;
      for (int k = 1; k <= settings.stop.stable_window; ++k)
        if (std::fabs(history[history.size() - 1] - history[history.size() - 1 - k]) >
            settings.stop.stable_tol)
          stable = false;
      if (stable) break;
    }
  }
  return res;
}

}  // namespace riskbn
