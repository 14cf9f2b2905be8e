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

// Directed network representation and the structural transforms: topological
// ordering, d-separation, densification of the continuous chain with
// zero-weight parents, pair-block factorization of wide CPDs, and
// moralization.

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "riskbn/common.hpp"
#include "riskbn/expr.hpp"

namespace riskbn {

enum class NodeKind { Discrete, Continuous };

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Continuous;

  // Discrete nodes: state labels plus an explicit table CPD.
  std::vector<std::string> states;
  std::vector<std::string> table_parents;  // declared order; first varies slowest
  std::vector<double> table;               // row-major over parent combos, child state fastest

  // Continuous nodes: CPD expression (parents inferred from free variables).
  ExprPtr cpd;
  std::optional<std::pair<double, double>> support;  // optional declared bounds
};

struct Network {
  std::vector<Node> nodes;  // declaration order

  int index_of(const std::string& id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == id) return static_cast<int>(i);
    return -1;
  }
  const Node& node(const std::string& id) const {
    int i = index_of(id);
    if (i < 0) throw structural_error(detail::cat("unknown node '", id, "'"));
    return nodes[i];
  }

  // Parents by id, in a stable order: declared order for tables, expression
  // variable order (sorted) for expressions.
  std::vector<std::string> parents(const Node& n) const {
    if (n.kind == NodeKind::Discrete || !n.table_parents.empty()) return n.table_parents;
    if (!n.cpd) return {};
    std::vector<std::string> out;
    for (const auto& v : free_vars(n.cpd)) out.push_back(v);
    return out;
  }

  std::vector<std::pair<std::string, std::string>> edges() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& n : nodes)
      for (const auto& p : parents(n)) out.emplace_back(p, n.id);
    return out;
  }

  void validate() const {
    std::set<std::string> seen;
    for (const auto& n : nodes) {
      if (!seen.insert(n.id).second) throw structural_error(detail::cat("duplicate node id '", n.id, "'"));
      if (n.kind == NodeKind::Discrete && n.states.empty())
        throw structural_error(detail::cat("discrete node '", n.id, "' needs state labels"));
    }
    for (const auto& n : nodes)
      for (const auto& p : parents(n))
        if (index_of(p) < 0)
          throw structural_error(detail::cat("node '", n.id, "' references undeclared parent '", p, "'"));
  }
};

// ---------------------------------------------------------------------------
// Topological order (parents first, declaration order breaking ties).

inline std::vector<std::string> topo_order(const Network& net) {
  net.validate();
  const int n = static_cast<int>(net.nodes.size());
  std::vector<std::vector<int>> children(n);
  std::vector<int> indeg(n, 0);
  for (int i = 0; i < n; ++i)
    for (const auto& p : net.parents(net.nodes[i])) {
      int pi = net.index_of(p);
      children[pi].push_back(i);
      ++indeg[i];
    }
  std::vector<std::string> order;
  std::vector<bool> done(n, false);
  for (int produced = 0; produced < n;) {
    int pick = -1;
    for (int i = 0; i < n; ++i)
      if (!done[i] && indeg[i] == 0) {
        pick = i;
        break;
      }
    if (pick < 0) {
      // Find one edge on a cycle for the error message.
      for (int i = 0; i < n; ++i)
        if (!done[i])
          for (const auto& p : net.parents(net.nodes[i]))
            if (!done[net.index_of(p)])
              throw structural_error(
                  detail::cat("cycle detected involving edge ", p, " -> ", net.nodes[i].id));
      throw structural_error("cycle detected");
    }
    done[pick] = true;
    order.push_back(net.nodes[pick].id);
    ++produced;
    for (int c : children[pick]) --indeg[c];
  }
  return order;
}

// ---------------------------------------------------------------------------
// d-separation (active-trail reachability with the converging/descendant
// rule).

inline bool d_separated(const Network& net, const std::string& u, const std::string& v,
                        const std::set<std::string>& given) {
  if (u == v) throw structural_error("d-separation query needs distinct endpoints");
  if (given.count(u) || given.count(v))
    throw structural_error("d-separation endpoints must not be in the conditioning set");
  net.node(u);
  net.node(v);
  for (const auto& z : given) net.node(z);

  const int n = static_cast<int>(net.nodes.size());
  std::vector<std::vector<int>> par(n), chi(n);
  for (int i = 0; i < n; ++i)
    for (const auto& p : net.parents(net.nodes[i])) {
      int pi = net.index_of(p);
      par[i].push_back(pi);
      chi[pi].push_back(i);
    }

  // Ancestors of the conditioning set (for the converging rule).
  std::vector<bool> anc(n, false), inZ(n, false);
  std::vector<int> stack;
  for (const auto& z : given) {
    int zi = net.index_of(z);
    inZ[zi] = true;
    stack.push_back(zi);
  }
  while (!stack.empty()) {
    int x = stack.back();
    stack.pop_back();
    if (anc[x]) continue;
    anc[x] = true;
    for (int p : par[x]) stack.push_back(p);
  }

  // Reachability over (node, direction) states; direction: entering via an
  // edge pointing up (to parents) or down (to children).
  enum Dir { Up = 0, Down = 1 };
  std::vector<std::array<bool, 2>> visited(n, {false, false});
  std::vector<std::pair<int, int>> frontier;
  int ui = net.index_of(u);
  frontier.emplace_back(ui, Up);
  frontier.emplace_back(ui, Down);
  int vi = net.index_of(v);
  while (!frontier.empty()) {
    auto [x, dir] = frontier.back();
    frontier.pop_back();
    if (visited[x][dir]) continue;
    visited[x][dir] = true;
    if (x == vi && !inZ[x]) return false;  // active trail reached v
    if (dir == Up && !inZ[x]) {
      for (int p : par[x]) frontier.emplace_back(p, Up);
      for (int c : chi[x]) frontier.emplace_back(c, Down);
    } else if (dir == Down) {
      if (!inZ[x])
        for (int c : chi[x]) frontier.emplace_back(c, Down);
      if (anc[x])  // observed descendant opens the collider
        for (int p : par[x]) frontier.emplace_back(p, Up);
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Densification: connect every continuous pair along the topological order,
// absorbing the added ancestors with zero weights so the joint distribution
// is unchanged.  Discrete guards stay as explicit conditioning parents and
// are exempt; a discrete node downstream of a continuous one cannot absorb
// parents and is rejected.

namespace detail {

// Adds zero-weight terms to a linear location so it covers `required` in
// order; existing coefficients are preserved.
inline ExprPtr pad_location(const ExprPtr& loc, const std::vector<std::string>& required) {
  ExprPtr c = canonicalize(loc);
  double bias = 0.0;
  std::map<std::string, double> coeff;
  if (c->kind == ExprKind::Constant) {
    bias = c->value;
  } else if (c->kind == ExprKind::Var) {
    coeff[c->var] = 1.0;
  } else if (c->kind == ExprKind::WeightedSum) {
    bias = c->bias;
    for (auto& [w, t] : c->terms) {
      if (t->kind != ExprKind::Var)
        throw unsupported_conversion_error("CPD location is not linear in its parents");
      coeff[t->var] += w;
    }
  } else {
    throw unsupported_conversion_error("CPD location is not linear in its parents");
  }
  std::vector<std::pair<double, ExprPtr>> terms;
  for (const auto& r : required) terms.emplace_back(coeff.count(r) ? coeff[r] : 0.0, make_var(r));
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::WeightedSum;
  e->terms = std::move(terms);
  e->bias = bias;
  return e;
}

inline ExprPtr densify_cpd(const std::string& id, const ExprPtr& cpd,
                           const std::vector<std::string>& required) {
  ExprPtr c = canonicalize(cpd);
  switch (c->kind) {
    case ExprKind::Constant:
    case ExprKind::Var:
    case ExprKind::WeightedSum:
      return pad_location(c, required);
    case ExprKind::Dist: {
      std::vector<ExprPtr> params = c->params;
      params[0] = pad_location(params[0], required);
      for (std::size_t i = 1; i < params.size(); ++i)
        if (!free_vars(params[i]).empty())
          throw unsupported_conversion_error(
              detail::cat("node '", id, "': only the first distribution parameter may depend on parents"));
      return make_dist(c->dist, std::move(params));
    }
    case ExprKind::Partitioned: {
      std::vector<std::pair<std::string, ExprPtr>> cases;
      for (auto& [s, sub] : c->cases) cases.emplace_back(s, densify_cpd(id, sub, required));
      return make_partitioned(c->guard, std::move(cases));
    }
    default:
      throw unsupported_conversion_error(
          detail::cat("node '", id, "' has a CPD that cannot absorb zero-weight parents"));
  }
}

}  // namespace detail

inline Network to_dccd(const Network& net) {
  const auto order = topo_order(net);
  std::map<std::string, int> pos;
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = static_cast<int>(i);

  // Continuous nodes in topological order form the chain to densify.
  std::vector<std::string> chain;
  for (const auto& id : order)
    if (net.node(id).kind == NodeKind::Continuous) chain.push_back(id);

  // A discrete node below a continuous ancestor cannot absorb it.
  for (const auto& n : net.nodes)
    if (n.kind == NodeKind::Discrete)
      for (const auto& p : net.parents(n))
        if (net.node(p).kind == NodeKind::Continuous)
          throw unsupported_conversion_error(
              detail::cat("discrete node '", n.id, "' conditioned on continuous '", p,
                          "' cannot absorb zero-weight parents"));

  Network out;
  for (const auto& id : order) {
    Node n = net.node(id);
    if (n.kind == NodeKind::Continuous) {
      std::vector<std::string> required;
      for (const auto& c : chain) {
        if (c == id) break;
        required.push_back(c);
      }
      // Keep discrete guards untouched: densify only the continuous location.
      n.cpd = detail::densify_cpd(n.id, n.cpd, required);
    }
    out.nodes.push_back(std::move(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pair-block graph factorization.

struct BfgAnnotation {
  std::vector<std::string> originals;      // in topological/index order
  std::vector<std::string> intermediates;  // in creation order
  // intermediate -> (child whose CPD spawned it)
  std::map<std::string, std::string> origin;

  bool is_intermediate(const std::string& id) const {
    return origin.count(id) > 0;
  }
  // Expected node count when the input was a dense n-node chain.
  static std::size_t expected_nodes(std::size_t n) { return (n * n - 3 * n + 6) / 2; }
};

inline std::pair<Network, BfgAnnotation> binary_factorize(const Network& net) {
  const auto order = topo_order(net);
  BfgAnnotation ann;
  Network out;
  int counter = 0;
  auto fresh = [&]() {
    std::string name;
    do {
      name = "E" + std::to_string(++counter);
    } while (net.index_of(name) >= 0);
    return name;
  };

  for (const auto& id : order) {
    Node n = net.node(id);
    ann.originals.push_back(id);
    if (n.kind == NodeKind::Discrete || !n.cpd) {
      out.nodes.push_back(std::move(n));
      continue;
    }
    std::set<std::string> cont_parents;
    for (const auto& p : free_vars(n.cpd))
      if (net.node(p).kind == NodeKind::Continuous) cont_parents.insert(p);
    if (cont_parents.size() <= 2) {
      out.nodes.push_back(std::move(n));
      continue;
    }
    BfResult bf = bf_expression(n.cpd, fresh);
    for (const auto& block : bf.intermediates) {
      Node e;
      e.id = block.name;
      e.kind = NodeKind::Continuous;
      e.cpd = block.expr;
      out.nodes.push_back(std::move(e));
      ann.intermediates.push_back(block.name);
      ann.origin[block.name] = id;
    }
    n.cpd = bf.rewritten;
    out.nodes.push_back(std::move(n));
  }
  return {std::move(out), std::move(ann)};
}

// ---------------------------------------------------------------------------
// Structure report for factorized graphs: parent bound, single-child
// intermediates, disjoint intermediate paths between original triples, and
// the node-count formula for dense inputs.

struct BfgReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

// All intermediates that can sit on a directed path from `from` to `to`
// whose interior nodes are all intermediates.
inline void interior_paths(const Network& net, const BfgAnnotation& ann, int from, int to,
                           const std::vector<std::vector<int>>& children,
                           std::vector<std::set<int>>& paths, std::set<int>& current, int at) {
  if (at == to) {
    paths.push_back(current);
    return;
  }
  for (int c : children[at]) {
    bool inter = ann.is_intermediate(net.nodes[c].id);
    if (c == to) {
      paths.push_back(current);
    } else if (inter) {
      current.insert(c);
      interior_paths(net, ann, from, to, children, paths, current, c);
      current.erase(c);
    }
  }
}

}  // namespace detail

inline BfgReport verify_full_bfg(const Network& net, const BfgAnnotation& ann) {
  BfgReport rep;
  const int n = static_cast<int>(net.nodes.size());
  std::vector<std::vector<int>> children(n);
  for (int i = 0; i < n; ++i)
    for (const auto& p : net.parents(net.nodes[i])) children[net.index_of(p)].push_back(i);

  for (const auto& node : net.nodes) {
    std::size_t cont = 0;
    for (const auto& p : net.parents(node))
      if (net.node(p).kind == NodeKind::Continuous) ++cont;
    if (cont > 2)
      rep.violations.push_back(detail::cat("node '", node.id, "' has ", cont, " continuous parents"));
  }
  for (const auto& e : ann.intermediates) {
    int idx = net.index_of(e);
    if (idx < 0) {
      rep.violations.push_back(detail::cat("annotated intermediate '", e, "' missing from network"));
      continue;
    }
    if (children[idx].size() != 1)
      rep.violations.push_back(
          detail::cat("intermediate '", e, "' has ", children[idx].size(), " children (expected 1)"));
  }

  // Disjoint-path property over original triples (i < j < k, k > 2): some
  // pair of intermediate-interior paths X_i -> X_j and X_i -> X_k must share
  // no intermediate node.
  const auto& orig = ann.originals;
  auto paths_between = [&](int a, int b) {
    std::vector<std::set<int>> paths;
    std::set<int> cur;
    detail::interior_paths(net, ann, a, b, children, paths, cur, a);
    return paths;
  };
  for (std::size_t i = 0; i < orig.size(); ++i)
    for (std::size_t j = i + 1; j < orig.size(); ++j)
      for (std::size_t k = j + 1; k < orig.size(); ++k) {
        if (k < 2) continue;
        int a = net.index_of(orig[i]), b = net.index_of(orig[j]), c = net.index_of(orig[k]);
        auto pij = paths_between(a, b);
        auto pik = paths_between(a, c);
        if (pij.empty() || pik.empty()) continue;  // sparse inputs may lack paths
        bool found = false;
        for (const auto& s1 : pij) {
          for (const auto& s2 : pik) {
            bool disjoint = true;
            for (int x : s1)
              if (s2.count(x)) {
                disjoint = false;
                break;
              }
            if (disjoint) {
              found = true;
              break;
            }
          }
          if (found) break;
        }
        if (!found)
          rep.violations.push_back(detail::cat("paths ", orig[i], "->", orig[j], " and ", orig[i], "->",
                                               orig[k], " share an intermediate variable"));
      }

  if (!ann.originals.empty()) {
    std::size_t expect = BfgAnnotation::expected_nodes(ann.originals.size());
    // Only meaningful when the input was a dense chain; report as
    // informational mismatch otherwise.
    bool dense_continuous = true;
    for (const auto& id : ann.originals)
      if (net.index_of(id) >= 0 && net.node(id).kind != NodeKind::Continuous) dense_continuous = false;
    if (dense_continuous && ann.originals.size() >= 3 &&
        net.nodes.size() != expect)
      rep.violations.push_back(detail::cat("node count ", net.nodes.size(), " differs from formula value ",
                                           expect, " for ", ann.originals.size(), " originals"));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Moral graph: undirected edges plus co-parent links.

struct UndirectedGraph {
  std::vector<std::string> ids;
  std::set<std::pair<int, int>> edges;  // (lo, hi) index pairs

  bool has_edge(int a, int b) const {
    return edges.count({std::min(a, b), std::max(a, b)}) > 0;
  }
};

inline UndirectedGraph moralize(const Network& net) {
  UndirectedGraph g;
  for (const auto& n : net.nodes) g.ids.push_back(n.id);
  auto add = [&](int a, int b) {
    if (a != b) g.edges.insert({std::min(a, b), std::max(a, b)});
  };
  for (const auto& n : net.nodes) {
    int c = net.index_of(n.id);
    auto ps = net.parents(n);
    for (const auto& p : ps) add(net.index_of(p), c);
    for (std::size_t i = 0; i < ps.size(); ++i)
      for (std::size_t j = i + 1; j < ps.size(); ++j) add(net.index_of(ps[i]), net.index_of(ps[j]));
  }
  return g;
}

}  // namespace riskbn
