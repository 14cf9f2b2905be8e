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

// Two-way message passing on region graphs, and the full pipeline that takes
// a network through densification, pair-block factorization, triplet region
// construction and the discretization loop.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "riskbn/discrete_model.hpp"
#include "riskbn/factor.hpp"
#include "riskbn/junction_tree.hpp"
#include "riskbn/region_graph.hpp"

namespace riskbn {

struct GbpSettings {
  int max_iterations = 200;
  double threshold = 1e-6;
  double damping = 0.0;  // geometric blend toward the old message
};

// Mixing exponent per region: q = (1 - c) / p, beta = 1 / (2 - q).  Regions
// without parents need no exponent.  Chains where c = 1 - p give q = 1 and
// beta = 1, reducing the two-way updates to plain belief propagation.
inline std::map<int, double> beta_params(const RegionGraph& rg) {
  std::map<int, double> out;
  for (std::size_t i = 0; i < rg.regions.size(); ++i) {
    const Region& r = rg.regions[i];
    if (r.parents.empty()) continue;
    double q = (1.0 - r.count) / static_cast<double>(r.parents.size());
    if (std::fabs(2.0 - q) < 1e-12)
      throw structural_error(detail::cat("region ", rg.label_name(r.label),
                                         " has an undefined mixing exponent (q = 2)"));
    out[static_cast<int>(i)] = 1.0 / (2.0 - q);
  }
  return out;
}

struct BeliefSet {
  std::vector<Factor> region_beliefs;          // normalized, aligned with rg.regions
  std::map<std::string, Factor> var_marginals; // normalized single-variable factors
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

// A region graph bound to concrete factor tables, carrying the message state
// between propagation runs (the discretization loop warm-starts from it).
class GbpEngine {
 public:
  struct EdgeRef {
    int parent;  // region index
    int child;   // region index
    int child_slot;   // position in parent's children list
    int parent_slot;  // position in child's parents list
  };

  GbpEngine(const RegionGraph& rg, const std::vector<Factor>& node_factors,
            const std::vector<int>& cards)
      : rg_(rg), cards_(cards) {
    build_local_factors(node_factors);
    build_edges();
    init_messages();
    beta_by_region_ = beta_params(rg_);
  }

  // Replaces the factor tables (same region graph, new discretization) and
  // remaps the message state onto the new partitions by overlap-weighted
  // averaging.  `rebin` maps a factor onto the new geometry per variable.
  void rebind(const std::vector<Factor>& node_factors, const std::vector<int>& cards,
              const std::function<Factor(const Factor&)>& remap_message) {
    cards_ = cards;
    build_local_factors(node_factors);
    for (auto& m : down_) m = remap_message(m);
    for (auto& n : up_) n = remap_message(n);
    for (auto& m : down_) max_normalize(m);
    for (auto& n : up_) max_normalize(n);
  }

  const std::vector<EdgeRef>& edges() const { return edges_; }
  const RegionGraph& graph() const { return rg_; }

  // One full two-way refresh of the edge's message pair, against the cached
  // region products (call refresh_products() once before a manual sweep).
  void two_way_update(std::size_t edge_idx, double damping) {
    if (products_.empty()) refresh_products();
    const EdgeRef& e = edges_[edge_idx];
    const double beta = beta_by_region_.at(e.child);
    const Region& child = rg_.regions[e.child];

    // Leave-one-out beliefs: the child's without this parent's downward
    // message, the parent's without this child's upward message.
    Factor n0 = products_[e.child];
    {
      const Factor& m_old = down_[edge_idx];
      for (std::size_t k = 0; k < n0.data.size(); ++k)
        n0.data[k] = (n0.data[k] == 0.0 && m_old.data[k] == 0.0)
                         ? 0.0
                         : n0.data[k] / std::max(m_old.data[k], kMassFloor);
    }
    Factor scratch = products_[e.parent];
    for_each_aligned(scratch, up_[edge_idx], [](double& b, double s) {
      b = (b == 0.0 && s == 0.0) ? 0.0 : b / std::max(s, kMassFloor);
    });
    Factor m0 = marginalize(scratch, child.label);
    max_normalize(n0);
    max_normalize(m0);

    Factor n_new, m_new;
    if (beta == 1.0) {
      n_new = n0;
      m_new = m0;
    } else {
      n_new = multiply(power(n0, beta), power(m0, beta - 1.0));
      m_new = multiply(power(n0, beta - 1.0), power(m0, beta));
    }
    if (damping > 0.0) {
      n_new = multiply(power(n_new, 1.0 - damping), power(up_[edge_idx], damping));
      m_new = multiply(power(m_new, 1.0 - damping), power(down_[edge_idx], damping));
    }
    max_normalize(n_new);
    max_normalize(m_new);

    // Fold the message change back into the cached products.
    apply_ratio(products_[e.child], m_new, down_[edge_idx]);
    apply_ratio(products_[e.parent], n_new, up_[edge_idx]);
    up_[edge_idx] = std::move(n_new);
    down_[edge_idx] = std::move(m_new);
  }

  Factor region_belief(int region) const {
    if (!products_.empty()) return normalize(products_[region]);
    return normalize(region_product_without(region, -1, -1));
  }

  // Rebuilds the per-region product tables from factors and messages.
  void refresh_products() {
    products_.clear();
    products_.reserve(rg_.regions.size());
    for (std::size_t r = 0; r < rg_.regions.size(); ++r)
      products_.push_back(region_product_without(static_cast<int>(r), -1, -1));
  }

  BeliefSet propagate(const GbpSettings& settings) {
    BeliefSet out;
    std::vector<Factor> prev;
    for (int iter = 1; iter <= settings.max_iterations; ++iter) {
      refresh_products();
      for (std::size_t e = 0; e < edges_.size(); ++e) two_way_update(e, settings.damping);
      std::vector<Factor> beliefs;
      beliefs.reserve(rg_.regions.size());
      for (std::size_t r = 0; r < rg_.regions.size(); ++r)
        beliefs.push_back(region_belief(static_cast<int>(r)));
      double residual = HUGE_VAL;
      if (!prev.empty()) {
        residual = 0.0;
        for (std::size_t r = 0; r < beliefs.size(); ++r)
          for (std::size_t k = 0; k < beliefs[r].data.size(); ++k)
            residual = std::max(residual, std::fabs(beliefs[r].data[k] - prev[r].data[k]));
      }
      prev = std::move(beliefs);
      out.iterations = iter;
      out.residual = residual;
      if (residual < settings.threshold) {
        out.converged = true;
        break;
      }
    }
    out.region_beliefs = std::move(prev);
    return out;
  }

  // Largest violation of the marginalization constraint across the edges.
  double consistency_residual(const BeliefSet& beliefs) const {
    double worst = 0.0;
    for (const auto& e : edges_) {
      Factor from_parent = marginalize(beliefs.region_beliefs[e.parent], rg_.regions[e.child].label);
      const Factor& at_child = beliefs.region_beliefs[e.child];
      for (std::size_t k = 0; k < at_child.data.size(); ++k)
        worst = std::max(worst, std::fabs(from_parent.data[k] - at_child.data[k]));
    }
    return worst;
  }

 private:
  RegionGraph rg_;
  std::vector<int> cards_;
  std::vector<Factor> local_;                 // f~_R = (prod of assigned factors)^{c_R}
  std::vector<Factor> products_;              // cached f~_R times incoming messages
  std::vector<EdgeRef> edges_;                // in depth-first order from the root region
  std::vector<Factor> up_, down_;             // aligned with edges_
  std::vector<std::vector<int>> edge_of_parent_slot_;  // region -> child slot -> edge idx
  std::vector<std::vector<int>> edge_of_child_slot_;   // region -> parent slot -> edge idx
  std::map<int, double> beta_by_region_;

  // product *= fresh/stale, with the 0/0 -> 0 convention.
  static void apply_ratio(Factor& product, const Factor& fresh, const Factor& stale) {
    Factor ratio = fresh;
    for (std::size_t k = 0; k < ratio.data.size(); ++k)
      ratio.data[k] = (ratio.data[k] == 0.0 && stale.data[k] == 0.0)
                          ? 0.0
                          : ratio.data[k] / std::max(stale.data[k], kMassFloor);
    if (product.vars == ratio.vars) {
      for (std::size_t k = 0; k < product.data.size(); ++k) product.data[k] *= ratio.data[k];
    } else {
      for_each_aligned(product, ratio, [](double& b, double s) { b *= s; });
    }
  }

  void build_local_factors(const std::vector<Factor>& node_factors) {
    local_.clear();
    products_.clear();
    for (const auto& r : rg_.regions) {
      std::vector<int> card;
      for (int v : r.label) card.push_back(cards_.at(v));
      Factor f(r.label, card, 1.0);
      for (int a : r.factors) f = multiply(f, node_factors.at(a));
      if (r.count != 1 && !r.factors.empty()) f = power(f, static_cast<double>(r.count));
      local_.push_back(std::move(f));
    }
  }

  void build_edges() {
    edges_.clear();
    edge_of_parent_slot_.assign(rg_.regions.size(), {});
    edge_of_child_slot_.assign(rg_.regions.size(), {});
    for (std::size_t r = 0; r < rg_.regions.size(); ++r) {
      edge_of_parent_slot_[r].assign(rg_.regions[r].children.size(), -1);
      edge_of_child_slot_[r].assign(rg_.regions[r].parents.size(), -1);
    }
    // Depth-first over the region adjacency starting from the root region,
    // then any regions in components not reached.
    std::vector<bool> seen(rg_.regions.size(), false);
    std::vector<int> stack;
    auto push_edges_of = [&](int r) {
      const Region& reg = rg_.regions[r];
      for (std::size_t slot = 0; slot < reg.children.size(); ++slot)
        add_edge(r, reg.children[slot], static_cast<int>(slot));
      for (std::size_t slot = 0; slot < reg.parents.size(); ++slot)
        add_edge(reg.parents[slot], r, -1, static_cast<int>(slot));
    };
    auto visit = [&](int start) {
      stack.push_back(start);
      while (!stack.empty()) {
        int r = stack.back();
        stack.pop_back();
        if (seen[r]) continue;
        seen[r] = true;
        push_edges_of(r);
        // Neighbors in reverse order for a stable left-to-right walk.
        const Region& reg = rg_.regions[r];
        for (auto it = reg.parents.rbegin(); it != reg.parents.rend(); ++it)
          if (!seen[*it]) stack.push_back(*it);
        for (auto it = reg.children.rbegin(); it != reg.children.rend(); ++it)
          if (!seen[*it]) stack.push_back(*it);
      }
    };
    if (rg_.root_triplet >= 0) visit(rg_.root_triplet);
    for (std::size_t r = 0; r < rg_.regions.size(); ++r)
      if (!seen[r]) visit(static_cast<int>(r));
  }

  void add_edge(int parent, int child, int child_slot = -1, int parent_slot = -1) {
    if (child_slot < 0) {
      const auto& ch = rg_.regions[parent].children;
      child_slot = static_cast<int>(std::find(ch.begin(), ch.end(), child) - ch.begin());
    }
    if (parent_slot < 0) {
      const auto& pa = rg_.regions[child].parents;
      parent_slot = static_cast<int>(std::find(pa.begin(), pa.end(), parent) - pa.begin());
    }
    if (edge_of_parent_slot_[parent][child_slot] >= 0) return;  // already recorded
    EdgeRef e{parent, child, child_slot, parent_slot};
    int idx = static_cast<int>(edges_.size());
    edge_of_parent_slot_[parent][child_slot] = idx;
    edge_of_child_slot_[child][parent_slot] = idx;
    edges_.push_back(e);
  }

  void init_messages() {
    up_.clear();
    down_.clear();
    for (const auto& e : edges_) {
      const Region& child = rg_.regions[e.child];
      std::vector<int> card;
      for (int v : child.label) card.push_back(cards_.at(v));
      up_.emplace_back(child.label, card, 1.0);
      down_.emplace_back(child.label, card, 1.0);
    }
  }

  // Product of the region's local factor with all incoming messages, leaving
  // out one parent (for the region as child) or one child (for the region as
  // parent) when requested.
  Factor region_product_without(int region, int skip_parent_slot, int skip_child_slot) const {
    const Region& r = rg_.regions[region];
    Factor acc = local_[region];
    for (std::size_t slot = 0; slot < r.parents.size(); ++slot) {
      if (static_cast<int>(slot) == skip_parent_slot) continue;
      acc = multiply(acc, down_[edge_of_child_slot_[region][slot]]);
    }
    for (std::size_t slot = 0; slot < r.children.size(); ++slot) {
      if (static_cast<int>(slot) == skip_child_slot) continue;
      acc = multiply(acc, up_[edge_of_parent_slot_[region][slot]]);
    }
    return acc;
  }
};

// ---------------------------------------------------------------------------
// Region-graph inference over a discretized model.

struct RgInferenceOutcome {
  InferenceResult result;
  int bp_iterations = 0;
  double bp_residual = 0.0;
  bool bp_converged = true;
};

namespace detail {

// Overlap-weighted average of an old message onto new partition geometry,
// one variable axis at a time.
inline Factor remap_message_axes(const Factor& msg, const std::vector<Partition>& old_parts,
                                 const std::vector<Partition>& new_parts,
                                 const std::vector<int>& vars) {
  Factor cur = msg;
  for (std::size_t d = 0; d < vars.size(); ++d) {
    const Partition& po = old_parts[d];
    const Partition& pn = new_parts[d];
    if (po.discrete || pn.discrete || po.edges == pn.edges) continue;
    int axis = cur.index_of(vars[d]);
    Factor next;
    next.vars = cur.vars;
    next.card = cur.card;
    next.card[axis] = pn.size();
    next.data.assign(next.size_from_card(), 0.0);
    std::vector<double> weight(next.data.size(), 0.0);

    const auto stride_old = cur.strides();
    const auto stride_new = next.strides();
    // Walk old cells; spread each into overlapping new bins.
    std::vector<int> idx(cur.vars.size(), 0);
    for (std::size_t pos = 0; pos < cur.data.size(); ++pos) {
      int ob = idx[axis];
      auto spans = pn.overlaps(po.lo(ob), po.hi(ob));
      std::size_t base = 0;
      for (std::size_t k = 0; k < idx.size(); ++k)
        if (static_cast<int>(k) != axis) base += stride_new[k] * static_cast<std::size_t>(idx[k]);
      for (auto& [nb, len] : spans) {
        std::size_t off = base + stride_new[axis] * static_cast<std::size_t>(nb);
        next.data[off] += len * cur.data[pos];
        weight[off] += len;
      }
      for (int d2 = static_cast<int>(idx.size()) - 1; d2 >= 0; --d2) {
        if (++idx[d2] < cur.card[d2]) break;
        idx[d2] = 0;
      }
    }
    for (std::size_t k = 0; k < next.data.size(); ++k)
      next.data[k] = weight[k] > 0.0 ? next.data[k] / weight[k] : 1.0;
    cur = std::move(next);
    (void)stride_old;
  }
  return cur;
}

}  // namespace detail

// Settings for the full pipeline.
struct DdbpSettings {
  DdSettings dd;
  GbpSettings bp;
};

// Runs region-graph inference on an already-factorized network with its
// annotation.  The discretization loop warm-starts messages across
// iterations.
inline RgInferenceOutcome rg_infer(const Network& bfg, const BfgAnnotation& ann,
                                   const Evidence& ev, const DdbpSettings& settings) {
  RegionGraph rg = trc(bfg, ann);
  DiscreteModel model(bfg, ev, settings.dd);

  // The region graph's variable order must match the model's.
  if (rg.ids != model.order()) throw structural_error("region graph/model variable order mismatch");

  RgInferenceOutcome out;
  std::unique_ptr<GbpEngine> engine;
  std::map<std::string, Partition> prev_parts;

  auto build_factors = [&]() {
    auto factors = model.build_factors();
    for (auto& [v, s] : model.evidence_bins())
      for (auto& f : factors) f = reduce_evidence(f, v, s);
    return factors;
  };

  const bool hybrid = model.any_continuous();
  std::vector<double> history;
  int iterations = hybrid ? settings.dd.dd_iterations : 1;
  for (int iter = 0; iter < iterations; ++iter) {
    auto factors = build_factors();
    auto cards = model.cards();
    if (!engine) {
      engine = std::make_unique<GbpEngine>(rg, factors, cards);
    } else {
      auto remap = [&](const Factor& msg) {
        std::vector<Partition> oldp, newp;
        for (int v : msg.vars) {
          oldp.push_back(prev_parts.at(model.id_of(v)));
          newp.push_back(model.partition(model.id_of(v)));
        }
        return detail::remap_message_axes(msg, oldp, newp, msg.vars);
      };
      engine->rebind(factors, cards, remap);
    }
    for (const auto& id : model.order()) prev_parts[id] = model.partition(id);

    BeliefSet beliefs = engine->propagate(settings.bp);
    out.bp_iterations = beliefs.iterations;
    out.bp_residual = beliefs.residual;
    out.bp_converged = beliefs.converged;

    // Per-variable marginals from each variable's home region (the level-1
    // region whose factor list contains its CPD).
    InferenceResult pass;
    for (std::size_t v = 0; v < model.order().size(); ++v) {
      int home = -1;
      for (std::size_t r = 0; r < rg.regions.size() && home < 0; ++r)
        if (rg.regions[r].level == 1)
          for (int a : rg.regions[r].factors)
            if (a == static_cast<int>(v)) {
              home = static_cast<int>(r);
              break;
            }
      if (home < 0) throw structural_error("variable has no home region");
      Factor m = normalize(marginalize(beliefs.region_beliefs[home], {static_cast<int>(v)}));
      const std::string& id = model.order()[v];
      if (model.net().node(id).kind == NodeKind::Discrete) {
        pass.discrete[id] = m.data;
      } else {
        DiscretizedDensity d;
        d.partition = model.partition(id);
        d.mass = m.data;
        pass.marginals[id] = std::move(d);
      }
    }
    pass.iterations = iter + 1;
    pass.residual = engine->consistency_residual(beliefs);
    out.result = std::move(pass);
    if (!hybrid) break;

    double err = model.refine_partitions(out.result.marginals);
    out.result.entropy_error = err;
    history.push_back(err);
    double scale = 0.0;
    for (const auto& [id, d] : out.result.marginals) {
      double h = 0.0;
      for (double m : d.mass)
        if (m > 0.0) h -= m * std::log(m);
      scale += std::fabs(h);
    }
    if (err < settings.dd.stop.low_error * std::max(1.0, scale)) break;
    if (static_cast<int>(history.size()) > settings.dd.stop.stable_window) {
      bool stable = true;
      for (int k = 1; k <= settings.dd.stop.stable_window; ++k)
        if (std::fabs(history.back() - history[history.size() - 1 - k]) > settings.dd.stop.stable_tol)
          stable = false;
      if (stable) break;
    }
  }
  return out;
}

// Full pipeline on a general network: topological reordering, densification
// with zero weights, pair-block factorization, triplet region construction,
// then the discretization loop with message passing.  Marginals are returned
// under the original node ids.
inline RgInferenceOutcome ddbp(const Network& net, const Evidence& ev,
                               const DdbpSettings& settings = {}) {
  Network dccd = to_dccd(net);
  auto [bfg, ann] = binary_factorize(dccd);
  RgInferenceOutcome out = rg_infer(bfg, ann, ev, settings);
  // Drop intermediate-variable marginals: only original ids are reported.
  for (const auto& e : ann.intermediates) {
    out.result.marginals.erase(e);
    out.result.discrete.erase(e);
  }
  return out;
}

}  // namespace riskbn
