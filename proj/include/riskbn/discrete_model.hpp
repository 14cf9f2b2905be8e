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

// Shared machinery between the inference engines: per-node partitions,
// support propagation, evidence binning, and CPD-to-factor materialization.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "riskbn/discretize.hpp"
#include "riskbn/factor.hpp"
#include "riskbn/network.hpp"

namespace riskbn {

// Evidence: discrete nodes take a state label, continuous nodes a real value.
struct Evidence {
  std::map<std::string, std::string> states;
  std::map<std::string, double> values;

  bool empty() const { return states.empty() && values.empty(); }
  bool observed(const std::string& id) const { return states.count(id) || values.count(id); }
};

struct DdSettings {
  int dd_iterations = 25;
  int initial_bins = 3;
  double truncation_eps = 1e-5;
  RefinePolicy refine;
  DdStopRule stop;
};

// A Network bound to concrete discretizations: integer variable ids, one
// partition per node, and factor construction.
class DiscreteModel {
 public:
  DiscreteModel(const Network& net, const Evidence& ev, const DdSettings& settings)
      : net_(net), ev_(ev), settings_(settings) {
    order_ = topo_order(net_);
    for (std::size_t i = 0; i < order_.size(); ++i) var_[order_[i]] = static_cast<int>(i);
    compute_supports();
    init_partitions();
  }

  const std::vector<std::string>& order() const { return order_; }
  int var(const std::string& id) const { return var_.at(id); }
  const std::string& id_of(int v) const { return order_[v]; }
  const Partition& partition(const std::string& id) const { return parts_.at(id); }
  const Network& net() const { return net_; }
  const Evidence& evidence() const { return ev_; }

  bool any_continuous() const {
    for (const auto& n : net_.nodes)
      if (n.kind == NodeKind::Continuous) return true;
    return false;
  }

  std::vector<int> cards() const {
    std::vector<int> c(order_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) c[i] = parts_.at(order_[i]).size();
    return c;
  }

  // Evidence as (var, state/bin index) pairs on the current partitions.
  std::vector<std::pair<int, int>> evidence_bins() const {
    std::vector<std::pair<int, int>> out;
    for (const auto& [id, st] : ev_.states) {
      const Node& n = net_.node(id);
      auto it = std::find(n.states.begin(), n.states.end(), st);
      if (it == n.states.end())
        throw structural_error(detail::cat("evidence state '", st, "' unknown for node '", id, "'"));
      out.emplace_back(var(id), static_cast<int>(it - n.states.begin()));
    }
    for (const auto& [id, v] : ev_.values) out.emplace_back(var(id), parts_.at(id).locate(v));
    return out;
  }

  // One factor per node: P(node | parents) over the current partitions.
  std::vector<Factor> build_factors() const {
    std::vector<Factor> out;
    for (const auto& id : order_) out.push_back(node_factor(id));
    return out;
  }

  Factor node_factor(const std::string& id) const {
    const Node& n = net_.node(id);
    if (n.kind == NodeKind::Discrete) return table_factor(n);
    std::vector<NptParent> ps;
    std::vector<std::string> names;
    for (const auto& pid : net_.parents(n)) {
      const Node& pn = net_.node(pid);
      ps.push_back({var(pid), &parts_.at(pid), pn.kind == NodeKind::Discrete ? &pn.states : nullptr});
      names.push_back(pid);
    }
    const Partition& cp = parts_.at(id);
    if (is_deterministic(n.cpd)) return deterministic_npt(var(id), cp, ps, names, n.cpd);
    return statistical_npt(var(id), cp, ps, names, n.cpd);
  }

  // Refine every unobserved continuous node's partition against its current
  // marginal.  Returns the summed error (the DD convergence signal).
  double refine_partitions(const std::map<std::string, DiscretizedDensity>& marginals) {
    double total_error = 0.0;
    for (const auto& id : order_) {
      const Node& n = net_.node(id);
      if (n.kind == NodeKind::Discrete) continue;
      auto it = marginals.find(id);
      if (it == marginals.end()) continue;
      const auto& m = it->second;
      auto errs = bin_errors(m.partition, m.mass);
      for (double e : errs) total_error += e;
      if (ev_.values.count(id)) continue;  // observed nodes keep their pinned grid
      const auto& sup = supports_.at(id);
      parts_[id] = refine(m.partition, errs, m.mass, settings_.refine, -1, !sup.lo_hard,
                          !sup.hi_hard);
    }
    return total_error;
  }

  // Piecewise marginal for a node from a normalized factor over (var).
  DiscretizedDensity marginal_from(const Factor& f, const std::string& id) const {
    DiscretizedDensity d;
    d.partition = parts_.at(id);
    Factor m = normalize(marginalize(f, {var(id)}));
    d.mass = m.data;
    return d;
  }

 private:
  const Network& net_;
  Evidence ev_;
  DdSettings settings_;
  std::vector<std::string> order_;
  std::map<std::string, int> var_;
  std::map<std::string, Partition> parts_;
  std::map<std::string, SupportBound> supports_;

  Factor table_factor(const Node& n) const {
    std::vector<NptParent> ps;
    for (const auto& pid : n.table_parents) {
      const Node& pn = net_.node(pid);
      ps.push_back({var(pid), &parts_.at(pid), pn.kind == NodeKind::Discrete ? &pn.states : nullptr});
    }
    std::vector<int> vars, card, axes;
    Partition self = Partition::make_discrete(static_cast<int>(n.states.size()));
    detail::sorted_scope(var(n.id), ps, vars, card, self, axes);
    Factor f(vars, card, 0.0);
    const auto stride = f.strides();

    std::size_t expected = n.states.size();
    for (const auto& p : ps) expected *= static_cast<std::size_t>(p.part->size());
    if (n.table.size() != expected)
      throw structural_error(detail::cat("node '", n.id, "' table has ", n.table.size(), " entries, expected ",
                                         expected));
    // Declared layout: first parent slowest, child fastest.
    std::vector<int> pidx(ps.size(), 0);
    std::size_t flat = 0;
    for (;;) {
      std::size_t base = 0;
      for (std::size_t p = 0; p < ps.size(); ++p)
        base += stride[axes[1 + p]] * static_cast<std::size_t>(pidx[p]);
      for (std::size_t s = 0; s < n.states.size(); ++s)
        f.data[base + stride[axes[0]] * s] = n.table[flat++];
      int d = static_cast<int>(ps.size()) - 1;
      for (; d >= 0; --d) {
        if (++pidx[d] < ps[d].part->size()) break;
        pidx[d] = 0;
      }
      if (d < 0) break;
    }
    return f;
  }

  void compute_supports() {
    for (const auto& id : order_) {
      const Node& n = net_.node(id);
      if (n.kind == NodeKind::Discrete) continue;
      supports_[id] = node_support(n);
    }
  }

  SupportBound node_support(const Node& n) const {
    if (n.support) return {n.support->first, n.support->second, true, true};
    // Propagate interval bounds through the CPD: deterministic expressions
    // via corner arithmetic on parent supports, distributions via quantiles
    // at extreme parameter values.  Hardness tracks whether an end is a
    // natural bound (never extended) or a quantile truncation.
    auto merge_lo = [](SupportBound& acc, double lo, bool hard) {
      if (lo < acc.lo - 1e-12) {
        acc.lo = lo;
        acc.lo_hard = hard;
      } else if (lo <= acc.lo + 1e-12) {
        acc.lo_hard = acc.lo_hard && hard;
      }
    };
    auto merge_hi = [](SupportBound& acc, double hi, bool hard) {
      if (hi > acc.hi + 1e-12) {
        acc.hi = hi;
        acc.hi_hard = hard;
      } else if (hi >= acc.hi - 1e-12) {
        acc.hi_hard = acc.hi_hard && hard;
      }
    };
    std::function<SupportBound(const ExprPtr&)> walk = [&](const ExprPtr& e) -> SupportBound {
      switch (e->kind) {
        case ExprKind::Constant: return {e->value, e->value, true, true};
        case ExprKind::Var: {
          auto it = supports_.find(e->var);
          if (it == supports_.end())
            throw structural_error(detail::cat("no support available for parent '", e->var, "'"));
          return it->second;
        }
        case ExprKind::WeightedSum: {
          SupportBound out{e->bias, e->bias, true, true};
          for (auto& [c, t] : e->terms) {
            SupportBound b = walk(t);
            double a1 = c * b.lo, a2 = c * b.hi;
            bool h1 = c >= 0.0 ? b.lo_hard : b.hi_hard;
            bool h2 = c >= 0.0 ? b.hi_hard : b.lo_hard;
            out.lo += std::min(a1, a2);
            out.hi += std::max(a1, a2);
            out.lo_hard = out.lo_hard && h1;
            out.hi_hard = out.hi_hard && h2;
          }
          return out;
        }
        case ExprKind::Product: {
          SupportBound l = walk(e->lhs), r = walk(e->rhs);
          double c1 = l.lo * r.lo, c2 = l.lo * r.hi, c3 = l.hi * r.lo, c4 = l.hi * r.hi;
          bool all_hard = l.lo_hard && l.hi_hard && r.lo_hard && r.hi_hard;
          return {std::min({c1, c2, c3, c4}), std::max({c1, c2, c3, c4}), all_hard, all_hard};
        }
        case ExprKind::Dist: {
          SupportBound p0 = walk(e->params[0]);
          SupportBound p1 = e->params.size() > 1 ? walk(e->params[1]) : SupportBound{};
          const double eps = settings_.truncation_eps;
          auto q = [&](double a, double b, double quantile) {
            Dist d{e->dist, a, b};
            d.validate();
            return d.quantile(quantile);
          };
          switch (e->dist) {
            case DistName::Normal:
              return {q(p0.lo, p1.hi, eps), q(p0.hi, p1.hi, 1.0 - eps), false, false};
            case DistName::Exponential:
              return {0.0, q(p0.lo, 0.0, 1.0 - eps), true, false};
            case DistName::Gamma:
              return {0.0, q(p0.hi, p1.hi, 1.0 - eps), true, false};
            case DistName::Poisson:
              return {0.0, q(p0.hi, 0.0, 1.0 - eps), true, false};
            case DistName::Geometric:
              return {0.0, q(p0.lo, 0.0, 1.0 - eps), true, false};
            case DistName::Uniform:
              return {p0.lo, p1.hi, true, true};
          }
          return {0.0, 1.0, false, false};
        }
        case ExprKind::Mixture: {
          SupportBound out{HUGE_VAL, -HUGE_VAL, true, true};
          for (auto& c : e->comps) {
            SupportBound b = walk(c);
            merge_lo(out, b.lo, b.lo_hard);
            merge_hi(out, b.hi, b.hi_hard);
          }
          return out;
        }
        case ExprKind::Partitioned: {
          SupportBound out{HUGE_VAL, -HUGE_VAL, true, true};
          for (auto& [s, c] : e->cases) {
            SupportBound b = walk(c);
            merge_lo(out, b.lo, b.lo_hard);
            merge_hi(out, b.hi, b.hi_hard);
          }
          return out;
        }
      }
      return {0.0, 1.0, false, false};
    };
    SupportBound b = walk(n.cpd);
    if (!(b.hi > b.lo)) {
      // Point supports (degenerate CPDs) get a small symmetric widening.
      double pad = std::max(1e-9, std::fabs(b.lo) * 1e-9);
      b.lo -= pad;
      b.hi += pad;
    }
    return b;
  }

  void init_partitions() {
    for (const auto& id : order_) {
      const Node& n = net_.node(id);
      if (n.kind == NodeKind::Discrete) {
        parts_[id] = Partition::make_discrete(static_cast<int>(n.states.size()));
        continue;
      }
      const auto& sup = supports_.at(id);
      const double lo = sup.lo, hi = sup.hi;
      if (auto it = ev_.values.find(id); it != ev_.values.end()) {
        // Observed continuous value: a tight dedicated bin flanked by the
        // rest of the support.
        double v = it->second;
        double delta = std::max(1e-9, 1e-6 * (hi - lo));
        std::vector<double> edges;
        if (v - delta > lo) edges.push_back(lo);
        edges.push_back(v - delta);
        edges.push_back(v + delta);
        if (v + delta < hi) edges.push_back(hi);
        parts_[id] = Partition::from_edges(std::move(edges));
      } else {
        parts_[id] = Partition::make_uniform(lo, hi, settings_.initial_bins);
      }
    }
  }
};

}  // namespace riskbn
