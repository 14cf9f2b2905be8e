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

// Test-only reference computations.  These deliberately avoid the library's
// inference machinery: marginals come from whole-joint enumeration, moments
// from direct sampling or quadrature.

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "riskbn/discrete_model.hpp"
#include "riskbn/network.hpp"

namespace riskbn::testing {

// Exact per-node marginals of a fully discrete network by enumerating every
// joint state.  Optional evidence fixes states.
inline std::map<std::string, std::vector<double>> enumerate_marginals(
    const Network& net, const std::map<std::string, std::string>& evidence = {}) {
  auto order = topo_order(net);
  const int n = static_cast<int>(order.size());
  std::vector<const Node*> nodes;
  std::vector<int> card;
  std::map<std::string, int> pos;
  for (int i = 0; i < n; ++i) {
    nodes.push_back(&net.node(order[i]));
    if (nodes.back()->kind != NodeKind::Discrete)
      throw structural_error("enumeration oracle requires a discrete network");
    card.push_back(static_cast<int>(nodes.back()->states.size()));
    pos[order[i]] = i;
  }
  std::vector<int> fixed(n, -1);
  for (auto& [id, st] : evidence) {
    const Node& nd = net.node(id);
    auto it = std::find(nd.states.begin(), nd.states.end(), st);
    fixed[pos.at(id)] = static_cast<int>(it - nd.states.begin());
  }

  std::vector<std::vector<int>> parent_idx(n);
  for (int i = 0; i < n; ++i)
    for (auto& p : nodes[i]->table_parents) parent_idx[i].push_back(pos.at(p));

  std::vector<std::vector<double>> acc(n);
  for (int i = 0; i < n; ++i) acc[i].assign(card[i], 0.0);

  std::vector<int> state(n, 0);
  double total = 0.0;
  for (;;) {
    bool consistent = true;
    for (int i = 0; i < n && consistent; ++i)
      if (fixed[i] >= 0 && state[i] != fixed[i]) consistent = false;
    if (consistent) {
      double p = 1.0;
      for (int i = 0; i < n && p > 0.0; ++i) {
        std::size_t row = 0;
        for (int pi : parent_idx[i]) row = row * card[pi] + state[pi];
        p *= nodes[i]->table[row * card[i] + state[i]];
      }
      if (p > 0.0) {
        total += p;
        for (int i = 0; i < n; ++i) acc[i][state[i]] += p;
      }
    }
    int d = n - 1;
    for (; d >= 0; --d) {
      if (++state[d] < card[d]) break;
      state[d] = 0;
    }
    if (d < 0) break;
  }
  if (!(total > 0.0)) throw numeric_error("evidence has zero probability under enumeration");
  std::map<std::string, std::vector<double>> out;
  for (int i = 0; i < n; ++i) {
    for (double& v : acc[i]) v /= total;
    out[order[i]] = acc[i];
  }
  return out;
}

// Forward sampling of a (possibly hybrid) network; returns per-node samples.
inline std::map<std::string, std::vector<double>> forward_sample(const Network& net,
                                                                 std::size_t count,
                                                                 std::uint64_t seed) {
  auto order = topo_order(net);
  std::mt19937_64 rng(seed);
  std::map<std::string, std::vector<double>> out;
  std::map<std::string, std::vector<std::string>> state_out;
  for (auto& id : order) out[id].reserve(count);

  for (std::size_t s = 0; s < count; ++s) {
    Assignment a;
    for (auto& id : order) {
      const Node& nd = net.node(id);
      if (nd.kind == NodeKind::Discrete) {
        std::size_t row = 0;
        for (auto& p : nd.table_parents) {
          const Node& pn = net.node(p);
          auto it = std::find(pn.states.begin(), pn.states.end(), a.state(p));
          row = row * pn.states.size() + static_cast<std::size_t>(it - pn.states.begin());
        }
        double u = (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
        double accum = 0.0;
        std::size_t pick = nd.states.size() - 1;
        for (std::size_t k = 0; k < nd.states.size(); ++k) {
          accum += nd.table[row * nd.states.size() + k];
          if (u <= accum) {
            pick = k;
            break;
          }
        }
        a.states[id] = nd.states[pick];
        out[id].push_back(static_cast<double>(pick));
      } else if (is_deterministic(nd.cpd)) {
        double v = eval_value(nd.cpd, a);
        a.values[id] = v;
        out[id].push_back(v);
      } else {
        double v = eval_density(nd.cpd, a).sample(rng);
        a.values[id] = v;
        out[id].push_back(v);
      }
    }
  }
  return out;
}

inline double sample_mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_variance(const std::vector<double>& xs) {
  double mu = sample_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return s / static_cast<double>(xs.size() - 1);
}

// Adaptive-free composite Simpson quadrature on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  if (intervals % 2) ++intervals;
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace riskbn::testing
