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

// Small helpers for assembling test networks.

#include <random>
#include <string>
#include <vector>

#include "riskbn/network.hpp"

namespace riskbn::testing {

inline Node continuous_node(const std::string& id, const std::string& cpd) {
  Node n;
  n.id = id;
  n.kind = NodeKind::Continuous;
  n.cpd = parse_expr(cpd);
  return n;
}

inline Node binary_node(const std::string& id, std::vector<std::string> parents,
                        std::vector<double> false_probs) {
  Node n;
  n.id = id;
  n.kind = NodeKind::Discrete;
  n.states = {"False", "True"};
  n.table_parents = std::move(parents);
  for (double f : false_probs) {
    n.table.push_back(f);
    n.table.push_back(1.0 - f);
  }
  return n;
}

// Dense chain of conditional Normals: node i depends on all predecessors
// with random small weights.  Always decomposable.
inline Network random_dense_gaussian(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> w(-0.4, 0.4);
  std::uniform_real_distribution<double> v(0.5, 3.0);
  Network net;
  for (int i = 1; i <= n; ++i) {
    std::string loc = std::to_string(i * 1.0);
    for (int j = 1; j < i; ++j)
      loc += " + " + std::to_string(w(rng)) + "*X" + std::to_string(j);
    net.nodes.push_back(continuous_node("X" + std::to_string(i),
                                        "Normal(" + loc + ", " + std::to_string(v(rng)) + ")"));
  }
  return net;
}

// Random sparse binary network: each node keeps a random subset of earlier
// nodes as parents (at most `max_parents`), probabilities kept away from 0/1.
inline Network random_sparse_binary(int n, int max_parents, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Network net;
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> parents;
    for (int j = 0; j < i && static_cast<int>(parents.size()) < max_parents; ++j)
      if (rng() % 3 == 0) parents.push_back("N" + std::to_string(j));
    std::size_t rows = std::size_t{1} << parents.size();
    std::vector<double> fp(rows);
    for (auto& f : fp) f = u(rng);
    net.nodes.push_back(binary_node("N" + std::to_string(i), parents, fp));
  }
  return net;
}

}  // namespace riskbn::testing
