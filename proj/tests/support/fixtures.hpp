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

// Benchmark fixtures shared between unit and acceptance tests: the two
// fully-binary factorized-chain models with pinned tables, and the
// covariance family used by the Gaussian experiments.

#include "riskbn/cg.hpp"
#include "riskbn/network.hpp"
#include "support/builders.hpp"

namespace riskbn::testing {

// Five-variable factorized chain (8 binary nodes).  Reference marginals:
// X1 .30000, X2 .48000, X3 .43000, X4 .51879, X5 .59202,
// E1 .39200, E2 .25201, E3 .34616 (probability of state False).
inline std::pair<Network, BfgAnnotation> kappa5_binary() {
  Network net;
  net.nodes.push_back(binary_node("X1", {}, {0.3}));
  net.nodes.push_back(binary_node("X2", {"X1"}, {0.2, 0.6}));
  net.nodes.push_back(binary_node("X3", {"X1", "X2"}, {0.4, 0.7, 0.5, 0.1}));
  net.nodes.push_back(binary_node("E1", {"X1", "X2"}, {0.2, 0.3, 0.4, 0.5}));
  net.nodes.push_back(binary_node("X4", {"X3", "E1"}, {0.3, 0.2, 0.5, 0.9}));
  net.nodes.push_back(binary_node("E2", {"X1", "X2"}, {0.5, 0.4, 0.1, 0.3}));
  net.nodes.push_back(binary_node("E3", {"X3", "E2"}, {0.1, 0.2, 0.7, 0.4}));
  net.nodes.push_back(binary_node("X5", {"E3", "X4"}, {0.8, 0.4, 0.4, 0.7}));
  BfgAnnotation ann;
  ann.originals = {"X1", "X2", "X3", "X4", "X5"};
  ann.intermediates = {"E1", "E2", "E3"};
  ann.origin["E1"] = "X4";
  ann.origin["E2"] = "X5";
  ann.origin["E3"] = "X5";
  return {net, ann};
}

// Eight-variable factorized chain (23 binary nodes) used with evidence
// X8 = False.
inline std::pair<Network, BfgAnnotation> kappa8_binary() {
  Network net;
  net.nodes.push_back(binary_node("X1", {}, {0.3}));
  net.nodes.push_back(binary_node("X2", {"X1"}, {0.2, 0.3}));
  net.nodes.push_back(binary_node("X3", {"X1", "X2"}, {0.2, 0.4, 0.6, 0.8}));
  net.nodes.push_back(binary_node("E27", {"X1", "X2"}, {0.2, 0.4, 0.6, 0.8}));
  net.nodes.push_back(binary_node("E71", {"X1", "X2"}, {0.2, 0.4, 0.6, 0.8}));
  net.nodes.push_back(binary_node("E131", {"X1", "X2"}, {0.2, 0.4, 0.6, 0.8}));
  net.nodes.push_back(binary_node("E209", {"X1", "X2"}, {0.47, 0.1, 0.17, 0.23}));
  net.nodes.push_back(binary_node("E294", {"X1", "X2"}, {0.5, 0.23, 0.29, 0.33}));
  net.nodes.push_back(binary_node("X4", {"E27", "X3"}, {0.4, 0.5, 0.6, 0.7}));
  net.nodes.push_back(binary_node("E68", {"E71", "X3"}, {0.4, 0.5, 0.6, 0.7}));
  net.nodes.push_back(binary_node("E128", {"E131", "X3"}, {0.4, 0.5, 0.6, 0.7}));
  net.nodes.push_back(binary_node("E206", {"E209", "X3"}, {0.375, 0.41, 0.44, 0.47}));
  net.nodes.push_back(binary_node("E289", {"X3", "E294"}, {0.33, 0.41, 0.375, 0.44}));
  net.nodes.push_back(binary_node("X5", {"X4", "E68"}, {0.23, 0.33, 0.29, 0.375}));
  net.nodes.push_back(binary_node("E123", {"X4", "E128"}, {0.44, 0.375, 0.44, 0.17}));
  net.nodes.push_back(binary_node("E201", {"X4", "E206"}, {0.29, 0.23, 0.17, 0.375}));
  net.nodes.push_back(binary_node("E284", {"E289", "X4"}, {0.41, 0.375, 0.17, 0.375}));
  net.nodes.push_back(binary_node("X6", {"E123", "X5"}, {0.17, 0.23, 0.29, 0.33}));
  net.nodes.push_back(binary_node("E194", {"E201", "X5"}, {0.44, 0.17, 0.17, 0.23}));
  net.nodes.push_back(binary_node("E279", {"E284", "X5"}, {0.1, 0.23, 0.17, 0.23}));
  net.nodes.push_back(binary_node("X7", {"E194", "X6"}, {0.33, 0.375, 0.23, 0.17}));
  net.nodes.push_back(binary_node("E274", {"X6", "E279"}, {0.1, 0.23, 0.17, 0.23}));
  net.nodes.push_back(binary_node("X8", {"X7", "E274"}, {0.33, 0.23, 0.17, 0.23}));
  BfgAnnotation ann;
  ann.originals = {"X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8"};
  ann.intermediates = {"E27", "E71", "E131", "E209", "E294", "E68",  "E128", "E206",
                       "E289", "E123", "E201", "E284", "E194", "E279", "E274"};
  ann.origin["E27"] = "X4";
  ann.origin["E71"] = "X5";
  ann.origin["E68"] = "X5";
  ann.origin["E131"] = "X6";
  ann.origin["E128"] = "X6";
  ann.origin["E123"] = "X6";
  ann.origin["E209"] = "X7";
  ann.origin["E206"] = "X7";
  ann.origin["E201"] = "X7";
  ann.origin["E194"] = "X7";
  ann.origin["E294"] = "X8";
  ann.origin["E289"] = "X8";
  ann.origin["E284"] = "X8";
  ann.origin["E279"] = "X8";
  ann.origin["E274"] = "X8";
  return {net, ann};
}

// Mean (2, 3, ..., n+1); covariance v_i^2 diagonal, 0.1 v_i v_j off-diagonal
// (pairwise correlation 0.1 everywhere).
inline MgdSpec gaussian_benchmark(std::size_t n) {
  MgdSpec s;
  for (std::size_t i = 0; i < n; ++i) {
    double vi = static_cast<double>(i + 2);
    s.mean.push_back(vi);
    s.cov.emplace_back();
    for (std::size_t j = 0; j < n; ++j) {
      double vj = static_cast<double>(j + 2);
      s.cov.back().push_back(i == j ? vi * vi : 0.1 * vi * vj);
    }
  }
  return s;
}

}  // namespace riskbn::testing
