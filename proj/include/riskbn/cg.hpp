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

// Multivariate Gaussian decomposition into a chain of conditional-Normal
// CPDs (node i conditioned on nodes 1..i-1), plus the exact conditional
// moments used as a validation oracle.

#include <cmath>
#include <string>
#include <vector>

#include "riskbn/common.hpp"
#include "riskbn/network.hpp"

namespace riskbn {

struct MgdSpec {
  std::vector<double> mean;
  std::vector<std::vector<double>> cov;

  std::size_t dim() const { return mean.size(); }

  void validate() const {
    const std::size_t n = dim();
    if (cov.size() != n) throw structural_error("covariance row count differs from mean length");
    for (const auto& row : cov)
      if (row.size() != n) throw structural_error("covariance matrix is not square");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (std::fabs(cov[i][j] - cov[j][i]) > 1e-9 * std::max(1.0, std::fabs(cov[i][j])))
          throw structural_error("covariance matrix is not symmetric");
  }
};

namespace detail {

// Cholesky factor (lower) of a symmetric positive definite matrix.
inline std::vector<std::vector<double>> cholesky(const std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (i == j) {
        if (!(s > 0.0)) throw numeric_error("covariance matrix is not positive definite");
        l[i][j] = std::sqrt(s);
      } else {
        l[i][j] = s / l[j][j];
      }
    }
  }
  return l;
}

// Solve A x = b via a precomputed Cholesky factor.
inline std::vector<double> chol_solve(const std::vector<std::vector<double>>& l,
                                      std::vector<double> b) {
  const std::size_t n = l.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= l[i][k] * b[k];
    b[i] /= l[i][i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) b[i] -= l[k][i] * b[k];
    b[i] /= l[i][i];
  }
  return b;
}

}  // namespace detail

// One conditional-Normal row: x_i ~ N(bias + sum_j weight_j x_j, variance).
struct CgRow {
  double bias = 0.0;
  std::vector<double> weights;  // over nodes 0..i-1
  double variance = 0.0;
};

inline std::vector<CgRow> cg_rows(const MgdSpec& spec) {
  spec.validate();
  const std::size_t n = spec.dim();
  std::vector<CgRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    CgRow& r = rows[i];
    if (i == 0) {
      r.bias = spec.mean[0];
      r.variance = spec.cov[0][0];
      continue;
    }
    std::vector<std::vector<double>> lead(i, std::vector<double>(i));
    for (std::size_t a = 0; a < i; ++a)
      for (std::size_t b = 0; b < i; ++b) lead[a][b] = spec.cov[a][b];
    auto l = detail::cholesky(lead);
    std::vector<double> cross(i);
    for (std::size_t a = 0; a < i; ++a) cross[a] = spec.cov[i][a];
    r.weights = detail::chol_solve(l, cross);
    r.bias = spec.mean[i];
    r.variance = spec.cov[i][i];
    for (std::size_t a = 0; a < i; ++a) {
      r.bias -= r.weights[a] * spec.mean[a];
      r.variance -= r.weights[a] * cross[a];
    }
    if (!(r.variance > 0.0)) throw numeric_error("conditional variance is not positive");
  }
  return rows;
}

// Builds the dense conditional-Normal network X1..Xn (ids "X1", "X2", ...).
inline Network mgd_to_cg(const MgdSpec& spec, const std::string& prefix = "X") {
  auto rows = cg_rows(spec);
  Network net;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Node n;
    n.id = prefix + std::to_string(i + 1);
    n.kind = NodeKind::Continuous;
    std::vector<std::pair<double, ExprPtr>> terms;
    for (std::size_t j = 0; j < rows[i].weights.size(); ++j)
      terms.emplace_back(rows[i].weights[j], make_var(prefix + std::to_string(j + 1)));
    ExprPtr loc;
    if (terms.empty()) {
      loc = make_const(rows[i].bias);
    } else {
      auto e = std::make_shared<Expr>();
      e->kind = ExprKind::WeightedSum;
      e->terms = std::move(terms);
      e->bias = rows[i].bias;
      loc = e;
    }
    n.cpd = make_dist(DistName::Normal, {loc, make_const(rows[i].variance)});
    net.nodes.push_back(std::move(n));
  }
  return net;
}

// Exact conditional moments for the unobserved block given observations
// (index -> value).  Returns means/covariance over the unobserved indices in
// ascending order.
struct GaussianConditional {
  std::vector<std::size_t> kept;  // original indices
  std::vector<double> mean;
  std::vector<std::vector<double>> cov;
};

inline GaussianConditional exact_conditional(const MgdSpec& spec,
                                             const std::map<std::size_t, double>& observed) {
  spec.validate();
  const std::size_t n = spec.dim();
  GaussianConditional out;
  std::vector<std::size_t> obs;
  for (std::size_t i = 0; i < n; ++i) {
    if (observed.count(i)) obs.push_back(i);
    else out.kept.push_back(i);
  }
  if (obs.empty()) {
    out.mean = spec.mean;
    out.cov = spec.cov;
    return out;
  }
  const std::size_t m = obs.size();
  std::vector<std::vector<double>> s_oo(m, std::vector<double>(m));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) s_oo[a][b] = spec.cov[obs[a]][obs[b]];
  auto l = detail::cholesky(s_oo);
  std::vector<double> delta(m);
  for (std::size_t a = 0; a < m; ++a) delta[a] = observed.at(obs[a]) - spec.mean[obs[a]];
  auto alpha = detail::chol_solve(l, delta);

  for (std::size_t u : out.kept) {
    double mu = spec.mean[u];
    std::vector<double> cross(m);
    for (std::size_t a = 0; a < m; ++a) cross[a] = spec.cov[u][obs[a]];
    for (std::size_t a = 0; a < m; ++a) mu += cross[a] * alpha[a];
    out.mean.push_back(mu);
  }
  out.cov.assign(out.kept.size(), std::vector<double>(out.kept.size(), 0.0));
  for (std::size_t r = 0; r < out.kept.size(); ++r) {
    std::vector<double> cross(m);
    for (std::size_t a = 0; a < m; ++a) cross[a] = spec.cov[out.kept[r]][obs[a]];
    auto beta = detail::chol_solve(l, cross);
    for (std::size_t c = 0; c < out.kept.size(); ++c) {
      double v = spec.cov[out.kept[r]][out.kept[c]];
      for (std::size_t a = 0; a < m; ++a) v -= beta[a] * spec.cov[out.kept[c]][obs[a]];
      out.cov[r][c] = v;
    }
  }
  return out;
}

}  // namespace riskbn
