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

// Dense factor algebra over discretized variables.  Variables are integer
// ids; a factor stores its scope (ascending ids), per-variable cardinalities
// and a row-major table (last scope variable fastest).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "riskbn/common.hpp"

namespace riskbn {

struct Factor {
  std::vector<int> vars;   // ascending
  std::vector<int> card;   // aligned with vars
  std::vector<double> data;

  Factor() = default;
  Factor(std::vector<int> v, std::vector<int> c, double fill = 0.0) : vars(std::move(v)), card(std::move(c)) {
    data.assign(size_from_card(), fill);
  }

  std::size_t size_from_card() const {
    std::size_t n = 1;
    for (int c : card) n *= static_cast<std::size_t>(c);
    return n;
  }

  int index_of(int var) const {
    auto it = std::lower_bound(vars.begin(), vars.end(), var);
    if (it == vars.end() || *it != var) return -1;
    return static_cast<int>(it - vars.begin());
  }

  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> s(vars.size(), 1);
    for (int i = static_cast<int>(vars.size()) - 2; i >= 0; --i)
      s[i] = s[i + 1] * static_cast<std::size_t>(card[i + 1]);
    return s;
  }

  double total() const { return std::accumulate(data.begin(), data.end(), 0.0); }

  bool valid() const {
    if (data.size() != size_from_card()) return false;
    for (double v : data)
      if (!(v >= 0.0) || !std::isfinite(v)) return false;
    return true;
  }
};

inline Factor identity_factor() {
  Factor f;
  f.data = {1.0};
  return f;
}

namespace detail {

// Maps each position of `sub.vars` to its position in `sup.vars` (-1 when
// absent); used to walk a subscope table in lockstep with a superscope one.
inline std::vector<int> scope_map(const std::vector<int>& sub, const std::vector<int>& sup) {
  std::vector<int> m(sub.size(), -1);
  for (std::size_t i = 0; i < sub.size(); ++i) {
    auto it = std::lower_bound(sup.begin(), sup.end(), sub[i]);
    m[i] = (it != sup.end() && *it == sub[i]) ? static_cast<int>(it - sup.begin()) : -1;
  }
  return m;
}

}  // namespace detail

// Cellwise product; scope is the union.  Shared variables must agree on
// cardinality.
inline Factor multiply(const Factor& a, const Factor& b) {
  Factor out;
  out.vars.reserve(a.vars.size() + b.vars.size());
  std::set_union(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(), std::back_inserter(out.vars));
  out.card.resize(out.vars.size());
  for (std::size_t i = 0; i < out.vars.size(); ++i) {
    int ia = a.index_of(out.vars[i]);
    int ib = b.index_of(out.vars[i]);
    if (ia >= 0 && ib >= 0 && a.card[ia] != b.card[ib])
      throw structural_error(detail::cat("state count mismatch on variable ", out.vars[i]));
    out.card[i] = ia >= 0 ? a.card[ia] : b.card[ib];
  }
  out.data.assign(out.size_from_card(), 0.0);

  const auto mapA = detail::scope_map(a.vars, out.vars);
  const auto mapB = detail::scope_map(b.vars, out.vars);
  const auto strideA = a.strides();
  const auto strideB = b.strides();
  std::vector<std::size_t> stepA(out.vars.size(), 0), stepB(out.vars.size(), 0);
  for (std::size_t i = 0; i < a.vars.size(); ++i) stepA[mapA[i]] = strideA[i];
  for (std::size_t i = 0; i < b.vars.size(); ++i) stepB[mapB[i]] = strideB[i];

  std::vector<int> idx(out.vars.size(), 0);
  std::size_t offA = 0, offB = 0;
  const std::size_t n = out.data.size();
  for (std::size_t pos = 0; pos < n; ++pos) {
    out.data[pos] = a.data[offA] * b.data[offB];
    for (int d = static_cast<int>(out.vars.size()) - 1; d >= 0; --d) {
      if (++idx[d] < out.card[d]) {
        offA += stepA[d];
        offB += stepB[d];
        break;
      }
      offA -= stepA[d] * static_cast<std::size_t>(out.card[d] - 1);
      offB -= stepB[d] * static_cast<std::size_t>(out.card[d] - 1);
      idx[d] = 0;
    }
  }
  return out;
}

// Sum out every variable not in `keep`.
inline Factor marginalize(const Factor& f, const std::vector<int>& keep_sorted) {
  for (int v : keep_sorted)
    if (f.index_of(v) < 0) throw structural_error(detail::cat("cannot keep unknown variable ", v));
  Factor out;
  out.vars = keep_sorted;
  out.card.resize(out.vars.size());
  for (std::size_t i = 0; i < out.vars.size(); ++i) out.card[i] = f.card[f.index_of(out.vars[i])];
  out.data.assign(out.size_from_card(), 0.0);

  const auto mapK = detail::scope_map(out.vars, f.vars);
  const auto strideOut = out.strides();
  std::vector<std::size_t> step(f.vars.size(), 0);
  for (std::size_t i = 0; i < out.vars.size(); ++i) step[mapK[i]] = strideOut[i];

  std::vector<int> idx(f.vars.size(), 0);
  std::size_t off = 0;
  const std::size_t n = f.data.size();
  for (std::size_t pos = 0; pos < n; ++pos) {
    out.data[off] += f.data[pos];
    for (int d = static_cast<int>(f.vars.size()) - 1; d >= 0; --d) {
      if (++idx[d] < f.card[d]) {
        off += step[d];
        break;
      }
      off -= step[d] * static_cast<std::size_t>(f.card[d] - 1);
      idx[d] = 0;
    }
  }
  return out;
}

inline Factor marginalize_out(const Factor& f, const std::vector<int>& drop) {
  std::vector<int> keep;
  for (int v : f.vars)
    if (!std::binary_search(drop.begin(), drop.end(), v)) keep.push_back(v);
  return marginalize(f, keep);
}

inline Factor normalize(const Factor& f) {
  double t = f.total();
  if (!(t > 0.0)) throw numeric_error("cannot normalize an all-zero factor (inconsistent evidence?)");
  Factor out = f;
  for (double& v : out.data) v /= t;
  return out;
}

// Cellwise quotient with the 0/0 -> 0 convention.
inline Factor divide(const Factor& num, const Factor& den) {
  if (num.vars != den.vars || num.card != den.card) {
    // Align den onto num's scope by multiplication with an all-ones factor.
    Factor ones(num.vars, num.card, 1.0);
    return divide(num, multiply(den, ones));
  }
  Factor out = num;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    double d = den.data[i];
    out.data[i] = (out.data[i] == 0.0 && d == 0.0) ? 0.0 : out.data[i] / std::max(d, kMassFloor);
  }
  return out;
}

// Cellwise power; entries are floored before negative exponents.
inline Factor power(const Factor& f, double c) {
  Factor out = f;
  if (c == 1.0) return out;
  for (double& v : out.data) {
    double base = c < 0.0 ? std::max(v, kMassFloor) : v;
    v = std::pow(base, c);
  }
  return out;
}

// Zero out all entries incompatible with var == state; the scope is kept.
inline Factor reduce_evidence(const Factor& f, int var, int state) {
  int d = f.index_of(var);
  if (d < 0) return f;
  if (state < 0 || state >= f.card[d])
    throw structural_error(detail::cat("evidence state ", state, " out of range for variable ", var));
  Factor out = f;
  const auto stride = f.strides();
  const std::size_t s = stride[d];
  const std::size_t block = s * static_cast<std::size_t>(f.card[d]);
  for (std::size_t base = 0; base < out.data.size(); base += block)
    for (int k = 0; k < f.card[d]; ++k) {
      if (k == state) continue;
      std::size_t off = base + static_cast<std::size_t>(k) * s;
      std::fill(out.data.begin() + off, out.data.begin() + off + s, 0.0);
    }
  return out;
}

// Rescale so the max entry is 1.  The discarded constant is irrelevant for
// message passing; beliefs are re-normalized at read.
inline void max_normalize(Factor& f) {
  double m = 0.0;
  for (double v : f.data) m = std::max(m, v);
  if (m > 0.0 && m != 1.0)
    for (double& v : f.data) v /= m;
}

// Applies fn(big_entry, small_entry) cellwise where small's scope is a
// subset of big's.  Used for in-place broadcast products and quotients on
// the message-passing hot path.
template <typename Fn>
inline void for_each_aligned(Factor& big, const Factor& small, Fn&& fn) {
  const auto map = detail::scope_map(small.vars, big.vars);
  const auto stride_small = small.strides();
  std::vector<std::size_t> step(big.vars.size(), 0);
  for (std::size_t i = 0; i < small.vars.size(); ++i) {
    if (map[i] < 0) throw structural_error("broadcast scope is not a subset");
    step[map[i]] = stride_small[i];
  }
  std::vector<int> idx(big.vars.size(), 0);
  std::size_t off = 0;
  const std::size_t n = big.data.size();
  for (std::size_t pos = 0; pos < n; ++pos) {
    fn(big.data[pos], small.data[off]);
    for (int d = static_cast<int>(big.vars.size()) - 1; d >= 0; --d) {
      if (++idx[d] < big.card[d]) {
        off += step[d];
        break;
      }
      off -= step[d] * static_cast<std::size_t>(big.card[d] - 1);
      idx[d] = 0;
    }
  }
}

}  // namespace riskbn
