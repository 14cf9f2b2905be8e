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

// Interval partitions, per-bin entropy-error scores, the split/merge
// refinement policy, and table generation from deterministic and statistical
// CPDs over discretized parents.

#include <algorithm>
#include <cmath>
#include <vector>

#include "riskbn/common.hpp"
#include "riskbn/expr.hpp"
#include "riskbn/factor.hpp"

namespace riskbn {

// Ordered, contiguous intervals over a (truncated) support.  Discrete
// variables are represented by a state count with no interval geometry.
struct Partition {
  bool discrete = false;
  int nstates = 0;                // discrete only
  std::vector<double> edges;      // continuous only: nstates+1 ascending edges

  static Partition make_discrete(int n) {
    Partition p;
    p.discrete = true;
    p.nstates = n;
    return p;
  }
  static Partition make_uniform(double lo, double hi, int bins) {
    if (!(hi > lo) || bins < 1) throw structural_error("empty support for partition");
    Partition p;
    p.nstates = bins;
    p.edges.resize(bins + 1);
    for (int i = 0; i <= bins; ++i) p.edges[i] = lo + (hi - lo) * i / bins;
    return p;
  }
  static Partition from_edges(std::vector<double> e) {
    if (e.size() < 2) throw structural_error("partition needs at least one interval");
    for (std::size_t i = 1; i < e.size(); ++i)
      if (!(e[i] > e[i - 1])) throw structural_error("partition edges must be strictly increasing");
    Partition p;
    p.nstates = static_cast<int>(e.size()) - 1;
    p.edges = std::move(e);
    return p;
  }

  int size() const { return nstates; }
  double lo(int i) const { return edges[i]; }
  double hi(int i) const { return edges[i + 1]; }
  double width(int i) const { return edges[i + 1] - edges[i]; }
  double mid(int i) const { return 0.5 * (edges[i] + edges[i + 1]); }
  double support_lo() const { return edges.front(); }
  double support_hi() const { return edges.back(); }

  int locate(double x) const {
    if (x <= edges.front()) return 0;
    if (x >= edges.back()) return nstates - 1;
    int idx = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin()) - 1;
    return std::clamp(idx, 0, nstates - 1);
  }

  // Fraction of [a,b] overlapping each bin, as (bin, length) pairs.
  std::vector<std::pair<int, double>> overlaps(double a, double b) const {
    std::vector<std::pair<int, double>> out;
    if (b < a) std::swap(a, b);
    double lo_clip = std::max(a, support_lo());
    double hi_clip = std::min(b, support_hi());
    if (hi_clip < lo_clip) {
      // Entirely outside: clip to the nearest boundary bin.
      out.emplace_back(b <= support_lo() ? 0 : nstates - 1, 1.0);
      return out;
    }
    int first = locate(lo_clip), last = locate(hi_clip);
    if (a == b) {
      out.emplace_back(first, 1.0);
      return out;
    }
    for (int i = first; i <= last; ++i) {
      double l = std::max(lo_clip, lo(i)), h = std::min(hi_clip, hi(i));
      if (h > l) out.emplace_back(i, h - l);
    }
    // Mass falling outside the covered support goes to the boundary bins.
    if (a < support_lo()) {
      if (!out.empty() && out.front().first == 0) out.front().second += support_lo() - a;
      else out.insert(out.begin(), {0, support_lo() - a});
    }
    if (b > support_hi()) {
      if (!out.empty() && out.back().first == nstates - 1) out.back().second += b - support_hi();
      else out.emplace_back(nstates - 1, b - support_hi());
    }
    return out;
  }
};

// Piecewise-constant density: a partition plus per-bin mass.
struct DiscretizedDensity {
  Partition partition;
  std::vector<double> mass;

  void check() const {
    if (static_cast<int>(mass.size()) != partition.size())
      throw structural_error("mass vector does not match partition");
    double t = 0.0;
    for (double m : mass) {
      if (m < 0.0) throw numeric_error("negative bin mass");
      t += m;
    }
    if (std::fabs(t - 1.0) > 1e-9) throw numeric_error(detail::cat("masses sum to ", t));
  }

  double mean() const {
    double s = 0.0;
    for (int i = 0; i < partition.size(); ++i) s += mass[i] * partition.mid(i);
    return s;
  }
  double variance() const {
    const double mu = mean();
    double s = 0.0;
    for (int i = 0; i < partition.size(); ++i) {
      const double m = partition.mid(i), w = partition.width(i);
      s += mass[i] * ((m - mu) * (m - mu) + w * w / 12.0);
    }
    return s;
  }
  // Linear interpolation within the containing bin.
  double quantile(double q) const {
    double acc = 0.0;
    for (int i = 0; i < partition.size(); ++i) {
      if (acc + mass[i] >= q) {
        double frac = mass[i] > 0.0 ? (q - acc) / mass[i] : 0.0;
        return partition.lo(i) + frac * partition.width(i);
      }
      acc += mass[i];
    }
    return partition.support_hi();
  }
};

// ---------------------------------------------------------------------------
// Refinement policy and error scores

struct RefinePolicy {
  double split_fraction = 0.10;     // split the top fraction of bins by error
  double merge_mass = 1e-6;         // merge adjacent bins under this combined mass
  int max_bins = 256;
  double boundary_mass = 1e-3;      // extend support when an edge bin exceeds this
  double extend_factor = 0.5;       // new outer bin width relative to current span
};

struct DdStopRule {
  double low_error = 1e-3;          // stop when total error < low_error * entropy scale
  double stable_tol = 1e-6;         // or when unchanged within this across a window
  int stable_window = 3;
};

// Per-bin relative-entropy surrogate: |w_j| * (fmax - fmin) * |ln((fmax+d)/(fmin+d))|
// with bin densities compared against their immediate neighbours.  Zero
// exactly when the density is locally constant.
inline std::vector<double> bin_errors(const Partition& part, const std::vector<double>& mass) {
  const int n = part.size();
  std::vector<double> dens(n), err(n, 0.0);
  for (int i = 0; i < n; ++i) dens[i] = mass[i] / std::max(part.width(i), kMassFloor);
  for (int i = 0; i < n; ++i) {
    double fmin = dens[i], fmax = dens[i];
    if (i > 0) {
      fmin = std::min(fmin, dens[i - 1]);
      fmax = std::max(fmax, dens[i - 1]);
    }
    if (i + 1 < n) {
      fmin = std::min(fmin, dens[i + 1]);
      fmax = std::max(fmax, dens[i + 1]);
    }
    if (fmax > fmin)
      err[i] = part.width(i) * (fmax - fmin) * std::fabs(std::log((fmax + kMassFloor) / (fmin + kMassFloor)));
  }
  return err;
}

// Split the highest-error bins at their midpoints, merge negligible-mass
// neighbours, and extend the support when boundary bins carry real mass.
// `pin` marks bins that must survive untouched (evidence bins).
inline Partition refine(const Partition& part, const std::vector<double>& errors,
                        const std::vector<double>& mass, const RefinePolicy& policy = {},
                        int pin = -1, bool allow_extend_lo = true, bool allow_extend_hi = true) {
  if (part.discrete) return part;
  const int n = part.size();
  int budget = std::max(1, static_cast<int>(std::ceil(policy.split_fraction * n)));

  // Rank bins by error, largest first; ties by lower index for determinism.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return errors[a] > errors[b]; });
  std::vector<bool> split(n, false);
  for (int r = 0; r < n && budget > 0; ++r) {
    int i = order[r];
    if (errors[i] <= 0.0) break;
    if (i == pin) continue;
    if (n + 1 > policy.max_bins) break;
    split[i] = true;
    --budget;
  }

  std::vector<double> edges;
  edges.push_back(part.support_lo());
  std::vector<double> newmass, newerr;
  for (int i = 0; i < n; ++i) {
    if (split[i]) {
      edges.push_back(part.mid(i));
      newmass.push_back(0.5 * mass[i]);
      newerr.push_back(errors[i]);
    }
    edges.push_back(part.hi(i));
    newmass.push_back(split[i] ? 0.5 * mass[i] : mass[i]);
    newerr.push_back(errors[i]);
  }

  // Merge runs of bins that carry neither mass nor error; anything with a
  // positive error score stays, so fresh splits at a density boundary are
  // not undone.  The pinned bin is never merged away.
  if (policy.merge_mass > 0.0) {
    std::vector<double> mergedEdges{edges.front()};
    std::vector<double> mergedMass;
    std::vector<bool> mergedQuiet;
    double pinLo = pin >= 0 ? part.lo(pin) : 0.0, pinHi = pin >= 0 ? part.hi(pin) : 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      double m = newmass[i];
      bool isPinned = pin >= 0 && edges[i] >= pinLo - 1e-300 && edges[i + 1] <= pinHi + 1e-300;
      bool quiet = !isPinned && m < policy.merge_mass && newerr[i] <= 0.0;
      if (!mergedMass.empty() && quiet && mergedQuiet.back() &&
          mergedMass.back() + m < policy.merge_mass) {
        mergedEdges.back() = edges[i + 1];
        mergedMass.back() += m;
      } else {
        mergedEdges.push_back(edges[i + 1]);
        mergedMass.push_back(m);
        mergedQuiet.push_back(quiet);
      }
    }
    edges = std::move(mergedEdges);
    newmass = std::move(mergedMass);
  }

  // Support extension when mass piles up against a truncated boundary: the
  // edge bin carries real mass and its density dominates its inner
  // neighbour.  Natural bounds (e.g. nonnegative supports) never extend.
  double span = edges.back() - edges.front();
  if (newmass.size() >= 2) {
    auto dens = [&](std::size_t i) { return newmass[i] / std::max(edges[i + 1] - edges[i], kMassFloor); };
    if (allow_extend_lo && newmass.front() > policy.boundary_mass && dens(0) > dens(1))
      edges.insert(edges.begin(), edges.front() - policy.extend_factor * span);
    std::size_t last = newmass.size() - 1;
    if (allow_extend_hi && newmass.back() > policy.boundary_mass && dens(last) > dens(last - 1))
      edges.push_back(edges.back() + policy.extend_factor * span);
  }

  return Partition::from_edges(std::move(edges));
}

// ---------------------------------------------------------------------------
// Table generation
//
// Factors are laid out over integer variable ids supplied by the caller; the
// child id comes first in `child_var`, parents follow in the order of
// `parent_vars`/`parent_parts`.  Discrete parents select Partitioned cases by
// state label (via `state_names`).

struct NptParent {
  int var;
  const Partition* part;
  const std::vector<std::string>* states = nullptr;  // labels for discrete parents
};

namespace detail {

inline void sorted_scope(int child, const std::vector<NptParent>& parents, std::vector<int>& vars,
                         std::vector<int>& card, const Partition& child_part,
                         std::vector<int>& child_axis_and_parent_axes) {
  struct Entry {
    int var;
    int card;
    int role;  // -1 child, otherwise parent index
  };
  std::vector<Entry> es{{child, child_part.size(), -1}};
  for (std::size_t i = 0; i < parents.size(); ++i)
    es.push_back({parents[i].var, parents[i].part->size(), static_cast<int>(i)});
  std::sort(es.begin(), es.end(), [](const Entry& a, const Entry& b) { return a.var < b.var; });
  vars.clear();
  card.clear();
  child_axis_and_parent_axes.assign(parents.size() + 1, -1);
  for (std::size_t i = 0; i < es.size(); ++i) {
    vars.push_back(es[i].var);
    card.push_back(es[i].card);
    if (es[i].role < 0) child_axis_and_parent_axes[0] = static_cast<int>(i);
    else child_axis_and_parent_axes[1 + es[i].role] = static_cast<int>(i);
  }
}

}  // namespace detail

// Conditionally deterministic CPD: evaluate the expression at every corner
// combination of the continuous parent intervals, take the min/max, and
// spread the cell's mass uniformly over the child bins that intersect the
// range (proportional to overlap length).  Columns are normalized.
// `names[i]` is the node id of `parents[i]`, used to bind expression
// variables.  Mass escaping the child support is clipped to the boundary
// bins; `clipped` reports whether that happened.
inline Factor deterministic_npt(int child_var, const Partition& child_part,
                                const std::vector<NptParent>& parents,
                                const std::vector<std::string>& names, const ExprPtr& expr,
                                bool* clipped = nullptr) {
  std::vector<int> vars, card, axes;
  detail::sorted_scope(child_var, parents, vars, card, child_part, axes);
  Factor f(vars, card, 0.0);
  const auto stride = f.strides();
  const std::size_t child_stride = stride[axes[0]];

  std::vector<std::size_t> cont, disc;
  for (std::size_t p = 0; p < parents.size(); ++p)
    (parents[p].part->discrete ? disc : cont).push_back(p);

  std::vector<int> pidx(parents.size(), 0);
  bool any_clip = false;
  for (;;) {
    std::size_t base = 0;
    for (std::size_t p = 0; p < parents.size(); ++p)
      base += stride[axes[1 + p]] * static_cast<std::size_t>(pidx[p]);

    Assignment a;
    for (std::size_t p : disc) a.states[names[p]] = (*parents[p].states)[pidx[p]];

    double lo = HUGE_VAL, hi = -HUGE_VAL;
    const std::size_t corners = std::size_t{1} << cont.size();
    for (std::size_t mask = 0; mask < corners; ++mask) {
      for (std::size_t b = 0; b < cont.size(); ++b) {
        std::size_t p = cont[b];
        a.values[names[p]] =
            (mask >> b) & 1 ? parents[p].part->hi(pidx[p]) : parents[p].part->lo(pidx[p]);
      }
      double v = eval_value(expr, a);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo < child_part.support_lo() - 1e-12 || hi > child_part.support_hi() + 1e-12) any_clip = true;

    double span = hi - lo;
    auto cells = child_part.overlaps(lo, hi);
    double total = 0.0;
    for (auto& [bin, len] : cells) total += len;
    for (auto& [bin, len] : cells)
      f.data[base + child_stride * static_cast<std::size_t>(bin)] +=
          span > 0.0 ? len / total : (cells.size() == 1 ? 1.0 : len / total);

    // Normalize the column.
    double colsum = 0.0;
    for (int cbin = 0; cbin < child_part.size(); ++cbin)
      colsum += f.data[base + child_stride * static_cast<std::size_t>(cbin)];
    if (colsum > 0.0)
      for (int cbin = 0; cbin < child_part.size(); ++cbin)
        f.data[base + child_stride * static_cast<std::size_t>(cbin)] /= colsum;

    // Advance parent indices.
    int d = static_cast<int>(parents.size()) - 1;
    for (; d >= 0; --d) {
      if (++pidx[d] < parents[d].part->size()) break;
      pidx[d] = 0;
    }
    if (d < 0) break;
  }
  if (clipped) *clipped = any_clip;
  return f;
}

// Statistical CPD: per parent configuration, resolve the distribution at the
// parents' bin midpoints and fill the column with CDF differences; the tail
// mass outside the child support is folded back by renormalization.
inline Factor statistical_npt(int child_var, const Partition& child_part,
                              const std::vector<NptParent>& parents,
                              const std::vector<std::string>& names, const ExprPtr& expr) {
  std::vector<int> vars, card, axes;
  detail::sorted_scope(child_var, parents, vars, card, child_part, axes);
  Factor f(vars, card, 0.0);
  const auto stride = f.strides();
  const std::size_t child_stride = stride[axes[0]];

  std::vector<int> pidx(parents.size(), 0);
  for (;;) {
    std::size_t base = 0;
    for (std::size_t p = 0; p < parents.size(); ++p)
      base += stride[axes[1 + p]] * static_cast<std::size_t>(pidx[p]);

    Assignment a;
    for (std::size_t p = 0; p < parents.size(); ++p) {
      if (parents[p].part->discrete) a.states[names[p]] = (*parents[p].states)[pidx[p]];
      else a.values[names[p]] = parents[p].part->mid(pidx[p]);
    }
    ResolvedDensity d = eval_density(expr, a);

    double colsum = 0.0;
    for (int cbin = 0; cbin < child_part.size(); ++cbin) {
      double m;
      if (d.discrete()) {
        // Sum the PMF over the integers inside the bin.
        double lo = std::ceil(child_part.lo(cbin) - 1e-9);
        double hi_edge = child_part.hi(cbin);
        bool last = cbin + 1 == child_part.size();
        m = 0.0;
        for (double k = lo; last ? k <= hi_edge + 1e-9 : k < hi_edge - 1e-9; k += 1.0)
          m += d.pdf(k);
      } else {
        m = d.cdf(child_part.hi(cbin)) - d.cdf(child_part.lo(cbin));
      }
      f.data[base + child_stride * static_cast<std::size_t>(cbin)] = std::max(0.0, m);
      colsum += std::max(0.0, m);
    }
    if (!(colsum > 0.0))
      throw numeric_error("statistical CPD places no mass on the child support");
    for (int cbin = 0; cbin < child_part.size(); ++cbin)
      f.data[base + child_stride * static_cast<std::size_t>(cbin)] /= colsum;

    int adv = static_cast<int>(parents.size()) - 1;
    for (; adv >= 0; --adv) {
      if (++pidx[adv] < parents[adv].part->size()) break;
      pidx[adv] = 0;
    }
    if (adv < 0) break;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Frequency discretization: refine the support of a nonnegative count
// distribution down to single integers, returning midpoint-integer weights.

struct FrequencyWeights {
  std::vector<long long> values;
  std::vector<double> weights;
};

inline FrequencyWeights discretize_frequency(const ResolvedDensity& dist, int iterations = 25,
                                             double eps = 1e-8) {
  auto [slo, shi] = dist.support(eps);
  long long lo = std::max(0ll, static_cast<long long>(std::floor(slo)));
  long long hi = std::max(lo, static_cast<long long>(std::ceil(shi)));

  auto mass_between = [&](long long a, long long b) {  // integers in [a, b]
    // CDF evaluated at integer points covers discrete names; continuous
    // frequencies integrate the density over [a-0.5, b+0.5].
    if (dist.discrete()) return dist.cdf(static_cast<double>(b)) - (a > 0 ? dist.cdf(static_cast<double>(a - 1)) : 0.0);
    return dist.cdf(b + 0.5) - dist.cdf(a - 0.5);
  };

  // Bins are integer ranges [a, b]; start with up to 3 coarse bins.
  struct Bin {
    long long a, b;
    double mass;
  };
  std::vector<Bin> bins;
  long long total_ints = hi - lo + 1;
  int initial = static_cast<int>(std::min<long long>(3, total_ints));
  long long step = total_ints / initial;
  long long at = lo;
  for (int i = 0; i < initial; ++i) {
    long long b = (i + 1 == initial) ? hi : at + step - 1;
    bins.push_back({at, b, mass_between(at, b)});
    at = b + 1;
  }

  for (int it = 0; it < iterations; ++it) {
    // Score bins: any multi-integer bin with non-uniform pmf has positive
    // error; split the worst ones at the integer midpoint.
    std::vector<double> err(bins.size(), 0.0);
    bool any = false;
    for (std::size_t i = 0; i < bins.size(); ++i) {
      if (bins[i].a == bins[i].b) continue;
      double fa = dist.discrete() ? dist.pdf(static_cast<double>(bins[i].a)) : mass_between(bins[i].a, bins[i].a);
      double fb = dist.discrete() ? dist.pdf(static_cast<double>(bins[i].b)) : mass_between(bins[i].b, bins[i].b);
      err[i] = bins[i].mass * (std::fabs(fa - fb) + 1e-12);
      any = true;
    }
    if (!any) break;
    int budget = std::max<int>(1, static_cast<int>(std::ceil(0.1 * bins.size())));
    std::vector<std::size_t> order(bins.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return err[x] > err[y]; });
    std::vector<Bin> next;
    std::vector<bool> split(bins.size(), false);
    for (std::size_t r = 0; r < order.size() && budget > 0; ++r) {
      if (err[order[r]] <= 0.0) break;
      split[order[r]] = true;
      --budget;
    }
    for (std::size_t i = 0; i < bins.size(); ++i) {
      if (!split[i]) {
        next.push_back(bins[i]);
        continue;
      }
      long long midpoint = bins[i].a + (bins[i].b - bins[i].a) / 2;
      next.push_back({bins[i].a, midpoint, mass_between(bins[i].a, midpoint)});
      next.push_back({midpoint + 1, bins[i].b, mass_between(midpoint + 1, bins[i].b)});
    }
    bins = std::move(next);
  }

  FrequencyWeights out;
  double total = 0.0;
  for (const auto& b : bins) total += b.mass;
  if (!(total > 0.0)) throw numeric_error("frequency distribution has no mass on its support");
  for (const auto& b : bins) {
    out.values.push_back(b.a + (b.b - b.a) / 2);  // midpoint integer
    out.weights.push_back(b.mass / total);
  }
  return out;
}

}  // namespace riskbn
