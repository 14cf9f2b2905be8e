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

// Compound-distribution aggregation: doubling-scheme n-fold convolution with
// fragment reuse, discrete-cause conditioning, incremental compound mixing
// through Boolean selector chains, frequency reconstruction, and backward
// inference on the cached reduced model.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "riskbn/discrete_model.hpp"
#include "riskbn/discretize.hpp"
#include "riskbn/expr.hpp"
#include "riskbn/factor.hpp"
#include "riskbn/junction_tree.hpp"

namespace riskbn {

// ---------------------------------------------------------------------------
// Specification of one aggregation task.

struct CompoundSpec {
  ExprPtr frequency;                  // nonnegative count distribution
  ExprPtr severity;                   // severity CPD; may reference cause ids
  Network causes;                     // discrete-only network for the cause vector
  std::vector<std::string> cause_ids; // severity conditioning order (subset of causes)
};

// A conditional piecewise density: one mass column per joint cause state.
struct ConditionalDensity {
  Partition partition;
  std::vector<std::vector<double>> columns;  // [cause_state][bin]
  bool lo_hard = false, hi_hard = false;     // natural support bounds

  int states() const { return static_cast<int>(columns.size()); }

  DiscretizedDensity mix(const std::vector<double>& cause_prior) const {
    DiscretizedDensity out;
    out.partition = partition;
    out.mass.assign(partition.size(), 0.0);
    for (int s = 0; s < states(); ++s)
      for (int b = 0; b < partition.size(); ++b) out.mass[b] += cause_prior[s] * columns[s][b];
    return out;
  }
};

struct AggregateSettings {
  int severity_dd_iterations = 65;
  int frequency_dd_iterations = 25;
  double frequency_truncation = 1e-8;
  int max_bins = 160;
  int compound_bins = 512;  // target resolution of the mixed compound
};

// Summary statistics of a discretized distribution.
struct SummaryStats {
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
};

inline SummaryStats summarize(const DiscretizedDensity& d) {
  SummaryStats s;
  s.mean = d.mean();
  s.sd = std::sqrt(d.variance());
  s.median = d.quantile(0.5);
  s.p95 = d.quantile(0.95);
  s.p99 = d.quantile(0.99);
  return s;
}

// ---------------------------------------------------------------------------
// Everything the backward pass reuses from a convolution run.

struct ConvolutionCache {
  std::vector<long long> frequency_values;   // midpoint integers
  std::vector<double> frequency_weights;     // aligned, sum 1
  Partition compound_partition;              // shared grid of all components
  std::vector<ConditionalDensity> components;  // P(T_j | C) on the shared grid
  std::vector<double> selector_priors;       // P(E_j = True), j = 0..L-2
  std::vector<std::vector<double>> chain;    // F_j mixtures on the shared grid (unconditional)
  std::vector<double> cause_prior;           // joint prior over cause states
  std::vector<std::string> cause_ids;
  std::vector<std::vector<std::string>> cause_state_labels;  // per cause id
  std::uint64_t content_hash = 0;
};

// ---------------------------------------------------------------------------
// Variable elimination over a factor fragment: produces the exact marginal
// on the query set by summing one variable out at a time (min-degree order).

inline Factor ve_fragment(std::vector<Factor> factors, const std::vector<int>& eliminate,
                          const std::vector<int>& query) {
  for (int v : eliminate)
    if (std::binary_search(query.begin(), query.end(), v))
      throw structural_error("elimination and query sets overlap");
  std::vector<int> remaining = eliminate;
  while (!remaining.empty()) {
    // Min-degree: eliminate the variable whose combined factor scope is
    // smallest; ties by variable id for determinism.
    int best = -1;
    std::size_t best_size = 0;
    for (int v : remaining) {
      std::set<int> scope;
      for (const auto& f : factors)
        if (f.index_of(v) >= 0) scope.insert(f.vars.begin(), f.vars.end());
      if (best < 0 || scope.size() < best_size || (scope.size() == best_size && v < best)) {
        best = v;
        best_size = scope.size();
      }
    }
    std::vector<Factor> keep;
    Factor bucket = identity_factor();
    for (auto& f : factors) {
      if (f.index_of(best) >= 0) bucket = multiply(bucket, f);
      else keep.push_back(std::move(f));
    }
    keep.push_back(marginalize_out(bucket, {best}));
    factors = std::move(keep);
    remaining.erase(std::find(remaining.begin(), remaining.end(), best));
  }
  Factor out = identity_factor();
  for (auto& f : factors) out = multiply(out, f);
  return marginalize(out, query);
}

// ---------------------------------------------------------------------------
// Pairwise sum of two conditional densities with output refinement.  The
// output partition starts coarse over the exact support and is refined
// against the (cause-prior mixed) result.

namespace detail {

inline std::vector<double> convolve_columns(const Partition& pa, const std::vector<double>& ma,
                                            const Partition& pb, const std::vector<double>& mb,
                                            const Partition& out) {
  std::vector<double> acc(out.size(), 0.0);
  for (int i = 0; i < pa.size(); ++i) {
    if (ma[i] == 0.0) continue;
    for (int j = 0; j < pb.size(); ++j) {
      double m = ma[i] * mb[j];
      if (m == 0.0) continue;
      double lo = pa.lo(i) + pb.lo(j), hi = pa.hi(i) + pb.hi(j);
      auto spans = out.overlaps(lo, hi);
      double total = 0.0;
      for (auto& [bin, len] : spans) total += len;
      for (auto& [bin, len] : spans) acc[bin] += m * len / total;
    }
  }
  return acc;
}

}  // namespace detail

// Sum of two (conditionally independent given the causes) discretized
// quantities.  Reuses the pair-table rule: per input-cell corner range,
// spread uniformly over the output grid, then refine the output grid.
inline ConditionalDensity pair_sum(const ConditionalDensity& a, const ConditionalDensity& b,
                                   const std::vector<double>& cause_prior,
                                   const AggregateSettings& settings) {
  double lo = a.partition.support_lo() + b.partition.support_lo();
  double hi = a.partition.support_hi() + b.partition.support_hi();
  if (!(hi > lo)) hi = lo + 1e-9;
  Partition out = Partition::make_uniform(lo, hi, 8);

  RefinePolicy policy;
  policy.max_bins = settings.max_bins;
  ConditionalDensity result;
  result.lo_hard = a.lo_hard && b.lo_hard;
  result.hi_hard = a.hi_hard && b.hi_hard;
  for (int iter = 0; iter < settings.severity_dd_iterations; ++iter) {
    result.partition = out;
    result.columns.clear();
    std::vector<double> mixed(out.size(), 0.0);
    for (int s = 0; s < a.states(); ++s) {
      result.columns.push_back(detail::convolve_columns(a.partition, a.columns[s], b.partition,
                                                        b.columns[s], out));
      for (int bin = 0; bin < out.size(); ++bin)
        mixed[bin] += cause_prior[s] * result.columns.back()[bin];
    }
    auto errs = bin_errors(out, mixed);
    double total_err = 0.0;
    for (double e : errs) total_err += e;
    if (total_err <= 0.0 || iter + 1 == settings.severity_dd_iterations) break;
    Partition refined = refine(out, errs, mixed, policy, -1, !result.lo_hard, !result.hi_hard);
    if (refined.edges == out.edges) break;
    out = refined;
  }
  return result;
}

// n-fold sum by doubling with fragment reuse: the cache maps a fold count to
// its conditional density, and every intermediate stays conditioned on the
// causes.
class FoldCache {
 public:
  FoldCache(ConditionalDensity base, std::vector<double> cause_prior, AggregateSettings settings)
      : cause_prior_(std::move(cause_prior)), settings_(std::move(settings)) {
    cache_[1] = std::move(base);
  }

  const ConditionalDensity& fold(long long n) {
    if (n < 1) throw structural_error("fold count must be >= 1");
    auto it = cache_.find(n);
    if (it != cache_.end()) return it->second;
    long long half = n / 2;
    const ConditionalDensity& left = fold(half);
    const ConditionalDensity& right = fold(n - half);
    ConditionalDensity sum = pair_sum(left, right, cause_prior_, settings_);
    return cache_.emplace(n, std::move(sum)).first->second;
  }

  const std::vector<double>& cause_prior() const { return cause_prior_; }

 private:
  std::map<long long, ConditionalDensity> cache_;
  std::vector<double> cause_prior_;
  AggregateSettings settings_;
};

inline ConditionalDensity lba_nfold(const ConditionalDensity& severity, long long n,
                                    const std::vector<double>& cause_prior,
                                    const AggregateSettings& settings = {}) {
  if (n == 0) {
    // Degenerate: a point mass at zero for every cause state.
    ConditionalDensity out;
    out.partition = Partition::from_edges({-1e-9, 1e-9});
    out.columns.assign(severity.states(), {1.0});
    out.lo_hard = out.hi_hard = true;
    return out;
  }
  FoldCache cache(severity, cause_prior, settings);
  return cache.fold(n);
}

// ---------------------------------------------------------------------------
// Rebinning a conditional density onto a target grid (mass split by overlap).

inline ConditionalDensity rebin(const ConditionalDensity& d, const Partition& target) {
  ConditionalDensity out;
  out.partition = target;
  out.columns.assign(d.states(), std::vector<double>(target.size(), 0.0));
  for (int s = 0; s < d.states(); ++s)
    for (int i = 0; i < d.partition.size(); ++i) {
      double m = d.columns[s][i];
      if (m == 0.0) continue;
      auto spans = target.overlaps(d.partition.lo(i), d.partition.hi(i));
      double total = 0.0;
      for (auto& [bin, len] : spans) total += len;
      for (auto& [bin, len] : spans) out.columns[s][bin] += m * len / total;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Compound mixing through the Boolean selector chain.  Selector j-1 keeps the
// running aggregate with probability prefix(j-1)/prefix(j) and otherwise
// switches to component j; the final link reproduces the weighted mixture
// exactly.

struct CompoundChain {
  std::vector<double> selector_priors;           // P(E_{j-1} = True)
  std::vector<std::vector<double>> chain;        // F_{j-1} per step (mixed over causes)
  DiscretizedDensity compound;                   // final F
};

inline CompoundChain cdf_compound(const std::vector<double>& weights,
                                  const std::vector<ConditionalDensity>& components,
                                  const std::vector<double>& cause_prior) {
  if (weights.empty() || weights.size() != components.size())
    throw structural_error("weights and components must align");
  const Partition& grid = components[0].partition;
  for (const auto& c : components)
    if (c.partition.edges != grid.edges && !(c.partition.discrete && grid.discrete))
      throw structural_error("components must share one partition");

  CompoundChain out;
  std::vector<double> current = components[0].mix(cause_prior).mass;
  double prefix = weights[0];
  for (std::size_t j = 1; j < weights.size(); ++j) {
    double next_prefix = prefix + weights[j];
    if (!(next_prefix > 0.0)) {
      // Degenerate zero-weight run: keep the current aggregate.
      out.selector_priors.push_back(1.0);
      out.chain.push_back(current);
      prefix = next_prefix;
      continue;
    }
    double keep = prefix / next_prefix;
    out.selector_priors.push_back(keep);
    std::vector<double> mixed(grid.size());
    auto comp = components[j].mix(cause_prior).mass;
    for (int b = 0; b < grid.size(); ++b) mixed[b] = keep * current[b] + (1.0 - keep) * comp[b];
    out.chain.push_back(mixed);
    current = std::move(mixed);
    prefix = next_prefix;
  }
  out.compound.partition = grid;
  out.compound.mass = current;
  double total = 0.0;
  for (double m : out.compound.mass) total += m;
  if (total > 0.0)
    for (double& m : out.compound.mass) m /= total;
  return out;
}

// ---------------------------------------------------------------------------
// Severity discretization conditioned on the causes.

namespace detail {

inline std::vector<std::vector<std::string>> cause_state_table(const Network& causes,
                                                               const std::vector<std::string>& ids) {
  std::vector<std::vector<std::string>> out;
  for (const auto& id : ids) out.push_back(causes.node(id).states);
  return out;
}

inline std::size_t joint_states(const std::vector<std::vector<std::string>>& labels) {
  std::size_t n = 1;
  for (const auto& l : labels) n *= l.size();
  return n;
}

inline Assignment joint_assignment(const std::vector<std::string>& ids,
                                   const std::vector<std::vector<std::string>>& labels,
                                   std::size_t flat) {
  Assignment a;
  for (std::size_t k = ids.size(); k-- > 0;) {
    a.states[ids[k]] = labels[k][flat % labels[k].size()];
    flat /= labels[k].size();
  }
  return a;
}

}  // namespace detail

// Joint prior over the cause vector (in severity conditioning order) from the
// discrete cause network.
inline std::vector<double> cause_joint_prior(const CompoundSpec& spec) {
  if (spec.cause_ids.empty()) return {1.0};
  // Exact joint by variable elimination over the cause network.
  DiscreteModel model(spec.causes, {}, {});
  auto factors = model.build_factors();
  std::vector<int> query;
  for (const auto& id : spec.cause_ids) query.push_back(model.var(id));
  std::sort(query.begin(), query.end());
  std::vector<int> elim;
  for (const auto& id : model.order()) {
    int v = model.var(id);
    if (!std::binary_search(query.begin(), query.end(), v)) elim.push_back(v);
  }
  Factor joint = normalize(ve_fragment(factors, elim, query));
  // Reorder from sorted-scope layout to the declared cause order.
  auto labels = detail::cause_state_table(spec.causes, spec.cause_ids);
  std::size_t n = detail::joint_states(labels);
  std::vector<double> out(n, 0.0);
  std::vector<int> card;
  for (const auto& l : labels) card.push_back(static_cast<int>(l.size()));
  const auto stride = joint.strides();
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t rest = flat;
    std::vector<int> idx(labels.size());
    for (std::size_t k = labels.size(); k-- > 0;) {
      idx[k] = static_cast<int>(rest % card[k]);
      rest /= card[k];
    }
    std::size_t off = 0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
      int pos = joint.index_of(model.var(spec.cause_ids[k]));
      off += stride[pos] * static_cast<std::size_t>(idx[k]);
    }
    out[flat] = joint.data[off];
  }
  return out;
}

// Discretize the severity CPD per joint cause state onto one shared grid.
inline ConditionalDensity discretize_severity(const CompoundSpec& spec,
                                              const AggregateSettings& settings) {
  auto labels = detail::cause_state_table(spec.causes, spec.cause_ids);
  std::size_t states = detail::joint_states(labels);

  // Shared support across all cause states.
  double lo = HUGE_VAL, hi = -HUGE_VAL;
  bool lo_hard = true, hi_hard = true;
  for (std::size_t s = 0; s < states; ++s) {
    Assignment a = detail::joint_assignment(spec.cause_ids, labels, s);
    auto d = eval_density(spec.severity, a);
    SupportBound b = d.support_bound(1e-7);
    if (b.lo < lo - 1e-12) {
      lo = b.lo;
      lo_hard = b.lo_hard;
    } else if (b.lo <= lo + 1e-12) {
      lo_hard = lo_hard && b.lo_hard;
    }
    if (b.hi > hi + 1e-12) {
      hi = b.hi;
      hi_hard = b.hi_hard;
    } else if (b.hi >= hi - 1e-12) {
      hi_hard = hi_hard && b.hi_hard;
    }
  }
  Partition grid = Partition::make_uniform(lo, hi, 8);

  auto prior = cause_joint_prior(spec);
  RefinePolicy policy;
  policy.max_bins = settings.max_bins;
  ConditionalDensity out;
  out.lo_hard = lo_hard;
  out.hi_hard = hi_hard;
  for (int iter = 0; iter < settings.severity_dd_iterations; ++iter) {
    out.partition = grid;
    out.columns.assign(states, std::vector<double>(grid.size(), 0.0));
    std::vector<double> mixed(grid.size(), 0.0);
    for (std::size_t s = 0; s < states; ++s) {
      Assignment a = detail::joint_assignment(spec.cause_ids, labels, s);
      auto d = eval_density(spec.severity, a);
      double colsum = 0.0;
      for (int b = 0; b < grid.size(); ++b) {
        double m = std::max(0.0, d.cdf(grid.hi(b)) - d.cdf(grid.lo(b)));
        out.columns[s][b] = m;
        colsum += m;
      }
      if (!(colsum > 0.0)) throw numeric_error("severity places no mass on the shared support");
      for (int b = 0; b < grid.size(); ++b) {
        out.columns[s][b] /= colsum;
        mixed[b] += prior[s] * out.columns[s][b];
      }
    }
    auto errs = bin_errors(grid, mixed);
    double total_err = 0.0;
    for (double e : errs) total_err += e;
    if (total_err <= 0.0 || iter + 1 == settings.severity_dd_iterations) break;
    Partition refined = refine(grid, errs, mixed, policy, -1, !lo_hard, !hi_hard);
    if (refined.edges == grid.edges) break;
    grid = refined;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward pass: frequency weights -> per-weight folds -> shared grid ->
// selector-chain compound.

struct ConvolveOutcome {
  DiscretizedDensity compound;
  SummaryStats stats;
  ConvolutionCache cache;
};

inline ConvolveOutcome bfe_convolve(const CompoundSpec& spec, const AggregateSettings& settings = {}) {
  auto freq = eval_density(spec.frequency, {});
  FrequencyWeights fw =
      discretize_frequency(freq, settings.frequency_dd_iterations, settings.frequency_truncation);

  auto prior = cause_joint_prior(spec);
  ConditionalDensity severity = discretize_severity(spec, settings);

  // Fold per distinct frequency value, reusing halves across values.
  FoldCache folds(severity, prior, settings);
  std::vector<ConditionalDensity> raw;
  raw.reserve(fw.values.size());
  double glo = HUGE_VAL, ghi = -HUGE_VAL;
  for (long long v : fw.values) {
    ConditionalDensity d = v == 0 ? lba_nfold(severity, 0, prior, settings) : folds.fold(v);
    glo = std::min(glo, d.partition.support_lo());
    ghi = std::max(ghi, d.partition.support_hi());
    raw.push_back(std::move(d));
  }

  // Shared grid: the union of the components' own quantile cuts (so every
  // component keeps resolution where its mass lives, however small its
  // weight) plus mixture quantiles for reporting resolution.
  std::vector<double> edges{glo, ghi};
  auto add_quantiles = [&edges](const DiscretizedDensity& d, int cuts) {
    double acc = 0.0;
    int b = 0;
    for (int k = 1; k < cuts; ++k) {
      double q = static_cast<double>(k) / cuts;
      while (b < d.partition.size() && acc + d.mass[b] < q) acc += d.mass[b++];
      if (b >= d.partition.size()) break;
      double frac = d.mass[b] > 0.0 ? (q - acc) / d.mass[b] : 0.0;
      edges.push_back(d.partition.lo(b) + frac * d.partition.width(b));
    }
  };
  const int per_comp =
      std::clamp<int>(4096 / static_cast<int>(std::max<std::size_t>(1, raw.size())), 16, 256);
  for (const auto& r : raw) add_quantiles(r.mix(prior), per_comp);
  {
    // Mixture probe on a coarse uniform grid for the global quantiles.
    Partition coarse = Partition::make_uniform(glo, ghi, 2048);
    DiscretizedDensity probe;
    probe.partition = coarse;
    probe.mass.assign(coarse.size(), 0.0);
    for (std::size_t j = 0; j < raw.size(); ++j) {
      auto r = rebin(raw[j], coarse);
      auto mixed = r.mix(prior);
      for (int b = 0; b < coarse.size(); ++b) probe.mass[b] += fw.weights[j] * mixed.mass[b];
    }
    add_quantiles(probe, settings.compound_bins);
  }
  std::sort(edges.begin(), edges.end());
  std::vector<double> dedup;
  const double min_gap = 1e-12 * std::max(1.0, ghi - glo);
  for (double e : edges)
    if (dedup.empty() || e > dedup.back() + min_gap) dedup.push_back(e);
  if (dedup.back() < ghi) dedup.push_back(ghi);
  Partition grid = Partition::from_edges(std::move(dedup));

  std::vector<ConditionalDensity> components;
  components.reserve(raw.size());
  for (auto& r : raw) components.push_back(rebin(r, grid));

  CompoundChain chain = cdf_compound(fw.weights, components, prior);

  ConvolveOutcome out;
  out.compound = chain.compound;
  out.stats = summarize(out.compound);
  out.cache.frequency_values = fw.values;
  out.cache.frequency_weights = fw.weights;
  out.cache.compound_partition = grid;
  out.cache.components = std::move(components);
  out.cache.selector_priors = chain.selector_priors;
  out.cache.chain = chain.chain;
  out.cache.cause_prior = prior;
  out.cache.cause_ids = spec.cause_ids;
  out.cache.cause_state_labels = detail::cause_state_table(spec.causes, spec.cause_ids);
  return out;
}

// ---------------------------------------------------------------------------
// Frequency reconstruction: deterministic selector tables rebuilt into the
// count variable.  Node k combines selector k+1 with the previous partial
// reconstruction; entries are 1 where the guard states agree.

struct FrequencyReconstruction {
  // Table for each step: rows indexed by (selector state, previous states),
  // value 1 at the implied count.
  struct StepTable {
    std::vector<long long> states;  // count values covered after this step
    std::vector<double> table;      // rows: selector (2) x previous states, cols: states
  };
  std::vector<StepTable> steps;
  std::vector<long long> support;
  std::vector<double> marginal;  // reconstructed prior (or posterior)
};

inline FrequencyReconstruction reconstruct_frequency(const std::vector<double>& selector_priors,
                                                     const std::vector<long long>& values) {
  if (values.size() != selector_priors.size() + 1)
    throw structural_error("selector chain does not match the frequency support");
  FrequencyReconstruction out;
  std::vector<long long> covered{values[0], values[1]};
  std::vector<double> marg(2);
  // First step: two selectors' worth of states (the first selector chooses
  // between values 0 and 1).
  marg[0] = selector_priors[0];
  marg[1] = 1.0 - selector_priors[0];
  for (std::size_t j = 1; j < selector_priors.size(); ++j) {
    // Selector j: True keeps the previous reconstruction, False selects
    // values[j + 1].
    FrequencyReconstruction::StepTable step;
    step.states = covered;
    step.states.push_back(values[j + 1]);
    std::size_t prev = covered.size();
    step.table.assign(2 * prev * step.states.size(), 0.0);
    auto at = [&](int sel, std::size_t p, std::size_t s) -> double& {
      return step.table[(static_cast<std::size_t>(sel) * prev + p) * step.states.size() + s];
    };
    for (std::size_t p = 0; p < prev; ++p) at(0, p, p) = 1.0;  // True: keep previous
    for (std::size_t p = 0; p < prev; ++p) at(1, p, step.states.size() - 1) = 1.0;  // False: new
    out.steps.push_back(std::move(step));

    std::vector<double> next(covered.size() + 1, 0.0);
    for (std::size_t p = 0; p < prev; ++p) next[p] = selector_priors[j] * marg[p];
    next[covered.size()] = 1.0 - selector_priors[j];
    covered.push_back(values[j + 1]);
    marg = std::move(next);
  }
  out.support = covered;
  out.marginal = marg;
  return out;
}

// ---------------------------------------------------------------------------
// Backward pass on the cached reduced model.

struct DeconvolveOutcome {
  std::vector<double> cause_posterior;             // over joint cause states
  std::map<std::string, std::vector<double>> per_cause;  // per declared cause id
  std::vector<long long> frequency_support;
  std::vector<double> frequency_posterior;
  double evidence_mass = 0.0;
};

inline DeconvolveOutcome bfe_deconvolve(const ConvolutionCache& cache, double observed_total) {
  int bin = cache.compound_partition.locate(observed_total);

  const std::size_t S = cache.cause_prior.size();
  const std::size_t L = cache.frequency_weights.size();

  // Joint responsibility of (component j, cause s) for the observed bin.
  std::vector<std::vector<double>> resp(L, std::vector<double>(S, 0.0));
  double total = 0.0;
  for (std::size_t j = 0; j < L; ++j)
    for (std::size_t s = 0; s < S; ++s) {
      double v = cache.frequency_weights[j] * cache.cause_prior[s] *
                 cache.components[j].columns[s][bin];
      resp[j][s] = v;
      total += v;
    }
  if (!(total > 0.0)) throw numeric_error("observed total has zero likelihood under the cache");

  DeconvolveOutcome out;
  out.evidence_mass = total;
  out.cause_posterior.assign(S, 0.0);
  out.frequency_posterior.assign(L, 0.0);
  for (std::size_t j = 0; j < L; ++j)
    for (std::size_t s = 0; s < S; ++s) {
      out.cause_posterior[s] += resp[j][s] / total;
      out.frequency_posterior[j] += resp[j][s] / total;
    }
  out.frequency_support = cache.frequency_values;

  // Per-cause marginals from the joint cause posterior.
  std::size_t ncauses = cache.cause_ids.size();
  for (std::size_t k = 0; k < ncauses; ++k) {
    std::vector<double> m(cache.cause_state_labels[k].size(), 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      std::size_t rest = s;
      std::size_t idx = 0;
      for (std::size_t kk = ncauses; kk-- > 0;) {
        std::size_t card = cache.cause_state_labels[kk].size();
        if (kk == k) idx = rest % card;
        rest /= card;
      }
      m[idx] += out.cause_posterior[s];
    }
    out.per_cause[cache.cause_ids[k]] = std::move(m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seeded sampling reference: draw a count, then that many severities, sum.

struct McOracleResult {
  DiscretizedDensity empirical;
  SummaryStats stats;
};

inline McOracleResult mc_oracle(const CompoundSpec& spec, std::size_t samples, std::uint64_t seed,
                                int grid_bins = 512) {
  std::mt19937_64 rng(seed);
  auto freq = eval_density(spec.frequency, {});
  auto labels = detail::cause_state_table(spec.causes, spec.cause_ids);
  auto prior = cause_joint_prior(spec);

  std::vector<double> totals;
  totals.reserve(samples);
  auto u01 = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  };
  for (std::size_t i = 0; i < samples; ++i) {
    long long n = static_cast<long long>(std::llround(freq.sample(rng)));
    // One cause draw per scenario; severities are i.i.d. given the causes.
    std::size_t s = 0;
    if (!prior.empty() && prior.size() > 1) {
      double u = u01();
      double acc = 0.0;
      for (std::size_t k = 0; k < prior.size(); ++k) {
        acc += prior[k];
        if (u <= acc || k + 1 == prior.size()) {
          s = k;
          break;
        }
      }
    }
    Assignment a = detail::joint_assignment(spec.cause_ids, labels, s);
    auto sev = eval_density(spec.severity, a);
    double total = 0.0;
    for (long long k = 0; k < n; ++k) total += sev.sample(rng);
    totals.push_back(total);
  }
  double lo = *std::min_element(totals.begin(), totals.end());
  double hi = *std::max_element(totals.begin(), totals.end());
  if (!(hi > lo)) hi = lo + 1.0;
  McOracleResult out;
  out.empirical.partition = Partition::make_uniform(lo, hi + 1e-9 * (hi - lo), grid_bins);
  out.empirical.mass.assign(grid_bins, 0.0);
  for (double t : totals) out.empirical.mass[out.empirical.partition.locate(t)] += 1.0 / samples;

  double mean = 0.0;
  for (double t : totals) mean += t;
  mean /= static_cast<double>(totals.size());
  double var = 0.0;
  for (double t : totals) var += (t - mean) * (t - mean);
  var /= static_cast<double>(totals.size() - 1);
  std::sort(totals.begin(), totals.end());
  auto pct = [&](double q) {
    double pos = q * (totals.size() - 1);
    std::size_t lo_i = static_cast<std::size_t>(pos);
    double frac = pos - lo_i;
    return lo_i + 1 < totals.size() ? totals[lo_i] * (1 - frac) + totals[lo_i + 1] * frac
                                    : totals.back();
  };
  out.stats.mean = mean;
  out.stats.sd = std::sqrt(var);
  out.stats.median = pct(0.5);
  out.stats.p95 = pct(0.95);
  out.stats.p99 = pct(0.99);
  return out;
}

}  // namespace riskbn
