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

// Command-line surface: model transforms, inference with either engine,
// aggregation and backward inference, reference oracles, Gaussian
// decomposition and region-graph inspection.
//
// Exit codes: 0 success (and converged), 2 finished without convergence,
// 1 error.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "riskbn/cg.hpp"
#include "riskbn/gbp.hpp"
#include "riskbn/model_io.hpp"

namespace {

using namespace riskbn;

int env_int(const char* name, int fallback) {
  const char* v = std::getenv(name);
  if (!v) return fallback;
  try {
    return std::stoi(v);
  } catch (...) {
    return fallback;
  }
}

void write_file(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << content;
}

Evidence parse_evidence(const std::vector<std::string>& pairs, const Network& net) {
  Evidence ev;
  for (const auto& p : pairs) {
    auto eq = p.find('=');
    if (eq == std::string::npos) throw io_error("evidence must be key=value: '" + p + "'");
    std::string id = p.substr(0, eq);
    std::string val = p.substr(eq + 1);
    const Node& n = net.node(id);
    if (n.kind == NodeKind::Discrete) {
      ev.states[id] = val;
    } else {
      try {
        ev.values[id] = std::stod(val);
      } catch (...) {
        throw io_error("evidence for continuous '" + id + "' must be numeric");
      }
    }
  }
  return ev;
}

std::string posterior_csv(const std::map<std::string, std::vector<double>>& marginals) {
  std::string out = "node_id,bin_lo,bin_hi,mass\n";
  for (const auto& [id, probs] : marginals)
    for (std::size_t k = 0; k < probs.size(); ++k)
      out += id + "," + std::to_string(k) + "," + std::to_string(k) + "," +
             riskbn::detail::fmt17(probs[k]) + "\n";
  return out;
}

int cmd_convert(const std::string& model_path, const std::string& to, const std::string& out_path) {
  ModelDoc doc = load_model(model_path);
  if (to == "dccd") {
    Network dccd = to_dccd(doc.net);
    write_file(out_path, network_to_json(dccd).dump(2) + "\n");
    std::cerr << "densified: " << dccd.nodes.size() << " nodes, " << dccd.edges().size()
              << " edges\n";
    return 0;
  }
  if (to == "bfg") {
    Network dccd = to_dccd(doc.net);
    auto [bfg, ann] = binary_factorize(dccd);
    write_file(out_path, network_to_json(bfg, &ann).dump(2) + "\n");
    std::size_t n = ann.originals.size();
    std::cerr << "factorized: " << bfg.nodes.size() << " nodes (" << n << " originals, "
              << ann.intermediates.size() << " intermediates; formula value "
              << BfgAnnotation::expected_nodes(n) << ")\n";
    return 0;
  }
  throw io_error("--to must be dccd or bfg");
}

int cmd_infer(const std::string& model_path, const std::string& engine,
              const std::vector<std::string>& evidence, int dd_iters, int bp_iters,
              double threshold, double damping, const std::string& out_path, bool summary) {
  ModelDoc doc = load_model(model_path);
  Evidence ev = doc.evidence;
  Evidence extra = parse_evidence(evidence, doc.net);
  for (auto& [k, v] : extra.states) ev.states[k] = v;
  for (auto& [k, v] : extra.values) ev.values[k] = v;

  MarginalReport rep;
  bool converged = true;
  if (engine == "jt") {
    DdSettings settings;
    settings.dd_iterations = dd_iters;
    InferenceResult r = ddjt(doc.net, ev, settings);
    rep = report_from(r, doc.net);
  } else if (engine == "ddbp") {
    DdbpSettings settings;
    settings.dd.dd_iterations = dd_iters;
    settings.bp.max_iterations = bp_iters;
    settings.bp.threshold = threshold;
    settings.bp.damping = damping;
    RgInferenceOutcome out = doc.bfg ? rg_infer(doc.net, *doc.bfg, ev, settings)
                                     : ddbp(doc.net, ev, settings);
    rep = report_from(out.result, doc.net);
    rep.converged = out.bp_converged;
    converged = out.bp_converged;
    std::cerr << "message passing: " << out.bp_iterations << " iterations, residual "
              << out.bp_residual << (out.bp_converged ? " (converged)" : " (not converged)")
              << "\n";
  } else {
    throw io_error("--engine must be jt or ddbp");
  }
  write_file(out_path, report_csv(rep));
  if (summary) std::cerr << report_summary_text(rep);
  return converged ? 0 : 2;
}

int cmd_aggregate(const std::string& model_path, const std::string& out_path,
                  const std::string& cache_path, int sev_iters, int freq_iters) {
  ModelDoc doc = load_model(model_path);
  if (!doc.compound) throw io_error("model has no compound section");
  AggregateSettings settings;
  settings.severity_dd_iterations = sev_iters;
  settings.frequency_dd_iterations = freq_iters;

  auto out = bfe_convolve(*doc.compound, settings);

  std::ifstream in(model_path);
  json raw;
  in >> raw;
  std::string tag = "sev=" + std::to_string(sev_iters) + ";freq=" + std::to_string(freq_iters);
  out.cache.content_hash = model_settings_hash(raw, tag);

  MarginalReport rep;
  for (int b = 0; b < out.compound.partition.size(); ++b)
    rep.rows.push_back({"T", out.compound.partition.lo(b), out.compound.partition.hi(b),
                        out.compound.mass[b]});
  rep.summaries["T"] = out.stats;
  write_file(out_path, report_csv(rep));
  std::cerr << report_summary_text(rep);
  if (!cache_path.empty()) {
    json c = cache_to_json(out.cache);
    c["settings_tag"] = tag;
    write_file(cache_path, c.dump() + "\n");
  }
  return 0;
}

int cmd_deconvolve(const std::string& model_path, const std::string& cache_path,
                   const std::vector<std::string>& evidence, const std::string& query,
                   const std::string& out_path) {
  std::ifstream in(cache_path);
  if (!in) throw io_error("cannot open cache '" + cache_path + "'");
  json doc;
  in >> doc;
  ConvolutionCache cache = cache_from_json(doc);

  // Integrity: the cache must match the producing model + settings.
  std::ifstream min(model_path);
  if (!min) throw io_error("cannot open model '" + model_path + "'");
  json raw;
  min >> raw;
  std::string tag = doc.value("settings_tag", "");
  if (model_settings_hash(raw, tag) != cache.content_hash)
    throw io_error("cache does not match this model and settings (stale cache?)");

  if (evidence.size() != 1) throw io_error("deconvolve needs exactly one --evidence total=value");
  auto eq = evidence[0].find('=');
  if (eq == std::string::npos) throw io_error("evidence must be key=value");
  double total = std::stod(evidence[0].substr(eq + 1));

  auto post = bfe_deconvolve(cache, total);

  std::map<std::string, std::vector<double>> marginals;
  bool want_all = query.empty();
  auto wanted = [&](const std::string& id) {
    if (want_all) return true;
    std::stringstream ss(query);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (tok == id) return true;
    return false;
  };
  for (auto& [id, probs] : post.per_cause)
    if (wanted(id)) marginals[id] = probs;
  if (wanted("N")) marginals["N"] = post.frequency_posterior;
  write_file(out_path, posterior_csv(marginals));
  if (wanted("N")) {
    std::cerr << "frequency posterior:";
    for (std::size_t i = 0; i < post.frequency_support.size() && i < 8; ++i)
      std::cerr << " " << post.frequency_support[i] << ":" << post.frequency_posterior[i];
    std::cerr << "\n";
  }
  return 0;
}

int cmd_oracle(const std::string& model_path, const std::string& method, std::size_t samples,
               std::uint64_t seed, const std::string& out_path) {
  ModelDoc doc = load_model(model_path);
  if (method == "mc") {
    if (!doc.compound) throw io_error("mc oracle needs a compound section");
    auto r = mc_oracle(*doc.compound, samples, seed);
    MarginalReport rep;
    for (int b = 0; b < r.empirical.partition.size(); ++b)
      rep.rows.push_back({"T", r.empirical.partition.lo(b), r.empirical.partition.hi(b),
                          r.empirical.mass[b]});
    rep.summaries["T"] = r.stats;
    write_file(out_path, report_csv(rep));
    std::cerr << report_summary_text(rep);
    return 0;
  }
  if (method == "enum") {
    // Exact joint marginals for small all-discrete models.
    double log_states = 0.0;
    for (const auto& n : doc.net.nodes) {
      if (n.kind != NodeKind::Discrete) throw io_error("enum oracle needs an all-discrete model");
      log_states += std::log2(static_cast<double>(n.states.size()));
    }
    if (log_states > 20.0) throw io_error("enum oracle limited to 2^20 joint states");
    DiscreteModel model(doc.net, doc.evidence, {});
    auto factors = model.build_factors();
    for (auto& [v, s] : model.evidence_bins())
      for (auto& f : factors) f = reduce_evidence(f, v, s);
    Factor joint = identity_factor();
    for (auto& f : factors) joint = multiply(joint, f);
    std::map<std::string, std::vector<double>> marginals;
    for (const auto& id : model.order())
      marginals[id] = normalize(marginalize(joint, {model.var(id)})).data;
    write_file(out_path, posterior_csv(marginals));
    return 0;
  }
  throw io_error("--method must be enum or mc");
}

int cmd_cg_decompose(const std::string& matrix_path, const std::string& out_path) {
  std::ifstream in(matrix_path);
  if (!in) throw io_error("cannot open '" + matrix_path + "'");
  std::size_t n;
  if (!(in >> n)) throw io_error("matrix file must start with the dimension");
  MgdSpec spec;
  spec.mean.resize(n);
  for (auto& m : spec.mean)
    if (!(in >> m)) throw io_error("matrix file is truncated (mean)");
  spec.cov.assign(n, std::vector<double>(n));
  for (auto& row : spec.cov)
    for (auto& v : row)
      if (!(in >> v)) throw io_error("matrix file is truncated (covariance)");
  Network net = mgd_to_cg(spec);
  write_file(out_path, network_to_json(net).dump(2) + "\n");
  return 0;
}

int cmd_rg_inspect(const std::string& model_path, const std::string& out_path) {
  ModelDoc doc = load_model(model_path);
  Network bfg = doc.net;
  BfgAnnotation ann;
  if (doc.bfg) {
    ann = *doc.bfg;
  } else {
    Network dccd = to_dccd(doc.net);
    auto [b, a] = binary_factorize(dccd);
    bfg = std::move(b);
    ann = std::move(a);
  }
  RegionGraph rg = trc(bfg, ann);
  std::ostringstream os;
  os << "regions (" << rg.regions.size() << ")\n";
  for (int level = 1; level <= rg.max_level(); ++level) {
    for (int i : rg.level_indices(level)) {
      const Region& r = rg.regions[i];
      os << "  L" << level << " R" << i << " {" << rg.label_name(r.label) << "} c=" << r.count;
      if (r.pruned) os << " pruned_from={" << rg.label_name(r.label_before_prune) << "}";
      if (!r.factors.empty()) {
        os << " factors=";
        for (std::size_t k = 0; k < r.factors.size(); ++k)
          os << (k ? "," : "") << rg.ids[r.factors[k]];
      }
      if (!r.parents.empty()) {
        os << " parents=";
        for (std::size_t k = 0; k < r.parents.size(); ++k)
          os << (k ? "," : "") << "R" << r.parents[k];
      }
      os << "\n";
    }
  }
  JoinGraph jg = rg_to_join_graph(rg);
  os << "join graph clusters (" << jg.clusters.size() << ")\n";
  for (std::size_t i = 0; i < jg.clusters.size(); ++i)
    os << "  C" << i << " {" << rg.label_name(jg.clusters[i]) << "}\n";
  os << "join graph separators (" << jg.separators.size() << ")\n";
  for (const auto& s : jg.separators) {
    os << "  C" << s.a << " -- C" << s.b << " {" << rg.label_name(s.label) << "}";
    if (!s.full_label.empty()) os << " pruned_from={" << rg.label_name(s.full_label) << "}";
    os << "\n";
  }
  auto counts = variable_counts(rg);
  os << "variable counting numbers\n";
  for (auto& [v, c] : counts) os << "  " << rg.ids[v] << " = " << c << "\n";
  write_file(out_path, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid network inference and risk aggregation"};
  app.require_subcommand(1);

  std::string model, out = "-", to = "bfg", engine = "jt", cache, query, method = "mc", matrix;
  std::vector<std::string> evidence;
  int dd_iters = env_int("RISKBN_DD_ITERATIONS", 25);
  int bp_iters = env_int("RISKBN_BP_ITERATIONS", 200);
  int sev_iters = env_int("RISKBN_SEVERITY_ITERATIONS", 65);
  int freq_iters = env_int("RISKBN_FREQUENCY_ITERATIONS", 25);
  double threshold = 1e-6, damping = 0.0;
  std::size_t samples = 200000;
  std::uint64_t seed = 1;
  bool summary = false;

  auto* convert = app.add_subcommand("convert", "densify or pair-factorize a model");
  convert->add_option("model", model)->required();
  convert->add_option("--to", to)->check(CLI::IsMember({"dccd", "bfg"}));
  convert->add_option("-o,--output", out);

  auto* infer = app.add_subcommand("infer", "posterior marginals via jt or ddbp");
  infer->add_option("model", model)->required();
  infer->add_option("--engine", engine)->check(CLI::IsMember({"jt", "ddbp"}));
  infer->add_option("-e,--evidence", evidence);
  infer->add_option("--dd-iterations", dd_iters);
  infer->add_option("--bp-iterations", bp_iters);
  infer->add_option("--threshold", threshold);
  infer->add_option("--damping", damping);
  infer->add_option("-o,--output", out);
  infer->add_flag("--summary", summary);

  auto* aggregate =
      app.add_subcommand("aggregate", "compound distribution of a frequency/severity model");
  aggregate->add_option("model", model)->required();
  aggregate->add_option("-o,--output", out);
  aggregate->add_option("--cache", cache);
  aggregate->add_option("--severity-iterations", sev_iters);
  aggregate->add_option("--frequency-iterations", freq_iters);

  auto* deconvolve = app.add_subcommand("deconvolve", "backward inference from an observed total");
  deconvolve->add_option("model", model)->required();
  deconvolve->add_option("--cache", cache)->required();
  deconvolve->add_option("-e,--evidence", evidence)->required();
  deconvolve->add_option("--query", query);
  deconvolve->add_option("-o,--output", out);

  auto* oracle = app.add_subcommand("oracle", "reference results by enumeration or sampling");
  oracle->add_option("model", model)->required();
  oracle->add_option("--method", method)->check(CLI::IsMember({"enum", "mc"}));
  oracle->add_option("--samples", samples);
  oracle->add_option("--seed", seed);
  oracle->add_option("-o,--output", out);

  auto* cg = app.add_subcommand("cg-decompose", "conditional-Normal chain from mean/covariance");
  cg->add_option("matrix", matrix)->required();
  cg->add_option("-o,--output", out);

  auto* rg = app.add_subcommand("rg-inspect", "region graph and join-graph export");
  rg->add_option("model", model)->required();
  rg->add_option("-o,--output", out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (convert->parsed()) return cmd_convert(model, to, out);
    if (infer->parsed())
      return cmd_infer(model, engine, evidence, dd_iters, bp_iters, threshold, damping, out,
                       summary);
    if (aggregate->parsed()) return cmd_aggregate(model, out, cache, sev_iters, freq_iters);
    if (deconvolve->parsed()) return cmd_deconvolve(model, cache, evidence, query, out);
    if (oracle->parsed()) return cmd_oracle(model, method, samples, seed, out);
    if (cg->parsed()) return cmd_cg_decompose(matrix, out);
    if (rg->parsed()) return cmd_rg_inspect(model, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
