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

// Model files (JSON), marginal reports (CSV + summaries), and the
// convolution cache file.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskbn/aggregate.hpp"
#include "riskbn/discrete_model.hpp"
#include "riskbn/network.hpp"

namespace riskbn {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Model document: a network plus optional evidence, factorization roles and
// a compound section.

struct ModelDoc {
  Network net;
  Evidence evidence;
  std::optional<BfgAnnotation> bfg;
  std::optional<CompoundSpec> compound;
  std::string compound_severity_id;
};

namespace detail {

inline ExprPtr cases_to_expr(const json& spec) {
  // {"guards": ["C0","C1"], "map": {"High|High": "...", ...}}
  std::vector<std::string> guards = spec.at("guards").get<std::vector<std::string>>();
  if (guards.empty()) throw io_error("cases need at least one guard");
  std::map<std::vector<std::string>, ExprPtr> leaves;
  for (auto& [key, value] : spec.at("map").items()) {
    std::vector<std::string> states;
    std::stringstream ss(key);
    std::string tok;
    while (std::getline(ss, tok, '|')) states.push_back(tok);
    if (states.size() != guards.size())
      throw io_error(detail::cat("case key '", key, "' does not match ", guards.size(), " guards"));
    leaves[states] = parse_expr(value.get<std::string>());
  }
  // Build nested guard expressions from the innermost guard outwards.
  std::function<ExprPtr(std::vector<std::string>&, std::size_t)> build =
      [&](std::vector<std::string>& prefix, std::size_t depth) -> ExprPtr {
    if (depth == guards.size()) {
      auto it = leaves.find(prefix);
      if (it == leaves.end()) {
        std::string key;
        for (auto& s : prefix) key += (key.empty() ? "" : "|") + s;
        throw io_error(detail::cat("missing case for guard states '", key, "'"));
      }
      return it->second;
    }
    // The state labels for this guard come from the keys present.
    std::vector<std::string> labels;
    for (auto& [k, v] : leaves)
      if (std::find(labels.begin(), labels.end(), k[depth]) == labels.end())
        labels.push_back(k[depth]);
    std::vector<std::pair<std::string, ExprPtr>> cases;
    for (auto& label : labels) {
      prefix.push_back(label);
      cases.emplace_back(label, build(prefix, depth + 1));
      prefix.pop_back();
    }
    return make_partitioned(guards[depth], std::move(cases));
  };
  std::vector<std::string> prefix;
  return build(prefix, 0);
}

}  // namespace detail

inline ModelDoc parse_model(const json& doc) {
  ModelDoc out;
  if (!doc.contains("nodes")) throw io_error("model file has no nodes array");
  for (const auto& jn : doc.at("nodes")) {
    Node n;
    n.id = jn.at("id").get<std::string>();
    std::string kind = jn.value("kind", "continuous");
    if (kind == "discrete") {
      n.kind = NodeKind::Discrete;
      n.states = jn.at("states").get<std::vector<std::string>>();
      if (jn.contains("parents")) n.table_parents = jn.at("parents").get<std::vector<std::string>>();
      n.table = jn.at("table").get<std::vector<double>>();
    } else if (kind == "continuous") {
      n.kind = NodeKind::Continuous;
      if (jn.contains("cases")) n.cpd = detail::cases_to_expr(jn.at("cases"));
      else n.cpd = parse_expr(jn.at("cpd").get<std::string>());
      if (jn.contains("support"))
        n.support = std::make_pair(jn.at("support").at(0).get<double>(),
                                   jn.at("support").at(1).get<double>());
    } else {
      throw io_error(detail::cat("node '", n.id, "' has unknown kind '", kind, "'"));
    }
    out.net.nodes.push_back(std::move(n));
  }
  out.net.validate();

  if (doc.contains("evidence")) {
    for (auto& [id, v] : doc.at("evidence").items()) {
      if (v.is_number()) out.evidence.values[id] = v.get<double>();
      else out.evidence.states[id] = v.get<std::string>();
    }
  }

  if (doc.contains("bfg")) {
    BfgAnnotation ann;
    ann.originals = doc.at("bfg").at("originals").get<std::vector<std::string>>();
    for (auto& [e, child] : doc.at("bfg").at("intermediates").items()) {
      ann.intermediates.push_back(e);
      ann.origin[e] = child.get<std::string>();
    }
    out.bfg = std::move(ann);
  }

  if (doc.contains("compound")) {
    const json& jc = doc.at("compound");
    CompoundSpec spec;
    if (jc.at("frequency").is_object()) {
      // Explicit (values, weights) frequency table encoded as a mixture of
      // unit-width blocks around each integer.
      auto values = jc.at("frequency").at("values").get<std::vector<long long>>();
      auto weights = jc.at("frequency").at("weights").get<std::vector<double>>();
      if (values.size() != weights.size() || values.empty())
        throw io_error("frequency table needs matching values/weights");
      std::vector<double> w;
      std::vector<ExprPtr> comps;
      for (std::size_t i = 0; i < values.size(); ++i) {
        w.push_back(weights[i]);
        comps.push_back(make_dist(DistName::Uniform, {make_const(values[i] - 0.49),
                                                      make_const(values[i] + 0.49)}));
      }
      spec.frequency = make_mixture(std::move(w), std::move(comps));
    } else {
      spec.frequency = parse_expr(jc.at("frequency").get<std::string>());
    }
    std::string sev_id = jc.at("severity").get<std::string>();
    out.compound_severity_id = sev_id;
    spec.severity = out.net.node(sev_id).cpd;
    if (jc.contains("causes")) spec.cause_ids = jc.at("causes").get<std::vector<std::string>>();
    for (const auto& n : out.net.nodes)
      if (n.kind == NodeKind::Discrete) spec.causes.nodes.push_back(n);
    for (const auto& id : spec.cause_ids) spec.causes.node(id);
    out.compound = std::move(spec);
  }
  return out;
}

inline ModelDoc load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error(detail::cat("cannot open model file '", path, "'"));
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw io_error(detail::cat("model file '", path, "' is not valid JSON: ", e.what()));
  }
  return parse_model(doc);
}

inline json network_to_json(const Network& net, const BfgAnnotation* ann = nullptr) {
  json doc;
  doc["version"] = 1;
  doc["nodes"] = json::array();
  for (const auto& n : net.nodes) {
    json jn;
    jn["id"] = n.id;
    if (n.kind == NodeKind::Discrete) {
      jn["kind"] = "discrete";
      jn["states"] = n.states;
      jn["parents"] = n.table_parents;
      jn["table"] = n.table;
    } else {
      jn["kind"] = "continuous";
      jn["cpd"] = print_expr(n.cpd);
      if (n.support) jn["support"] = {n.support->first, n.support->second};
    }
    doc["nodes"].push_back(std::move(jn));
  }
  if (ann) {
    json jb;
    jb["originals"] = ann->originals;
    json inter = json::object();
    for (const auto& e : ann->intermediates) inter[e] = ann->origin.at(e);
    jb["intermediates"] = std::move(inter);
    doc["bfg"] = std::move(jb);
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Reports

struct MarginalReport {
  struct Row {
    std::string node;
    double lo, hi, mass;
  };
  std::vector<Row> rows;
  std::map<std::string, SummaryStats> summaries;
  int iterations = 0;
  double residual = 0.0;
  double entropy_error = 0.0;
  bool converged = true;
};

inline MarginalReport report_from(const InferenceResult& r, const Network& net) {
  MarginalReport rep;
  rep.iterations = r.iterations;
  rep.residual = r.residual;
  rep.entropy_error = r.entropy_error;
  for (const auto& n : net.nodes) {
    if (auto it = r.discrete.find(n.id); it != r.discrete.end()) {
      for (std::size_t k = 0; k < it->second.size(); ++k)
        rep.rows.push_back({n.id, static_cast<double>(k), static_cast<double>(k), it->second[k]});
    } else if (auto jt = r.marginals.find(n.id); jt != r.marginals.end()) {
      const auto& d = jt->second;
      for (int b = 0; b < d.partition.size(); ++b)
        rep.rows.push_back({n.id, d.partition.lo(b), d.partition.hi(b), d.mass[b]});
      rep.summaries[n.id] = summarize(d);
    }
  }
  return rep;
}

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string report_csv(const MarginalReport& rep) {
  std::string out = "node_id,bin_lo,bin_hi,mass\n";
  for (const auto& r : rep.rows)
    out += r.node + "," + detail::fmt17(r.lo) + "," + detail::fmt17(r.hi) + "," +
           detail::fmt17(r.mass) + "\n";
  return out;
}

inline std::string report_summary_text(const MarginalReport& rep) {
  std::ostringstream os;
  os << "node mean sd median p95 p99\n";
  for (const auto& [id, s] : rep.summaries) {
    os << id << " " << detail::fmt17(s.mean) << " " << detail::fmt17(s.sd) << " "
       << detail::fmt17(s.median) << " " << detail::fmt17(s.p95) << " " << detail::fmt17(s.p99)
       << "\n";
  }
  os << "iterations " << rep.iterations << "\n";
  os << "residual " << detail::fmt17(rep.residual) << "\n";
  os << "entropy_error " << detail::fmt17(rep.entropy_error) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Cache file round-trip.  The hash ties a cache to the producing model text
// and settings; a mismatch on load is an error.

inline json cache_to_json(const ConvolutionCache& cache) {
  json doc;
  doc["hash"] = cache.content_hash;
  doc["frequency_values"] = cache.frequency_values;
  doc["frequency_weights"] = cache.frequency_weights;
  doc["partition_edges"] = cache.compound_partition.edges;
  doc["cause_prior"] = cache.cause_prior;
  doc["cause_ids"] = cache.cause_ids;
  doc["cause_state_labels"] = cache.cause_state_labels;
  doc["selector_priors"] = cache.selector_priors;
  json comps = json::array();
  for (const auto& c : cache.components) comps.push_back(c.columns);
  doc["components"] = std::move(comps);
  doc["chain"] = cache.chain;
  return doc;
}

inline ConvolutionCache cache_from_json(const json& doc) {
  ConvolutionCache cache;
  cache.content_hash = doc.at("hash").get<std::uint64_t>();
  cache.frequency_values = doc.at("frequency_values").get<std::vector<long long>>();
  cache.frequency_weights = doc.at("frequency_weights").get<std::vector<double>>();
  cache.compound_partition = Partition::from_edges(doc.at("partition_edges").get<std::vector<double>>());
  cache.cause_prior = doc.at("cause_prior").get<std::vector<double>>();
  cache.cause_ids = doc.at("cause_ids").get<std::vector<std::string>>();
  cache.cause_state_labels =
      doc.at("cause_state_labels").get<std::vector<std::vector<std::string>>>();
  cache.selector_priors = doc.at("selector_priors").get<std::vector<double>>();
  for (const auto& jc : doc.at("components")) {
    ConditionalDensity c;
    c.partition = cache.compound_partition;
    c.columns = jc.get<std::vector<std::vector<double>>>();
    cache.components.push_back(std::move(c));
  }
  cache.chain = doc.at("chain").get<std::vector<std::vector<double>>>();
  return cache;
}

inline std::uint64_t model_settings_hash(const json& model_doc, const std::string& settings_tag) {
  return fnv1a(model_doc.dump() + "|" + settings_tag);
}

}  // namespace riskbn
