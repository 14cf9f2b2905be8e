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

#include <catch2/catch_amalgamated.hpp>

#include "riskbn/model_io.hpp"
#include "support/oracles.hpp"

using namespace riskbn;
using namespace riskbn::testing;

namespace {
const std::string kFixtures = RISKBN_FIXTURE_DIR;
}

TEST_CASE("fixture models load and validate") {
  ModelDoc k5 = load_model(kFixtures + "/kappa5_binary.json");
  CHECK(k5.net.nodes.size() == 8);
  REQUIRE(k5.bfg.has_value());
  CHECK(k5.bfg->originals.size() == 5);
  CHECK(k5.bfg->intermediates.size() == 3);

  ModelDoc k8 = load_model(kFixtures + "/kappa8_binary.json");
  CHECK(k8.net.nodes.size() == 23);
  CHECK(k8.evidence.states.at("X8") == "False");

  ModelDoc cc = load_model(kFixtures + "/compound_common_cause.json");
  REQUIRE(cc.compound.has_value());
  CHECK(cc.compound->cause_ids == std::vector<std::string>{"C0", "C1", "C2"});
  // The severity case map became a guarded expression over three causes.
  Assignment a;
  a.states["C0"] = "Low";
  a.states["C1"] = "High";
  a.states["C2"] = "Low";
  auto d = eval_density(cc.compound->severity, a);
  REQUIRE(d.comps.size() == 1);
  CHECK(d.comps[0].p0 == Catch::Approx(110.0));
  CHECK(d.comps[0].p1 == Catch::Approx(120.0));
}

TEST_CASE("explicit frequency tables become integer weights") {
  ModelDoc three = load_model(kFixtures + "/compound_three_state.json");
  REQUIRE(three.compound.has_value());
  auto d = eval_density(three.compound->frequency, {});
  auto fw = discretize_frequency(d, 25);
  std::map<long long, double> got;
  for (std::size_t i = 0; i < fw.values.size(); ++i) got[fw.values[i]] += fw.weights[i];
  CHECK(got.at(1) == Catch::Approx(0.2).margin(1e-9));
  CHECK(got.at(2) == Catch::Approx(0.3).margin(1e-9));
  CHECK(got.at(4) == Catch::Approx(0.5).margin(1e-9));
}

TEST_CASE("network json round-trips through parse") {
  ModelDoc doc = load_model(kFixtures + "/sparse5.json");
  json out = network_to_json(doc.net);
  ModelDoc back = parse_model(out);
  REQUIRE(back.net.nodes.size() == doc.net.nodes.size());
  for (std::size_t i = 0; i < doc.net.nodes.size(); ++i) {
    CHECK(back.net.nodes[i].id == doc.net.nodes[i].id);
    if (doc.net.nodes[i].cpd) CHECK(expr_equal(back.net.nodes[i].cpd, doc.net.nodes[i].cpd));
  }
}

TEST_CASE("csv reports are stable and normalized") {
  ModelDoc doc = load_model(kFixtures + "/kappa5_binary.json");
  InferenceResult r = ddjt(doc.net, doc.evidence);
  MarginalReport rep = report_from(r, doc.net);
  std::string csv1 = report_csv(rep);
  std::string csv2 = report_csv(report_from(ddjt(doc.net, doc.evidence), doc.net));
  CHECK(csv1 == csv2);
  // Per-node masses sum to one.
  std::map<std::string, double> sums;
  for (const auto& row : rep.rows) sums[row.node] += row.mass;
  for (auto& [id, s] : sums) CHECK(s == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("cache files round-trip and carry the content hash") {
  ModelDoc doc = load_model(kFixtures + "/compound_basic.json");
  AggregateSettings settings;
  settings.severity_dd_iterations = 20;
  settings.max_bins = 64;
  settings.compound_bins = 128;
  auto out = bfe_convolve(*doc.compound, settings);
  out.cache.content_hash = 12345;
  json j = cache_to_json(out.cache);
  ConvolutionCache back = cache_from_json(j);
  CHECK(back.content_hash == 12345);
  CHECK(back.frequency_values == out.cache.frequency_values);
  CHECK(back.compound_partition.edges == out.cache.compound_partition.edges);
  REQUIRE(back.components.size() == out.cache.components.size());
  auto post1 = bfe_deconvolve(out.cache, 55.0);
  auto post2 = bfe_deconvolve(back, 55.0);
  for (std::size_t i = 0; i < post1.frequency_posterior.size(); ++i)
    CHECK(post1.frequency_posterior[i] == Catch::Approx(post2.frequency_posterior[i]).margin(1e-12));
}

TEST_CASE("malformed models raise io errors") {
  CHECK_THROWS_AS(load_model(kFixtures + "/does_not_exist.json"), io_error);
  json bad;
  bad["nodes"] = json::array();
  bad["nodes"].push_back({{"id", "A"}, {"kind", "discrete"}, {"states", json::array({"x"})},
                          {"table", json::array({1.0})}});
  bad["nodes"].push_back({{"id", "A"}, {"kind", "continuous"}, {"cpd", "Normal(0,1)"}});
  CHECK_THROWS_AS(parse_model(bad), structural_error);  // duplicate id

  json missing_case;
  missing_case["nodes"] = json::array();
  missing_case["nodes"].push_back({{"id", "C"}, {"kind", "discrete"},
                                   {"states", json::array({"a", "b"})},
                                   {"table", json::array({0.5, 0.5})}});
  json cases;
  cases["guards"] = json::array({"C"});
  cases["map"] = {{"a", "Normal(0,1)"}};
  missing_case["nodes"].push_back({{"id", "S"}, {"kind", "continuous"}, {"cases", cases}});
  CHECK_NOTHROW(parse_model(missing_case));  // single-guard subset is fine structurally
}
