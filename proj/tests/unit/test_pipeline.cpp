#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aalen/erm.hpp"
#include "aalen/error.hpp"
#include "aalen/io.hpp"
#include "aalen/pipeline.hpp"
#include "helpers.hpp"

using namespace aalen;
using nlohmann::json;

namespace {

PipelineConfig smooth_d1(std::size_t n, std::uint64_t seed) {
  PipelineConfig c;
  c.scenario.kind = ScenarioKind::kCensoredSurvival;
  c.scenario.d = 1;
  c.scenario.n = 2 * n;
  c.scenario.seed = seed;
  c.scenario.truth = {{"family", "single_index"}, {"index", {1.0}}, {"scale", 0.5}};
  c.scenario.censoring = {{"family", "constant"}, {"value", 0.3}};
  c.l = {1};
  c.clip = 1.0;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("splits partition the sample") {
  for (std::size_t total : {2u, 7u, 100u, 1001u}) {
    const auto [train, learn] = split_indices(total, 9);
    CHECK(train.size() == total / 2);
    CHECK(learn.size() == total - total / 2);
    std::vector<std::size_t> all = train;
    all.insert(all.end(), learn.begin(), learn.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(total);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);
    CHECK(split_indices(total, 9) == std::make_pair(train, learn));
  }
  CHECK(split_indices(1000, 1) != split_indices(1000, 2));
}

TEST_CASE("a one-member dictionary reproduces the single fit") {
  PipelineConfig c = smooth_d1(300, 3);
  c.resolutions = {{1, 1}};
  const Dataset data = simulate(c.scenario);
  const PipelineResult r = run_pipeline(c, data);
  REQUIRE(r.splits.size() == 1);
  CHECK(r.splits[0].aggregate.weights == std::vector<double>{1.0});
  const ErmFit f = fit(data.subset(r.splits[0].training), testing::pp_spec({1, 1}, {1, 1}, 1.0), 0.0, 1.0 / 300.0);
  const IntensityModel single = f.model();
  for (double t : {0.0, 0.2, 0.55, 1.0}) {
    for (double x : {0.0, 0.3, 0.99}) {
      const std::vector<double> xv{x};
      CHECK(r.model(t, xv) == single(t, xv));
    }
  }
}

TEST_CASE("jackknife over identical splits equals one split") {
  PipelineConfig c = smooth_d1(300, 4);
  c.jackknife = 2;
  c.split_seeds = {17, 17};
  const Dataset data = simulate(c.scenario);
  const PipelineResult r = run_pipeline(c, data);
  REQUIRE(r.splits.size() == 2);
  CHECK(r.splits[0].aggregate.weights == r.splits[1].aggregate.weights);
  for (double t : {0.1, 0.6}) {
    for (double x : {0.2, 0.8}) {
      const std::vector<double> xv{x};
      CHECK(r.model(t, xv) == doctest::Approx(r.splits[0].aggregate.model(t, xv)).epsilon(1e-14));
    }
  }
  PipelineConfig bad = c;
  bad.split_seeds = {1};
  CHECK_THROWS_AS(run_pipeline(bad, data), Error);
  bad.jackknife = 0;
  bad.split_seeds.clear();
  CHECK_THROWS_AS(run_pipeline(bad, data), Error);
}

TEST_CASE("report provenance and weights") {
  PipelineConfig c = smooth_d1(400, 5);
  c.scenario.d = 2;
  c.scenario.truth = {{"family", "single_index"}, {"index", {0.6, 0.8}}};
  c.sim_enabled = true;
  c.net_delta = 0.5;
  c.evaluate_members = true;
  c.mc_draws = 512;
  const PipelineResult r = run_pipeline(c);
  const json& split = r.report.at("splits").at(0);
  double total = 0.0;
  std::size_t sim = 0;
  for (const auto& m : split.at("members")) {
    const json& p = m.at("provenance");
    CHECK(p.contains("family"));
    CHECK(p.contains("m"));
    if (p.at("kind") == "single_index") {
      ++sim;
      CHECK(p.at("v").size() == 2);
    } else {
      CHECK(p.at("kind") == "nonparametric");
    }
    CHECK(m.at("learning_risk").is_number());
    CHECK(m.at("l2_risk").is_number());
    total += m.at("weight").get<double>();
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sim == build_net(2, 0.5).points.size() * build_collection(400, 1, SieveFamily::kPiecewisePoly, {1, 1}, 1.0).specs.size());
  CHECK(r.l2_to_truth.has_value());
  CHECK(r.report.at("evaluation_measure") == "closed_form");
}

TEST_CASE("the pipeline is a pure function of data and configuration") {
  PipelineConfig c = smooth_d1(300, 6);
  c.jackknife = 2;
  const PipelineResult a = run_pipeline(c, 1);
  const PipelineResult b = run_pipeline(pipeline_config_from_json(to_json(c)), 4);
  CHECK(a.report.dump() == b.report.dump());
  CHECK(to_json(a.model).dump() == to_json(b.model).dump());

  // Markov scenario with returns falls back to an empirical evaluation measure.
  PipelineConfig mk = smooth_d1(200, 7);
  mk.scenario.kind = ScenarioKind::kMarkovTransition;
  mk.scenario.censoring = nullptr;
  mk.scenario.return_intensity = {{"family", "constant"}, {"value", 1.0}};
  const PipelineResult m1 = run_pipeline(mk, 1);
  CHECK(m1.report.at("evaluation_measure") == "empirical");
  CHECK(*m1.l2_to_truth == *run_pipeline(mk, 3).l2_to_truth);

  const Dataset tiny(1, {testing::make_record(0, {0.5}, {}, {testing::piece(0.0, 1.0, 1.0)})});
  CHECK_THROWS_AS(run_pipeline(c, tiny), Error);
}

TEST_CASE("rate table arithmetic") {
  std::vector<RateRow> rows;
  for (std::size_t n : {100u, 200u, 400u}) {
    for (std::uint64_t s = 0; s < 3; ++s) rows.push_back({n, s, 10.0 / static_cast<double>(n) * (1.0 + 0.1 * s)});
  }
  const RateTable t = summarize_rate_table(rows);
  REQUIRE(t.summary.size() == 3);
  CHECK(t.summary[0].median_risk == doctest::Approx(0.11));
  CHECK(t.slope == doctest::Approx(-1.0).epsilon(1e-12));

  std::vector<RateRow> doubled = rows;
  for (auto& r : doubled) r.risk *= 2.0;
  const RateTable t2 = summarize_rate_table(doubled);
  for (std::size_t i = 0; i < 3; ++i) CHECK(t2.summary[i].median_risk == 2.0 * t.summary[i].median_risk);
  CHECK(t2.slope == doctest::Approx(t.slope).epsilon(1e-12));

  // Even count: mean of the two central values.
  const RateTable even = summarize_rate_table({{10, 0, 1.0}, {10, 1, 4.0}, {10, 2, 2.0}, {10, 3, 3.0}});
  CHECK(even.summary[0].median_risk == 2.5);

  std::ostringstream rows_csv, summary_csv;
  write_rate_rows_csv(rows_csv, t);
  write_rate_summary_csv(summary_csv, t);
  CHECK(rows_csv.str().rfind("n,seed,risk\n100,0,", 0) == 0);
  CHECK(summary_csv.str().rfind("n,median_risk\n", 0) == 0);
  CHECK(summary_csv.str().find("\nslope,") != std::string::npos);
}

TEST_CASE("rate study preconditions and a small run") {
  const PipelineConfig c = smooth_d1(0, 0);
  const std::vector<std::uint64_t> seeds{1, 2};
  const std::vector<std::size_t> two{100, 200};
  CHECK_THROWS_AS(rate_study(c, two, seeds), Error);
  const std::vector<std::size_t> unsorted{200, 100, 400};
  CHECK_THROWS_AS(rate_study(c, unsorted, seeds), Error);
  const std::vector<std::size_t> grid{150, 300, 600};
  const RateTable t = rate_study(c, grid, seeds, 2);
  CHECK(t.rows.size() == 6);
  for (const auto& r : t.rows) CHECK(r.risk >= 0.0);
  CHECK(std::isfinite(t.slope));
}
