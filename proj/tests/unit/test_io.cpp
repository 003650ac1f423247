#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aalen/erm.hpp"
#include "aalen/error.hpp"
#include "aalen/io.hpp"
#include "aalen/simulate.hpp"
#include "helpers.hpp"

using namespace aalen;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string dataset_bytes(const Dataset& data) {
  std::ostringstream out;
  write_dataset(out, data);
  return out.str();
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("aalen_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void check_same_values(const IntensityModel& a, const IntensityModel& b, std::size_t d) {
  Rng rng(5, 0);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> x(d);
    for (double& v : x) v = rng.uniform();
    const double t = rng.uniform();
    CHECK(a(t, x) == b(t, x));
  }
}

}  // namespace

TEST_CASE("dataset round trip") {
  ScenarioConfig c;
  c.kind = ScenarioKind::kMarkovTransition;
  c.d = 2;
  c.n = 300;
  c.seed = 3;
  c.truth = {{"family", "constant"}, {"value", 2.5}};
  c.return_intensity = {{"family", "constant"}, {"value", 2.5}};
  const Dataset data = simulate(c);
  const std::string bytes = dataset_bytes(data);
  std::istringstream in(bytes);
  const Dataset back = read_dataset(in);
  REQUIRE(back.size() == data.size());
  CHECK(back.d() == 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back.records()[i].id == data.records()[i].id);
    CHECK(back.records()[i].x == data.records()[i].x);
    CHECK(back.records()[i].events == data.records()[i].events);
    CHECK(back.records()[i].at_risk.pieces() == data.records()[i].at_risk.pieces());
  }
  CHECK(dataset_bytes(back) == bytes);

  const json header = json::parse(bytes.substr(0, bytes.find('\n')));
  CHECK(header.at("format") == "aalen-dataset");
  const json first = json::parse(bytes.substr(bytes.find('\n') + 1, bytes.find('\n', bytes.find('\n') + 1) - bytes.find('\n') - 1));
  CHECK(first.at("at_risk").at(0).contains("start"));
  CHECK(first.at("at_risk").at(0).contains("value"));

  const fs::path dir = scratch("dataset");
  save_dataset(dir / "d.ndjson", data);
  CHECK(file_bytes(dir / "d.ndjson") == bytes);
  CHECK(dataset_bytes(load_dataset(dir / "d.ndjson")) == bytes);

  std::istringstream broken("{\"format\":\"aalen-dataset\",\"d\":1}\n{\"id\":0,\"x\":[0.5,0.1],\"events\":[],\"at_risk\":[]}\n");
  CHECK_THROWS_AS(read_dataset(broken), Error);
  std::istringstream garbage("not json\n");
  CHECK_THROWS_AS(read_dataset(garbage), Error);
  CHECK_THROWS_AS(load_dataset(dir / "missing.ndjson"), Error);
}

TEST_CASE("sieve spec and model round trips") {
  const SieveSpec pp = testing::pp_spec({2, 1, 0}, {1, 2, 0}, 3.0);
  const json j = to_json(pp);
  CHECK(j.at("family") == "pp");
  const SieveSpec back = sieve_spec_from_json(j);
  CHECK(back.m == pp.m);
  CHECK(back.l == pp.l);
  CHECK(back.clip == pp.clip);
  CHECK(sieve_family_from_string("piecewise_polynomial") == SieveFamily::kPiecewisePoly);
  CHECK(sieve_family_from_string("haar") == SieveFamily::kHaar);
  CHECK_THROWS_AS(sieve_family_from_string("spline"), Error);

  const Dataset data = testing::random_dataset(200, 2, 9);
  const ErmFit f = fit(data, testing::pp_spec({1, 1, 1}, {1, 1, 1}, 1.5), 0.0, 0.01);
  const ErmFit h = fit(data, testing::haar_spec({1, 1, 0}, 1.5), 0.0, 0.01);
  const IntensityModel truth = named_intensity({{"family", "single_index"}, {"index", {0.6, 0.8}}}, 2);
  const IntensityModel sim = IntensityModel::single_index(
      IntensityModel::sieve(testing::pp_spec({1, 1}, {1, 1}, 2.0), testing::random_coefficients(16, 2, 1.0)), {0.6, 0.8});
  const IntensityModel mix = IntensityModel::mixture({0.2, 0.3, 0.1, 0.4}, {f.model(), h.model(), truth, sim});
  for (const IntensityModel& m : {f.model(), h.model(), truth, sim, mix, IntensityModel::constant(2, 0.25)}) {
    const json mj = to_json(m);
    const IntensityModel r = model_from_json(mj);
    check_same_values(m, r, 2);
    CHECK(to_json(r).dump() == mj.dump());
    CHECK(r.sup_bound() == m.sup_bound());
  }
  // Ad-hoc closed forms have no descriptor.
  ClosedFormIntensity adhoc;
  adhoc.d = 1;
  adhoc.value = [](double t, std::span<const double>) { return t; };
  adhoc.sup = 1.0;
  CHECK_THROWS_AS(to_json(IntensityModel::closed_form(adhoc)), Error);
  CHECK_THROWS_AS(model_from_json({{"type", "nope"}}), Error);

  const json fj = to_json(f);
  CHECK(fj.at("coefficients").size() == 64);
  CHECK(fj.contains("rho_certificate"));
  CHECK(to_json(build_net(2, 0.5)).at("points").size() == build_net(2, 0.5).points.size());
  CHECK(finite_or_null(std::numeric_limits<double>::infinity()).is_null());
  CHECK(finite_or_null(2.0) == 2.0);
}

#ifdef AALEN_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + AALEN_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST_CASE("command-line tool") {
  const fs::path dir = scratch("cli");
  const json scenario = {{"kind", "censored_survival"},
                         {"d", 1},
                         {"n", 400},
                         {"seed", 4},
                         {"truth", {{"family", "smooth_separable"}}},
                         {"censoring", {{"family", "constant"}, {"value", 0.3}}}};
  write_text(dir / "scenario.json", scenario.dump());
  REQUIRE(run_cli("simulate --config " + (dir / "scenario.json").string() + " --out " + (dir / "sim1").string()) == 0);
  REQUIRE(run_cli("simulate --config " + (dir / "scenario.json").string() + " --out " + (dir / "sim4").string() +
                  " --threads 4") == 0);
  CHECK(file_bytes(dir / "sim1" / "dataset.ndjson") == file_bytes(dir / "sim4" / "dataset.ndjson"));
  CHECK(file_bytes(dir / "sim1" / "scenario.json") == file_bytes(dir / "sim4" / "scenario.json"));
  CHECK(load_dataset(dir / "sim1" / "dataset.ndjson").size() == 400);

  const json fit_cfg = {{"data", "sim1/dataset.ndjson"}, {"spec", {{"family", "pp"}, {"m", {1, 1}}, {"l", {1, 1}}, {"clip", 1.0}}}};
  write_text(dir / "fit.json", fit_cfg.dump());
  REQUIRE(run_cli("fit --config " + (dir / "fit.json").string() + " --out " + (dir / "fit").string()) == 0);
  const IntensityModel fitted = model_from_json(load_json(dir / "fit" / "model.json"));
  const ErmFit direct = fit(load_dataset(dir / "sim1" / "dataset.ndjson"), testing::pp_spec({1, 1}, {1, 1}, 1.0), 0.0, 1.0 / 400.0);
  check_same_values(fitted, direct.model(), 1);

  const json eval_cfg = {{"model", "fit/model.json"}, {"data", "sim1/dataset.ndjson"}, {"scenario", "sim1/scenario.json"}};
  write_text(dir / "eval.json", eval_cfg.dump());
  REQUIRE(run_cli("evaluate --config " + (dir / "eval.json").string() + " --out " + (dir / "eval").string()) == 0);
  const json ev = load_json(dir / "eval" / "evaluation.json");
  CHECK(ev.at("empirical_risk").get<double>() == doctest::Approx(direct.achieved_risk).epsilon(1e-12));
  CHECK(ev.at("evaluation_measure") == "closed_form");

  write_text(dir / "broken.json", "{\"kind\": \"queue\", \"truth\": {\"family\": \"constant\", \"value\": 1}}");
  CHECK(run_cli("simulate --config " + (dir / "broken.json").string() + " --out " + (dir / "x").string()) == 2);
  CHECK(run_cli("simulate --config " + (dir / "missing.json").string()) != 0);
  CHECK(run_cli("") != 0);
}
#endif
