#include "aalen/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "aalen/error.hpp"
#include "aalen/simulate.hpp"

namespace aalen {

using nlohmann::json;

namespace {

void append_double(std::string& out, double v) {
  require(std::isfinite(v), ErrorCode::kInvalidArgument, "cannot serialize a non-finite value");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void append_array(std::string& out, const std::vector<double>& v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    append_double(out, v[i]);
  }
  out += ']';
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data) {
  out << json{{"format", "aalen-dataset"}, {"d", data.d()}}.dump() << '\n';
  std::string line;
  for (const auto& r : data.records()) {
    line = "{\"id\":" + std::to_string(r.id) + ",\"x\":";
    append_array(line, r.x);
    line += ",\"events\":";
    append_array(line, r.events);
    line += ",\"at_risk\":[";
    const auto& pieces = r.at_risk.pieces();
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      line += i ? ",{\"start\":" : "{\"start\":";
      append_double(line, pieces[i].interval.start);
      line += ",\"end\":";
      append_double(line, pieces[i].interval.end);
      line += ",\"value\":";
      append_double(line, pieces[i].value);
      line += '}';
    }
    line += "]}\n";
    out << line;
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto parse = [&](const std::string& text) {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, "dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  };
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse, "dataset is empty");
  ++line_no;
  const json header = parse(line);
  require(header.value("format", std::string()) == "aalen-dataset" && header.contains("d"), ErrorCode::kParse,
          "dataset header line missing");
  const auto d = header.at("d").get<std::size_t>();
  std::vector<PathRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse(line);
    try {
      PathRecord r;
      r.id = j.at("id").get<std::int64_t>();
      r.x = j.at("x").get<std::vector<double>>();
      r.events = j.at("events").get<std::vector<double>>();
      std::vector<StepPiece> pieces;
      for (const auto& p : j.at("at_risk")) {
        pieces.push_back(
            StepPiece{Interval{p.at("start").get<double>(), p.at("end").get<double>()}, p.at("value").get<double>()});
      }
      r.at_risk = StepFunction(std::move(pieces));
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, "dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Dataset(d, std::move(records));
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  write_dataset(out, data);
  require(static_cast<bool>(out), ErrorCode::kIo, "failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + path.string());
  return read_dataset(in);
}

SieveFamily sieve_family_from_string(const std::string& name) {
  if (name == "haar") return SieveFamily::kHaar;
  require(name == "pp" || name == "piecewise_polynomial", ErrorCode::kParse, "unknown sieve family \"" + name + "\"");
  return SieveFamily::kPiecewisePoly;
}

json to_json(const SieveSpec& spec) {
  return {{"family", spec.family == SieveFamily::kHaar ? "haar" : "pp"},
          {"d", spec.d},
          {"m", spec.m},
          {"l", spec.l},
          {"clip", spec.clip}};
}

SieveSpec sieve_spec_from_json(const json& j) {
  try {
    SieveSpec s;
    s.family = sieve_family_from_string(j.value("family", std::string("pp")));
    s.m = j.at("m").get<std::vector<int>>();
    require(!s.m.empty(), ErrorCode::kParse, "sieve spec: \"m\" must list d + 1 resolutions");
    s.d = j.contains("d") ? j.at("d").get<std::size_t>() : s.m.size() - 1;
    if (j.contains("l")) {
      s.l = j.at("l").get<std::vector<int>>();
    } else {
      s.l.assign(s.d + 1, s.family == SieveFamily::kHaar ? 1 : 0);
    }
    s.clip = j.value("clip", 1.0);
    validate(s);
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("sieve spec: ") + e.what());
  }
}

json to_json(const IntensityModel& model) {
  const auto& node = model.node();
  return std::visit(
      [&](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ClosedFormIntensity>) {
          require(!v.descriptor.is_null(), ErrorCode::kInvalidArgument,
                  "closed-form intensity \"" + v.description + "\" has no named descriptor");
          return {{"type", "closed_form"}, {"d", v.d}, {"descriptor", v.descriptor}};
        } else if constexpr (std::is_same_v<T, SieveIntensity>) {
          return {{"type", "sieve"},
                  {"spec", to_json(v.spec)},
                  {"coefficients", std::vector<double>(v.coefficients.begin(), v.coefficients.end())}};
        } else if constexpr (std::is_same_v<T, ClippedIntensity>) {
          return {{"type", "clipped"}, {"lower", v.lower}, {"upper", v.upper}, {"inner", to_json(v.inner)}};
        } else if constexpr (std::is_same_v<T, MixtureIntensity>) {
          json comps = json::array();
          for (const auto& c : v.components) comps.push_back(to_json(c));
          return {{"type", "mixture"}, {"weights", v.weights}, {"components", std::move(comps)}};
        } else {
          return {{"type", "single_index"}, {"index", v.index}, {"link", to_json(v.link)}};
        }
      },
      node.value);
}

IntensityModel model_from_json(const json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "closed_form") {
      const auto d = j.at("d").get<std::size_t>();
      const json& desc = j.at("descriptor");
      if (desc.value("family", std::string()) == "constant") {
        return IntensityModel::constant(d, desc.at("value").get<double>());
      }
      return named_intensity(desc, d);
    }
    if (type == "sieve") {
      const SieveSpec spec = sieve_spec_from_json(j.at("spec"));
      const auto c = j.at("coefficients").get<std::vector<double>>();
      return IntensityModel::sieve(spec, Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())));
    }
    if (type == "clipped") {
      return IntensityModel::clipped(model_from_json(j.at("inner")), j.at("lower").get<double>(),
                                     j.at("upper").get<double>());
    }
    if (type == "mixture") {
      std::vector<IntensityModel> comps;
      for (const auto& c : j.at("components")) comps.push_back(model_from_json(c));
      return IntensityModel::mixture(j.at("weights").get<std::vector<double>>(), std::move(comps));
    }
    if (type == "single_index") {
      return IntensityModel::single_index(model_from_json(j.at("link")), j.at("index").get<std::vector<double>>());
    }
    fail(ErrorCode::kParse, "unknown model type \"" + type + "\"");
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("model: ") + e.what());
  }
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json to_json(const ErmFit& fit) {
  return {{"spec", to_json(fit.spec)},
          {"coefficients", std::vector<double>(fit.coefficients.begin(), fit.coefficients.end())},
          {"gram_condition", finite_or_null(fit.gram_condition)},
          {"achieved_risk", fit.achieved_risk},
          {"unclipped_risk", fit.unclipped_risk},
          {"rho_certificate", fit.rho_certificate},
          {"rho", fit.rho},
          {"ridge", fit.ridge},
          {"clipped", fit.clipped}};
}

json to_json(const AggregateFit& fit) {
  json members = json::array();
  for (std::size_t i = 0; i < fit.dictionary.size(); ++i) {
    members.push_back({{"provenance", fit.dictionary[i].provenance},
                       {"learning_risk", fit.learning_risks[i]},
                       {"weight", fit.weights[i]}});
  }
  return {{"temperature", fit.temperature}, {"n", fit.n}, {"weights", fit.weights}, {"members", std::move(members)}};
}

json to_json(const SphereNet& net) { return {{"d", net.d}, {"delta", net.delta}, {"points", net.points}}; }

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

void save_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace aalen
