#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "aalen/aggregation.hpp"
#include "aalen/erm.hpp"
#include "aalen/model.hpp"
#include "aalen/sieves.hpp"
#include "aalen/single_index.hpp"

namespace aalen {

// Newline-delimited JSON: a header line {"format": "aalen-dataset", "d": d}
// followed by one object per record with "id", "x", "events" and "at_risk"
// pieces {"start", "end", "value"}. Floats are written with 17 significant digits.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

// "pp" or "haar"; "piecewise_polynomial" is accepted on input.
SieveFamily sieve_family_from_string(const std::string& name);
nlohmann::json to_json(const SieveSpec& spec);
SieveSpec sieve_spec_from_json(const nlohmann::json& j);

// Models round-trip exactly. Closed-form members are stored through their named
// descriptor; ad-hoc closed forms cannot be serialized.
nlohmann::json to_json(const IntensityModel& model);
IntensityModel model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ErmFit& fit);
nlohmann::json to_json(const AggregateFit& fit);
nlohmann::json to_json(const SphereNet& net);

nlohmann::json load_json(const std::filesystem::path& path);
// Pretty-printed with a trailing newline.
void save_json(const std::filesystem::path& path, const nlohmann::json& j);

// Infinite or NaN values become null.
nlohmann::json finite_or_null(double v);

}  // namespace aalen
