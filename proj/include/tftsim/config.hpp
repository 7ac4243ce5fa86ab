#pragma once

#include "tftsim/circuit.hpp"
#include "tftsim/spectrum.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tft {

using Json = nlohmann::ordered_json;

enum class ParamType { Number, Integer, Boolean, String, NumberArray, IntegerArray, StringArray, Object, ObjectArray };

struct ParamDef {
    std::string name;
    ParamType type = ParamType::Number;
    Json default_value; // null: required
    std::string description;
    bool optional = false; // may be absent without a default
};

struct ExperimentDef {
    std::string name;
    std::string description;
    std::vector<ParamDef> params;
    bool stochastic = false;
    bool needs_device = true;
};

// Parsed configuration file. Command-line flags override seed, threads and out.
struct RunConfig {
    std::string experiment;
    Json device;     // preset name or device object
    Json spectrum;   // spectrum solver options, may be null
    Json params;     // experiment parameters, defaults filled in
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string out_dir = "out";
    std::filesystem::path base_dir; // relative paths in the config resolve here
    std::string config_text;        // canonical JSON of the resolved configuration
};

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
};

RunConfig load_config(const std::filesystem::path& path, const std::string& experiment,
                      const std::vector<ExperimentDef>& registry, const CliOverrides& cli = {});

// Checks names and types and fills defaults; throws ConfigError naming the offending key.
Json validate_params(const ExperimentDef& def, const Json& params);

DeviceEnergies parse_device(const Json& j, const std::filesystem::path& base_dir);
SpectrumOptions parse_spectrum_options(const Json& j);
Json device_to_json(const DeviceEnergies& d);

// JSON Schema (draft-07) of the configuration file.
Json config_schema(const std::vector<ExperimentDef>& registry);

} // namespace tft
