#include "tftsim/config.hpp"

#include "tftsim/errors.hpp"
#include "tftsim/io.hpp"
#include "tftsim/subsystem.hpp"

#include <cmath>
#include <set>

namespace tft {

namespace fs = std::filesystem;

namespace {

const char* type_name(ParamType t)
{
    switch (t) {
    case ParamType::Number: return "number";
    case ParamType::Integer: return "integer";
    case ParamType::Boolean: return "boolean";
    case ParamType::String: return "string";
    case ParamType::NumberArray: return "array of numbers";
    case ParamType::IntegerArray: return "array of integers";
    case ParamType::StringArray: return "array of strings";
    case ParamType::Object: return "object";
    case ParamType::ObjectArray: return "array of objects";
    }
    return "?";
}

bool is_integer(const Json& v)
{
    if (v.is_number_integer())
        return true;
    return v.is_number_float() && std::isfinite(v.get<double>()) && std::floor(v.get<double>()) == v.get<double>();
}

bool matches(ParamType t, const Json& v)
{
    auto all = [&](auto pred) {
        if (!v.is_array())
            return false;
        for (const auto& x : v)
            if (!pred(x))
                return false;
        return true;
    };
    switch (t) {
    case ParamType::Number: return v.is_number();
    case ParamType::Integer: return is_integer(v);
    case ParamType::Boolean: return v.is_boolean();
    case ParamType::String: return v.is_string();
    case ParamType::NumberArray: return all([](const Json& x) { return x.is_number(); });
    case ParamType::IntegerArray: return all(is_integer);
    case ParamType::StringArray: return all([](const Json& x) { return x.is_string(); });
    case ParamType::Object: return v.is_object();
    case ParamType::ObjectArray: return all([](const Json& x) { return x.is_object(); });
    }
    return false;
}

Json schema_type(ParamType t)
{
    switch (t) {
    case ParamType::Number: return {{"type", "number"}};
    case ParamType::Integer: return {{"type", "integer"}};
    case ParamType::Boolean: return {{"type", "boolean"}};
    case ParamType::String: return {{"type", "string"}};
    case ParamType::NumberArray: return {{"type", "array"}, {"items", {{"type", "number"}}}};
    case ParamType::IntegerArray: return {{"type", "array"}, {"items", {{"type", "integer"}}}};
    case ParamType::StringArray: return {{"type", "array"}, {"items", {{"type", "string"}}}};
    case ParamType::Object: return {{"type", "object"}};
    case ParamType::ObjectArray: return {{"type", "array"}, {"items", {{"type", "object"}}}};
    }
    return {};
}

void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where)
{
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) {
            std::string list;
            for (const auto& a : allowed)
                list += (list.empty() ? "" : ", ") + a;
            throw ConfigError(where + ": unknown key '" + it.key() + "' (allowed: " + list + ")");
        }
}

double get_number(const Json& obj, const std::string& key, const std::string& where)
{
    if (!obj.contains(key))
        throw ConfigError(where + ": missing '" + key + "'");
    if (!obj[key].is_number())
        throw ConfigError(where + "." + key + ": expected a number");
    return obj[key].get<double>();
}

const std::vector<std::string> kEnergyKeys{"ec1", "ec2", "ecc", "ej1", "ej2", "ejc", "el_c", "j1c", "j2c", "j12"};

} // namespace

Json validate_params(const ExperimentDef& def, const Json& params)
{
    const std::string where = "params (" + def.name + ")";
    Json in = params.is_null() ? Json::object() : params;
    if (!in.is_object())
        throw ConfigError(where + ": expected an object");
    std::set<std::string> allowed;
    for (const auto& p : def.params)
        allowed.insert(p.name);
    reject_unknown(in, allowed, where);
    Json out = Json::object();
    for (const auto& p : def.params) {
        if (in.contains(p.name)) {
            if (!matches(p.type, in[p.name]))
                throw ConfigError(where + "." + p.name + ": expected " + type_name(p.type));
            out[p.name] = in[p.name];
        } else if (!p.default_value.is_null()) {
            out[p.name] = p.default_value;
        } else if (!p.optional) {
            throw ConfigError(where + ": missing required '" + p.name + "'");
        }
    }
    return out;
}

DeviceEnergies parse_device(const Json& j, const fs::path& base_dir)
{
    if (j.is_string())
        return preset_device(j.get<std::string>());
    if (!j.is_object())
        throw ConfigError("device: expected a preset name or an object");
    if (j.contains("file")) {
        reject_unknown(j, {"file"}, "device");
        if (!j["file"].is_string())
            throw ConfigError("device.file: expected a path");
        fs::path p = j["file"].get<std::string>();
        if (p.is_relative())
            p = base_dir / p;
        Json inner;
        try {
            inner = Json::parse(read_text(p));
        } catch (const Json::parse_error& e) {
            throw ConfigError(p.string() + ": " + e.what());
        }
        if (inner.is_object() && inner.contains("file"))
            throw ConfigError(p.string() + ": device files cannot reference other files");
        return parse_device(inner, p.parent_path());
    }
    if (j.contains("preset")) {
        reject_unknown(j, {"preset", "qubit2_ej", "qubit2_frequency_ghz"}, "device");
        if (!j["preset"].is_string())
            throw ConfigError("device.preset: expected a string");
        const std::string name = j["preset"].get<std::string>();
        if (j.contains("qubit2_ej") && j.contains("qubit2_frequency_ghz"))
            throw ConfigError("device: give qubit2_ej or qubit2_frequency_ghz, not both");
        std::optional<double> ej;
        if (j.contains("qubit2_ej"))
            ej = get_number(j, "qubit2_ej", "device");
        if (j.contains("qubit2_frequency_ghz")) {
            const DeviceEnergies base = preset_device(name);
            ej = transmon_ej_for_frequency(base.ec2, get_number(j, "qubit2_frequency_ghz", "device"));
        }
        return preset_device(name, ej);
    }
    if (j.contains("energies_ghz")) {
        reject_unknown(j, {"energies_ghz"}, "device");
        const Json& e = j["energies_ghz"];
        if (!e.is_object())
            throw ConfigError("device.energies_ghz: expected an object");
        reject_unknown(e, std::set<std::string>(kEnergyKeys.begin(), kEnergyKeys.end()), "device.energies_ghz");
        DeviceEnergies d;
        d.ec1 = get_number(e, "ec1", "device.energies_ghz");
        d.ec2 = get_number(e, "ec2", "device.energies_ghz");
        d.ecc = get_number(e, "ecc", "device.energies_ghz");
        d.ej1 = get_number(e, "ej1", "device.energies_ghz");
        d.ej2 = get_number(e, "ej2", "device.energies_ghz");
        d.ejc = get_number(e, "ejc", "device.energies_ghz");
        d.el_c = get_number(e, "el_c", "device.energies_ghz");
        d.j1c = get_number(e, "j1c", "device.energies_ghz");
        d.j2c = get_number(e, "j2c", "device.energies_ghz");
        d.j12 = get_number(e, "j12", "device.energies_ghz");
        d.validate();
        return d;
    }
    if (j.contains("capacitances_ff")) {
        reject_unknown(j, {"capacitances_ff", "junctions_ghz"}, "device");
        const Json& c = j["capacitances_ff"];
        if (!c.is_object() || !j.contains("junctions_ghz") || !j["junctions_ghz"].is_object())
            throw ConfigError("device: capacitances_ff and junctions_ghz objects are both required");
        reject_unknown(c, {"c10", "c20", "cc0", "c1c", "c2c", "c12"}, "device.capacitances_ff");
        const Json& jj = j["junctions_ghz"];
        reject_unknown(jj, {"ej1", "ej2", "ejc", "el_c"}, "device.junctions_ghz");
        CapacitanceNetwork net;
        net.c10 = get_number(c, "c10", "device.capacitances_ff");
        net.c20 = get_number(c, "c20", "device.capacitances_ff");
        net.cc0 = get_number(c, "cc0", "device.capacitances_ff");
        net.c1c = get_number(c, "c1c", "device.capacitances_ff");
        net.c2c = get_number(c, "c2c", "device.capacitances_ff");
        net.c12 = get_number(c, "c12", "device.capacitances_ff");
        JunctionParams jp;
        jp.ej1 = get_number(jj, "ej1", "device.junctions_ghz");
        jp.ej2 = get_number(jj, "ej2", "device.junctions_ghz");
        jp.ejc = get_number(jj, "ejc", "device.junctions_ghz");
        jp.el_c = get_number(jj, "el_c", "device.junctions_ghz");
        DeviceEnergies d = energies_from_capacitances(net, jp);
        d.validate();
        return d;
    }
    throw ConfigError("device: expected one of preset, energies_ghz, capacitances_ff or file");
}

Json device_to_json(const DeviceEnergies& d)
{
    return Json{{"energies_ghz",
                 {{"ec1", d.ec1}, {"ec2", d.ec2}, {"ecc", d.ecc}, {"ej1", d.ej1}, {"ej2", d.ej2}, {"ejc", d.ejc},
                  {"el_c", d.el_c}, {"j1c", d.j1c}, {"j2c", d.j2c}, {"j12", d.j12}}}};
}

SpectrumOptions parse_spectrum_options(const Json& j)
{
    SpectrumOptions o;
    if (j.is_null())
        return o;
    if (!j.is_object())
        throw ConfigError("spectrum: expected an object");
    reject_unknown(j, {"dims", "charge_cutoff", "fluxonium_basis", "backend"}, "spectrum");
    if (j.contains("dims")) {
        const Json& d = j["dims"];
        if (!matches(ParamType::IntegerArray, d) || d.size() != 3)
            throw ConfigError("spectrum.dims: expected three integers [qubit1, coupler, qubit2]");
        o.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
        if (o.dims.q1 < 2 || o.dims.c < 2 || o.dims.q2 < 2)
            throw ConfigError("spectrum.dims: each subsystem needs at least two levels");
    }
    if (j.contains("charge_cutoff")) {
        if (!is_integer(j["charge_cutoff"]) || j["charge_cutoff"].get<int>() < 5)
            throw ConfigError("spectrum.charge_cutoff: expected an integer >= 5");
        o.charge_cutoff = j["charge_cutoff"].get<int>();
    }
    if (j.contains("fluxonium_basis")) {
        if (!is_integer(j["fluxonium_basis"]))
            throw ConfigError("spectrum.fluxonium_basis: expected an integer");
        o.fluxonium_basis = j["fluxonium_basis"].get<int>();
    }
    if (j.contains("backend")) {
        const std::string b = j["backend"].is_string() ? j["backend"].get<std::string>() : "";
        if (b == "harmonic_oscillator")
            o.backend = FluxoniumBasis::HarmonicOscillator;
        else if (b == "phase_grid")
            o.backend = FluxoniumBasis::PhaseGrid;
        else
            throw ConfigError("spectrum.backend: expected harmonic_oscillator or phase_grid");
    }
    return o;
}

RunConfig load_config(const fs::path& path, const std::string& experiment, const std::vector<ExperimentDef>& registry,
                      const CliOverrides& cli)
{
    const ExperimentDef* def = nullptr;
    for (const auto& d : registry)
        if (d.name == experiment)
            def = &d;
    if (!def) {
        std::string list;
        for (const auto& d : registry)
            list += (list.empty() ? "" : ", ") + d.name;
        throw ConfigError("unknown experiment '" + experiment + "' (available: " + list + ")");
    }
    Json j;
    try {
        j = Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (!j.is_object())
        throw ConfigError(path.string() + ": top level must be an object");
    reject_unknown(j, {"$schema", "experiment", "device", "spectrum", "params", "seed", "threads", "out"}, "config");

    RunConfig rc;
    rc.experiment = experiment;
    rc.base_dir = fs::absolute(path).parent_path();
    if (j.contains("experiment")) {
        if (!j["experiment"].is_string() || j["experiment"].get<std::string>() != experiment)
            throw ConfigError("config names experiment '" + j["experiment"].dump() + "' but '" + experiment +
                              "' was requested");
    }
    if (def->needs_device) {
        if (!j.contains("device"))
            throw ConfigError("config: '" + experiment + "' needs a device");
        rc.device = j["device"];
        parse_device(rc.device, rc.base_dir); // validates early
    } else if (j.contains("device")) {
        rc.device = j["device"];
    }
    if (j.contains("spectrum")) {
        rc.spectrum = j["spectrum"];
        parse_spectrum_options(rc.spectrum);
    }
    rc.params = validate_params(*def, j.contains("params") ? j["params"] : Json());
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned())
            throw ConfigError("config.seed: expected a non-negative integer");
        rc.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("threads")) {
        if (!is_integer(j["threads"]) || j["threads"].get<int>() < 1)
            throw ConfigError("config.threads: expected a positive integer");
        rc.threads = j["threads"].get<int>();
    }
    if (j.contains("out")) {
        if (!j["out"].is_string())
            throw ConfigError("config.out: expected a path");
        rc.out_dir = j["out"].get<std::string>();
    }
    if (cli.seed)
        rc.seed = cli.seed;
    if (cli.threads) {
        if (*cli.threads < 1)
            throw ConfigError("--threads must be positive");
        rc.threads = *cli.threads;
    }
    if (cli.out_dir)
        rc.out_dir = *cli.out_dir;
    if (def->stochastic && !rc.seed)
        throw ConfigError("'" + experiment + "' is stochastic; give a seed in the config or with --seed");

    // Thread count is excluded: outputs do not depend on it.
    Json resolved{{"experiment", experiment}, {"device", rc.device}, {"spectrum", rc.spectrum}, {"params", rc.params}};
    if (rc.seed)
        resolved["seed"] = *rc.seed;
    rc.config_text = resolved.dump();
    return rc;
}

Json config_schema(const std::vector<ExperimentDef>& registry)
{
    Json device = {
        {"oneOf",
         Json::array(
             {Json{{"type", "string"}, {"description", "preset name"}},
              Json{{"type", "object"},
                   {"properties",
                    {{"preset", {{"type", "string"}}},
                     {"qubit2_ej", {{"type", "number"}}},
                     {"qubit2_frequency_ghz", {{"type", "number"}}}}},
                   {"required", {"preset"}},
                   {"additionalProperties", false}},
              Json{{"type", "object"},
                   {"properties", {{"energies_ghz", {{"type", "object"}, {"required", kEnergyKeys}}}}},
                   {"required", {"energies_ghz"}},
                   {"additionalProperties", false}},
              Json{{"type", "object"},
                   {"properties", {{"capacitances_ff", {{"type", "object"}}}, {"junctions_ghz", {{"type", "object"}}}}},
                   {"required", {"capacitances_ff", "junctions_ghz"}},
                   {"additionalProperties", false}},
              Json{{"type", "object"},
                   {"properties", {{"file", {{"type", "string"}}}}},
                   {"required", {"file"}},
                   {"additionalProperties", false}}})}};
    Json spectrum = {{"type", "object"},
                     {"properties",
                      {{"dims", {{"type", "array"}, {"items", {{"type", "integer"}}}, {"minItems", 3}, {"maxItems", 3}}},
                       {"charge_cutoff", {{"type", "integer"}}},
                       {"fluxonium_basis", {{"type", "integer"}}},
                       {"backend", {{"enum", {"harmonic_oscillator", "phase_grid"}}}}}},
                     {"additionalProperties", false}};
    Json variants = Json::array();
    for (const auto& def : registry) {
        Json props = Json::object();
        Json required = Json::array();
        for (const auto& p : def.params) {
            Json s = schema_type(p.type);
            s["description"] = p.description;
            if (!p.default_value.is_null())
                s["default"] = p.default_value;
            else if (!p.optional)
                required.push_back(p.name);
            props[p.name] = s;
        }
        Json params = {{"type", "object"}, {"properties", props}, {"additionalProperties", false}};
        if (!required.empty())
            params["required"] = required;
        Json v = {{"description", def.description},
                  {"properties", {{"experiment", {{"const", def.name}}}, {"params", params}}}};
        Json req = Json::array({"experiment"});
        if (def.needs_device)
            req.push_back("device");
        if (def.stochastic)
            req.push_back("seed");
        v["required"] = req;
        variants.push_back(v);
    }
    return {{"$schema", "http://json-schema.org/draft-07/schema#"},
            {"title", "tftsim run configuration"},
            {"type", "object"},
            {"properties",
             {{"$schema", {{"type", "string"}}},
              {"experiment", {{"type", "string"}}},
              {"device", device},
              {"spectrum", spectrum},
              {"params", {{"type", "object"}}},
              {"seed", {{"type", "integer"}, {"minimum", 0}}},
              {"threads", {{"type", "integer"}, {"minimum", 1}}},
              {"out", {{"type", "string"}}}}},
            {"additionalProperties", false},
            {"oneOf", variants}};
}

} // namespace tft
