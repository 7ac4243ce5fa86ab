#include "tftsim/experiments.hpp"

#include "tftsim/benchmarking.hpp"
#include "tftsim/dynamics.hpp"
#include "tftsim/error_model.hpp"
#include "tftsim/errors.hpp"
#include "tftsim/io.hpp"
#include "tftsim/perturbation.hpp"
#include "tftsim/pulse.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fftw3.h>
#include <gsl/gsl_version.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <set>

namespace tft {

namespace fs = std::filesystem;

const char* tftsim_version() { return "0.1.0"; }

namespace {

struct Context {
    const RunConfig& rc;
    DeviceEnergies device;
    SpectrumOptions spectrum;
    OutputStage& out;
    Json results = Json::object();

    const Json& p(const std::string& k) const { return rc.params.at(k); }
    bool has(const std::string& k) const { return rc.params.contains(k); }
    double num(const std::string& k) const { return rc.params.at(k).get<double>(); }
    int integer(const std::string& k) const { return rc.params.at(k).get<int>(); }
    std::string str(const std::string& k) const { return rc.params.at(k).get<std::string>(); }
    std::vector<double> nums(const std::string& k) const { return rc.params.at(k).get<std::vector<double>>(); }
    fs::path path(const std::string& k) const
    {
        fs::path f = str(k);
        return f.is_relative() ? rc.base_dir / f : f;
    }
    std::uint64_t seed() const { return rc.seed.value_or(0); }
};

using Runner = std::function<void(Context&)>;

ParamDef num(std::string n, double d, std::string desc) { return {std::move(n), ParamType::Number, d, std::move(desc)}; }
ParamDef integer(std::string n, int d, std::string desc) { return {std::move(n), ParamType::Integer, d, std::move(desc)}; }
ParamDef str(std::string n, std::string d, std::string desc)
{
    return {std::move(n), ParamType::String, std::move(d), std::move(desc)};
}
ParamDef boolean(std::string n, bool d, std::string desc) { return {std::move(n), ParamType::Boolean, d, std::move(desc)}; }
ParamDef opt(std::string n, ParamType t, std::string desc) { return {std::move(n), t, Json(), std::move(desc), true}; }
ParamDef nums(std::string n, std::vector<double> d, std::string desc)
{
    return {std::move(n), ParamType::NumberArray, Json(d), std::move(desc)};
}

// Shared parameter groups --------------------------------------------------

std::vector<ParamDef> crossing_params()
{
    return {str("crossing_lower", "101", "lower product state of the avoided crossing"),
            str("crossing_upper", "030", "upper product state of the avoided crossing"),
            num("crossing_lo", 0.16, "crossing search bracket start, Phi0"),
            num("crossing_hi", 0.22, "crossing search bracket end, Phi0")};
}

std::vector<ParamDef> rise_params()
{
    return {num("t_rise_ns", 2.0, "rise segment duration, ns"), num("alpha", 2.0, "rise exponent"),
            opt("start_flux", ParamType::Number, "idle coupler flux, Phi0 (defaults to the preset's zero-ZZ point)"),
            num("end_flux", 0.090, "rise end flux, Phi0")};
}

std::vector<ParamDef> dynamics_params()
{
    return {integer("substeps", 32, "integrator steps per sample interval"),
            integer("coupler_levels", 36, "coupler eigenstates in the propagation basis"),
            num("energy_cut_ghz", 11.0, "propagation basis energy cut above the ground state, GHz")};
}

template <class... V>
std::vector<ParamDef> join(V... v)
{
    std::vector<ParamDef> out;
    (out.insert(out.end(), v.begin(), v.end()), ...);
    return out;
}

AvoidedCrossing crossing_from(const Context& c)
{
    return locate_avoided_crossing(c.device, parse_label(c.str("crossing_lower")), parse_label(c.str("crossing_upper")),
                                   c.num("crossing_lo"), c.num("crossing_hi"), c.spectrum);
}

double preset_idle(const RunConfig& rc)
{
    std::string name;
    if (rc.device.is_string())
        name = rc.device.get<std::string>();
    else if (rc.device.is_object() && rc.device.contains("preset") && rc.device["preset"].is_string())
        name = rc.device["preset"].get<std::string>();
    if (auto f = preset_idle_flux(name))
        return *f;
    throw ConfigError("params.start_flux is required for devices without a published idle point");
}

RiseSpec rise_from(const Context& c)
{
    RiseSpec r;
    r.t_rise = c.num("t_rise_ns");
    r.alpha = c.num("alpha");
    r.start_flux = c.has("start_flux") ? c.num("start_flux") : preset_idle(c.rc);
    r.end_flux = c.num("end_flux");
    return r;
}

DynamicsOptions dynamics_from(const Context& c)
{
    DynamicsOptions o;
    o.substeps = c.integer("substeps");
    o.coupler_levels = c.integer("coupler_levels");
    o.energy_cut_ghz = c.num("energy_cut_ghz");
    if (o.substeps < 1 || o.coupler_levels < 4 || !(o.energy_cut_ghz > 0))
        throw ConfigError("dynamics options: substeps >= 1, coupler_levels >= 4 and energy_cut_ghz > 0 required");
    return o;
}

Json metrics_json(const GateMetrics& m)
{
    return {{"conditional_phase_rad", m.conditional_phase},
            {"leakage", m.leakage},
            {"leakage_101", m.leakage101},
            {"virtual_z1_rad", m.virtual_z1},
            {"virtual_z2_rad", m.virtual_z2},
            {"average_fidelity", m.avg_fidelity}};
}

void write_waveform_pair(Context& c, const Waveform& w, const std::string& stem)
{
    write_waveform_csv(w, c.out.file(stem + ".csv").string());
    write_waveform_binary(w, c.out.file(stem + ".bin").string());
}

NoiseModel noise_from(const Json& j)
{
    NoiseModel n;
    if (j.is_null())
        return n;
    if (!j.is_object())
        throw ConfigError("params.noise: expected an object");
    static const std::set<std::string> keys{"t1_us",           "t2e_us",          "gate_time_1q_ns", "gate_time_cz_ns",
                                            "depolarizing_1q", "depolarizing_cz", "cz_error",        "leakage_cz",
                                            "seepage_cz",      "flux_noise_amp_uphi0", "flux_slope_ghz_per_phi0"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!keys.count(it.key()))
            throw ConfigError("params.noise: unknown key '" + it.key() + "'");
    auto number = [&](const char* k, double& dst) {
        if (!j.contains(k))
            return;
        if (!j[k].is_number())
            throw ConfigError(std::string("params.noise.") + k + ": expected a number");
        dst = j[k].get<double>();
    };
    auto pair = [&](const char* k, double QubitCoherence::*field) {
        if (!j.contains(k))
            return;
        const Json& a = j[k];
        if (!a.is_array() || a.empty() || a.size() > 2 || !a[0].is_number() || (a.size() == 2 && !a[1].is_number()))
            throw ConfigError(std::string("params.noise.") + k + ": expected [qubit1, qubit2] in µs");
        for (size_t q = 0; q < a.size(); ++q)
            n.qubits[q].*field = a[q].get<double>();
    };
    pair("t1_us", &QubitCoherence::t1);
    pair("t2e_us", &QubitCoherence::t2e);
    number("gate_time_1q_ns", n.gate_time_1q);
    number("gate_time_cz_ns", n.gate_time_cz);
    number("depolarizing_1q", n.depolarizing_1q);
    number("depolarizing_cz", n.depolarizing_cz);
    if (j.contains("cz_error")) {
        if (j.contains("depolarizing_cz"))
            throw ConfigError("params.noise: give depolarizing_cz or cz_error, not both");
        double r = 0;
        number("cz_error", r);
        n.depolarizing_cz = depolarizing_for_error(r, 4);
    }
    number("leakage_cz", n.leakage_cz);
    number("seepage_cz", n.seepage_cz);
    number("flux_noise_amp_uphi0", n.flux_noise_amp);
    number("flux_slope_ghz_per_phi0", n.flux_slope);
    n.validate();
    return n;
}

Json fit_json(const RBFit& f)
{
    return {{"A", f.a}, {"p", f.p}, {"B", f.b}, {"sigma_A", f.sigma_a}, {"sigma_p", f.sigma_p},
            {"sigma_B", f.sigma_b}, {"bypassed", f.bypassed}, {"valid", f.valid}};
}

RBSpec rb_spec_from(const Context& c, int n_qubits)
{
    RBSpec s;
    s.n_qubits = n_qubits;
    s.lengths = c.p("lengths").get<std::vector<int>>();
    s.sequences = c.has("sequences") ? c.integer("sequences") : (n_qubits == 1 ? 30 : 40);
    s.seed = c.seed();
    s.threads = c.rc.threads;
    return s;
}

const std::vector<int> kDefaultLengths{1, 5, 10, 20, 35, 50, 75, 100, 125, 150};

// Experiments ---------------------------------------------------------------

void run_spectrum_sweep(Context& c)
{
    const double lo = c.num("flux_lo"), hi = c.num("flux_hi");
    const int points = c.integer("points"), levels = c.integer("levels");
    if (points < 2 || !(hi > lo) || levels < 1)
        throw ConfigError("spectrum-sweep: need points >= 2, flux_hi > flux_lo and levels >= 1");
    const std::string sub = c.str("subsystem");
    if (sub == "coupler") {
        CsvWriter csv(c.out.file("spectrum.csv"), {"flux_phi0", "level", "energy_GHz"});
        for (int i = 0; i < points; ++i) {
            const double f = lo + (hi - lo) * i / (points - 1);
            const SubsystemSolution s =
                solve_fluxonium(c.device.ecc, c.device.el_c, c.device.ejc, f, c.spectrum.fluxonium_basis, levels,
                                c.spectrum.backend);
            for (int k = 0; k < levels; ++k) {
                csv << f << k << s.energies(k);
                csv.end_row();
            }
        }
        c.results["levels"] = levels;
        return;
    }
    if (sub != "composite")
        throw ConfigError("spectrum-sweep: subsystem must be composite or coupler");
    const std::string mode_s = c.str("label_mode");
    if (mode_s != "adiabatic" && mode_s != "max_overlap")
        throw ConfigError("spectrum-sweep: label_mode must be adiabatic or max_overlap");
    const LabelMode mode = mode_s == "adiabatic" ? LabelMode::AdiabaticContinuation : LabelMode::MaxOverlap;
    const CompositeModel model(c.device, c.spectrum);
    if (levels > c.spectrum.dims.size())
        throw ConfigError("spectrum-sweep: more levels than the truncated product space");
    CsvWriter csv(c.out.file("spectrum.csv"), {"flux_phi0", "level", "label", "energy_GHz", "overlap"});
    LabeledSpectrum prev;
    int mixed = 0;
    for (int i = 0; i < points; ++i) {
        const double f = lo + (hi - lo) * i / (points - 1);
        LabeledSpectrum s = labeled_spectrum(model, f, i == 0 ? LabelMode::MaxOverlap : mode, i == 0 ? nullptr : &prev);
        for (int k = 0; k < levels; ++k) {
            csv << f << k << s.labels[k].str() << s.energies(k) - s.energies(0) << s.overlaps[k];
            csv.end_row();
            mixed += s.mixed[k] ? 1 : 0;
        }
        prev = std::move(s);
    }
    c.results["mixed_label_rows"] = mixed;
}

void run_zz_sweep(Context& c)
{
    const ZZCurve z = sweep_zz(c.device, c.num("flux_lo"), c.num("flux_hi"), c.integer("points"), c.spectrum);
    CsvWriter csv(c.out.file("zz.csv"), {"flux_phi0", "zeta_MHz", "confidence"});
    int sign_changes = 0;
    for (size_t i = 0; i < z.flux.size(); ++i) {
        csv << z.flux[i] << z.zeta_mhz[i] << z.confidence[i];
        csv.end_row();
        if (i > 0 && (z.zeta_mhz[i] > 0) != (z.zeta_mhz[i - 1] > 0))
            ++sign_changes;
    }
    c.results["zeta_first_MHz"] = z.zeta_mhz.front();
    c.results["zeta_last_MHz"] = z.zeta_mhz.back();
    c.results["sign_changes"] = sign_changes;
}

void run_zero_zz(Context& c)
{
    const double lo = c.num("flux_lo"), hi = c.num("flux_hi"), tol = c.num("tol_mhz");
    std::vector<std::pair<std::optional<double>, DeviceEnergies>> configs;
    if (c.has("qubit2_frequencies_ghz")) {
        for (double f : c.nums("qubit2_frequencies_ghz")) {
            DeviceEnergies d = c.device;
            d.ej2 = transmon_ej_for_frequency(d.ec2, f, c.spectrum.charge_cutoff);
            configs.emplace_back(f, d);
        }
    } else {
        configs.emplace_back(std::nullopt, c.device);
    }
    CsvWriter csv(c.out.file("zero_zz.csv"),
                  {"qubit2_GHz", "detuning_MHz", "zero_flux_phi0", "zeta_MHz", "iterations", "found"});
    int found = 0;
    Json rows = Json::array();
    for (const auto& [f, d] : configs) {
        const double w1 = solve_transmon(d.ec1, d.ej1, c.spectrum.charge_cutoff, 2).energies(1);
        const double w2 = solve_transmon(d.ec2, d.ej2, c.spectrum.charge_cutoff, 2).energies(1);
        csv << w2 << 1e3 * (w2 - w1);
        try {
            const ZeroZZ z = find_zero_zz(d, lo, hi, c.spectrum, tol);
            csv << z.flux << z.zeta_mhz << z.iterations << 1;
            rows.push_back({{"qubit2_GHz", w2}, {"zero_flux_phi0", z.flux}});
            ++found;
        } catch (const NumericError& e) {
            if (configs.size() == 1)
                throw;
            csv << std::nan("") << std::nan("") << 0 << 0;
            rows.push_back({{"qubit2_GHz", w2}, {"error", e.what()}});
        }
        csv.end_row();
    }
    if (found == 0)
        throw NumericError("zero-zz: no configuration has a zero of ZZ in the flux range");
    c.results["zeros"] = rows;
}

void run_perturb_table(Context& c)
{
    PerturbationOptions po;
    po.dims = c.spectrum.dims;
    const std::string g = c.str("grouping");
    if (g == "all")
        po.grouping = PathGrouping::AllComputational;
    else if (g == "branch101")
        po.grouping = PathGrouping::Branch101;
    else
        throw ConfigError("perturb-table: grouping must be all or branch101");
    const int max_order = c.integer("max_order");
    if (max_order < 2 || max_order > 4)
        throw ConfigError("perturb-table: max_order must be 2, 3 or 4");
    const double flux = c.num("flux");
    const PerturbationReport r = zz_perturbative(c.device, flux, max_order, po);
    const ZZValue exact = zz_at(c.device, flux, c.spectrum);

    const bool counter = c.p("include_counterterms").get<bool>();
    const int top = c.integer("top_n");
    CsvWriter paths(c.out.file("paths.csv"), {"rank", "path", "delta_zz_MHz"});
    Json top_rows = Json::array();
    int rank = 0;
    for (const auto& pc : r.path_table) {
        if (!counter && pc.kind == PathContribution::Kind::Counterterm)
            continue;
        if (rank >= top)
            break;
        paths << ++rank << pc.str() << pc.delta_zz_mhz;
        paths.end_row();
        top_rows.push_back({{"path", pc.str()}, {"delta_zz_MHz", pc.delta_zz_mhz}});
    }
    CsvWriter orders(c.out.file("orders.csv"), {"term", "zeta_MHz"});
    for (auto [name, v] : std::vector<std::pair<std::string, double>>{{"order2", r.order2},
                                                                      {"order3", r.order3},
                                                                      {"order4", r.order4},
                                                                      {"sum", r.order2 + r.order3 + r.order4},
                                                                      {"exact", exact.zeta_mhz},
                                                                      {"remainder", r.remainder}}) {
        orders << name << v;
        orders.end_row();
    }
    c.results["paths"] = top_rows;
    c.results["exact_MHz"] = exact.zeta_mhz;

    const int sp = c.integer("sweep_points");
    if (sp > 0) {
        if (sp < 2)
            throw ConfigError("perturb-table: sweep_points must be 0 or at least 2");
        const double lo = c.num("sweep_lo"), hi = c.num("sweep_hi");
        const ZZCurve ex = sweep_zz(c.device, lo, hi, sp, c.spectrum);
        PerturbationOptions so = po;
        so.remainder_extra_levels = 0;
        CsvWriter csv(c.out.file("perturbation_sweep.csv"),
                      {"flux_phi0", "order2_MHz", "order23_MHz", "order234_MHz", "exact_MHz"});
        for (int i = 0; i < sp; ++i) {
            const PerturbationReport q = zz_perturbative(c.device, ex.flux[i], 4, so);
            csv << ex.flux[i] << q.order2 << q.order2 + q.order3 << q.order2 + q.order3 + q.order4 << ex.zeta_mhz[i];
            csv.end_row();
        }
    }
}

Waveform build_pulse(Context& c, const AvoidedCrossing& x, Json& info)
{
    const RiseSpec rise = rise_from(c);
    const double gate = c.num("gate_time_ns"), sr = c.num("sample_rate_gsps");
    const double dur = 0.5 * gate - rise.t_rise;
    if (!(dur > 0))
        throw ConfigError("gate_time_ns too short for the rise segment");
    const double hi = c.has("table_flux_hi") ? c.num("table_flux_hi") : x.flux + 0.02;
    const DetuningTable table(c.device, x, rise.end_flux, hi);
    const SlepianSpec s{c.num("nw"), c.num("final_frequency_mhz"), dur};
    info = {{"crossing_flux_phi0", x.flux},
            {"crossing_gap_MHz", x.gap_mhz},
            {"nw", s.nw},
            {"final_frequency_MHz", s.final_frequency},
            {"slepian_duration_ns", dur},
            {"start_flux_phi0", rise.start_flux}};
    return assemble_cz(rise, s, table, sr, gate);
}

std::vector<ParamDef> pulse_params()
{
    return join(std::vector<ParamDef>{num("gate_time_ns", 70, "total CZ duration, ns"),
                                      num("sample_rate_gsps", 1.0, "AWG sample rate, GS/s"),
                                      num("nw", 1.4, "Slepian standardized half bandwidth"),
                                      num("final_frequency_mhz", 9.6, "101-030 detuning at the pulse peak, MHz"),
                                      opt("table_flux_hi", ParamType::Number,
                                          "upper flux of the detuning table, Phi0 (crossing + 0.02)")},
                crossing_params(), rise_params());
}

void run_pulse_build(Context& c)
{
    Json info;
    const AvoidedCrossing x = crossing_from(c);
    const Waveform w = build_pulse(c, x, info);
    write_waveform_pair(c, w, "waveform");
    info["samples"] = w.samples.size();
    info["peak_flux_phi0"] = *std::max_element(w.samples.begin(), w.samples.end());
    c.results = info;
}

void run_evolve(Context& c)
{
    const DynamicsOptions dopt = dynamics_from(c);
    Waveform w;
    Json info = Json::object();
    if (c.has("waveform_file")) {
        w = read_waveform_binary(c.path("waveform_file").string());
    } else if (c.has("static_flux")) {
        w.sample_rate = c.num("sample_rate_gsps");
        const int n = static_cast<int>(std::lround(c.num("hold_ns") * w.sample_rate));
        if (n < 1)
            throw ConfigError("evolve: hold_ns must span at least one sample");
        w.samples.assign(n + 1, c.num("static_flux"));
        info["static_flux_phi0"] = c.num("static_flux");
        info["zeta_MHz"] = zz_at(c.device, c.num("static_flux"), c.spectrum).zeta_mhz;
    } else {
        w = build_pulse(c, crossing_from(c), info);
    }
    PropagationResult r = propagate(c.device, w, dopt);
    const int reps = c.integer("repetitions");
    if (reps < 1)
        throw ConfigError("evolve: repetitions must be positive");
    if (reps > 1)
        r = repeat(r, reps);
    const GateMetrics m = gate_metrics(r);
    CsvWriter csv(c.out.file("populations.csv"), {"initial", "final", "probability"});
    for (const auto& from : computational_labels()) {
        const Eigen::VectorXd pop = r.populations(from);
        for (const auto& to : computational_labels()) {
            const int j = [&] {
                for (size_t k = 0; k < r.labels.size(); ++k)
                    if (r.labels[k] == to)
                        return static_cast<int>(k);
                return -1;
            }();
            csv << from.str() << to.str() << (j < 0 ? 0.0 : pop(j));
            csv.end_row();
        }
    }
    info["metrics"] = metrics_json(m);
    info["duration_ns"] = r.duration;
    info["repetitions"] = reps;
    info["unitarity_error"] = r.unitarity_error;
    info["accumulated_phases_rad"] = r.phases;
    c.results = info;
}

void run_calibrate_cz(Context& c)
{
    CalibrationSpec s;
    s.gate_time = c.num("gate_time_ns");
    s.sample_rate = c.num("sample_rate_gsps");
    s.rise = rise_from(c);
    s.crossing = crossing_from(c);
    if (c.has("table_flux_hi"))
        s.table_flux_hi = c.num("table_flux_hi");
    s.nw_grid = c.nums("nw_grid");
    s.ff_lo = c.num("ff_lo_mhz");
    s.ff_hi = c.num("ff_hi_mhz");
    s.coarse_points = c.integer("coarse_points");
    s.jazz_repetitions = c.integer("jazz_repetitions");
    s.search_substeps = c.integer("search_substeps");
    s.threads = c.rc.threads;
    s.dynamics = dynamics_from(c);
    const CalibrationResult r = calibrate_cz(c.device, s);
    CsvWriter csv(c.out.file("calibration.csv"),
                  {"nw", "final_frequency_MHz", "found", "conditional_phase_rad", "leakage", "leakage_101",
                   "average_fidelity", "jazz_leakage_101"});
    for (const auto& row : r.rows) {
        csv << row.nw << row.final_frequency << (row.found ? 1 : 0) << row.single.conditional_phase
            << row.single.leakage << row.single.leakage101 << row.single.avg_fidelity << row.repeated.leakage101;
        csv.end_row();
    }
    write_waveform_pair(c, r.waveform, "calibrated_waveform");
    c.results = {{"crossing_flux_phi0", s.crossing.flux},
                 {"crossing_gap_MHz", s.crossing.gap_mhz},
                 {"nw", r.slepian.nw},
                 {"final_frequency_MHz", r.slepian.final_frequency},
                 {"metrics", metrics_json(r.metrics)},
                 {"jazz_metrics", metrics_json(r.repeated)}};
}

void run_rise_map(Context& c)
{
    const RiseSpec base = rise_from(c);
    const std::vector<double> t = c.nums("t_rise_list_ns"), a = c.nums("alpha_list");
    const Eigen::MatrixXd m =
        rise_leakage_map(c.device, t, a, base.start_flux, base.end_flux, c.num("sample_rate_gsps"), dynamics_from(c));
    CsvWriter csv(c.out.file("rise_map.csv"), {"t_rise_ns", "alpha", "leakage"});
    for (size_t i = 0; i < t.size(); ++i)
        for (size_t j = 0; j < a.size(); ++j) {
            csv << t[i] << a[j] << m(i, j);
            csv.end_row();
        }
    c.results = {{"start_flux_phi0", base.start_flux}, {"end_flux_phi0", base.end_flux}, {"max_leakage", m.maxCoeff()}};
}

void run_predistort(Context& c)
{
    const double sr = c.num("sample_rate_gsps");
    ChannelSet cs;
    const std::string ch = c.str("channels");
    bool is_preset = false;
    for (const auto& n : channel_preset_names())
        is_preset |= n == ch;
    if (is_preset) {
        cs = channel_preset(ch, c.num("full_scale_mv"));
    } else {
        Json j;
        try {
            j = Json::parse(read_text(c.path("channels")));
        } catch (const Json::parse_error& e) {
            throw ConfigError("channel file: " + std::string(e.what()));
        }
        cs = parse_channel_file(j);
    }
    const TransferMatrix tm = discretize(cs, sr);

    Waveform vc, v2;
    vc.sample_rate = v2.sample_rate = sr;
    const int pre = static_cast<int>(std::lround(c.num("pad_before_ns") * sr));
    const int on = static_cast<int>(std::lround(c.num("square_duration_ns") * sr));
    const int post = static_cast<int>(std::lround(c.num("pad_after_ns") * sr));
    if (pre < 0 || on < 1 || post < 0)
        throw ConfigError("predistort: square pulse needs duration > 0 and non-negative padding");
    vc.samples.assign(pre + on + post, 0.0);
    v2.samples.assign(pre + on + post, 0.0);
    for (int k = pre; k < pre + on; ++k) {
        vc.samples[k] = c.num("coupler_amplitude");
        v2.samples[k] = c.num("qubit2_amplitude");
    }
    const std::string method = c.str("method");
    std::pair<Waveform, Waveform> rt;
    if (method == "series")
        rt = predistort(vc, v2, tm, c.num("series_tol"));
    else if (method == "fft")
        rt = predistort_fft(vc, v2, tm, static_cast<size_t>(c.integer("fft_length")));
    else
        throw ConfigError("predistort: method must be series or fft");
    const auto check = forward_distort(rt.first, rt.second, tm);

    const int settle = static_cast<int>(std::lround(c.num("settle_ns") * sr));
    double scale = 0, err = 0;
    for (size_t k = 0; k < vc.samples.size(); ++k)
        scale = std::max({scale, std::abs(vc.samples[k]), std::abs(v2.samples[k])});
    for (size_t k = 0; k < vc.samples.size(); ++k) {
        const bool near_edge = (static_cast<int>(k) >= pre && static_cast<int>(k) < pre + settle) ||
                               (static_cast<int>(k) >= pre + on && static_cast<int>(k) < pre + on + settle);
        if (near_edge)
            continue;
        err = std::max({err, std::abs(check.first.samples[k] - vc.samples[k]),
                        std::abs(check.second.samples[k] - v2.samples[k])});
    }
    CsvWriter csv(c.out.file("predistortion.csv"), {"t_ns", "coupler_target_fs", "qubit2_target_fs", "coupler_rt_fs",
                                                    "qubit2_rt_fs", "coupler_delivered_fs", "qubit2_delivered_fs"});
    for (size_t k = 0; k < vc.samples.size(); ++k) {
        csv << vc.time(k) << vc.samples[k] << v2.samples[k] << rt.first.samples[k] << rt.second.samples[k]
            << check.first.samples[k] << check.second.samples[k];
        csv.end_row();
    }
    c.results = {{"channels", ch},
                 {"method", method},
                 {"max_relative_error_after_settling", scale > 0 ? err / scale : err}};

    if (c.has("probe_file")) {
        const CsvTable t = read_csv(c.path("probe_file"));
        const int cd = t.column("delay_us"), co = t.column("offset_mV");
        if (cd < 0 || co < 0)
            throw ConfigError("probe_file: needs columns delay_us and offset_mV");
        std::vector<ProbePoint> data;
        for (const auto& row : t.rows)
            try {
                data.push_back({std::stod(row[cd]), std::stod(row[co])});
            } catch (const std::exception&) {
                throw ConfigError("probe_file: non-numeric cell");
            }
        StepFitSpec fs;
        fs.pulse_duration = c.num("probe_pulse_us");
        fs.probe_amplitude_mv = c.num("probe_amplitude_mv");
        fs.n_exp = c.integer("fit_exponentials");
        fs.n_osc = c.integer("fit_oscillations");
        const StepFitResult fr = fit_step_response(data, fs);
        Json exps = Json::array(), oscs = Json::array();
        for (const auto& e : fr.model.exps)
            exps.push_back({e.amplitude * fs.probe_amplitude_mv, e.tau});
        for (const auto& o : fr.model.oscs)
            oscs.push_back({o.amplitude * fs.probe_amplitude_mv, o.tau, o.period, o.phase});
        c.results["step_fit"] = {{"exp_mV_us", exps},
                                 {"osc_mV_us_us_rad", oscs},
                                 {"residual_rms_mV", fr.residual_rms_mv},
                                 {"converged", fr.converged}};
    }
}

std::vector<ParamDef> rb_params()
{
    return {{"lengths", ParamType::IntegerArray, Json(kDefaultLengths), "Clifford sequence lengths"},
            opt("sequences", ParamType::Integer, "random sequences per length (30 for 1Q, 40 for 2Q)"),
            {"noise", ParamType::Object, Json::object(),
             "error channels: t1_us, t2e_us ([q1, q2]), gate_time_1q_ns, gate_time_cz_ns, depolarizing_1q, "
             "depolarizing_cz or cz_error, leakage_cz, seepage_cz, flux_noise_amp_uphi0, flux_slope_ghz_per_phi0"}};
}

void write_rb(Context& c, const RBDataset& d, const std::string& name) { write_rb_csv(c.out.file(name).string(), d); }

void run_rb_exp(Context& c)
{
    const NoiseModel nm = noise_from(c.p("noise"));
    const int nq = c.integer("n_qubits");
    if (nq != 1 && nq != 2)
        throw ConfigError("rb: n_qubits must be 1 or 2");
    RBSpec s = rb_spec_from(c, nq);
    const RBDataset ref = run_rb(s, nm);
    write_rb(c, ref, "rb_reference.csv");
    c.results = {{"reference_fit", fit_json(ref.fit)}, {"reference_error", ref.error}};
    if (nq == 2 && c.p("interleave_cz").get<bool>()) {
        s.interleave_cz = true;
        const RBDataset in = run_rb(s, nm);
        write_rb(c, in, "rb_interleaved.csv");
        const InterleavedError e = interleaved_error(ref, in, 4);
        c.results["interleaved_fit"] = fit_json(in.fit);
        c.results["cz_error"] = e.r;
        c.results["cz_fidelity"] = 1.0 - e.r;
        c.results["negative_error_warning"] = e.negative;
    }
}

void run_lrb(Context& c)
{
    const NoiseModel nm = noise_from(c.p("noise"));
    RBSpec s = rb_spec_from(c, 2);
    const RBDataset ref = run_rb(s, nm);
    s.interleave_cz = true;
    const RBDataset in = run_rb(s, nm);
    write_rb(c, ref, "lrb_reference.csv");
    write_rb(c, in, "lrb_interleaved.csv");
    const LRBReport r = leakage_rb(ref, in);
    c.results = {{"p_ref", r.p_ref}, {"B_ref", r.b_ref}, {"L1_ref", r.l1_ref}, {"L1_int", r.l1_int},
                 {"L1_CZ", r.l1_cz}, {"q_ref", r.q_ref}, {"q_int", r.q_int}, {"r_CZ", r.r_cz},
                 {"F_CZ", r.f_cz}};
}

void run_error_budget(Context& c)
{
    NoiseCutoffs cut{c.num("ir_cutoff_hz"), c.num("uv_cutoff_hz")};
    CsvWriter csv(c.out.file("error_budget.csv"), {"name", "gate_time_ns", "t1_term", "white_term",
                                                   "one_over_f_variance", "one_over_f_term", "total"});
    auto field = [](const Json& o, const char* k, const std::string& where) {
        if (!o.contains(k) || !o[k].is_number())
            throw ConfigError(where + ": missing number '" + k + "'");
        return o[k].get<double>();
    };
    Json out = Json::array();
    int idx = 0;
    for (const Json& q : c.p("qubits")) {
        const std::string where = "params.qubits[" + std::to_string(idx++) + "]";
        for (auto it = q.begin(); it != q.end(); ++it)
            if (it.key() != "name" && it.key() != "gate_time_ns" && it.key() != "t1_us" && it.key() != "t2e_us" &&
                it.key() != "tphi_e_us")
                throw ConfigError(where + ": unknown key '" + it.key() + "'");
        const std::string name = q.contains("name") && q["name"].is_string() ? q["name"].get<std::string>() : where;
        std::optional<double> tphi;
        if (q.contains("tphi_e_us"))
            tphi = field(q, "tphi_e_us", where);
        const double t = field(q, "gate_time_ns", where);
        const IncoherentError1Q r = incoherent_1q(t, field(q, "t1_us", where), field(q, "t2e_us", where), tphi, cut);
        csv << name << t << r.t1_term << r.white_term << r.one_over_f_variance << r.one_over_f_term << r.total;
        csv.end_row();
        out.push_back({{"name", name}, {"r_1q", r.total}});
    }
    c.results["single_qubit"] = out;
    if (c.has("cz")) {
        const Json& z = c.p("cz");
        CzCoherence cc;
        static const std::map<std::string, std::optional<double> CzCoherence::*> keys{
            {"t1_q1_us", &CzCoherence::t1_q1},
            {"t1_q2_us", &CzCoherence::t1_q2},
            {"tphi_q1_us", &CzCoherence::tphi_q1},
            {"tphi_q2_us", &CzCoherence::tphi_q2},
            {"t1_100_000_us", &CzCoherence::t1_100_000},
            {"t1_001_000_us", &CzCoherence::t1_001_000},
            {"t1_101_100_us", &CzCoherence::t1_101_100},
            {"t1_101_0xx_us", &CzCoherence::t1_101_0xx},
            {"tphi_100_us", &CzCoherence::tphi_100},
            {"tphi_001_us", &CzCoherence::tphi_001}};
        for (auto it = z.begin(); it != z.end(); ++it) {
            if (it.key() == "gate_time_ns")
                continue;
            auto k = keys.find(it.key());
            if (k == keys.end())
                throw ConfigError("params.cz: unknown key '" + it.key() + "'");
            if (!it.value().is_number())
                throw ConfigError("params.cz." + it.key() + ": expected a number");
            cc.*(k->second) = it.value().get<double>();
        }
        const CzIncoherentBound b = incoherent_2q_bound(field(z, "gate_time_ns", "params.cz"), cc);
        c.results["cz_incoherent"] = {{"upper", b.upper}, {"lower", b.lower}};
    }
    if (c.has("flux_noise")) {
        std::vector<std::pair<double, double>> pts;
        for (const Json& f : c.p("flux_noise"))
            pts.emplace_back(field(f, "slope_ghz_per_phi0", "params.flux_noise[]"),
                             field(f, "tphi_e_us", "params.flux_noise[]"));
        c.results["flux_noise_amp_uphi0"] = fit_flux_noise_amp(pts);
    }
}

void run_fit_spectrum(Context& c)
{
    const CsvTable t = read_csv(c.path("data_file"));
    const int cf = t.column("flux_phi0"), cq = t.column("frequency_GHz"), ca = t.column("from"), cb = t.column("to");
    if (cf < 0 || cq < 0 || ca < 0 || cb < 0)
        throw ConfigError("data_file: needs columns flux_phi0, frequency_GHz, from, to");
    std::vector<Transition> data;
    for (const auto& row : t.rows)
        try {
            data.push_back({std::stod(row[cf]), std::stod(row[cq]), parse_label(row[ca]), parse_label(row[cb])});
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("data_file: non-numeric cell");
        }
    if (data.empty())
        throw ConfigError("data_file: no data rows");
    std::vector<FitParam> free;
    for (const auto& s : c.p("free").get<std::vector<std::string>>())
        free.push_back(parse_fit_param(s));
    if (free.empty())
        throw ConfigError("fit-spectrum: no free parameters");
    const SpectrumFit f = fit_parameters(data, c.device, free, c.spectrum, c.integer("max_iterations"));
    write_text(c.out.file("fitted_device.json"), device_to_json(f.device).dump(2) + "\n");

    const CompositeModel model(f.device, c.spectrum);
    CsvWriter csv(c.out.file("fit_residuals.csv"),
                  {"flux_phi0", "from", "to", "measured_GHz", "model_GHz", "residual_MHz"});
    for (const auto& d : data) {
        const LabeledSpectrum s = labeled_spectrum(model, d.flux, LabelMode::MaxOverlap);
        const double m = s.energy(d.to) - s.energy(d.from);
        csv << d.flux << d.from.str() << d.to.str() << d.frequency_ghz << m << 1e3 * (d.frequency_ghz - m);
        csv.end_row();
    }
    Json params = Json::object();
    for (FitParam p : free)
        params[fit_param_name(p)] = fit_param_ref(const_cast<DeviceEnergies&>(f.device), p);
    c.results = {{"fitted", params}, {"residual_rms_GHz", f.residual_rms_ghz}, {"converged", f.converged},
                 {"iterations", f.iterations}};
}

struct Entry {
    ExperimentDef def;
    Runner run;
};

const std::vector<Entry>& entries()
{
    static const std::vector<Entry> e = [] {
        std::vector<Entry> v;
        v.push_back({{"spectrum-sweep",
                      "labeled composite (or coupler-only) energy levels over coupler flux",
                      {num("flux_lo", 0.0, "Phi0"), num("flux_hi", 0.5, "Phi0"), integer("points", 51, "flux points"),
                       integer("levels", 12, "levels per flux point"),
                       str("subsystem", "composite", "composite or coupler"),
                       str("label_mode", "adiabatic", "adiabatic or max_overlap")}},
                     run_spectrum_sweep});
        v.push_back({{"zz-sweep",
                      "static ZZ interaction versus coupler flux",
                      {num("flux_lo", -0.05, "Phi0"), num("flux_hi", 0.17, "Phi0"), integer("points", 45, "flux points")}},
                     run_zz_sweep});
        v.push_back({{"zero-zz",
                      "coupler flux of vanishing ZZ, optionally for several qubit-2 frequencies",
                      {num("flux_lo", 0.0, "bracket start, Phi0"), num("flux_hi", 0.03, "bracket end, Phi0"),
                       num("tol_mhz", 1e-4, "|zeta| tolerance, MHz"),
                       opt("qubit2_frequencies_ghz", ParamType::NumberArray, "qubit-2 0-1 frequencies to scan, GHz")}},
                     run_zero_zz});
        v.push_back({{"perturb-table",
                      "perturbative ZZ by order and the largest fourth-order paths",
                      {num("flux", 0.0, "Phi0"), integer("top_n", 7, "path rows to export"),
                       integer("max_order", 4, "highest order (2..4)"),
                       boolean("include_counterterms", false, "list energy counterterms among the path rows"),
                       str("grouping", "all", "all (four computational energies) or branch101"),
                       integer("sweep_points", 0, "flux points of an order-by-order sweep (0 = none)"),
                       num("sweep_lo", -0.1, "sweep start, Phi0"), num("sweep_hi", 0.1, "sweep end, Phi0")}},
                     run_perturb_table});
        v.push_back({{"pulse-build", "rise + Slepian + mirror CZ flux pulse", pulse_params()}, run_pulse_build});
        v.push_back(
            {{"evolve",
              "unitary evolution under a flux waveform with gate metrics",
              join(pulse_params(), dynamics_params(),
                   std::vector<ParamDef>{
                       opt("waveform_file", ParamType::String, "binary waveform to evolve instead of building one"),
                       opt("static_flux", ParamType::Number, "hold the coupler at this flux instead, Phi0"),
                       num("hold_ns", 200.0, "static hold duration, ns"),
                       integer("repetitions", 1, "apply the evolution this many times")})},
             run_evolve});
        v.push_back({{"calibrate-cz",
                      "final-frequency and bandwidth calibration of the CZ pulse",
                      join(std::vector<ParamDef>{num("gate_time_ns", 70, "total CZ duration, ns"),
                                                 num("sample_rate_gsps", 1.0, "GS/s"),
                                                 nums("nw_grid", {1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0},
                                                      "Slepian bandwidths to scan"),
                                                 num("ff_lo_mhz", -150, "final-frequency search start, MHz"),
                                                 num("ff_hi_mhz", 150, "final-frequency search end, MHz"),
                                                 integer("coarse_points", 13, "coarse final-frequency scan points"),
                                                 integer("jazz_repetitions", 17, "gates per amplified sequence"),
                                                 integer("search_substeps", 8, "integrator substeps during search"),
                                                 opt("table_flux_hi", ParamType::Number,
                                                     "upper flux of the detuning table, Phi0")},
                           crossing_params(), rise_params(), dynamics_params())},
                     run_calibrate_cz});
        v.push_back({{"rise-map",
                      "leakage out of the adiabatic 101 branch versus rise time and exponent",
                      join(std::vector<ParamDef>{nums("t_rise_list_ns", {0, 1, 2, 4, 8, 12, 16, 20}, "rise times, ns"),
                                                 nums("alpha_list", {1, 2, 3}, "rise exponents"),
                                                 num("sample_rate_gsps", 1.0, "GS/s")},
                           rise_params(), dynamics_params())},
                     run_rise_map});
        v.push_back({{"predistort",
                      "predistortion of a square pulse through the flux-transient filters",
                      {str("channels", "device_a", "preset (device_a, device_b, identity) or channel file"),
                       num("full_scale_mv", 1000, "amplitude normalization of preset terms, mV"),
                       num("sample_rate_gsps", 1.0, "GS/s"), num("coupler_amplitude", 0.1, "full-scale units"),
                       num("qubit2_amplitude", 0.0, "full-scale units"),
                       num("square_duration_ns", 200, "ns"), num("pad_before_ns", 100, "ns"),
                       num("pad_after_ns", 2000, "ns"), num("settle_ns", 10, "excluded after each edge, ns"),
                       str("method", "series", "series or fft"), integer("fft_length", 1 << 21, "FFT length"),
                       num("series_tol", 1e-6, "loop-series truncation"),
                       opt("probe_file", ParamType::String, "CSV delay_us, offset_mV of a step-response probe"),
                       num("probe_pulse_us", 1.0, "probe pulse length, µs"),
                       num("probe_amplitude_mv", 1000, "probe amplitude, mV"),
                       integer("fit_exponentials", 1, "exponential terms to fit"),
                       integer("fit_oscillations", 0, "damped oscillation terms to fit")},
                      false, false},
                     run_predistort});
        v.push_back({{"rb",
                      "randomized benchmarking (reference and CZ-interleaved)",
                      join(std::vector<ParamDef>{integer("n_qubits", 2, "1 or 2"),
                                                 boolean("interleave_cz", true, "also run the CZ-interleaved sequence")},
                           rb_params()),
                      true, false},
                     run_rb_exp});
        v.push_back({{"lrb", "leakage randomized benchmarking of the CZ", rb_params(), true, false}, run_lrb});
        v.push_back({{"error-budget",
                      "incoherent error formulas and flux-noise amplitude",
                      {{"qubits", ParamType::ObjectArray, Json(), "[{name, gate_time_ns, t1_us, t2e_us, tphi_e_us?}]"},
                       num("ir_cutoff_hz", 1.0, "1/f band start, Hz"), num("uv_cutoff_hz", 100e6, "1/f band end, Hz"),
                       opt("cz", ParamType::Object, "pulse-averaged CZ coherence times, µs, and gate_time_ns"),
                       opt("flux_noise", ParamType::ObjectArray, "[{slope_ghz_per_phi0, tphi_e_us}]")},
                      false, false},
                     run_error_budget});
        v.push_back({{"fit-spectrum",
                      "least-squares device parameters from measured transitions",
                      {{"data_file", ParamType::String, Json(), "CSV flux_phi0, frequency_GHz, from, to"},
                       {"free", ParamType::StringArray, Json(), "parameters to fit, e.g. [\"ejc\", \"el_c\"]"},
                       integer("max_iterations", 2000, "simplex iterations")}},
                     run_fit_spectrum});
        return v;
    }();
    return e;
}

Json library_versions()
{
    return {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"gsl", GSL_VERSION},
            {"fftw", std::string(fftw_version)}};
}

} // namespace

const std::vector<ExperimentDef>& experiment_registry()
{
    static const std::vector<ExperimentDef> r = [] {
        std::vector<ExperimentDef> v;
        for (const auto& e : entries())
            v.push_back(e.def);
        return v;
    }();
    return r;
}

Json run_experiment(const RunConfig& rc)
{
    const Entry* entry = nullptr;
    for (const auto& e : entries())
        if (e.def.name == rc.experiment)
            entry = &e;
    if (!entry)
        throw ConfigError("unknown experiment '" + rc.experiment + "'");
    const auto t0 = std::chrono::steady_clock::now();

    DeviceEnergies dev;
    if (!rc.device.is_null())
        dev = parse_device(rc.device, rc.base_dir);
    OutputStage stage(rc.out_dir);
    Context ctx{rc, dev, parse_spectrum_options(rc.spectrum), stage};
    entry->run(ctx);

    write_text(stage.file("report.json"), Json{{"experiment", rc.experiment}, {"results", ctx.results}}.dump(2) + "\n");
    Json outputs = Json::array();
    for (const auto& f : stage.files())
        outputs.push_back({{"file", f}, {"sha256", sha256_file(stage.staging_dir() / f)}});
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Json manifest{{"tool", "tftsim"},
                  {"version", tftsim_version()},
                  {"experiment", rc.experiment},
                  {"config_sha256", sha256_hex(rc.config_text)},
                  {"config", Json::parse(rc.config_text)},
                  {"seed", rc.seed ? Json(*rc.seed) : Json()},
                  {"threads", rc.threads},
                  {"wall_time_s", wall},
                  {"libraries", library_versions()},
                  {"outputs", outputs}};
    write_text(stage.file("manifest.json"), manifest.dump(2) + "\n");
    stage.commit();
    return manifest;
}

ChannelSet parse_channel_file(const Json& j)
{
    if (!j.is_object())
        throw ConfigError("channel file: expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "full_scale_mv" && it.key() != "cplr" && it.key() != "qb2" && it.key() != "cplr_to_qb2" &&
            it.key() != "qb2_to_cplr")
            throw ConfigError("channel file: unknown key '" + it.key() + "'");
    const double fs = j.contains("full_scale_mv") && j["full_scale_mv"].is_number() ? j["full_scale_mv"].get<double>()
                                                                                      : 1000.0;
    if (!(fs > 0))
        throw ConfigError("channel file: full_scale_mv must be positive");
    auto term = [&](const Json& s, StepResponseModel& m, const std::string& where) {
        if (!s.is_object())
            throw ConfigError(where + ": expected an object with exp/osc lists");
        for (auto it = s.begin(); it != s.end(); ++it)
            if (it.key() != "exp" && it.key() != "osc")
                throw ConfigError(where + ": unknown key '" + it.key() + "'");
        if (s.contains("exp"))
            for (const Json& e : s["exp"]) {
                if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                    throw ConfigError(where + ".exp: expected [amplitude_mV, tau_us]");
                m.exps.push_back({e[0].get<double>() / fs, e[1].get<double>()});
            }
        if (s.contains("osc"))
            for (const Json& o : s["osc"]) {
                if (!o.is_array() || o.size() != 4)
                    throw ConfigError(where + ".osc: expected [amplitude_mV, tau_us, period_us, phase_rad]");
                for (const Json& x : o)
                    if (!x.is_number())
                        throw ConfigError(where + ".osc: non-numeric entry");
                m.oscs.push_back({o[0].get<double>() / fs, o[1].get<double>(), o[2].get<double>(), o[3].get<double>()});
            }
        m.validate();
    };
    auto self = [&](const char* key) {
        ChannelModel c;
        if (!j.contains(key))
            return c;
        if (!j[key].is_array())
            throw ConfigError(std::string("channel file.") + key + ": expected a list of stages");
        for (size_t k = 0; k < j[key].size(); ++k) {
            StepResponseModel m;
            term(j[key][k], m, std::string(key) + "[" + std::to_string(k) + "]");
            c.push_back(m);
        }
        return c;
    };
    auto cross = [&](const char* key) {
        ChannelModel c;
        if (!j.contains(key))
            return c;
        if (!j[key].is_array())
            throw ConfigError(std::string("channel file.") + key + ": expected a list of terms");
        StepResponseModel m;
        m.direct = 0;
        for (size_t k = 0; k < j[key].size(); ++k)
            term(j[key][k], m, std::string(key) + "[" + std::to_string(k) + "]");
        if (!m.exps.empty() || !m.oscs.empty())
            c.push_back(m);
        return c;
    };
    ChannelSet s;
    s.cc = self("cplr");
    s.c22 = self("qb2");
    s.c2c = cross("cplr_to_qb2");
    s.c2 = cross("qb2_to_cplr");
    return s;
}

} // namespace tft
