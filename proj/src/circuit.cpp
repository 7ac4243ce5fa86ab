#include "tftsim/circuit.hpp"

#include "tftsim/errors.hpp"
#include "tftsim/subsystem.hpp"

#include <cmath>
#include <sstream>

namespace tft {

void DeviceEnergies::validate() const
{
    const std::pair<const char*, double> positive[] = {
        {"ec1", ec1}, {"ec2", ec2}, {"ecc", ecc},   {"ej1", ej1},
        {"ej2", ej2}, {"ejc", ejc}, {"el_c", el_c},
    };
    for (const auto& [name, v] : positive) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError(std::string("device energy ") + name + " must be positive and finite");
    }
    for (double j : {j1c, j2c, j12}) {
        if (!std::isfinite(j))
            throw ConfigError("coupling energies must be finite");
    }
}

Eigen::Matrix3d capacitance_matrix(const CapacitanceNetwork& n)
{
    Eigen::Matrix3d c;
    c << n.c10 + n.c1c + n.c12, -n.c1c, -n.c12,
         -n.c1c, n.cc0 + n.c1c + n.c2c, -n.c2c,
         -n.c12, -n.c2c, n.c20 + n.c12 + n.c2c;
    return c;
}

Eigen::Matrix3d inverse_spd3(const Eigen::Matrix3d& c)
{
    const double a = c(0, 0), b = c(0, 1), d = c(0, 2);
    const double e = c(1, 1), f = c(1, 2), g = c(2, 2);
    // Sylvester's criterion on leading minors.
    const double m1 = a;
    const double m2 = a * e - b * b;
    const double cof00 = e * g - f * f;
    const double cof01 = -(b * g - f * d);
    const double cof02 = b * f - e * d;
    const double det = a * cof00 + b * cof01 + d * cof02;
    const double scale = c.cwiseAbs().maxCoeff();
    if (!(m1 > 0.0) || !(m2 > 0.0) || !(det > 1e-14 * scale * scale * scale)) {
        std::ostringstream os;
        os << "capacitance matrix is singular or not positive definite (minors " << m1 << ", " << m2
           << ", " << det << ")";
        throw NumericError(os.str());
    }
    const double cof11 = a * g - d * d;
    const double cof12 = -(a * f - b * d);
    const double cof22 = a * e - b * b;
    Eigen::Matrix3d inv;
    inv << cof00, cof01, cof02,
           cof01, cof11, cof12,
           cof02, cof12, cof22;
    return inv / det;
}

DeviceEnergies energies_from_capacitances(const CapacitanceNetwork& net, const JunctionParams& jp)
{
    if (net.c10 <= 0 || net.c20 <= 0 || net.cc0 <= 0)
        throw ConfigError("c10, c20, cc0 must be positive");
    if (net.c1c < 0 || net.c2c < 0 || net.c12 < 0)
        throw ConfigError("coupling capacitances must be non-negative");
    const Eigen::Matrix3d cinv = inverse_spd3(capacitance_matrix(net)) * 1e15; // 1/F
    const double e2_over_h_ghz = constants::e_charge * constants::e_charge / constants::planck * 1e-9;

    DeviceEnergies d;
    d.ec1 = 0.5 * e2_over_h_ghz * cinv(0, 0);
    d.ecc = 0.5 * e2_over_h_ghz * cinv(1, 1);
    d.ec2 = 0.5 * e2_over_h_ghz * cinv(2, 2);
    d.j1c = 4.0 * e2_over_h_ghz * cinv(0, 1);
    d.j2c = 4.0 * e2_over_h_ghz * cinv(1, 2);
    d.j12 = 4.0 * e2_over_h_ghz * cinv(0, 2);
    d.ej1 = jp.ej1;
    d.ej2 = jp.ej2;
    d.ejc = jp.ejc;
    d.el_c = jp.el_c;
    d.validate();
    return d;
}

namespace {

DeviceEnergies fig2_transmons()
{
    DeviceEnergies d;
    d.ec1 = 0.2;
    d.ec2 = 0.2;
    d.ej1 = transmon_ej_for_frequency(0.2, 4.8);
    d.ej2 = transmon_ej_for_frequency(0.2, 4.2);
    return d;
}

void check_range(std::string_view name, double ej)
{
    auto r = preset_qubit2_range(name);
    if (r && (ej < r->lo || ej > r->hi)) {
        std::ostringstream os;
        os << "qubit-2 E_J " << ej << " GHz outside the " << name << " range [" << r->lo << ", "
           << r->hi << "]";
        throw ConfigError(os.str());
    }
}

} // namespace

std::vector<std::string> preset_names()
{
    return {"device_a", "device_b", "fig2_model", "fig1_coupler"};
}

std::optional<EjRange> preset_qubit2_range(std::string_view name)
{
    if (name == "device_a")
        return EjRange{3.897, 13.51};
    if (name == "device_b")
        return EjRange{2.7, 9.35};
    return std::nullopt;
}

std::optional<double> preset_idle_flux(std::string_view name)
{
    if (name == "device_a")
        return 0.0104;
    if (name == "device_b")
        return -0.03373;
    return std::nullopt;
}

DeviceEnergies preset_device(std::string_view name, std::optional<double> qubit2_ej)
{
    DeviceEnergies d;
    if (name == "device_a") {
        d.ej1 = 9.875;
        d.ec1 = 0.225;
        d.ec2 = 0.227;
        d.ej2 = qubit2_ej ? *qubit2_ej : transmon_ej_for_frequency(0.227, 4.40);
        d.ejc = 4.372;
        d.ecc = 0.890;
        d.el_c = 0.511;
        d.j1c = 0.122;
        d.j2c = 0.134;
        d.j12 = 0.0121;
    } else if (name == "device_b") {
        d.ej1 = 12.6;
        d.ec1 = 0.20;
        d.ec2 = 0.187;
        d.ej2 = qubit2_ej ? *qubit2_ej : transmon_ej_for_frequency(0.187, 3.627);
        d.ejc = 3.93;
        d.ecc = 0.83;
        d.el_c = 0.50;
        d.j1c = 0.228;
        d.j2c = 0.228;
        d.j12 = 0.022;
    } else if (name == "fig2_model") {
        d = fig2_transmons();
        d.ecc = 0.9;
        d.ejc = 4.8;
        d.el_c = 0.55;
        d.j1c = 0.15;
        d.j2c = 0.15;
        d.j12 = 0.015;
    } else if (name == "fig1_coupler") {
        d = fig2_transmons();
        d.ecc = 1.0;
        d.ejc = 5.0;
        d.el_c = 0.5;
    } else {
        throw ConfigError("unknown device preset '" + std::string(name) + "'");
    }
    if (qubit2_ej) {
        if (!preset_qubit2_range(name))
            throw ConfigError("preset '" + std::string(name) + "' has a fixed-frequency qubit 2");
        check_range(name, *qubit2_ej);
    }
    d.validate();
    return d;
}

} // namespace tft
