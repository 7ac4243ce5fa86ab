#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tft {

namespace constants {
inline constexpr double e_charge = 1.602176634e-19; // C
inline constexpr double planck = 6.62607015e-34;    // J s
inline constexpr double flux_quantum = planck / (2.0 * e_charge);
} // namespace constants

// Capacitances in fF. c_i0 are the node-to-ground capacitances (junction plus shunt).
struct CapacitanceNetwork {
    double c10 = 0, c20 = 0, cc0 = 0;
    double c1c = 0, c2c = 0, c12 = 0;
};

// Energies in GHz (E/h).
struct JunctionParams {
    double ej1 = 0, ej2 = 0, ejc = 0;
    double el_c = 0;
};

// Every energy scale of the transmon-fluxonium-transmon Hamiltonian, in GHz (E/h).
struct DeviceEnergies {
    double ec1 = 0, ec2 = 0, ecc = 0;
    double ej1 = 0, ej2 = 0, ejc = 0;
    double el_c = 0;
    double j1c = 0, j2c = 0, j12 = 0;

    // Throws ConfigError when a positivity invariant is violated.
    void validate() const;
};

// Capacitance matrix in node order (1, c, 2), fF.
Eigen::Matrix3d capacitance_matrix(const CapacitanceNetwork& net);

// Closed-form inverse of a symmetric 3x3 matrix; throws NumericError if not positive definite.
Eigen::Matrix3d inverse_spd3(const Eigen::Matrix3d& c);

DeviceEnergies energies_from_capacitances(const CapacitanceNetwork& net, const JunctionParams& jp);

// Qubit-2 Josephson energy bracket of a tunable preset, GHz.
struct EjRange {
    double lo, hi;
};

// Names: device_a, device_b, fig2_model, fig1_coupler. For the tunable presets
// `qubit2_ej` selects the operating point; it must lie inside the published bracket.
// Defaults: device_a qubit 2 at 4.40 GHz, device_b qubit 2 at 3.627 GHz.
DeviceEnergies preset_device(std::string_view name, std::optional<double> qubit2_ej = std::nullopt);

std::vector<std::string> preset_names();
std::optional<EjRange> preset_qubit2_range(std::string_view name);

// Idle (zero-ZZ) coupler bias reported for a preset, if any, Φ0.
std::optional<double> preset_idle_flux(std::string_view name);

} // namespace tft
