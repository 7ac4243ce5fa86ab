#pragma once

#include <Eigen/Dense>

#include <string>

namespace tft {

enum class FluxoniumBasis { HarmonicOscillator, PhaseGrid };

struct SubsystemSolution {
    Eigen::VectorXd energies;  // kept levels, GHz, ground shifted to 0
    double ground_energy = 0;  // absolute ground energy before the shift, GHz
    Eigen::MatrixXcd n_elems;  // <i|n|j> between kept levels
    Eigen::MatrixXd vectors;   // kept eigenvectors in the solver basis (columns)
    int kept_levels = 0;
    std::string basis_kind;    // "charge", "harmonic_oscillator", "phase_grid"
    int basis_size = 0;
};

// Transmon 4 ec n^2 - ej cos(phi) in the charge basis n in [-cutoff, cutoff].
// Eigenvector k carries the phase i^k, which makes <i|n|j> purely imaginary and
// antisymmetric. When check_convergence is set the kept energies are compared
// against a 1.5x larger cutoff and a NumericError is raised above 1 kHz.
SubsystemSolution solve_transmon(double ec, double ej, int charge_cutoff = 30, int kept_levels = 8,
                                 bool check_convergence = true);

// Fluxonium 4 ecc n^2 + el/2 phi^2 - ejc cos(phi - 2 pi phi_ext), phi_ext in Φ0.
// `basis_size` is the oscillator dimension (HarmonicOscillator) or the number of
// grid points (PhaseGrid).
SubsystemSolution solve_fluxonium(double ecc, double el, double ejc, double phi_ext,
                                  int basis_size = 100, int kept_levels = 10,
                                  FluxoniumBasis basis = FluxoniumBasis::HarmonicOscillator,
                                  bool check_convergence = true);

// n_elems restricted to the kept levels.
Eigen::MatrixXcd charge_elements(const SubsystemSolution& sol);

// Operators of the fluxonium LC mode in its oscillator basis of dimension `dim`.
struct OscillatorOperators {
    double omega = 0;         // sqrt(8 el ecc), GHz
    Eigen::MatrixXd cos_phi;  // <m|cos(phi)|n>
    Eigen::MatrixXd sin_phi;  // <m|sin(phi)|n>
    Eigen::MatrixXd n_imag;   // n = i * n_imag
};
OscillatorOperators oscillator_operators(double ecc, double el, int dim);

// E_J giving the requested transmon 0-1 frequency (GHz) at fixed ec.
double transmon_ej_for_frequency(double ec, double f01, int charge_cutoff = 30);

} // namespace tft
