#pragma once

#include "tftsim/pulse.hpp"
#include "tftsim/spectrum.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace tft {

struct DynamicsOptions {
    int transmon_levels = 5;
    int coupler_levels = 36;    // coupler eigenstates at the frame flux
    int oscillator_dim = 100;   // coupler oscillator basis
    // Propagation basis: eigenstates below frame ground + energy_cut_ghz, sampled at
    // basis_fluxes points across the flux span and orthonormalized.
    double energy_cut_ghz = 11.0;
    int basis_fluxes = 12;
    double basis_tol = 1e-6;    // singular value cut of the snapshot matrix
    int substeps = 32;          // fourth-order commutator-free steps per sample interval
    double unitarity_tol = 1e-8;
};

// Composite Hamiltonian H(Φ) = H0 + cos(2πΦ) Hc + sin(2πΦ) Hs on a reduced basis that
// captures the low-lying states everywhere in [flux_lo, flux_hi], written in the
// dressed eigenbasis at the frame flux. All matrices are real.
class DynamicsModel {
public:
    DynamicsModel(const DeviceEnergies& dev, double frame_flux, double flux_lo, double flux_hi,
                  DynamicsOptions opt = {});

    Eigen::MatrixXd hamiltonian(double flux) const;
    double frame_flux() const { return frame_flux_; }
    int size() const { return static_cast<int>(frame_energies_.size()); }
    const Eigen::VectorXd& frame_energies() const { return frame_energies_; } // GHz
    const std::vector<ProductLabel>& labels() const { return labels_; }
    const std::vector<double>& label_weights() const { return weights_; }
    int index(const ProductLabel& l) const; // -1 when not kept
    const std::array<int, 4>& computational() const { return comp_; } // 000, 100, 001, 101
    const DynamicsOptions& options() const { return opt_; }

private:
    DynamicsOptions opt_;
    double frame_flux_ = 0;
    Eigen::MatrixXd h0_, hc_, hs_;
    Eigen::VectorXd frame_energies_;
    std::vector<ProductLabel> labels_;
    std::vector<double> weights_;
    std::array<int, 4> comp_{};
};

struct PropagationResult {
    Eigen::MatrixXcd unitary;       // in the dressed frame basis
    Eigen::VectorXd frame_energies; // GHz
    std::vector<ProductLabel> labels;
    std::array<int, 4> computational{};
    // Phases φ_s with <s|U|s> = |.| exp(-i φ_s) for 000, 100, 001, 101, tracked
    // continuously through the evolution (not wrapped).
    std::array<double, 4> phases{};
    double duration = 0; // ns
    int steps = 0;
    double unitarity_error = 0;

    Eigen::VectorXd populations(const ProductLabel& initial) const;
};

// Fourth-order commutator-free Magnus steps along the linearly interpolated waveform.
PropagationResult propagate(const DynamicsModel& model, const Waveform& w);
PropagationResult propagate(const DynamicsModel& model, const Waveform& w, int substeps);

// Builds the model at the waveform's first sample. The waveform must return to
// its starting flux.
PropagationResult propagate(const DeviceEnergies& dev, const Waveform& w, const DynamicsOptions& opt = {});

// Change of the average computational leakage when the coupler and energy
// truncations are enlarged (5 more coupler levels, 1 GHz higher cut).
double truncation_sensitivity(const DeviceEnergies& dev, const Waveform& w, const DynamicsOptions& opt = {});

// The evolution repeated n times, with the phases continued accordingly.
PropagationResult repeat(const PropagationResult& p, int n);

struct GateMetrics {
    double conditional_phase = 0; // rad, (-π, π]
    double leakage = 0;           // averaged over the four computational inputs
    double leakage101 = 0;
    double virtual_z1 = 0, virtual_z2 = 0; // rad, (-π, π]
    double avg_fidelity = 0;
};

GateMetrics gate_metrics(const PropagationResult& p);

double wrap_phase(double x); // to (-π, π]

struct CalibrationSpec {
    double gate_time = 70.0; // ns
    double sample_rate = 1.0;
    RiseSpec rise;
    AvoidedCrossing crossing;
    double table_flux_hi = 0;            // upper end of the detuning table; 0 = crossing + 0.02
    std::vector<double> nw_grid{1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0};
    double ff_lo = -150, ff_hi = 150;    // final-frequency search range, MHz
    int coarse_points = 13;
    int jazz_repetitions = 17;
    int threads = 1;
    int search_substeps = 8; // root search; the reported metrics use dynamics.substeps
    DynamicsOptions dynamics;
};

struct CalibrationRow {
    double nw = 0;
    double final_frequency = 0;
    bool found = false;
    GateMetrics single;   // one gate
    GateMetrics repeated; // jazz_repetitions gates
};

struct CalibrationResult {
    SlepianSpec slepian;
    RiseSpec rise;
    GateMetrics metrics;
    GateMetrics repeated;
    Waveform waveform;
    std::vector<CalibrationRow> rows;
};

// Solves the Slepian final frequency for a π conditional phase at each nw and keeps
// the nw with the least |101> leakage after the repeated gate.
CalibrationResult calibrate_cz(const DeviceEnergies& dev, const CalibrationSpec& spec);

// Eigenvector of model.hamiltonian(flux) continued adiabatically from the frame
// state `label`, in the frame basis.
Eigen::VectorXd adiabatic_state(const DynamicsModel& model, const ProductLabel& label, double flux,
                                double step = 0.002);

// Leakage out of the adiabatic |101> branch at the end of a rise segment, one row
// per t_rise and one column per alpha.
Eigen::MatrixXd rise_leakage_map(const DeviceEnergies& dev, const std::vector<double>& t_rise,
                                 const std::vector<double>& alpha, double start_flux, double end_flux,
                                 double sample_rate = 1.0, const DynamicsOptions& opt = {});

} // namespace tft
