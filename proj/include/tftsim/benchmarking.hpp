#pragma once

#include "tftsim/error_model.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tft {

struct QubitCoherence {
    double t1 = 0;  // µs, 0 = no relaxation
    double t2e = 0; // µs, 0 = no dephasing beyond T1
};

// Per-gate error channels for RB simulation. Two-qubit simulations carry one
// extra leakage level next to the four computational states.
struct NoiseModel {
    std::array<QubitCoherence, 2> qubits{};
    double gate_time_1q = 40; // ns
    double gate_time_cz = 70; // ns
    double depolarizing_1q = 0; // replacement probability per single-qubit Clifford layer
    double depolarizing_cz = 0; // replacement probability per CZ (computational block)
    double leakage_cz = 0;      // population moved to the leakage level per CZ, per computational state
    double seepage_cz = 0;      // population returned from the leakage level per CZ
    double flux_noise_amp = 0;  // √A_Φ in µΦ0; dephases qubit 2 during the CZ
    double flux_slope = 0;      // GHz/Φ0
    NoiseCutoffs cutoffs;

    void validate() const;
    bool noiseless() const;
};

// Depolarizing replacement probability with average gate error r in dimension d.
double depolarizing_for_error(double r, int d);

struct RBFit {
    double a = 0, p = 1, b = 0;
    double sigma_a = 0, sigma_p = 0, sigma_b = 0;
    bool bypassed = false; // flat data, p = 1 without fitting
    bool valid = true;     // 0 < p <= 1
};

// Least-squares A p^m + B (Levenberg–Marquardt). Flat data bypasses the fit.
RBFit fit_exponential(const std::vector<int>& m, const std::vector<double>& y, double b_seed);

struct RBDataset {
    int n_qubits = 1;
    bool interleaved = false;
    std::vector<int> lengths;
    std::vector<double> mean, sem; // ground-state survival and its standard error
    std::vector<double> comp_mean, comp_sem; // population left in the computational subspace
    RBFit fit;
    double error = 0; // (1 - 1/d)(1 - p)

    int dim() const { return 1 << n_qubits; }
};

struct RBSpec {
    int n_qubits = 2;
    std::vector<int> lengths{1, 5, 10, 20, 35, 50, 75, 100, 125, 150};
    int sequences = 40;
    bool interleave_cz = false;
    std::uint64_t seed = 1;
    int threads = 1;
};

RBDataset run_rb(const RBSpec& spec, const NoiseModel& noise);

struct InterleavedError {
    double r = 0;
    bool negative = false; // p_int exceeds p_ref beyond the fit uncertainty
};

InterleavedError interleaved_error(const RBDataset& ref, const RBDataset& inter, int d);
InterleavedError interleaved_error(double p_ref, double p_int, int d);

struct LRBReport {
    double p_ref = 1, b_ref = 0, l1_ref = 0, l1_int = 0, l1_cz = 0;
    double q_ref = 1, q_int = 1, r_cz = 0, f_cz = 1;
    RBFit leak_ref, leak_int, q_fit_ref, q_fit_int;
};

// Leakage RB from reference and interleaved datasets of a two-qubit run.
LRBReport leakage_rb(const RBDataset& ref, const RBDataset& inter);
LRBReport leakage_rb(const RBSpec& spec, const NoiseModel& noise);

void write_rb_csv(const std::string& path, const RBDataset& d);
RBDataset read_rb_csv(const std::string& path, int n_qubits);

} // namespace tft
