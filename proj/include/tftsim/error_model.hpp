#pragma once

#include "tftsim/pulse.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tft {

// Frequencies of the 1/f integration band, in Hz (ω/2π).
struct NoiseCutoffs {
    double ir_hz = 1.0;
    double uv_hz = 100e6;
};

// ∫_{ω_IR}^{ω_UV} (1 - cos ωt) / ω³ dω with t in seconds and ω = 2π f; result in s².
double one_over_f_integral(double t_s, const NoiseCutoffs& c = {});

// <Δφ²_1/f>(t) = 4 / (T_φ^E² ln 2) ∫ ...; t in ns, T_φ^E in µs.
double one_over_f_phase_variance(double t_ns, double tphi_e_us, const NoiseCutoffs& c = {});

struct IncoherentError1Q {
    double t1_term = 0;       // t / (6 T1)
    double white_term = 0;    // t / (3 T2E)
    double one_over_f_term = 0; // <Δφ²_1/f> / 6
    double one_over_f_variance = 0;
    double total = 0;
};

// r = (t/3)(1/(2T1) + 1/T2E) + <Δφ²_1/f>/6. t in ns, coherence times in µs.
// The 1/f term is omitted when tphi_e_us is empty (fixed-frequency qubit).
IncoherentError1Q incoherent_1q(double t_ns, double t1_us, double t2e_us, std::optional<double> tphi_e_us = {},
                                const NoiseCutoffs& c = {});

// Pulse-averaged decay times for the CZ error bounds, in µs. Unset fields are
// reported when a bound needs them.
struct CzCoherence {
    std::optional<double> t1_q1, t1_q2, tphi_q1, tphi_q2;      // for the upper estimate
    std::optional<double> t1_100_000, t1_001_000, t1_101_100; // state-resolved decay
    std::optional<double> t1_101_0xx;                         // |101> to any state with qubit 1 in 0
    std::optional<double> tphi_100, tphi_001;                 // pure dephasing of |100>, |001>
};

struct CzIncoherentBound {
    double upper = 0; // (2t/5) Σ (1/T1 + 1/Tφ) over both qubits
    double lower = 0; // state-resolved lower bound
};

CzIncoherentBound incoherent_2q_bound(double t_cz_ns, const CzCoherence& c);

// Average decay time along a waveform: 1 / <1/T(Φ(t))>, with T(Φ) linearly
// interpolated from (flux, T) pairs sorted by flux.
double pulse_average_time(const Waveform& w, const std::vector<std::pair<double, double>>& profile);

// √A_Φ in µΦ0 from T_φ^E (µs) and |df/dΦ| (GHz/Φ0).
double flux_noise_amp(double tphi_e_us, double slope_ghz_per_phi0);
// T_φ^E in µs for a given √A_Φ (µΦ0) and slope.
double tphi_from_flux_noise(double amp_uphi0, double slope_ghz_per_phi0);
// Least-squares √A_Φ from (slope, T_φ^E) pairs: 1/T_φ^E = 2π √(ln 2) √A_Φ |slope|.
double fit_flux_noise_amp(const std::vector<std::pair<double, double>>& slope_tphi);

} // namespace tft
