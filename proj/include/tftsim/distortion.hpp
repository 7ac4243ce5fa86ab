#pragma once

#include "tftsim/pulse.hpp"

#include <complex>
#include <string>
#include <utility>
#include <vector>

namespace tft {

struct ExpTerm {
    double amplitude = 0; // relative to the full-scale step
    double tau = 1;       // µs
};

struct OscTerm {
    double amplitude = 0;
    double tau = 1;    // µs
    double period = 1; // µs
    double phase = 0;  // rad
};

// s(t) = u(t) [direct + Σ A e^{-t/τ} + Σ A e^{-t/τ} cos(2πt/T + φ)], t in µs.
// Self channels have direct = 1; cross channels carry only the transient (direct = 0).
struct StepResponseModel {
    double direct = 1.0;
    std::vector<ExpTerm> exps;
    std::vector<OscTerm> oscs;

    void validate() const;
};

double step_response(const StepResponseModel& m, double t_us);

// A channel is a cascade of stages, each with its own step response.
using ChannelModel = std::vector<StepResponseModel>;

// Second-order (or first-order, b2 = a2 = 0) section
// (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
struct Section {
    double b0 = 0, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

// direct + Σ sections, realized in parallel.
struct FilterStage {
    double direct = 1.0;
    std::vector<Section> sections;

    double leading() const; // impulse response at n = 0
    std::complex<double> response(double omega) const; // omega in rad/sample
    std::vector<std::complex<double>> poles() const;
    std::vector<std::complex<double>> zeros() const;
};

class FilterCascade {
public:
    FilterCascade() = default;
    FilterCascade(std::vector<FilterStage> stages, double sample_rate);
    static FilterCascade identity(double sample_rate = 1.0) { return FilterCascade({}, sample_rate); }
    static FilterCascade zero(double sample_rate = 1.0);

    std::vector<double> apply(const std::vector<double>& x) const;
    // Exact causal inverse; requires every stage zero strictly inside the unit circle.
    std::vector<double> apply_inverse(const std::vector<double>& y) const;
    std::complex<double> response(double omega) const;
    bool is_identity() const { return stages_.empty(); }
    bool invertible() const;
    double sample_rate() const { return sample_rate_; }
    const std::vector<FilterStage>& stages() const { return stages_; }

private:
    std::vector<FilterStage> stages_;
    double sample_rate_ = 1.0; // GS/s
};

// Step-invariant mapping: the discrete step response equals s(n / sample_rate)
// exactly. sample_rate in GS/s; requires sample_rate * min τ (in ns) > 2.
FilterStage discretize(const StepResponseModel& m, double sample_rate);
FilterCascade discretize(const ChannelModel& c, double sample_rate);

struct ChannelSet {
    ChannelModel cc, c2, c2c, c22; // c2: qubit 2 -> coupler, c2c: coupler -> qubit 2
};

struct TransferMatrix {
    FilterCascade hcc, hc2, h2c, h22;
    double sample_rate = 1.0;
};

TransferMatrix discretize(const ChannelSet& s, double sample_rate);

// Table-derived presets: "device_a", "device_b", "identity". Amplitudes in mV are
// divided by full_scale_mv.
ChannelSet channel_preset(const std::string& name, double full_scale_mv = 1000.0);
std::vector<std::string> channel_preset_names();

// Forward chain: Vc = Hcc Vc_rt + Hc2 H22 V2_rt, V2 = H2c Hcc Vc_rt + H22 V2_rt.
std::pair<Waveform, Waveform> forward_distort(const Waveform& vc_rt, const Waveform& v2_rt,
                                              const TransferMatrix& tm);

// Room-temperature inputs reproducing the cryogenic targets. The loop factor
// 1 / (1 - H2c Hc2) is a truncated series with the dropped term below series_tol.
std::pair<Waveform, Waveform> predistort(const Waveform& vc_cryo, const Waveform& v2_cryo,
                                         const TransferMatrix& tm, double series_tol = 1e-6);

// Same inversion evaluated bin by bin on a zero-padded FFT of length n_fft.
std::pair<Waveform, Waveform> predistort_fft(const Waveform& vc_cryo, const Waveform& v2_cryo,
                                             const TransferMatrix& tm, size_t n_fft);

struct ProbePoint {
    double delay = 0;  // µs after the end of the probe pulse
    double offset = 0; // measured flux offset, mV
};

struct StepFitSpec {
    double pulse_duration = 1;   // µs
    double probe_amplitude_mv = 1000;
    int n_exp = 1, n_osc = 0;
    StepResponseModel initial;   // optional starting point; used when its term counts match
    int max_iterations = 4000;
};

struct StepFitResult {
    StepResponseModel model;
    double residual_rms_mv = 0;
    int iterations = 0;
    bool converged = false;
};

// Least squares of offset(τ) / probe amplitude against s(τ + T) - s(τ). Amplitudes
// are solved linearly for each trial set of time constants.
StepFitResult fit_step_response(const std::vector<ProbePoint>& data, const StepFitSpec& spec);

} // namespace tft
