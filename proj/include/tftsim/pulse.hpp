#pragma once

#include "tftsim/spectrum.hpp"

#include <memory>
#include <string>
#include <vector>

namespace tft {

// Uniformly sampled flux trajectory. Sample k sits at t0 + k / sample_rate (ns);
// both endpoints are included, so a T ns pulse at 1 GS/s has T + 1 samples.
struct Waveform {
    double sample_rate = 1.0; // GS/s
    std::vector<double> samples; // Φ0
    double t0 = 0.0; // ns

    double duration() const; // ns
    double time(size_t k) const { return t0 + static_cast<double>(k) / sample_rate; }
};

struct SlepianSpec {
    double nw = 2.0;
    double final_frequency = 0.0; // MHz, |101>-|030> detuning at the pulse peak
    double duration = 33.0;       // ns
};

struct RiseSpec {
    double t_rise = 2.0; // ns
    double alpha = 2.0;
    double start_flux = 0.0104;
    double end_flux = 0.090;
};

// Order-0 discrete prolate spheroidal sequence, unit peak, symmetric.
std::vector<double> dpss0(int n_samples, double nw);

// Fraction of the window's spectral energy inside |f| <= nw / n (cycles/sample).
double dpss_concentration(const std::vector<double>& w, double nw);

Waveform rise_segment(const RiseSpec& spec, double sample_rate);

// Diabatic detuning between two product states along the coupler flux:
// the difference of their uncoupled energies, offset so that it vanishes at the
// located avoided crossing. Monotone cubic (PCHIP) interpolation between nodes.
class DetuningTable {
public:
    DetuningTable(const DeviceEnergies& dev, const AvoidedCrossing& crossing, double flux_lo,
                  double flux_hi, ProductLabel lower = {1, 0, 1}, ProductLabel upper = {0, 3, 0},
                  int points = 2001, int coarse_points = 121);

    double delta_mhz(double flux) const;
    // Exact inverse of delta_mhz on the table range (monotone by construction).
    double flux_at(double delta_mhz) const;

    double g_mhz() const { return g_mhz_; }
    double crossing_flux() const { return crossing_flux_; }
    double flux_lo() const { return flux_.front(); }
    double flux_hi() const { return flux_.back(); }
    const std::vector<double>& flux_nodes() const { return flux_; }
    const std::vector<double>& delta_nodes() const { return delta_; }

private:
    struct Interp;
    std::shared_ptr<const Interp> interp_;
    std::vector<double> flux_, delta_;
    double g_mhz_ = 0, crossing_flux_ = 0;
    bool decreasing_ = true;
};

// θ = atan2(2g, Δ) shaped by a dpss0 profile of dθ/dt between the θ of `start_flux`
// and the θ of spec.final_frequency.
Waveform slepian_segment(const DetuningTable& table, const SlepianSpec& spec, double start_flux,
                         double sample_rate);

Waveform cosine_pulse(double amplitude, double duration, double sample_rate, double start_flux);

// Rise, Slepian, an optional flat hold at the peak, then the time-reversed mirror.
Waveform assemble_cz(const RiseSpec& rise, const SlepianSpec& slepian, const DetuningTable& table,
                     double sample_rate, double total_gate_time);

void write_waveform_csv(const Waveform& w, const std::string& path);
void write_waveform_binary(const Waveform& w, const std::string& path);
Waveform read_waveform_binary(const std::string& path);

} // namespace tft
