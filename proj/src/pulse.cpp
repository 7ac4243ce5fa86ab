#include "tftsim/pulse.hpp"

#include "tftsim/errors.hpp"
#include "tftsim/linalg.hpp"

#include <boost/math/special_functions/fpclassify.hpp>
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace tft {

using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

double Waveform::duration() const
{
    return samples.empty() ? 0.0 : static_cast<double>(samples.size() - 1) / sample_rate;
}

namespace {

int sample_count(double duration, double sample_rate, const char* what)
{
    const double n = duration * sample_rate;
    const double r = std::round(n);
    if (std::abs(n - r) > 1e-9)
        throw ConfigError(std::string(what) + " must be a whole number of sample periods");
    return static_cast<int>(r);
}

} // namespace

std::vector<double> dpss0(int n, double nw)
{
    if (n < 1)
        throw ConfigError("dpss0: n_samples must be at least 1");
    if (!(nw > 0) || !(nw < 0.5 * n))
        throw ConfigError("dpss0: nw must satisfy 0 < nw < n/2");
    if (n == 1)
        return {1.0};
    const double w = nw / n;
    // The leading eigenvector of the prolate tridiagonal matrix; negate to reuse the
    // lowest-eigenpair solver.
    Eigen::VectorXd diag(n), off(n - 1);
    for (int i = 0; i < n; ++i) {
        const double c = 0.5 * (n - 1 - 2.0 * i);
        diag(i) = -c * c * std::cos(2.0 * std::numbers::pi * w);
    }
    for (int i = 1; i < n; ++i)
        off(i - 1) = -0.5 * i * (n - i);
    EigenPairs ep = eigh_tridiagonal(diag, off, 1);
    Eigen::VectorXd v = ep.vectors.col(0);
    if (v.sum() < 0)
        v = -v;
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = 0.5 * (v(i) + v(n - 1 - i));
    const double peak = *std::max_element(out.begin(), out.end());
    for (double& x : out)
        x /= peak;
    return out;
}

double dpss_concentration(const std::vector<double>& w, double nw)
{
    const int n = static_cast<int>(w.size());
    const double band = nw / n;
    double num = 0, den = 0;
    for (int i = 0; i < n; ++i) {
        den += w[i] * w[i];
        for (int j = 0; j < n; ++j) {
            const int d = i - j;
            const double a = d == 0 ? 2.0 * band : std::sin(2.0 * std::numbers::pi * band * d) / (std::numbers::pi * d);
            num += w[i] * a * w[j];
        }
    }
    return num / den;
}

Waveform rise_segment(const RiseSpec& spec, double sample_rate)
{
    if (!(spec.t_rise >= 0) || !(spec.alpha >= 1.0))
        throw ConfigError("rise_segment: t_rise must be non-negative and alpha at least 1");
    if (!(sample_rate > 0))
        throw ConfigError("sample_rate must be positive");
    const int n = sample_count(spec.t_rise, sample_rate, "t_rise");
    Waveform w;
    w.sample_rate = sample_rate;
    w.samples.resize(n + 1);
    w.samples[0] = spec.start_flux;
    for (int k = 1; k <= n; ++k) {
        const double frac = std::pow(static_cast<double>(k) / n, spec.alpha);
        w.samples[k] = spec.start_flux + (spec.end_flux - spec.start_flux) * frac;
    }
    if (n > 0)
        w.samples[n] = spec.end_flux;
    return w;
}

// ---------------------------------------------------------------------------

struct DetuningTable::Interp {
    Pchip forward;
};

DetuningTable::DetuningTable(const DeviceEnergies& dev, const AvoidedCrossing& crossing, double lo,
                             double hi, ProductLabel a, ProductLabel b, int points, int coarse_points)
{
    if (!(hi > lo) || points < 4 || coarse_points < 4)
        throw ConfigError("DetuningTable: invalid range or point count");
    dev.validate();
    const int k1 = std::max({a.n1, b.n1, 1}) + 1;
    const int k2 = std::max({a.n2, b.n2, 1}) + 1;
    const int kc = std::max({a.nc, b.nc, 1}) + 1;
    const SubsystemSolution q1 = solve_transmon(dev.ec1, dev.ej1, 30, k1);
    const SubsystemSolution q2 = solve_transmon(dev.ec2, dev.ej2, 30, k2);
    auto bare_delta = [&](double f) {
        const SubsystemSolution c = solve_fluxonium(dev.ecc, dev.el_c, dev.ejc, f, 100, kc,
                                                    FluxoniumBasis::HarmonicOscillator, false);
        const double eb = q1.energies(b.n1) + c.energies(b.nc) + q2.energies(b.n2);
        const double ea = q1.energies(a.n1) + c.energies(a.nc) + q2.energies(a.n2);
        return eb - ea;
    };
    std::vector<double> cf(coarse_points), cd(coarse_points);
    for (int i = 0; i < coarse_points; ++i) {
        cf[i] = lo + (hi - lo) * i / (coarse_points - 1);
        cd[i] = bare_delta(cf[i]);
    }
    cf.back() = hi;
    const double offset = bare_delta(crossing.flux);
    Pchip coarse{std::vector<double>(cf), std::vector<double>(cd)};
    flux_.resize(points);
    delta_.resize(points);
    for (int i = 0; i < points; ++i) {
        flux_[i] = lo + (hi - lo) * i / (points - 1);
        if (i == points - 1)
            flux_[i] = hi;
        delta_[i] = 1e3 * (coarse(flux_[i]) - offset);
    }
    decreasing_ = delta_.back() < delta_.front();
    for (int i = 1; i < points; ++i) {
        const bool ok = decreasing_ ? delta_[i] < delta_[i - 1] : delta_[i] > delta_[i - 1];
        if (!ok) {
            std::ostringstream os;
            os << "detuning is not monotone over [" << lo << ", " << hi << "] Φ0 (turns near "
               << flux_[i] << "); start the Slepian segment after a rise segment";
            throw ConfigError(os.str());
        }
    }
    g_mhz_ = crossing.g_mhz();
    crossing_flux_ = crossing.flux;
    interp_ = std::make_shared<Interp>(Interp{Pchip(std::vector<double>(flux_), std::vector<double>(delta_))});
}

double DetuningTable::delta_mhz(double flux) const
{
    if (flux < flux_.front() - 1e-12 || flux > flux_.back() + 1e-12)
        throw ConfigError("flux outside the detuning table range");
    return interp_->forward(std::clamp(flux, flux_.front(), flux_.back()));
}

double DetuningTable::flux_at(double delta) const
{
    const double dmin = std::min(delta_.front(), delta_.back());
    const double dmax = std::max(delta_.front(), delta_.back());
    if (delta < dmin - 1e-9 || delta > dmax + 1e-9) {
        std::ostringstream os;
        os << "detuning " << delta << " MHz outside the table range [" << dmin << ", " << dmax << "]";
        throw ConfigError(os.str());
    }
    delta = std::clamp(delta, dmin, dmax);
    // Node interval containing delta.
    size_t i;
    if (decreasing_) {
        auto it = std::lower_bound(delta_.begin(), delta_.end(), delta, std::greater<double>());
        i = static_cast<size_t>(it - delta_.begin());
    } else {
        auto it = std::lower_bound(delta_.begin(), delta_.end(), delta);
        i = static_cast<size_t>(it - delta_.begin());
    }
    if (i < delta_.size() && delta_[i] == delta)
        return flux_[i];
    if (i == 0)
        return flux_.front();
    if (i >= delta_.size())
        return flux_.back();
    auto f = [&](double x) { return interp_->forward(x) - delta; };
    double a = flux_[i - 1], b = flux_[i];
    double fa = f(a), fb = f(b);
    if (fa == 0)
        return a;
    if (fb == 0)
        return b;
    std::uintmax_t iters = 100;
    auto tol = [](double u, double v) { return std::abs(u - v) < 1e-15; };
    auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
    return 0.5 * (r.first + r.second);
}

Waveform slepian_segment(const DetuningTable& table, const SlepianSpec& spec, double start_flux,
                         double sample_rate)
{
    if (!(spec.nw > 0) || !(spec.duration > 0))
        throw ConfigError("slepian_segment: nw and duration must be positive");
    if (!(sample_rate > 0))
        throw ConfigError("sample_rate must be positive");
    const int n = sample_count(spec.duration, sample_rate, "Slepian duration");
    if (n + 1 < 4)
        throw ConfigError("slepian_segment: duration shorter than 4 samples");
    const double two_g = 2.0 * table.g_mhz();
    const double theta_i = std::atan2(two_g, table.delta_mhz(start_flux));
    const double theta_f = std::atan2(two_g, spec.final_frequency);
    const std::vector<double> win = dpss0(n, std::min(spec.nw, 0.5 * n - 1e-9));
    double total = 0;
    for (double x : win)
        total += x;
    Waveform w;
    w.sample_rate = sample_rate;
    w.samples.resize(n + 1);
    w.samples[0] = start_flux;
    double cum = 0;
    for (int k = 1; k <= n; ++k) {
        cum += win[k - 1];
        const double theta = k == n ? theta_f : theta_i + (theta_f - theta_i) * cum / total;
        const double delta = two_g * std::cos(theta) / std::sin(theta);
        w.samples[k] = table.flux_at(delta);
    }
    return w;
}

Waveform cosine_pulse(double amplitude, double duration, double sample_rate, double start_flux)
{
    if (!(duration > 0) || !(sample_rate > 0))
        throw ConfigError("cosine_pulse: duration and sample_rate must be positive");
    const int n = sample_count(duration, sample_rate, "cosine pulse duration");
    Waveform w;
    w.sample_rate = sample_rate;
    w.samples.resize(n + 1);
    for (int k = 0; k <= n; ++k)
        w.samples[k] = start_flux + amplitude * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * k / n));
    w.samples[0] = start_flux;
    w.samples[n] = start_flux;
    return w;
}

Waveform assemble_cz(const RiseSpec& rise, const SlepianSpec& slepian, const DetuningTable& table,
                     double sample_rate, double total_gate_time)
{
    const double hold = total_gate_time - 2.0 * (rise.t_rise + slepian.duration);
    if (hold < -1e-9)
        throw ConfigError("assemble_cz: 2 (t_rise + Slepian duration) exceeds the gate time");
    const Waveform r = rise_segment(rise, sample_rate);
    const Waveform s = slepian_segment(table, slepian, rise.end_flux, sample_rate);
    std::vector<double> fwd = r.samples;
    fwd.insert(fwd.end(), s.samples.begin() + 1, s.samples.end());
    const int nh = sample_count(std::max(hold, 0.0), sample_rate, "flat hold");
    Waveform w;
    w.sample_rate = sample_rate;
    w.samples = fwd;
    w.samples.insert(w.samples.end(), nh, fwd.back());
    for (auto it = fwd.rbegin() + 1; it != fwd.rend(); ++it)
        w.samples.push_back(*it);
    return w;
}

// ---------------------------------------------------------------------------

void write_waveform_csv(const Waveform& w, const std::string& path)
{
    std::ofstream os(path);
    if (!os)
        throw ConfigError("cannot write " + path);
    os << "t_ns,flux_phi0\n" << std::setprecision(17);
    for (size_t k = 0; k < w.samples.size(); ++k)
        os << w.time(k) << "," << w.samples[k] << "\n";
}

namespace {

void put_le(std::ostream& os, double v)
{
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    if constexpr (std::endian::native == std::endian::big)
        u = __builtin_bswap64(u);
    os.write(reinterpret_cast<const char*>(&u), 8);
}

double get_le(std::istream& is)
{
    std::uint64_t u = 0;
    is.read(reinterpret_cast<char*>(&u), 8);
    if constexpr (std::endian::native == std::endian::big)
        u = __builtin_bswap64(u);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

} // namespace

void write_waveform_binary(const Waveform& w, const std::string& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw ConfigError("cannot write " + path);
    for (size_t k = 0; k < w.samples.size(); ++k) {
        put_le(os, w.time(k));
        put_le(os, w.samples[k]);
    }
}

Waveform read_waveform_binary(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ConfigError("cannot read " + path);
    std::vector<double> t, f;
    while (true) {
        const double a = get_le(is);
        if (!is)
            break;
        const double b = get_le(is);
        if (!is)
            throw ConfigError(path + ": truncated waveform record");
        t.push_back(a);
        f.push_back(b);
    }
    if (t.size() < 2)
        throw ConfigError(path + ": waveform needs at least two samples");
    Waveform w;
    const double dt = t[1] - t[0];
    if (!(dt > 0))
        throw ConfigError(path + ": non-increasing sample times");
    w.sample_rate = 1.0 / dt;
    w.t0 = t[0];
    w.samples = std::move(f);
    return w;
}

} // namespace tft
