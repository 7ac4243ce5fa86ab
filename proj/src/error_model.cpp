#include "tftsim/error_model.hpp"

#include "tftsim/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace tft {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_positive(double x, const char* what)
{
    if (!(x > 0) || !std::isfinite(x))
        throw ConfigError(std::string(what) + " must be positive and finite");
}
} // namespace

double one_over_f_integral(double t_s, const NoiseCutoffs& c)
{
    require_positive(t_s, "gate time");
    if (!(c.ir_hz > 0) || !(c.uv_hz > c.ir_hz))
        throw ConfigError("1/f cutoffs need 0 < ir_hz < uv_hz");
    // With x = ωt and u = ln x: t² ∫ 2 sin²(x/2) / x² du.
    const double a = std::log(kTwoPi * c.ir_hz * t_s), b = std::log(kTwoPi * c.uv_hz * t_s);
    auto f = [](double u) {
        const double x = std::exp(u);
        const double s = std::sin(0.5 * x);
        return 2.0 * s * s / (x * x);
    };
    double err = 0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-14, &err);
    if (!std::isfinite(v) || err > 1e-10 * std::abs(v))
        throw NumericError("1/f phase integral did not converge");
    return t_s * t_s * v;
}

double one_over_f_phase_variance(double t_ns, double tphi_e_us, const NoiseCutoffs& c)
{
    require_positive(tphi_e_us, "T_phi^E");
    const double tphi = tphi_e_us * 1e-6;
    return 4.0 / (tphi * tphi * std::numbers::ln2) * one_over_f_integral(t_ns * 1e-9, c);
}

IncoherentError1Q incoherent_1q(double t_ns, double t1_us, double t2e_us, std::optional<double> tphi_e_us,
                                const NoiseCutoffs& c)
{
    require_positive(t_ns, "gate time");
    require_positive(t1_us, "T1");
    require_positive(t2e_us, "T2E");
    if (t2e_us > 2.0 * t1_us * (1 + 1e-12))
        throw ConfigError("T2E cannot exceed 2 T1");
    const double t = t_ns * 1e-3; // µs
    IncoherentError1Q r;
    r.t1_term = t / (6.0 * t1_us);
    r.white_term = t / (3.0 * t2e_us);
    if (tphi_e_us) {
        r.one_over_f_variance = one_over_f_phase_variance(t_ns, *tphi_e_us, c);
        r.one_over_f_term = r.one_over_f_variance / 6.0;
    }
    r.total = r.t1_term + r.white_term + r.one_over_f_term;
    return r;
}

CzIncoherentBound incoherent_2q_bound(double t_cz_ns, const CzCoherence& c)
{
    require_positive(t_cz_ns, "CZ gate time");
    std::vector<std::string> missing;
    auto rate = [&](const std::optional<double>& t, const char* name) {
        if (!t) {
            missing.push_back(name);
            return 0.0;
        }
        if (!(*t > 0))
            throw ConfigError(std::string(name) + " must be positive");
        return std::isinf(*t) ? 0.0 : 1.0 / *t;
    };
    const double t = t_cz_ns * 1e-3;
    CzIncoherentBound b;
    b.upper = 2.0 * t / 5.0 *
              (rate(c.t1_q1, "t1_q1") + rate(c.t1_q2, "t1_q2") + rate(c.tphi_q1, "tphi_q1") +
               rate(c.tphi_q2, "tphi_q2"));
    b.lower = t / 5.0 *
              (rate(c.t1_100_000, "t1_100_000") + rate(c.t1_001_000, "t1_001_000") +
               rate(c.t1_101_100, "t1_101_100") + rate(c.t1_101_0xx, "t1_101_0xx") +
               2.0 * rate(c.tphi_100, "tphi_100") + 2.0 * rate(c.tphi_001, "tphi_001"));
    if (!missing.empty()) {
        std::ostringstream os;
        os << "incoherent CZ bound needs pulse-averaged times for:";
        for (const auto& m : missing)
            os << ' ' << m;
        throw ConfigError(os.str());
    }
    return b;
}

double pulse_average_time(const Waveform& w, const std::vector<std::pair<double, double>>& profile)
{
    if (w.samples.size() < 2)
        throw ConfigError("pulse_average_time: waveform needs at least two samples");
    if (profile.empty())
        throw ConfigError("pulse_average_time: empty coherence profile");
    for (size_t i = 0; i < profile.size(); ++i) {
        if (!(profile[i].second > 0))
            throw ConfigError("pulse_average_time: coherence times must be positive");
        if (i > 0 && !(profile[i].first > profile[i - 1].first))
            throw ConfigError("pulse_average_time: profile flux must be strictly increasing");
    }
    auto rate_at = [&](double phi) {
        if (phi < profile.front().first - 1e-12 || phi > profile.back().first + 1e-12)
            throw ConfigError("pulse_average_time: waveform leaves the profile's flux range");
        auto it = std::lower_bound(profile.begin(), profile.end(), phi,
                                   [](const auto& p, double x) { return p.first < x; });
        if (it == profile.begin())
            return 1.0 / it->second;
        if (it == profile.end())
            return 1.0 / profile.back().second;
        const auto& lo = *(it - 1);
        const double f = (phi - lo.first) / (it->first - lo.first);
        return 1.0 / (lo.second + f * (it->second - lo.second));
    };
    // Trapezoid over the linearly interpolated waveform.
    double acc = 0;
    const size_t n = w.samples.size();
    for (size_t k = 0; k < n; ++k)
        acc += (k == 0 || k + 1 == n ? 0.5 : 1.0) * rate_at(w.samples[k]);
    return static_cast<double>(n - 1) / acc;
}

double flux_noise_amp(double tphi_e_us, double slope)
{
    require_positive(tphi_e_us, "T_phi^E");
    if (slope == 0 || !std::isfinite(slope))
        throw ConfigError("flux_noise_amp: flux slope must be nonzero");
    const double amp = 1.0 / (kTwoPi * tphi_e_us * 1e-6 * std::sqrt(std::numbers::ln2) * std::abs(slope) * 1e9);
    return amp * 1e6;
}

double tphi_from_flux_noise(double amp_uphi0, double slope)
{
    require_positive(amp_uphi0, "flux-noise amplitude");
    if (slope == 0 || !std::isfinite(slope))
        throw ConfigError("tphi_from_flux_noise: flux slope must be nonzero");
    return 1.0 / (kTwoPi * amp_uphi0 * 1e-6 * std::sqrt(std::numbers::ln2) * std::abs(slope) * 1e9) * 1e6;
}

double fit_flux_noise_amp(const std::vector<std::pair<double, double>>& slope_tphi)
{
    if (slope_tphi.size() < 2)
        throw ConfigError("fit_flux_noise_amp: need at least two (slope, T_phi^E) pairs");
    double sxy = 0, sxx = 0;
    for (auto [slope, tphi] : slope_tphi) {
        require_positive(tphi, "T_phi^E");
        const double x = kTwoPi * std::sqrt(std::numbers::ln2) * std::abs(slope) * 1e9;
        const double y = 1.0 / (tphi * 1e-6);
        sxy += x * y;
        sxx += x * x;
    }
    if (!(sxx > 0))
        throw ConfigError("fit_flux_noise_amp: all slopes are zero");
    return sxy / sxx * 1e6;
}

} // namespace tft
