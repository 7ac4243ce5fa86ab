#include <doctest.h>

#include "tftsim/error_model.hpp"
#include "tftsim/errors.hpp"

#include <gsl/gsl_sf_expint.h>

#include <cmath>

using namespace tft;

namespace {

// Antiderivative of (1 - cos x)/x^3 with cos x - 1 written as -2 sin^2(x/2).
double antiderivative(double x)
{
    const double s = std::sin(x / 2);
    return -s * s / (x * x) - std::sin(x) / (2 * x) + 0.5 * gsl_sf_Ci(x);
}

double integral_oracle(double t_s, double f_ir, double f_uv)
{
    const double a = 2 * M_PI * f_ir * t_s, b = 2 * M_PI * f_uv * t_s;
    return t_s * t_s * (antiderivative(b) - antiderivative(a));
}

} // namespace

TEST_SUITE("error_model")
{
    TEST_CASE("1/f integral matches the cosine-integral closed form")
    {
        for (double t_ns : {10.0, 40.0, 50.0, 70.0, 400.0}) {
            const double t = t_ns * 1e-9;
            CHECK(one_over_f_integral(t) == doctest::Approx(integral_oracle(t, 1, 1e8)).epsilon(1e-12));
            CHECK(one_over_f_integral(t, {10, 1e7}) == doctest::Approx(integral_oracle(t, 10, 1e7)).epsilon(1e-12));
        }
    }

    TEST_CASE("single-qubit incoherent error arithmetic")
    {
        const double t = 40, t1 = 25, t2 = 34.6, tphi = 22.3;
        const IncoherentError1Q r = incoherent_1q(t, t1, t2, tphi);
        const double tu = t * 1e-3;
        const double var = 4 / (tphi * 1e-6 * tphi * 1e-6 * std::log(2.0)) * integral_oracle(t * 1e-9, 1, 1e8);
        CHECK(r.t1_term == doctest::Approx(tu / (6 * t1)).epsilon(1e-12));
        CHECK(r.white_term == doctest::Approx(tu / (3 * t2)).epsilon(1e-12));
        CHECK(r.one_over_f_variance == doctest::Approx(var).epsilon(1e-12));
        CHECK(r.total == doctest::Approx(tu / 3 * (1 / (2 * t1) + 1 / t2) + var / 6).epsilon(1e-12));
        const IncoherentError1Q fixed = incoherent_1q(t, 51.3, 70.0);
        CHECK(fixed.one_over_f_term == 0);
        CHECK_THROWS_AS(incoherent_1q(t, 10, 25), ConfigError);
    }

    TEST_CASE("two-qubit bounds")
    {
        CzCoherence c;
        c.t1_q1 = 40;
        c.t1_q2 = 20;
        c.tphi_q1 = 60;
        c.tphi_q2 = 15;
        c.t1_100_000 = 38;
        c.t1_001_000 = 22;
        c.t1_101_100 = 21;
        c.t1_101_0xx = 9;
        c.tphi_100 = 55;
        c.tphi_001 = 16;
        const CzIncoherentBound b = incoherent_2q_bound(70, c);
        const double t = 0.07;
        CHECK(b.upper == doctest::Approx(2 * t / 5 * (1 / 40.0 + 1 / 20.0 + 1 / 60.0 + 1 / 15.0)).epsilon(1e-12));
        CHECK(b.lower == doctest::Approx(t / 5 * (1 / 38.0 + 1 / 22.0 + 1 / 21.0 + 1 / 9.0 + 2 / 55.0 + 2 / 16.0))
                             .epsilon(1e-12));
        CzCoherence partial;
        partial.t1_q1 = 40;
        CHECK_THROWS_AS(incoherent_2q_bound(70, partial), ConfigError);
    }

    TEST_CASE("pulse-averaged decay time")
    {
        Waveform w;
        w.samples = {0.0, 0.1, 0.2, 0.1, 0.0};
        CHECK(pulse_average_time(w, {{0.0, 30.0}, {0.3, 30.0}}) == doctest::Approx(30.0));
        // Times are interpolated in flux, rates are averaged in time.
        const double avg = pulse_average_time(w, {{0.0, 40.0}, {0.2, 20.0}});
        const double r0 = 1 / 40.0, r1 = 1 / 30.0, r2 = 1 / 20.0;
        CHECK(avg == doctest::Approx(1 / ((r0 / 2 + r1 + r2 + r1 + r0 / 2) / 4)).epsilon(1e-12));
    }

    TEST_CASE("flux-noise amplitude")
    {
        const double amp = flux_noise_amp(22.3, 1.7);
        CHECK(amp == doctest::Approx(1e6 / (2 * M_PI * 22.3e-6 * 1e9 * 1.7 * std::sqrt(std::log(2.0)))).epsilon(1e-12));
        CHECK(tphi_from_flux_noise(amp, 1.7) == doctest::Approx(22.3).epsilon(1e-12));
        CHECK(fit_flux_noise_amp({{1.0, tphi_from_flux_noise(3.0, 1.0)}, {2.0, tphi_from_flux_noise(3.0, 2.0)}}) ==
              doctest::Approx(3.0).epsilon(1e-10));
    }
}
