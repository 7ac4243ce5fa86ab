#include <doctest.h>

#include "tftsim/distortion.hpp"
#include "tftsim/errors.hpp"

#include <cmath>
#include <random>

using namespace tft;

namespace {

double model_step(const StepResponseModel& m, double t_us)
{
    double s = m.direct;
    for (const auto& e : m.exps)
        s += e.amplitude * std::exp(-t_us / e.tau);
    for (const auto& o : m.oscs)
        s += o.amplitude * std::exp(-t_us / o.tau) * std::cos(2 * M_PI * t_us / o.period + o.phase);
    return s;
}

Waveform square(int pre, int on, int post, double amp)
{
    Waveform w;
    w.samples.assign(pre + on + post, 0.0);
    for (int k = pre; k < pre + on; ++k)
        w.samples[k] = amp;
    return w;
}

} // namespace

TEST_SUITE("distortion")
{
    TEST_CASE("discrete step response samples the continuous one exactly")
    {
        StepResponseModel m;
        m.exps = {{-0.093, 0.19}, {0.0051, 160.5}, {0.0146, 0.017}};
        m.oscs = {{0.0024, 0.244, 1.286, -1.683}};
        for (double fs : {1.0, 2.4}) {
            const FilterCascade c({discretize(m, fs)}, fs);
            const std::vector<double> y = c.apply(std::vector<double>(3000, 1.0));
            double err = 0;
            for (size_t n = 0; n < y.size(); ++n)
                err = std::max(err, std::abs(y[n] - model_step(m, n / fs * 1e-3)));
            CHECK(err < 1e-12);
        }
    }

    TEST_CASE("too-fast time constants are rejected")
    {
        StepResponseModel m;
        m.exps = {{0.01, 0.001}};
        CHECK_THROWS_AS(discretize(m, 1.0), ConfigError);
        m.exps = {{0.01, -1}};
        CHECK_THROWS_AS(m.validate(), ConfigError);
    }

    TEST_CASE("inverse filter undoes the forward filter")
    {
        const ChannelSet cs = channel_preset("device_a");
        const FilterCascade f = discretize(cs.cc, 1.0);
        REQUIRE(f.invertible());
        std::mt19937_64 rng(3);
        std::normal_distribution<double> g;
        std::vector<double> x(5000);
        for (auto& v : x)
            v = g(rng);
        const auto back = f.apply_inverse(f.apply(x));
        double err = 0;
        for (size_t k = 0; k < x.size(); ++k)
            err = std::max(err, std::abs(back[k] - x[k]));
        CHECK(err < 1e-10);
    }

    TEST_CASE("predistortion round trip through the coupled channels")
    {
        for (const char* preset : {"device_a", "device_b"}) {
            const TransferMatrix tm = discretize(channel_preset(preset), 1.0);
            const Waveform vc = square(100, 200, 3000, 0.1), v2 = square(100, 200, 3000, -0.04);
            const auto rt = predistort(vc, v2, tm, 1e-12);
            const auto out = forward_distort(rt.first, rt.second, tm);
            double err = 0;
            for (size_t k = 0; k < vc.samples.size(); ++k)
                err = std::max({err, std::abs(out.first.samples[k] - vc.samples[k]),
                                std::abs(out.second.samples[k] - v2.samples[k])});
            CHECK(err / 0.1 < 1e-9);

            const auto fft = predistort_fft(vc, v2, tm, 1 << 22);
            double diff = 0;
            for (size_t k = 0; k < vc.samples.size(); ++k)
                diff = std::max(diff, std::abs(fft.first.samples[k] - rt.first.samples[k]));
            CHECK(diff / 0.1 < 1e-6);
        }
    }

    TEST_CASE("identity channels pass samples through unchanged")
    {
        const TransferMatrix tm = discretize(channel_preset("identity"), 1.0);
        Waveform vc = square(10, 50, 10, 0.123456789), v2 = square(5, 20, 45, -0.3);
        vc.samples[3] = 1e-300;
        const auto rt = predistort(vc, v2, tm);
        CHECK(rt.first.samples == vc.samples);
        CHECK(rt.second.samples == v2.samples);
        const auto out = forward_distort(vc, v2, tm);
        CHECK(out.first.samples == vc.samples);
        CHECK(out.second.samples == v2.samples);
    }

    TEST_CASE("a strong cross-coupling loop is refused")
    {
        ChannelSet cs;
        StepResponseModel a;
        a.direct = 0;
        a.exps = {{0.97, 50}};
        cs.c2c = {a};
        cs.c2 = {a};
        CHECK_THROWS_AS(predistort(square(1, 5, 5, 1), square(1, 5, 5, 1), discretize(cs, 1.0)), NumericError);
    }

    TEST_CASE("step-response fit recovers a single exponential")
    {
        StepResponseModel truth;
        truth.exps = {{-0.244, 185.0}};
        const double T = 1.0, amp = 1000;
        std::vector<ProbePoint> data;
        for (double d = 0.05; d < 2000; d *= 1.15)
            data.push_back({d, amp * (model_step(truth, d + T) - model_step(truth, d))});
        StepFitSpec spec;
        spec.pulse_duration = T;
        spec.probe_amplitude_mv = amp;
        const StepFitResult r = fit_step_response(data, spec);
        CHECK(r.converged);
        REQUIRE(r.model.exps.size() == 1);
        CHECK(r.model.exps[0].amplitude == doctest::Approx(-0.244).epsilon(1e-4));
        CHECK(r.model.exps[0].tau == doctest::Approx(185.0).epsilon(1e-4));
        CHECK(r.residual_rms_mv < 1e-6);
    }
}
