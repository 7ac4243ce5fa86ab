#include <doctest.h>

#include "tftsim/circuit.hpp"
#include "tftsim/errors.hpp"
#include "tftsim/pulse.hpp"
#include "tftsim/spectrum.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace tft;

namespace {

// Leading eigenvector of the time-bandwidth concentration matrix.
std::pair<Eigen::VectorXd, double> slepian_oracle(int n, double nw)
{
    const double w = nw / n;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a(i, j) = i == j ? 2 * w : std::sin(2 * M_PI * w * (i - j)) / (M_PI * (i - j));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    Eigen::VectorXd v = es.eigenvectors().col(n - 1);
    v /= v.cwiseAbs().maxCoeff();
    if (v(n / 2) < 0)
        v = -v;
    return {v, es.eigenvalues()(n - 1)};
}

const AvoidedCrossing& device_a_crossing()
{
    static const AvoidedCrossing x =
        locate_avoided_crossing(preset_device("device_a"), {1, 0, 1}, {0, 3, 0}, 0.16, 0.22);
    return x;
}

} // namespace

TEST_SUITE("pulse")
{
    TEST_CASE("dpss0 matches the concentration eigenproblem")
    {
        for (auto [n, nw] : {std::pair{33, 1.4}, std::pair{64, 2.0}, std::pair{17, 1.0}}) {
            const auto w = dpss0(n, nw);
            const auto [ref, lambda] = slepian_oracle(n, nw);
            REQUIRE(static_cast<int>(w.size()) == n);
            for (int k = 0; k < n; ++k)
                CHECK(w[k] == doctest::Approx(ref(k)).epsilon(1e-8));
            CHECK(dpss_concentration(w, nw) == doctest::Approx(lambda).epsilon(1e-8));
        }
    }

    TEST_CASE("rise segment is a power law between its endpoints")
    {
        RiseSpec r{4.0, 2.0, 0.01, 0.09};
        const Waveform w = rise_segment(r, 2.0);
        REQUIRE(w.samples.size() == 9);
        for (size_t k = 0; k < w.samples.size(); ++k)
            CHECK(w.samples[k] == doctest::Approx(0.01 + 0.08 * std::pow(k / 8.0, 2.0)).epsilon(1e-14));
        CHECK_THROWS_AS(rise_segment({4.0, 0.5, 0.01, 0.09}, 1.0), ConfigError);
    }

    TEST_CASE("detuning table inverts and vanishes at the crossing")
    {
        const auto& x = device_a_crossing();
        const DetuningTable t(preset_device("device_a"), x, 0.09, x.flux + 0.02);
        CHECK(std::abs(t.delta_mhz(x.flux)) < 1e-4);
        for (double f : {0.09, 0.12, 0.15, 0.18})
            CHECK(t.flux_at(t.delta_mhz(f)) == doctest::Approx(f).epsilon(1e-9));
        CHECK(t.g_mhz() == doctest::Approx(x.gap_mhz / 2));
        const auto& d = t.delta_nodes();
        for (size_t i = 1; i < d.size(); ++i)
            CHECK(d[i] < d[i - 1]);
    }

    TEST_CASE("assembled CZ pulse is symmetric and reaches the requested detuning")
    {
        const auto& x = device_a_crossing();
        const DeviceEnergies dev = preset_device("device_a");
        const DetuningTable t(dev, x, 0.09, x.flux + 0.02);
        const RiseSpec rise{2.0, 2.0, 0.0104, 0.09};
        const SlepianSpec s{1.4, 9.6, 33.0};
        const Waveform w = assemble_cz(rise, s, t, 1.0, 70.0);
        REQUIRE(w.samples.size() == 71);
        CHECK(w.duration() == doctest::Approx(70.0));
        for (size_t k = 0; k < w.samples.size(); ++k)
            CHECK(w.samples[k] == doctest::Approx(w.samples[w.samples.size() - 1 - k]).epsilon(1e-13));
        CHECK(w.samples.front() == doctest::Approx(0.0104));
        CHECK(w.samples[2] == doctest::Approx(0.09));
        CHECK(w.samples[35] == doctest::Approx(t.flux_at(9.6)).epsilon(1e-9));
        CHECK_THROWS_AS(assemble_cz(rise, s, t, 1.0, 40.0), ConfigError);
    }

    TEST_CASE("waveform files round trip")
    {
        Waveform w;
        w.sample_rate = 2.4;
        w.samples = {0.0104, 0.05, 0.1234567890123, 0.05};
        const auto path = std::filesystem::temp_directory_path() / "tftsim_wave_test.bin";
        write_waveform_binary(w, path.string());
        const Waveform r = read_waveform_binary(path.string());
        CHECK(r.sample_rate == w.sample_rate);
        CHECK(r.samples == w.samples);
        std::filesystem::remove(path);
        CHECK_THROWS_AS(read_waveform_binary(path.string()), ConfigError);
    }
}
