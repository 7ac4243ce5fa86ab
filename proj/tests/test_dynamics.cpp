#include <doctest.h>

#include "tftsim/circuit.hpp"
#include "tftsim/dynamics.hpp"
#include "tftsim/errors.hpp"

#include <cmath>
#include <complex>

using namespace tft;

namespace {

PropagationResult diagonal_gate(const std::array<double, 4>& theta, double leak = 0)
{
    PropagationResult p;
    p.unitary = Eigen::MatrixXcd::Identity(5, 5);
    for (int s = 0; s < 4; ++s) {
        p.unitary(s, s) = std::polar(1.0, -theta[s]);
        p.computational[s] = s;
        p.phases[s] = theta[s];
    }
    if (leak > 0) {
        const double c = std::sqrt(1 - leak), s = std::sqrt(leak);
        Eigen::MatrixXcd r = Eigen::MatrixXcd::Identity(5, 5);
        r(3, 3) = c;
        r(4, 4) = c;
        r(4, 3) = s;
        r(3, 4) = -s;
        p.unitary = r * p.unitary;
    }
    p.labels = {{0, 0, 0}, {1, 0, 0}, {0, 0, 1}, {1, 0, 1}, {0, 3, 0}};
    p.duration = 10;
    return p;
}

} // namespace

TEST_SUITE("dynamics")
{
    TEST_CASE("phase wrapping")
    {
        CHECK(wrap_phase(M_PI) == doctest::Approx(M_PI));
        CHECK(wrap_phase(-M_PI) == doctest::Approx(M_PI));
        CHECK(wrap_phase(3 * M_PI / 2) == doctest::Approx(-M_PI / 2));
        CHECK(wrap_phase(20.0) == doctest::Approx(20.0 - 6 * M_PI));
    }

    TEST_CASE("metrics of an ideal CZ up to single-qubit phases")
    {
        const GateMetrics m = gate_metrics(diagonal_gate({0.3, 1.1, -0.4, 1.1 - 0.4 - 0.3 + M_PI}));
        CHECK(std::abs(m.conditional_phase) == doctest::Approx(M_PI));
        CHECK(m.leakage < 1e-15);
        CHECK(m.avg_fidelity == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(m.virtual_z1 == doctest::Approx(-0.8));
        CHECK(m.virtual_z2 == doctest::Approx(0.7));
    }

    TEST_CASE("metrics under a conditional-phase error and leakage")
    {
        const double eps = 0.05, leak = 1e-3;
        const GateMetrics m = gate_metrics(diagonal_gate({0, 0, 0, M_PI + eps}, leak));
        CHECK(m.leakage101 == doctest::Approx(leak).epsilon(1e-12));
        CHECK(m.leakage == doctest::Approx(leak / 4).epsilon(1e-12));
        // Unitary-block oracle: F = (Tr MM† + |Tr U†M|^2) / 20.
        const std::complex<double> tr = 3.0 + std::sqrt(1 - leak) * std::polar(1.0, -eps);
        CHECK(m.avg_fidelity == doctest::Approx((3 + (1 - leak) + std::norm(tr)) / 20).epsilon(1e-12));
    }

    TEST_CASE("repeat multiplies the unitary and accumulates phases")
    {
        const PropagationResult p = diagonal_gate({0.1, 0.7, 1.9, 3.0});
        const PropagationResult r = repeat(p, 5);
        CHECK((r.unitary - p.unitary * p.unitary * p.unitary * p.unitary * p.unitary).cwiseAbs().maxCoeff() < 1e-14);
        for (int s = 0; s < 4; ++s)
            CHECK(r.phases[s] == doctest::Approx(5 * p.phases[s]));
        CHECK(r.duration == 50);
        CHECK_THROWS_AS(repeat(p, 0), ConfigError);
    }

    TEST_CASE("idle evolution is diagonal in the dressed frame")
    {
        Waveform w;
        w.samples.assign(21, 0.0104);
        DynamicsOptions o;
        o.substeps = 4;
        const PropagationResult p = propagate(preset_device("device_a"), w, o);
        CHECK(p.unitarity_error < 1e-10);
        const GateMetrics m = gate_metrics(p);
        CHECK(m.leakage < 1e-10);
        for (int s = 0; s < 4; ++s)
            CHECK(std::norm(p.unitary(p.computational[s], p.computational[s])) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(p.duration == doctest::Approx(20.0));
    }
}
