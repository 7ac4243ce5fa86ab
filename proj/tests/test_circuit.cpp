#include <doctest.h>

#include "tftsim/circuit.hpp"
#include "tftsim/errors.hpp"
#include "tftsim/subsystem.hpp"

#include <Eigen/Dense>
#include <gsl/gsl_sf_mathieu.h>

#include <cmath>

using namespace tft;

namespace {

// Transmon levels at zero offset charge: E = ec * {a0, b2, a2, b4, a4, ...}(q = ej / 2ec).
std::vector<double> mathieu_levels(double ec, double ej, int n)
{
    const double q = ej / (2 * ec);
    std::vector<double> e;
    for (int k = 0; static_cast<int>(e.size()) < n; ++k) {
        const int r = 2 * ((k + 1) / 2);
        e.push_back(ec * (k % 2 ? gsl_sf_mathieu_b(r, q) : gsl_sf_mathieu_a(r, q)));
    }
    for (int k = n - 1; k >= 0; --k)
        e[k] -= e[0];
    return e;
}

// Fluxonium on a uniform phase grid with a five-point Laplacian.
Eigen::VectorXd grid_fluxonium(double ecc, double el, double ejc, double phi_ext, int n, double half_width)
{
    const double h = 2 * half_width / (n - 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    const double k = 4 * ecc / (12 * h * h);
    for (int i = 0; i < n; ++i) {
        const double phi = -half_width + i * h;
        H(i, i) = 30 * k + 0.5 * el * phi * phi - ejc * std::cos(phi - 2 * M_PI * phi_ext);
        if (i + 1 < n)
            H(i, i + 1) = H(i + 1, i) = -16 * k;
        if (i + 2 < n)
            H(i, i + 2) = H(i + 2, i) = k;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

} // namespace

TEST_SUITE("circuit")
{
    TEST_CASE("charging energies from the inverse capacitance matrix")
    {
        CapacitanceNetwork net{70, 72, 40, 6, 5.5, 0.3};
        JunctionParams jp{15, 12, 4.8, 0.55};
        const DeviceEnergies d = energies_from_capacitances(net, jp);

        Eigen::Matrix3d c;
        c << net.c10 + net.c1c + net.c12, -net.c1c, -net.c12, -net.c1c, net.cc0 + net.c1c + net.c2c, -net.c2c,
            -net.c12, -net.c2c, net.c20 + net.c2c + net.c12;
        const Eigen::Matrix3d ci = c.fullPivLu().inverse() * 1e15;
        const double e = 1.602176634e-19, h = 6.62607015e-34;
        const double s = e * e / h * 1e-9;
        CHECK(d.ec1 == doctest::Approx(0.5 * s * ci(0, 0)).epsilon(1e-12));
        CHECK(d.ecc == doctest::Approx(0.5 * s * ci(1, 1)).epsilon(1e-12));
        CHECK(d.ec2 == doctest::Approx(0.5 * s * ci(2, 2)).epsilon(1e-12));
        CHECK(d.j1c == doctest::Approx(4 * s * ci(0, 1)).epsilon(1e-12));
        CHECK(d.j2c == doctest::Approx(4 * s * ci(1, 2)).epsilon(1e-12));
        CHECK(d.j12 == doctest::Approx(4 * s * ci(0, 2)).epsilon(1e-12));
        CHECK(d.ej1 == 15);
        CHECK(d.el_c == 0.55);
    }

    TEST_CASE("isolated node reduces to e^2/2C")
    {
        const DeviceEnergies d = energies_from_capacitances({80, 80, 40, 0, 0, 0}, {15, 15, 5, 0.5});
        CHECK(d.ec1 == doctest::Approx(1.602176634e-19 * 1.602176634e-19 / (2 * 80e-15) / 6.62607015e-34 * 1e-9));
        CHECK(d.j1c == 0);
        CHECK(d.j12 == 0);
    }

    TEST_CASE("invalid networks are rejected")
    {
        CHECK_THROWS_AS(energies_from_capacitances({0, 70, 40, 1, 1, 0}, {15, 12, 5, 0.5}), ConfigError);
        CHECK_THROWS_AS(energies_from_capacitances({70, 70, 40, -1, 1, 0}, {15, 12, 5, 0.5}), ConfigError);
        DeviceEnergies d = preset_device("device_a");
        d.ej1 = -1;
        CHECK_THROWS_AS(d.validate(), ConfigError);
    }

    TEST_CASE("presets")
    {
        for (const auto& n : preset_names())
            CHECK_NOTHROW(preset_device(n).validate());
        CHECK_THROWS_AS(preset_device("nope"), ConfigError);
        const auto r = preset_qubit2_range("device_a");
        REQUIRE(r);
        CHECK_THROWS_AS(preset_device("device_a", r->hi * 1.5), ConfigError);
        CHECK(preset_idle_flux("device_a").value() == doctest::Approx(0.0104));
        CHECK(!preset_idle_flux("fig2_model"));
    }
}

TEST_SUITE("circuit")
{
    TEST_CASE("transmon levels match Mathieu characteristic values")
    {
        for (auto [ec, ej] : {std::pair{0.2, 15.68}, std::pair{0.25, 8.0}, std::pair{0.3, 3.0}}) {
            const SubsystemSolution s = solve_transmon(ec, ej, 30, 6);
            const auto ref = mathieu_levels(ec, ej, 6);
            for (int k = 0; k < 6; ++k)
                CHECK(s.energies(k) == doctest::Approx(ref[k]).epsilon(1e-9));
        }
    }

    TEST_CASE("transmon charge elements are imaginary, antisymmetric and parity selective")
    {
        const SubsystemSolution s = solve_transmon(0.2, 15, 30, 6);
        const Eigen::MatrixXcd n = s.n_elems;
        CHECK(n.real().cwiseAbs().maxCoeff() < 1e-12);
        CHECK((n.imag() + n.imag().transpose()).cwiseAbs().maxCoeff() < 1e-12);
        for (int i = 0; i < 6; ++i)
            for (int j = i % 2; j < 6; j += 2)
                CHECK(std::abs(n(i, j)) < 1e-9);
        // Harmonic limit: |<0|n|1>| = (ej / 8ec)^(1/4) / sqrt(2).
        CHECK(std::abs(n(0, 1)) == doctest::Approx(std::pow(15.0 / 1.6, 0.25) / std::sqrt(2.0)).epsilon(0.02));
    }

    TEST_CASE("ej for a target frequency inverts the solver")
    {
        const double ej = transmon_ej_for_frequency(0.2, 4.4);
        CHECK(solve_transmon(0.2, ej, 30, 2).energies(1) == doctest::Approx(4.4).epsilon(1e-10));
    }

    TEST_CASE("fluxonium levels agree with an independent grid solver")
    {
        for (double phi : {0.0, 0.17, 0.5}) {
            const SubsystemSolution s = solve_fluxonium(0.9, 0.55, 4.8, phi, 100, 6);
            const Eigen::VectorXd g = grid_fluxonium(0.9, 0.55, 4.8, phi, 1601, 24.0);
            for (int k = 1; k < 6; ++k)
                CHECK(s.energies(k) == doctest::Approx(g(k) - g(0)).epsilon(1e-6));
            const SubsystemSolution p = solve_fluxonium(0.9, 0.55, 4.8, phi, 1201, 6, FluxoniumBasis::PhaseGrid);
            for (int k = 1; k < 6; ++k)
                CHECK(p.energies(k) == doctest::Approx(s.energies(k)).epsilon(1e-6));
        }
    }

    TEST_CASE("fluxonium spectrum is symmetric about half a flux quantum")
    {
        const SubsystemSolution a = solve_fluxonium(0.9, 0.55, 4.8, 0.2, 100, 5);
        const SubsystemSolution b = solve_fluxonium(0.9, 0.55, 4.8, -0.2, 100, 5);
        const SubsystemSolution c = solve_fluxonium(0.9, 0.55, 4.8, 0.8, 100, 5);
        for (int k = 0; k < 5; ++k) {
            CHECK(a.energies(k) == doctest::Approx(b.energies(k)).epsilon(1e-10));
            CHECK(a.energies(k) == doctest::Approx(c.energies(k)).epsilon(1e-10));
        }
    }

    TEST_CASE("oscillator operators")
    {
        const OscillatorOperators o = oscillator_operators(0.9, 0.55, 60);
        CHECK(o.omega == doctest::Approx(std::sqrt(8 * 0.55 * 0.9)));
        const double phi_zpf2 = 0.5 * std::sqrt(8 * 0.9 / 0.55);
        CHECK(o.cos_phi(0, 0) == doctest::Approx(std::exp(-phi_zpf2 / 2)).epsilon(1e-8));
        CHECK((o.cos_phi - o.cos_phi.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
}
