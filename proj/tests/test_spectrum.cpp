#include <doctest.h>

#include "tftsim/circuit.hpp"
#include "tftsim/errors.hpp"
#include "tftsim/perturbation.hpp"
#include "tftsim/spectrum.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <complex>

using namespace tft;

namespace {

// Charge-basis transmon: energies and <i|n|j>, lowest `keep` levels.
void transmon(double ec, double ej, int keep, Eigen::VectorXd& e, Eigen::MatrixXd& n)
{
    const int cut = 30, dim = 2 * cut + 1;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
        h(i, i) = 4 * ec * (i - cut) * (i - cut);
        if (i + 1 < dim)
            h(i, i + 1) = h(i + 1, i) = -ej / 2;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    const Eigen::MatrixXd v = es.eigenvectors().leftCols(keep);
    Eigen::VectorXd charge(dim);
    for (int i = 0; i < dim; ++i)
        charge(i) = i - cut;
    e = es.eigenvalues().head(keep);
    n = v.transpose() * charge.asDiagonal() * v;
}

// ZZ of two transmons coupled directly through j12 n1 n2, with states picked by overlap.
double two_transmon_zz_mhz(const DeviceEnergies& d)
{
    const int k = 8;
    Eigen::VectorXd e1, e2;
    Eigen::MatrixXd n1, n2;
    transmon(d.ec1, d.ej1, k, e1, n1);
    transmon(d.ec2, d.ej2, k, e2, n2);
    Eigen::MatrixXd h = Eigen::kroneckerProduct(n1, n2).eval() * d.j12;
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            h(a * k + b, a * k + b) += e1(a) + e2(b);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    auto level = [&](int a, int b) {
        Eigen::Index i;
        es.eigenvectors().row(a * k + b).cwiseAbs().maxCoeff(&i);
        return es.eigenvalues()(i);
    };
    return 1e3 * (level(1, 1) - level(1, 0) - level(0, 1) + level(0, 0));
}

} // namespace

TEST_SUITE("spectrum")
{
    TEST_CASE("product labels")
    {
        CHECK(parse_label("101") == ProductLabel{1, 0, 1});
        CHECK(parse_label("030").str() == "030");
        CHECK_THROWS_AS(parse_label("1x1"), ConfigError);
        CompositeModel m(preset_device("fig2_model"));
        for (int i : {0, 7, 123, m.dims().size() - 1})
            CHECK(m.index(m.label(i)) == i);
    }

    TEST_CASE("uncoupled spectrum is the sum of subsystem levels")
    {
        DeviceEnergies d = preset_device("fig2_model");
        d.j1c = d.j2c = d.j12 = 0;
        const CompositeModel m(d);
        const LabeledSpectrum s = labeled_spectrum(m, 0.1, LabelMode::MaxOverlap);
        const SubsystemSolution c = m.coupler(0.1);
        for (int i = 0; i < 20; ++i) {
            const ProductLabel l = s.labels[i];
            const double bare = m.qubit1().energies(l.n1) + c.energies(l.nc) + m.qubit2().energies(l.n2);
            CHECK(s.energies(i) - s.energies(0) == doctest::Approx(bare).epsilon(1e-10));
            CHECK(s.overlaps[i] == doctest::Approx(1.0));
        }
        CHECK(std::abs(zz_at(d, 0.1).zeta_mhz) < 1e-9);
    }

    TEST_CASE("Hamiltonian is symmetric")
    {
        const Eigen::MatrixXd h = build_hamiltonian(preset_device("device_a"), 0.07);
        CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    }

    TEST_CASE("direct transmon coupling matches an independent two-transmon model")
    {
        DeviceEnergies d = preset_device("fig2_model");
        d.j1c = d.j2c = 0;
        d.j12 = 0.02;
        CHECK(zz_at(d, 0.0).zeta_mhz == doctest::Approx(two_transmon_zz_mhz(d)).epsilon(1e-6));
    }

    TEST_CASE("ZZ is even in coupler flux and periodic")
    {
        const DeviceEnergies d = preset_device("fig2_model");
        const double a = zz_at(d, 0.06).zeta_mhz;
        CHECK(zz_at(d, -0.06).zeta_mhz == doctest::Approx(a).epsilon(1e-8));
        CHECK(zz_at(d, 1.06).zeta_mhz == doctest::Approx(a).epsilon(1e-8));
    }

    TEST_CASE("zero-ZZ search and crossing location")
    {
        const DeviceEnergies d = preset_device("fig2_model");
        const ZeroZZ z = find_zero_zz(d, 0.0, 0.05);
        CHECK(std::abs(z.zeta_mhz) < 1e-4);
        CHECK(std::abs(zz_at(d, z.flux).zeta_mhz) < 1e-4);
        CHECK_THROWS_AS(find_zero_zz(d, 0.06, 0.1), NumericError);
    }

    TEST_CASE("adiabatic labels follow the branch through a sweep")
    {
        const CompositeModel m(preset_device("fig2_model"));
        LabeledSpectrum prev = labeled_spectrum(m, 0.0, LabelMode::MaxOverlap);
        for (double f = 0.02; f <= 0.1001; f += 0.02) {
            LabeledSpectrum s = labeled_spectrum(m, f, LabelMode::AdiabaticContinuation, &prev);
            for (const auto& l : computational_labels())
                CHECK(s.find(l) >= 0);
            CHECK(s.find(ProductLabel{0, 0, 0}) == 0);
            prev = std::move(s);
        }
    }

    TEST_CASE("spectrum fit recovers a perturbed parameter")
    {
        const DeviceEnergies truth = preset_device("fig2_model");
        const CompositeModel m(truth);
        std::vector<Transition> data;
        for (double f : {0.0, 0.15, 0.3}) {
            const LabeledSpectrum s = labeled_spectrum(m, f, LabelMode::MaxOverlap);
            for (auto l : {ProductLabel{0, 1, 0}, ProductLabel{1, 0, 0}})
                data.push_back({f, s.energy(l) - s.energy({0, 0, 0}), {0, 0, 0}, l});
        }
        DeviceEnergies start = truth;
        start.ejc *= 1.03;
        const SpectrumFit fit = fit_parameters(data, start, {FitParam::ejc});
        CHECK(fit.converged);
        CHECK(fit.device.ejc == doctest::Approx(truth.ejc).epsilon(1e-5));
        CHECK(fit.residual_rms_ghz < 1e-5);
    }
}

TEST_SUITE("perturbation")
{
    TEST_CASE("series converges to the exact ZZ as the couplings shrink")
    {
        const DeviceEnergies base = preset_device("fig2_model");
        PerturbationOptions po;
        po.remainder_extra_levels = 0;
        auto err = [&](double lambda, double& o2_rel) {
            DeviceEnergies d = base;
            d.j1c *= lambda;
            d.j2c *= lambda;
            d.j12 *= lambda;
            const PerturbationReport r = zz_perturbative(d, 0.05, 4, po);
            const double exact = zz_at(d, 0.05).zeta_mhz;
            o2_rel = std::abs(r.order2 - exact) / std::abs(exact);
            return std::abs(r.order2 + r.order3 + r.order4 - exact);
        };
        double o2a, o2b;
        const double e1 = err(0.2, o2a), e2 = err(0.1, o2b);
        // Truncation after fourth order leaves at least a fifth-power remainder.
        CHECK(e1 / e2 > 24);
        // Second order alone is off by a first-order relative amount.
        CHECK(o2a / o2b > 1.6);
    }

    TEST_CASE("order-4 paths sum to the fourth-order ZZ")
    {
        PerturbationOptions po;
        po.remainder_extra_levels = 0;
        const PerturbationReport r = zz_perturbative(preset_device("fig2_model"), 0.0, 4, po);
        CHECK(r.path_sum == doctest::Approx(r.order4).epsilon(1e-9));
        bool sorted = true, named = true;
        int paths = 0;
        for (size_t i = 0; i < r.path_table.size(); ++i) {
            const auto& p = r.path_table[i];
            if (i > 0)
                sorted &= std::abs(r.path_table[i - 1].delta_zz_mhz) >= std::abs(p.delta_zz_mhz);
            if (p.kind == PathContribution::Kind::Path) {
                named &= p.str().size() == 19;
                ++paths;
            }
        }
        CHECK(sorted);
        CHECK(named);
        CHECK(paths > 7);
    }

    TEST_CASE("third order vanishes without the direct transmon coupling")
    {
        DeviceEnergies d = preset_device("fig2_model");
        d.j12 = 0;
        PerturbationOptions po;
        po.remainder_extra_levels = 0;
        CHECK(std::abs(zz_perturbative(d, 0.0, 4, po).order3) < 1e-9);
        CHECK(std::abs(zz_perturbative(d, 0.08, 3, po).order3) < 1e-9);
    }

    TEST_CASE("invalid order")
    {
        CHECK_THROWS(zz_perturbative(preset_device("fig2_model"), 0.0, 5));
    }
}
