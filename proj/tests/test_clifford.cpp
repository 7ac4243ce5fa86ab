#include <doctest.h>

#include "tftsim/clifford.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <complex>
#include <random>

using namespace tft;

namespace {

// |Tr(A† B)| = d exactly when A and B agree up to a global phase.
bool same_up_to_phase(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b)
{
    return std::abs(std::abs((a.adjoint() * b).trace()) - a.rows()) < 1e-9;
}

Eigen::Matrix2cd rot(char axis, double angle)
{
    const std::complex<double> i(0, 1);
    Eigen::Matrix2cd p;
    if (axis == 'x')
        p << 0, 1, 1, 0;
    else
        p << 0, -i, i, 0;
    return std::cos(angle / 2) * Eigen::Matrix2cd::Identity() - i * std::sin(angle / 2) * p;
}

Eigen::Matrix2cd word_unitary(const std::vector<Gate1>& w)
{
    Eigen::Matrix2cd u = Eigen::Matrix2cd::Identity();
    for (Gate1 g : w) {
        Eigen::Matrix2cd r;
        switch (g) {
        case Gate1::I: r.setIdentity(); break;
        case Gate1::X: r = rot('x', M_PI); break;
        case Gate1::Xm: r = rot('x', -M_PI); break;
        case Gate1::Y: r = rot('y', M_PI); break;
        case Gate1::Ym: r = rot('y', -M_PI); break;
        case Gate1::X2: r = rot('x', M_PI / 2); break;
        case Gate1::X2m: r = rot('x', -M_PI / 2); break;
        case Gate1::Y2: r = rot('y', M_PI / 2); break;
        case Gate1::Y2m: r = rot('y', -M_PI / 2); break;
        }
        u = r * u;
    }
    return u;
}

} // namespace

TEST_SUITE("clifford")
{
    TEST_CASE("single-qubit group")
    {
        const auto& g = Clifford1Group::instance();
        REQUIRE(g.size() == 24);
        for (int a = 0; a < 24; ++a) {
            CHECK(same_up_to_phase(word_unitary(g.decomposition(a)), g.unitary(a)));
            CHECK(g.compose(a, g.inverse(a)) == g.identity());
            CHECK(g.decomposition(a).size() <= 3);
            for (int b = 0; b < 24; ++b)
                CHECK(same_up_to_phase(g.unitary(g.compose(a, b)), g.unitary(a) * g.unitary(b)));
        }
        CHECK(g.find(rot('x', 0.3)) == -1);
    }

    TEST_CASE("two-qubit group structure")
    {
        const auto& g = Clifford2Group::instance();
        REQUIRE(g.size() == 11520);
        CHECK(g.class_sizes() == std::array<int, 4>{576, 5184, 5184, 576});
        const int id = g.find(Eigen::Matrix4cd::Identity());
        REQUIRE(id >= 0);
        CHECK(g.find(cz_unitary()) >= 0);
        CHECK(g.cz_count(g.find(cz_unitary())) == 1);
    }

    TEST_CASE("two-qubit decompositions, inverses and products")
    {
        const auto& g1 = Clifford1Group::instance();
        const auto& g = Clifford2Group::instance();
        const int id = g.find(Eigen::Matrix4cd::Identity());
        Eigen::Matrix4cd cz = Eigen::Matrix4cd::Identity();
        cz(3, 3) = -1;
        for (int i = 0; i < g.size(); i += 37) {
            Eigen::Matrix4cd u = Eigen::Matrix4cd::Identity();
            int czs = 0;
            for (const auto& op : g.decomposition(i)) {
                if (op.kind == NativeOp::CZ) {
                    u = cz * u;
                    ++czs;
                } else {
                    u = Eigen::kroneckerProduct(g1.unitary(op.c1), g1.unitary(op.c2)).eval() * u;
                }
            }
            CHECK(same_up_to_phase(u, g.unitary(i)));
            CHECK(czs == g.cz_count(i));
            CHECK(g.compose(i, g.inverse(i)) == id);
        }
        std::mt19937_64 rng(11);
        for (int k = 0; k < 50; ++k) {
            const int a = g.sample(rng), b = g.sample(rng);
            CHECK(same_up_to_phase(g.unitary(g.compose(a, b)), g.unitary(a) * g.unitary(b)));
        }
    }

    TEST_CASE("sampling covers the group uniformly")
    {
        const auto& g = Clifford2Group::instance();
        std::mt19937_64 rng(5);
        std::array<int, 4> counts{};
        const int n = 40000;
        for (int k = 0; k < n; ++k)
            ++counts[g.cz_count(g.sample(rng))];
        const auto sizes = g.class_sizes();
        for (int c = 0; c < 4; ++c) {
            const double expect = n * sizes[c] / 11520.0;
            CHECK(std::abs(counts[c] - expect) < 5 * std::sqrt(expect));
        }
    }
}
