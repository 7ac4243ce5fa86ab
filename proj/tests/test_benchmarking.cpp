#include <doctest.h>

#include "tftsim/benchmarking.hpp"
#include "tftsim/errors.hpp"

#include <cmath>
#include <filesystem>

using namespace tft;

TEST_SUITE("benchmarking")
{
    TEST_CASE("error conversions")
    {
        CHECK(depolarizing_for_error(4e-3, 4) == doctest::Approx(4e-3 * 4 / 3));
        CHECK(depolarizing_for_error(1e-3, 2) == doctest::Approx(2e-3));
        CHECK(interleaved_error(0.99, 0.985, 4).r == doctest::Approx(0.75 * (1 - 0.985 / 0.99)));
        CHECK(interleaved_error(0.99, 0.995, 4).negative);
    }

    TEST_CASE("exponential fit recovers exact data")
    {
        const std::vector<int> m{1, 5, 10, 20, 35, 50, 75, 100, 125, 150};
        std::vector<double> y;
        for (int k : m)
            y.push_back(0.72 * std::pow(0.987, k) + 0.25);
        const RBFit f = fit_exponential(m, y, 0.25);
        CHECK(f.valid);
        CHECK(!f.bypassed);
        CHECK(f.p == doctest::Approx(0.987).epsilon(1e-9));
        CHECK(f.a == doctest::Approx(0.72).epsilon(1e-8));
        CHECK(f.b == doctest::Approx(0.25).epsilon(1e-8));

        const RBFit flat = fit_exponential(m, std::vector<double>(m.size(), 1.0), 0.25);
        CHECK(flat.bypassed);
        CHECK(flat.p == 1.0);
    }

    TEST_CASE("noiseless sequences survive with certainty")
    {
        RBSpec s;
        s.lengths = {1, 10, 50};
        s.sequences = 5;
        const RBDataset d = run_rb(s, NoiseModel{});
        for (double v : d.mean)
            CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(d.fit.p - 1) < 1e-12);
        s.interleave_cz = true;
        CHECK(run_rb(s, NoiseModel{}).mean.back() == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("single-qubit depolarizing decay rate")
    {
        NoiseModel n;
        n.depolarizing_1q = 0.01;
        RBSpec s;
        s.n_qubits = 1;
        s.sequences = 10;
        const RBDataset d = run_rb(s, n);
        CHECK(d.fit.p == doctest::Approx(0.99).epsilon(1e-6));
        CHECK(d.error == doctest::Approx(0.005).epsilon(1e-4));
    }

    TEST_CASE("relaxation-limited single-qubit error is t/3T1")
    {
        NoiseModel n;
        n.qubits[0] = {5.0, 0.0};
        n.gate_time_1q = 40;
        RBSpec s;
        s.n_qubits = 1;
        s.sequences = 30;
        s.seed = 4;
        const RBDataset d = run_rb(s, n);
        CHECK(d.error == doctest::Approx(40e-3 / (3 * 5.0)).epsilon(0.1));
    }

    TEST_CASE("seeded runs are reproducible and thread independent")
    {
        NoiseModel n;
        n.depolarizing_cz = 0.01;
        RBSpec s;
        s.lengths = {1, 5, 10, 20};
        s.sequences = 6;
        s.seed = 99;
        const RBDataset a = run_rb(s, n);
        s.threads = 3;
        const RBDataset b = run_rb(s, n);
        CHECK(a.mean == b.mean);
        s.seed = 100;
        CHECK(run_rb(s, n).mean != a.mean);
    }

    TEST_CASE("leakage appears in the computational population")
    {
        NoiseModel n;
        n.leakage_cz = 2e-3;
        RBSpec s;
        s.lengths = {1, 20, 60, 120};
        s.sequences = 8;
        const LRBReport r = leakage_rb(s, n);
        CHECK(r.l1_cz > 0);
        CHECK(r.l1_cz == doctest::Approx(2e-3).epsilon(0.2));
    }

    TEST_CASE("invalid noise models")
    {
        NoiseModel n;
        n.depolarizing_cz = 1.5;
        CHECK_THROWS_AS(n.validate(), ConfigError);
        NoiseModel m;
        m.qubits[0] = {10.0, 30.0};
        CHECK_THROWS_AS(m.validate(), ConfigError);
    }

    TEST_CASE("CSV round trip")
    {
        RBSpec s;
        s.lengths = {1, 5, 10, 20};
        s.sequences = 3;
        NoiseModel n;
        n.depolarizing_cz = 0.02;
        const RBDataset d = run_rb(s, n);
        const auto path = std::filesystem::temp_directory_path() / "tftsim_rb_test.csv";
        write_rb_csv(path.string(), d);
        const RBDataset r = read_rb_csv(path.string(), 2);
        std::filesystem::remove(path);
        REQUIRE(r.lengths == d.lengths);
        for (size_t i = 0; i < d.mean.size(); ++i)
            CHECK(r.mean[i] == doctest::Approx(d.mean[i]).epsilon(1e-11));
    }
}
