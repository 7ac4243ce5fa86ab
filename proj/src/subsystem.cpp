#include "tftsim/subsystem.hpp"

#include "tftsim/errors.hpp"
#include "tftsim/linalg.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

namespace tft {

namespace {

constexpr double kConvergenceTolGhz = 1e-6; // 1 kHz

SubsystemSolution transmon_raw(double ec, double ej, int cutoff, int kept)
{
    const int dim = 2 * cutoff + 1;
    if (kept > dim)
        throw ConfigError("transmon: kept_levels exceeds the charge basis size");
    Eigen::VectorXd diag(dim);
    for (int i = 0; i < dim; ++i) {
        const double n = i - cutoff;
        diag(i) = 4.0 * ec * n * n;
    }
    Eigen::VectorXd off = Eigen::VectorXd::Constant(dim - 1, -0.5 * ej);
    EigenPairs ep = eigh_tridiagonal(diag, off, kept);
    fix_column_signs(ep.vectors);

    SubsystemSolution s;
    s.ground_energy = ep.values(0);
    s.energies = ep.values.array() - ep.values(0);
    s.vectors = ep.vectors;
    s.kept_levels = kept;
    s.basis_kind = "charge";
    s.basis_size = dim;

    Eigen::VectorXd ncharge(dim);
    for (int i = 0; i < dim; ++i)
        ncharge(i) = i - cutoff;
    const Eigen::MatrixXd nraw = ep.vectors.transpose() * ncharge.asDiagonal() * ep.vectors;
    // Gauge |k> -> i^k |k>: element (j,k) picks up i^(k-j).
    static const std::complex<double> ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    s.n_elems.resize(kept, kept);
    for (int j = 0; j < kept; ++j)
        for (int k = 0; k < kept; ++k)
            s.n_elems(j, k) = ipow[((k - j) % 4 + 4) % 4] * nraw(j, k);
    return s;
}

double grid_half_width(double el, double ejc)
{
    return 6.0 + std::sqrt(2.0 * (ejc + 40.0) / el);
}

// Three-point finite differences on a uniform grid; returns the lowest `kept` pairs.
EigenPairs grid_solve(double ecc, double el, double ejc, double phi_ext, int points, int kept,
                      double& h_out)
{
    const double half = grid_half_width(el, ejc);
    const double h = 2.0 * half / (points - 1);
    const double kin = 4.0 * ecc / (h * h);
    const double shift = 2.0 * std::numbers::pi * phi_ext;
    Eigen::VectorXd diag(points);
    for (int i = 0; i < points; ++i) {
        const double phi = -half + i * h;
        diag(i) = 2.0 * kin + 0.5 * el * phi * phi - ejc * std::cos(phi - shift);
    }
    Eigen::VectorXd off = Eigen::VectorXd::Constant(points - 1, -kin);
    h_out = h;
    return eigh_tridiagonal(diag, off, kept);
}

SubsystemSolution fluxonium_grid(double ecc, double el, double ejc, double phi_ext, int points,
                                 int kept)
{
    if (points % 2 == 0)
        throw ConfigError("phase grid needs an odd number of points");
    double h = 0, h2 = 0;
    EigenPairs fine = grid_solve(ecc, el, ejc, phi_ext, points, kept, h);
    EigenPairs coarse = grid_solve(ecc, el, ejc, phi_ext, (points + 1) / 2, kept, h2);
    // Richardson extrapolation removes the O(h^2) discretization error.
    Eigen::VectorXd e = (4.0 * fine.values - coarse.values) / 3.0;
    fix_column_signs(fine.vectors);

    SubsystemSolution s;
    s.ground_energy = e(0);
    s.energies = e.array() - e(0);
    s.vectors = fine.vectors;
    s.kept_levels = kept;
    s.basis_kind = "phase_grid";
    s.basis_size = points;

    // n = -i d/dphi with central differences.
    Eigen::MatrixXd deriv(points, kept);
    for (int k = 0; k < kept; ++k) {
        for (int i = 0; i < points; ++i) {
            const double up = i + 1 < points ? fine.vectors(i + 1, k) : 0.0;
            const double dn = i > 0 ? fine.vectors(i - 1, k) : 0.0;
            deriv(i, k) = (up - dn) / (2.0 * h);
        }
    }
    const Eigen::MatrixXd d = fine.vectors.transpose() * deriv;
    const Eigen::MatrixXd anti = 0.5 * (d - d.transpose());
    s.n_elems = std::complex<double>(0, -1) * anti.cast<std::complex<double>>();
    return s;
}

SubsystemSolution fluxonium_ho(double ecc, double el, double ejc, double phi_ext, int dim, int kept)
{
    const OscillatorOperators ops = oscillator_operators(ecc, el, dim);
    const double a = 2.0 * std::numbers::pi * phi_ext;
    Eigen::MatrixXd h = -ejc * (std::cos(a) * ops.cos_phi + std::sin(a) * ops.sin_phi);
    for (int i = 0; i < dim; ++i)
        h(i, i) += ops.omega * (i + 0.5);
    EigenPairs ep = eigh_lowest(h, kept);
    fix_column_signs(ep.vectors);

    SubsystemSolution s;
    s.ground_energy = ep.values(0);
    s.energies = ep.values.array() - ep.values(0);
    s.vectors = ep.vectors;
    s.kept_levels = kept;
    s.basis_kind = "harmonic_oscillator";
    s.basis_size = dim;
    const Eigen::MatrixXd nimag = ep.vectors.transpose() * ops.n_imag * ep.vectors;
    s.n_elems = std::complex<double>(0, 1) * nimag.cast<std::complex<double>>();
    return s;
}

void require_converged(const SubsystemSolution& a, const SubsystemSolution& b, const char* what,
                       int suggested)
{
    const double diff = (a.energies - b.energies).cwiseAbs().maxCoeff();
    if (diff > kConvergenceTolGhz) {
        std::ostringstream os;
        os << what << " truncation not converged: kept energies move by " << diff * 1e6
           << " kHz at 1.5x basis; try basis size " << suggested;
        throw NumericError(os.str());
    }
}

} // namespace

OscillatorOperators oscillator_operators(double ecc, double el, int dim)
{
    if (ecc <= 0 || el <= 0 || dim < 2)
        throw ConfigError("oscillator_operators: invalid parameters");
    OscillatorOperators ops;
    ops.omega = std::sqrt(8.0 * el * ecc);
    const double phizpf = std::pow(2.0 * ecc / el, 0.25);
    const double nzpf = std::pow(el / (32.0 * ecc), 0.25);
    const double x = phizpf * phizpf;
    ops.cos_phi.setZero(dim, dim);
    ops.sin_phi.setZero(dim, dim);
    // <m|exp(i phizpf (a + a^dag))|n> = e^{-x/2} sqrt(lo!/hi!) (i phizpf)^k L_lo^(k)(x), k = |m-n|.
    for (int m = 0; m < dim; ++m) {
        for (int n = m; n < dim; ++n) {
            const int k = n - m;
            const double logmag = -0.5 * x + 0.5 * (std::lgamma(m + 1.0) - std::lgamma(n + 1.0)) +
                                  k * std::log(phizpf);
            const double val = std::exp(logmag) *
                               std::assoc_laguerre(static_cast<unsigned>(m), static_cast<unsigned>(k), x);
            // Multiply by i^k: even k feeds cos, odd k feeds sin.
            const int r = k % 4;
            const double sgn = (r == 0 || r == 1) ? 1.0 : -1.0;
            if (k % 2 == 0) {
                ops.cos_phi(m, n) = ops.cos_phi(n, m) = sgn * val;
            } else {
                ops.sin_phi(m, n) = ops.sin_phi(n, m) = sgn * val;
            }
        }
    }
    // n = i nzpf (a^dag - a)
    ops.n_imag.setZero(dim, dim);
    for (int m = 0; m + 1 < dim; ++m) {
        const double s = nzpf * std::sqrt(m + 1.0);
        ops.n_imag(m + 1, m) = s;
        ops.n_imag(m, m + 1) = -s;
    }
    return ops;
}

SubsystemSolution solve_transmon(double ec, double ej, int charge_cutoff, int kept_levels,
                                 bool check_convergence)
{
    if (!(ec > 0) || ej < 0)
        throw ConfigError("transmon: ec must be positive and ej non-negative");
    if (charge_cutoff < 10)
        throw ConfigError("transmon: charge_cutoff must be at least 10");
    if (kept_levels < 1)
        throw ConfigError("transmon: kept_levels must be positive");
    SubsystemSolution s = transmon_raw(ec, ej, charge_cutoff, kept_levels);
    if (check_convergence) {
        const int bigger = charge_cutoff * 3 / 2;
        require_converged(s, transmon_raw(ec, ej, bigger, kept_levels), "transmon", 2 * charge_cutoff);
    }
    return s;
}

SubsystemSolution solve_fluxonium(double ecc, double el, double ejc, double phi_ext, int basis_size,
                                  int kept_levels, FluxoniumBasis basis, bool check_convergence)
{
    if (!(ecc > 0) || !(el > 0) || ejc < 0)
        throw ConfigError("fluxonium: ecc and el must be positive, ejc non-negative");
    if (kept_levels < 1 || kept_levels > basis_size)
        throw ConfigError("fluxonium: kept_levels must be in [1, basis size]");
    if (basis == FluxoniumBasis::HarmonicOscillator) {
        if (basis_size < 40)
            throw ConfigError("fluxonium: oscillator basis_dim must be at least 40");
        SubsystemSolution s = fluxonium_ho(ecc, el, ejc, phi_ext, basis_size, kept_levels);
        if (check_convergence) {
            const int bigger = basis_size * 3 / 2;
            require_converged(s, fluxonium_ho(ecc, el, ejc, phi_ext, bigger, kept_levels), "fluxonium",
                              2 * basis_size);
        }
        return s;
    }
    if (basis_size < 101)
        throw ConfigError("fluxonium: phase grid needs at least 101 points");
    SubsystemSolution s = fluxonium_grid(ecc, el, ejc, phi_ext, basis_size, kept_levels);
    if (check_convergence) {
        const int bigger = (basis_size * 3 / 2) | 1;
        require_converged(s, fluxonium_grid(ecc, el, ejc, phi_ext, bigger, kept_levels), "fluxonium",
                          2 * basis_size + 1);
    }
    return s;
}

Eigen::MatrixXcd charge_elements(const SubsystemSolution& sol)
{
    return sol.n_elems.topLeftCorner(sol.kept_levels, sol.kept_levels);
}

double transmon_ej_for_frequency(double ec, double f01, int charge_cutoff)
{
    if (!(ec > 0) || !(f01 > 0))
        throw ConfigError("transmon_ej_for_frequency: ec and f01 must be positive");
    auto f = [&](double ej) {
        return transmon_raw(ec, ej, charge_cutoff, 2).energies(1) - f01;
    };
    double lo = 1e-3, hi = 1000.0;
    if (f(lo) > 0 || f(hi) < 0)
        throw ConfigError("transmon_ej_for_frequency: target frequency unreachable");
    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(a - b) < 1e-13 * std::max(1.0, std::abs(a)); };
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
    return 0.5 * (a + b);
}

} // namespace tft
