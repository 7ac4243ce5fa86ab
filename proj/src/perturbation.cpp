#include "tftsim/perturbation.hpp"

#include "tftsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tft {

std::string PathContribution::str() const
{
    if (kind == Kind::Counterterm)
        return start.str() + ":counterterm";
    return start.str() + "-" + via[0].str() + "-" + via[1].str() + "-" + via[2].str() + "-" + start.str();
}

namespace {

struct Corrections {
    double e2 = 0, e3 = 0, e4 = 0;
};

struct Expansion {
    Corrections per_state[4];
    std::vector<PathContribution> paths; // fourth-order terms, signed
};

const double kSign[4] = {1.0, -1.0, -1.0, 1.0}; // 000, 100, 001, 101

Expansion expand(const CompositeModel& model, double flux, int max_order, bool enumerate,
                 double degeneracy_tol)
{
    const SubsystemSolution cpl = model.coupler(flux);
    Eigen::MatrixXd v = model.hamiltonian(cpl);
    const Eigen::VectorXd e0 = model.bare_energies(cpl);
    v.diagonal().setZero();
    const int n = static_cast<int>(e0.size());

    // Sparse neighbor lists of the coupling.
    std::vector<std::vector<int>> nbr(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && std::abs(v(i, j)) > 1e-14)
                nbr[i].push_back(j);

    Expansion ex;
    for (int s = 0; s < 4; ++s) {
        const int k = model.index(computational_labels()[s]);
        Eigen::VectorXd inv(n); // 1 / (E_k - E_l), zero at l = k
        for (int l = 0; l < n; ++l) {
            if (l == k) {
                inv(l) = 0;
                continue;
            }
            const double d = e0(k) - e0(l);
            if (std::abs(d) < degeneracy_tol && std::abs(v(k, l)) > 0) {
                std::ostringstream os;
                os << "near-degenerate bare denominator between " << model.label(k).str() << " and "
                   << model.label(l).str() << " (" << d * 1e3 << " MHz) at flux " << flux;
                throw NumericError(os.str());
            }
            inv(l) = 1.0 / d;
        }
        // x = R V |k>
        const Eigen::VectorXd vk = v.col(k);
        const Eigen::VectorXd x = inv.cwiseProduct(vk);
        Corrections& c = ex.per_state[s];
        c.e2 = vk.dot(x);
        if (max_order >= 3)
            c.e3 = x.dot(v * x);
        if (max_order >= 4) {
            const Eigen::VectorXd wx = v * x;
            c.e4 = wx.dot(inv.cwiseProduct(wx)) - c.e2 * x.squaredNorm();
        }
        if (!enumerate || max_order < 4)
            continue;
        for (int l : nbr[k]) {
            const double a = vk(l) * inv(l);
            for (int m : nbr[l]) {
                if (m == k)
                    continue;
                const double b = a * v(l, m) * inv(m);
                for (int nn : nbr[m]) {
                    if (nn == k || vk(nn) == 0.0)
                        continue;
                    PathContribution p;
                    p.start = model.label(k);
                    p.via = {model.label(l), model.label(m), model.label(nn)};
                    p.delta_zz_mhz = kSign[s] * 1e3 * b * v(m, nn) * vk(nn) * inv(nn);
                    ex.paths.push_back(p);
                }
            }
        }
        PathContribution ct;
        ct.kind = PathContribution::Kind::Counterterm;
        ct.start = model.label(k);
        ct.delta_zz_mhz = -kSign[s] * 1e3 * c.e2 * x.squaredNorm();
        ex.paths.push_back(ct);
    }
    return ex;
}

double combine(const Expansion& ex, double Corrections::*field)
{
    double z = 0;
    for (int s = 0; s < 4; ++s)
        z += kSign[s] * (ex.per_state[s].*field);
    return 1e3 * z;
}

void sort_by_magnitude(std::vector<PathContribution>& p)
{
    std::stable_sort(p.begin(), p.end(), [](const PathContribution& a, const PathContribution& b) {
        return std::abs(a.delta_zz_mhz) > std::abs(b.delta_zz_mhz);
    });
}

SpectrumOptions spectrum_opts(const CompositeDims& d)
{
    SpectrumOptions o;
    o.dims = d;
    return o;
}

} // namespace

PerturbationReport zz_perturbative(const DeviceEnergies& dev, double flux, int max_order,
                                   const PerturbationOptions& opt)
{
    if (max_order < 2 || max_order > 4)
        throw ConfigError("zz_perturbative: max_order must be 2, 3 or 4");
    CompositeModel model(dev, spectrum_opts(opt.dims));
    Expansion ex = expand(model, flux, max_order, true, opt.degeneracy_tol_ghz);

    PerturbationReport r;
    r.flux = flux;
    r.max_order = max_order;
    r.order2 = combine(ex, &Corrections::e2);
    r.order3 = combine(ex, &Corrections::e3);
    r.order4 = combine(ex, &Corrections::e4);
    r.order4_branch101 = 1e3 * ex.per_state[3].e4;

    const ProductLabel l101{1, 0, 1};
    for (auto& p : ex.paths) {
        if (opt.grouping == PathGrouping::Branch101 && p.start != l101)
            continue;
        r.path_sum += p.delta_zz_mhz;
        r.path_table.push_back(p);
    }
    sort_by_magnitude(r.path_table);

    if (opt.remainder_extra_levels > 0) {
        CompositeDims big = opt.dims;
        big.q1 += opt.remainder_extra_levels;
        big.c += opt.remainder_extra_levels;
        big.q2 += opt.remainder_extra_levels;
        CompositeModel bigm(dev, spectrum_opts(big));
        Expansion eb = expand(bigm, flux, max_order, false, opt.degeneracy_tol_ghz);
        const double tot_small = r.order2 + r.order3 + r.order4;
        const double tot_big = combine(eb, &Corrections::e2) + combine(eb, &Corrections::e3) +
                               combine(eb, &Corrections::e4);
        r.remainder = tot_big - tot_small;
    }
    return r;
}

std::vector<PathContribution> fourth_order_paths(const DeviceEnergies& dev, double flux, int top_n,
                                                 const PerturbationOptions& opt)
{
    if (top_n < 1)
        throw ConfigError("fourth_order_paths: top_n must be positive");
    PerturbationOptions o = opt;
    o.remainder_extra_levels = 0;
    PerturbationReport r = zz_perturbative(dev, flux, 4, o);
    if (static_cast<int>(r.path_table.size()) > top_n)
        r.path_table.resize(top_n);
    return r.path_table;
}

} // namespace tft
