#include "tftsim/dynamics.hpp"

#include "tftsim/errors.hpp"
#include "tftsim/linalg.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <future>
#include <numbers>
#include <sstream>

namespace tft {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
using cd = std::complex<double>;

Eigen::MatrixXd kron3(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& c)
{
    auto kron = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        Eigen::MatrixXd out(x.rows() * y.rows(), x.cols() * y.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j)
                out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
        return out;
    };
    return kron(kron(a, b), c);
}

} // namespace

double wrap_phase(double x)
{
    double y = std::remainder(x, kTwoPi);
    if (y <= -std::numbers::pi)
        y += kTwoPi;
    return y;
}

DynamicsModel::DynamicsModel(const DeviceEnergies& dev, double frame_flux, double flux_lo, double flux_hi,
                             DynamicsOptions opt)
    : opt_(opt), frame_flux_(frame_flux)
{
    dev.validate();
    if (opt_.transmon_levels < 2 || opt_.coupler_levels < 4 || opt_.substeps < 1)
        throw ConfigError("dynamics: need >= 2 transmon levels, >= 4 coupler levels, >= 1 substep");
    if (opt_.oscillator_dim < 40 || opt_.coupler_levels > opt_.oscillator_dim)
        throw ConfigError("dynamics: oscillator_dim must be >= 40 and >= coupler_levels");
    const int t = opt_.transmon_levels, kc = opt_.coupler_levels;
    if (!(opt_.energy_cut_ghz > 0) || opt_.basis_fluxes < 2 || !(opt_.basis_tol > 0))
        throw ConfigError("dynamics: energy_cut_ghz and basis_tol must be positive, basis_fluxes >= 2");
    if (!(flux_hi >= flux_lo))
        throw ConfigError("dynamics: flux span is empty");

    const SubsystemSolution q1 = solve_transmon(dev.ec1, dev.ej1, 30, t);
    const SubsystemSolution q2 = solve_transmon(dev.ec2, dev.ej2, 30, t);
    const Eigen::MatrixXd m1 = q1.n_elems.imag();
    const Eigen::MatrixXd m2 = q2.n_elems.imag();

    const OscillatorOperators ops = oscillator_operators(dev.ecc, dev.el_c, opt_.oscillator_dim);
    const SubsystemSolution c = solve_fluxonium(dev.ecc, dev.el_c, dev.ejc, frame_flux, opt_.oscillator_dim,
                                                kc, FluxoniumBasis::HarmonicOscillator, false);
    const Eigen::MatrixXd& vc = c.vectors;
    Eigen::VectorXd osc(opt_.oscillator_dim);
    for (int i = 0; i < opt_.oscillator_dim; ++i)
        osc(i) = ops.omega * (i + 0.5);
    Eigen::MatrixXd a0 = vc.transpose() * osc.asDiagonal() * vc;
    a0.diagonal().array() -= c.ground_energy;
    const Eigen::MatrixXd cc = vc.transpose() * ops.cos_phi * vc;
    const Eigen::MatrixXd ss = vc.transpose() * ops.sin_phi * vc;
    const Eigen::MatrixXd nc = vc.transpose() * ops.n_imag * vc;

    const Eigen::MatrixXd i1 = Eigen::MatrixXd::Identity(t, t);
    const Eigen::MatrixXd ic = Eigen::MatrixXd::Identity(kc, kc);
    const Eigen::MatrixXd e1 = q1.energies.asDiagonal();
    const Eigen::MatrixXd e2 = q2.energies.asDiagonal();
    Eigen::MatrixXd h0 = kron3(e1, ic, i1) + kron3(i1, a0, i1) + kron3(i1, ic, e2) -
                         dev.j1c * kron3(m1, nc, i1) - dev.j2c * kron3(i1, nc, m2) -
                         dev.j12 * kron3(m1, ic, m2);
    const Eigen::MatrixXd hcos = -dev.ejc * kron3(i1, cc, i1);
    const Eigen::MatrixXd hsin = -dev.ejc * kron3(i1, ss, i1);
    const double a = kTwoPi * frame_flux;
    const Eigen::MatrixXd hframe = h0 + std::cos(a) * hcos + std::sin(a) * hsin;

    const LabeledSpectrum spec = labeled_spectrum(hframe, CompositeDims{t, kc, t}, LabelMode::MaxOverlap);
    const double cut = spec.energies(0) + opt_.energy_cut_ghz;

    // Snapshot basis: low-lying eigenvectors at the frame flux and across the span.
    std::vector<Eigen::VectorXd> snaps;
    auto add_snapshots = [&](const Eigen::VectorXd& e, const Eigen::MatrixXd& v) {
        for (Eigen::Index i = 0; i < e.size() && e(i) < cut; ++i)
            snaps.push_back(v.col(i));
    };
    add_snapshots(spec.energies, spec.eigenvectors);
    for (int k = 0; k < opt_.basis_fluxes; ++k) {
        const double f = flux_lo + (flux_hi - flux_lo) * k / (opt_.basis_fluxes - 1);
        const double af = kTwoPi * f;
        const Eigen::MatrixXd hf = h0 + std::cos(af) * hcos + std::sin(af) * hsin;
        const int want = std::min(static_cast<int>(hf.rows()), static_cast<int>(snaps.size()) / (k + 1) + 40);
        EigenPairs ep = eigh_lowest(hf, want);
        if (ep.values(want - 1) < cut && want < hf.rows())
            ep = eigh(hf);
        add_snapshots(ep.values, ep.vectors);
    }
    Eigen::MatrixXd sm(hframe.rows(), static_cast<Eigen::Index>(snaps.size()));
    for (size_t i = 0; i < snaps.size(); ++i)
        sm.col(static_cast<Eigen::Index>(i)) = snaps[i];
    const EigenPairs gram = eigh(sm * sm.transpose());
    int keep = 0;
    for (Eigen::Index i = 0; i < gram.values.size(); ++i)
        keep += gram.values(i) > opt_.basis_tol;
    const Eigen::MatrixXd basis = gram.vectors.rightCols(keep);

    const EigenPairs red = eigh(basis.transpose() * hframe * basis);
    const Eigen::MatrixXd p = basis * red.vectors;
    h0_ = p.transpose() * h0 * p;
    hc_ = p.transpose() * hcos * p;
    hs_ = p.transpose() * hsin * p;
    frame_energies_ = red.values;
    const Eigen::MatrixXd ov = (spec.eigenvectors.transpose() * p).cwiseAbs2();
    labels_.resize(keep);
    weights_.resize(keep);
    for (int j = 0; j < keep; ++j) {
        Eigen::Index i;
        const double w = ov.col(j).maxCoeff(&i);
        labels_[j] = spec.labels[i];
        weights_[j] = w * spec.overlaps[i];
    }
    const auto& comp = computational_labels();
    for (int s = 0; s < 4; ++s) {
        comp_[s] = index(comp[s]);
        if (comp_[s] < 0)
            throw ConfigError("dynamics: computational state " + comp[s].str() +
                              " outside the reduced basis; raise energy_cut_ghz");
    }
}

Eigen::MatrixXd DynamicsModel::hamiltonian(double flux) const
{
    const double a = kTwoPi * flux;
    return h0_ + std::cos(a) * hc_ + std::sin(a) * hs_;
}

int DynamicsModel::index(const ProductLabel& l) const
{
    auto it = std::find(labels_.begin(), labels_.end(), l);
    return it == labels_.end() ? -1 : static_cast<int>(it - labels_.begin());
}

Eigen::VectorXd PropagationResult::populations(const ProductLabel& initial) const
{
    auto it = std::find(labels.begin(), labels.end(), initial);
    if (it == labels.end())
        throw ConfigError("populations: label " + initial.str() + " not in the propagation basis");
    return unitary.col(it - labels.begin()).cwiseAbs2();
}

PropagationResult propagate(const DynamicsModel& model, const Waveform& w)
{
    return propagate(model, w, model.options().substeps);
}

PropagationResult propagate(const DynamicsModel& model, const Waveform& w, int sub)
{
    if (sub < 1)
        throw ConfigError("propagate: substeps must be positive");
    if (w.samples.empty())
        throw ConfigError("propagate: empty waveform");
    if (!(w.sample_rate > 0))
        throw ConfigError("propagate: sample_rate must be positive");
    const int n = model.size();
    const double dt = 1.0 / (w.sample_rate * sub);
    const Eigen::VectorXd& ef = model.frame_energies();
    const auto& comp = model.computational();

    Eigen::MatrixXd ur = Eigen::MatrixXd::Identity(n, n), ui = Eigen::MatrixXd::Zero(n, n);
    std::array<double, 4> delta{};
    double t = 0;
    int steps = 0;
    // Fourth-order commutator-free Magnus: two exponentials of Gauss-point combinations.
    const double c = std::sqrt(3.0) / 6.0;
    const double a1 = (3.0 - 2.0 * std::sqrt(3.0)) / 12.0, a2 = (3.0 + 2.0 * std::sqrt(3.0)) / 12.0;
    auto apply = [&](const Eigen::MatrixXd& h) {
        const EigenPairs ep = eigh(h);
        const Eigen::ArrayXd ang = -kTwoPi * dt * ep.values.array();
        const Eigen::MatrixXd vc = ep.vectors * ang.cos().matrix().asDiagonal();
        const Eigen::MatrixXd vs = ep.vectors * ang.sin().matrix().asDiagonal();
        const Eigen::MatrixXd tr = ep.vectors.transpose() * ur;
        const Eigen::MatrixXd ti = ep.vectors.transpose() * ui;
        ur = vc * tr - vs * ti;
        ui = vc * ti + vs * tr;
    };
    for (size_t k = 0; k + 1 < w.samples.size(); ++k) {
        const double f0 = w.samples[k], f1 = w.samples[k + 1];
        for (int j = 0; j < sub; ++j) {
            const Eigen::MatrixXd h1 = model.hamiltonian(f0 + (f1 - f0) * (j + 0.5 - c) / sub);
            const Eigen::MatrixXd h2 = model.hamiltonian(f0 + (f1 - f0) * (j + 0.5 + c) / sub);
            apply(a2 * h1 + a1 * h2);
            apply(a1 * h1 + a2 * h2);
            t += dt;
            ++steps;
            for (int s = 0; s < 4; ++s) {
                const int cs = comp[s];
                const cd z = cd(ur(cs, cs), ui(cs, cs)) * std::polar(1.0, kTwoPi * ef(cs) * t);
                delta[s] += wrap_phase(-std::arg(z) - delta[s]);
            }
        }
    }

    PropagationResult r;
    r.unitary.resize(n, n);
    r.unitary.real() = ur;
    r.unitary.imag() = ui;
    r.frame_energies = ef;
    r.labels = model.labels();
    r.computational = comp;
    r.duration = t;
    r.steps = steps;
    for (int s = 0; s < 4; ++s)
        r.phases[s] = kTwoPi * ef(comp[s]) * t + delta[s];
    r.unitarity_error =
        (r.unitary.adjoint() * r.unitary - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
    if (r.unitarity_error > model.options().unitarity_tol) {
        std::ostringstream os;
        os << "propagation lost unitarity (" << r.unitarity_error << "); increase substeps above " << sub;
        throw NumericError(os.str());
    }
    return r;
}

PropagationResult propagate(const DeviceEnergies& dev, const Waveform& w, const DynamicsOptions& opt)
{
    if (w.samples.empty())
        throw ConfigError("propagate: empty waveform");
    if (std::abs(w.samples.front() - w.samples.back()) > 1e-12)
        throw ConfigError("propagate: waveform must end at its starting flux");
    const auto [lo, hi] = std::minmax_element(w.samples.begin(), w.samples.end());
    DynamicsModel model(dev, w.samples.front(), *lo, *hi, opt);
    return propagate(model, w);
}

double truncation_sensitivity(const DeviceEnergies& dev, const Waveform& w, const DynamicsOptions& opt)
{
    DynamicsOptions big = opt;
    big.coupler_levels += 5;
    big.energy_cut_ghz += 1.0;
    return std::abs(gate_metrics(propagate(dev, w, big)).leakage - gate_metrics(propagate(dev, w, opt)).leakage);
}

PropagationResult repeat(const PropagationResult& p, int n)
{
    if (n < 1)
        throw ConfigError("repeat: count must be positive");
    PropagationResult r = p;
    for (int i = 1; i < n; ++i)
        r.unitary = p.unitary * r.unitary;
    r.duration = p.duration * n;
    r.steps = p.steps * n;
    for (int s = 0; s < 4; ++s) {
        const int c = p.computational[s];
        const double guess = n * p.phases[s];
        r.phases[s] = guess + wrap_phase(-std::arg(r.unitary(c, c)) - guess);
    }
    const Eigen::Index d = r.unitary.rows();
    r.unitarity_error = (r.unitary.adjoint() * r.unitary - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff();
    return r;
}

GateMetrics gate_metrics(const PropagationResult& p)
{
    const auto& c = p.computational;
    const auto& ph = p.phases;
    Eigen::Matrix4cd m;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            m(a, b) = p.unitary(c[a], c[b]);

    GateMetrics g;
    g.conditional_phase = wrap_phase(ph[3] - ph[1] - ph[2] + ph[0]);
    g.virtual_z1 = wrap_phase(-(ph[1] - ph[0]));
    g.virtual_z2 = wrap_phase(-(ph[2] - ph[0]));
    double leak = 0;
    for (int b = 0; b < 4; ++b) {
        const double l = std::max(0.0, 1.0 - m.col(b).squaredNorm());
        leak += l;
        if (b == 3)
            g.leakage101 = l;
    }
    g.leakage = leak / 4;

    // Virtual Z on both qubits plus a global phase, then compare with CZ.
    const Eigen::Vector4d corr(ph[0], ph[1], ph[2], ph[1] + ph[2] - ph[0]);
    Eigen::Matrix4cd mz = m;
    for (int a = 0; a < 4; ++a)
        mz.row(a) *= std::polar(1.0, corr(a));
    const Eigen::Vector4d ideal(1, 1, 1, -1);
    cd tr = 0;
    for (int a = 0; a < 4; ++a)
        tr += ideal(a) * mz(a, a);
    g.avg_fidelity = ((mz * mz.adjoint()).trace().real() + std::norm(tr)) / 20.0;
    return g;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd adiabatic_state(const DynamicsModel& model, const ProductLabel& label, double flux, double step)
{
    const int idx = model.index(label);
    if (idx < 0)
        throw ConfigError("adiabatic_state: label " + label.str() + " not in the reduced basis");
    if (!(step > 0))
        throw ConfigError("adiabatic_state: step must be positive");
    Eigen::VectorXd v = Eigen::VectorXd::Unit(model.size(), idx);
    const double f0 = model.frame_flux();
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(flux - f0) / step)));
    for (int k = 1; k <= n; ++k) {
        const EigenPairs ep = eigh(model.hamiltonian(f0 + (flux - f0) * k / n));
        Eigen::Index best;
        const Eigen::VectorXd ov = ep.vectors.transpose() * v;
        ov.cwiseAbs().maxCoeff(&best);
        if (ov(best) * ov(best) < 0.5)
            throw NumericError("adiabatic_state: continuation lost the state; reduce the step");
        v = ep.vectors.col(best) * (ov(best) < 0 ? -1.0 : 1.0);
    }
    return v;
}

Eigen::MatrixXd rise_leakage_map(const DeviceEnergies& dev, const std::vector<double>& t_rise,
                                 const std::vector<double>& alpha, double start_flux, double end_flux,
                                 double sample_rate, const DynamicsOptions& opt)
{
    if (t_rise.empty() || alpha.empty())
        throw ConfigError("rise_leakage_map: grids must be non-empty");
    DynamicsModel model(dev, start_flux, std::min(start_flux, end_flux), std::max(start_flux, end_flux), opt);
    const ProductLabel l101{1, 0, 1};
    const int i101 = model.index(l101);
    const Eigen::VectorXd target = adiabatic_state(model, l101, end_flux);
    Eigen::MatrixXd out(t_rise.size(), alpha.size());
    for (size_t i = 0; i < t_rise.size(); ++i) {
        for (size_t j = 0; j < alpha.size(); ++j) {
            RiseSpec rs{t_rise[i], alpha[j], start_flux, end_flux};
            const Waveform w = rise_segment(rs, sample_rate);
            Eigen::VectorXcd psi;
            if (w.samples.size() < 2) {
                psi = Eigen::VectorXcd::Unit(model.size(), i101);
            } else {
                psi = propagate(model, w).unitary.col(i101);
            }
            const cd ov = target.cast<cd>().dot(psi);
            out(i, j) = std::max(0.0, 1.0 - std::norm(ov));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct GateEval {
    GateMetrics single, repeated;
    double cond = 0;
};

CalibrationRow calibrate_one(const DynamicsModel& model, const DetuningTable& table, const CalibrationSpec& spec,
                             double nw, double ff_lo, double ff_hi, std::vector<double>& reach)
{
    const double dur = 0.5 * spec.gate_time - spec.rise.t_rise;
    auto run = [&](double ff, bool with_repeat, int sub) {
        const Waveform w = assemble_cz(spec.rise, SlepianSpec{nw, ff, dur}, table, spec.sample_rate, spec.gate_time);
        const PropagationResult p = propagate(model, w, sub);
        GateEval e;
        e.single = gate_metrics(p);
        if (with_repeat)
            e.repeated = gate_metrics(repeat(p, spec.jazz_repetitions));
        return e;
    };
    auto g1 = [&](double ff) { return wrap_phase(run(ff, false, spec.search_substeps).single.conditional_phase - std::numbers::pi); };
    auto gn = [&](double ff) { return wrap_phase(run(ff, true, spec.search_substeps).repeated.conditional_phase - std::numbers::pi); };

    CalibrationRow row;
    row.nw = nw;
    const int m = std::max(spec.coarse_points, 3);
    std::vector<double> xs(m), gs(m);
    for (int i = 0; i < m; ++i) {
        xs[i] = ff_hi - (ff_hi - ff_lo) * i / (m - 1);
        gs[i] = g1(xs[i]);
        reach.push_back(gs[i] + std::numbers::pi);
    }
    int hit = -1;
    for (int i = 0; i + 1 < m; ++i) {
        if (gs[i] * gs[i + 1] <= 0 && std::abs(gs[i]) < 0.5 * std::numbers::pi &&
            std::abs(gs[i + 1]) < 0.5 * std::numbers::pi) {
            hit = i;
            break;
        }
    }
    if (hit < 0)
        return row;
    auto tol = [](double a, double b) { return std::abs(a - b) < 1e-3; };
    std::uintmax_t it = 60;
    double a = xs[hit + 1], b = xs[hit];
    double fa = gs[hit + 1], fb = gs[hit];
    double x1 = a;
    if (fa != 0 && fb != 0) {
        auto r = boost::math::tools::toms748_solve(g1, a, b, fa, fb, tol, it);
        x1 = 0.5 * (r.first + r.second);
    } else if (fb == 0) {
        x1 = b;
    }
    // Amplified refinement around the single-gate root.
    const double slope = std::abs((gs[hit] - gs[hit + 1]) / (xs[hit] - xs[hit + 1]));
    const int n = spec.jazz_repetitions;
    double xr = x1;
    if (n > 1 && slope > 0) {
        double h = 0.25 * std::numbers::pi / (n * slope);
        for (int attempt = 0; attempt < 4; ++attempt, h *= 2) {
            const double lo = std::max(ff_lo, x1 - h), hi = std::min(ff_hi, x1 + h);
            const double glo = gn(lo), ghi = gn(hi);
            if (glo * ghi <= 0 && std::abs(glo) < 0.5 * std::numbers::pi && std::abs(ghi) < 0.5 * std::numbers::pi) {
                std::uintmax_t it2 = 60;
                if (glo == 0) {
                    xr = lo;
                } else if (ghi == 0) {
                    xr = hi;
                } else {
                    auto r = boost::math::tools::toms748_solve(gn, lo, hi, glo, ghi, tol, it2);
                    xr = 0.5 * (r.first + r.second);
                }
                break;
            }
        }
    }
    const GateEval e = run(xr, true, model.options().substeps);
    row.final_frequency = xr;
    row.found = true;
    row.single = e.single;
    row.repeated = e.repeated;
    return row;
}

} // namespace

CalibrationResult calibrate_cz(const DeviceEnergies& dev, const CalibrationSpec& spec)
{
    if (spec.nw_grid.empty())
        throw ConfigError("calibrate_cz: nw grid is empty");
    if (spec.jazz_repetitions < 1)
        throw ConfigError("calibrate_cz: jazz_repetitions must be positive");
    if (!(spec.crossing.flux > spec.rise.end_flux) || !(spec.crossing.gap_mhz > 0))
        throw ConfigError("calibrate_cz: avoided crossing must be located beyond the rise end flux");
    const double dur = 0.5 * spec.gate_time - spec.rise.t_rise;
    if (!(dur > 0))
        throw ConfigError("calibrate_cz: gate time too short for the rise segment");
    const double hi = spec.table_flux_hi > 0 ? spec.table_flux_hi : spec.crossing.flux + 0.02;
    const DetuningTable table(dev, spec.crossing, spec.rise.end_flux, hi);
    const DynamicsModel model(dev, spec.rise.start_flux, spec.rise.start_flux, hi, spec.dynamics);

    const auto& dn = table.delta_nodes();
    const double dmin = std::min(dn.front(), dn.back()), dmax = std::max(dn.front(), dn.back());
    const double ff_lo = std::max(spec.ff_lo, dmin + 1e-6);
    const double ff_hi = std::min(spec.ff_hi, dmax - 1e-6);
    if (!(ff_hi > ff_lo))
        throw ConfigError("calibrate_cz: final-frequency range does not intersect the detuning table");

    std::vector<CalibrationRow> rows(spec.nw_grid.size());
    std::vector<std::vector<double>> reach(spec.nw_grid.size());
    const int threads = std::max(1, spec.threads);
    for (size_t start = 0; start < rows.size(); start += threads) {
        std::vector<std::future<CalibrationRow>> jobs;
        for (size_t i = start; i < std::min(rows.size(), start + threads); ++i)
            jobs.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred, [&, i] {
                return calibrate_one(model, table, spec, spec.nw_grid[i], ff_lo, ff_hi, reach[i]);
            }));
        for (size_t i = start; i < std::min(rows.size(), start + threads); ++i)
            rows[i] = jobs[i - start].get();
    }

    int best = -1;
    for (size_t i = 0; i < rows.size(); ++i)
        if (rows[i].found && (best < 0 || rows[i].repeated.leakage101 < rows[best].repeated.leakage101))
            best = static_cast<int>(i);
    if (best < 0) {
        double lo = 1e300, hi_r = -1e300;
        for (const auto& r : reach)
            for (double v : r) {
                lo = std::min(lo, v);
                hi_r = std::max(hi_r, v);
            }
        std::ostringstream os;
        os << "calibrate_cz: no nw reaches a π conditional phase for final frequency in [" << ff_lo << ", "
           << ff_hi << "] MHz; reachable conditional phase spans [" << lo << ", " << hi_r << "] rad";
        throw NumericError(os.str());
    }

    CalibrationResult out;
    out.rows = rows;
    out.rise = spec.rise;
    out.slepian = SlepianSpec{rows[best].nw, rows[best].final_frequency, dur};
    out.metrics = rows[best].single;
    out.repeated = rows[best].repeated;
    out.waveform = assemble_cz(out.rise, out.slepian, table, spec.sample_rate, spec.gate_time);
    return out;
}

} // namespace tft
