#include "tftsim/spectrum.hpp"

#include "tftsim/errors.hpp"
#include "tftsim/linalg.hpp"

#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace tft {

std::string ProductLabel::str() const
{
    if (n1 < 10 && nc < 10 && n2 < 10)
        return std::to_string(n1) + std::to_string(nc) + std::to_string(n2);
    return std::to_string(n1) + "," + std::to_string(nc) + "," + std::to_string(n2);
}

ProductLabel parse_label(const std::string& s)
{
    ProductLabel l;
    if (s.find(',') != std::string::npos) {
        std::istringstream is(s);
        char c1 = 0, c2 = 0;
        if (!(is >> l.n1 >> c1 >> l.nc >> c2 >> l.n2) || c1 != ',' || c2 != ',')
            throw ConfigError("bad state label '" + s + "'");
    } else {
        if (s.size() != 3 || !std::all_of(s.begin(), s.end(), ::isdigit))
            throw ConfigError("bad state label '" + s + "'");
        l.n1 = s[0] - '0';
        l.nc = s[1] - '0';
        l.n2 = s[2] - '0';
    }
    if (l.n1 < 0 || l.nc < 0 || l.n2 < 0)
        throw ConfigError("bad state label '" + s + "'");
    return l;
}

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Eigen::MatrixXd imag_part(const Eigen::MatrixXcd& m, const char* what)
{
    if (m.real().cwiseAbs().maxCoeff() > 1e-9)
        throw NumericError(std::string(what) +
                           ": charge matrix is not purely imaginary (degenerate parity sectors)");
    return m.imag();
}

// Applies (1 ⊗ S ⊗ 1) to every column of v.
Eigen::MatrixXd apply_coupler_transform(const Eigen::MatrixXd& v, const Eigen::MatrixXd& s,
                                        const CompositeDims& d)
{
    Eigen::MatrixXd out(v.rows(), v.cols());
    Eigen::MatrixXd blk(d.c, d.q2);
    for (Eigen::Index col = 0; col < v.cols(); ++col) {
        for (int a = 0; a < d.q1; ++a) {
            const Eigen::Index base = static_cast<Eigen::Index>(a) * d.c * d.q2;
            for (int b = 0; b < d.c; ++b)
                blk.row(b) = v.col(col).segment(base + b * d.q2, d.q2).transpose();
            const Eigen::MatrixXd t = s * blk;
            for (int b = 0; b < d.c; ++b)
                out.col(col).segment(base + b * d.q2, d.q2) = t.row(b).transpose();
        }
    }
    return out;
}

struct Candidate {
    double w;
    int row, state;
};

// Greedy bijection: repeatedly take the largest remaining weight w(row, state).
// Returns for each state the row it was assigned.
std::vector<int> greedy_assign(const Eigen::MatrixXd& w, bool& tie)
{
    const int rows = static_cast<int>(w.rows());
    const int states = static_cast<int>(w.cols());
    std::vector<Candidate> cand;
    cand.reserve(static_cast<size_t>(states) * 8);
    for (int s = 0; s < states; ++s)
        for (int r = 0; r < rows; ++r)
            if (w(r, s) > 1e-3)
                cand.push_back({w(r, s), r, s});
    std::stable_sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
        if (a.w != b.w)
            return a.w > b.w;
        return a.state < b.state; // lower energy wins ties
    });
    std::vector<int> row_of(states, -1);
    std::vector<char> row_used(rows, 0);
    tie = false;
    for (size_t i = 0; i < cand.size(); ++i) {
        const Candidate& c = cand[i];
        if (row_of[c.state] >= 0 || row_used[c.row])
            continue;
        for (size_t j = i + 1; j < cand.size() && c.w - cand[j].w <= 1e-9; ++j)
            if (cand[j].row == c.row && row_of[cand[j].state] < 0 && cand[j].state != c.state)
                tie = true;
        row_of[c.state] = c.row;
        row_used[c.row] = 1;
    }
    for (int s = 0; s < states; ++s) {
        if (row_of[s] >= 0)
            continue;
        int best = -1;
        for (int r = 0; r < rows; ++r)
            if (!row_used[r] && (best < 0 || w(r, s) > w(best, s)))
                best = r;
        if (best < 0)
            throw NumericError("label assignment ran out of labels");
        row_of[s] = best;
        row_used[best] = 1;
    }
    return row_of;
}

LabeledSpectrum finish_labels(EigenPairs ep, CompositeDims dims, double flux, LabelMode mode,
                              const LabeledSpectrum* prev, const Eigen::MatrixXd* transformed_prev,
                              const CompositeModel* model)
{
    LabeledSpectrum ls;
    ls.flux = flux;
    ls.dims = dims;
    ls.energies = ep.values;
    const int n = static_cast<int>(ep.values.size());
    auto label_of = [&](int idx) {
        if (model)
            return model->label(idx);
        ProductLabel l;
        l.n2 = idx % dims.q2;
        l.nc = (idx / dims.q2) % dims.c;
        l.n1 = idx / (dims.q2 * dims.c);
        return l;
    };
    ls.labels.resize(n);
    bool tie = false;
    if (mode == LabelMode::MaxOverlap) {
        const Eigen::MatrixXd w = ep.vectors.cwiseAbs2();
        std::vector<int> row = greedy_assign(w, tie);
        for (int s = 0; s < n; ++s)
            ls.labels[s] = label_of(row[s]);
    } else {
        if (!prev)
            throw ConfigError("adiabatic continuation needs a previous spectrum");
        const Eigen::MatrixXd& pv = transformed_prev ? *transformed_prev : prev->eigenvectors;
        if (pv.rows() != ep.vectors.rows())
            throw ConfigError("adiabatic continuation: basis size mismatch");
        const Eigen::MatrixXd w = (pv.transpose() * ep.vectors).cwiseAbs2();
        std::vector<int> row = greedy_assign(w, tie);
        for (int s = 0; s < n; ++s)
            ls.labels[s] = prev->labels[row[s]];
    }
    ls.tie_broken = tie;
    ls.overlaps.resize(n);
    ls.mixed.resize(n);
    for (int s = 0; s < n; ++s) {
        const ProductLabel& l = ls.labels[s];
        const int idx = (l.n1 * dims.c + l.nc) * dims.q2 + l.n2;
        const double w = ep.vectors(idx, s) * ep.vectors(idx, s);
        ls.overlaps[s] = w;
        ls.mixed[s] = w < 0.25;
    }
    ls.eigenvectors = std::move(ep.vectors);
    return ls;
}

} // namespace

CompositeModel::CompositeModel(const DeviceEnergies& dev, SpectrumOptions opt) : dev_(dev), opt_(opt)
{
    dev_.validate();
    const CompositeDims& d = opt_.dims;
    if (d.q1 < 2 || d.c < 2 || d.q2 < 2)
        throw ConfigError("composite dims must keep at least two levels per subsystem");
    q1_ = solve_transmon(dev_.ec1, dev_.ej1, opt_.charge_cutoff, d.q1);
    q2_ = solve_transmon(dev_.ec2, dev_.ej2, opt_.charge_cutoff, d.q2);
    m1_ = imag_part(q1_.n_elems, "qubit 1");
    m2_ = imag_part(q2_.n_elems, "qubit 2");
    // Convergence gate for the coupler at the sweet spots.
    for (double f : {0.0, 0.5})
        (void)solve_fluxonium(dev_.ecc, dev_.el_c, dev_.ejc, f, opt_.fluxonium_basis, d.c, opt_.backend,
                              true);
}

SubsystemSolution CompositeModel::coupler(double flux) const
{
    return solve_fluxonium(dev_.ecc, dev_.el_c, dev_.ejc, flux, opt_.fluxonium_basis, opt_.dims.c,
                           opt_.backend, false);
}

Eigen::VectorXd CompositeModel::bare_energies(const SubsystemSolution& c) const
{
    const CompositeDims& d = opt_.dims;
    Eigen::VectorXd e(d.size());
    for (int a = 0; a < d.q1; ++a)
        for (int b = 0; b < d.c; ++b)
            for (int k = 0; k < d.q2; ++k)
                e((a * d.c + b) * d.q2 + k) = q1_.energies(a) + c.energies(b) + q2_.energies(k);
    return e;
}

Eigen::MatrixXd CompositeModel::hamiltonian(const SubsystemSolution& c) const
{
    const CompositeDims& d = opt_.dims;
    const Eigen::MatrixXd mc = imag_part(c.n_elems, "coupler");
    const Eigen::MatrixXd i1 = Eigen::MatrixXd::Identity(d.q1, d.q1);
    const Eigen::MatrixXd ic = Eigen::MatrixXd::Identity(d.c, d.c);
    const Eigen::MatrixXd i2 = Eigen::MatrixXd::Identity(d.q2, d.q2);
    // (i M_a) ⊗ (i M_b) = -M_a ⊗ M_b
    Eigen::MatrixXd h = -dev_.j1c * kron(kron(m1_, mc), i2) - dev_.j2c * kron(kron(i1, mc), m2_) -
                        dev_.j12 * kron(kron(m1_, ic), m2_);
    h.diagonal() += bare_energies(c);
    return h;
}

Eigen::MatrixXd CompositeModel::hamiltonian(double flux) const
{
    return hamiltonian(coupler(flux));
}

int CompositeModel::index(const ProductLabel& l) const
{
    const CompositeDims& d = opt_.dims;
    if (l.n1 < 0 || l.n1 >= d.q1 || l.nc < 0 || l.nc >= d.c || l.n2 < 0 || l.n2 >= d.q2)
        throw ConfigError("label " + l.str() + " outside the kept levels");
    return (l.n1 * d.c + l.nc) * d.q2 + l.n2;
}

ProductLabel CompositeModel::label(int idx) const
{
    const CompositeDims& d = opt_.dims;
    ProductLabel l;
    l.n2 = idx % d.q2;
    l.nc = (idx / d.q2) % d.c;
    l.n1 = idx / (d.q2 * d.c);
    return l;
}

Eigen::MatrixXd build_hamiltonian(const DeviceEnergies& dev, double flux, CompositeDims dims)
{
    SpectrumOptions opt;
    opt.dims = dims;
    return CompositeModel(dev, opt).hamiltonian(flux);
}

int LabeledSpectrum::find(const ProductLabel& l) const
{
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == l)
            return static_cast<int>(i);
    return -1;
}

double LabeledSpectrum::energy(const ProductLabel& l) const
{
    const int i = find(l);
    if (i < 0)
        throw NumericError("label " + l.str() + " not present in spectrum");
    return energies(i);
}

LabeledSpectrum labeled_spectrum(const Eigen::MatrixXd& h, CompositeDims dims, LabelMode mode,
                                 const LabeledSpectrum* prev)
{
    if (h.rows() != dims.size() || h.cols() != dims.size())
        throw ConfigError("labeled_spectrum: Hamiltonian size does not match dims");
    return finish_labels(eigh(h), dims, prev ? prev->flux : 0.0, mode, prev, nullptr, nullptr);
}

LabeledSpectrum labeled_spectrum(const CompositeModel& model, double flux, LabelMode mode,
                                 const LabeledSpectrum* prev)
{
    const SubsystemSolution c = model.coupler(flux);
    EigenPairs ep = eigh(model.hamiltonian(c));
    LabeledSpectrum ls;
    if (mode == LabelMode::AdiabaticContinuation) {
        if (!prev)
            throw ConfigError("adiabatic continuation needs a previous spectrum");
        const Eigen::MatrixXd s = c.vectors.transpose() * prev->coupler_vectors;
        // <prev_k| = prev_k^T (1 ⊗ Sprev^T S ⊗ 1) expressed in the new coupler basis.
        const Eigen::MatrixXd tp = apply_coupler_transform(prev->eigenvectors, s, model.dims());
        ls = finish_labels(std::move(ep), model.dims(), flux, mode, prev, &tp, &model);
    } else {
        ls = finish_labels(std::move(ep), model.dims(), flux, mode, nullptr, nullptr, &model);
    }
    ls.flux = flux;
    ls.coupler_vectors = c.vectors;
    return ls;
}

// ---------------------------------------------------------------------------

const std::vector<ProductLabel>& computational_labels()
{
    static const std::vector<ProductLabel> labels = {{0, 0, 0}, {1, 0, 0}, {0, 0, 1}, {1, 0, 1}};
    return labels;
}

StateTracker::StateTracker(const CompositeModel& model, std::vector<ProductLabel> labels,
                           double origin_flux, double max_step)
    : model_(model), labels_(std::move(labels)), max_step_(max_step)
{
    if (labels_.empty())
        throw ConfigError("StateTracker needs at least one label");
    if (!(max_step_ > 0))
        throw ConfigError("StateTracker: max_step must be positive");
    for (const auto& l : labels_)
        (void)model_.index(l);
    cache_.push_back(initial(origin_flux));
}

namespace {

int lowest_count(const CompositeModel& model, const SubsystemSolution& c,
                 const std::vector<ProductLabel>& labels)
{
    const Eigen::VectorXd bare = model.bare_energies(c);
    double emax = 0;
    for (const auto& l : labels)
        emax = std::max(emax, bare(model.index(l)));
    int count = 0;
    for (Eigen::Index i = 0; i < bare.size(); ++i)
        if (bare(i) <= emax + 1.5)
            ++count;
    return std::min<int>(static_cast<int>(bare.size()), count + 12);
}

} // namespace

StateTracker::Point StateTracker::initial(double flux)
{
    const SubsystemSolution c = model_.coupler(flux);
    const Eigen::MatrixXd h = model_.hamiltonian(c);
    EigenPairs ep = eigh_lowest(h, lowest_count(model_, c, labels_));
    ++diag_count_;
    // Max-overlap assignment restricted to the tracked labels.
    const int n = static_cast<int>(labels_.size());
    Eigen::MatrixXd w(n, ep.values.size());
    for (int i = 0; i < n; ++i)
        w.row(i) = ep.vectors.row(model_.index(labels_[i])).cwiseAbs2();
    std::vector<Candidate> cand;
    for (int i = 0; i < n; ++i)
        for (Eigen::Index s = 0; s < w.cols(); ++s)
            cand.push_back({w(i, s), i, static_cast<int>(s)});
    std::stable_sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
        if (a.w != b.w)
            return a.w > b.w;
        return a.state < b.state;
    });
    std::vector<int> state_of(n, -1);
    std::vector<char> used(w.cols(), 0);
    for (const Candidate& c : cand) {
        if (state_of[c.row] >= 0 || used[c.state])
            continue;
        state_of[c.row] = c.state;
        used[c.state] = 1;
    }
    Point p;
    p.flux = flux;
    p.energies.resize(n);
    p.vectors.resize(h.rows(), n);
    p.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        p.energies(i) = ep.values(state_of[i]);
        p.vectors.col(i) = ep.vectors.col(state_of[i]);
        p.weights[i] = w(i, state_of[i]);
    }
    p.coupler_vectors = c.vectors;
    return p;
}

StateTracker::Point StateTracker::solve_from(const Point& from, double flux, int depth)
{
    const SubsystemSolution c = model_.coupler(flux);
    EigenPairs ep = eigh_lowest(model_.hamiltonian(c), lowest_count(model_, c, labels_));
    ++diag_count_;
    const Eigen::MatrixXd s = c.vectors.transpose() * from.coupler_vectors;
    const Eigen::MatrixXd prev = apply_coupler_transform(from.vectors, s, model_.dims());
    const Eigen::MatrixXd ov = (prev.transpose() * ep.vectors).cwiseAbs2();
    const int n = static_cast<int>(labels_.size());
    Point p;
    p.flux = flux;
    p.energies.resize(n);
    p.vectors.resize(ep.vectors.rows(), n);
    p.weights.resize(n);
    p.coupler_vectors = c.vectors;
    std::vector<int> chosen(n);
    bool ok = true;
    for (int i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        const double b = ov.row(i).maxCoeff(&best);
        chosen[i] = static_cast<int>(best);
        if (b < 0.8)
            ok = false;
        for (int j = 0; j < i; ++j)
            if (chosen[j] == chosen[i])
                ok = false;
    }
    if (!ok && depth < 14) {
        const Point mid = solve_from(from, 0.5 * (from.flux + flux), depth + 1);
        return solve_from(mid, flux, depth + 1);
    }
    for (int i = 0; i < n; ++i) {
        p.energies(i) = ep.values(chosen[i]);
        Eigen::VectorXd v = ep.vectors.col(chosen[i]);
        if (v.dot(prev.col(i)) < 0)
            v = -v;
        p.vectors.col(i) = v;
        const double a = v(model_.index(labels_[i]));
        p.weights[i] = a * a;
    }
    return p;
}

const StateTracker::Point& StateTracker::at(double flux)
{
    // Nearest cached point, then walk toward the target.
    auto it = std::lower_bound(cache_.begin(), cache_.end(), flux,
                               [](const Point& p, double f) { return p.flux < f; });
    if (it != cache_.end() && it->flux == flux)
        return *it;
    size_t idx;
    if (it == cache_.end())
        idx = cache_.size() - 1;
    else if (it == cache_.begin())
        idx = 0;
    else {
        const size_t hi = static_cast<size_t>(it - cache_.begin());
        idx = (flux - cache_[hi - 1].flux <= cache_[hi].flux - flux) ? hi - 1 : hi;
    }
    Point cur = cache_[idx];
    const double dist = flux - cur.flux;
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(dist) / max_step_ - 1e-12)));
    const double start = cur.flux;
    for (int k = 1; k <= steps; ++k) {
        const double f = (k == steps) ? flux : start + dist * k / steps;
        cur = solve_from(cur, f, 0);
        auto pos = std::lower_bound(cache_.begin(), cache_.end(), f,
                                    [](const Point& p, double x) { return p.flux < x; });
        if (pos == cache_.end() || pos->flux != f)
            cache_.insert(pos, cur);
    }
    auto fin = std::lower_bound(cache_.begin(), cache_.end(), flux,
                                [](const Point& p, double f) { return p.flux < f; });
    return *fin;
}

ZZValue zz_from_tracker(StateTracker& tracker, double flux)
{
    const auto& labels = tracker.labels();
    int idx[4];
    for (int k = 0; k < 4; ++k) {
        auto it = std::find(labels.begin(), labels.end(), computational_labels()[k]);
        if (it == labels.end())
            throw ConfigError("tracker does not follow the computational states");
        idx[k] = static_cast<int>(it - labels.begin());
    }
    const StateTracker::Point& p = tracker.at(flux);
    ZZValue z;
    z.flux = flux;
    z.zeta_mhz = 1e3 * (p.energies(idx[3]) - p.energies(idx[1]) - p.energies(idx[2]) + p.energies(idx[0]));
    z.confidence = 1.0;
    for (int k = 0; k < 4; ++k)
        z.confidence = std::min(z.confidence, p.weights[idx[k]]);
    z.low_confidence = z.confidence < 0.25;
    return z;
}

ZZValue zz_at(const DeviceEnergies& dev, double flux, const SpectrumOptions& opt)
{
    CompositeModel model(dev, opt);
    StateTracker tracker(model, computational_labels(), 0.0);
    return zz_from_tracker(tracker, flux);
}

ZZCurve sweep_zz(const DeviceEnergies& dev, double lo, double hi, int steps, const SpectrumOptions& opt)
{
    if (steps < 2)
        throw ConfigError("sweep_zz: steps must be at least 2");
    if (!(hi > lo))
        throw ConfigError("sweep_zz: flux range must be increasing");
    CompositeModel model(dev, opt);
    const double h = (hi - lo) / (steps - 1);
    StateTracker tracker(model, computational_labels(), lo, std::min(0.01, h));
    ZZCurve curve;
    for (int i = 0; i < steps; ++i) {
        const double f = (i == steps - 1) ? hi : lo + h * i;
        ZZValue z = zz_from_tracker(tracker, f);
        curve.flux.push_back(f);
        curve.zeta_mhz.push_back(z.zeta_mhz);
        curve.confidence.push_back(z.confidence);
    }
    return curve;
}

ZeroZZ find_zero_zz(const DeviceEnergies& dev, double lo, double hi, const SpectrumOptions& opt,
                    double tol_mhz)
{
    if (!(hi > lo))
        throw ConfigError("find_zero_zz: bracket must be increasing");
    CompositeModel model(dev, opt);
    StateTracker tracker(model, computational_labels(), 0.0);
    double flo = zz_from_tracker(tracker, lo).zeta_mhz;
    double fhi = zz_from_tracker(tracker, hi).zeta_mhz;
    ZeroZZ out;
    if (std::abs(flo) < tol_mhz) {
        out.flux = lo;
        out.zeta_mhz = flo;
        return out;
    }
    if (std::abs(fhi) < tol_mhz) {
        out.flux = hi;
        out.zeta_mhz = fhi;
        return out;
    }
    if (std::signbit(flo) == std::signbit(fhi)) {
        std::ostringstream os;
        os << "no zero-ZZ in range [" << lo << ", " << hi << "] (zeta " << flo << ", " << fhi << " MHz)";
        throw NumericError(os.str());
    }
    double a = lo, b = hi;
    for (int it = 1; it <= 200; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = zz_from_tracker(tracker, m).zeta_mhz;
        out.flux = m;
        out.zeta_mhz = fm;
        out.iterations = it;
        if (std::abs(fm) < tol_mhz)
            return out;
        if (std::signbit(fm) == std::signbit(flo)) {
            a = m;
            flo = fm;
        } else {
            b = m;
        }
        if (b - a < 1e-13)
            break;
    }
    std::ostringstream os;
    os << "zeta changes sign near " << out.flux << " Φ0 without vanishing (|zeta| = " << std::abs(out.zeta_mhz)
       << " MHz): the sign change is a resonance pole";
    throw NumericError(os.str());
}

AvoidedCrossing locate_avoided_crossing(const DeviceEnergies& dev, const ProductLabel& la,
                                        const ProductLabel& lb, double lo, double hi,
                                        const SpectrumOptions& opt)
{
    if (!(hi > lo))
        throw ConfigError("locate_avoided_crossing: bracket must be increasing");
    CompositeModel model(dev, opt);
    StateTracker tracker(model, {la, lb}, lo, 0.002);
    {
        const auto& p0 = tracker.at(lo);
        for (int i = 0; i < 2; ++i)
            if (p0.weights[i] < 0.5)
                throw NumericError("label " + (i ? lb : la).str() + " is mixed at the bracket start " +
                                   std::to_string(lo) + " (weight " + std::to_string(p0.weights[i]) +
                                   "); start the bracket where both states are well defined");
    }
    auto gap = [&](double f) {
        const auto& p = tracker.at(f);
        return std::abs(p.energies(1) - p.energies(0));
    };
    // Coarse scan to isolate the minimum, then golden-section refinement.
    const int coarse = 40;
    int best = 0;
    double bestv = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= coarse; ++i) {
        const double g = gap(lo + (hi - lo) * i / coarse);
        if (g < bestv) {
            bestv = g;
            best = i;
        }
    }
    if (best == 0 || best == coarse)
        throw NumericError("avoided crossing minimum lies at the bracket edge; widen the bracket");
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo + (hi - lo) * (best - 1) / coarse;
    double b = lo + (hi - lo) * (best + 1) / coarse;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = gap(c), fd = gap(d);
    while (b - a > 1e-7) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = gap(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = gap(d);
        }
    }
    AvoidedCrossing x;
    x.flux = 0.5 * (a + b);
    x.gap_mhz = 1e3 * gap(x.flux);
    return x;
}

// ---------------------------------------------------------------------------

double& fit_param_ref(DeviceEnergies& d, FitParam p)
{
    switch (p) {
    case FitParam::ec1: return d.ec1;
    case FitParam::ec2: return d.ec2;
    case FitParam::ecc: return d.ecc;
    case FitParam::ej1: return d.ej1;
    case FitParam::ej2: return d.ej2;
    case FitParam::ejc: return d.ejc;
    case FitParam::el_c: return d.el_c;
    case FitParam::j1c: return d.j1c;
    case FitParam::j2c: return d.j2c;
    case FitParam::j12: return d.j12;
    }
    throw ConfigError("unknown fit parameter");
}

namespace {
const char* const kFitNames[] = {"ec1", "ec2", "ecc", "ej1", "ej2", "ejc", "el_c", "j1c", "j2c", "j12"};
}

FitParam parse_fit_param(const std::string& s)
{
    for (int i = 0; i < 10; ++i)
        if (s == kFitNames[i])
            return static_cast<FitParam>(i);
    throw ConfigError("unknown fit parameter '" + s + "'");
}

std::string fit_param_name(FitParam p)
{
    return kFitNames[static_cast<int>(p)];
}

namespace {

struct FitContext {
    const std::vector<Transition>* data;
    std::vector<double> fluxes; // distinct
    DeviceEnergies base;
    std::vector<FitParam> free;
    std::vector<double> scale;
    SpectrumOptions opt;
};

double fit_residual_sq(const DeviceEnergies& dev, const FitContext& ctx)
{
    CompositeModel model(dev, ctx.opt);
    double ss = 0;
    for (double f : ctx.fluxes) {
        LabeledSpectrum ls = labeled_spectrum(model, f, LabelMode::MaxOverlap);
        for (const Transition& t : *ctx.data) {
            if (t.flux != f)
                continue;
            const double model_f = ls.energy(t.to) - ls.energy(t.from);
            ss += (model_f - t.frequency_ghz) * (model_f - t.frequency_ghz);
        }
    }
    return ss;
}

double nm_objective(const gsl_vector* x, void* params)
{
    const FitContext& ctx = *static_cast<const FitContext*>(params);
    DeviceEnergies d = ctx.base;
    for (size_t i = 0; i < ctx.free.size(); ++i)
        fit_param_ref(d, ctx.free[i]) = gsl_vector_get(x, i) * ctx.scale[i];
    try {
        d.validate();
        return fit_residual_sq(d, ctx);
    } catch (const std::exception&) {
        return 1e30;
    }
}

} // namespace

SpectrumFit fit_parameters(const std::vector<Transition>& data, const DeviceEnergies& initial,
                           const std::vector<FitParam>& free, const SpectrumOptions& opt,
                           int max_iterations)
{
    if (data.size() < free.size())
        throw ConfigError("fit_parameters: fewer data points than free parameters");
    FitContext ctx;
    ctx.data = &data;
    ctx.base = initial;
    ctx.free = free;
    ctx.opt = opt;
    for (const auto& t : data)
        if (std::find(ctx.fluxes.begin(), ctx.fluxes.end(), t.flux) == ctx.fluxes.end())
            ctx.fluxes.push_back(t.flux);
    SpectrumFit out;
    out.device = initial;
    if (free.empty()) {
        out.residual_rms_ghz = std::sqrt(fit_residual_sq(initial, ctx) / data.size());
        out.converged = true;
        return out;
    }
    DeviceEnergies init = initial;
    const size_t n = free.size();
    for (size_t i = 0; i < n; ++i) {
        const double v = fit_param_ref(init, free[i]);
        ctx.scale.push_back(v != 0.0 ? std::abs(v) : 1.0);
    }
    gsl_multimin_function fn{&nm_objective, n, &ctx};
    gsl_vector* x = gsl_vector_alloc(n);
    gsl_vector* step = gsl_vector_alloc(n);
    for (size_t i = 0; i < n; ++i) {
        gsl_vector_set(x, i, fit_param_ref(init, free[i]) / ctx.scale[i]);
        gsl_vector_set(step, i, 0.02);
    }
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(s, &fn, x, step);
    int it = 0;
    int status = GSL_CONTINUE;
    while (status == GSL_CONTINUE && it < max_iterations) {
        ++it;
        if (gsl_multimin_fminimizer_iterate(s))
            break;
        status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-9);
    }
    for (size_t i = 0; i < n; ++i)
        fit_param_ref(out.device, free[i]) = gsl_vector_get(s->x, i) * ctx.scale[i];
    out.residual_rms_ghz = std::sqrt(s->fval / data.size());
    out.iterations = it;
    out.converged = status == GSL_SUCCESS;
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(x);
    gsl_vector_free(step);
    return out;
}

} // namespace tft
