#include "tftsim/benchmarking.hpp"

#include "tftsim/clifford.hpp"
#include "tftsim/errors.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <gsl/gsl_blas.h>
#include <gsl/gsl_multifit_nlinear.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

namespace tft {

namespace {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;

// Superoperator on column-stacked density matrices.
struct Channel {
    Mat s;
    bool identity = true;

    void apply(Mat& rho) const
    {
        if (identity)
            return;
        const Eigen::Index d = rho.rows();
        Eigen::Map<Eigen::VectorXcd> v(rho.data(), d * d);
        const Eigen::VectorXcd out = s * v;
        v = out;
    }
};

Channel from_kraus(const std::vector<Mat>& ks)
{
    const Eigen::Index d = ks.front().rows();
    Channel c;
    c.identity = false;
    c.s = Mat::Zero(d * d, d * d);
    for (const Mat& k : ks)
        c.s += Eigen::kroneckerProduct(k.conjugate(), k);
    return c;
}

Channel compose(const Channel& second, const Channel& first)
{
    if (first.identity)
        return second;
    if (second.identity)
        return first;
    Channel c;
    c.identity = false;
    c.s = second.s * first.s;
    return c;
}

// Embeds a single-qubit operator on qubit q; `leak` is its value on the leakage level.
Mat lift(const Eigen::Matrix2cd& k, int q, int n_qubits, bool has_leak, cd leak)
{
    Mat comp;
    if (n_qubits == 1)
        comp = k;
    else
        comp = q == 0 ? Mat(Eigen::kroneckerProduct(k, Eigen::Matrix2cd::Identity()))
                      : Mat(Eigen::kroneckerProduct(Eigen::Matrix2cd::Identity(), k));
    const Eigen::Index dc = comp.rows();
    Mat out = Mat::Zero(dc + (has_leak ? 1 : 0), dc + (has_leak ? 1 : 0));
    out.topLeftCorner(dc, dc) = comp;
    if (has_leak)
        out(dc, dc) = leak;
    return out;
}

Channel relaxation(const QubitCoherence& qc, double t_ns, int q, int n_qubits, bool has_leak)
{
    Channel c;
    const double t = t_ns * 1e-3;
    if (qc.t1 > 0) {
        const double g = 1.0 - std::exp(-t / qc.t1);
        Eigen::Matrix2cd a0, a1;
        a0 << 1, 0, 0, std::sqrt(1 - g);
        a1 << 0, std::sqrt(g), 0, 0;
        c = compose(from_kraus({lift(a0, q, n_qubits, has_leak, 1.0), lift(a1, q, n_qubits, has_leak, 0.0)}), c);
    }
    if (qc.t2e > 0) {
        const double rate = 1.0 / qc.t2e - (qc.t1 > 0 ? 0.5 / qc.t1 : 0.0);
        const double pz = 0.5 * (1.0 - std::exp(-t * rate));
        if (pz > 0) {
            const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
            Eigen::Matrix2cd z;
            z << 1, 0, 0, -1;
            c = compose(from_kraus({lift(std::sqrt(1 - pz) * id, q, n_qubits, has_leak, std::sqrt(1 - pz)),
                                    lift(std::sqrt(pz) * z, q, n_qubits, has_leak, std::sqrt(pz))}),
                        c);
        }
    }
    return c;
}

Channel phase_flip(double pz, int q, int n_qubits, bool has_leak)
{
    if (!(pz > 0))
        return {};
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    Eigen::Matrix2cd z;
    z << 1, 0, 0, -1;
    return from_kraus({lift(std::sqrt(1 - pz) * id, q, n_qubits, has_leak, std::sqrt(1 - pz)),
                       lift(std::sqrt(pz) * z, q, n_qubits, has_leak, std::sqrt(pz))});
}

// ρ_cc -> (1-p) ρ_cc + p Tr(ρ_cc) I/dc; coherences with the leakage level scale by (1-p).
Channel depolarizing(double p, int dc, int d)
{
    if (!(p > 0))
        return {};
    Channel c;
    c.identity = false;
    c.s = Mat::Zero(d * d, d * d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) {
            const bool ci = i < dc, cj = j < dc;
            const int col = j * d + i;
            if (ci && cj) {
                c.s(col, col) += 1 - p;
                if (i == j)
                    for (int k = 0; k < dc; ++k)
                        c.s(k * d + k, col) += p / dc;
            } else if (ci || cj) {
                c.s(col, col) = 1 - p;
            } else {
                c.s(col, col) = 1;
            }
        }
    return c;
}

Channel leakage(double gamma, double seep, int dc, int d)
{
    if (!(gamma > 0) && !(seep > 0))
        return {};
    std::vector<Mat> ks;
    Mat k0 = Mat::Zero(d, d);
    for (int i = 0; i < dc; ++i)
        k0(i, i) = std::sqrt(1 - gamma);
    k0(dc, dc) = std::sqrt(1 - seep);
    ks.push_back(k0);
    for (int i = 0; i < dc; ++i) {
        if (gamma > 0) {
            Mat k = Mat::Zero(d, d);
            k(dc, i) = std::sqrt(gamma);
            ks.push_back(k);
        }
        if (seep > 0) {
            Mat k = Mat::Zero(d, d);
            k(i, dc) = std::sqrt(seep / dc);
            ks.push_back(k);
        }
    }
    return from_kraus(ks);
}

struct GateChannels {
    Channel layer, cz;
};

GateChannels build_channels(const NoiseModel& nm, int n_qubits)
{
    const bool leak = n_qubits == 2;
    const int dc = 1 << n_qubits, d = dc + (leak ? 1 : 0);
    GateChannels g;
    for (int q = 0; q < n_qubits; ++q) {
        g.layer = compose(relaxation(nm.qubits[q], nm.gate_time_1q, q, n_qubits, leak), g.layer);
        if (n_qubits == 2)
            g.cz = compose(relaxation(nm.qubits[q], nm.gate_time_cz, q, n_qubits, leak), g.cz);
    }
    g.layer = compose(depolarizing(nm.depolarizing_1q, dc, d), g.layer);
    if (n_qubits == 2) {
        if (nm.flux_noise_amp > 0 && nm.flux_slope != 0) {
            const double a = nm.flux_noise_amp * 1e-6;
            const double w = 2.0 * std::numbers::pi * nm.flux_slope * 1e9;
            const double var = 4.0 * a * a * w * w * one_over_f_integral(nm.gate_time_cz * 1e-9, nm.cutoffs);
            g.cz = compose(phase_flip(0.5 * (1.0 - std::exp(-0.5 * var)), 1, 2, true), g.cz);
        }
        g.cz = compose(depolarizing(nm.depolarizing_cz, dc, d), g.cz);
        g.cz = compose(leakage(nm.leakage_cz, nm.seepage_cz, dc, d), g.cz);
    }
    return g;
}

Mat embed(const Eigen::Matrix4cd& u)
{
    Mat m = Mat::Identity(5, 5);
    m.topLeftCorner(4, 4) = u;
    return m;
}

struct SequenceOutcome {
    double ground = 0, comp = 0;
};

class Simulator {
public:
    Simulator(const NoiseModel& nm, int n_qubits) : n_(n_qubits), ch_(build_channels(nm, n_qubits))
    {
        const auto& g1 = Clifford1Group::instance();
        if (n_ == 2) {
            for (int a = 0; a < g1.size(); ++a)
                for (int b = 0; b < g1.size(); ++b)
                    layers_.push_back(embed(layer_unitary(a, b)));
            cz_ = embed(cz_unitary());
        } else {
            for (int a = 0; a < g1.size(); ++a)
                layers_.push_back(g1.unitary(a));
        }
    }

    SequenceOutcome run(int m, bool interleave, std::mt19937_64& rng) const
    {
        const int d = n_ == 2 ? 5 : 2;
        Mat rho = Mat::Zero(d, d);
        rho(0, 0) = 1;
        if (n_ == 1) {
            const auto& g1 = Clifford1Group::instance();
            std::uniform_int_distribution<int> pick(0, g1.size() - 1);
            int total = g1.identity();
            for (int k = 0; k < m; ++k) {
                const int c = pick(rng);
                apply_layer(rho, c);
                total = g1.compose(c, total);
            }
            apply_layer(rho, g1.inverse(total));
        } else {
            const auto& g2 = Clifford2Group::instance();
            Eigen::Matrix4cd total = Eigen::Matrix4cd::Identity();
            for (int k = 0; k < m; ++k) {
                const int c = g2.sample(rng);
                apply_native(rho, g2.decomposition(c));
                total = g2.unitary(c) * total;
                if (interleave) {
                    apply_cz(rho);
                    total = cz_unitary() * total;
                }
            }
            const int inv = g2.find(total.adjoint());
            if (inv < 0)
                throw NumericError("RB recovery: sequence product is not a Clifford");
            apply_native(rho, g2.decomposition(inv));
        }
        SequenceOutcome o;
        o.ground = rho(0, 0).real();
        for (int i = 0; i < (1 << n_); ++i)
            o.comp += rho(i, i).real();
        return o;
    }

private:
    void apply_layer(Mat& rho, int idx) const
    {
        rho = layers_[idx] * rho * layers_[idx].adjoint();
        ch_.layer.apply(rho);
    }
    void apply_cz(Mat& rho) const
    {
        rho = cz_ * rho * cz_.adjoint();
        ch_.cz.apply(rho);
    }
    void apply_native(Mat& rho, const std::vector<NativeOp>& ops) const
    {
        const int n1 = Clifford1Group::instance().size();
        for (const auto& op : ops) {
            if (op.kind == NativeOp::CZ)
                apply_cz(rho);
            else
                apply_layer(rho, op.c1 * n1 + op.c2);
        }
    }

    int n_;
    GateChannels ch_;
    std::vector<Mat> layers_;
    Mat cz_;
};

void mean_sem(const std::vector<double>& x, double& mean, double& sem)
{
    const double n = static_cast<double>(x.size());
    mean = 0;
    for (double v : x)
        mean += v;
    mean /= n;
    double ss = 0;
    for (double v : x)
        ss += (v - mean) * (v - mean);
    sem = x.size() > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
}

struct FitData {
    const std::vector<int>* m;
    const std::vector<double>* y;
};

int fit_f(const gsl_vector* x, void* data, gsl_vector* f)
{
    auto* d = static_cast<FitData*>(data);
    const double a = gsl_vector_get(x, 0), p = gsl_vector_get(x, 1), b = gsl_vector_get(x, 2);
    for (size_t i = 0; i < d->m->size(); ++i)
        gsl_vector_set(f, i, a * std::pow(p, (*d->m)[i]) + b - (*d->y)[i]);
    return GSL_SUCCESS;
}

int fit_df(const gsl_vector* x, void* data, gsl_matrix* j)
{
    auto* d = static_cast<FitData*>(data);
    const double a = gsl_vector_get(x, 0), p = gsl_vector_get(x, 1);
    for (size_t i = 0; i < d->m->size(); ++i) {
        const int m = (*d->m)[i];
        gsl_matrix_set(j, i, 0, std::pow(p, m));
        gsl_matrix_set(j, i, 1, m == 0 ? 0.0 : a * m * std::pow(p, m - 1));
        gsl_matrix_set(j, i, 2, 1.0);
    }
    return GSL_SUCCESS;
}

} // namespace

void NoiseModel::validate() const
{
    for (const auto& q : qubits) {
        if (q.t1 < 0 || q.t2e < 0)
            throw ConfigError("noise model: coherence times must be non-negative");
        if (q.t1 > 0 && q.t2e > 2.0 * q.t1 * (1 + 1e-12))
            throw ConfigError("noise model: T2E cannot exceed 2 T1");
    }
    if (!(gate_time_1q > 0) || !(gate_time_cz > 0))
        throw ConfigError("noise model: gate times must be positive");
    for (double r : {depolarizing_1q, depolarizing_cz, leakage_cz, seepage_cz})
        if (!(r >= 0 && r <= 1))
            throw ConfigError("noise model: rates must lie in [0, 1]");
    if (flux_noise_amp < 0)
        throw ConfigError("noise model: flux-noise amplitude must be non-negative");
}

bool NoiseModel::noiseless() const
{
    for (const auto& q : qubits)
        if (q.t1 > 0 || q.t2e > 0)
            return false;
    return depolarizing_1q == 0 && depolarizing_cz == 0 && leakage_cz == 0 && seepage_cz == 0 &&
           (flux_noise_amp == 0 || flux_slope == 0);
}

double depolarizing_for_error(double r, int d)
{
    if (d < 2)
        throw ConfigError("depolarizing_for_error: dimension must be at least 2");
    return r * d / (d - 1.0);
}

RBFit fit_exponential(const std::vector<int>& m, const std::vector<double>& y, double b_seed)
{
    if (m.size() != y.size() || m.empty())
        throw ConfigError("RB fit: lengths and data must be non-empty and of equal size");
    RBFit r;
    double spread = 0;
    for (double v : y)
        spread = std::max(spread, std::abs(v - y.front()));
    if (spread < 1e-12) {
        r.bypassed = true;
        r.p = 1;
        r.b = b_seed;
        r.a = y.front() - b_seed;
        return r;
    }
    if (m.size() < 4)
        throw ConfigError("RB fit: need at least four sequence lengths");

    size_t lo = 0, hi = 0;
    for (size_t i = 0; i < m.size(); ++i) {
        if (m[i] < m[lo])
            lo = i;
        if (m[i] > m[hi])
            hi = i;
    }
    double p0 = 0.99;
    const double ratio = (y[hi] - b_seed) / (y[lo] - b_seed);
    if (ratio > 0 && m[hi] > m[lo])
        p0 = std::clamp(std::pow(ratio, 1.0 / (m[hi] - m[lo])), 0.5, 0.999999);
    const double a0 = (y[lo] - b_seed) / std::pow(p0, m[lo]);

    FitData data{&m, &y};
    gsl_multifit_nlinear_fdf fdf{};
    fdf.f = fit_f;
    fdf.df = fit_df;
    fdf.n = m.size();
    fdf.p = 3;
    fdf.params = &data;
    gsl_multifit_nlinear_parameters par = gsl_multifit_nlinear_default_parameters();
    gsl_multifit_nlinear_workspace* w =
        gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &par, m.size(), 3);
    gsl_vector* x = gsl_vector_alloc(3);
    gsl_vector_set(x, 0, a0);
    gsl_vector_set(x, 1, p0);
    gsl_vector_set(x, 2, b_seed);
    gsl_multifit_nlinear_init(x, &fdf, w);
    int info = 0;
    gsl_multifit_nlinear_driver(500, 1e-14, 1e-14, 1e-14, nullptr, nullptr, &info, w);
    const gsl_vector* sol = gsl_multifit_nlinear_position(w);
    r.a = gsl_vector_get(sol, 0);
    r.p = gsl_vector_get(sol, 1);
    r.b = gsl_vector_get(sol, 2);

    gsl_matrix* cov = gsl_matrix_alloc(3, 3);
    gsl_matrix* jac = gsl_multifit_nlinear_jac(w);
    gsl_multifit_nlinear_covar(jac, 0.0, cov);
    double chi2 = 0;
    gsl_blas_ddot(gsl_multifit_nlinear_residual(w), gsl_multifit_nlinear_residual(w), &chi2);
    const double dof = static_cast<double>(m.size()) - 3.0;
    const double scale = dof > 0 ? chi2 / dof : 0.0;
    r.sigma_a = std::sqrt(std::max(0.0, scale * gsl_matrix_get(cov, 0, 0)));
    r.sigma_p = std::sqrt(std::max(0.0, scale * gsl_matrix_get(cov, 1, 1)));
    r.sigma_b = std::sqrt(std::max(0.0, scale * gsl_matrix_get(cov, 2, 2)));
    gsl_matrix_free(cov);
    gsl_vector_free(x);
    gsl_multifit_nlinear_free(w);

    r.valid = std::isfinite(r.p) && r.p > 0 && r.p <= 1.0 + 1e-9;
    return r;
}

RBDataset run_rb(const RBSpec& spec, const NoiseModel& noise)
{
    noise.validate();
    if (spec.n_qubits != 1 && spec.n_qubits != 2)
        throw ConfigError("RB: n_qubits must be 1 or 2");
    if (spec.lengths.empty())
        throw ConfigError("RB: sequence lengths must be non-empty");
    for (int m : spec.lengths)
        if (m < 0)
            throw ConfigError("RB: sequence lengths must be non-negative");
    if (spec.sequences < 1)
        throw ConfigError("RB: need at least one sequence per length");
    if (spec.interleave_cz && spec.n_qubits != 2)
        throw ConfigError("RB: CZ interleaving needs two qubits");

    const Simulator sim(noise, spec.n_qubits);
    const size_t nl = spec.lengths.size(), ns = static_cast<size_t>(spec.sequences);
    std::vector<SequenceOutcome> out(nl * ns);
    auto work = [&](size_t begin, size_t stride) {
        for (size_t t = begin; t < out.size(); t += stride) {
            const size_t li = t / ns, si = t % ns;
            // Per-sequence stream; the interleaved run reuses the reference Cliffords.
            std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                              static_cast<std::uint32_t>(spec.lengths[li]), static_cast<std::uint32_t>(si)};
            std::mt19937_64 rng(seq);
            out[t] = sim.run(spec.lengths[li], spec.interleave_cz, rng);
        }
    };
    const int threads = std::max(1, spec.threads);
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < threads; ++k)
            pool.emplace_back(work, static_cast<size_t>(k), static_cast<size_t>(threads));
        for (auto& th : pool)
            th.join();
    }

    RBDataset d;
    d.n_qubits = spec.n_qubits;
    d.interleaved = spec.interleave_cz;
    d.lengths = spec.lengths;
    for (size_t li = 0; li < nl; ++li) {
        std::vector<double> g(ns), c(ns);
        for (size_t si = 0; si < ns; ++si) {
            g[si] = out[li * ns + si].ground;
            c[si] = out[li * ns + si].comp;
        }
        double mu, se;
        mean_sem(g, mu, se);
        d.mean.push_back(mu);
        d.sem.push_back(se);
        mean_sem(c, mu, se);
        d.comp_mean.push_back(mu);
        d.comp_sem.push_back(se);
    }
    d.fit = fit_exponential(d.lengths, d.mean, 1.0 / d.dim());
    d.error = (1.0 - 1.0 / d.dim()) * (1.0 - d.fit.p);
    return d;
}

InterleavedError interleaved_error(double p_ref, double p_int, int d)
{
    if (!(p_ref > 0))
        throw ConfigError("interleaved_error: p_ref must be positive");
    InterleavedError e;
    e.r = (d - 1.0) / d * (1.0 - p_int / p_ref);
    e.negative = p_int > p_ref;
    return e;
}

InterleavedError interleaved_error(const RBDataset& ref, const RBDataset& inter, int d)
{
    if (!ref.fit.valid || !inter.fit.valid)
        throw NumericError("interleaved_error: reference or interleaved fit is degenerate");
    InterleavedError e = interleaved_error(ref.fit.p, inter.fit.p, d);
    const double sigma = std::hypot(ref.fit.sigma_p, inter.fit.sigma_p);
    e.negative = inter.fit.p > ref.fit.p + sigma;
    return e;
}

LRBReport leakage_rb(const RBDataset& ref, const RBDataset& inter)
{
    if (ref.n_qubits != 2 || inter.n_qubits != 2)
        throw ConfigError("leakage RB needs two-qubit datasets");
    if (ref.lengths != inter.lengths)
        throw ConfigError("leakage RB: reference and interleaved lengths differ");
    LRBReport r;
    r.leak_ref = fit_exponential(ref.lengths, ref.comp_mean, 0.0);
    r.leak_int = fit_exponential(inter.lengths, inter.comp_mean, 0.0);
    auto l1 = [](const RBFit& f) { return f.bypassed ? 0.0 : (1.0 - f.p) * (1.0 - f.b); };
    r.p_ref = r.leak_ref.p;
    r.b_ref = r.leak_ref.b;
    r.l1_ref = l1(r.leak_ref);
    r.l1_int = l1(r.leak_int);
    r.l1_cz = 1.0 - (1.0 - r.l1_int) / (1.0 - r.l1_ref);

    auto q_data = [](const RBDataset& d) {
        std::vector<double> y(d.mean.size());
        for (size_t i = 0; i < y.size(); ++i)
            y[i] = d.mean[i] - 0.25 * d.comp_mean[i];
        return y;
    };
    r.q_fit_ref = fit_exponential(ref.lengths, q_data(ref), 0.0);
    r.q_fit_int = fit_exponential(inter.lengths, q_data(inter), 0.0);
    if (!r.q_fit_ref.valid || !r.q_fit_int.valid)
        throw NumericError("leakage RB: decay fit is degenerate (q outside (0, 1])");
    r.q_ref = r.q_fit_ref.p;
    r.q_int = r.q_fit_int.p;
    r.r_cz = 0.75 * (1.0 - r.q_int / r.q_ref);
    r.f_cz = 1.0 - r.r_cz - r.l1_cz / 4.0;
    return r;
}

LRBReport leakage_rb(const RBSpec& spec, const NoiseModel& noise)
{
    RBSpec s = spec;
    s.n_qubits = 2;
    s.interleave_cz = false;
    const RBDataset ref = run_rb(s, noise);
    s.interleave_cz = true;
    const RBDataset inter = run_rb(s, noise);
    return leakage_rb(ref, inter);
}

void write_rb_csv(const std::string& path, const RBDataset& d)
{
    std::ofstream os(path);
    if (!os)
        throw ConfigError("cannot write " + path);
    os << "m,mean,stderr,comp_mean,comp_stderr\n" << std::setprecision(17);
    for (size_t i = 0; i < d.lengths.size(); ++i)
        os << d.lengths[i] << ',' << d.mean[i] << ',' << d.sem[i] << ',' << d.comp_mean[i] << ','
           << d.comp_sem[i] << '\n';
}

RBDataset read_rb_csv(const std::string& path, int n_qubits)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot read " + path);
    std::string line;
    std::getline(is, line);
    if (line.rfind("m,mean,stderr", 0) != 0)
        throw ConfigError(path + ": expected header starting with m,mean,stderr");
    RBDataset d;
    d.n_qubits = n_qubits;
    int row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ','))
            try {
                v.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError(path + ": bad number on row " + std::to_string(row));
            }
        if (v.size() != 3 && v.size() != 5)
            throw ConfigError(path + ": row " + std::to_string(row) + " needs 3 or 5 columns");
        if (v[1] < 0 || v[1] > 1)
            throw ConfigError(path + ": survival outside [0, 1] on row " + std::to_string(row));
        d.lengths.push_back(static_cast<int>(std::lround(v[0])));
        d.mean.push_back(v[1]);
        d.sem.push_back(v[2]);
        d.comp_mean.push_back(v.size() == 5 ? v[3] : 1.0);
        d.comp_sem.push_back(v.size() == 5 ? v[4] : 0.0);
    }
    d.fit = fit_exponential(d.lengths, d.mean, 1.0 / d.dim());
    d.error = (1.0 - 1.0 / d.dim()) * (1.0 - d.fit.p);
    return d;
}

} // namespace tft
