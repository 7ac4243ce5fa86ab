#include "tftsim/distortion.hpp"

#include "tftsim/errors.hpp"

#include <Eigen/Dense>
#include <fftw3.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace tft {

namespace {

using cd = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Transposed direct form II state of one section.
struct SectionState {
    double s1 = 0, s2 = 0;
    double step(const Section& s, double x)
    {
        const double y = s.b0 * x + s1;
        s1 = s.b1 * x - s.a1 * y + s2;
        s2 = s.b2 * x - s.a2 * y;
        return y;
    }
};

std::vector<double> apply_stage(const FilterStage& st, const std::vector<double>& x)
{
    std::vector<double> y(x.size());
    std::vector<SectionState> state(st.sections.size());
    for (size_t n = 0; n < x.size(); ++n) {
        double acc = st.direct * x[n];
        for (size_t i = 0; i < st.sections.size(); ++i)
            acc += state[i].step(st.sections[i], x[n]);
        y[n] = acc;
    }
    return y;
}

std::vector<double> invert_stage(const FilterStage& st, const std::vector<double>& y)
{
    const double h0 = st.leading();
    std::vector<double> x(y.size());
    std::vector<SectionState> state(st.sections.size());
    for (size_t n = 0; n < y.size(); ++n) {
        double past = 0;
        for (const auto& s : state)
            past += s.s1;
        const double xn = (y[n] - past) / h0;
        for (size_t i = 0; i < st.sections.size(); ++i)
            state[i].step(st.sections[i], xn);
        x[n] = xn;
    }
    return x;
}

// State-space (A, B, C) of the parallel sections; D is leading().
void state_space(const FilterStage& st, Eigen::MatrixXd& a, Eigen::VectorXd& b, Eigen::RowVectorXd& c)
{
    int dim = 0;
    for (const auto& s : st.sections)
        dim += (s.a2 != 0 || s.b2 != 0) ? 2 : 1;
    a.setZero(dim, dim);
    b.setZero(dim);
    c.setZero(dim);
    int k = 0;
    for (const auto& s : st.sections) {
        if (s.a2 != 0 || s.b2 != 0) {
            a(k, k) = -s.a1;
            a(k, k + 1) = 1;
            a(k + 1, k) = -s.a2;
            b(k) = s.b1 - s.a1 * s.b0;
            b(k + 1) = s.b2 - s.a2 * s.b0;
            c(k) = 1;
            k += 2;
        } else {
            a(k, k) = -s.a1;
            b(k) = s.b1 - s.a1 * s.b0;
            c(k) = 1;
            k += 1;
        }
    }
}

std::vector<cd> eigenvalues(const Eigen::MatrixXd& m)
{
    std::vector<cd> out;
    if (m.rows() == 0)
        return out;
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        out.push_back(es.eigenvalues()(i));
    return out;
}

void require_same_grid(const Waveform& a, const Waveform& b, double sample_rate)
{
    if (a.samples.size() != b.samples.size())
        throw ConfigError("coupler and qubit 2 waveforms must have equal length");
    if (std::abs(a.sample_rate - b.sample_rate) > 1e-12 || std::abs(a.sample_rate - sample_rate) > 1e-12)
        throw ConfigError("waveform and filter sample rates differ");
}

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b, double sb = 1.0)
{
    std::vector<double> r(a.size());
    for (size_t i = 0; i < a.size(); ++i)
        r[i] = a[i] + sb * b[i];
    return r;
}

Waveform like(const Waveform& ref, std::vector<double> samples)
{
    Waveform w = ref;
    w.samples = std::move(samples);
    return w;
}

} // namespace

void StepResponseModel::validate() const
{
    for (const auto& e : exps)
        if (!(e.tau > 0) || !std::isfinite(e.amplitude))
            throw ConfigError("step response: every exponential needs τ > 0 and a finite amplitude");
    for (const auto& o : oscs)
        if (!(o.tau > 0) || !(o.period > 0) || !std::isfinite(o.amplitude) || !std::isfinite(o.phase))
            throw ConfigError("step response: every oscillation needs τ > 0, period > 0 and finite values");
}

double step_response(const StepResponseModel& m, double t)
{
    if (t < 0)
        return 0.0;
    double s = m.direct;
    for (const auto& e : m.exps)
        s += e.amplitude * std::exp(-t / e.tau);
    for (const auto& o : m.oscs)
        s += o.amplitude * std::exp(-t / o.tau) * std::cos(kTwoPi * t / o.period + o.phase);
    return s;
}

double FilterStage::leading() const
{
    double h = direct;
    for (const auto& s : sections)
        h += s.b0;
    return h;
}

cd FilterStage::response(double omega) const
{
    const cd z1 = std::polar(1.0, -omega), z2 = z1 * z1;
    cd h = direct;
    for (const auto& s : sections)
        h += (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return h;
}

std::vector<cd> FilterStage::poles() const
{
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    Eigen::RowVectorXd c;
    state_space(*this, a, b, c);
    return eigenvalues(a);
}

std::vector<cd> FilterStage::zeros() const
{
    const double h0 = leading();
    if (std::abs(h0) < 1e-12)
        throw NumericError("filter stage has no leading term; it cannot be inverted");
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    Eigen::RowVectorXd c;
    state_space(*this, a, b, c);
    return eigenvalues(a - b * c / h0);
}

FilterCascade::FilterCascade(std::vector<FilterStage> stages, double sample_rate)
    : stages_(std::move(stages)), sample_rate_(sample_rate)
{
    if (!(sample_rate > 0))
        throw ConfigError("filter sample rate must be positive");
    for (const auto& st : stages_)
        for (const cd& p : st.poles())
            if (!(std::abs(p) < 1.0)) {
                std::ostringstream os;
                os << "unstable filter section: pole at |z| = " << std::abs(p);
                throw NumericError(os.str());
            }
}

FilterCascade FilterCascade::zero(double sample_rate)
{
    FilterStage z;
    z.direct = 0;
    return FilterCascade({z}, sample_rate);
}

std::vector<double> FilterCascade::apply(const std::vector<double>& x) const
{
    std::vector<double> y = x;
    for (const auto& st : stages_)
        y = apply_stage(st, y);
    return y;
}

bool FilterCascade::invertible() const
{
    for (const auto& st : stages_) {
        if (std::abs(st.leading()) < 1e-12)
            return false;
        for (const cd& z : st.zeros())
            if (!(std::abs(z) < 1.0 - 1e-12))
                return false;
    }
    return true;
}

std::vector<double> FilterCascade::apply_inverse(const std::vector<double>& y) const
{
    if (!invertible())
        throw NumericError("filter cascade has zeros on or outside the unit circle; no stable inverse");
    std::vector<double> x = y;
    for (auto it = stages_.rbegin(); it != stages_.rend(); ++it)
        x = invert_stage(*it, x);
    return x;
}

cd FilterCascade::response(double omega) const
{
    cd h = 1.0;
    for (const auto& st : stages_)
        h *= st.response(omega);
    return h;
}

FilterStage discretize(const StepResponseModel& m, double sample_rate)
{
    m.validate();
    if (!(sample_rate > 0))
        throw ConfigError("discretize: sample_rate must be positive");
    const double dt = 1e-3 / sample_rate; // µs
    auto check_tau = [&](double tau) {
        if (!(tau / dt > 2.0)) {
            std::ostringstream os;
            os << "discretize: τ = " << tau << " µs spans fewer than 2 samples at " << sample_rate << " GS/s";
            throw ConfigError(os.str());
        }
    };
    FilterStage st;
    st.direct = m.direct;
    // Step invariance: H(z) = (1 - z^-1) Z{s[n]}.
    for (const auto& e : m.exps) {
        check_tau(e.tau);
        const double r = std::exp(-dt / e.tau);
        st.sections.push_back(Section{e.amplitude, -e.amplitude, 0.0, -r, 0.0});
    }
    for (const auto& o : m.oscs) {
        check_tau(o.tau);
        const double rho = std::exp(-dt / o.tau);
        const double w = kTwoPi * dt / o.period;
        const double c0 = std::cos(o.phase), c1 = rho * std::cos(w - o.phase);
        const double a = o.amplitude;
        st.sections.push_back(Section{a * c0, -a * (c0 + c1), a * c1, -2.0 * rho * std::cos(w), rho * rho});
    }
    return st;
}

FilterCascade discretize(const ChannelModel& c, double sample_rate)
{
    std::vector<FilterStage> stages;
    for (const auto& m : c)
        stages.push_back(discretize(m, sample_rate));
    return FilterCascade(std::move(stages), sample_rate);
}

TransferMatrix discretize(const ChannelSet& s, double sample_rate)
{
    auto cross = [&](const ChannelModel& m) {
        return m.empty() ? FilterCascade::zero(sample_rate) : discretize(m, sample_rate);
    };
    TransferMatrix tm;
    tm.sample_rate = sample_rate;
    tm.hcc = discretize(s.cc, sample_rate);
    tm.h22 = discretize(s.c22, sample_rate);
    tm.hc2 = cross(s.c2);
    tm.h2c = cross(s.c2c);
    if (!tm.hcc.invertible() || !tm.h22.invertible())
        throw NumericError("self-channel filters are not minimum phase; predistortion is unavailable");
    return tm;
}

std::vector<std::string> channel_preset_names() { return {"device_a", "device_b", "identity"}; }

ChannelSet channel_preset(const std::string& name, double full_scale_mv)
{
    if (!(full_scale_mv > 0))
        throw ConfigError("full_scale_mv must be positive");
    const double k = 1.0 / full_scale_mv;
    auto stage = [&](std::vector<std::pair<double, double>> e, std::vector<OscTerm> o = {}) {
        StepResponseModel m;
        for (auto [a, tau] : e)
            m.exps.push_back({a * k, tau});
        for (auto t : o) {
            t.amplitude *= k;
            m.oscs.push_back(t);
        }
        return m;
    };
    auto cross = [&](std::vector<std::pair<double, double>> e) {
        StepResponseModel m = stage(std::move(e));
        m.direct = 0;
        return ChannelModel{m};
    };
    ChannelSet s;
    if (name == "identity")
        return s;
    if (name == "device_a") {
        s.cc = {stage({{5.1, 160.5}}, {{-93.0, 1.9, 489.6, 1.549}}),
                stage({{-27.0, 0.028}}, {{2.4, 0.244, 1.286, -1.683}}),
                stage({{14.6, 0.017}})};
        s.c22 = {stage({{40.0, 126.6}}, {{-8.3, 0.210, 169.7, 0.285}}), stage({{-61.2, 0.012}})};
        s.c2c = cross({{-244.6, 184.9}, {-19.8, 18.7}, {-15.3, 3.51}, {1.4, 14.9}});
        s.c2 = cross({{10.7, 283.2}, {1.1, 40.7}, {1.3, 3.42}});
        return s;
    }
    if (name == "device_b") {
        s.cc = {stage({{-17.65, 179.8}}), stage({{-7.40, 59.3}}), stage({{-2.61, 3.58}}), stage({{-6.51, 0.40}}),
                stage({{-15.3, 54.4}})};
        s.c22 = {stage({{-3.50, 194.1}}), stage({{-0.967, 73.8}}), stage({{-10.1, 0.291}})};
        s.c2c = cross({{158.18, 198.13}, {19.87, 57.2}, {11.0, 5.83}});
        return s;
    }
    throw ConfigError("unknown channel preset '" + name + "'");
}

std::pair<Waveform, Waveform> forward_distort(const Waveform& vc_rt, const Waveform& v2_rt, const TransferMatrix& tm)
{
    require_same_grid(vc_rt, v2_rt, tm.sample_rate);
    const std::vector<double> c_self = tm.hcc.apply(vc_rt.samples);
    const std::vector<double> q_self = tm.h22.apply(v2_rt.samples);
    return {like(vc_rt, add(c_self, tm.hc2.apply(q_self))), like(v2_rt, add(q_self, tm.h2c.apply(c_self)))};
}

std::pair<Waveform, Waveform> predistort(const Waveform& vc, const Waveform& v2, const TransferMatrix& tm,
                                         double series_tol)
{
    require_same_grid(vc, v2, tm.sample_rate);
    if (!(series_tol > 0))
        throw ConfigError("predistort: series_tol must be positive");
    const bool coupled = !(tm.hc2.stages().size() == 1 && tm.hc2.stages()[0].sections.empty() &&
                           tm.hc2.stages()[0].direct == 0) &&
                         !(tm.h2c.stages().size() == 1 && tm.h2c.stages()[0].sections.empty() &&
                           tm.h2c.stages()[0].direct == 0);
    std::vector<double> a = add(vc.samples, tm.hc2.apply(v2.samples), -1.0);
    std::vector<double> b = add(v2.samples, tm.h2c.apply(vc.samples), -1.0);
    if (coupled) {
        // Loop gain on a frequency grid: singular points and series convergence.
        double lmax = 0;
        const int grid = 4096;
        for (int k = 0; k <= grid; ++k) {
            const double w = std::numbers::pi * k / grid;
            const cd l = tm.h2c.response(w) * tm.hc2.response(w);
            if (std::abs(1.0 - l) < 1e-3)
                throw NumericError("predistort: 1 - H2c Hc2 is near-singular");
            lmax = std::max(lmax, std::abs(l));
        }
        if (lmax >= 0.9)
            throw NumericError("predistort: loop gain too large for the series inversion; use predistort_fft");
        auto loop = [&](const std::vector<double>& x) { return tm.h2c.apply(tm.hc2.apply(x)); };
        for (std::vector<double>* v : {&a, &b}) {
            double scale = 0;
            for (double x : *v)
                scale = std::max(scale, std::abs(x));
            std::vector<double> term = *v;
            for (int k = 0; k < 200; ++k) {
                term = loop(term);
                double m = 0;
                for (size_t i = 0; i < term.size(); ++i) {
                    (*v)[i] += term[i];
                    m = std::max(m, std::abs(term[i]));
                }
                if (m <= series_tol * std::max(scale, 1e-300))
                    break;
            }
        }
    }
    return {like(vc, tm.hcc.apply_inverse(a)), like(v2, tm.h22.apply_inverse(b))};
}

std::pair<Waveform, Waveform> predistort_fft(const Waveform& vc, const Waveform& v2, const TransferMatrix& tm,
                                             size_t n_fft)
{
    require_same_grid(vc, v2, tm.sample_rate);
    const size_t n = vc.samples.size();
    if (n_fft < n)
        throw ConfigError("predistort_fft: n_fft shorter than the waveform");
    const size_t nb = n_fft / 2 + 1;
    std::vector<double> buf(n_fft);
    std::vector<cd> fc(nb), f2(nb);
    auto forward = [&](const std::vector<double>& x, std::vector<cd>& out) {
        std::fill(buf.begin(), buf.end(), 0.0);
        std::copy(x.begin(), x.end(), buf.begin());
        fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n_fft), buf.data(),
                                           reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
        fftw_execute(p);
        fftw_destroy_plan(p);
    };
    forward(vc.samples, fc);
    forward(v2.samples, f2);
    for (size_t k = 0; k < nb; ++k) {
        const double w = kTwoPi * static_cast<double>(k) / static_cast<double>(n_fft);
        const cd hcc = tm.hcc.response(w), h22 = tm.h22.response(w);
        const cd hc2 = tm.hc2.response(w), h2c = tm.h2c.response(w);
        const cd det = 1.0 - h2c * hc2;
        if (std::abs(det) < 1e-3)
            throw NumericError("predistort_fft: 1 - H2c Hc2 is near-singular");
        const cd a = (fc[k] - hc2 * f2[k]) / (hcc * det);
        const cd b = (f2[k] - h2c * fc[k]) / (h22 * det);
        fc[k] = a;
        f2[k] = b;
    }
    auto inverse = [&](std::vector<cd>& in) {
        fftw_plan p = fftw_plan_dft_c2r_1d(static_cast<int>(n_fft), reinterpret_cast<fftw_complex*>(in.data()),
                                           buf.data(), FFTW_ESTIMATE);
        fftw_execute(p);
        fftw_destroy_plan(p);
        std::vector<double> out(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n));
        for (double& x : out)
            x /= static_cast<double>(n_fft);
        return out;
    };
    std::vector<double> oc = inverse(fc);
    std::vector<double> o2 = inverse(f2);
    return {like(vc, std::move(oc)), like(v2, std::move(o2))};
}

// ---------------------------------------------------------------------------

namespace {

struct FitProblem {
    const std::vector<ProbePoint>* data;
    const StepFitSpec* spec;
    Eigen::VectorXd y; // relative offsets
    int evaluations = 0;
};

// Design matrix columns of s(τ + T) - s(τ) for the given nonlinear parameters
// (log τ per exponential, then log τ and log period per oscillation).
Eigen::MatrixXd design(const FitProblem& p, const Eigen::VectorXd& theta)
{
    const auto& d = *p.data;
    const StepFitSpec& s = *p.spec;
    const int cols = s.n_exp + 2 * s.n_osc;
    Eigen::MatrixXd m(d.size(), cols);
    for (size_t i = 0; i < d.size(); ++i) {
        const double t0 = d[i].delay, t1 = d[i].delay + s.pulse_duration;
        int c = 0;
        for (int k = 0; k < s.n_exp; ++k, ++c) {
            const double tau = std::exp(theta(k));
            m(i, c) = std::exp(-t1 / tau) - std::exp(-t0 / tau);
        }
        for (int k = 0; k < s.n_osc; ++k) {
            const double tau = std::exp(theta(s.n_exp + 2 * k));
            const double w = kTwoPi / std::exp(theta(s.n_exp + 2 * k + 1));
            m(i, c++) = std::exp(-t1 / tau) * std::cos(w * t1) - std::exp(-t0 / tau) * std::cos(w * t0);
            m(i, c++) = -(std::exp(-t1 / tau) * std::sin(w * t1) - std::exp(-t0 / tau) * std::sin(w * t0));
        }
    }
    return m;
}

double residual_sq(const FitProblem& p, const Eigen::VectorXd& theta, Eigen::VectorXd* coef = nullptr)
{
    const Eigen::MatrixXd m = design(p, theta);
    const Eigen::VectorXd x = m.colPivHouseholderQr().solve(p.y);
    if (coef)
        *coef = x;
    const double r = (m * x - p.y).squaredNorm();
    return std::isfinite(r) ? r : 1e300;
}

double nm_objective(const gsl_vector* v, void* params)
{
    auto* p = static_cast<FitProblem*>(params);
    Eigen::VectorXd theta(v->size);
    for (size_t i = 0; i < v->size; ++i)
        theta(i) = gsl_vector_get(v, i);
    ++p->evaluations;
    return residual_sq(*p, theta);
}

} // namespace

StepFitResult fit_step_response(const std::vector<ProbePoint>& data, const StepFitSpec& spec)
{
    if (spec.n_exp < 0 || spec.n_osc < 0 || spec.n_exp + spec.n_osc == 0)
        throw ConfigError("fit_step_response: need at least one term");
    if (!(spec.pulse_duration > 0) || !(spec.probe_amplitude_mv > 0))
        throw ConfigError("fit_step_response: pulse duration and probe amplitude must be positive");
    const int n_params = 2 * spec.n_exp + 4 * spec.n_osc;
    if (static_cast<int>(data.size()) < 3 * n_params)
        throw ConfigError("fit_step_response: need at least 3 samples per free parameter");

    FitProblem prob{&data, &spec, Eigen::VectorXd(data.size()), 0};
    double dmin = 1e300, dmax = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        prob.y(i) = data[i].offset / spec.probe_amplitude_mv;
        dmin = std::min(dmin, std::max(data[i].delay, 0.0));
        dmax = std::max(dmax, data[i].delay);
    }
    const int nl = spec.n_exp + 2 * spec.n_osc;
    Eigen::VectorXd theta(nl);
    const bool use_init = static_cast<int>(spec.initial.exps.size()) == spec.n_exp &&
                          static_cast<int>(spec.initial.oscs.size()) == spec.n_osc;
    const double lo = std::max(std::max(dmin, 1e-3), 0.05 * spec.pulse_duration);
    const double hi = 2.0 * (dmax + spec.pulse_duration);
    for (int k = 0; k < spec.n_exp; ++k) {
        const double f = spec.n_exp == 1 ? 0.5 : static_cast<double>(k) / (spec.n_exp - 1);
        theta(k) = use_init ? std::log(spec.initial.exps[k].tau) : std::log(lo) + f * (std::log(hi) - std::log(lo));
    }
    for (int k = 0; k < spec.n_osc; ++k) {
        theta(spec.n_exp + 2 * k) = use_init ? std::log(spec.initial.oscs[k].tau) : std::log(std::sqrt(lo * hi));
        theta(spec.n_exp + 2 * k + 1) = use_init ? std::log(spec.initial.oscs[k].period) : std::log(hi);
    }

    gsl_multimin_function fn{nm_objective, static_cast<size_t>(nl), &prob};
    gsl_vector* x = gsl_vector_alloc(nl);
    gsl_vector* step = gsl_vector_alloc(nl);
    int iterations = 0;
    bool converged = false;
    // Restart once from the optimum to escape a collapsed simplex.
    for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i < nl; ++i) {
            gsl_vector_set(x, i, theta(i));
            gsl_vector_set(step, i, pass == 0 ? 0.5 : 0.1);
        }
        gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, nl);
        gsl_multimin_fminimizer_set(m, &fn, x, step);
        int status = GSL_CONTINUE;
        int it = 0;
        while (status == GSL_CONTINUE && it < spec.max_iterations) {
            ++it;
            if (gsl_multimin_fminimizer_iterate(m))
                break;
            status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), 1e-10);
        }
        for (int i = 0; i < nl; ++i)
            theta(i) = gsl_vector_get(m->x, i);
        iterations += it;
        converged = status == GSL_SUCCESS;
        gsl_multimin_fminimizer_free(m);
    }
    gsl_vector_free(x);
    gsl_vector_free(step);

    Eigen::VectorXd coef;
    const double rss = residual_sq(prob, theta, &coef);
    StepFitResult r;
    r.model.direct = 1.0;
    int c = 0;
    for (int k = 0; k < spec.n_exp; ++k)
        r.model.exps.push_back({coef(c++), std::exp(theta(k))});
    for (int k = 0; k < spec.n_osc; ++k) {
        const double ac = coef(c++), as = coef(c++);
        r.model.oscs.push_back({std::hypot(ac, as), std::exp(theta(spec.n_exp + 2 * k)),
                                std::exp(theta(spec.n_exp + 2 * k + 1)), std::atan2(as, ac)});
    }
    r.residual_rms_mv = std::sqrt(rss / static_cast<double>(data.size())) * spec.probe_amplitude_mv;
    r.iterations = iterations;
    r.converged = converged;
    return r;
}

} // namespace tft
