#include "tftsim/clifford.hpp"

#include "tftsim/errors.hpp"

#include <cmath>
#include <complex>
#include <deque>
#include <numbers>

namespace tft {

namespace {
using cd = std::complex<double>;

Eigen::Matrix2cd rotation(double theta, bool about_x)
{
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    Eigen::Matrix2cd u;
    if (about_x)
        u << c, cd(0, -s), cd(0, -s), c;
    else
        u << c, -s, s, c;
    return u;
}
} // namespace

const char* gate_name(Gate1 g)
{
    switch (g) {
    case Gate1::I: return "I";
    case Gate1::X: return "X";
    case Gate1::Xm: return "-X";
    case Gate1::Y: return "Y";
    case Gate1::Ym: return "-Y";
    case Gate1::X2: return "X/2";
    case Gate1::X2m: return "-X/2";
    case Gate1::Y2: return "Y/2";
    case Gate1::Y2m: return "-Y/2";
    }
    return "?";
}

Eigen::Matrix2cd gate_unitary(Gate1 g)
{
    constexpr double pi = std::numbers::pi;
    switch (g) {
    case Gate1::I: return Eigen::Matrix2cd::Identity();
    case Gate1::X: return rotation(pi, true);
    case Gate1::Xm: return rotation(-pi, true);
    case Gate1::Y: return rotation(pi, false);
    case Gate1::Ym: return rotation(-pi, false);
    case Gate1::X2: return rotation(pi / 2, true);
    case Gate1::X2m: return rotation(-pi / 2, true);
    case Gate1::Y2: return rotation(pi / 2, false);
    case Gate1::Y2m: return rotation(-pi / 2, false);
    }
    return Eigen::Matrix2cd::Identity();
}

size_t PhaseKeyHash::operator()(const PhaseKey& k) const noexcept
{
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t x : k.v) {
        h ^= static_cast<std::uint64_t>(x);
        h *= 1099511628211ull;
    }
    return static_cast<size_t>(h);
}

PhaseKey phase_key(const Eigen::MatrixXcd& u)
{
    // Rotate the first entry with non-negligible magnitude onto the positive real axis.
    cd ref = 1.0;
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
        bool done = false;
        for (Eigen::Index i = 0; i < u.rows(); ++i)
            if (std::abs(u(i, j)) > 1e-3) {
                ref = std::conj(u(i, j)) / std::abs(u(i, j));
                done = true;
                break;
            }
        if (done)
            break;
    }
    PhaseKey k;
    k.v.reserve(2 * u.size());
    for (Eigen::Index j = 0; j < u.cols(); ++j)
        for (Eigen::Index i = 0; i < u.rows(); ++i) {
            const cd z = u(i, j) * ref;
            k.v.push_back(std::llround(z.real() * 1e6));
            k.v.push_back(std::llround(z.imag() * 1e6));
        }
    return k;
}

// ---------------------------------------------------------------------------

const Clifford1Group& Clifford1Group::instance()
{
    static const Clifford1Group g;
    return g;
}

Clifford1Group::Clifford1Group()
{
    const std::array<Gate1, 8> gens{Gate1::X, Gate1::Xm, Gate1::Y, Gate1::Ym,
                                    Gate1::X2, Gate1::X2m, Gate1::Y2, Gate1::Y2m};
    unitaries_.push_back(Eigen::Matrix2cd::Identity());
    words_.push_back({Gate1::I});
    index_.emplace(phase_key(unitaries_[0]), 0);
    // Breadth-first search gives each element a shortest word.
    for (size_t head = 0; head < unitaries_.size(); ++head) {
        for (Gate1 g : gens) {
            const Eigen::Matrix2cd u = gate_unitary(g) * unitaries_[head];
            PhaseKey k = phase_key(u);
            if (index_.count(k))
                continue;
            index_.emplace(std::move(k), static_cast<int>(unitaries_.size()));
            unitaries_.push_back(u);
            std::vector<Gate1> w = head == 0 ? std::vector<Gate1>{} : words_[head];
            w.push_back(g);
            words_.push_back(std::move(w));
        }
    }
    if (unitaries_.size() != 24)
        throw NumericError("single-qubit Clifford closure did not produce 24 elements");
    const int n = size();
    product_.assign(n, std::vector<int>(n));
    inverse_.assign(n, -1);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            product_[a][b] = find(unitaries_[a] * unitaries_[b]);
            if (product_[a][b] == 0)
                inverse_[a] = b;
        }
}

int Clifford1Group::find(const Eigen::Matrix2cd& u) const
{
    auto it = index_.find(phase_key(u));
    return it == index_.end() ? -1 : it->second;
}

int Clifford1Group::order(int i) const
{
    int k = 1, x = i;
    while (x != identity()) {
        x = compose(x, i);
        ++k;
    }
    return k;
}

// ---------------------------------------------------------------------------

Eigen::Matrix4cd cz_unitary()
{
    Eigen::Matrix4cd u = Eigen::Matrix4cd::Identity();
    u(3, 3) = -1;
    return u;
}

Eigen::Matrix4cd layer_unitary(int c1, int c2)
{
    const auto& g = Clifford1Group::instance();
    const Eigen::Matrix2cd& a = g.unitary(c1);
    const Eigen::Matrix2cd& b = g.unitary(c2);
    Eigen::Matrix4cd u;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            u.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return u;
}

Eigen::Matrix4cd native_unitary(const std::vector<NativeOp>& ops)
{
    Eigen::Matrix4cd u = Eigen::Matrix4cd::Identity();
    for (const auto& op : ops)
        u = (op.kind == NativeOp::CZ ? cz_unitary() : layer_unitary(op.c1, op.c2)) * u;
    return u;
}

const Clifford2Group& Clifford2Group::instance()
{
    static const Clifford2Group g;
    return g;
}

Clifford2Group::Clifford2Group()
{
    const int n1 = Clifford1Group::instance().size();
    std::vector<Eigen::Matrix4cd> layers;
    layers.reserve(n1 * n1);
    for (int a = 0; a < n1; ++a)
        for (int b = 0; b < n1; ++b)
            layers.push_back(layer_unitary(a, b));

    auto add_coset = [&](const Eigen::Matrix4cd& x, const std::vector<NativeOp>& prefix, int cz) {
        for (int a = 0; a < n1; ++a)
            for (int b = 0; b < n1; ++b) {
                const Eigen::Matrix4cd u = layers[a * n1 + b] * x;
                PhaseKey k = phase_key(u);
                if (index_.count(k))
                    continue;
                index_.emplace(std::move(k), size());
                unitaries_.push_back(u);
                std::vector<NativeOp> w = prefix;
                w.push_back({NativeOp::Layer, a, b});
                words_.push_back(std::move(w));
                cz_.push_back(cz);
            }
    };

    add_coset(Eigen::Matrix4cd::Identity(), {}, 0);
    // Layers of minimal CZ count are unions of left cosets of the local group, so a
    // coset is either entirely new or already present.
    size_t begin = 0;
    for (int cz = 1; cz <= 3; ++cz) {
        const size_t end = unitaries_.size();
        for (size_t i = begin; i < end; ++i) {
            const Eigen::Matrix4cd x = cz_unitary() * unitaries_[i];
            if (index_.count(phase_key(x)))
                continue;
            std::vector<NativeOp> prefix = words_[i];
            prefix.push_back({NativeOp::CZ, 0, 0});
            add_coset(x, prefix, cz);
        }
        begin = end;
    }
    if (size() != 11520)
        throw NumericError("two-qubit Clifford closure did not produce 11520 elements");
}

std::array<int, 4> Clifford2Group::class_sizes() const
{
    std::array<int, 4> c{};
    for (int k : cz_)
        ++c[k];
    return c;
}

int Clifford2Group::find(const Eigen::Matrix4cd& u) const
{
    auto it = index_.find(phase_key(u));
    return it == index_.end() ? -1 : it->second;
}

int Clifford2Group::inverse(int i) const { return find(unitaries_[i].adjoint()); }

int Clifford2Group::compose(int a, int b) const { return find(unitaries_[a] * unitaries_[b]); }

int Clifford2Group::sample(std::mt19937_64& rng) const
{
    return std::uniform_int_distribution<int>(0, size() - 1)(rng);
}

} // namespace tft
