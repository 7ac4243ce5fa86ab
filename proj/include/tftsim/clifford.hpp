#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <random>
#include <unordered_map>
#include <vector>

namespace tft {

// Native single-qubit pulses.
enum class Gate1 { I, X, Xm, Y, Ym, X2, X2m, Y2, Y2m };

const char* gate_name(Gate1 g);
Eigen::Matrix2cd gate_unitary(Gate1 g);

// Key of a unitary up to global phase.
struct PhaseKey {
    std::vector<std::int64_t> v;
    bool operator==(const PhaseKey&) const = default;
};
struct PhaseKeyHash {
    size_t operator()(const PhaseKey& k) const noexcept;
};
PhaseKey phase_key(const Eigen::MatrixXcd& u);

// The 24 single-qubit Cliffords, each with a shortest decomposition into native pulses.
class Clifford1Group {
public:
    static const Clifford1Group& instance();

    int size() const { return static_cast<int>(unitaries_.size()); }
    int identity() const { return 0; }
    const Eigen::Matrix2cd& unitary(int i) const { return unitaries_[i]; }
    const std::vector<Gate1>& decomposition(int i) const { return words_[i]; }
    int compose(int a, int b) const { return product_[a][b]; } // U_a U_b
    int inverse(int i) const { return inverse_[i]; }
    int find(const Eigen::Matrix2cd& u) const; // -1 when not a Clifford
    int order(int i) const;

private:
    Clifford1Group();
    std::vector<Eigen::Matrix2cd> unitaries_;
    std::vector<std::vector<Gate1>> words_;
    std::vector<std::vector<int>> product_;
    std::vector<int> inverse_;
    std::unordered_map<PhaseKey, int, PhaseKeyHash> index_;
};

// One step of a native two-qubit sequence: a layer of single-qubit Cliffords
// (qubit 1, qubit 2) or a CZ.
struct NativeOp {
    enum Kind { Layer, CZ } kind = Layer;
    int c1 = 0, c2 = 0;
};

// The 11520 two-qubit Cliffords. Elements are grouped by their minimal CZ count
// (576, 5184, 5184, 576) and stored as alternating layers and CZs.
// Basis order |q1 q2>, qubit 1 most significant.
class Clifford2Group {
public:
    static const Clifford2Group& instance();

    int size() const { return static_cast<int>(unitaries_.size()); }
    const Eigen::Matrix4cd& unitary(int i) const { return unitaries_[i]; }
    const std::vector<NativeOp>& decomposition(int i) const { return words_[i]; }
    int cz_count(int i) const { return cz_[i]; }
    std::array<int, 4> class_sizes() const;
    int find(const Eigen::Matrix4cd& u) const;
    int inverse(int i) const;
    int compose(int a, int b) const; // U_a U_b

    int sample(std::mt19937_64& rng) const;

private:
    Clifford2Group();
    std::vector<Eigen::Matrix4cd> unitaries_;
    std::vector<std::vector<NativeOp>> words_;
    std::vector<int> cz_;
    std::unordered_map<PhaseKey, int, PhaseKeyHash> index_;
};

Eigen::Matrix4cd cz_unitary();
Eigen::Matrix4cd layer_unitary(int c1, int c2);
Eigen::Matrix4cd native_unitary(const std::vector<NativeOp>& ops);

} // namespace tft
