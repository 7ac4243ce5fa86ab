#pragma once

#include "tftsim/circuit.hpp"
#include "tftsim/subsystem.hpp"

#include <Eigen/Dense>

#include <compare>
#include <optional>
#include <string>
#include <vector>

namespace tft {

struct CompositeDims {
    int q1 = 8, c = 10, q2 = 8;
    int size() const { return q1 * c * q2; }
};

struct ProductLabel {
    int n1 = 0, nc = 0, n2 = 0;
    auto operator<=>(const ProductLabel&) const = default;
    std::string str() const; // e.g. "101"
};

// Parses "101" or "1,0,1".
ProductLabel parse_label(const std::string& s);

struct SpectrumOptions {
    CompositeDims dims;
    int charge_cutoff = 30;
    int fluxonium_basis = 100;
    FluxoniumBasis backend = FluxoniumBasis::HarmonicOscillator;
};

// The composite Hamiltonian expressed in the product of subsystem eigenbases.
// Transmon eigenstates carry the phase i^k (see solve_transmon), which makes the
// matrix real symmetric.
class CompositeModel {
public:
    explicit CompositeModel(const DeviceEnergies& dev, SpectrumOptions opt = {});

    const DeviceEnergies& device() const { return dev_; }
    const SpectrumOptions& options() const { return opt_; }
    const CompositeDims& dims() const { return opt_.dims; }
    const SubsystemSolution& qubit1() const { return q1_; }
    const SubsystemSolution& qubit2() const { return q2_; }

    SubsystemSolution coupler(double flux) const;
    Eigen::MatrixXd hamiltonian(double flux) const;
    Eigen::MatrixXd hamiltonian(const SubsystemSolution& coupler) const;
    // Uncoupled energies on the diagonal of hamiltonian(flux).
    Eigen::VectorXd bare_energies(const SubsystemSolution& coupler) const;

    int index(const ProductLabel& l) const;
    ProductLabel label(int index) const;

private:
    DeviceEnergies dev_;
    SpectrumOptions opt_;
    SubsystemSolution q1_, q2_;
    Eigen::MatrixXd m1_, m2_; // imaginary parts of the transmon charge matrices
};

Eigen::MatrixXd build_hamiltonian(const DeviceEnergies& dev, double flux, CompositeDims dims = {});

enum class LabelMode { MaxOverlap, AdiabaticContinuation };

struct LabeledSpectrum {
    double flux = 0;
    CompositeDims dims;
    Eigen::VectorXd energies;          // ascending, GHz
    std::vector<ProductLabel> labels;  // one per eigenstate
    std::vector<double> overlaps;      // |<label|state>|^2
    std::vector<bool> mixed;           // overlap < 0.25
    bool tie_broken = false;           // a label collision was resolved by the energy rule
    Eigen::MatrixXd eigenvectors;      // product-basis columns
    Eigen::MatrixXd coupler_vectors;   // coupler eigenvectors in its solver basis

    int find(const ProductLabel& l) const; // state index or -1
    double energy(const ProductLabel& l) const;
};

// Diagonalize `h` (product basis of `dims`) and label its eigenstates. For
// adiabatic continuation `prev` must be expressed in the same product basis.
LabeledSpectrum labeled_spectrum(const Eigen::MatrixXd& h, CompositeDims dims, LabelMode mode,
                                 const LabeledSpectrum* prev = nullptr);

// Labeled spectrum of the model at `flux`; adiabatic continuation accounts for the
// change of coupler eigenbasis between prev.flux and flux.
LabeledSpectrum labeled_spectrum(const CompositeModel& model, double flux, LabelMode mode,
                                 const LabeledSpectrum* prev = nullptr);

struct ZZValue {
    double flux = 0;
    double zeta_mhz = 0;
    double confidence = 1; // min label overlap of the four computational states
    bool low_confidence = false;
};

// Tracks a small set of labeled states adiabatically through flux, caching the
// visited points so repeated queries (root finding, sweeps) stay cheap.
class StateTracker {
public:
    StateTracker(const CompositeModel& model, std::vector<ProductLabel> labels,
                 double origin_flux = 0.0, double max_step = 0.01);

    struct Point {
        double flux;
        Eigen::VectorXd energies;      // one per tracked label
        Eigen::MatrixXd vectors;       // product-basis eigenvectors per tracked label
        Eigen::MatrixXd coupler_vectors;
        std::vector<double> weights;   // |<label|state>|^2
    };

    const Point& at(double flux);
    const std::vector<ProductLabel>& labels() const { return labels_; }
    int diagonalizations() const { return diag_count_; }

private:
    Point solve_from(const Point& from, double flux, int depth);
    Point initial(double flux);
    const CompositeModel& model_;
    std::vector<ProductLabel> labels_;
    double max_step_;
    int diag_count_ = 0;
    std::vector<Point> cache_; // sorted by flux
};

const std::vector<ProductLabel>& computational_labels(); // 000, 100, 001, 101

ZZValue zz_at(const DeviceEnergies& dev, double flux, const SpectrumOptions& opt = {});
ZZValue zz_from_tracker(StateTracker& tracker, double flux);

struct ZZCurve {
    std::vector<double> flux;
    std::vector<double> zeta_mhz;
    std::vector<double> confidence;
};

ZZCurve sweep_zz(const DeviceEnergies& dev, double flux_lo, double flux_hi, int steps,
                 const SpectrumOptions& opt = {});

struct ZeroZZ {
    double flux = 0;
    double zeta_mhz = 0;
    int iterations = 0;
};

// Bisection to |zeta| < tol_mhz (default 0.1 kHz).
ZeroZZ find_zero_zz(const DeviceEnergies& dev, double lo, double hi, const SpectrumOptions& opt = {},
                    double tol_mhz = 1e-4);

struct AvoidedCrossing {
    double flux = 0;
    double gap_mhz = 0;
    double g_mhz() const { return 0.5 * gap_mhz; }
};

// Golden-section minimization of |E_a - E_b| with both labels tracked adiabatically
// from flux 0.
AvoidedCrossing locate_avoided_crossing(const DeviceEnergies& dev, const ProductLabel& a,
                                        const ProductLabel& b, double lo, double hi,
                                        const SpectrumOptions& opt = {});

struct Transition {
    double flux;
    double frequency_ghz;
    ProductLabel from, to;
};

// Parameters addressable by fit_parameters, in DeviceEnergies field order.
enum class FitParam { ec1, ec2, ecc, ej1, ej2, ejc, el_c, j1c, j2c, j12 };
double& fit_param_ref(DeviceEnergies& d, FitParam p);
FitParam parse_fit_param(const std::string& s);
std::string fit_param_name(FitParam p);

struct SpectrumFit {
    DeviceEnergies device;
    double residual_rms_ghz = 0;
    int iterations = 0;
    bool converged = false;
};

// Nelder-Mead least squares of model transition frequencies against data. Labels
// are assigned by maximum overlap at each flux.
SpectrumFit fit_parameters(const std::vector<Transition>& data, const DeviceEnergies& initial,
                           const std::vector<FitParam>& free, const SpectrumOptions& opt = {},
                           int max_iterations = 2000);

} // namespace tft
