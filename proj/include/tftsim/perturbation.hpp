#pragma once

#include "tftsim/spectrum.hpp"

#include <array>
#include <string>
#include <vector>

namespace tft {

// One signed term of the fourth-order ZZ expansion. `start` is the computational
// state whose energy correction the term belongs to; the contribution already
// carries the +/- sign with which that energy enters E101 - E100 - E001 + E000.
struct PathContribution {
    enum class Kind { Path, Counterterm };
    Kind kind = Kind::Path;
    ProductLabel start;
    std::array<ProductLabel, 3> via{}; // intermediate states l, m, n (paths only)
    double delta_zz_mhz = 0;
    std::string str() const; // "101-011-020-011-101" or "101:counterterm"
};

enum class PathGrouping {
    Branch101,        // only corrections to E101
    AllComputational, // corrections to all four computational energies
};

struct PerturbationOptions {
    CompositeDims dims;
    // Recompute the expansion with every kept-level count raised by this amount to
    // estimate truncation error; 0 disables.
    int remainder_extra_levels = 2;
    PathGrouping grouping = PathGrouping::AllComputational;
    double degeneracy_tol_ghz = 1e-3;
};

struct PerturbationReport {
    double flux = 0;
    int max_order = 4;
    double order2 = 0, order3 = 0, order4 = 0; // ZZ contributions, MHz
    double order4_branch101 = 0;               // E101 part of order 4 alone, MHz
    double remainder = 0;                      // order-(2..max) change under a larger truncation, MHz
    std::vector<PathContribution> path_table;  // sorted by |value| descending, counterterms included
    double path_sum = 0;                       // sum of every path and counterterm in the grouping
};

// Rayleigh-Schrodinger corrections to E000, E100, E001, E101 with the coupling terms as
// the perturbation, combined into ZZ. Throws NumericError on bare near-degeneracies.
PerturbationReport zz_perturbative(const DeviceEnergies& dev, double flux, int max_order = 4,
                                   const PerturbationOptions& opt = {});

// Largest fourth-order paths (counterterms included as separate rows).
std::vector<PathContribution> fourth_order_paths(const DeviceEnergies& dev, double flux, int top_n,
                                                 const PerturbationOptions& opt = {});

} // namespace tft
