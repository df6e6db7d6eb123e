#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latvoter/lattice.hpp"
#include "latvoter/mechanisms.hpp"
#include "latvoter/polynomial.hpp"

namespace latvoter {

// Limit-equation terms carried by traces produced by the grid solver, so the
// estimators can treat both trace sources uniformly.
struct SpdeTerms {
    double half_sigma_sq = 0.0;  // diffusion coefficient sigma^2 / 2
    Polynomial drift;            // b(u)
    Polynomial noise_variance;   // g(u)
};

struct FamilyEventCounts {
    std::string name;
    std::uint64_t proposals = 0;
    std::uint64_t accepted = 0;
    std::uint64_t changed = 0;
};

// Recorded run: density snapshots at sample times, optional spin snapshots,
// and enough metadata to reproduce or analyze the run.
struct Trace {
    std::string source;  // "particle" or "spde"
    ScalingParams params;
    std::uint64_t seed = 0;
    std::vector<MechanismSpec> mechanisms;     // particle runs
    std::optional<SpdeTerms> spde;             // grid-solver runs

    std::vector<double> times;                 // strictly increasing
    std::vector<LatticeField> density;         // u_n per time
    std::vector<std::vector<std::uint8_t>> spins;  // optional spin snapshots
    std::vector<std::uint8_t> initial_spins;   // xi_0 (particle runs)
    std::vector<FamilyEventCounts> event_counts;

    bool has_spins() const { return !spins.empty(); }

    SpaceTimeField space_time() const {
        SpaceTimeField f;
        f.times = times;
        f.fields = density;
        return f;
    }
};

}  // namespace latvoter
