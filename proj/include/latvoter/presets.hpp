#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "latvoter/lattice.hpp"
#include "latvoter/mechanisms.hpp"
#include "latvoter/polynomial.hpp"

namespace latvoter {

// Consulting-rate knob. The per-tuple consulting rate in case 1 is
// 2*theta/n; theta = 1/4 gives the aggregate rate L_c = 2 used by the
// standard presets.
inline constexpr double kDefaultTheta = 0.25;

namespace detail {

inline long long exact_sqrt(long long n) {
    const long long r = static_cast<long long>(std::llround(std::sqrt(static_cast<double>(n))));
    if (r <= 0 || r * r != n)
        throw std::invalid_argument("preset: model index must be a perfect square");
    return r;
}

}  // namespace detail

// Lattice parameters for the four standard model families, indexed by n.
inline ScalingParams particle_case_params(int case_id, long long n, double period = 1.0,
                                          double theta = kDefaultTheta) {
    const long long root = detail::exact_sqrt(n);
    const double D = 1.0 / static_cast<double>(root);
    switch (case_id) {
        case 1:
            return ScalingParams::create(n, 2 * root, D, 2.0 * static_cast<double>(n),
                                         8.0 * theta, 1.0, period);
        case 2:
            return ScalingParams::create(n, 2 * root, D, 2.0 * static_cast<double>(n),
                                         0.0, 1.0, period);
        case 3:
            return ScalingParams::create(n, 2 * root * n, D, static_cast<double>(n),
                                         0.0, 1.0 / static_cast<double>(n), period);
        case 4:
            return ScalingParams::create(n, 2 * root, D, static_cast<double>(n),
                                         0.0, 1.0, period);
        default:
            throw std::invalid_argument("particle_case_params: case must be 1..4");
    }
}

// Mechanism sets matching the four standard model families. P is the
// state-dependent mutation rate polynomial (cases 1-2); theta scales the
// consulting rate in case 1.
inline std::vector<MechanismSpec> particle_case_mechanisms(int case_id, const ScalingParams& p,
                                                           const Polynomial& P = Polynomial::zero(),
                                                           double theta = kDefaultTheta) {
    std::vector<MechanismSpec> mechanisms;
    switch (case_id) {
        case 1:
            mechanisms.push_back(SymmetricDuplication{p.high_rate});
            mechanisms.push_back(Consulting{8.0 * theta, 2, StubbornSide::Both});
            if (!P.is_zero())
                mechanisms.push_back(Mutation{MutationDirection::OneToZero, 0.0, P});
            break;
        case 2:
            mechanisms.push_back(SymmetricDuplication{p.high_rate});
            if (!P.is_zero())
                mechanisms.push_back(Mutation{MutationDirection::OneToZero, 0.0, P});
            break;
        case 3:
            // duplication toward 1 plus killing mutation, both at the high rate
            mechanisms.push_back(AsymmetricDuplication{p.high_rate, 1});
            mechanisms.push_back(Mutation{MutationDirection::OneToZero, p.high_rate, {}});
            break;
        case 4:
            mechanisms.push_back(Mutation{MutationDirection::Flip, p.high_rate, {}});
            break;
        default:
            throw std::invalid_argument("particle_case_mechanisms: case must be 1..4");
    }
    return mechanisms;
}

}  // namespace latvoter
