#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "latvoter/lattice.hpp"
#include "latvoter/polynomial.hpp"

namespace latvoter {

// Spin value 1 is opinion A, spin value 0 is opinion a.

// A site copies a neighbor's spin at each clock ring; per ordered pair the
// clock rate is rate / N.
struct SymmetricDuplication {
    double rate = 0.0;  // H_n
};

// A site adopts a neighbor's spin only when the neighbor holds the favored
// value; per ordered pair the clock rate is rate / N.
struct AsymmetricDuplication {
    double rate = 0.0;
    std::uint8_t favored = 1;
};

enum class MutationDirection { OneToZero, ZeroToOne, Flip };

// Spontaneous switching, one clock per site. With a rate polynomial the
// clock rate is P(u_n(x)) evaluated on the pre-jump configuration (the
// engine realizes this by thinning); otherwise the rate is constant.
struct Mutation {
    MutationDirection direction = MutationDirection::OneToZero;
    double rate = 0.0;
    std::optional<Polynomial> rate_polynomial;

    bool state_dependent() const { return rate_polynomial.has_value(); }
};

enum class StubbornSide { Ones, Zeros, Both };

// A site consults an ordered tuple of m neighbors (repetition allowed) at
// per-tuple rate rate / N^m and flips only on unanimous disagreement,
// restricted to the stubborn side(s).
struct Consulting {
    double rate = 0.0;
    int fanout = 2;  // m
    StubbornSide stubborn = StubbornSide::Both;
};

using MechanismSpec =
    std::variant<SymmetricDuplication, AsymmetricDuplication, Mutation, Consulting>;

inline std::string mechanism_name(const MechanismSpec& spec) {
    struct Visitor {
        std::string operator()(const SymmetricDuplication&) const { return "symmetric_duplication"; }
        std::string operator()(const AsymmetricDuplication& m) const {
            return m.favored ? "asymmetric_duplication_ones" : "asymmetric_duplication_zeros";
        }
        std::string operator()(const Mutation& m) const {
            const char* d = m.direction == MutationDirection::OneToZero ? "one_to_zero"
                            : m.direction == MutationDirection::ZeroToOne ? "zero_to_one"
                                                                          : "flip";
            return std::string(m.state_dependent() ? "mutation_statedep_" : "mutation_") + d;
        }
        std::string operator()(const Consulting& m) const {
            const char* s = m.stubborn == StubbornSide::Ones ? "ones"
                            : m.stubborn == StubbornSide::Zeros ? "zeros"
                                                                : "both";
            return "consulting_m" + std::to_string(m.fanout) + "_" + s;
        }
    };
    return std::visit(Visitor{}, spec);
}

// arity of the site tuple an event of this mechanism acts on
inline int event_arity(const MechanismSpec& spec) {
    struct Visitor {
        int operator()(const SymmetricDuplication&) const { return 2; }
        int operator()(const AsymmetricDuplication&) const { return 2; }
        int operator()(const Mutation&) const { return 1; }
        int operator()(const Consulting& m) const { return 1 + m.fanout; }
    };
    return std::visit(Visitor{}, spec);
}

namespace detail {

inline double polynomial_max_on_density_range(const Polynomial& poly, const ScalingParams& p) {
    const double hi = 1.0 / p.density_scale;
    constexpr int kGridPoints = 1000;
    double best = 0.0;
    for (int i = 0; i < kGridPoints; ++i) {
        const double u = hi * static_cast<double>(i) / (kGridPoints - 1);
        const double value = poly(u);
        if (value < 0.0)
            throw std::invalid_argument("mechanism rate polynomial is negative at u = " +
                                        std::to_string(u));
        best = std::max(best, value);
    }
    return best;
}

}  // namespace detail

inline void validate_mechanism(const MechanismSpec& spec, const ScalingParams& p) {
    struct Visitor {
        const ScalingParams& p;
        void operator()(const SymmetricDuplication& m) const {
            if (m.rate < 0.0) throw std::invalid_argument("symmetric duplication rate < 0");
        }
        void operator()(const AsymmetricDuplication& m) const {
            if (m.rate < 0.0) throw std::invalid_argument("asymmetric duplication rate < 0");
            if (m.favored > 1) throw std::invalid_argument("favored spin must be 0 or 1");
        }
        void operator()(const Mutation& m) const {
            if (m.state_dependent())
                detail::polynomial_max_on_density_range(*m.rate_polynomial, p);
            else if (m.rate < 0.0)
                throw std::invalid_argument("mutation rate < 0");
        }
        void operator()(const Consulting& m) const {
            if (m.rate < 0.0) throw std::invalid_argument("consulting rate < 0");
            if (m.fanout < 1) throw std::invalid_argument("consulting fanout must be >= 1");
        }
    };
    std::visit(Visitor{p}, spec);
}

// Drift polynomial b(u) this mechanism contributes to du/dt of the scaled
// density. Duplication toward one side yields rate * u * (1 - u S) (sign by
// favored side); consulting with m consulted neighbors yields
//   rate * [S^{m-1} u^m (1 - u S) - u (1 - u S)^m]
// restricted to the stubborn side(s); mutation yields the linear terms with
// the constant rate replaced by P(u) in the state-dependent variant.
inline Polynomial predicted_drift(const MechanismSpec& spec, const ScalingParams& p) {
    const double S = p.density_scale;
    const Polynomial u = Polynomial::identity();
    const Polynomial one_minus_su{1.0, -S};

    struct Visitor {
        double S;
        const Polynomial& u;
        const Polynomial& one_minus_su;

        Polynomial operator()(const SymmetricDuplication&) const { return Polynomial::zero(); }

        Polynomial operator()(const AsymmetricDuplication& m) const {
            Polynomial b = m.rate * (u * one_minus_su);
            return m.favored ? b : -1.0 * b;
        }

        Polynomial operator()(const Mutation& m) const {
            const Polynomial rate = m.state_dependent() ? *m.rate_polynomial
                                                        : Polynomial::constant(m.rate);
            switch (m.direction) {
                case MutationDirection::OneToZero:
                    return -1.0 * (u * rate);
                case MutationDirection::ZeroToOne:
                    return (Polynomial{1.0 / S} - u) * rate;
                case MutationDirection::Flip:
                    return (Polynomial{1.0 / S} - 2.0 * u) * rate;
            }
            throw std::logic_error("unreachable");
        }

        Polynomial operator()(const Consulting& m) const {
            Polynomial gain = std::pow(S, m.fanout - 1) * (u.pow(m.fanout) * one_minus_su);
            Polynomial loss = u * one_minus_su.pow(m.fanout);
            switch (m.stubborn) {
                case StubbornSide::Ones:
                    return -m.rate * loss;
                case StubbornSide::Zeros:
                    return m.rate * gain;
                case StubbornSide::Both:
                    return m.rate * (gain - loss);
            }
            throw std::logic_error("unreachable");
        }
    };
    return std::visit(Visitor{S, u, one_minus_su}, spec);
}

inline Polynomial predicted_drift(std::span<const MechanismSpec> mechanisms,
                                  const ScalingParams& p) {
    Polynomial total;
    for (const auto& spec : mechanisms) total += predicted_drift(spec, p);
    return total;
}

// Variance coefficient of the white noise produced by the high-frequency
// duplication: g(u) = 2 u (1 - u S) H / (S rho). The noise amplitude is
// sqrt(g).
inline Polynomial predicted_noise(const ScalingParams& p) {
    const double c = 2.0 * p.high_rate / (p.density_scale * p.voter_density);
    return Polynomial{0.0, c, -c * p.density_scale};
}

// Per-clock rate upper bound, usable as a thinning envelope.
inline double rate_bound(const MechanismSpec& spec, const ScalingParams& p) {
    struct Visitor {
        const ScalingParams& p;
        double operator()(const SymmetricDuplication& m) const {
            return m.rate / static_cast<double>(p.neighbor_count);
        }
        double operator()(const AsymmetricDuplication& m) const {
            return m.rate / static_cast<double>(p.neighbor_count);
        }
        double operator()(const Mutation& m) const {
            if (!m.state_dependent()) return m.rate;
            return 1.01 * detail::polynomial_max_on_density_range(*m.rate_polynomial, p);
        }
        double operator()(const Consulting& m) const {
            return m.rate / std::pow(static_cast<double>(p.neighbor_count), m.fanout);
        }
    };
    return std::visit(Visitor{p}, spec);
}

// Number of clocks the mechanism runs (as a double; consulting tuple counts
// grow like N^m).
inline double clock_count(const MechanismSpec& spec, const ScalingParams& p) {
    const double sites = static_cast<double>(p.site_count);
    const double N = static_cast<double>(p.neighbor_count);
    struct Visitor {
        double sites;
        double N;
        double operator()(const SymmetricDuplication&) const { return sites * N; }
        double operator()(const AsymmetricDuplication&) const { return sites * N; }
        double operator()(const Mutation&) const { return sites; }
        double operator()(const Consulting& m) const { return sites * std::pow(N, m.fanout); }
    };
    return std::visit(Visitor{sites, N}, spec);
}

namespace detail {

inline void check_neighbor(long long x, long long y, const ScalingParams& p) {
    if (y < 0 || y >= p.site_count || y == x)
        throw std::invalid_argument("apply_event: invalid neighbor site");
    if (std::abs(p.displacement(x, y)) > p.max_distance + 1e-12)
        throw std::invalid_argument("apply_event: tuple sites are not neighbors");
}

}  // namespace detail

// Applies a single event in place. sites[0] is the updated site x; the rest
// are the neighbor tuple. Returns whether the configuration changed. Only
// site x is ever modified.
inline bool apply_event_inplace(SpinConfiguration& config, const MechanismSpec& spec,
                                std::span<const long long> sites, const ScalingParams& p) {
    if (static_cast<int>(sites.size()) != event_arity(spec))
        throw std::invalid_argument("apply_event: tuple arity mismatch");
    const long long x = sites[0];
    if (x < 0 || x >= p.site_count) throw std::invalid_argument("apply_event: invalid site");
    for (std::size_t i = 1; i < sites.size(); ++i) detail::check_neighbor(x, sites[i], p);

    auto& spin = config.spins[x];
    struct Visitor {
        SpinConfiguration& config;
        std::span<const long long> sites;
        std::uint8_t& spin;

        bool operator()(const SymmetricDuplication&) const {
            const std::uint8_t v = config.spins[sites[1]];
            const bool changed = spin != v;
            spin = v;
            return changed;
        }
        bool operator()(const AsymmetricDuplication& m) const {
            if (config.spins[sites[1]] != m.favored || spin == m.favored) return false;
            spin = m.favored;
            return true;
        }
        bool operator()(const Mutation& m) const {
            switch (m.direction) {
                case MutationDirection::OneToZero:
                    if (spin == 0) return false;
                    spin = 0;
                    return true;
                case MutationDirection::ZeroToOne:
                    if (spin == 1) return false;
                    spin = 1;
                    return true;
                case MutationDirection::Flip:
                    spin ^= 1;
                    return true;
            }
            return false;
        }
        bool operator()(const Consulting&) const {
            const std::uint8_t v = config.spins[sites[1]];
            if (v == spin) return false;
            for (std::size_t i = 2; i < sites.size(); ++i)
                if (config.spins[sites[i]] != v) return false;
            spin = v;
            return true;
        }
    };

    // a stubborn-side restriction gates consulting before the unanimity check
    if (const auto* consulting = std::get_if<Consulting>(&spec)) {
        if (consulting->stubborn == StubbornSide::Ones && spin != 1) return false;
        if (consulting->stubborn == StubbornSide::Zeros && spin != 0) return false;
    }
    return std::visit(Visitor{config, sites, spin}, spec);
}

inline SpinConfiguration apply_event(const SpinConfiguration& config, const MechanismSpec& spec,
                                     std::span<const long long> sites, const ScalingParams& p) {
    SpinConfiguration out = config;
    apply_event_inplace(out, spec, sites, p);
    return out;
}

}  // namespace latvoter
