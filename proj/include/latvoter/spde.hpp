#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "latvoter/lattice.hpp"
#include "latvoter/polynomial.hpp"
#include "latvoter/rng.hpp"
#include "latvoter/trace.hpp"

namespace latvoter {

// Limit equation d/dt u = (sigma^2/2) Lap u + b(u) + sqrt(g(u)) W_dot on a
// ring, with the admissible range on which g stays nonnegative.
struct SPDEModel {
    double half_sigma_sq = 0.0;
    Polynomial drift;          // b(u)
    Polynomial noise_variance; // g(u), evaluated on the clamped state
    double period = 1.0;
    std::function<double(double)> initial_profile = [](double) { return 0.5; };
    double clamp_lo = -std::numeric_limits<double>::infinity();
    double clamp_hi = std::numeric_limits<double>::infinity();

    bool clamped() const { return std::isfinite(clamp_lo) || std::isfinite(clamp_hi); }

    double clamp(double u) const { return std::min(std::max(u, clamp_lo), clamp_hi); }
};

struct GridSpec {
    int points = 0;      // J
    double dt = 0.0;
    double horizon = 0.0;

    double spacing(double period) const { return period / points; }

    void validate(const SPDEModel& model) const {
        if (points < 8) throw std::invalid_argument("GridSpec: need at least 8 grid points");
        if (dt <= 0.0) throw std::invalid_argument("GridSpec: dt must be positive");
        if (horizon < 0.0) throw std::invalid_argument("GridSpec: negative horizon");
        if (model.half_sigma_sq > 0.0) {
            const double dx = spacing(model.period);
            const double limit = 0.9 * dx * dx / (2.0 * model.half_sigma_sq);
            if (dt > limit)
                throw std::invalid_argument("GridSpec: dt " + std::to_string(dt) +
                                            " exceeds stability limit " + std::to_string(limit));
        }
    }

    // largest stable dt not exceeding `target` that divides the horizon evenly
    static double stable_dt(const SPDEModel& model, int points, double target, double period = 1.0) {
        double dt = target;
        if (model.half_sigma_sq > 0.0) {
            const double dx = period / points;
            dt = std::min(dt, 0.9 * dx * dx / (2.0 * model.half_sigma_sq));
        }
        return dt;
    }
};

// The four limit equations. P is the mutation polynomial for cases 1-2.
inline SPDEModel spde_preset(int case_id, const Polynomial& P = Polynomial::zero(),
                             bool case4_state_dependent_noise = false) {
    const Polynomial u = Polynomial::identity();
    SPDEModel model;
    model.period = 1.0;
    switch (case_id) {
        case 1:
            model.half_sigma_sq = 1.0 / 3.0;
            model.drift = 4.0 * (u * Polynomial{-0.5, 1.0} * Polynomial{1.0, -1.0}) - u * P;
            model.noise_variance = Polynomial{0.0, 4.0, -4.0};  // 4u(1-u)
            model.clamp_lo = 0.0;
            model.clamp_hi = 1.0;
            break;
        case 2:
            model.half_sigma_sq = 1.0 / 3.0;
            model.drift = -1.0 * (u * P);
            model.noise_variance = Polynomial{0.0, 4.0, -4.0};
            model.clamp_lo = 0.0;
            model.clamp_hi = 1.0;
            break;
        case 3:
            model.half_sigma_sq = 1.0 / 6.0;
            model.drift = Polynomial::zero();
            model.noise_variance = Polynomial{0.0, 2.0};  // 2u
            model.clamp_lo = 0.0;
            break;
        case 4:
            model.half_sigma_sq = 0.0;
            model.drift = Polynomial::zero();
            if (case4_state_dependent_noise) {
                model.noise_variance = Polynomial{0.0, 2.0, -2.0};  // 2u(1-u)
                model.clamp_lo = 0.0;
                model.clamp_hi = 1.0;
            } else {
                model.noise_variance = Polynomial{1.0};
            }
            model.initial_profile = [](double) { return 0.5; };
            break;
        default:
            throw std::invalid_argument("spde_preset: case must be 1..4");
    }
    return model;
}

// One explicit Euler-Maruyama step with periodic boundary. The noise
// argument is clamped to the admissible range and the post-step state is
// projected back into it.
inline void em_step(LatticeField& u, const SPDEModel& model, const GridSpec& grid,
                    Xoshiro256PlusPlus& rng) {
    const int J = grid.points;
    if (static_cast<int>(u.size()) != J)
        throw std::invalid_argument("em_step: state size mismatch");
    const double dx = grid.spacing(model.period);
    const double diffuse = model.half_sigma_sq / (dx * dx);
    const double noise_scale = std::sqrt(grid.dt / dx);

    static thread_local LatticeField next;
    next.resize(J);
    bool finite = true;
    for (int x = 0; x < J; ++x) {
        const double left = u[x == 0 ? J - 1 : x - 1];
        const double right = u[x == J - 1 ? 0 : x + 1];
        const double lap = diffuse * (right - 2.0 * u[x] + left);
        const double g = model.noise_variance(model.clamp(u[x]));
        double value = u[x] + grid.dt * (lap + model.drift(u[x])) +
                       noise_scale * std::sqrt(std::max(g, 0.0)) * rng.normal();
        if (model.clamped()) value = model.clamp(value);
        finite = finite && std::isfinite(value);
        next[x] = value;
    }
    if (!finite) throw std::runtime_error("em_step: non-finite state (instability)");
    u.swap(next);
}

using GridSnapshotSink = std::function<void(double, const LatticeField&)>;

// Trace parameters that make the grid pairing (f, g) = dx * sum f g work
// through the shared lattice operations.
inline ScalingParams spde_trace_params(const SPDEModel& model, const GridSpec& grid) {
    // N = 2 and D = dx give voter_density = J / period, so (f, g) = dx * sum f g
    return ScalingParams::create(0, 2, model.period / grid.points, 0.0, 0.0, 1.0, model.period);
}

// Euler-Maruyama trajectory from the initial profile; snapshots record the
// state at the last step time not exceeding each sample time.
inline Trace solve(const SPDEModel& model, const GridSpec& grid, std::uint64_t seed,
                   std::span<const double> sample_times, const GridSnapshotSink& sink = {}) {
    grid.validate(model);
    const int J = grid.points;

    Trace trace;
    trace.source = "spde";
    trace.params = spde_trace_params(model, grid);
    trace.seed = seed;
    trace.spde = SpdeTerms{model.half_sigma_sq, model.drift, model.noise_variance};

    LatticeField u(J);
    for (int x = 0; x < J; ++x) u[x] = model.initial_profile(model.period * x / J);

    Xoshiro256PlusPlus rng(seed);
    std::size_t next_sample = 0;
    const long long steps = static_cast<long long>(std::ceil(grid.horizon / grid.dt - 1e-9));
    auto emit = [&](double step_time, double next_step_time) {
        while (next_sample < sample_times.size() &&
               sample_times[next_sample] < next_step_time - 1e-12) {
            trace.times.push_back(sample_times[next_sample]);
            trace.density.push_back(u);
            if (sink) sink(sample_times[next_sample], u);
            ++next_sample;
        }
        (void)step_time;
    };

    for (long long k = 0; k < steps; ++k) {
        const double t = grid.dt * static_cast<double>(k);
        emit(t, t + grid.dt);
        try {
            em_step(u, model, grid, rng);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error(std::string(e.what()) + " at step " + std::to_string(k));
        }
    }
    emit(grid.horizon, std::numeric_limits<double>::infinity());
    return trace;
}

}  // namespace latvoter
