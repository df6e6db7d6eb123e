#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "latvoter/lattice.hpp"
#include "latvoter/mechanisms.hpp"
#include "latvoter/rng.hpp"
#include "latvoter/trace.hpp"

namespace latvoter {

// One aggregated Poisson clock family: all clocks of one mechanism proposed
// at a shared envelope rate, with thinning recovering state-dependent rates.
struct ClockFamily {
    MechanismSpec spec;
    double envelope = 0.0;     // per-clock envelope rate
    double clocks = 0.0;       // number of clocks (double: tuple counts grow like N^m)
    double total = 0.0;        // envelope * clocks
    std::uint64_t proposals = 0;
    std::uint64_t accepted = 0;
    std::uint64_t changed = 0;
};

struct StepRecord {
    double dt = 0.0;
    int family = -1;
    bool accepted = false;  // false = thinning rejection (null event)
    bool changed = false;
};

struct SimulationState {
    ScalingParams params;
    SpinConfiguration config;
    std::vector<ClockFamily> families;
    Xoshiro256PlusPlus rng;
    std::uint64_t seed = 0;
    std::uint64_t event_count = 0;

    double total_rate() const {
        double t = 0.0;
        for (const auto& f : families) t += f.total;
        return t;
    }

    // recompute the per-family totals from scratch (ledger consistency check)
    double recomputed_total_rate() const {
        double t = 0.0;
        for (const auto& f : families)
            t += rate_bound(f.spec, params) * clock_count(f.spec, params);
        return t;
    }
};

inline constexpr int kMaxConsultingFanout = 16;

// Independent Bernoulli spins with P(spin = 1) = S * f0(x).
inline SpinConfiguration init_configuration(const std::function<double(double)>& f0,
                                            const ScalingParams& p, std::uint64_t seed) {
    SpinConfiguration config;
    config.spins.resize(p.site_count);
    config.time = 0.0;
    Xoshiro256PlusPlus rng(seed);
    for (long long i = 0; i < p.site_count; ++i) {
        const double prob = p.density_scale * f0(p.position(i));
        if (prob < -1e-12 || prob > 1.0 + 1e-12)
            throw std::invalid_argument("init_configuration: S * f0 outside [0, 1]");
        config.spins[i] = rng.bernoulli(prob) ? 1 : 0;
    }
    return config;
}

inline SimulationState make_simulation(const ScalingParams& params,
                                       std::vector<MechanismSpec> mechanisms,
                                       SpinConfiguration config, std::uint64_t seed) {
    if (static_cast<long long>(config.spins.size()) != params.site_count)
        throw std::invalid_argument("make_simulation: configuration size mismatch");
    SimulationState state;
    state.params = params;
    state.config = std::move(config);
    state.seed = seed;
    state.rng.reseed(seed);
    state.families.reserve(mechanisms.size());
    for (auto& spec : mechanisms) {
        validate_mechanism(spec, params);
        if (const auto* consulting = std::get_if<Consulting>(&spec);
            consulting != nullptr && consulting->fanout > kMaxConsultingFanout)
            throw std::invalid_argument("make_simulation: consulting fanout too large");
        ClockFamily family;
        family.envelope = rate_bound(spec, params);
        family.clocks = clock_count(spec, params);
        family.total = family.envelope * family.clocks;
        family.spec = std::move(spec);
        state.families.push_back(std::move(family));
    }
    return state;
}

namespace detail {

inline long long random_offset(Xoshiro256PlusPlus& rng, long long half) {
    const long long k = static_cast<long long>(rng.uniform_index(2 * half));
    return k < half ? k + 1 : -(k - half + 1);
}

// window spin count over the neighbors of x
inline long long neighbor_spin_count(const SpinConfiguration& config, long long x,
                                     const ScalingParams& p) {
    const long long half = p.neighbor_count / 2;
    long long count = 0;
    for (long long k = 1; k <= half; ++k)
        count += config.spins[p.wrap(x + k)] + config.spins[p.wrap(x - k)];
    return count;
}

// Selects a family and a clock, thins state-dependent rates, applies the
// event. The caller has already advanced time.
inline StepRecord execute_proposal(SimulationState& state, double total) {
    StepRecord rec;
    ++state.event_count;

    double pick = state.rng.uniform() * total;
    int family_index = 0;
    for (; family_index + 1 < static_cast<int>(state.families.size()); ++family_index) {
        if (pick < state.families[family_index].total) break;
        pick -= state.families[family_index].total;
    }
    rec.family = family_index;
    ClockFamily& family = state.families[family_index];
    ++family.proposals;

    const ScalingParams& p = state.params;
    const long long half = p.neighbor_count / 2;
    const long long x = static_cast<long long>(state.rng.uniform_index(p.site_count));
    long long tuple[1 + kMaxConsultingFanout];
    tuple[0] = x;
    const int arity = event_arity(family.spec);
    for (int i = 1; i < arity; ++i)
        tuple[i] = p.wrap(x + random_offset(state.rng, half));

    rec.accepted = true;
    if (const auto* mutation = std::get_if<Mutation>(&family.spec);
        mutation != nullptr && mutation->state_dependent()) {
        const double u = static_cast<double>(neighbor_spin_count(state.config, x, p)) /
                         (static_cast<double>(p.neighbor_count) * p.density_scale);
        const double actual = (*mutation->rate_polynomial)(u);
        if (actual > family.envelope * (1.0 + 1e-12))
            throw std::logic_error("execute_proposal: thinning envelope violated");
        rec.accepted = state.rng.uniform() * family.envelope < actual;
    }

    if (rec.accepted) {
        ++family.accepted;
        rec.changed = apply_event_inplace(state.config, family.spec,
                                          std::span<const long long>(tuple, arity), p);
        if (rec.changed) ++family.changed;
    }
    return rec;
}

}  // namespace detail

// Advances by one proposed event. Returns nullopt when the total rate is
// zero (absorbing: no clock can ever ring again).
inline std::optional<StepRecord> step_event(SimulationState& state) {
    const double total = state.total_rate();
    if (total <= 0.0) return std::nullopt;
    const double dt = state.rng.exponential(total);
    state.config.time += dt;
    StepRecord rec = detail::execute_proposal(state, total);
    rec.dt = dt;
    return rec;
}

// Called at each requested sample time with the pre-sample configuration and
// its window-averaged density.
using SnapshotSink =
    std::function<void(double, const SpinConfiguration&, const LatticeField&)>;

// Runs the chain to horizon T, invoking the sink at each sample time with
// the configuration immediately before that time (paths are right-continuous;
// an event landing exactly on a sample time is not yet included).
inline void run(SimulationState& state, double horizon, std::span<const double> sample_times,
                const SnapshotSink& sink) {
    if (horizon < state.config.time - 1e-12)
        throw std::invalid_argument("run: horizon before current time");
    for (std::size_t i = 0; i < sample_times.size(); ++i) {
        if (sample_times[i] < state.config.time - 1e-12 || sample_times[i] > horizon + 1e-12)
            throw std::invalid_argument("run: sample times must lie in [t0, T]");
        if (i > 0 && sample_times[i] <= sample_times[i - 1])
            throw std::invalid_argument("run: sample times must be strictly increasing");
    }

    std::size_t next_sample = 0;
    auto emit_before = [&](double t_limit, bool inclusive) {
        while (next_sample < sample_times.size() &&
               (inclusive ? sample_times[next_sample] <= t_limit
                          : sample_times[next_sample] < t_limit)) {
            sink(sample_times[next_sample], state.config,
                 window_average(state.config, state.params));
            ++next_sample;
        }
    };

    while (true) {
        const double total = state.total_rate();
        if (total <= 0.0) break;
        const double t_event = state.config.time + state.rng.exponential(total);
        if (t_event > horizon) break;  // discarding the tail draw is exact (memorylessness)
        emit_before(t_event, /*inclusive=*/false);
        state.config.time = t_event;
        detail::execute_proposal(state, total);
    }

    state.config.time = horizon;
    emit_before(horizon, /*inclusive=*/true);
}

struct TraceOptions {
    bool store_spins = false;
};

inline Trace run_trace(SimulationState& state, double horizon,
                       std::span<const double> sample_times, TraceOptions options = {}) {
    Trace trace;
    trace.source = "particle";
    trace.params = state.params;
    trace.seed = state.seed;
    for (const auto& f : state.families) trace.mechanisms.push_back(f.spec);
    trace.initial_spins = state.config.spins;

    run(state, horizon, sample_times,
        [&](double t, const SpinConfiguration& config, const LatticeField& u) {
            trace.times.push_back(t);
            trace.density.push_back(u);
            if (options.store_spins) trace.spins.push_back(config.spins);
        });

    for (const auto& f : state.families)
        trace.event_counts.push_back(
            {mechanism_name(f.spec), f.proposals, f.accepted, f.changed});
    return trace;
}

inline std::vector<double> uniform_sample_times(double horizon, int snapshots) {
    if (snapshots < 1) throw std::invalid_argument("uniform_sample_times: need >= 1 snapshot");
    std::vector<double> times(snapshots);
    if (snapshots == 1) {
        times[0] = horizon;
        return times;
    }
    for (int i = 0; i < snapshots; ++i)
        times[i] = horizon * static_cast<double>(i) / (snapshots - 1);
    return times;
}

}  // namespace latvoter
