#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace latvoter {

using LatticeField = std::vector<double>;

// Scaling parameters of the n-th lattice model on a periodic ring.
//
// The ring carries site_count = period * voter_density equally spaced sites;
// two sites are neighbors when their ring distance is at most max_distance,
// which puts neighbor_count/2 sites on each side.
struct ScalingParams {
    long long model_index = 0;    // n
    long long neighbor_count = 0; // N_n, even
    double max_distance = 0.0;    // D_n
    double high_rate = 0.0;       // H_n
    double low_rate = 0.0;        // L_n
    double density_scale = 1.0;   // S_n
    double period = 1.0;          // ring circumference
    // derived
    double voter_density = 0.0;   // rho_n = N_n / (2 D_n)
    long long site_count = 0;

    double spacing() const { return 1.0 / voter_density; }

    // position of site i, in [0, period)
    double position(long long i) const { return static_cast<double>(i) / voter_density; }

    // position mapped to the fundamental domain [-period/2, period/2)
    double centered_position(long long i) const {
        double x = position(i);
        if (x >= 0.5 * period) x -= period;
        return x;
    }

    // signed ring displacement from site i to site j, in [-period/2, period/2)
    double displacement(long long i, long long j) const {
        double d = position(j) - position(i);
        while (d < -0.5 * period) d += period;
        while (d >= 0.5 * period) d -= period;
        return d;
    }

    long long wrap(long long i) const {
        i %= site_count;
        return i < 0 ? i + site_count : i;
    }

    static ScalingParams create(long long model_index, long long neighbor_count,
                                double max_distance, double high_rate, double low_rate,
                                double density_scale, double period = 1.0) {
        if (neighbor_count <= 0 || neighbor_count % 2 != 0)
            throw std::invalid_argument("ScalingParams: neighbor_count must be positive and even");
        if (max_distance <= 0.0)
            throw std::invalid_argument("ScalingParams: max_distance must be positive");
        if (high_rate < 0.0 || low_rate < 0.0)
            throw std::invalid_argument("ScalingParams: rates must be nonnegative");
        if (density_scale <= 0.0)
            throw std::invalid_argument("ScalingParams: density_scale must be positive");
        if (period <= 0.0)
            throw std::invalid_argument("ScalingParams: period must be positive");

        ScalingParams p;
        p.model_index = model_index;
        p.neighbor_count = neighbor_count;
        p.max_distance = max_distance;
        p.high_rate = high_rate;
        p.low_rate = low_rate;
        p.density_scale = density_scale;
        p.period = period;
        p.voter_density = static_cast<double>(neighbor_count) / (2.0 * max_distance);

        const double sites = period * p.voter_density;
        const double rounded = std::round(sites);
        if (rounded < 1.0 || std::abs(sites - rounded) > 1e-9 * std::max(1.0, rounded))
            throw std::invalid_argument("ScalingParams: period * voter_density = " +
                                        std::to_string(sites) + " is not a positive integer");
        p.site_count = static_cast<long long>(rounded);
        return p;
    }
};

// Spin state of the ring: one {0,1} value per site, 1 = opinion A.
struct SpinConfiguration {
    std::vector<std::uint8_t> spins;
    double time = 0.0;
};

// Measure with an atom of weight spin / (rho * S) at each occupied site.
struct EmpiricalMeasure {
    std::vector<double> atoms;

    static EmpiricalMeasure from_configuration(const SpinConfiguration& config,
                                               const ScalingParams& p) {
        EmpiricalMeasure v;
        const double w = 1.0 / (p.voter_density * p.density_scale);
        v.atoms.resize(config.spins.size());
        for (std::size_t i = 0; i < config.spins.size(); ++i)
            v.atoms[i] = config.spins[i] ? w : 0.0;
        return v;
    }

    double total_mass() const {
        double s = 0.0;
        for (double a : atoms) s += a;
        return s;
    }
};

namespace detail {

// compensated (Kahan) summation; keeps ensemble reductions reproducible
class KahanSum {
public:
    void add(double x) {
        const double y = x - carry_;
        const double t = sum_ + y;
        carry_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

}  // namespace detail

// The neighbor sites of x: offsets 1..N/2 on each side, wrapped onto the ring.
// The list always has length N; on very small rings wrapped offsets can repeat,
// matching the per-offset clock count of the dynamics.
inline std::vector<long long> neighbors(long long x, const ScalingParams& p) {
    if (x < 0 || x >= p.site_count) throw std::out_of_range("neighbors: invalid site index");
    std::vector<long long> out;
    out.reserve(p.neighbor_count);
    const long long half = p.neighbor_count / 2;
    for (long long k = 1; k <= half; ++k) {
        out.push_back(p.wrap(x + k));
        out.push_back(p.wrap(x - k));
    }
    return out;
}

// (Delta_n f)(x) = H/N * sum_{y ~ x} (f(y) - f(x))
inline LatticeField discrete_laplacian(const LatticeField& f, const ScalingParams& p) {
    const long long L = p.site_count;
    const long long half = p.neighbor_count / 2;
    const double scale = p.high_rate / static_cast<double>(p.neighbor_count);
    LatticeField out(L);
    for (long long x = 0; x < L; ++x) {
        double acc = 0.0;
        for (long long k = 1; k <= half; ++k)
            acc += (f[p.wrap(x + k)] - f[x]) + (f[p.wrap(x - k)] - f[x]);
        out[x] = scale * acc;
    }
    return out;
}

// u_n(x) = (N S)^{-1} sum_{y ~ x} xi(y); exact integer window counts
inline LatticeField window_average(const SpinConfiguration& config, const ScalingParams& p) {
    const long long L = p.site_count;
    if (static_cast<long long>(config.spins.size()) != L)
        throw std::invalid_argument("window_average: configuration size mismatch");
    const long long half = p.neighbor_count / 2;
    const double norm = 1.0 / (static_cast<double>(p.neighbor_count) * p.density_scale);
    LatticeField out(L);
    long long window = 0;  // running count over {x-half..x+half} \ {x}
    for (long long k = 1; k <= half; ++k)
        window += config.spins[p.wrap(k)] + config.spins[p.wrap(-k)];
    for (long long x = 0; x < L; ++x) {
        out[x] = static_cast<double>(window) * norm;
        // slide to x+1: window gains x and x+half+1, loses x-half and x+1
        window += config.spins[x] + config.spins[p.wrap(x + half + 1)];
        window -= config.spins[p.wrap(x - half)] + config.spins[p.wrap(x + 1)];
    }
    return out;
}

// (f, g) = rho^{-1} sum_x f(x) g(x)
inline double pair_field(const LatticeField& f, const LatticeField& g, const ScalingParams& p) {
    if (f.size() != g.size() || static_cast<long long>(f.size()) != p.site_count)
        throw std::invalid_argument("pair_field: size mismatch");
    detail::KahanSum s;
    for (std::size_t i = 0; i < f.size(); ++i) s.add(f[i] * g[i]);
    return s.value() / p.voter_density;
}

// (v, f) = integral of f against the empirical measure
inline double pair_measure(const EmpiricalMeasure& v, const LatticeField& f) {
    if (v.atoms.size() != f.size())
        throw std::invalid_argument("pair_measure: size mismatch");
    detail::KahanSum s;
    for (std::size_t i = 0; i < f.size(); ++i) s.add(v.atoms[i] * f[i]);
    return s.value();
}

// D(f, delta)(x) = max over ring-distance(y, x) <= delta of |f(y) - f(x)|
inline LatticeField local_oscillation(const LatticeField& f, double delta,
                                      const ScalingParams& p) {
    if (delta <= 0.0) throw std::invalid_argument("local_oscillation: delta must be positive");
    const long long L = p.site_count;
    long long reach = static_cast<long long>(std::floor(delta * p.voter_density + 1e-9));
    if (reach > L / 2) reach = L / 2;
    LatticeField out(L, 0.0);
    for (long long x = 0; x < L; ++x) {
        double m = 0.0;
        for (long long k = 1; k <= reach; ++k) {
            m = std::max(m, std::abs(f[p.wrap(x + k)] - f[x]));
            m = std::max(m, std::abs(f[p.wrap(x - k)] - f[x]));
        }
        out[x] = m;
    }
    return out;
}

// ||f||_lambda = sup_x |f(x) e^{lambda |x|}|, coordinates in [-period/2, period/2)
inline double weighted_sup_norm(const LatticeField& f, double lambda, const ScalingParams& p) {
    double m = 0.0;
    for (long long i = 0; i < p.site_count; ++i) {
        const double x = std::abs(p.centered_position(i));
        m = std::max(m, std::abs(f[i]) * std::exp(lambda * x));
    }
    return m;
}

// Snapshots of a lattice field over time, interpolated linearly first in
// space (around the ring) and then in time.
struct SpaceTimeField {
    std::vector<double> times;          // strictly increasing
    std::vector<LatticeField> fields;   // one per time

    double value(double x, double t, const ScalingParams& p) const {
        if (times.empty() || fields.size() != times.size())
            throw std::invalid_argument("SpaceTimeField: empty or inconsistent");
        if (t < times.front() - 1e-12 || t > times.back() + 1e-12)
            throw std::out_of_range("SpaceTimeField: time outside recorded range");
        t = std::min(std::max(t, times.front()), times.back());

        std::size_t hi = 0;
        while (hi + 1 < times.size() && times[hi] < t) ++hi;
        if (times[hi] <= t || hi == 0) return space_value(fields[hi], x, p);
        const std::size_t lo = hi - 1;
        const double w = (t - times[lo]) / (times[hi] - times[lo]);
        return (1.0 - w) * space_value(fields[lo], x, p) + w * space_value(fields[hi], x, p);
    }

private:
    static double space_value(const LatticeField& f, double x, const ScalingParams& p) {
        double pos = std::fmod(x, p.period);
        if (pos < 0.0) pos += p.period;
        const double s = pos * p.voter_density;
        const long long i = static_cast<long long>(std::floor(s));
        const double w = s - static_cast<double>(i);
        const long long a = p.wrap(i);
        const long long b = p.wrap(i + 1);
        return (1.0 - w) * f[a] + w * f[b];
    }
};

}  // namespace latvoter
