#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

#include "latvoter/lattice.hpp"
#include "latvoter/trace.hpp"

namespace latvoter {

// Heat kernel started from the normalized neighborhood indicator of z.
struct HeatKernelField {
    long long source = 0;
    double time = 0.0;
    LatticeField values;
};

// rho * (transition law of the neighborhood random walk started at z)
struct DualKernelField {
    long long source = 0;
    double time = 0.0;
    LatticeField values;
};

// Spectral solver for circulant generators on the ring. The neighborhood
// Laplacian Delta_n is diagonal in the Fourier basis, so evolved fields are
// exact up to rounding; rows are cached by time and shifted by translation
// invariance.
class CirculantHeatSolver {
public:
    explicit CirculantHeatSolver(const ScalingParams& p) : params_(p) {
        const long long L = p.site_count;
        const long long half = p.neighbor_count / 2;
        eigenvalues_.resize(L);
        window_symbol_.resize(L);
        cos_table_.resize(L);
        for (long long m = 0; m < L; ++m)
            cos_table_[m] = std::cos(2.0 * M_PI * static_cast<double>(m) / static_cast<double>(L));
        for (long long j = 0; j < L; ++j) {
            double csum = 0.0;
            for (long long k = 1; k <= half; ++k) csum += cos_table_[(j * k) % L];
            const double a_j = 2.0 * csum / static_cast<double>(p.neighbor_count);
            window_symbol_[j] = a_j;
            eigenvalues_[j] = p.high_rate * (a_j - 1.0);
        }
    }

    const ScalingParams& params() const { return params_; }

    // row(r) = (1/L) sum_j multiplier_j cos(2 pi j r / L)
    LatticeField spectral_row(const std::vector<double>& multiplier) const {
        const long long L = params_.site_count;
        LatticeField row(L);
        for (long long r = 0; r < L; ++r) {
            detail::KahanSum s;
            for (long long j = 0; j < L; ++j)
                s.add(multiplier[j] * cos_table_[(j * r) % L]);
            row[r] = s.value() / static_cast<double>(L);
        }
        return row;
    }

    // kernel row psi_t^0: evolve the neighborhood indicator rho/N * I(.~0)
    const LatticeField& kernel_row(double t) const {
        auto it = kernel_rows_.find(t);
        if (it != kernel_rows_.end()) return it->second;
        std::vector<double> mult(params_.site_count);
        for (long long j = 0; j < params_.site_count; ++j)
            mult[j] = params_.voter_density * window_symbol_[j] * std::exp(eigenvalues_[j] * t);
        return kernel_rows_.emplace(t, spectral_row(mult)).first->second;
    }

    // dual row: rho * P(X_t = r | X_0 = 0) for the rate-H neighborhood walk
    const LatticeField& dual_row(double t) const {
        auto it = dual_rows_.find(t);
        if (it != dual_rows_.end()) return it->second;
        std::vector<double> mult(params_.site_count);
        for (long long j = 0; j < params_.site_count; ++j)
            mult[j] = params_.voter_density * std::exp(eigenvalues_[j] * t);
        return dual_rows_.emplace(t, spectral_row(mult)).first->second;
    }

    // e^{t Delta_n} f for an arbitrary field, via convolution with the walk law
    LatticeField propagate(const LatticeField& f, double t) const {
        const long long L = params_.site_count;
        if (static_cast<long long>(f.size()) != L)
            throw std::invalid_argument("propagate: field size mismatch");
        const LatticeField& row = dual_row(t);  // rho * q_t
        LatticeField out(L);
        const double norm = 1.0 / params_.voter_density;
        for (long long x = 0; x < L; ++x) {
            detail::KahanSum s;
            for (long long y = 0; y < L; ++y)
                s.add(row[params_.wrap(y - x)] * f[y]);
            out[x] = s.value() * norm;
        }
        return out;
    }

    const std::vector<double>& eigenvalues() const { return eigenvalues_; }

    // Fourier symbol of the neighborhood-average operator A
    const std::vector<double>& window_symbol() const { return window_symbol_; }

private:
    ScalingParams params_;
    std::vector<double> eigenvalues_;
    std::vector<double> window_symbol_;
    std::vector<double> cos_table_;
    mutable std::map<double, LatticeField> kernel_rows_;
    mutable std::map<double, LatticeField> dual_rows_;
};

// psi_t^z: solution of d/dt psi = Delta_n psi from rho/N * I(x ~ z)
inline HeatKernelField evolve_kernel(long long z, double t, const CirculantHeatSolver& solver) {
    if (t < 0.0) throw std::invalid_argument("evolve_kernel: negative time");
    const ScalingParams& p = solver.params();
    const LatticeField& row = solver.kernel_row(t);
    HeatKernelField field;
    field.source = z;
    field.time = t;
    field.values.resize(p.site_count);
    for (long long x = 0; x < p.site_count; ++x) field.values[x] = row[p.wrap(x - z)];
    return field;
}

inline HeatKernelField evolve_kernel(long long z, double t, const ScalingParams& p) {
    return evolve_kernel(z, t, CirculantHeatSolver(p));
}

inline DualKernelField dual_kernel(long long z, double t, const CirculantHeatSolver& solver) {
    if (t < 0.0) throw std::invalid_argument("dual_kernel: negative time");
    const ScalingParams& p = solver.params();
    const LatticeField& row = solver.dual_row(t);
    DualKernelField field;
    field.source = z;
    field.time = t;
    field.values.resize(p.site_count);
    for (long long x = 0; x < p.site_count; ++x) field.values[x] = row[p.wrap(x - z)];
    return field;
}

inline DualKernelField dual_kernel(long long z, double t, const ScalingParams& p) {
    return dual_kernel(z, t, CirculantHeatSolver(p));
}

// Ring-periodized centered normal density with variance D^2 H t / 3,
// evaluated at displacement x.
inline double gaussian_reference(double t, double x, const ScalingParams& p) {
    if (t <= 0.0) throw std::invalid_argument("gaussian_reference: time must be positive");
    const double variance = p.max_distance * p.max_distance * p.high_rate * t / 3.0;
    const double norm = 1.0 / std::sqrt(2.0 * M_PI * variance);
    auto density = [&](double y) { return norm * std::exp(-0.5 * y * y / variance); };

    double total = density(x);
    for (int k = 1;; ++k) {
        const double up = density(x + k * p.period);
        const double down = density(x - k * p.period);
        total += up + down;
        if (up < 1e-14 && down < 1e-14) break;
    }
    return total;
}

// u_hat(t, x) = u(t, x) - (v_0, psi_t^x): subtracts the heat flow of the
// initial empirical measure from each density snapshot.
inline std::vector<LatticeField> centered_field(const Trace& trace,
                                                const CirculantHeatSolver& solver) {
    if (trace.initial_spins.empty())
        throw std::invalid_argument("centered_field: trace lacks the initial configuration");
    const ScalingParams& p = solver.params();
    const long long L = p.site_count;
    const double weight = 1.0 / (p.voter_density * p.density_scale);

    std::vector<LatticeField> out(trace.times.size());
    for (std::size_t s = 0; s < trace.times.size(); ++s) {
        const LatticeField& row = solver.kernel_row(trace.times[s]);
        LatticeField centered(L);
        for (long long x = 0; x < L; ++x) {
            // (v_0, psi_t^x) via psi_t^x(y) = psi_t^y(x)
            detail::KahanSum acc;
            for (long long y = 0; y < L; ++y)
                if (trace.initial_spins[y]) acc.add(row[p.wrap(x - y)]);
            centered[x] = trace.density[s][x] - weight * acc.value();
        }
        out[s] = std::move(centered);
    }
    return out;
}

inline std::vector<LatticeField> centered_field(const Trace& trace, const ScalingParams& p) {
    return centered_field(trace, CirculantHeatSolver(p));
}

}  // namespace latvoter
