#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "latvoter/kernel.hpp"
#include "latvoter/lattice.hpp"
#include "latvoter/mechanisms.hpp"
#include "latvoter/polynomial.hpp"
#include "latvoter/trace.hpp"

namespace latvoter {

// ---------------------------------------------------------------------------
// test functions (three times continuously differentiable on the ring)

struct TestFunction {
    std::string name;
    std::function<double(double)> f;

    LatticeField sample(const ScalingParams& p) const {
        LatticeField out(p.site_count);
        for (long long i = 0; i < p.site_count; ++i) out[i] = f(p.position(i));
        return out;
    }
};

inline TestFunction wrapped_cosine(int harmonics = 1, double period = 1.0) {
    return {"cos" + std::to_string(harmonics),
            [harmonics, period](double x) { return std::cos(2.0 * M_PI * harmonics * x / period); }};
}

// compact bump (1 - s^2)^4 on |s| < 1; vanishes with three derivatives at the edge
inline TestFunction bump(double center, double halfwidth, double period = 1.0) {
    return {"bump", [center, halfwidth, period](double x) {
                double d = std::fmod(x - center, period);
                if (d < -0.5 * period) d += period;
                if (d >= 0.5 * period) d -= period;
                const double s = d / halfwidth;
                if (std::abs(s) >= 1.0) return 0.0;
                const double q = 1.0 - s * s;
                return q * q * q * q;
            }};
}

// plateau of height 1 with C^3 smoothstep ramps on both sides
inline TestFunction plateau(double center, double flat_halfwidth, double ramp,
                            double period = 1.0) {
    return {"plateau", [center, flat_halfwidth, ramp, period](double x) {
                double d = std::fmod(x - center, period);
                if (d < -0.5 * period) d += period;
                if (d >= 0.5 * period) d -= period;
                const double a = std::abs(d);
                if (a <= flat_halfwidth) return 1.0;
                if (a >= flat_halfwidth + ramp) return 0.0;
                const double s = (a - flat_halfwidth) / ramp;
                const double s4 = s * s * s * s;
                return 1.0 - s4 * (35.0 - 84.0 * s + 70.0 * s * s - 20.0 * s * s * s);
            }};
}

namespace detail {

struct RunningMoments {
    long long count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++count;
        const double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }
    double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
    double std_error() const {
        return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// binned drift estimation

enum class DriftMode {
    // averages raw lagged increments (u(t+tau,x) - u(t,x)) / tau
    Plain,
    // subtracts the lag-tau heat flow of the snapshot before differencing,
    // removing the duplication mechanism's mean evolution from the increment
    HeatCentered,
};

struct DriftConfig {
    int bins = 20;
    int lag = 2;              // tau = lag * snapshot spacing
    int site_stride = 0;      // 0 = choose from the neighbor count
    DriftMode mode = DriftMode::HeatCentered;
};

struct DriftBin {
    double lo = 0.0;
    double hi = 0.0;
    long long count = 0;
    double mean = 0.0;       // empirical drift (average of per-replica means)
    double std_error = 0.0;  // between-replica spread
    double predicted = 0.0;  // drift polynomial averaged over the binned samples
    int replicas = 0;
};

using DriftTable = std::vector<DriftBin>;

// Streaming drift estimator. Feed uniformly spaced density snapshots one
// replica at a time; per-bin means are aggregated per replica and the
// standard error is taken across replicas.
class DriftEstimator {
public:
    // eigenvalues: spectrum of the linear generator used by HeatCentered
    // centering (h = 0 degenerates to the plain increment)
    DriftEstimator(const ScalingParams& params, Polynomial drift, double snapshot_dt,
                   std::vector<double> eigenvalues, DriftConfig config = {})
        : params_(params),
          drift_(std::move(drift)),
          snapshot_dt_(snapshot_dt),
          config_(config),
          u_max_(1.0 / params.density_scale) {
        if (config_.bins < 1) throw std::invalid_argument("DriftEstimator: bins < 1");
        if (config_.lag < 1) throw std::invalid_argument("DriftEstimator: lag < 1");
        if (snapshot_dt_ <= 0.0) throw std::invalid_argument("DriftEstimator: bad snapshot dt");
        if (config_.site_stride <= 0)
            config_.site_stride =
                static_cast<int>(std::max<long long>(1, params.neighbor_count / 4));
        tau_ = config_.lag * snapshot_dt_;
        build_propagator(eigenvalues);
        bin_count_.assign(config_.bins, 0);
        bin_pred_.assign(config_.bins, 0.0);
        replica_stats_.assign(config_.bins, {});
        replica_sum_.assign(config_.bins, 0.0);
        replica_n_.assign(config_.bins, 0);
    }

    // spectrum of the neighborhood walk generator at the given jump rate
    static std::vector<double> lattice_eigenvalues(const ScalingParams& p, double walk_rate) {
        CirculantHeatSolver solver(p);
        std::vector<double> eig(solver.window_symbol().size());
        for (std::size_t j = 0; j < eig.size(); ++j)
            eig[j] = walk_rate * (solver.window_symbol()[j] - 1.0);
        return eig;
    }

    static std::vector<double> grid_eigenvalues(const ScalingParams& p, double half_sigma_sq) {
        const long long J = p.site_count;
        const double dx = p.period / static_cast<double>(J);
        std::vector<double> eig(J);
        for (long long j = 0; j < J; ++j) {
            const double s = std::sin(M_PI * static_cast<double>(j) / static_cast<double>(J));
            eig[j] = -half_sigma_sq * 4.0 * s * s / (dx * dx);
        }
        return eig;
    }

    void begin_replica() {
        window_.clear();
        std::fill(replica_sum_.begin(), replica_sum_.end(), 0.0);
        std::fill(replica_n_.begin(), replica_n_.end(), 0LL);
        snapshot_index_ = 0;
    }

    void feed(double t, const LatticeField& u) {
        if (!window_.empty()) {
            const double gap = t - last_time_;
            if (std::abs(gap - snapshot_dt_) > 1e-9 * std::max(1.0, snapshot_dt_))
                throw std::invalid_argument("DriftEstimator: snapshots must be uniformly spaced");
        }
        last_time_ = t;
        window_.push_back(u);
        if (static_cast<int>(window_.size()) <= config_.lag) {
            ++snapshot_index_;
            return;
        }

        const LatticeField& u0 = window_.front();
        const LatticeField& u1 = window_.back();
        const long long L = params_.site_count;
        const long long stride = config_.site_stride;
        const long long offset = snapshot_index_ % stride;
        for (long long x = offset; x < L; x += stride) {
            const int bin = bin_of(u0[x]);
            const double reference =
                config_.mode == DriftMode::HeatCentered ? propagate_at(u0, x) : u0[x];
            const double increment = (u1[x] - reference) / tau_;
            replica_sum_[bin] += increment;
            ++replica_n_[bin];
            ++bin_count_[bin];
            bin_pred_[bin] += drift_(u0[x]);
        }
        window_.pop_front();
        ++snapshot_index_;
    }

    void end_replica() {
        for (int b = 0; b < config_.bins; ++b)
            if (replica_n_[b] > 0)
                replica_stats_[b].add(replica_sum_[b] / static_cast<double>(replica_n_[b]));
        ++replicas_;
    }

    // bins with fewer than two contributing replicas are omitted
    DriftTable table() const {
        DriftTable rows;
        for (int b = 0; b < config_.bins; ++b) {
            if (replica_stats_[b].count < 2 || bin_count_[b] == 0) continue;
            DriftBin row;
            row.lo = u_max_ * b / config_.bins;
            row.hi = u_max_ * (b + 1) / config_.bins;
            row.count = bin_count_[b];
            row.mean = replica_stats_[b].mean;
            row.std_error = replica_stats_[b].std_error();
            row.predicted = bin_pred_[b] / static_cast<double>(bin_count_[b]);
            row.replicas = static_cast<int>(replica_stats_[b].count);
            rows.push_back(row);
        }
        return rows;
    }

    double lag_time() const { return tau_; }

private:
    void build_propagator(const std::vector<double>& eigenvalues) {
        const long long L = params_.site_count;
        if (config_.mode != DriftMode::HeatCentered) {
            radius_ = 0;
            row_ = {1.0};
            return;
        }
        if (static_cast<long long>(eigenvalues.size()) != L)
            throw std::invalid_argument("DriftEstimator: eigenvalue count mismatch");
        // row(r) = (1/L) sum_j e^{lambda_j tau} cos(2 pi j r / L)
        LatticeField row(L);
        for (long long r = 0; r < L; ++r) {
            detail::KahanSum s;
            for (long long j = 0; j < L; ++j)
                s.add(std::exp(eigenvalues[j] * tau_) *
                      std::cos(2.0 * M_PI * static_cast<double>((j * r) % L) /
                               static_cast<double>(L)));
            row[r] = s.value() / static_cast<double>(L);
        }
        // truncate to the symmetric support that carries all mass above 1e-13
        long long radius = L / 2;
        while (radius > 0 && std::abs(row[radius]) < 1e-13 &&
               std::abs(row[params_.wrap(-radius)]) < 1e-13)
            --radius;
        radius_ = radius;
        row_.resize(2 * radius_ + 1);
        for (long long r = -radius_; r <= radius_; ++r)
            row_[r + radius_] = row[params_.wrap(r)];
    }

    double propagate_at(const LatticeField& u, long long x) const {
        double acc = 0.0;
        for (long long r = -radius_; r <= radius_; ++r)
            acc += row_[r + radius_] * u[params_.wrap(x + r)];
        return acc;
    }

    int bin_of(double u) const {
        int b = static_cast<int>(std::floor(u / u_max_ * config_.bins));
        return std::min(std::max(b, 0), config_.bins - 1);
    }

    ScalingParams params_;
    Polynomial drift_;
    double snapshot_dt_;
    DriftConfig config_;
    double u_max_;
    double tau_ = 0.0;

    LatticeField row_;
    long long radius_ = 0;

    std::deque<LatticeField> window_;
    double last_time_ = 0.0;
    long long snapshot_index_ = 0;

    std::vector<long long> bin_count_;
    std::vector<double> bin_pred_;
    std::vector<detail::RunningMoments> replica_stats_;
    std::vector<double> replica_sum_;
    std::vector<long long> replica_n_;
};

// drift estimator wired for a trace's source (particle lattice or grid solver)
inline DriftEstimator make_drift_estimator(const Trace& trace, double snapshot_dt,
                                           DriftConfig config = {}) {
    if (trace.source == "spde") {
        if (!trace.spde) throw std::invalid_argument("make_drift_estimator: missing spde terms");
        return DriftEstimator(
            trace.params, trace.spde->drift, snapshot_dt,
            DriftEstimator::grid_eigenvalues(trace.params, trace.spde->half_sigma_sq), config);
    }
    double walk_rate = 0.0;
    for (const auto& spec : trace.mechanisms)
        if (const auto* dup = std::get_if<SymmetricDuplication>(&spec)) walk_rate += dup->rate;
    return DriftEstimator(trace.params,
                          predicted_drift(std::span<const MechanismSpec>(trace.mechanisms),
                                          trace.params),
                          snapshot_dt, DriftEstimator::lattice_eigenvalues(trace.params, walk_rate),
                          config);
}

// Ensemble version over in-memory traces; each trace is one replica.
inline DriftTable estimate_drift(std::span<const Trace> traces, DriftConfig config = {}) {
    if (traces.empty()) throw std::invalid_argument("estimate_drift: no traces");
    if (traces.front().times.size() < 2)
        throw std::invalid_argument("estimate_drift: traces need at least two snapshots");
    const double dt = traces.front().times[1] - traces.front().times[0];
    DriftEstimator est = make_drift_estimator(traces.front(), dt, config);
    for (const Trace& trace : traces) {
        est.begin_replica();
        for (std::size_t i = 0; i < trace.times.size(); ++i)
            est.feed(trace.times[i], trace.density[i]);
        est.end_replica();
    }
    return est.table();
}

// ---------------------------------------------------------------------------
// martingale residual and quadratic variation

// M_t(phi) = (v_t, phi) - (v_0, phi) - integral of the generator action,
// accumulated by trapezoid over snapshots. For particle traces the
// compensator sums each mechanism's exact drift pairing; for grid traces it
// is the discrete Laplacian plus the drift polynomial.
class MartingaleResidual {
public:
    // particle variant
    MartingaleResidual(const ScalingParams& params, std::vector<MechanismSpec> mechanisms,
                       LatticeField phi)
        : params_(params), mechanisms_(std::move(mechanisms)), phi_(std::move(phi)) {
        if (static_cast<long long>(phi_.size()) != params_.site_count)
            throw std::invalid_argument("MartingaleResidual: phi size mismatch");
        // unit-rate neighborhood Laplacian; each duplication family scales it
        // by its own rate
        ScalingParams unit = params_;
        unit.high_rate = 1.0;
        phi_lap_ = discrete_laplacian(phi_, unit);
        spde_mode_ = false;
    }

    // grid-solver variant
    MartingaleResidual(const ScalingParams& params, SpdeTerms terms, LatticeField phi)
        : params_(params), spde_terms_(std::move(terms)), phi_(std::move(phi)) {
        if (static_cast<long long>(phi_.size()) != params_.site_count)
            throw std::invalid_argument("MartingaleResidual: phi size mismatch");
        const long long J = params_.site_count;
        const double dx = params_.period / static_cast<double>(J);
        phi_lap_.resize(J);
        for (long long x = 0; x < J; ++x) {
            const double left = phi_[params_.wrap(x - 1)];
            const double right = phi_[params_.wrap(x + 1)];
            phi_lap_[x] = spde_terms_->half_sigma_sq * (right - 2.0 * phi_[x] + left) / (dx * dx);
        }
        spde_mode_ = true;
    }

    void feed(double t, const std::vector<std::uint8_t>& spins, const LatticeField& u) {
        if (spde_mode_) throw std::logic_error("MartingaleResidual: grid variant expects fields");
        push(t, pairing(spins, phi_), particle_compensator(spins, u));
    }

    void feed(double t, const LatticeField& u) {
        if (!spde_mode_) throw std::logic_error("MartingaleResidual: particle variant expects spins");
        push(t, field_pairing(u, phi_), grid_compensator(u));
    }

    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& values() const { return values_; }

private:
    void push(double t, double paired, double compensator) {
        if (!times_.empty()) {
            const double h = t - times_.back();
            if (h <= 0.0) throw std::invalid_argument("MartingaleResidual: nonincreasing times");
            m_ += paired - last_paired_ - 0.5 * h * (compensator + last_compensator_);
        }
        times_.push_back(t);
        values_.push_back(m_);
        last_paired_ = paired;
        last_compensator_ = compensator;
    }

    // (v, f) = (rho S)^{-1} sum_x xi(x) f(x)
    double pairing(const std::vector<std::uint8_t>& spins, const LatticeField& f) const {
        detail::KahanSum s;
        for (std::size_t i = 0; i < spins.size(); ++i)
            if (spins[i]) s.add(f[i]);
        return s.value() / (params_.voter_density * params_.density_scale);
    }

    // (f, g) = rho^{-1} sum f g
    double field_pairing(const LatticeField& a, const LatticeField& b) const {
        detail::KahanSum s;
        for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
        return s.value() / params_.voter_density;
    }

    double particle_compensator(const std::vector<std::uint8_t>& spins,
                                const LatticeField& u) const {
        const double S = params_.density_scale;
        const long long L = params_.site_count;
        double total = 0.0;
        for (const auto& spec : mechanisms_) {
            struct Visitor {
                const MartingaleResidual& self;
                const std::vector<std::uint8_t>& spins;
                const LatticeField& u;
                double S;
                long long L;

                double operator()(const SymmetricDuplication& m) const {
                    return m.rate * self.pairing(spins, self.phi_lap_);
                }
                double operator()(const AsymmetricDuplication& m) const {
                    detail::KahanSum open_sum;  // sum over all sites of u phi
                    detail::KahanSum occ_sum;   // sum over occupied sites of u phi
                    for (long long x = 0; x < L; ++x) {
                        const double t = u[x] * self.phi_[x];
                        open_sum.add(t);
                        if (spins[x]) occ_sum.add(t);
                    }
                    const double rho = self.params_.voter_density;
                    const double one_u_phi = open_sum.value() / rho;            // (1, u phi)
                    const double v_u_phi = occ_sum.value() / (rho * S);         // (v, u phi)
                    if (m.favored) return m.rate * (one_u_phi - S * v_u_phi);
                    const double v_phi = self.pairing(spins, self.phi_);
                    return -m.rate * (v_phi - S * v_u_phi);
                }
                double operator()(const Mutation& m) const {
                    const double rho = self.params_.voter_density;
                    detail::KahanSum open_sum;  // sum over all sites of r(u) phi
                    detail::KahanSum occ_sum;   // over occupied sites
                    for (long long x = 0; x < L; ++x) {
                        const double rate =
                            m.state_dependent() ? (*m.rate_polynomial)(u[x]) : m.rate;
                        const double t = rate * self.phi_[x];
                        open_sum.add(t);
                        if (spins[x]) occ_sum.add(t);
                    }
                    const double one_r_phi = open_sum.value() / rho;
                    const double v_r_phi = occ_sum.value() / (rho * S);
                    switch (m.direction) {
                        case MutationDirection::OneToZero:
                            return -v_r_phi;
                        case MutationDirection::ZeroToOne:
                            return one_r_phi / S - v_r_phi;
                        case MutationDirection::Flip:
                            return one_r_phi / S - 2.0 * v_r_phi;
                    }
                    throw std::logic_error("unreachable");
                }
                double operator()(const Consulting& m) const {
                    const double rho = self.params_.voter_density;
                    const int mm = m.fanout;
                    detail::KahanSum gain_open;  // sum of u^m phi
                    detail::KahanSum gain_occ;   // sum of xi u^m phi
                    detail::KahanSum loss_occ;   // sum of xi (1 - S u)^m phi
                    for (long long x = 0; x < L; ++x) {
                        const double um = std::pow(u[x], mm);
                        gain_open.add(um * self.phi_[x]);
                        if (spins[x]) {
                            gain_occ.add(um * self.phi_[x]);
                            loss_occ.add(std::pow(1.0 - S * u[x], mm) * self.phi_[x]);
                        }
                    }
                    // gain = S^{m-1} (1, u^m phi) - S^m (v, u^m phi)
                    const double sm1 = std::pow(S, mm - 1);
                    const double gain = sm1 * (gain_open.value() - gain_occ.value()) / rho;
                    const double loss = loss_occ.value() / (rho * S);
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
            total += std::visit(Visitor{*this, spins, u, S, L}, spec);
        }
        return total;
    }

    double grid_compensator(const LatticeField& u) const {
        detail::KahanSum s;
        for (std::size_t x = 0; x < u.size(); ++x)
            s.add(u[x] * phi_lap_[x] + spde_terms_->drift(u[x]) * phi_[x]);
        return s.value() / params_.voter_density;
    }

    ScalingParams params_;
    std::vector<MechanismSpec> mechanisms_;
    std::optional<SpdeTerms> spde_terms_;
    LatticeField phi_;
    LatticeField phi_lap_;
    bool spde_mode_ = false;

    std::vector<double> times_;
    std::vector<double> values_;
    double m_ = 0.0;
    double last_paired_ = 0.0;
    double last_compensator_ = 0.0;
};

// M_t(phi) series from a recorded trace. Particle traces must carry spin
// snapshots (the empirical-measure pairing needs them).
inline std::vector<double> martingale_residual(const Trace& trace, const LatticeField& phi,
                                               std::vector<double>* out_times = nullptr) {
    if (trace.times.size() < 2)
        throw std::invalid_argument("martingale_residual: need at least two snapshots");
    if (trace.source == "spde") {
        MartingaleResidual mr(trace.params, *trace.spde, phi);
        for (std::size_t i = 0; i < trace.times.size(); ++i)
            mr.feed(trace.times[i], trace.density[i]);
        if (out_times) *out_times = mr.times();
        return mr.values();
    }
    if (!trace.has_spins())
        throw std::invalid_argument("martingale_residual: particle trace lacks spin snapshots");
    MartingaleResidual mr(trace.params, trace.mechanisms, phi);
    for (std::size_t i = 0; i < trace.times.size(); ++i)
        mr.feed(trace.times[i], trace.spins[i], trace.density[i]);
    if (out_times) *out_times = mr.times();
    return mr.values();
}

// explicit-mechanisms overload; rejects traces recorded under a different set
inline std::vector<double> martingale_residual(const Trace& trace,
                                               std::span<const MechanismSpec> mechanisms,
                                               const LatticeField& phi) {
    if (mechanisms.size() != trace.mechanisms.size())
        throw std::invalid_argument("martingale_residual: mechanism set does not match trace");
    for (std::size_t i = 0; i < mechanisms.size(); ++i)
        if (mechanism_name(mechanisms[i]) != mechanism_name(trace.mechanisms[i]))
            throw std::invalid_argument("martingale_residual: mechanism set does not match trace");
    return martingale_residual(trace, phi);
}

struct QvEstimate {
    double empirical_rate = 0.0;
    double predicted_rate = 0.0;
    double std_error = 0.0;  // of the empirical rate
    long long increments = 0;
};

// Compares the realized quadratic variation of M(phi) against the predicted
// bracket rate, the g(u) phi^2 pairing averaged along the trajectory.
inline QvEstimate estimate_qv(const Trace& trace, const LatticeField& phi,
                              long long min_increments = 100) {
    std::vector<double> times;
    const std::vector<double> m = martingale_residual(trace, phi, &times);
    const long long increments = static_cast<long long>(m.size()) - 1;
    if (increments < min_increments)
        throw std::invalid_argument("estimate_qv: fewer than " + std::to_string(min_increments) +
                                    " increments");
    const double horizon = times.back() - times.front();

    QvEstimate out;
    out.increments = increments;
    detail::RunningMoments squares;
    for (long long i = 0; i < increments; ++i) {
        const double dm = m[i + 1] - m[i];
        squares.add(dm * dm);
    }
    out.empirical_rate = squares.mean * static_cast<double>(increments) / horizon;
    out.std_error = std::sqrt(squares.variance() * static_cast<double>(increments)) / horizon;

    const Polynomial g = trace.spde ? trace.spde->noise_variance : predicted_noise(trace.params);
    LatticeField phi_sq(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) phi_sq[i] = phi[i] * phi[i];
    detail::KahanSum integral;
    for (std::size_t s = 0; s + 1 < trace.times.size(); ++s) {
        const double h = trace.times[s + 1] - trace.times[s];
        LatticeField g0(phi.size()), g1(phi.size());
        for (std::size_t x = 0; x < phi.size(); ++x) {
            g0[x] = g(trace.density[s][x]);
            g1[x] = g(trace.density[s + 1][x]);
        }
        integral.add(0.5 * h *
                     (pair_field(g0, phi_sq, trace.params) + pair_field(g1, phi_sq, trace.params)));
    }
    out.predicted_rate = integral.value() / horizon;
    return out;
}

// ---------------------------------------------------------------------------
// weak-convergence comparison

struct WeakDistanceRow {
    std::string phi_name;
    double mean_a = 0.0;
    double mean_b = 0.0;
    double mean_difference = 0.0;
    double pooled_std_error = 0.0;
    double variance_a = 0.0;
    double variance_b = 0.0;
    double ks_statistic = 0.0;
};

inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                                 static_cast<double>(j) / b.size()));
    }
    return d;
}

// (u_T, phi) distribution comparison between two ensembles sampled at a
// common final time.
inline std::vector<WeakDistanceRow> weak_distance(std::span<const Trace> ensemble_a,
                                                  std::span<const Trace> ensemble_b,
                                                  std::span<const TestFunction> phis) {
    if (ensemble_a.empty() || ensemble_b.empty())
        throw std::invalid_argument("weak_distance: empty ensemble");
    const double t_a = ensemble_a.front().times.back();
    const double t_b = ensemble_b.front().times.back();
    for (const Trace& tr : ensemble_a)
        if (std::abs(tr.times.back() - t_a) > 1e-9)
            throw std::invalid_argument("weak_distance: ensemble A final times differ");
    for (const Trace& tr : ensemble_b)
        if (std::abs(tr.times.back() - t_b) > 1e-9)
            throw std::invalid_argument("weak_distance: ensemble B final times differ");
    if (std::abs(t_a - t_b) > 1e-9)
        throw std::invalid_argument("weak_distance: ensembles end at different times");

    std::vector<WeakDistanceRow> rows;
    for (const TestFunction& phi : phis) {
        const LatticeField fa = phi.sample(ensemble_a.front().params);
        const LatticeField fb = phi.sample(ensemble_b.front().params);
        std::vector<double> sa, sb;
        sa.reserve(ensemble_a.size());
        sb.reserve(ensemble_b.size());
        for (const Trace& tr : ensemble_a)
            sa.push_back(pair_field(tr.density.back(), fa, tr.params));
        for (const Trace& tr : ensemble_b)
            sb.push_back(pair_field(tr.density.back(), fb, tr.params));

        detail::RunningMoments ma, mb;
        for (double v : sa) ma.add(v);
        for (double v : sb) mb.add(v);

        WeakDistanceRow row;
        row.phi_name = phi.name;
        row.mean_a = ma.mean;
        row.mean_b = mb.mean;
        row.mean_difference = ma.mean - mb.mean;
        row.pooled_std_error = std::sqrt(ma.variance() / sa.size() + mb.variance() / sb.size());
        row.variance_a = ma.variance();
        row.variance_b = mb.variance();
        row.ks_statistic = ks_statistic(sa, sb);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace latvoter
