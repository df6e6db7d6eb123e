#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "latvoter/lattice.hpp"
#include "latvoter/presets.hpp"
#include "latvoter/rng.hpp"

using namespace latvoter;

namespace {

SpinConfiguration random_config(const ScalingParams& p, Xoshiro256PlusPlus& rng, double density) {
    SpinConfiguration c;
    c.spins.resize(p.site_count);
    for (auto& s : c.spins) s = rng.bernoulli(density) ? 1 : 0;
    return c;
}

LatticeField random_field(const ScalingParams& p, Xoshiro256PlusPlus& rng) {
    LatticeField f(p.site_count);
    for (auto& v : f) v = 2.0 * rng.uniform() - 1.0;
    return f;
}

}  // namespace

TEST_CASE("scaling params derive density and site count") {
    const auto p = particle_case_params(1, 1024);
    REQUIRE(p.voter_density == static_cast<double>(p.neighbor_count) / (2.0 * p.max_distance));
    REQUIRE(p.voter_density == 1024.0);
    REQUIRE(p.site_count == 1024);
    REQUIRE(p.neighbor_count == 64);

    REQUIRE_THROWS_AS(ScalingParams::create(1, 3, 0.5, 1.0, 0.0, 1.0), std::invalid_argument);
    // 5 sites requested on a period-1 ring with rho = 4.5
    REQUIRE_THROWS_AS(ScalingParams::create(1, 9, 1.0, 1.0, 0.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(ScalingParams::create(1, 4, -0.1, 1.0, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("neighbors cover N/2 offsets on each side") {
    const auto p4 = particle_case_params(1, 4);  // N = 4, 4 sites
    auto nb = neighbors(0, p4);
    REQUIRE(nb.size() == 4);
    std::sort(nb.begin(), nb.end());
    // offsets +-1, +-2 on a 4-ring: site 2 is hit from both sides
    REQUIRE(nb == std::vector<long long>{1, 2, 2, 3});

    const auto p2 = ScalingParams::create(0, 2, 1.0 / 6.0, 1.0, 0.0, 1.0);  // 6 sites, N=2
    auto nb2 = neighbors(3, p2);
    std::sort(nb2.begin(), nb2.end());
    REQUIRE(nb2 == std::vector<long long>{2, 4});

    const auto p = particle_case_params(1, 256);
    Xoshiro256PlusPlus rng(11);
    for (int it = 0; it < 20; ++it) {
        const long long x = static_cast<long long>(rng.uniform_index(p.site_count));
        const auto list = neighbors(x, p);
        REQUIRE(static_cast<long long>(list.size()) == p.neighbor_count);
        REQUIRE(std::count(list.begin(), list.end(), x) == 0);
        for (long long y : list)
            REQUIRE(std::abs(p.displacement(x, y)) <= p.max_distance + 1e-12);
    }
}

TEST_CASE("discrete laplacian on signature fields") {
    const auto p = particle_case_params(1, 1024);

    SECTION("constant field maps to zero") {
        const LatticeField f(p.site_count, 3.7);
        for (double v : discrete_laplacian(f, p)) REQUIRE(v == Catch::Approx(0.0).margin(1e-9));
    }

    SECTION("cosine eigenfield: exact finite sum and continuum limit") {
        LatticeField f(p.site_count);
        for (long long i = 0; i < p.site_count; ++i)
            f[i] = std::cos(2.0 * M_PI * p.position(i));

        // exact eigenvalue of the neighborhood Laplacian on the cosine mode
        const long long half = p.neighbor_count / 2;
        double sum = 0.0;
        for (long long k = 1; k <= half; ++k)
            sum += std::cos(2.0 * M_PI * static_cast<double>(k) / p.site_count) - 1.0;
        const double exact = 2.0 * p.high_rate * sum / p.neighbor_count;

        const auto lap = discrete_laplacian(f, p);
        for (long long i = 0; i < p.site_count; i += 37)
            REQUIRE(lap[i] == Catch::Approx(exact * f[i]).margin(1e-9));

        // discrete windows carry a (1 + 3/N) step-variance surplus over the
        // continuum coefficient -(D^2 H / 3) (2 pi)^2 / 2
        const double continuum = -(p.max_distance * p.max_distance * p.high_rate / 3.0) *
                                 (2.0 * M_PI) * (2.0 * M_PI) / 2.0;
        const double surplus = 1.0 + 3.0 / static_cast<double>(p.neighbor_count);
        REQUIRE(exact / continuum == Catch::Approx(surplus).margin(5e-3));
    }

    SECTION("single-site indicator") {
        LatticeField f(p.site_count, 0.0);
        const long long x0 = 100;
        f[x0] = 1.0;
        const auto lap = discrete_laplacian(f, p);
        REQUIRE(lap[x0] == Catch::Approx(-p.high_rate));
        for (long long y : neighbors(x0, p))
            REQUIRE(lap[y] == Catch::Approx(p.high_rate / p.neighbor_count));
        REQUIRE(lap[x0 + p.neighbor_count / 2 + 1] == 0.0);
    }

    SECTION("conserves mass on random fields") {
        Xoshiro256PlusPlus rng(5);
        const LatticeField one(p.site_count, 1.0);
        for (int it = 0; it < 5; ++it) {
            const auto f = random_field(p, rng);
            REQUIRE(std::abs(pair_field(discrete_laplacian(f, p), one, p)) < 1e-12);
        }
    }
}

TEST_CASE("window average") {
    const auto p = particle_case_params(1, 256);

    SpinConfiguration ones;
    ones.spins.assign(p.site_count, 1);
    for (double v : window_average(ones, p)) REQUIRE(v == 1.0);

    SpinConfiguration zeros;
    zeros.spins.assign(p.site_count, 0);
    for (double v : window_average(zeros, p)) REQUIRE(v == 0.0);

    // alternating pairs 0,0,1,1,... with nearest-neighbor windows: every
    // window straddles a boundary and holds exactly one occupied site
    const auto p2 = ScalingParams::create(0, 2, 1.0 / 8.0, 1.0, 0.0, 1.0);
    SpinConfiguration alt;
    alt.spins.resize(p2.site_count);
    for (long long i = 0; i < p2.site_count; ++i) alt.spins[i] = (i / 2) % 2;
    for (double v : window_average(alt, p2)) REQUIRE(v == 0.5);

    SECTION("matches direct neighbor sums and stays in range") {
        Xoshiro256PlusPlus rng(23);
        const auto config = random_config(p, rng, 0.37);
        const auto u = window_average(config, p);
        const double cap = 1.0 / p.density_scale;
        for (long long x = 0; x < p.site_count; ++x) {
            double direct = 0.0;
            for (long long y : neighbors(x, p)) direct += config.spins[y];
            direct /= static_cast<double>(p.neighbor_count) * p.density_scale;
            REQUIRE(u[x] == Catch::Approx(direct).margin(1e-12));
            REQUIRE(u[x] >= 0.0);
            REQUIRE(u[x] <= cap);
        }
    }
}

TEST_CASE("pairings") {
    const auto p = particle_case_params(1, 256);
    const LatticeField one(p.site_count, 1.0);

    SECTION("constants") {
        REQUIRE(pair_field(one, one, p) == Catch::Approx(1.0).margin(1e-12));
        const LatticeField c(p.site_count, -2.5);
        REQUIRE(pair_field(c, one, p) == Catch::Approx(-2.5).margin(1e-12));
    }

    SECTION("normalized window indicator integrates to one") {
        // psi_0^z: rho/N on the neighbors of z
        LatticeField psi0(p.site_count, 0.0);
        for (long long y : neighbors(17, p))
            psi0[y] += p.voter_density / static_cast<double>(p.neighbor_count);
        REQUIRE(pair_field(psi0, one, p) == Catch::Approx(1.0).margin(1e-12));
    }

    SECTION("symmetry and bilinearity") {
        Xoshiro256PlusPlus rng(7);
        const auto f = random_field(p, rng);
        const auto g = random_field(p, rng);
        const auto h = random_field(p, rng);
        REQUIRE(pair_field(f, g, p) == pair_field(g, f, p));
        LatticeField combo(p.site_count);
        for (long long i = 0; i < p.site_count; ++i) combo[i] = 2.0 * g[i] + 3.0 * h[i];
        REQUIRE(pair_field(f, combo, p) ==
                Catch::Approx(2.0 * pair_field(f, g, p) + 3.0 * pair_field(f, h, p))
                    .margin(1e-12));
    }

    SECTION("measure pairing agrees with the scaled spin field") {
        Xoshiro256PlusPlus rng(9);
        const auto config = random_config(p, rng, 0.5);
        const auto v = EmpiricalMeasure::from_configuration(config, p);
        const auto f = random_field(p, rng);

        LatticeField spin_field(p.site_count);
        for (long long i = 0; i < p.site_count; ++i)
            spin_field[i] = config.spins[i] / p.density_scale;
        REQUIRE(pair_measure(v, f) == Catch::Approx(pair_field(spin_field, f, p)).margin(1e-12));

        long long count = 0;
        for (auto s : config.spins) count += s;
        REQUIRE(v.total_mass() ==
                Catch::Approx(count / (p.voter_density * p.density_scale)).margin(1e-12));
        REQUIRE(pair_measure(v, one) == Catch::Approx(v.total_mass()).margin(1e-12));

        const auto empty = EmpiricalMeasure::from_configuration(
            SpinConfiguration{std::vector<std::uint8_t>(p.site_count, 0), 0.0}, p);
        REQUIRE(pair_measure(empty, f) == 0.0);
    }

    SECTION("window-average mass identity") {
        Xoshiro256PlusPlus rng(31);
        const auto config = random_config(p, rng, 0.42);
        const auto u = window_average(config, p);
        const auto v = EmpiricalMeasure::from_configuration(config, p);
        REQUIRE(pair_field(u, one, p) == Catch::Approx(pair_measure(v, one)).margin(1e-12));
    }
}

TEST_CASE("local oscillation") {
    const auto p = particle_case_params(1, 256);

    const LatticeField constant(p.site_count, 1.0);
    for (double v : local_oscillation(constant, 0.01, p)) REQUIRE(v == 0.0);

    SECTION("window smaller than the spacing sees only the site itself") {
        Xoshiro256PlusPlus rng(3);
        const auto f = random_field(p, rng);
        for (double v : local_oscillation(f, 0.4 * p.spacing(), p)) REQUIRE(v == 0.0);
    }

    SECTION("linear field away from the seam") {
        LatticeField f(p.site_count);
        for (long long i = 0; i < p.site_count; ++i) f[i] = p.position(i);
        const auto osc = local_oscillation(f, 2.0 / p.voter_density, p);
        for (long long i = 4; i < p.site_count - 4; ++i)
            REQUIRE(osc[i] == Catch::Approx(2.0 / p.voter_density).margin(1e-12));
    }

    SECTION("matches brute force and is monotone in delta") {
        Xoshiro256PlusPlus rng(17);
        const auto f = random_field(p, rng);
        const double d1 = 3.2 * p.spacing();
        const double d2 = 7.9 * p.spacing();
        const auto o1 = local_oscillation(f, d1, p);
        const auto o2 = local_oscillation(f, d2, p);
        for (long long x = 0; x < p.site_count; x += 13) {
            double best = 0.0;
            for (long long y = 0; y < p.site_count; ++y) {
                if (y == x) continue;
                const double dist = std::abs(p.displacement(x, y));
                if (dist <= d1 + 1e-12) best = std::max(best, std::abs(f[y] - f[x]));
            }
            REQUIRE(o1[x] == Catch::Approx(best).margin(1e-12));
            REQUIRE(o1[x] >= 0.0);
            REQUIRE(o2[x] >= o1[x]);
        }
    }
}

TEST_CASE("weighted sup norm") {
    const auto p = particle_case_params(1, 256);

    LatticeField f(p.site_count, 0.0);
    f[3] = -4.0;
    f[77] = 2.0;
    REQUIRE(weighted_sup_norm(f, 0.0, p) == 4.0);

    LatticeField delta(p.site_count, 0.0);
    delta[0] = 1.0;
    for (double lambda : {-3.0, 0.0, 5.0})
        REQUIRE(weighted_sup_norm(delta, lambda, p) == 1.0);

    const LatticeField one(p.site_count, 1.0);
    REQUIRE(weighted_sup_norm(one, -1.0, p) == 1.0);  // attained at x = 0
}

TEST_CASE("space-time interpolation") {
    const auto p = ScalingParams::create(0, 2, 0.125, 1.0, 0.0, 1.0);  // 8 sites
    SpaceTimeField f;
    f.times = {0.0, 0.5};
    f.fields.resize(2, LatticeField(p.site_count, 0.0));
    f.fields[0][2] = 1.0;
    f.fields[1].assign(p.site_count, 0.0);
    f.fields[1][2] = 1.0;

    REQUIRE(f.value(p.position(2), 0.0, p) == 1.0);
    REQUIRE(f.value(p.position(2), 0.5, p) == 1.0);
    // spatial midpoint between sites 1 (value 0) and 2 (value 1)
    REQUIRE(f.value(0.5 * (p.position(1) + p.position(2)), 0.0, p) == Catch::Approx(0.5));

    SpaceTimeField g;
    g.times = {0.0, 1.0};
    g.fields = {LatticeField(p.site_count, 0.2), LatticeField(p.site_count, 0.4)};
    REQUIRE(g.value(0.3, 0.5, p) == Catch::Approx(0.3));
    REQUIRE_THROWS_AS(g.value(0.3, 1.5, p), std::out_of_range);
    REQUIRE_THROWS_AS(g.value(0.3, -0.5, p), std::out_of_range);
}
