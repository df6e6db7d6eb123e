#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "latvoter/mechanisms.hpp"
#include "latvoter/presets.hpp"

using namespace latvoter;

namespace {

double direct_eval(const Polynomial& p, double x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.coefficients().size(); ++i)
        acc += p.coefficients()[i] * std::pow(x, static_cast<double>(i));
    return acc;
}

}  // namespace

TEST_CASE("polynomial basics") {
    const Polynomial p{-0.5, 0.0, 2.0, 1.0};
    REQUIRE(p.coefficient_l1() == 3.5);
    for (double x : {-1.3, 0.0, 0.7, 2.0})
        REQUIRE(p(x) == Catch::Approx(direct_eval(p, x)).margin(1e-12));
    REQUIRE((Polynomial{1.0, 1.0} * Polynomial{1.0, -1.0}) == Polynomial{1.0, 0.0, -1.0});
    REQUIRE((p - p).is_zero());
}

TEST_CASE("predicted drift closed forms") {
    const auto p = particle_case_params(1, 256);

    SECTION("two-sided consulting is the bistable cubic") {
        const Polynomial b = predicted_drift(Consulting{2.0, 2, StubbornSide::Both}, p);
        // 4u(u - 1/2)(1 - u)
        REQUIRE(b == Polynomial{0.0, -2.0, 6.0, -4.0});
        for (double u : {0.0, 0.5, 1.0}) REQUIRE(std::abs(b(u)) < 1e-12);
        REQUIRE(b(0.25) == Catch::Approx(-0.1875));
        REQUIRE(b(0.75) == Catch::Approx(0.1875));
    }

    SECTION("general-m consulting keeps the bistable structure") {
        // m = 1 degenerates to symmetric duplication: no drift at all
        REQUIRE(predicted_drift(Consulting{1.5, 1, StubbornSide::Both}, p).is_zero());
        for (int m = 2; m <= 8; ++m) {
            const Polynomial b = predicted_drift(Consulting{1.5, m, StubbornSide::Both}, p);
            REQUIRE(std::abs(b(0.5)) < 1e-12);
            REQUIRE(b(0.5 - 1e-3) < 0.0);
            REQUIRE(b(0.5 + 1e-3) > 0.0);
        }
    }

    SECTION("one-sided consulting") {
        const Polynomial ones = predicted_drift(Consulting{3.0, 2, StubbornSide::Ones}, p);
        for (double u : {0.1, 0.4, 0.9})
            REQUIRE(ones(u) == Catch::Approx(-3.0 * u * (1.0 - u) * (1.0 - u)).margin(1e-12));
        const Polynomial zeros = predicted_drift(Consulting{3.0, 2, StubbornSide::Zeros}, p);
        for (double u : {0.1, 0.4, 0.9})
            REQUIRE(zeros(u) == Catch::Approx(3.0 * u * u * (1.0 - u)).margin(1e-12));
    }

    SECTION("mutation variants") {
        REQUIRE(predicted_drift(Mutation{MutationDirection::OneToZero, 2.0, {}}, p) ==
                Polynomial{0.0, -2.0});
        REQUIRE(predicted_drift(Mutation{MutationDirection::ZeroToOne, 2.0, {}}, p) ==
                Polynomial{2.0, -2.0});
        REQUIRE(predicted_drift(Mutation{MutationDirection::Flip, 1.0, {}}, p) ==
                Polynomial{1.0, -2.0});

        const Polynomial P{0.0, 0.0, 1.0};  // u^2
        const Polynomial b = predicted_drift(Mutation{MutationDirection::OneToZero, 0.0, P}, p);
        REQUIRE(b == Polynomial{0.0, 0.0, 0.0, -1.0});  // -u P(u)
    }

    SECTION("asymmetric duplication and its compensation") {
        const Polynomial up = predicted_drift(AsymmetricDuplication{1.5, 1}, p);
        REQUIRE(up == Polynomial{0.0, 1.5, -1.5});
        const std::vector<MechanismSpec> pair = {AsymmetricDuplication{1.5, 1},
                                                 AsymmetricDuplication{1.5, 0}};
        const Polynomial total = predicted_drift(std::span<const MechanismSpec>(pair), p);
        REQUIRE(total.is_zero());
    }

    SECTION("density scale enters the duplication drift") {
        const auto p3 = particle_case_params(3, 16);  // S = 1/16
        const Polynomial b = predicted_drift(AsymmetricDuplication{2.0, 1}, p3);
        for (double u : {0.0, 1.0, 7.5})
            REQUIRE(b(u) == Catch::Approx(2.0 * u * (1.0 - u * p3.density_scale)).margin(1e-12));
    }
}

TEST_CASE("predicted noise coefficient") {
    SECTION("case 1: g = 4u(1-u)") {
        const auto p = particle_case_params(1, 1024);
        const Polynomial g = predicted_noise(p);
        REQUIRE(g == Polynomial{0.0, 4.0, -4.0});
        REQUIRE(std::sqrt(g(0.5)) == Catch::Approx(2.0 * std::sqrt(0.25)));
        REQUIRE(g(0.0) == 0.0);
    }

    SECTION("case 3: g = 2u(1 - u/n) -> 2u") {
        const long long n = 1024;
        const auto p = particle_case_params(3, n);
        const Polynomial g = predicted_noise(p);
        REQUIRE(g(1.0) == Catch::Approx(2.0 * (1.0 - 1.0 / n)));
        REQUIRE(std::sqrt(g(1.0)) == Catch::Approx(std::sqrt(2.0)).epsilon(1e-3));
        REQUIRE(g(0.0) == 0.0);
    }

    SECTION("nonnegative on the admissible range") {
        for (int case_id : {1, 2, 3, 4}) {
            const auto p = particle_case_params(case_id, 256);
            const Polynomial g = predicted_noise(p);
            const double hi = 1.0 / p.density_scale;
            for (int i = 0; i <= 100; ++i) REQUIRE(g(hi * i / 100.0) >= -1e-12);
        }
    }
}

TEST_CASE("event transitions") {
    const auto p = particle_case_params(1, 16);  // 16 sites, N = 8
    SpinConfiguration base;
    base.spins.assign(p.site_count, 0);

    SECTION("symmetric duplication copies the neighbor") {
        auto c = base;
        c.spins[3] = 1;
        const long long tuple[] = {2, 3};
        const auto out = apply_event(c, SymmetricDuplication{1.0}, tuple, p);
        REQUIRE(out.spins[2] == 1);
        for (long long i = 0; i < p.site_count; ++i)
            if (i != 2) REQUIRE(out.spins[i] == c.spins[i]);
    }

    SECTION("asymmetric duplication only adopts the favored value") {
        auto c = base;
        c.spins[5] = 1;
        const long long adopt[] = {4, 5};
        REQUIRE(apply_event(c, AsymmetricDuplication{1.0, 1}, adopt, p).spins[4] == 1);
        const long long noop[] = {5, 4};  // neighbor holds 0, favored is 1
        REQUIRE(apply_event(c, AsymmetricDuplication{1.0, 1}, noop, p).spins[5] == 1);
    }

    SECTION("mutation directions") {
        auto c = base;
        c.spins[7] = 1;
        const long long at7[] = {7};
        const long long at8[] = {8};
        REQUIRE(apply_event(c, Mutation{MutationDirection::OneToZero, 1.0, {}}, at7, p).spins[7] ==
                0);
        REQUIRE(apply_event(c, Mutation{MutationDirection::OneToZero, 1.0, {}}, at8, p).spins[8] ==
                0);
        REQUIRE(apply_event(c, Mutation{MutationDirection::ZeroToOne, 1.0, {}}, at8, p).spins[8] ==
                1);
        REQUIRE(apply_event(c, Mutation{MutationDirection::Flip, 1.0, {}}, at7, p).spins[7] == 0);
        REQUIRE(apply_event(c, Mutation{MutationDirection::Flip, 1.0, {}}, at8, p).spins[8] == 1);
    }

    SECTION("consulting flips only on unanimous disagreement") {
        auto c = base;
        c.spins[2] = 1;
        const Consulting both{1.0, 2, StubbornSide::Both};

        const long long tuple[] = {2, 1, 3};
        REQUIRE(apply_event(c, both, tuple, p).spins[2] == 0);  // consulted sites hold 0

        auto all_ones = base;
        all_ones.spins[1] = all_ones.spins[2] = all_ones.spins[3] = 1;
        REQUIRE(apply_event(all_ones, both, tuple, p).spins[2] == 1);  // no disagreement

        auto mixed = base;
        mixed.spins[2] = 1;
        mixed.spins[1] = 1;  // consulted sites disagree with each other
        REQUIRE(apply_event(mixed, both, tuple, p).spins[2] == 1);

        // stubborn side gates who may flip
        auto zero_site = base;  // site 2 holds 0, consulted sites hold 1
        zero_site.spins[1] = zero_site.spins[3] = 1;
        REQUIRE(apply_event(zero_site, Consulting{1.0, 2, StubbornSide::Ones}, tuple, p).spins[2] ==
                0);
        REQUIRE(
            apply_event(zero_site, Consulting{1.0, 2, StubbornSide::Zeros}, tuple, p).spins[2] ==
            1);
    }

    SECTION("tuple validation") {
        const long long bad_arity[] = {2};
        REQUIRE_THROWS_AS(apply_event(base, SymmetricDuplication{1.0}, bad_arity, p),
                          std::invalid_argument);
        const long long far[] = {0, 8};  // ring distance 1/2 > D = 1/4
        REQUIRE_THROWS_AS(apply_event(base, SymmetricDuplication{1.0}, far, p),
                          std::invalid_argument);
        const long long self_pair[] = {3, 3};
        REQUIRE_THROWS_AS(apply_event(base, SymmetricDuplication{1.0}, self_pair, p),
                          std::invalid_argument);
    }
}

TEST_CASE("rate bounds") {
    const auto p = particle_case_params(1, 1024);
    REQUIRE(rate_bound(SymmetricDuplication{p.high_rate}, p) ==
            Catch::Approx(std::sqrt(1024.0)));  // H/N = n^{1/2}
    REQUIRE(rate_bound(Mutation{MutationDirection::Flip, 2.0, {}}, p) == 2.0);

    const Polynomial usq{0.0, 0.0, 1.0};
    REQUIRE(rate_bound(Mutation{MutationDirection::OneToZero, 0.0, usq}, p) == Catch::Approx(1.01));

    const Polynomial negative{-0.5, 1.0};
    REQUIRE_THROWS_AS(rate_bound(Mutation{MutationDirection::OneToZero, 0.0, negative}, p),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(validate_mechanism(Mutation{MutationDirection::OneToZero, 0.0, negative}, p),
                      std::invalid_argument);

    REQUIRE(rate_bound(Consulting{2.0, 2, StubbornSide::Both}, p) ==
            Catch::Approx(2.0 / (64.0 * 64.0)));
    // aggregate consulting rate per site stays L_c
    REQUIRE(rate_bound(Consulting{2.0, 2, StubbornSide::Both}, p) *
                clock_count(Consulting{2.0, 2, StubbornSide::Both}, p) ==
            Catch::Approx(2.0 * p.site_count));
}
