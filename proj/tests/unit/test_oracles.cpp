#include <cmath>

#include "doctest.h"
#include "stacklab/demand.hpp"
#include "stacklab/oracles.hpp"

using namespace stacklab;

TEST_CASE("wilson interval matches a reference implementation") {
    // reference values from statsmodels proportion_confint(method="wilson", alpha=0.01)
    auto a = oracles::wilson99(50, 100);
    CHECK(a.lo == doctest::Approx(0.3752796250448398).epsilon(1e-12));
    CHECK(a.hi == doctest::Approx(0.6247203749551602).epsilon(1e-12));
    auto b = oracles::wilson99(632, 1000);
    CHECK(b.lo == doctest::Approx(0.5919674365987889).epsilon(1e-12));
    CHECK(b.hi == doctest::Approx(0.6702924958667117).epsilon(1e-12));
    auto c = oracles::wilson99(0, 1000);
    CHECK(c.lo == 0.0);
    CHECK(c.hi == doctest::Approx(0.0065911649034068286).epsilon(1e-10));
}

TEST_CASE("monte carlo volume") {
    auto square = [](Rng& r) { return Vec{r.uniform(), r.uniform()}; };
    auto half = oracles::monte_carlo_volume(square, [](const Vec& z) { return z[0] >= 0.5; }, 20000, 3);
    CHECK(half.lo <= 0.5);
    CHECK(half.hi >= 0.5);
    // triangle {z >= 0, z0 + z1 <= 1}: centroid (1/3, 1/3), the halfspace z0 >= 1/3 keeps 4/9
    auto tri = [](Rng& r) {
        while (true) {
            Vec z{r.uniform(), r.uniform()};
            if (z[0] + z[1] <= 1.0) return z;
        }
    };
    auto t = oracles::monte_carlo_volume(tri, [](const Vec& z) { return z[0] >= 1.0 / 3.0; }, 20000, 4);
    CHECK(t.hi >= 1.0 / std::exp(1.0));
    CHECK(t.lo <= 4.0 / 9.0);
    CHECK(t.hi >= 4.0 / 9.0);
    CHECK_THROWS_AS(oracles::monte_carlo_volume(square, [](const Vec&) { return true; }, 999, 1), ParameterError);
}

TEST_CASE("threshold bisection") {
    oracles::Curve1D v = [](double s) { return 1.0 - 0.5 * s; };
    CHECK(oracles::threshold(v, 0.8) == doctest::Approx(0.4).epsilon(1e-11));
    CHECK(oracles::threshold(v, 1.2) == 0.0);
    CHECK(std::isinf(oracles::threshold(v, 0.2)));
}

TEST_CASE("myopic agents are optimal when the future is cheap") {
    // every price misses 0.7 by at least 0.0125 and the future is worth at most 0.01/0.99
    GameSpec g = demand::fixed_value_game(0.7);
    demand::BinarySearchPolicy p(100);
    auto opt = oracles::exhaustive_agent_optimum(g, p, 0.01, 4);
    MyopicAgent m;
    demand::BinarySearchPolicy q(100);
    Transcript tr = run_episode(q, m, g, 4, 0);
    for (int t = 0; t < 4; ++t) CHECK(opt.actions[t] == tr.rounds[t].y);
}

TEST_CASE("an undelayed price search invites a lie") {
    GameSpec g = demand::fixed_value_game(0.7);
    demand::BinarySearchPolicy p(100);
    auto opt = oracles::exhaustive_agent_optimum(g, p, 0.9, 4);
    // buying at 0.5 is myopically right, the optimal plan refuses
    CHECK(opt.actions[0] == 0);
    CHECK(opt.round_loss[0] == doctest::Approx(0.2));
    CHECK(opt.sequences == 16);
}

TEST_CASE("delayed policies bound the optimal deviation") {
    GameSpec g = demand::fixed_value_game(0.7);
    for (int D : {1, 2, 3}) {
        DelayedResponsePolicy p(D, {0.5}, {{0.2}, {0.8}});
        for (double gamma : {0.5, 0.9}) {
            auto opt = oracles::exhaustive_agent_optimum(g, p, gamma, 6);
            for (double l : opt.round_loss) CHECK(l <= induced_epsilon(gamma, D) + 1e-12);
        }
    }
}

TEST_CASE("exhaustive search guards its size") {
    GameSpec g = demand::fixed_value_game(0.7);
    demand::BinarySearchPolicy p(100);
    CHECK_THROWS_AS(oracles::exhaustive_agent_optimum(g, p, 0.5, 9), ParameterError);
}
