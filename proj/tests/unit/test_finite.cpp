#include <cmath>

#include "doctest.h"
#include "stacklab/finite.hpp"

using namespace stacklab;
using namespace stacklab::finite;

namespace {

// principal-favouring value at the mixture x
double value_at(const FiniteGame& g, const Vec& x) {
    double bv = -1e300, bu = -1e300;
    for (int y = 0; y < g.cols; ++y) bv = std::max(bv, mixed_payoffs(g, x, y).second);
    for (int y = 0; y < g.cols; ++y)
        if (mixed_payoffs(g, x, y).second >= bv - 1e-12) bu = std::max(bu, mixed_payoffs(g, x, y).first);
    return bu;
}

double brute_force(const FiniteGame& g, int K) {
    double best = -1e300;
    if (g.rows == 2) {
        for (int i = 0; i <= K; ++i) best = std::max(best, value_at(g, {double(i) / K, 1.0 - double(i) / K}));
    } else {
        for (int i = 0; i <= K; ++i)
            for (int j = 0; i + j <= K; ++j)
                best = std::max(best, value_at(g, {double(i) / K, double(j) / K, double(K - i - j) / K}));
    }
    return best;
}

}  // namespace

TEST_CASE("hand 2x2 commitment") {
    // agent takes column 1 while p <= 1/2; principal gets (3 + p)/4 there
    FiniteGame g = make_game(2, 2, {0.5, 1, 0.25, 0.75}, {1, 0, 0, 1});
    LpSolution s = multiple_lps(g);
    CHECK(s.value == doctest::Approx(0.875));
    CHECK(s.y == 1);
    CHECK(s.x[0] == doctest::Approx(0.5));
    CHECK(s.per_action[0] == doctest::Approx(0.5));
}

TEST_CASE("multiple lps agree with brute force") {
    for (int rows : {2, 3})
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            FiniteGame g = random_game(rows, 3, seed);
            LpSolution s = multiple_lps(g);
            double bf = brute_force(g, rows == 2 ? 4000 : 300);
            CHECK(bf <= s.value + 1e-9);
            CHECK(bf >= s.value - 0.02);
            CHECK(value_at(g, s.x) <= s.value + 1e-9);
        }
}

TEST_CASE("simplex embedding is an isometry") {
    Rng rng(2);
    for (int rows : {2, 3, 4}) {
        SimplexEmbedding E(rows);
        for (int k = 0; k < 20; ++k) {
            Vec a = sample_simplex(rows, rng), b = sample_simplex(rows, rng);
            CHECK(dist2(E.embed(a), E.embed(b)) == doctest::Approx(dist2(a, b)).epsilon(1e-10));
            Vec back = E.lift(E.embed(a));
            for (int i = 0; i < rows; ++i) CHECK(back[i] == doctest::Approx(a[i]).epsilon(1e-12));
        }
        Vec c(rows, 1.0 / rows);
        for (double z : E.embed(c)) CHECK(std::abs(z) < 1e-12);
    }
}

TEST_CASE("simplex projection is the nearest point") {
    Rng rng(6);
    for (int k = 0; k < 40; ++k) {
        Vec w{2 * rng.uniform() - 0.5, 2 * rng.uniform() - 0.5, 2 * rng.uniform() - 0.5};
        Vec p = project_to_simplex(w);
        double s = 0;
        for (double v : p) {
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(s == doctest::Approx(1.0));
        for (int j = 0; j < 50; ++j) {
            Vec q = sample_simplex(3, rng);
            CHECK(dist2(w, p) <= dist2(w, q) + 1e-12);
        }
    }
    Vec in = project_to_simplex({0.2, 0.3, 0.5});
    CHECK(in[0] == doctest::Approx(0.2));
}

TEST_CASE("best response polytope matches the payoff comparison") {
    FiniteGame g = random_game(3, 3, 4);
    Rng rng(9);
    for (int k = 0; k < 200; ++k) {
        Vec x = sample_simplex(3, rng);
        for (int y = 0; y < 3; ++y) {
            double vy = mixed_payoffs(g, x, y).second, best = -1e300;
            for (int z = 0; z < 3; ++z) best = std::max(best, mixed_payoffs(g, x, z).second);
            CHECK(best_response_polytope(g, y).contains(x, 1e-9) == (vy >= best - 1e-9));
            CHECK(best_response_polytope(g, y, 0.05).contains(x, 1e-9) == (vy >= best - 0.05 - 1e-9));
        }
    }
}

TEST_CASE("probe schedule") {
    // ceil(2 sqrt(2) ln 1e5) = ceil(32.56)
    CHECK(probe_count(2, 100000) == 33);
    CHECK(probe_radius(2, 1.0, 0.01) == doctest::Approx(0.02 * std::sqrt(2.0)));
    NoisyStackParams p;
    CHECK(noisy_stack_eps(p, 2) == doctest::Approx(std::pow(0.05 / 200000.0, 3.0)));
    CHECK(ball_volume(2, 1.0) == doctest::Approx(M_PI));
    CHECK(ball_volume(3, 2.0) == doctest::Approx(4.0 / 3.0 * M_PI * 8.0));
}

TEST_CASE("conservative membership with an exact agent") {
    FiniteGame g = make_game(2, 2, {0.5, 1, 0.25, 0.75}, {1, 0, 0, 1});
    GameSpec S = to_game_spec(g);
    ResponseOracle br = [&](const Vec& x) { return best_response(S, x); };
    Rng rng(1);
    CHECK(conservative_membership(1, {0.2, 0.8}, br, 10000, 1, 1.0, 1e-3, rng));
    CHECK_FALSE(conservative_membership(1, {0.8, 0.2}, br, 10000, 1, 1.0, 1e-3, rng));
    CHECK_FALSE(conservative_membership(1, {0.5, 0.5}, br, 10000, 1, 1.0, 1e-3, rng));
}

TEST_CASE("polytope projection") {
    FiniteGame g = make_game(2, 2, {0.5, 1, 0.25, 0.75}, {1, 0, 0, 1});
    Polytope P = best_response_polytope(g, 1);
    auto p = project_to_polytope(P, {0.9, 0.1});
    REQUIRE(p.has_value());
    CHECK((*p)[0] == doctest::Approx(0.5));
    auto q = project_to_polytope(P, {0.3, 0.7});
    CHECK((*q)[0] == doctest::Approx(0.3));
}

TEST_CASE("linear optimization through membership") {
    // unit disc, maximize z0
    auto mem = [](const Vec& z) { return z[0] * z[0] + z[1] * z[1] <= 1.0; };
    Rng rng(5);
    LinOptOptions opt;
    opt.budget = 20000;
    LinOptResult r = membership_lin_opt({1.0, 0.0}, mem, {0.0, 0.0}, 0.5, 1.0, 1e-3, rng, opt);
    CHECK(mem(r.z));
    CHECK(r.value >= 0.95);
    CHECK(r.calls <= opt.budget);
}
