#include <cmath>
#include <memory>

#include "doctest.h"
#include "stacklab/oracles.hpp"
#include "stacklab/ssg.hpp"

using namespace stacklab;
using oracles::Fraction;

namespace {

Vec water_filling_of(const ssg::SecurityGame& G) {
    std::vector<oracles::Curve1D> vs;
    for (const auto& cv : G.v_curves()) vs.push_back([cv](double s) { return cv(s); });
    return oracles::water_filling(vs).x;
}

double principal_value(const ssg::SecurityGame& G, const Vec& x) {
    GameSpec S = G.spec();
    return S.u(x, best_response(S, x));
}

ssg::SecurityGame frozen_game() { return ssg::linear_game({1.0, 0.8}, {1.0, 0.5}, {0.1, 0.2}, {0.9, 0.6}, StrategySpace::simplex_downward(2)); }

}  // namespace

TEST_CASE("curves invert") {
    ssg::Curve lin = ssg::Curve::linear(0.9, -0.7);
    CHECK(lin.inverse(lin(0.3)) == doctest::Approx(0.3));
    ssg::Curve lg = ssg::Curve::logistic(1.0, -0.75, 15.0, 1.0 / 3.0);
    CHECK(lg.inverse(lg(0.6)) == doctest::Approx(0.6).epsilon(1e-9));
    ssg::Curve pw = ssg::Curve::piecewise({0.0, 0.5, 1.0}, {1.0, 0.6, 0.1});
    CHECK(pw(0.25) == doctest::Approx(0.8));
    CHECK(pw.inverse(0.35) == doctest::Approx(0.75).epsilon(1e-10));
    CHECK(std::isnan(pw.inverse(1.5)));
}

TEST_CASE("two-target water filling by hand") {
    // x0 = 1 - w, x1 = (0.8 - w)/0.5, full mass at w = 8/15
    auto r = oracles::water_filling_exact({Fraction(1), Fraction(4, 5)}, {Fraction(1), Fraction(1, 2)});
    CHECK(r.w == Fraction(8, 15));
    CHECK(r.x[0] == Fraction(7, 15));
    CHECK(r.x[1] == Fraction(8, 15));
    Vec x = water_filling_of(frozen_game());
    CHECK(x[0] == doctest::Approx(7.0 / 15.0).epsilon(1e-10));
    CHECK(x[1] == doctest::Approx(8.0 / 15.0).epsilon(1e-10));
}

TEST_CASE("floating and rational water filling agree") {
    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
        int n = 2 + rng.uniform_int(5);
        std::vector<Fraction> a(n), b(n);
        Vec va(n), vb(n), ua(n, 0.0), ub(n, 1.0);
        for (int y = 0; y < n; ++y) {
            b[y] = Fraction(8 + rng.uniform_int(9), 16);
            a[y] = b[y] + Fraction(rng.uniform_int(17), 16) * (Fraction(1) - b[y]);
            va[y] = boost::rational_cast<double>(a[y]);
            vb[y] = boost::rational_cast<double>(b[y]);
        }
        auto ex = oracles::water_filling_exact(a, b);
        Vec x = water_filling_of(ssg::linear_game(va, vb, ua, ub, StrategySpace::simplex_downward(n)));
        for (int y = 0; y < n; ++y) CHECK(x[y] == doctest::Approx(boost::rational_cast<double>(ex.x[y])).epsilon(1e-9));
    }
}

TEST_CASE("conservative optimum beats a grid") {
    Rng rng(12);
    for (int k = 0; k < 3; ++k) {
        ssg::SecurityGame G = ssg::random_linear_game(3, rng);
        Vec xs = water_filling_of(G);
        double best = principal_value(G, xs);
        oracles::OracleReport g = oracles::grid_optimum(G.spec(), 1.0 / 60.0, G.C());
        CHECK(g.value <= best + 1e-9);
        CHECK(g.value >= best - g.certified_error);
    }
}

TEST_CASE("clinch finds the conservative optimum") {
    Rng rng(21);
    for (int k = 0; k < 10; ++k) {
        int n = 2 + k % 4;
        ssg::SecurityGame G = ssg::random_linear_game(n, rng);
        GameSpec S = G.spec();
        Vec xs = water_filling_of(G);
        const double delta = 1e-3;
        double eps = delta / (33.0 * std::pow(G.C(), 3) * n);
        ssg::ClinchOptions opt;
        opt.centroid_samples = 512;
        auto exact = ssg::clinch([&](const Vec& x) { return best_response(S, x); }, G, delta, Vec(n, 0.0),
                                 Vec(n, 1.0), 0.0, k, opt);
        CHECK(dist_inf(exact.x, xs) <= delta);
        CHECK(S.space.contains(exact.x));
        auto adv = ssg::clinch(
            [&](const Vec& x) { return eps_adversarial_response(S, x, eps, TieMode::WorstForPrincipal); }, G, delta,
            Vec(n, 0.0), Vec(n, 1.0), eps, k, opt);
        CHECK(dist_inf(adv.x, xs) <= delta);
    }
}

TEST_CASE("clinch lower bounds stay below x* up to C eps") {
    Rng rng(22);
    for (int k = 0; k < 5; ++k) {
        auto G = std::make_shared<const ssg::SecurityGame>(ssg::random_linear_game(3, rng));
        GameSpec S = G->spec();
        Vec xs = water_filling_of(*G);
        double eps = 1e-2 / (33.0 * std::pow(G->C(), 3) * 3);
        ssg::ClinchOptions opt;
        opt.centroid_samples = 512;
        ssg::ClinchSearch cs(G, 1e-2, Vec(3, 0.0), Vec(3, 1.0), eps, k, opt);
        while (!cs.done()) {
            const Vec& q = cs.query();
            cs.respond(eps_adversarial_response(S, q, eps, TieMode::WorstForPrincipal));
            for (int y = 0; y < 3; ++y) CHECK(cs.lower()[y] <= xs[y] + G->C() * eps + 1e-12);
        }
        CHECK(cs.queries() <= cs.query_budget());
    }
}

TEST_CASE("clinch rejects an oracle that is too noisy") {
    ssg::SecurityGame G = frozen_game();
    GameSpec S = G.spec();
    CHECK_THROWS_AS(ssg::clinch([&](const Vec& x) { return best_response(S, x); }, G, 1e-3, {0, 0}, {1, 1}, 1e-2),
                    ParameterError);
}

TEST_CASE("perturb lowers the favourite covered target") {
    ssg::SecurityGame G = frozen_game();
    Vec xs = water_filling_of(G);
    // u at x*: target 0 gives 0.1 + 0.9*7/15 = 0.52, target 1 gives 0.2 + 0.6*8/15 = 0.52; exact tie
    int y = ssg::perturb_target(xs, G);
    CHECK((y == 0 || y == 1));
    Vec xt = ssg::perturb(xs, 0.1, G);
    CHECK(xt[y] == doctest::Approx(xs[y] - G.W() * 0.05));
    CHECK(best_response(G.spec(), xt) == y);
}

TEST_CASE("conserve mass keeps coverage on near best responses") {
    Rng rng(4);
    for (int k = 0; k < 20; ++k) {
        ssg::SecurityGame G = ssg::random_linear_game(4, rng);
        GameSpec S = G.spec();
        Vec x = water_filling_of(G);
        Vec lo(4, 0.0);
        double lambda = 1e-3;
        auto r = ssg::conserve_mass(x, lambda, lo, [&](const Vec& q) { return best_response(S, q); });
        auto br = best_response_set(S, r.x, 3.0 * G.C() * lambda);
        for (int y = 0; y < 4; ++y)
            if (r.x[y] > lo[y]) CHECK(std::find(br.begin(), br.end(), y) != br.end());
    }
}

TEST_CASE("policies are deterministic given the seed") {
    ssg::SecurityGame G = frozen_game();
    GameSpec S = G.spec();
    auto run = [&](std::uint64_t seed) {
        ssg::BatchedClinch p(G, 3000, 0.5);
        EpsAdversarialAgent a = EpsAdversarialAgent::induced(0.5, TieMode::WorstForPrincipal);
        return run_episode(p, a, S, 3000, seed);
    };
    Transcript a = run(3), b = run(3);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (std::size_t i = 0; i < a.rounds.size(); ++i) {
        CHECK(a.rounds[i].x == b.rounds[i].x);
        CHECK(a.rounds[i].y == b.rounds[i].y);
    }
}

TEST_CASE("multithreaded clinch thread schedule") {
    CHECK(ssg::MultiThreadedClinch::thread_of(1) == 1);
    CHECK(ssg::MultiThreadedClinch::thread_of(2) == 2);
    CHECK(ssg::MultiThreadedClinch::thread_of(12) == 3);
    CHECK(ssg::MultiThreadedClinch::thread_of(64) == 7);
    ssg::MultiThreadedClinch mt(frozen_game(), 1000);
    CHECK(mt.threads() == 10);
}

TEST_CASE("batched clinch regret stays logarithmic against the induced agent") {
    ssg::SecurityGame G = frozen_game();
    GameSpec S = G.spec();
    double bench = principal_value(G, water_filling_of(G));
    ssg::BatchedClinch p(G, 20000, 0.5);
    EpsAdversarialAgent a = EpsAdversarialAgent::induced(0.5, TieMode::WorstForPrincipal);
    Transcript tr = run_episode(p, a, S, 20000, 1);
    RegretLedger led = stackelberg_regret(tr, bench, false);
    // late rounds lose almost nothing
    double late = led.cumulative.back() - led.cumulative[9999];
    CHECK(late < 10.0);
    CHECK(p.committed());
}
