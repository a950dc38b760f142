#include <cmath>

#include "doctest.h"
#include "stacklab/demand.hpp"

using namespace stacklab;

TEST_CASE("purchase envelope") {
    CHECK(demand::purchase_envelope(0.5, 0.4, 0.05) == std::pair<int, int>{1, 1});
    CHECK(demand::purchase_envelope(0.42, 0.4, 0.05) == std::pair<int, int>{0, 1});
    CHECK(demand::purchase_envelope(0.3, 0.4, 0.05) == std::pair<int, int>{0, 0});
    CHECK(demand::in_eps_br(0, 0.42, 0.4, 0.05));
    CHECK_FALSE(demand::in_eps_br(0, 0.5, 0.4, 0.05));
}

TEST_CASE("batched binary search brackets the value") {
    for (double v : {0.05, 0.17, 0.5, 0.63, 0.99}) {
        GameSpec g = demand::fixed_value_game(v);
        demand::BatchedBinarySearch p(0.9, 50000);
        EpsAdversarialAgent a = EpsAdversarialAgent::induced(0.9, TieMode::WorstForPrincipal);
        Transcript tr = run_episode(p, a, g, 50000, 1);
        for (const auto& s : p.trace()) {
            CHECK(v >= s.lo - 1e-12);
            CHECK(v <= s.hi + 1e-12);
        }
        RegretLedger led = stackelberg_regret(tr, v, false);
        double Tg = 10.0;
        CHECK(led.cumulative_regret <= 10.0 * (std::log(50000.0) + Tg * std::log(Tg)));
        CHECK(p.committed());
    }
}

TEST_CASE("discretization gap of the linear demand") {
    demand::DemandCurve c = demand::linear_demand();
    for (int K = 2; K <= 20; ++K) {
        // f(1/2) - f(p) = (p - 1/2)^2
        double best = 1.0;
        for (int i = 1; i <= K; ++i) best = std::min(best, std::pow(static_cast<double>(i) / K - 0.5, 2));
        CHECK(demand::discretization_gap(c, K) == doctest::Approx(best).epsilon(1e-12));
        CHECK(demand::discretization_gap(c, K) <= c.C2 / (K * K) + 1e-15);
    }
}

TEST_CASE("pricing parameters at T = 1e5") {
    auto p = demand::pricing_params(demand::linear_demand(), 0.9, 100000);
    // K = floor((1e5 / ln 1e5)^(1/4)) = floor(9.654); D = ceil(10 ln(10 / 1e-5)) = 139
    CHECK(p.K == 9);
    CHECK(p.D == 139);
    CHECK(p.eps == doctest::Approx(1e-5));
    CHECK(induced_epsilon(0.9, p.D) <= p.eps);
}

TEST_CASE("successive elimination keeps the best arm") {
    Vec means{0.9, 0.5, 0.4, 0.2};
    for (int D : {0, 50}) {
        auto run = demand::run_bernoulli_bandit(means, D, 0.0, 20000, demand::no_shift(), 7);
        CHECK(run.best_survived);
        CHECK(run.monotone);
        CHECK(run.pulls[0] > run.pulls[3]);
        CHECK(run.bound_violations <= run.bound_checks / 1000 + 1);
    }
}

TEST_CASE("confusing shift stays within delta") {
    Vec means{0.6, 0.5};
    auto adv = demand::confusing_shift(means, 0.05);
    std::vector<demand::Pull> h;
    CHECK(adv(1, 0, h) == doctest::Approx(-0.05));
    CHECK(adv(1, 1, h) == doctest::Approx(0.05));
}

TEST_CASE("se-delayed pricing only reads released feedback") {
    demand::SEPricingPolicy p(4, 10, 0.0, 1000);
    CHECK(p.screen().kind == Screen::Kind::Delay);
    CHECK(p.effective_delay() == 10);
    demand::DemandCurve c = demand::linear_demand();
    demand::StochasticBuyer b = demand::StochasticBuyer::myopic(c);
    Transcript tr = run_episode(p, b, demand::pricing_game(c), 1000, 3);
    RegretLedger led = demand::pricing_regret(tr, c);
    CHECK(led.benchmark_value == doctest::Approx(0.25));
    CHECK(tr.rounds.size() == 1000);
}
