#include <cmath>

#include "doctest.h"
#include "stacklab/classify.hpp"

using namespace stacklab;
using namespace stacklab::classify;

TEST_CASE("best response of a negative agent") {
    AgentType a{{0.2, 0.0}, -1, 2.0};
    Vec th{1.0, 0.0};
    Vec br = agent_best_response(th, a);
    CHECK(br[0] == doctest::Approx(0.7));
    CHECK(br[1] == doctest::Approx(0.0));
    // hinge 1 - (-1)(0.7), logistic log(1 + e^0.7)
    CHECK(strategic_loss(LossKind::Hinge, th, a) == doctest::Approx(1.7));
    CHECK(strategic_loss(LossKind::Logistic, th, a) == doctest::Approx(std::log1p(std::exp(0.7))));
    AgentType b{{0.2, 0.3}, 1, 2.0};
    CHECK(agent_best_response(th, b) == b.x);
}

TEST_CASE("strategic loss gradient matches finite differences") {
    Rng rng(3);
    for (int k = 0; k < 50; ++k) {
        AgentType a{{rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5}, k % 2 ? 1 : -1,
                    0.5 + rng.uniform()};
        Vec th{rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5};
        Vec g = strategic_loss_gradient(LossKind::Logistic, th, a);
        for (int i = 0; i < 3; ++i) {
            Vec p = th, m = th;
            p[i] += 1e-6;
            m[i] -= 1e-6;
            double fd = (strategic_loss(LossKind::Logistic, p, a) - strategic_loss(LossKind::Logistic, m, a)) / 2e-6;
            CHECK(g[i] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("eps responses stay within the slack") {
    Rng rng(8);
    for (Deviation dev : {Deviation::LossMax, Deviation::LossMin, Deviation::Random}) {
        for (int k = 0; k < 30; ++k) {
            AgentType a{{rng.uniform() - 0.5, rng.uniform() - 0.5}, -1, 1.0 + rng.uniform()};
            Vec th{rng.uniform() - 0.5, rng.uniform() - 0.5};
            double eps = 0.05 * rng.uniform();
            Vec r = eps_agent_response(th, a, eps, dev, rng);
            double best = agent_payoff(th, agent_best_response(th, a), a);
            CHECK(agent_payoff(th, r, a) >= best - eps - 1e-12);
        }
    }
    CHECK(parse_deviation("loss_max") == Deviation::LossMax);
    CHECK_THROWS(parse_deviation("max"));
}

TEST_CASE("ball projection") {
    Vec p = project_ball({3.0, 4.0}, 1.0);
    CHECK(p[0] == doctest::Approx(0.6));
    CHECK(p[1] == doctest::Approx(0.8));
    Vec q = project_ball({0.1, 0.2}, 1.0);
    CHECK(q[0] == 0.1);
}

TEST_CASE("round routing across copies") {
    CHECK(NonmyopicClassifier::route(1, 3) == std::pair<int, int>{1, 1});
    CHECK(NonmyopicClassifier::route(3, 3) == std::pair<int, int>{3, 1});
    CHECK(NonmyopicClassifier::route(5, 3) == std::pair<int, int>{2, 2});
    CHECK_THROWS_AS(NonmyopicClassifier::route(0, 3), ParameterError);
}

TEST_CASE("gdwog regret bound") {
    GDwoGParams p;
    p.d = 2;
    p.T = 10000;
    // 6 * 1000 * sqrt(2 * 2) + 5 * 4
    CHECK(gdwog_regret_bound(p) == doctest::Approx(12020.0));
}

TEST_CASE("gdwog on a quadratic stays under its bound") {
    GDwoGParams p;
    p.d = 2;
    p.T = 20000;
    p.C = 2.0;
    p.L = 2.0;
    Vec c0{0.3, -0.2};
    CostFn c = [&](const Vec& w) { return 0.5 * std::pow(dist2(w, c0), 2); };
    for (std::uint64_t s : {1, 2, 3}) {
        GDwoGRun r = run_gdwog(c, 0.0, p, s);
        CHECK(r.regret <= gdwog_regret_bound(p));
        CHECK(r.regret >= -1e-9);
    }
}

TEST_CASE("one-point estimator bias") {
    // linear cost: the smoothed gradient equals the gradient
    Vec e{1.0, 0.0};
    CostFn c = [](const Vec& w) { return 0.5 * w[0] - 0.25 * w[1]; };
    auto clean = gradient_bias(c, {0.5, -0.25}, {0.0, 0.0}, 0.2, 0.0, no_perturbation(), 200000, 4);
    CHECK(clean.bias <= 4.0 * clean.sigma + 1e-12);
    auto flip = gradient_bias(c, {0.5, -0.25}, {0.0, 0.0}, 0.2, 0.01, sign_flip_perturbation(e, 0.01), 200000, 4);
    CHECK(flip.bound == doctest::Approx(2 * 0.01 / 0.2));
    CHECK(flip.bias <= flip.bound + 4.0 * flip.sigma);
    CHECK(flip.bias > clean.bias);
}

TEST_CASE("nonmyopic classifier copies cover the induced slack") {
    NonmyopicParams p;
    p.gamma = 0.5;
    p.T = 5000;
    NonmyopicClassifier c(p, 1);
    CHECK(c.copies() >= 1);
    CHECK(induced_epsilon(p.gamma, c.copies()) * c.payoff_scale() <= c.eps() + 1e-12);
}
