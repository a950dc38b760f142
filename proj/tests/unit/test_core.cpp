#include <cmath>
#include <sstream>

#include "doctest.h"
#include "stacklab/core.hpp"

using namespace stacklab;

namespace {

GameSpec two_action_game() {
    GameSpec g;
    g.name = "toy";
    g.space = StrategySpace::box(1);
    g.num_actions = 2;
    g.u = [](const Vec& x, int y) { return y == 0 ? x[0] : 1.0 - x[0]; };
    g.v = [](const Vec& x, int y) { return y == 0 ? 0.5 : x[0]; };
    return g;
}

}  // namespace

TEST_CASE("discount helpers") {
    CHECK(discounted_horizon(0.9) == doctest::Approx(10.0));
    CHECK(induced_epsilon(0.5, 3) == doctest::Approx(0.25));
    CHECK(induced_epsilon(0.9, 0) == doctest::Approx(10.0));
    // ceil(10 ln(10/0.01)) = ceil(69.08) = 70
    CHECK(required_delay(0.9, 0.01) == 70);
    CHECK(required_delay(0.01, 0.5) == 1);
    CHECK_THROWS_AS(discounted_horizon(1.0), ParameterError);
}

TEST_CASE("required delay meets its slack") {
    for (double g : {0.3, 0.5, 0.8, 0.9, 0.99})
        for (double e : {1e-1, 1e-3, 1e-6}) {
            int D = required_delay(g, e);
            CHECK(induced_epsilon(g, D) <= e * (1.0 + 1e-12));
        }
}

TEST_CASE("format_double round trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5}) {
        std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("tie modes parse") {
    CHECK(parse_tie_mode("worst_for_principal") == TieMode::WorstForPrincipal);
    CHECK(parse_tie_mode("best_for_principal") == TieMode::BestForPrincipal);
    CHECK(parse_tie_mode("boundary_seeking") == TieMode::BoundarySeeking);
    CHECK_THROWS(parse_tie_mode("worst"));
    CHECK(to_string(TieMode::BestForPrincipal) == "best_for_principal");
}

TEST_CASE("best responses break ties for the principal") {
    GameSpec g = two_action_game();
    // v equal at x = 0.5; u favours y = 0 there only when x > 0.5
    CHECK(best_response_set(g, {0.5}).size() == 2);
    CHECK(best_response(g, {0.5}) == 0);
    CHECK(best_response(g, {0.4}) == 0);
    CHECK(best_response(g, {0.6}) == 1);
    auto br = best_response_set(g, {0.55}, 0.1);
    CHECK(br.size() == 2);
    CHECK(eps_adversarial_response(g, {0.55}, 0.1, TieMode::WorstForPrincipal) == 1);
    CHECK(eps_adversarial_response(g, {0.55}, 0.1, TieMode::BestForPrincipal) == 0);
}

TEST_CASE("screens release feedback") {
    CHECK(Screen::none().visible_through(5) == 4);
    CHECK(Screen::delay(3).visible_through(5) == 2);
    CHECK(Screen::batch(4).visible_through(5) == 4);
    CHECK(Screen::batch(4).visible_through(4) == 0);
    CHECK_THROWS_AS(Screen::delay(0), ParameterError);
}

TEST_CASE("rng substreams are stable and distinct") {
    Rng a(7), b(7);
    CHECK(a.uniform() == b.uniform());
    Rng s1 = Rng(7).substream("agent"), s2 = Rng(7).substream("agent"), s3 = Rng(7).substream("policy");
    double x1 = s1.uniform(), x2 = s2.uniform(), x3 = s3.uniform();
    CHECK(x1 == x2);
    CHECK(x1 != x3);
    CHECK(mix_seed(1, "a") != mix_seed(1, "b"));
}

TEST_CASE("strategy spaces") {
    auto s = StrategySpace::simplex_downward(3);
    CHECK(s.contains({0.2, 0.3, 0.5}));
    CHECK_FALSE(s.contains({0.2, 0.3, 0.6}));
    CHECK_FALSE(s.contains({-0.1, 0.3, 0.5}));
    CHECK(s.downward_closed());
    auto simp = StrategySpace::simplex(2);
    CHECK(simp.contains({0.4, 0.6}));
    CHECK_FALSE(simp.contains({0.4, 0.5}));
    CHECK_FALSE(simp.downward_closed());
}

TEST_CASE("episode runner respects the delay screen") {
    GameSpec g = two_action_game();
    DelayedResponsePolicy p(2, {0.3}, {{0.1}, {0.9}});
    MyopicAgent a;
    Transcript tr = run_episode(p, a, g, 6, 1);
    REQUIRE(tr.rounds.size() == 6);
    CHECK(tr.rounds[0].x[0] == 0.3);
    CHECK(tr.rounds[1].x[0] == 0.3);
    // round 3 reacts to round 1 (y = 0 at x = 0.3)
    CHECK(tr.rounds[2].x[0] == 0.1);
}

TEST_CASE("regret ledger") {
    GameSpec g = two_action_game();
    ConstantPolicy p({0.25});
    MyopicAgent a;
    Transcript tr = run_episode(p, a, g, 4, 0);
    RegretLedger led = stackelberg_regret(tr, 0.5);
    CHECK(led.cumulative_regret == doctest::Approx(1.0));
    REQUIRE(led.cumulative.size() == 4);
    CHECK(led.cumulative[1] == doctest::Approx(0.5));
    CHECK_THROWS(stackelberg_regret(tr, 0.1, true));
    CHECK_NOTHROW(stackelberg_regret(tr, 0.1, false));
}

TEST_CASE("batched to delayed routing") {
    CHECK(BatchedToDelayed::copy_of(1, 3) == 0);
    CHECK(BatchedToDelayed::copy_of(4, 3) == 1);
    CHECK(BatchedToDelayed::copy_of(7, 3) == 0);
    CHECK(BatchedToDelayed::local_round(7, 3) == 4);
    CHECK(BatchedToDelayed::local_round(4, 3) == 1);
}

TEST_CASE("transcript csv has a header and one row per round") {
    GameSpec g = two_action_game();
    ConstantPolicy p({0.25});
    MyopicAgent a;
    Transcript tr = run_episode(p, a, g, 3, 0);
    RegretLedger led = stackelberg_regret(tr, 0.5);
    std::ostringstream os;
    write_transcript_csv(os, tr, led);
    std::string s = os.str();
    CHECK(std::count(s.begin(), s.end(), '\n') == 4);
    CHECK(s.find('\r') == std::string::npos);
    CHECK(s.rfind("t,", 0) == 0);
}

TEST_CASE("induced agent slack follows the policy delay") {
    EpsAdversarialAgent ag = EpsAdversarialAgent::induced(0.5, TieMode::WorstForPrincipal);
    DelayedResponsePolicy p(3, {0.1}, {{0.1}, {0.2}});
    CHECK(ag.eps_for(p) == doctest::Approx(0.25));
    ConstantPolicy c({0.1});
    CHECK(ag.eps_for(c) == doctest::Approx(0.0));
}
