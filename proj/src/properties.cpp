#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stacklab/acceptance.hpp"
#include "stacklab/classify.hpp"
#include "stacklab/demand.hpp"
#include "stacklab/finite.hpp"
#include "stacklab/oracles.hpp"
#include "stacklab/ssg.hpp"

namespace stacklab::acceptance {

namespace {

using oracles::Fraction;

struct Tally {
    PropertyResult r;
    void check(bool ok, double excess = 0.0) {
        ++r.cases;
        if (!ok) {
            ++r.violations;
            r.worst = std::max(r.worst, excess);
        }
    }
};

Fraction rand_frac(Rng& rng, int lo, int hi, int den) { return Fraction(lo + rng.uniform_int(hi - lo + 1), den); }

// Conservative strategy at level w for v^y(s) = a_y - b_y s.
std::vector<Fraction> conservative_at(const std::vector<Fraction>& a, const std::vector<Fraction>& b,
                                      const Fraction& w) {
    std::vector<Fraction> x;
    for (std::size_t y = 0; y < a.size(); ++y) {
        Fraction s = (a[y] - w) / b[y];
        x.push_back(s < 0 ? Fraction(0) : s);
    }
    return x;
}

std::vector<int> exact_br(const std::vector<Fraction>& a, const std::vector<Fraction>& b,
                          const std::vector<Fraction>& x) {
    Fraction best = a[0] - b[0] * x[0];
    for (std::size_t y = 1; y < a.size(); ++y) best = std::max(best, a[y] - b[y] * x[y]);
    std::vector<int> out;
    for (std::size_t y = 0; y < a.size(); ++y)
        if (a[y] - b[y] * x[y] == best) out.push_back(static_cast<int>(y));
    return out;
}

PropertyResult prop_conservative(long long cases) {
    Tally t;
    t.r.group = "conservative-structure";
    Rng rng(31);
    for (long long c = 0; c < cases; ++c) {
        int n = 2 + rng.uniform_int(4);
        std::vector<Fraction> a(n), b(n);
        for (int y = 0; y < n; ++y) {
            b[y] = rand_frac(rng, 8, 16, 16);
            a[y] = b[y] + rand_frac(rng, 0, 16, 16) * (Fraction(1) - b[y]);
        }
        oracles::RationalWaterFilling wf = oracles::water_filling_exact(a, b);
        Fraction amax = *std::max_element(a.begin(), a.end());
        // two levels at or above the optimum, so both conservative strategies are feasible
        Fraction w1 = wf.w + rand_frac(rng, 0, 64, 64) * (amax - wf.w);
        Fraction w2 = c % 10 == 0 ? w1 : wf.w + rand_frac(rng, 0, 64, 64) * (amax - wf.w);
        if (w2 < w1) std::swap(w1, w2);
        auto x1 = conservative_at(a, b, w1), x2 = conservative_at(a, b, w2);
        // recovering the level from the strategy and rebuilding gives the same strategy
        Fraction lvl = a[exact_br(a, b, x1).front()] - b[exact_br(a, b, x1).front()] * x1[exact_br(a, b, x1).front()];
        bool ok = conservative_at(a, b, lvl) == x1;
        if (w1 == w2) {
            ok = ok && x1 == x2;
        } else {
            auto br1 = exact_br(a, b, x1), br2 = exact_br(a, b, x2);
            for (int y = 0; y < n; ++y) ok = ok && x1[y] >= x2[y];
            for (int y : br2) ok = ok && std::find(br1.begin(), br1.end(), y) != br1.end();
        }
        // the oracle optimum is the conservative strategy at its own level
        ok = ok && conservative_at(a, b, wf.w) == wf.x;
        t.check(ok, 1.0);
    }
    return t.r;
}

ssg::SecurityGame small_game(Rng& rng, int n) { return ssg::random_linear_game(n, rng); }

Vec random_downward(Rng& rng, int n) {
    Vec x(n);
    double s = 0.0;
    for (double& c : x) {
        c = -std::log(1.0 - rng.uniform());
        s += c;
    }
    double scale = rng.uniform() / s;
    for (double& c : x) c *= scale;
    return x;
}

PropertyResult prop_conserve_mass(long long cases) {
    Tally t;
    t.r.group = "conserve-mass";
    Rng rng(32);
    for (long long c = 0; c < cases; ++c) {
        int n = 2 + rng.uniform_int(4);
        ssg::SecurityGame G = small_game(rng, n);
        GameSpec S = G.spec();
        double C = G.C();
        double lambda = std::pow(10.0, -rng.uniform(1.0, 4.0));
        Vec x = random_downward(rng, n);
        Vec lo(n);
        for (int y = 0; y < n; ++y) lo[y] = x[y] * rng.uniform();
        double eps = c % 2 ? lambda / C : 0.0;
        auto oracle = [&](const Vec& q) { return eps_adversarial_response(S, q, eps, TieMode::WorstForPrincipal); };
        ssg::ConserveResult cm = ssg::conserve_mass(x, lambda, lo, oracle);
        auto br = best_response_set(S, cm.x, 3.0 * C * lambda);
        bool ok = S.space.contains(cm.x);
        double excess = 0.0;
        for (int y = 0; y < n; ++y)
            if (cm.x[y] > lo[y] && std::find(br.begin(), br.end(), y) == br.end()) ok = false;
        double vx = -1e300, vh = -1e300;
        for (int y = 0; y < n; ++y) {
            vx = std::max(vx, S.v(x, y));
            vh = std::max(vh, S.v(cm.x, y));
        }
        if (vh > vx + 2.0 * C * lambda + 1e-12) {
            ok = false;
            excess = vh - vx - 2.0 * C * lambda;
        }
        t.check(ok, excess);
    }
    return t.r;
}

PropertyResult prop_perturb(long long cases) {
    Tally t;
    t.r.group = "perturb";
    Rng rng(33);
    for (long long c = 0; t.r.cases < cases && c < 20 * cases; ++c) {
        int n = 2 + rng.uniform_int(4);
        ssg::SecurityGame G = small_game(rng, n);
        GameSpec S = G.spec();
        std::vector<oracles::Curve1D> vs;
        for (const auto& cv : G.v_curves()) vs.push_back([cv](double s) { return cv(s); });
        Vec xs = oracles::water_filling(vs).x;
        double bv = -1e300, ustar = -1e300;
        for (int y = 0; y < n; ++y) bv = std::max(bv, S.v(xs, y));
        for (int y = 0; y < n; ++y)
            if (S.v(xs, y) >= bv - 1e-9) ustar = std::max(ustar, S.u(xs, y));
        double C = G.C(), W = G.W();
        double lambda = std::pow(10.0, -rng.uniform(0.0, 3.0));
        double rad = W * lambda / (6.0 * C * C);
        Vec xh(n);
        double sum = 0.0;
        for (int y = 0; y < n; ++y) {
            xh[y] = std::clamp(xs[y] + rng.uniform(-rad, rad), 0.0, 1.0);
            sum += xh[y];
        }
        // pull back into the simplex without leaving the sup-ball around x*
        if (sum > 1.0) {
            double over = (sum - 1.0) / n;
            for (int y = 0; y < n; ++y) xh[y] = std::max({xh[y] - over, xs[y] - rad, 0.0});
        }
        if (std::accumulate(xh.begin(), xh.end(), 0.0) > 1.0 + 1e-12) continue;
        Vec xt;
        try {
            xt = ssg::perturb(xh, lambda, G);
        } catch (const ParameterError&) {
            t.check(false, 1.0);
            continue;
        }
        double eps = W * lambda / (200.0 * std::pow(C, 5) * n);
        bool ok = S.space.contains(xt, 1e-12);
        double excess = 0.0;
        for (int y : best_response_set(S, xt, eps)) {
            double gap = ustar - lambda - S.u(xt, y);
            if (gap > 1e-12) {
                ok = false;
                excess = std::max(excess, gap);
            }
        }
        t.check(ok, excess);
    }
    return t.r;
}

PropertyResult prop_envelope(long long cases) {
    Tally t;
    t.r.group = "purchase-envelope";
    Rng rng(44);
    for (long long c = 0; c < cases; ++c) {
        double v = rng.uniform(), p = rng.uniform(), eps = rng.uniform(0.0, 0.2);
        if (c % 4 == 0) v = std::clamp(p + (rng.bernoulli(0.5) ? eps : -eps), 0.0, 1.0);
        auto [lo, hi] = demand::purchase_envelope(v, p, eps);
        bool ok = lo <= hi;
        for (int a : {0, 1})
            if (demand::in_eps_br(a, v, p, eps)) ok = ok && lo <= a && a <= hi;
        t.check(ok, 1.0);
    }
    return t.r;
}

classify::AgentType random_type(Rng& rng, int d, double R, double alpha) {
    classify::AgentType a;
    a.x = classify::project_ball(classify::random_unit_vector(d, rng), R * rng.uniform());
    a.y = rng.bernoulli(0.5) ? 1 : -1;
    a.alpha = alpha;
    return a;
}

Vec random_theta(Rng& rng, int d, double R) {
    Vec s = classify::random_unit_vector(d, rng);
    double r = R * std::pow(rng.uniform(), 1.0 / d);
    for (double& c : s) c *= r;
    return s;
}

PropertyResult prop_best_response(long long cases) {
    Tally t;
    t.r.group = "classification-best-response";
    Rng rng(51);
    for (long long c = 0; c < cases; ++c) {
        int d = 1 + rng.uniform_int(5);
        double R = 1.0 + rng.uniform(0.0, 2.0), alpha = rng.uniform(0.2, 3.0);
        classify::AgentType a = random_type(rng, d, R, alpha);
        a.y = -1;
        Vec th = random_theta(rng, d, R);
        Vec br = classify::agent_best_response(th, a);
        double vb = classify::agent_payoff(th, br, a);
        bool ok = vb <= R * R * (1.0 + 1.0 / alpha) + 1e-12 && vb >= -R * R - 1e-12;
        double worst = 0.0;
        // the closed form beats random nearby manipulations strictly
        for (int k = 0; k < 8; ++k) {
            Vec z(br);
            Vec s = classify::random_unit_vector(d, rng);
            double step = std::pow(10.0, -rng.uniform(0.0, 4.0));
            for (int i = 0; i < d; ++i) z[i] += step * s[i];
            double vz = classify::agent_payoff(th, z, a);
            if (!(vz < vb)) {
                ok = false;
                worst = std::max(worst, vz - vb);
            }
        }
        classify::AgentType pos = a;
        pos.y = 1;
        ok = ok && classify::agent_best_response(th, pos) == pos.x;
        t.check(ok, worst);
    }
    return t.r;
}

PropertyResult prop_convex_lipschitz(long long cases) {
    Tally t;
    t.r.group = "strategic-loss-convexity";
    Rng rng(52);
    for (long long c = 0; c < cases; ++c) {
        int d = 1 + rng.uniform_int(5);
        double R = 1.0 + rng.uniform(0.0, 2.0), alpha = rng.uniform(0.2, 3.0);
        classify::LossKind k = c % 2 ? classify::LossKind::Hinge : classify::LossKind::Logistic;
        classify::AgentType a = random_type(rng, d, R, alpha);
        Vec t1 = random_theta(rng, d, R), t2 = random_theta(rng, d, R);
        Vec mid(d);
        for (int i = 0; i < d; ++i) mid[i] = 0.5 * (t1[i] + t2[i]);
        double l1 = classify::strategic_loss(k, t1, a), l2 = classify::strategic_loss(k, t2, a);
        double lm = classify::strategic_loss(k, mid, a);
        double Lip = R + 2.0 * R / alpha;
        double bound = 1.0 + R * R + R * R / alpha;
        double conv = lm - 0.5 * (l1 + l2);
        double lip = std::abs(l1 - l2) - Lip * dist2(t1, t2);
        bool ok = conv <= 1e-9 && lip <= 1e-9 && std::abs(l1) <= bound && std::abs(l2) <= bound;
        // x -> loss is R-Lipschitz for a fixed classifier
        Vec x1 = random_theta(rng, d, R), x2 = random_theta(rng, d, R);
        double lx = std::abs(classify::loss(k, t1, x1, a.y) - classify::loss(k, t1, x2, a.y)) -
                    R * dist2(x1, x2);
        ok = ok && lx <= 1e-9;
        t.check(ok, std::max({conv, lip, lx}));
    }
    return t.r;
}

PropertyResult prop_loss_deviation(long long cases) {
    Tally t;
    t.r.group = "eps-loss-deviation";
    Rng rng(54);
    for (long long c = 0; c < cases; ++c) {
        int d = 1 + rng.uniform_int(5);
        double R = 1.0 + rng.uniform(0.0, 2.0), alpha = rng.uniform(0.2, 3.0);
        double eps = std::pow(10.0, -rng.uniform(0.0, 6.0));
        classify::LossKind k = c % 2 ? classify::LossKind::Hinge : classify::LossKind::Logistic;
        classify::AgentType a = random_type(rng, d, R, alpha);
        Vec th = random_theta(rng, d, R);
        auto dev = static_cast<classify::Deviation>(c % 3);
        Vec xh = classify::eps_agent_response(th, a, eps, dev, rng);
        Vec br = classify::agent_best_response(th, a);
        double gap = std::abs(classify::loss(k, th, xh, a.y) - classify::loss(k, th, br, a.y));
        double bound = R * std::sqrt(2.0 * eps / a.alpha);
        bool in_br = classify::agent_payoff(th, xh, a) >= classify::agent_payoff(th, br, a) - eps - 1e-12;
        t.check(gap <= bound + 1e-12 && in_br, gap - bound);
    }
    return t.r;
}

double depth_in(const finite::Polytope& P, const finite::SimplexEmbedding& E, const Vec& x) {
    double d = 1e300;
    for (std::size_t j = 0; j < P.A.size(); ++j) {
        Vec nrm(E.dim(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i)
            for (int k = 0; k < E.dim(); ++k) nrm[k] += P.A[j][i] * E.basis_row(static_cast<int>(i))[k];
        double nn = norm2(nrm);
        if (nn < 1e-14) continue;
        d = std::min(d, (dot(P.A[j], x) - P.b[j]) / nn);
    }
    return d;
}

PropertyResult prop_membership(long long cases) {
    Tally t;
    t.r.group = "membership-nesting-contract";
    Rng rng(63);
    auto games2 = finite::corpus(2, 2, 4, 0.1, 5);
    auto games3 = finite::corpus(3, 3, 4, 0.1, 6);
    std::vector<finite::FiniteGame> games(games2);
    games.insert(games.end(), games3.begin(), games3.end());
    const int T = 10000;
    long long deep = 0, far = 0;
    for (long long c = 0; c < cases; ++c) {
        const finite::FiniteGame& g = games[c % games.size()];
        int m = g.m();
        finite::SimplexEmbedding E(g.rows);
        int y = finite::multiple_lps(g).y;
        double e1 = rng.uniform(0.0, 0.05), e2 = e1 + rng.uniform(0.0, 0.05);
        finite::Polytope K1 = finite::best_response_polytope(g, y, e1), K2 = finite::best_response_polytope(g, y, e2);
        Vec x = finite::sample_simplex(g.rows, rng);
        bool ok = !K1.contains(x, 0.0) || K2.contains(x, 0.0);
        // contract of the probe battery against an eps-adversarial agent
        double eps = 1e-3;
        GameSpec S = finite::to_game_spec(g);
        auto oracle = [&](const Vec& q) { return eps_adversarial_response(S, q, eps, TieMode::WorstForPrincipal); };
        finite::Polytope K = finite::best_response_polytope(g, y, 0.0);
        finite::Polytope Ke = finite::best_response_polytope(g, y, eps);
        double slack = g.L_cond * eps * std::sqrt(static_cast<double>(m));
        double dK = depth_in(K, E, x);
        if (dK > 3.0 * slack) {
            ++deep;
            ok = ok && finite::conservative_membership(y, x, oracle, T, m, g.L_cond, eps, rng);
        } else if (!Ke.contains(x, 0.0)) {
            auto p = finite::project_to_polytope(Ke, x);
            if (!p || dist2(*p, x) > 3.0 * slack) {
                ++far;
                ok = ok && !finite::conservative_membership(y, x, oracle, T, m, g.L_cond, eps, rng);
            }
        }
        t.check(ok, 1.0);
    }
    t.r.note = std::to_string(deep) + " deep, " + std::to_string(far) + " far";
    return t.r;
}

}  // namespace

std::vector<std::string> property_groups() {
    return {"conservative-structure",       "conserve-mass",            "perturb",
            "purchase-envelope",            "classification-best-response", "strategic-loss-convexity",
            "eps-loss-deviation",           "membership-nesting-contract"};
}

PropertyResult run_property_group(const std::string& group, long long cases) {
    if (group == "conservative-structure") return prop_conservative(cases);
    if (group == "conserve-mass") return prop_conserve_mass(cases);
    if (group == "perturb") return prop_perturb(cases);
    if (group == "purchase-envelope") return prop_envelope(cases);
    if (group == "classification-best-response") return prop_best_response(cases);
    if (group == "strategic-loss-convexity") return prop_convex_lipschitz(cases);
    if (group == "eps-loss-deviation") return prop_loss_deviation(cases);
    if (group == "membership-nesting-contract") return prop_membership(cases);
    throw ParameterError("unknown property group: " + group);
}

}  // namespace stacklab::acceptance
