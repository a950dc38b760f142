#include <algorithm>
#include <cmath>
#include <limits>

#include "stacklab/ssg.hpp"

namespace stacklab::ssg {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace

Curve Curve::linear(double intercept, double slope) {
    Curve c;
    c.kind = Kind::Linear;
    c.a = intercept;
    c.b = slope;
    return c;
}

Curve Curve::logistic(double base, double scale, double k, double center) {
    Curve c;
    c.kind = Kind::Logistic;
    c.base = base;
    c.scale = scale;
    c.k = k;
    c.c = center;
    return c;
}

Curve Curve::piecewise(Vec knots, Vec values) {
    if (knots.size() < 2 || knots.size() != values.size()) throw ParameterError("piecewise curve needs >= 2 knots");
    if (knots.front() != 0.0 || knots.back() != 1.0) throw ParameterError("piecewise knots must span [0,1]");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (!(knots[i] > knots[i - 1])) throw ParameterError("piecewise knots must increase");
    Curve c;
    c.kind = Kind::PiecewiseLinear;
    c.knots = std::move(knots);
    c.values = std::move(values);
    return c;
}

double Curve::operator()(double s) const {
    switch (kind) {
        case Kind::Linear: return a + b * s;
        case Kind::Logistic: return base + scale * sigmoid(k * (s - c));
        case Kind::PiecewiseLinear: {
            if (s <= knots.front()) return values.front();
            if (s >= knots.back()) return values.back();
            auto it = std::upper_bound(knots.begin(), knots.end(), s);
            std::size_t i = static_cast<std::size_t>(it - knots.begin());
            double t = (s - knots[i - 1]) / (knots[i] - knots[i - 1]);
            return values[i - 1] + t * (values[i] - values[i - 1]);
        }
    }
    return 0.0;
}

double Curve::inverse(double w) const {
    switch (kind) {
        case Kind::Linear:
            if (b == 0.0) return std::numeric_limits<double>::quiet_NaN();
            return (w - a) / b;
        case Kind::Logistic: {
            double p = (w - base) / scale;
            if (!(p > 0.0 && p < 1.0)) return std::numeric_limits<double>::quiet_NaN();
            return c + std::log(p / (1.0 - p)) / k;
        }
        case Kind::PiecewiseLinear: {
            double f0 = (*this)(0.0), f1 = (*this)(1.0);
            bool inc = f1 > f0;
            double lo_v = std::min(f0, f1), hi_v = std::max(f0, f1);
            if (w < lo_v || w > hi_v) return std::numeric_limits<double>::quiet_NaN();
            double lo = 0.0, hi = 1.0;
            while (hi - lo > 1e-12) {
                double mid = 0.5 * (lo + hi);
                double f = (*this)(mid);
                if ((f < w) == inc) lo = mid;
                else hi = mid;
            }
            return 0.5 * (lo + hi);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

std::pair<double, double> Curve::slope_range() const {
    if (kind == Kind::Linear) return {b, b};
    const int N = 2048;
    double mn = kInf, mx = -kInf;
    double prev = (*this)(0.0);
    for (int i = 1; i <= N; ++i) {
        double s = static_cast<double>(i) / N;
        double f = (*this)(s);
        double q = (f - prev) * N;
        mn = std::min(mn, q);
        mx = std::max(mx, q);
        prev = f;
    }
    return {mn, mx};
}

SecurityGame::SecurityGame(std::vector<Curve> u, std::vector<Curve> v, StrategySpace space, std::optional<double> C,
                           std::optional<double> W)
    : n_(static_cast<int>(u.size())), u_(std::move(u)), v_(std::move(v)), space_(std::move(space)) {
    if (n_ < 1 || static_cast<int>(v_.size()) != n_ || space_.dim != n_)
        throw ParameterError("security game: curve count must match the strategy space dimension");
    if (space_.kind == SpaceKind::Simplex) throw ParameterError("security game needs a downward-closed space");
    bool parametric = false;
    double need = 1.0;
    for (int y = 0; y < n_; ++y) {
        for (const Curve* c : {&u_[y], &v_[y]}) {
            double lo = c == &u_[y] ? 0.0 : -1.0;
            double f0 = (*c)(0.0), f1 = (*c)(1.0);
            if (f0 < lo - 1e-9 || f0 > 1 + 1e-9 || f1 < lo - 1e-9 || f1 > 1 + 1e-9)
                throw ParameterError("security game: u must map into [0,1] and v into [-1,1]");
            if (c->kind != Curve::Kind::Linear) parametric = true;
        }
        auto [umin, umax] = u_[y].slope_range();
        auto [vmin, vmax] = v_[y].slope_range();
        if (!(umin > 0.0)) throw ParameterError("security game: u^y must be strictly increasing");
        if (!(vmax < 0.0)) throw ParameterError("security game: v^y must be strictly decreasing");
        need = std::max({need, umax, -vmin, -1.0 / vmax});
    }
    if (parametric && !C) throw ParameterError("security game: parametric curves require an explicit slope bound C");
    if (C) {
        if (*C < 1.0) throw ParameterError("security game: C must be at least 1");
        if (*C < need * (1.0 - 1e-9) - 1e-9)
            throw ParameterError("security game: slope bound C violated by curve (needs " + format_double(need) + ")");
        C_ = *C;
    } else {
        C_ = need;
    }
    double wmin = kInf;
    for (int y = 0; y < n_; ++y) {
        double w = region_width(y);
        if (w >= 0.0) wmin = std::min(wmin, w);
    }
    if (!(wmin > 0.0)) throw ParameterError("security game: width bound is zero");
    if (parametric && !W) throw ParameterError("security game: parametric curves require an explicit width bound W");
    if (W) {
        if (!(*W > 0.0 && *W <= 1.0)) throw ParameterError("security game: W must lie in (0,1]");
        if (*W > wmin + 1e-9) throw ParameterError("security game: width bound W exceeds the narrowest region");
        W_ = *W;
    } else {
        W_ = std::min(1.0, wmin);
    }
}

double SecurityGame::coverage_needed(int y, double w) const {
    const Curve& c = v_[y];
    if (c(0.0) <= w) return 0.0;
    if (c(1.0) > w) return kInf;
    double s = c.inverse(w);
    if (std::isnan(s)) {
        double lo = 0.0, hi = 1.0;
        while (hi - lo > 1e-13) {
            double mid = 0.5 * (lo + hi);
            if (c(mid) > w) lo = mid;
            else hi = mid;
        }
        s = hi;
    }
    return std::clamp(s, 0.0, 1.0);
}

double SecurityGame::region_width(int y) const {
    auto feasible = [&](double t) {
        Vec x(n_, 0.0);
        x[y] = t;
        double w = v_[y](t);
        for (int z = 0; z < n_; ++z) {
            if (z == y) continue;
            double s = coverage_needed(z, w);
            if (!std::isfinite(s)) return false;
            x[z] = s;
        }
        return space_.contains(x, 1e-12);
    };
    if (!feasible(0.0)) return -1.0;
    if (feasible(1.0)) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (feasible(mid)) lo = mid;
        else hi = mid;
    }
    return lo;
}

GameSpec SecurityGame::spec() const {
    auto self = std::make_shared<SecurityGame>(*this);
    GameSpec g;
    g.name = "ssg";
    g.space = space_;
    g.num_actions = n_;
    g.u = [self](const Vec& x, int y) { return self->u(x, y); };
    g.v = [self](const Vec& x, int y) { return self->v(x, y); };
    return g;
}

SecurityGame linear_game(const Vec& v_intercepts, const Vec& v_slopes, const Vec& u_intercepts, const Vec& u_slopes,
                         StrategySpace space) {
    std::size_t n = v_intercepts.size();
    if (v_slopes.size() != n || u_intercepts.size() != n || u_slopes.size() != n)
        throw ParameterError("linear game: coefficient vectors differ in length");
    std::vector<Curve> u, v;
    for (std::size_t i = 0; i < n; ++i) {
        v.push_back(Curve::linear(v_intercepts[i], -v_slopes[i]));
        u.push_back(Curve::linear(u_intercepts[i], u_slopes[i]));
    }
    return SecurityGame(std::move(u), std::move(v), std::move(space));
}

SecurityGame random_linear_game(int n, Rng& rng, double C0) {
    Vec va(n), vb(n), ua(n), ub(n);
    for (int i = 0; i < n; ++i) {
        vb[i] = rng.uniform(1.0 / C0, 1.0);
        va[i] = rng.uniform(vb[i], 1.0);
        ub[i] = rng.uniform(1.0 / C0, 1.0);
        ua[i] = rng.uniform(0.0, 1.0 - ub[i]);
    }
    return linear_game(va, vb, ua, ub, StrategySpace::simplex_downward(n));
}

SecurityGame disk_game() {
    auto disk = [](const Vec& x) { return x[0] * x[0] + x[1] * x[1] <= 1.0; };
    std::vector<Curve> v = {Curve::logistic(1.0, -0.75, 15.0, 1.0 / 3.0), Curve::linear(1.0, -1.0)};
    std::vector<Curve> u = {Curve::linear(0.0, 1.0), Curve::linear(0.0, 1.0)};
    return SecurityGame(u, v, StrategySpace::convex(2, disk), 2100.0, 0.5);
}

}  // namespace stacklab::ssg
