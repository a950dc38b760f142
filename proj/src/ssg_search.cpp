#include <algorithm>
#include <cmath>
#include <limits>

#include "stacklab/ssg.hpp"

namespace stacklab::ssg {

namespace {

Vec effective_upper(const StrategySpace& space, const Vec& hi) {
    Vec h(hi);
    for (int i = 0; i < space.dim; ++i) {
        h[i] = std::min(h[i], 1.0);
        if (space.kind == SpaceKind::BoxedSimplex) h[i] = std::min(h[i], space.caps[i]);
    }
    return h;
}

Vec effective_lower(const Vec& lo) {
    Vec l(lo);
    for (double& v : l) v = std::max(v, 0.0);
    return l;
}

bool simplex_like(const StrategySpace& s) {
    return s.kind == SpaceKind::SimplexDownward || s.kind == SpaceKind::BoxedSimplex;
}

bool in_region(const StrategySpace& space, const Vec& lo, const Vec& hi, const Vec& x) {
    for (int i = 0; i < space.dim; ++i)
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return space.contains(x, 0.0);
}

}  // namespace

CentroidEstimator::CentroidEstimator(std::uint64_t seed, int samples, int burn_in)
    : rng_(seed), samples_(samples), burn_in_(burn_in) {
    if (samples < 1) throw ParameterError("centroid sample count must be positive");
}

void CentroidEstimator::warm_start(const StrategySpace& space, const Vec& lo, const Vec& hi) {
    int n = space.dim;
    for (int i = 0; i < n; ++i)
        if (lo[i] > hi[i] + 1e-12) throw EmptyRegion("search region empty: lower bound above upper bound");
    if (!space.contains(lo, 1e-12)) throw EmptyRegion("search region empty: lower corner outside the strategy space");
    if (static_cast<int>(state_.size()) == n && in_region(space, lo, hi, state_)) return;
    Vec q(n);
    if (static_cast<int>(state_.size()) == n) {
        for (int i = 0; i < n; ++i) q[i] = std::clamp(state_[i], lo[i], hi[i]);
    } else {
        for (int i = 0; i < n; ++i) q[i] = 0.5 * (lo[i] + hi[i]);
    }
    if (simplex_like(space)) {
        double sl = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            sl += lo[i];
            sq += q[i] - lo[i];
        }
        double room = 1.0 - sl;
        if (sq > 0.5 * room) {
            double s = sq > 0.0 ? 0.5 * room / sq : 0.0;
            for (int i = 0; i < n; ++i) q[i] = lo[i] + s * (q[i] - lo[i]);
        }
    } else if (space.kind == SpaceKind::Convex) {
        double s = 1.0;
        Vec p(q);
        while (!in_region(space, lo, hi, p) && s > 1e-12) {
            s *= 0.5;
            for (int i = 0; i < n; ++i) p[i] = lo[i] + s * (q[i] - lo[i]);
        }
        q = in_region(space, lo, hi, p) ? p : lo;
    }
    for (int i = 0; i < n; ++i) q[i] = std::clamp(q[i], lo[i], hi[i]);
    state_ = q;
}

void CentroidEstimator::step(const StrategySpace& space, const Vec& lo, const Vec& hi) {
    int n = space.dim;
    Vec& x = state_;
    if (simplex_like(space)) {
        double sum = 0.0;
        for (double v : x) sum += v;
        for (int i = 0; i < n; ++i) {
            if (!(hi[i] > lo[i])) {
                sum += lo[i] - x[i];
                x[i] = lo[i];
                continue;
            }
            double rest = sum - x[i];
            double up = std::min(hi[i], 1.0 - rest);
            if (up < lo[i]) up = lo[i];
            double v = lo[i] + (up - lo[i]) * rng_.uniform();
            x[i] = std::min(v, up);
            sum = rest + x[i];
        }
        return;
    }
    // general convex body: random direction over free coordinates, chord found by bisection
    Vec d(n, 0.0);
    double nn = 0.0;
    for (int i = 0; i < n; ++i) {
        if (hi[i] > lo[i]) d[i] = rng_.normal();
        nn += d[i] * d[i];
    }
    if (nn == 0.0) return;
    nn = std::sqrt(nn);
    for (double& v : d) v /= nn;
    double tmin = -std::numeric_limits<double>::infinity(), tmax = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        if (d[i] > 0) {
            tmax = std::min(tmax, (hi[i] - x[i]) / d[i]);
            tmin = std::max(tmin, (lo[i] - x[i]) / d[i]);
        } else if (d[i] < 0) {
            tmax = std::min(tmax, (lo[i] - x[i]) / d[i]);
            tmin = std::max(tmin, (hi[i] - x[i]) / d[i]);
        }
    }
    auto at = [&](double t) {
        Vec p(x);
        for (int i = 0; i < n; ++i) p[i] = std::clamp(x[i] + t * d[i], lo[i], hi[i]);
        return p;
    };
    auto shrink = [&](double t_end) {
        if (space.member(at(t_end))) return t_end;
        double a = 0.0, b = t_end;
        for (int it = 0; it < 40; ++it) {
            double m = 0.5 * (a + b);
            if (space.member(at(m))) a = m;
            else b = m;
        }
        return a;
    };
    tmax = shrink(std::max(tmax, 0.0));
    tmin = shrink(std::min(tmin, 0.0));
    double t = tmin + (tmax - tmin) * rng_.uniform();
    x = at(t);
}

Vec CentroidEstimator::centroid(const StrategySpace& space, const Vec& lo_in, const Vec& hi_in) {
    int n = space.dim;
    Vec lo = effective_lower(lo_in), hi = effective_upper(space, hi_in);
    if (space.kind == SpaceKind::Box) {
        Vec c(n);
        for (int i = 0; i < n; ++i) {
            if (lo[i] > hi[i] + 1e-12) throw EmptyRegion("search region empty: lower bound above upper bound");
            c[i] = 0.5 * (lo[i] + std::max(lo[i], hi[i]));
        }
        return c;
    }
    for (int i = 0; i < n; ++i) hi[i] = std::max(hi[i], lo[i]);
    warm_start(space, lo, hi);
    for (int b = 0; b < burn_in_; ++b) step(space, lo, hi);
    Vec acc(n, 0.0);
    for (int s = 0; s < samples_; ++s) {
        step(space, lo, hi);
        for (int i = 0; i < n; ++i) acc[i] += state_[i];
    }
    for (int i = 0; i < n; ++i) acc[i] = std::clamp(acc[i] / samples_, lo[i], hi[i]);
    if (!space.contains(acc, 0.0)) {
        // averaging round-off on a face; pull toward the lower corner
        double sl = 0.0, sa = 0.0;
        for (int i = 0; i < n; ++i) sl += lo[i], sa += acc[i] - lo[i];
        if (simplex_like(space) && sa > 0.0) {
            double s = std::max(0.0, (1.0 - sl) / sa) * (1.0 - 1e-15);
            for (int i = 0; i < n; ++i) acc[i] = lo[i] + std::min(1.0, s) * (acc[i] - lo[i]);
        }
    }
    return acc;
}

Vec CentroidEstimator::draw(const StrategySpace& space, const Vec& lo_in, const Vec& hi_in) {
    Vec lo = effective_lower(lo_in), hi = effective_upper(space, hi_in);
    int n = space.dim;
    if (space.kind == SpaceKind::Box) {
        Vec x(n);
        for (int i = 0; i < n; ++i) x[i] = lo[i] + (std::max(lo[i], hi[i]) - lo[i]) * rng_.uniform();
        return x;
    }
    for (int i = 0; i < n; ++i) hi[i] = std::max(hi[i], lo[i]);
    bool fresh = static_cast<int>(state_.size()) != n || !in_region(space, lo, hi, state_);
    warm_start(space, lo, hi);
    int steps = fresh ? burn_in_ + 4 : 4;
    for (int b = 0; b < steps; ++b) step(space, lo, hi);
    return state_;
}

Vec centroid(const StrategySpace& space, const Vec& lo, const Vec& hi, Rng& rng, int samples) {
    CentroidEstimator est(rng.engine()(), samples);
    return est.centroid(space, lo, hi);
}

ClinchSearch::ClinchSearch(std::shared_ptr<const SecurityGame> game, double delta, Vec lo, Vec hi, double eps,
                           std::uint64_t seed, ClinchOptions opt)
    : game_(std::move(game)), delta_(delta), eps_(eps), opt_(opt), cent_(seed, opt.centroid_samples) {
    const SecurityGame& g = *game_;
    int n = g.n();
    if (!(delta > 0.0 && delta <= 1.0)) throw ParameterError("clinch: delta must lie in (0,1]");
    if (eps < 0.0) throw ParameterError("clinch: eps must be non-negative");
    if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n)
        throw ParameterError("clinch: bound vectors must have length n");
    double C = g.C();
    if (opt.enforce_accuracy && eps > delta / (33.0 * C * C * C * n) * (1.0 + 1e-9))
        throw ParameterError("clinch: oracle accuracy must satisfy eps <= delta/(33 C^3 n)");
    lambda_ = delta / (4.0 * C * C);
    bool mc = g.space().kind != SpaceKind::Box;
    // spread the centroid tolerance over coordinates so the sum of slacks stays below lambda / 8
    tau_ = (opt.tighten_for_centroid && mc) ? std::min(lambda_ / 8.0, 1e-3) / n : 0.0;
    lo_ = effective_lower(lo);
    hi_ = effective_upper(g.space(), hi);
    for (int i = 0; i < n; ++i) {
        if (lo_[i] > hi_[i] + 1e-12) throw ParameterError("clinch: lower bound exceeds upper bound");
        hi_[i] = std::max(hi_[i], lo_[i]);
    }
    double alpha = 0.0;
    for (int i = 0; i < n; ++i) alpha = std::max(alpha, hi_[i] - lo_[i]);
    alpha = std::max(alpha, lambda_);
    guard_ = std::max(15.0 * n * std::log(2.0 * alpha * n / lambda_), static_cast<double>(n));
    double per_target = std::ceil(std::log2(alpha / lambda_)) + 2.0;
    budget_ = static_cast<int>(std::ceil(opt.safety * (guard_ + n * per_target)));
    active_.assign(n, true);
    xhat_.assign(n, 0.0);
}

void ClinchSearch::lock_coordinates() {
    const StrategySpace& space = game_->space();
    int n = game_->n();
    for (int y = 0; y < n; ++y) {
        if (!active_[y]) continue;
        Vec p(lo_);
        p[y] += lambda_;
        if (p[y] > hi_[y] || !space.contains(p, 0.0)) {
            active_[y] = false;
            hi_[y] = lo_[y];
        }
    }
}

const Vec& ClinchSearch::query() {
    if (stage_ == Stage::Done) throw std::logic_error("clinch: query after termination");
    if (pending_) return q_;
    if (stage_ == Stage::Main) {
        lock_coordinates();
        x_ = cent_.centroid(game_->space(), lo_, hi_);
        q_ = x_;
    }
    pending_ = true;
    if (++queries_ > budget_)
        throw BudgetExceeded("clinch: query budget " + std::to_string(budget_) +
                             " exceeded; the oracle lies or the game violates its regularity bounds");
    return q_;
}

void ClinchSearch::respond(int y) {
    if (!pending_) throw std::logic_error("clinch: respond without a pending query");
    int n = game_->n();
    if (y < 0 || y >= n) throw ParameterError("clinch: response out of range");
    pending_ = false;
    if (stage_ == Stage::Main) {
        double cut = x_[y] - game_->C() * eps_ - tau_;
        lo_[y] = std::min(std::max(lo_[y], std::max(cut, 0.0)), hi_[y]);
        ++iterations_;
        if (iterations_ > opt_.safety * guard_)
            throw BudgetExceeded("clinch: main loop exceeded " + format_double(opt_.safety) + " x " +
                                 format_double(guard_) + " iterations");
        if (!active_[y]) {
            stage_ = Stage::Conserve;
            xhat_ = x_;
            cm_target_ = 0;
            cm_l_ = lo_[0];
            cm_u_ = x_[0];
            advance_conserve();
        }
        return;
    }
    if (y == cm_target_) cm_l_ = cm_m_;
    else cm_u_ = cm_m_;
    advance_conserve();
}

void ClinchSearch::advance_conserve() {
    int n = game_->n();
    while (cm_target_ < n) {
        if (cm_u_ - cm_l_ >= lambda_) {
            cm_m_ = 0.5 * (cm_u_ + cm_l_);
            q_ = x_;
            q_[cm_target_] = cm_m_;
            return;
        }
        xhat_[cm_target_] = cm_l_;
        ++cm_target_;
        if (cm_target_ < n) {
            cm_l_ = std::min(lo_[cm_target_], x_[cm_target_]);
            cm_u_ = x_[cm_target_];
        }
    }
    stage_ = Stage::Done;
}

const Vec& ClinchSearch::result() const {
    if (stage_ != Stage::Done) throw std::logic_error("clinch: result before termination");
    return xhat_;
}

ClinchResult clinch(const Oracle& oracle, const SecurityGame& game, double delta, const Vec& lo, const Vec& hi,
                    double eps, std::uint64_t seed, ClinchOptions opt) {
    ClinchSearch s(std::make_shared<SecurityGame>(game), delta, lo, hi, eps, seed, opt);
    while (!s.done()) {
        const Vec& q = s.query();
        s.respond(oracle(q));
    }
    return {s.result(), s.queries(), s.main_iterations()};
}

ConserveResult conserve_mass(const Vec& x, double lambda, const Vec& lo, const Oracle& oracle) {
    if (!(lambda > 0.0)) throw ParameterError("conserve_mass: lambda must be positive");
    if (lo.size() != x.size()) throw ParameterError("conserve_mass: bound length mismatch");
    ConserveResult r;
    r.x.assign(x.size(), 0.0);
    for (std::size_t y = 0; y < x.size(); ++y) {
        if (lo[y] > x[y] + 1e-12) throw ParameterError("conserve_mass: lower bound above x");
        double l = std::min(lo[y], x[y]), u = x[y];
        while (u - l >= lambda) {
            double m = 0.5 * (u + l);
            Vec q(x);
            q[y] = m;
            ++r.queries;
            if (oracle(q) == static_cast<int>(y)) l = m;
            else u = m;
        }
        r.x[y] = l;
    }
    return r;
}

int perturb_target(const Vec& xhat, const SecurityGame& game) {
    int best = -1;
    double bu = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < game.n(); ++y) {
        if (xhat[y] > game.W() / 2.0) {
            double uy = game.u(xhat, y);
            if (uy > bu) bu = uy, best = y;
        }
    }
    if (best < 0) throw ParameterError("perturb: no target covered above W/2");
    return best;
}

Vec perturb(const Vec& xhat, double lambda, const SecurityGame& game) {
    int y = perturb_target(xhat, game);
    Vec x(xhat);
    x[y] -= game.W() * lambda / 2.0;
    return x;
}

int clinch_simplex_iterations(const SecurityGame& game, double lambda) {
    double C = game.C();
    double delta = game.W() * lambda / (6.0 * C * C);
    return static_cast<int>(std::ceil(game.n() * std::log(4.0 / delta)));
}

SimplexResult clinch_simplex(const Oracle& oracle, const SecurityGame& game, double lambda) {
    if (game.space().kind != SpaceKind::SimplexDownward)
        throw ParameterError("clinch_simplex: requires the downward simplex");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw ParameterError("clinch_simplex: lambda must lie in (0,1]");
    int n = game.n();
    int iters = clinch_simplex_iterations(game, lambda);
    SimplexResult r;
    Vec lo(n, 0.0);
    double sum = 0.0;
    for (int i = 0; i < iters; ++i) {
        double share = (1.0 - sum) / n;
        Vec x(lo);
        for (double& v : x) v += share;
        int y = oracle(x);
        if (y < 0 || y >= n) throw ParameterError("clinch_simplex: response out of range");
        lo[y] = x[y];
        sum = 0.0;
        for (double v : lo) sum += v;
        r.residual_mass.push_back(1.0 - sum);
    }
    r.iterations = iters;
    r.xhat = lo;
    for (double& v : r.xhat) v /= sum;
    r.x = perturb(r.xhat, lambda, game);
    return r;
}

Vec exact_round(const Vec& xhat, int L_bits, int n) {
    if (L_bits < 1 || n < 1) throw ParameterError("exact_round: L_bits and n must be positive");
    if (8 * L_bits * n > 48)
        throw ParameterError("exact_round: 8*L*n exceeds 48 bits; exact-arithmetic search is not supported");
    double q = std::ldexp(1.0, -8 * L_bits * n);
    Vec out(xhat.size());
    for (std::size_t i = 0; i < xhat.size(); ++i) out[i] = std::nearbyint(xhat[i] / q) * q;
    return out;
}

Vec exact_search(const Oracle& oracle, const SecurityGame& game, int L_bits, std::uint64_t seed) {
    int n = game.n();
    if (8 * L_bits * n > 48)
        throw ParameterError("exact_search: 8*L*n exceeds 48 bits; exact-arithmetic search is not supported");
    double delta = std::ldexp(1.0, -8 * L_bits * n) / 3.0;
    auto r = clinch(oracle, game, delta, Vec(n, 0.0), Vec(n, 1.0), 0.0, seed);
    return exact_round(r.x, L_bits, n);
}

}  // namespace stacklab::ssg
