#include "stacklab/finite.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <ostream>

namespace stacklab::finite {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Solves M x = rhs in place; false when M is numerically singular.
bool solve(std::vector<Vec> M, Vec rhs, Vec& x) {
    int n = static_cast<int>(rhs.size());
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(M[r][c]) > std::abs(M[piv][c])) piv = r;
        if (std::abs(M[piv][c]) < 1e-12) return false;
        std::swap(M[piv], M[c]);
        std::swap(rhs[piv], rhs[c]);
        for (int r = c + 1; r < n; ++r) {
            double f = M[r][c] / M[c][c];
            if (f == 0.0) continue;
            for (int k = c; k < n; ++k) M[r][k] -= f * M[c][k];
            rhs[r] -= f * rhs[c];
        }
    }
    x.assign(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = rhs[r];
        for (int k = r + 1; k < n; ++k) s -= M[r][k] * x[k];
        x[r] = s / M[r][r];
    }
    return true;
}

// Calls f on every k-subset of {0..n-1}.
void for_each_subset(int n, int k, const std::function<void(const std::vector<int>&)>& f) {
    std::vector<int> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    if (k > n) return;
    while (true) {
        f(idx);
        int i = k - 1;
        while (i >= 0 && idx[i] == n - k + i) --i;
        if (i < 0) return;
        ++idx[i];
        for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

struct OutOfRounds {};

class StubPolicy : public Policy {
public:
    std::string name() const override { return "noisy-stack"; }
    Vec act(int) override { throw EpisodeError("noisy-stack is driven by its own runner"); }
    void observe(int, const Vec&, int) override {}
    PolicyPtr clone() const override { return std::make_unique<StubPolicy>(*this); }
    RoundInfo info() const override { return info_; }
    std::optional<int> effective_delay() const override { return std::nullopt; }
    RoundInfo info_;
};

}  // namespace

void FiniteGame::validate() const {
    if (rows < 2) throw ParameterError("finite game: need at least two principal strategies");
    if (cols < 1) throw ParameterError("finite game: need at least one agent action");
    std::size_t sz = static_cast<std::size_t>(rows) * cols;
    if (u0.size() != sz || v0.size() != sz) throw ParameterError("finite game: payoff matrices must be rows x cols");
    for (std::size_t i = 0; i < sz; ++i)
        if (!(u0[i] >= 0.0 && u0[i] <= 1.0 && v0[i] >= 0.0 && v0[i] <= 1.0))
            throw ParameterError("finite game: payoff entries must lie in [0,1]");
}

FiniteGame make_game(int rows, int cols, std::vector<double> u0, std::vector<double> v0, std::string name) {
    FiniteGame g;
    g.rows = rows;
    g.cols = cols;
    g.u0 = std::move(u0);
    g.v0 = std::move(v0);
    g.name = name.empty() ? std::to_string(rows) + "x" + std::to_string(cols) : std::move(name);
    g.validate();
    return g;
}

std::pair<double, double> mixed_payoffs(const FiniteGame& g, const Vec& x, int y) {
    if (static_cast<int>(x.size()) != g.rows) throw ParameterError("mixed_payoffs: strategy length mismatch");
    if (y < 0 || y >= g.cols) throw ParameterError("mixed_payoffs: unknown agent action");
    double s = 0.0;
    for (double xi : x) {
        if (xi < -1e-9) throw ParameterError("mixed_payoffs: strategy off the simplex");
        s += xi;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ParameterError("mixed_payoffs: strategy off the simplex");
    double u = 0.0, v = 0.0;
    for (int i = 0; i < g.rows; ++i) {
        u += x[i] * g.u0_at(i, y);
        v += x[i] * g.v0_at(i, y);
    }
    return {u, v};
}

GameSpec to_game_spec(const FiniteGame& g) {
    g.validate();
    GameSpec s;
    s.name = g.name;
    s.space = StrategySpace::simplex(g.rows);
    s.num_actions = g.cols;
    auto gp = std::make_shared<FiniteGame>(g);
    auto lin = [gp](const std::vector<double>& M, const Vec& x, int y) {
        double acc = 0.0;
        for (int i = 0; i < gp->rows; ++i) acc += x[i] * M[i * gp->cols + y];
        return acc;
    };
    s.u = [gp, lin](const Vec& x, int y) { return lin(gp->u0, x, y); };
    s.v = [gp, lin](const Vec& x, int y) { return lin(gp->v0, x, y); };
    return s;
}

SimplexEmbedding::SimplexEmbedding(int rows) : rows_(rows) {
    if (rows < 2) throw ParameterError("embedding needs at least two vertices");
    int m = rows - 1;
    Q_.assign(rows, Vec(m, 0.0));
    // Helmert basis of the hyperplane orthogonal to the all-ones vector
    for (int k = 1; k <= m; ++k) {
        double s = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
        for (int i = 0; i < k; ++i) Q_[i][k - 1] = s;
        Q_[k][k - 1] = -k * s;
    }
}

Vec SimplexEmbedding::embed(const Vec& x) const {
    Vec z(dim(), 0.0);
    double c = 1.0 / rows_;
    for (int i = 0; i < rows_; ++i)
        for (int k = 0; k < dim(); ++k) z[k] += Q_[i][k] * (x[i] - c);
    return z;
}

Vec SimplexEmbedding::lift(const Vec& z) const {
    Vec x(rows_, 1.0 / rows_);
    for (int i = 0; i < rows_; ++i)
        for (int k = 0; k < dim(); ++k) x[i] += Q_[i][k] * z[k];
    return x;
}

Vec project_to_simplex(const Vec& w) {
    Vec s(w);
    std::sort(s.begin(), s.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        cum += s[j];
        double t = (cum - 1.0) / (j + 1);
        if (s[j] - t > 0.0) theta = t;
    }
    Vec x(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) x[i] = std::max(0.0, w[i] - theta);
    return x;
}

Vec sample_simplex(int rows, Rng& rng) {
    Vec x(rows);
    double s = 0.0;
    for (double& c : x) {
        c = -std::log(1.0 - rng.uniform());
        s += c;
    }
    for (double& c : x) c /= s;
    return x;
}

Vec random_sphere(int d, Rng& rng) {
    Vec s(d);
    double n = 0.0;
    while (n < 1e-12) {
        for (double& c : s) c = rng.normal();
        n = norm2(s);
    }
    for (double& c : s) c /= n;
    return s;
}

bool Polytope::contains(const Vec& x, double tol) const {
    for (std::size_t j = 0; j < A.size(); ++j)
        if (dot(A[j], x) < b[j] - tol) return false;
    return true;
}

Polytope best_response_polytope(const FiniteGame& g, int y, double eps) {
    if (y < 0 || y >= g.cols) throw ParameterError("best_response_polytope: unknown agent action");
    Polytope P;
    for (int i = 0; i < g.rows; ++i) {
        Vec e(g.rows, 0.0);
        e[i] = 1.0;
        P.A.push_back(e);
        P.b.push_back(0.0);
    }
    for (int yp = 0; yp < g.cols; ++yp) {
        if (yp == y) continue;
        Vec a(g.rows);
        for (int i = 0; i < g.rows; ++i) a[i] = g.v0_at(i, y) - g.v0_at(i, yp);
        P.A.push_back(a);
        P.b.push_back(-eps);
    }
    return P;
}

LpSolution multiple_lps(const FiniteGame& g) {
    g.validate();
    LpSolution best;
    best.value = -kInf;
    best.per_action.assign(g.cols, -kInf);
    int m = g.m();
    for (int y = 0; y < g.cols; ++y) {
        Polytope P = best_response_polytope(g, y);
        int nc = static_cast<int>(P.A.size());
        Vec arg;
        for_each_subset(nc, m, [&](const std::vector<int>& act) {
            std::vector<Vec> M{Vec(g.rows, 1.0)};
            Vec rhs{1.0};
            for (int j : act) {
                M.push_back(P.A[j]);
                rhs.push_back(P.b[j]);
            }
            Vec x;
            if (!solve(M, rhs, x) || !P.contains(x, 1e-11)) return;
            for (double& c : x) c = std::max(c, 0.0);
            double s = std::accumulate(x.begin(), x.end(), 0.0);
            for (double& c : x) c /= s;
            double u = mixed_payoffs(g, x, y).first;
            if (u > best.per_action[y] + 1e-15) {
                best.per_action[y] = u;
                arg = x;
            }
        });
        if (best.per_action[y] > best.value + 1e-12) {
            best.value = best.per_action[y];
            best.x = arg;
            best.y = y;
        }
    }
    return best;
}

std::optional<Vec> project_to_polytope(const Polytope& P, const Vec& a) {
    if (P.contains(a, 1e-12)) return a;
    int n = static_cast<int>(a.size());
    int nc = static_cast<int>(P.A.size());
    double best = kInf;
    std::optional<Vec> out;
    for (int k = 0; k <= std::min(nc, n - 1); ++k) {
        for_each_subset(nc, k, [&](const std::vector<int>& act) {
            std::vector<Vec> rowsM{Vec(n, 1.0)};
            Vec target{1.0};
            for (int j : act) {
                rowsM.push_back(P.A[j]);
                target.push_back(P.b[j]);
            }
            int q = static_cast<int>(rowsM.size());
            std::vector<Vec> G(q, Vec(q));
            Vec rhs(q);
            for (int i = 0; i < q; ++i) {
                for (int j = 0; j < q; ++j) G[i][j] = dot(rowsM[i], rowsM[j]);
                rhs[i] = dot(rowsM[i], a) - target[i];
            }
            Vec lam;
            if (!solve(G, rhs, lam)) return;
            Vec x(a);
            for (int i = 0; i < q; ++i)
                for (int c = 0; c < n; ++c) x[c] -= lam[i] * rowsM[i][c];
            if (!P.contains(x, 1e-10)) return;
            double d = dist2(x, a);
            if (d < best) {
                best = d;
                out = x;
            }
        });
    }
    return out;
}

namespace {
// Embedded distance from x to the boundary of P (negative outside).
double depth(const Polytope& P, const SimplexEmbedding& E, const Vec& x) {
    double d = kInf;
    int rows = static_cast<int>(x.size());
    for (std::size_t j = 0; j < P.A.size(); ++j) {
        Vec n(E.dim(), 0.0);
        for (int i = 0; i < rows; ++i)
            for (int k = 0; k < E.dim(); ++k) n[k] += P.A[j][i] * E.basis_row(i)[k];
        double nn = norm2(n);
        double slack = dot(P.A[j], x) - P.b[j];
        if (nn < 1e-14) {
            if (slack < 0.0) return -kInf;
            continue;
        }
        d = std::min(d, slack / nn);
    }
    return d;
}
}  // namespace

double inscribed_radius(const FiniteGame& g, int y, int samples, std::uint64_t seed, Vec* centre) {
    Polytope P = best_response_polytope(g, y);
    SimplexEmbedding E(g.rows);
    Rng rng = Rng(seed).substream("inscribed");
    double best = 0.0;
    Vec arg;
    for (int s = 0; s < samples; ++s) {
        Vec x = sample_simplex(g.rows, rng);
        double d = depth(P, E, x);
        if (d > best) {
            best = d;
            arg = x;
        }
    }
    if (arg.empty()) return 0.0;
    double step = 0.05;
    for (int it = 0; it < 400 && step > 1e-7; ++it) {
        Vec z = E.embed(arg);
        Vec dir = random_sphere(E.dim(), rng);
        for (int k = 0; k < E.dim(); ++k) z[k] += step * dir[k];
        Vec x = E.lift(z);
        double d = depth(P, E, x);
        if (d > best) {
            best = d;
            arg = x;
        } else if (it % 20 == 19) {
            step /= 2.0;
        }
    }
    if (centre) *centre = arg;
    return best;
}

HausdorffEstimate hausdorff_estimate(const FiniteGame& g, int y, double eps, long long samples, std::uint64_t seed) {
    Polytope K = best_response_polytope(g, y, 0.0);
    Polytope Ke = best_response_polytope(g, y, eps);
    Rng rng = Rng(seed).substream("hausdorff");
    HausdorffEstimate h;
    auto one_side = [&](const Polytope& from, const Polytope& to, bool& ok) {
        double worst = 0.0;
        long long got = 0, tries = 0;
        while (got < samples && tries < 200 * samples) {
            ++tries;
            Vec x = sample_simplex(g.rows, rng);
            if (!from.contains(x, 0.0)) continue;
            ++got;
            if (to.contains(x, 0.0)) continue;
            auto p = project_to_polytope(to, x);
            if (!p) {
                ok = false;
                return 0.0;
            }
            worst = std::max(worst, dist2(*p, x));
        }
        if (got == 0) ok = false;
        h.samples += got;
        return worst;
    };
    bool ok = true;
    double a = one_side(K, Ke, ok);
    double b = ok ? one_side(Ke, K, ok) : 0.0;
    h.defined = ok;
    h.value = ok ? std::max(a, b) : 0.0;
    return h;
}

int probe_count(int m, int T) {
    return static_cast<int>(std::ceil(2.0 * std::sqrt(static_cast<double>(m)) * std::log(static_cast<double>(T))));
}

double probe_radius(int m, double L, double eps) { return 2.0 * L * eps * std::sqrt(static_cast<double>(m)); }

bool conservative_membership(int y, const Vec& x, const ResponseOracle& oracle, int T, int m, double L, double eps,
                             Rng& rng) {
    SimplexEmbedding E(m + 1);
    Vec z = E.embed(x);
    double rad = probe_radius(m, L, eps);
    int P = probe_count(m, T);
    for (int i = 0; i < P; ++i) {
        Vec s = random_sphere(m, rng);
        Vec w = z;
        for (int k = 0; k < m; ++k) w[k] += rad * s[k];
        Vec xw = E.lift(w);
        if (*std::min_element(xw.begin(), xw.end()) < 0.0) xw = project_to_simplex(xw);
        if (oracle(xw) != y) return false;
    }
    return true;
}

LinOptResult membership_lin_opt(const Vec& g, const std::function<bool(const Vec&)>& mem, const Vec& z0, double r,
                                double R, double delta, Rng& rng, LinOptOptions opt, const std::vector<Vec>& H,
                                const Vec& h) {
    int k = static_cast<int>(z0.size());
    if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("membership_lin_opt: delta must lie in (0,1)");
    if (!(r > 0.0 && R > r)) throw ParameterError("membership_lin_opt: need 0 < r < R");
    long long budget = opt.budget > 0 ? opt.budget
                                      : static_cast<long long>(std::ceil(50.0 * k * k * std::log(1.0 / delta)));
    int min_stage = static_cast<int>(std::ceil(2.0 * std::sqrt(static_cast<double>(k))));
    bool adaptive = opt.steps_per_stage <= 0;
    int per_stage = adaptive ? min_stage : opt.steps_per_stage;
    LinOptResult res;
    auto member = [&](const Vec& z) {
        ++res.calls;
        return mem(z);
    };
    if (!member(z0)) throw ParameterError("membership_lin_opt: start point rejected by the oracle (bad x0)");
    Vec z = z0;
    res.z = z0;
    res.value = dot(g, z0);
    double tau = opt.initial_temperature;
    double tau_final = delta / k;
    int stage_steps = 0;
    // spreads the remaining budget evenly over the remaining stages, using the bisection depth of each stage
    auto plan_stages = [&]() {
        double need = 0.0;
        for (double t = tau;; t = std::max(tau_final, t / 2.0)) {
            double tol = std::max(delta / 4.0, t / 4.0);
            need += 2.0 * (std::log2(2.0 * R / tol) + 1.0);
            if (t <= tau_final) break;
        }
        double left = 0.9 * static_cast<double>(budget - res.calls);
        per_stage = std::max(min_stage, static_cast<int>(left / need));
    };
    if (adaptive) plan_stages();
    // directions are also drawn from the covariance of recent iterates, which follows the shrinking body
    int window = std::max(8 * k, 20);
    std::deque<Vec> recent;
    std::vector<Vec> chol;
    auto rounding = [&]() -> std::vector<Vec> {
        if (static_cast<int>(recent.size()) < 2 * k) return {};
        Vec mean(k, 0.0);
        for (const Vec& p : recent)
            for (int i = 0; i < k; ++i) mean[i] += p[i] / recent.size();
        std::vector<Vec> S(k, Vec(k, 0.0));
        for (const Vec& p : recent)
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) S[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / recent.size();
        double tr = 0.0;
        for (int i = 0; i < k; ++i) tr += S[i][i];
        if (!(tr > 1e-300)) return {};
        for (int i = 0; i < k; ++i) S[i][i] += 1e-3 * tr / k;
        std::vector<Vec> C(k, Vec(k, 0.0));
        for (int i = 0; i < k; ++i)
            for (int j = 0; j <= i; ++j) {
                double v = S[i][j];
                for (int q = 0; q < j; ++q) v -= C[i][q] * C[j][q];
                if (i == j) {
                    if (v <= 0.0) return {};
                    C[i][i] = std::sqrt(v);
                } else {
                    C[i][j] = v / C[j][j];
                }
            }
        return C;
    };
    auto at = [&](double t, const Vec& d) {
        Vec p(z);
        for (int i = 0; i < k; ++i) p[i] += t * d[i];
        return p;
    };
    auto consider = [&](const Vec& p) {
        double v = dot(g, p);
        if (v > res.value) {
            res.value = v;
            res.z = p;
        }
    };
    // largest t in [0, tmax] certified by the oracle, to tolerance tol: doubling from scale, then bisection
    auto chord_end = [&](const Vec& d, double tmax, double tol, double scale) {
        if (tmax <= 0.0) return 0.0;
        double lo = 0.0, hi = tmax;
        double s = std::min(std::max(scale, tol), tmax);
        while (res.calls < budget) {
            if (!member(at(s, d))) {
                hi = s;
                break;
            }
            lo = s;
            if (s >= tmax) return tmax;
            s = std::min(2.0 * s, tmax);
        }
        while (hi - lo > tol && res.calls < budget) {
            double mid = 0.5 * (lo + hi);
            if (member(at(mid, d))) lo = mid;
            else hi = mid;
        }
        return lo;
    };
    while (res.calls < budget) {
        Vec d = random_sphere(k, rng);
        double pick = rng.uniform();
        if (!chol.empty() && pick < 0.5) {
            Vec w(k, 0.0);
            for (int i = 0; i < k; ++i)
                for (int j = 0; j <= i; ++j) w[i] += chol[i][j] * d[j];
            double wn = norm2(w);
            if (wn > 0.0)
                for (int i = 0; i < k; ++i) d[i] = w[i] / wn;
        } else if (pick > 0.75) {
            double gn = norm2(g);
            if (gn > 0.0)
                for (int i = 0; i < k; ++i) d[i] = g[i] / gn;
        }
        double zd = dot(z, d), zz = dot(z, z);
        double disc = std::sqrt(std::max(0.0, zd * zd - zz + R * R));
        double tmin = -zd - disc, tmax = -zd + disc;
        for (std::size_t j = 0; j < H.size(); ++j) {
            double hd = dot(H[j], d), slack = h[j] - dot(H[j], z);
            if (hd > 1e-15) tmax = std::min(tmax, slack / hd);
            else if (hd < -1e-15) tmin = std::max(tmin, slack / hd);
        }
        tmin = std::min(tmin, 0.0);
        tmax = std::max(tmax, 0.0);
        double tol = std::max(delta / 4.0, tau / 4.0);
        double a = dot(g, d) / tau;
        Vec nd(d);
        for (double& c : nd) c = -c;
        double hi, lo;
        // locate the uphill end first; the downhill end carries negligible mass when the uphill chord is long
        // the density beyond 30/|a| downhill of the current point is below e^-30 and is truncated
        double scale = a != 0.0 ? 1.0 / std::abs(a) : kInf;
        double cut = a != 0.0 ? 30.0 / std::abs(a) : kInf;
        if (a >= 0.0) {
            hi = chord_end(d, tmax, tol, scale);
            lo = a * hi > 30.0 ? 0.0 : -chord_end(nd, std::min(-tmin, cut), tol, scale);
            consider(at(hi, d));
        } else {
            lo = -chord_end(nd, -tmin, tol, scale);
            hi = -a * (-lo) > 30.0 ? 0.0 : chord_end(d, std::min(tmax, cut), tol, scale);
            consider(at(lo, d));
        }
        double len = hi - lo;
        double U = rng.uniform();
        double t;
        if (std::abs(a) * len < 1e-9) {
            t = lo + U * len;
        } else if (a > 0.0) {
            t = hi + std::log(U + (1.0 - U) * std::exp(-a * len)) / a;
        } else {
            double b = -a;
            t = lo - std::log(U + (1.0 - U) * std::exp(-b * len)) / b;
        }
        z = at(std::clamp(t, lo, hi), d);
        recent.push_back(z);
        if (static_cast<int>(recent.size()) > window) recent.pop_front();
        ++res.steps;
        if (tau <= tau_final && res.steps % window == 0) chol = rounding();
        if (++stage_steps < per_stage) continue;
        if (tau <= tau_final) {
            if (adaptive) continue;
            break;
        }
        tau = std::max(tau_final, tau / 2.0);
        stage_steps = 0;
        chol = rounding();
        if (adaptive) plan_stages();
    }
    res.final_temperature = tau;
    return res;
}

double noisy_stack_eps(const NoisyStackParams& p, int m) { return std::pow(p.r / (p.T * m * p.L), p.c); }

double ball_volume(int m, double r) {
    return std::pow(M_PI, m / 2.0) / std::tgamma(m / 2.0 + 1.0) * std::pow(r, m);
}

long long noisy_stack_samples(const NoisyStackParams& p, int m) {
    return static_cast<long long>(std::ceil(std::log(static_cast<double>(p.T)) / ball_volume(m, p.r)));
}

NoisyStackRun run_noisy_stack(const FiniteGame& g, Agent& agent, const NoisyStackParams& p, std::uint64_t seed) {
    g.validate();
    if (p.T < 2) throw ParameterError("noisy-stack: T must be at least 2");
    if (!(p.r > 0.0 && p.L > 0.0)) throw ConfigError("noisy-stack: regularity constants r and L must be positive");
    GameSpec spec = to_game_spec(g);
    int m = g.m();
    SimplexEmbedding E(g.rows);
    StubPolicy stub;
    Rng root(seed);
    Rng agent_rng = root.substream("agent");
    Rng rng = root.substream("policy");
    NoisyStackRun run;
    run.label = "noisy-stack";
    Transcript& tr = run.transcript;
    tr.seed = seed;
    tr.algorithm = "noisy-stack";
    tr.agent = agent.name();
    tr.rounds.reserve(p.T);
    ResponseOracle oracle = [&](const Vec& x) {
        if (static_cast<int>(tr.rounds.size()) >= p.T) throw OutOfRounds{};
        Round rd;
        rd.t = static_cast<int>(tr.rounds.size()) + 1;
        rd.x = x;
        rd.info = stub.info_;
        AgentContext ctx{rd.t, rd.x, spec, stub, agent_rng};
        AgentResponse resp = agent.respond(ctx);
        if (resp.y < 0 || resp.y >= g.cols) throw EpisodeError("agent returned an invalid action");
        rd.y = resp.y;
        rd.principal_payoff = spec.u(rd.x, rd.y);
        rd.agent_payoff = resp.agent_payoff;
        tr.rounds.push_back(std::move(rd));
        return tr.rounds.back().y;
    };
    double eps = noisy_stack_eps(p, m);
    double delta = 1.0 / (p.L * std::sqrt(static_cast<double>(m)) * p.T);
    std::vector<Vec> start(g.cols);
    std::vector<Vec> xhat(g.cols);
    std::vector<int> Y0;
    try {
        stub.info_.phase = "sample";
        stub.info_.candidate = -1;
        long long N = noisy_stack_samples(p, m);
        for (long long i = 0; i < N; ++i) {
            Vec x = sample_simplex(g.rows, rng);
            int y = oracle(x);
            if (std::find(Y0.begin(), Y0.end(), y) != Y0.end()) continue;
            if (conservative_membership(y, x, oracle, p.T, m, p.L, eps, rng)) {
                Y0.push_back(y);
                start[y] = x;
            }
        }
        run.candidates = Y0;
        if (Y0.empty()) {
            run.fallback = true;
            stub.info_.phase = "search";
            Vec resp(g.rows);
            for (int i = 0; i < g.rows; ++i) {
                Vec e(g.rows, 0.0);
                e[i] = 1.0;
                resp[i] = oracle(e);
            }
            int bi = 0;
            for (int i = 1; i < g.rows; ++i)
                if (g.u0_at(i, static_cast<int>(resp[i])) > g.u0_at(bi, static_cast<int>(resp[bi]))) bi = i;
            run.search_end = static_cast<int>(tr.rounds.size());
            Vec e(g.rows, 0.0);
            e[bi] = 1.0;
            stub.info_.phase = "exploit";
            stub.info_.candidate = static_cast<int>(resp[bi]);
            while (true) oracle(e);
        }
        stub.info_.phase = "search";
        std::vector<Vec> H;
        Vec h;
        for (int i = 0; i < g.rows; ++i) {
            Vec row(m);
            for (int k = 0; k < m; ++k) row[k] = -E.basis_row(i)[k];
            H.push_back(row);
            h.push_back(1.0 / g.rows);
        }
        std::vector<int> kept;
        run.optimizer_output.assign(g.cols, Vec{});
        for (int y : Y0) {
            stub.info_.candidate = y;
            Vec grad(m, 0.0);
            for (int i = 0; i < g.rows; ++i)
                for (int k = 0; k < m; ++k) grad[k] += g.u0_at(i, y) * E.basis_row(i)[k];
            auto mem = [&](const Vec& z) {
                Vec x = E.lift(z);
                if (*std::min_element(x.begin(), x.end()) < 0.0) x = project_to_simplex(x);
                return conservative_membership(y, x, oracle, p.T, m, p.L, eps, rng);
            };
            LinOptOptions opt = p.search;
            if (opt.budget <= 0) {
                long long spec_budget = static_cast<long long>(std::ceil(50.0 * m * m * std::log(1.0 / delta)));
                long long left = static_cast<long long>(p.T) - static_cast<long long>(tr.rounds.size()) - p.T / 10;
                long long todo = static_cast<long long>(Y0.size() - kept.size() - run.dropped.size());
                long long share = left / (static_cast<long long>(probe_count(m, p.T)) * std::max(1LL, todo));
                opt.budget = std::max(1LL, std::min(spec_budget, share));
            }
            try {
                LinOptResult res = membership_lin_opt(grad, mem, E.embed(start[y]), p.r, std::sqrt(2.0), delta, rng,
                                                      opt, H, h);
                Vec x = E.lift(res.z);
                if (*std::min_element(x.begin(), x.end()) < 0.0) x = project_to_simplex(x);
                xhat[y] = x;
                run.optimizer_output[y] = x;
                kept.push_back(y);
            } catch (const ParameterError&) {
                run.dropped.push_back(y);
            }
        }
        Y0 = kept;
        run.search_end = static_cast<int>(tr.rounds.size());
        stub.info_.phase = "exploit";
        if (Y0.empty()) throw OutOfRounds{};
        while (true) {
            int yh = Y0[0];
            for (int y : Y0)
                if (mixed_payoffs(g, xhat[y], y).first > mixed_payoffs(g, xhat[yh], yh).first) yh = y;
            stub.info_.candidate = yh;
            int y = oracle(xhat[yh]);
            if (y != yh && Y0.size() > 1) {
                Y0.erase(std::find(Y0.begin(), Y0.end(), yh));
                ++run.eliminations;
            }
        }
    } catch (const OutOfRounds&) {
    }
    if (run.search_end == 0) run.search_end = static_cast<int>(tr.rounds.size());
    return run;
}

void fit_regularity(FiniteGame& g, std::uint64_t seed) {
    LpSolution lp = multiple_lps(g);
    double rho = inscribed_radius(g, lp.y, 4000, seed);
    g.r = rho / 2.0;
    double slope = 0.0;
    for (double e : {0.02, -0.02}) {
        HausdorffEstimate h = hausdorff_estimate(g, lp.y, e, 2000, mix_seed(seed, "L"));
        if (h.defined) slope = std::max(slope, h.value / std::abs(e));
    }
    g.L_cond = std::max(1.0, 2.0 * slope);
}

FiniteGame random_game(int rows, int cols, std::uint64_t seed) {
    Rng rng = Rng(seed).substream("game");
    std::vector<double> u(rows * cols), v(rows * cols);
    for (double& c : u) c = rng.uniform();
    for (double& c : v) c = rng.uniform();
    FiniteGame g = make_game(rows, cols, u, v, "random" + std::to_string(rows) + "x" + std::to_string(cols) + "-" +
                                                   std::to_string(seed));
    fit_regularity(g, seed);
    return g;
}

std::vector<FiniteGame> corpus(int rows, int cols, int count, double min_radius, std::uint64_t seed) {
    std::vector<FiniteGame> out;
    for (std::uint64_t s = 0; static_cast<int>(out.size()) < count; ++s) {
        if (s > 100000) throw ParameterError("corpus: could not find enough regular games");
        FiniteGame g = random_game(rows, cols, mix_seed(seed, std::to_string(s)));
        if (2.0 * g.r >= min_radius) out.push_back(std::move(g));
    }
    return out;
}

void write_finite_csv(std::ostream& os, const Transcript& tr, const RegretLedger& ledger) {
    write_transcript_csv(os, tr, ledger, false, true);
}

}  // namespace stacklab::finite
