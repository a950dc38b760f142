#include "stacklab/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace stacklab::oracles {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string OracleReport::to_json_line() const {
    nlohmann::json j;
    j["value"] = value;
    j["method"] = method;
    j["resolution"] = resolution;
    j["samples"] = samples;
    j["certified_error"] = certified_error;
    j["argmax"] = argmax;
    return j.dump();
}

double threshold(const Curve1D& v, double w, double tol) {
    if (v(0.0) <= w) return 0.0;
    if (v(1.0) > w) return kInf;
    double lo = 0.0, hi = 1.0;
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        if (v(mid) > w) lo = mid;
        else hi = mid;
    }
    return hi;
}

WaterFilling water_filling(const std::vector<Curve1D>& v, const Vec& caps, double tol) {
    std::size_t n = v.size();
    if (n == 0) throw ParameterError("water_filling: no targets");
    if (!caps.empty() && caps.size() != n) throw ParameterError("water_filling: caps length mismatch");
    auto cap = [&](std::size_t y) { return caps.empty() ? 1.0 : caps[y]; };
    for (std::size_t y = 0; y < n; ++y) {
        double prev = v[y](0.0);
        for (int i = 1; i <= 64; ++i) {
            double f = v[y](i / 64.0);
            if (!(f < prev)) throw ParameterError("water_filling: curve not strictly decreasing, use the grid oracle");
            prev = f;
        }
    }
    auto mass = [&](double w) {
        double s = 0.0;
        for (std::size_t y = 0; y < n; ++y) {
            double t = threshold(v[y], w);
            if (t > cap(y)) return kInf;
            s += t;
        }
        return s;
    };
    double w_lo = -kInf, w_hi = -kInf;
    for (std::size_t y = 0; y < n; ++y) {
        w_lo = std::max(w_lo, v[y](cap(y)));
        w_hi = std::max(w_hi, v[y](0.0));
    }
    double w = w_lo;
    if (!(mass(w_lo) <= 1.0)) {
        double lo = w_lo, hi = w_hi;
        while (hi - lo > tol) {
            double mid = 0.5 * (lo + hi);
            if (mass(mid) <= 1.0) hi = mid;
            else lo = mid;
        }
        w = hi;
    }
    WaterFilling r;
    r.w = w;
    r.x.resize(n);
    for (std::size_t y = 0; y < n; ++y) r.x[y] = threshold(v[y], w);
    return r;
}

RationalWaterFilling water_filling_exact(const std::vector<Fraction>& a, const std::vector<Fraction>& b) {
    std::size_t n = a.size();
    if (n == 0 || b.size() != n) throw ParameterError("water_filling_exact: coefficient length mismatch");
    for (const auto& s : b)
        if (s <= 0) throw ParameterError("water_filling_exact: slopes must be positive");
    auto cover = [&](std::size_t y, const Fraction& w) {
        Fraction s = (a[y] - w) / b[y];
        if (s < 0) return Fraction(0);
        if (s > 1) return Fraction(1);
        return s;
    };
    auto mass = [&](const Fraction& w) {
        Fraction s = 0;
        for (std::size_t y = 0; y < n; ++y) s += cover(y, w);
        return s;
    };
    Fraction w_lo = a[0] - b[0];
    for (std::size_t y = 1; y < n; ++y) w_lo = std::max(w_lo, a[y] - b[y]);
    RationalWaterFilling r;
    if (mass(w_lo) <= 1) {
        r.w = w_lo;
    } else {
        std::vector<Fraction> pts{w_lo};
        for (std::size_t y = 0; y < n; ++y) {
            if (a[y] > w_lo) pts.push_back(a[y]);
            if (a[y] - b[y] > w_lo) pts.push_back(a[y] - b[y]);
        }
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        bool found = false;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            Fraction s1 = mass(pts[i]), s2 = mass(pts[i + 1]);
            if (s1 > 1 && s2 <= 1) {
                r.w = pts[i] + (s1 - 1) * (pts[i + 1] - pts[i]) / (s1 - s2);
                found = true;
                break;
            }
        }
        if (!found) throw std::logic_error("water_filling_exact: no bracketing segment");
    }
    for (std::size_t y = 0; y < n; ++y) r.x.push_back(cover(y, r.w));
    return r;
}

OracleReport grid_optimum(const GameSpec& g, double resolution, double slope_bound) {
    int d = g.space.dim;
    if (d > 3) throw ParameterError("grid_optimum: dimension above 3");
    if (!(resolution > 0.0 && resolution <= 1.0)) throw ParameterError("grid_optimum: resolution must lie in (0,1]");
    int K = static_cast<int>(std::llround(1.0 / resolution));
    OracleReport rep;
    rep.method = "grid";
    rep.resolution = 1.0 / K;
    rep.value = -kInf;
    bool full_simplex = g.space.kind == SpaceKind::Simplex;
    int free_dims = full_simplex ? d - 1 : d;
    std::vector<int> idx(free_dims, 0);
    Vec x(d);
    auto eval = [&]() {
        double bv = -kInf, bu = -kInf;
        for (int y = 0; y < g.num_actions; ++y) bv = std::max(bv, g.v(x, y));
        for (int y = 0; y < g.num_actions; ++y)
            if (g.v(x, y) >= bv - 1e-12) bu = std::max(bu, g.u(x, y));
        ++rep.samples;
        if (bu > rep.value) {
            rep.value = bu;
            rep.argmax = x;
        }
    };
    while (true) {
        double sum = 0.0;
        for (int i = 0; i < free_dims; ++i) {
            x[i] = static_cast<double>(idx[i]) / K;
            sum += idx[i];
        }
        bool ok = true;
        if (full_simplex) {
            if (sum > K) ok = false;
            else x[d - 1] = static_cast<double>(K - sum) / K;
        } else {
            ok = g.space.contains(x, 1e-12);
        }
        if (ok) eval();
        int k = 0;
        while (k < free_dims && ++idx[k] > K) idx[k++] = 0;
        if (k == free_dims) break;
    }
    if (free_dims == 0) {
        x.assign(d, 1.0);
        eval();
    }
    rep.certified_error = slope_bound * rep.resolution * d;
    return rep;
}

AgentOptimum exhaustive_agent_optimum(const GameSpec& g, const Policy& policy, double gamma, int horizon) {
    if (horizon < 1 || horizon > 8) throw ParameterError("exhaustive_agent_optimum: horizon must lie in 1..8");
    if (g.num_actions > 4) throw ParameterError("exhaustive_agent_optimum: at most 4 agent actions");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("exhaustive_agent_optimum: gamma must lie in [0,1)");
    AgentOptimum best;
    best.value = -kInf;
    std::vector<int> seq(horizon, 0);
    while (true) {
        PolicyPtr p = policy.clone();
        AgentPtr a = sequence_agent(seq);
        Transcript tr = run_episode(*p, *a, g, horizon, 0);
        double val = 0.0, disc = 1.0;
        for (const Round& r : tr.rounds) {
            val += disc * g.v(r.x, r.y);
            disc *= gamma;
        }
        ++best.sequences;
        if (val > best.value) {
            best.value = val;
            best.actions = seq;
            best.round_loss.clear();
            for (const Round& r : tr.rounds) {
                double top = -kInf;
                for (int y = 0; y < g.num_actions; ++y) top = std::max(top, g.v(r.x, y));
                best.round_loss.push_back(top - g.v(r.x, r.y));
            }
        }
        int k = horizon - 1;
        while (k >= 0 && ++seq[k] >= g.num_actions) seq[k--] = 0;
        if (k < 0) break;
    }
    return best;
}

VolumeEstimate wilson99(long long k, long long N) {
    const double z = 2.5758293035489004;
    double p = static_cast<double>(k) / N;
    double z2 = z * z / N;
    double centre = (p + z2 / 2.0) / (1.0 + z2);
    double half = z * std::sqrt(p * (1.0 - p) / N + z * z / (4.0 * N * N)) / (1.0 + z2);
    return {p, std::max(0.0, centre - half), std::min(1.0, centre + half), N};
}

VolumeEstimate monte_carlo_volume(const std::function<Vec(Rng&)>& sampler, const std::function<bool(const Vec&)>& pred,
                                  long long N, std::uint64_t seed) {
    if (N < 1000) throw ParameterError("monte_carlo_volume: need at least 1000 samples");
    Rng rng(seed);
    long long k = 0;
    for (long long i = 0; i < N; ++i)
        if (pred(sampler(rng))) ++k;
    return wilson99(k, N);
}

}  // namespace stacklab::oracles
