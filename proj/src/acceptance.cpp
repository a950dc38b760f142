#include "stacklab/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "stacklab/classify.hpp"
#include "stacklab/demand.hpp"
#include "stacklab/finite.hpp"
#include "stacklab/harness.hpp"
#include "stacklab/oracles.hpp"
#include "stacklab/ssg.hpp"

namespace stacklab::acceptance {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Tolerances and sizes of every check.
constexpr double kClinchDelta = 1e-3;
constexpr int kClinchGames = 50;
constexpr int kClinchCentroidSamples = 1024;
constexpr double kClinchExactRate = 1.0;
constexpr double kClinchEpsRate = 0.98;
constexpr double kClinchR2 = 0.95;
constexpr double kClinchSeconds = 300.0;
constexpr double kCubicFactor = 20.0;
constexpr int kSsgT = 200000;
constexpr int kSsgSeeds = 20;
constexpr double kSsgFactor = 20.0;
constexpr double kDoublingRatio = 1.3;
constexpr long long kVolumeSamples = 100000;
constexpr double kB2Slack = 0.02;
constexpr double kShrink = 0.9;
constexpr double kShrinkSlack = 1.05;
constexpr double kDelayTol = 1e-12;
constexpr double kBbsFactor = harness::kBatchedSearchBoundFactor;
constexpr double kSeConstant = 10.0;
constexpr double kSeViolationRate = 1e-3;
constexpr double kPullViolationRate = 0.05;
constexpr double kPricingFactor = harness::kPricingBoundFactor;
constexpr long long kBiasSamples = 1000000;
constexpr double kBiasSigmas = 3.0;
constexpr double kNoisyOptimizerRate = 0.95;
constexpr long long kPropertyCases = 1000;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

fs::path artifact_dir(const std::string& id) {
    fs::path p = fs::path(harness::output_root("out")) / "acceptance" / id;
    fs::create_directories(p);
    return p;
}

double mean(const std::vector<double>& xs) {
    return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
}

// Log-spaced checkpoints of each seed's cumulative regret.
void write_curves(const fs::path& path, const std::vector<harness::EpisodeResult>& eps) {
    std::ofstream os(path, std::ios::binary);
    os << "t,seed,cumulative_regret\n";
    for (const auto& e : eps) {
        int T = static_cast<int>(e.curve.size());
        int last = 0;
        for (int k = 0; k <= 300; ++k) {
            int t = static_cast<int>(std::lround(std::exp(std::log(static_cast<double>(T)) * k / 300.0)));
            if (t <= last || t > T) continue;
            last = t;
            os << t << ',' << e.seed << ',' << format_double(e.curve[t - 1]) << '\n';
        }
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path, std::ios::binary);
    os << j.dump(2) << '\n';
}

harness::ExperimentConfig make_config(const json& j) { return harness::parse_config(j.dump(), "<acceptance>"); }

json seed_list(int count, int first = 1) {
    json s = json::array();
    for (int i = 0; i < count; ++i) s.push_back(first + i);
    return s;
}

// Clinch sweep shared by the query and cubic criteria.
struct ClinchRun {
    int n;
    int queries;
    double err_exact;
    bool exact_ok;
    bool eps_ok;
    int eps_queries;
};

struct ClinchSweep {
    std::vector<ClinchRun> runs;
    double seconds = 0.0;
};

const ClinchSweep& clinch_sweep() {
    static std::optional<ClinchSweep> cache;
    if (cache) return *cache;
    ClinchSweep sw;
    auto t0 = std::chrono::steady_clock::now();
    ssg::ClinchOptions opt;
    opt.centroid_samples = kClinchCentroidSamples;
    for (int n : {2, 5, 10, 25, 50}) {
        Rng rng(mix_seed(2024, "clinch-n" + std::to_string(n)));
        for (int k = 0; k < kClinchGames; ++k) {
            ssg::SecurityGame G = ssg::random_linear_game(n, rng);
            GameSpec S = G.spec();
            std::vector<oracles::Curve1D> vs;
            for (const auto& cv : G.v_curves()) vs.push_back([cv](double s) { return cv(s); });
            Vec xs = oracles::water_filling(vs).x;
            Vec lo(n, 0.0), hi(n, 1.0);
            ClinchRun r{n, 0, 1.0, false, false, 0};
            std::uint64_t seed = mix_seed(k, "clinch");
            try {
                ssg::ClinchResult res =
                    ssg::clinch([&](const Vec& x) { return best_response(S, x); }, G, kClinchDelta, lo, hi, 0.0, seed, opt);
                r.queries = res.queries;
                r.err_exact = dist_inf(res.x, xs);
                r.exact_ok = r.err_exact <= kClinchDelta;
            } catch (const ssg::BudgetExceeded&) {
            }
            double eps = kClinchDelta / (33.0 * std::pow(G.C(), 3) * n);
            try {
                ssg::ClinchResult res = ssg::clinch(
                    [&](const Vec& x) { return eps_adversarial_response(S, x, eps, TieMode::WorstForPrincipal); }, G,
                    kClinchDelta, lo, hi, eps, seed, opt);
                r.eps_queries = res.queries;
                r.eps_ok = dist_inf(res.x, xs) <= kClinchDelta;
            } catch (const ssg::BudgetExceeded&) {
            }
            sw.runs.push_back(r);
        }
    }
    sw.seconds = seconds_since(t0);
    cache = std::move(sw);
    return *cache;
}

double clinch_form(double n) { return n * std::log(2.0 * n / kClinchDelta); }

CriterionResult clinch_queries() {
    const ClinchSweep& sw = clinch_sweep();
    CriterionResult r;
    int exact = 0, epsok = 0;
    std::vector<double> ns, qs;
    json per_n = json::object();
    for (const auto& c : sw.runs) {
        exact += c.exact_ok;
        epsok += c.eps_ok;
        ns.push_back(c.n);
        qs.push_back(c.queries);
    }
    double N = static_cast<double>(sw.runs.size());
    harness::Fit fit = harness::fit_scaling(ns, qs, clinch_form, true);
    for (int n : {2, 5, 10, 25, 50}) {
        std::vector<double> q;
        for (const auto& c : sw.runs)
            if (c.n == n) q.push_back(c.queries);
        per_n[std::to_string(n)] = mean(q);
    }
    double exact_rate = exact / N, eps_rate = epsok / N;
    r.pass = exact_rate >= kClinchExactRate && eps_rate >= kClinchEpsRate && fit.r2 >= kClinchR2 &&
             sw.seconds <= kClinchSeconds;
    r.summary = "exact within delta " + std::to_string(exact) + "/" + std::to_string(sw.runs.size()) +
                ", eps-adversarial " + std::to_string(epsok) + "/" + std::to_string(sw.runs.size()) +
                ", R2 " + fmt(fit.r2) + " vs n log(Cn/delta), slope " + fmt(fit.slope) + ", " + fmt(sw.seconds, 3) + "s";
    r.details = {{"exact_rate", exact_rate}, {"eps_rate", eps_rate}, {"fit", harness::to_json(fit)},
                 {"mean_queries", per_n}, {"seconds", sw.seconds}};
    fs::path dir = artifact_dir("clinch-queries");
    std::ofstream csv(dir / "queries.csv", std::ios::binary);
    csv << "n,queries,eps_queries,err_exact,exact_ok,eps_ok\n";
    json points = json::array();
    for (const auto& c : sw.runs) {
        csv << c.n << ',' << c.queries << ',' << c.eps_queries << ',' << format_double(c.err_exact) << ','
            << c.exact_ok << ',' << c.eps_ok << '\n';
        points.push_back({{"n", c.n}, {"queries", c.queries}});
    }
    write_json(dir / "report.json", {{"name", "clinch-queries"},
                                     {"form", "n*log(C*n/delta)"},
                                     {"C", 2.0},
                                     {"delta", kClinchDelta},
                                     {"points", points},
                                     {"fit", harness::to_json(fit)}});
    return r;
}

CriterionResult clinch_vs_cubic() {
    const ClinchSweep& sw = clinch_sweep();
    auto mean_at = [&](int n) {
        std::vector<double> q;
        for (const auto& c : sw.runs)
            if (c.n == n) q.push_back(c.queries);
        return mean(q);
    };
    double q2 = mean_at(2), q5 = mean_at(5), q50 = mean_at(50);
    double b = (q5 - q2) / (125.0 - 8.0), a = q2 - 8.0 * b;
    double extrap = a + b * 125000.0;
    CriterionResult r;
    r.pass = q50 * kCubicFactor <= extrap;
    r.summary = "mean queries at n=50: " + fmt(q50) + ", cubic extrapolation " + fmt(extrap) + " (ratio " +
                fmt(extrap / q50, 3) + ", need >= 20)";
    r.details = {{"q2", q2}, {"q5", q5}, {"q50", q50}, {"cubic_a", a}, {"cubic_b", b}, {"extrapolation", extrap}};
    return r;
}

json ssg_game_json() { return {{"generator", "random-linear"}, {"n", 3}, {"seed", 11}}; }

double log_term(const ssg::SecurityGame& G) { return std::log(G.C() * G.n() / G.W()); }

ssg::SecurityGame acceptance_ssg_game() {
    Rng rng(11);
    return ssg::random_linear_game(3, rng);
}

CriterionResult batched_clinch() {
    ssg::SecurityGame G = acceptance_ssg_game();
    CriterionResult r;
    r.pass = true;
    std::ostringstream sum;
    json det = json::object();
    for (double gamma : {0.5, 0.9}) {
        double n = G.n(), Tg = discounted_horizon(gamma), C = G.C(), W = G.W();
        std::vector<double> means;
        for (int T : {kSsgT, 2 * kSsgT}) {
            json cfg = {{"name", "batched-clinch-g" + fmt(gamma) + "-T" + std::to_string(T)},
                        {"scenario", "ssg"},
                        {"T", T},
                        {"seeds", seed_list(kSsgSeeds)},
                        {"write_csv", false},
                        {"algorithm", {{"name", "batched-clinch"}, {"gamma", gamma}}},
                        {"agent", {{"kind", "induced"}, {"gamma", gamma}, {"tie", "worst_for_principal"}}},
                        {"game", ssg_game_json()}};
            fs::path dir = artifact_dir("batched-clinch") / ("gamma-" + fmt(gamma) + "-T-" + std::to_string(T));
            harness::SweepReport rep = harness::run_sweep(make_config(cfg), dir.string(), 1);
            write_curves(dir / "regret_curve.csv", rep.episodes);
            means.push_back(rep.regret.mean);
        }
        double T = kSsgT;
        double expr = n * log_term(G) * std::log(T) + n * Tg * std::pow(std::log(C * n * Tg / W), 2);
        double ratio = means[1] / means[0];
        bool ok = means[0] <= kSsgFactor * expr && ratio <= kDoublingRatio;
        r.pass = r.pass && ok;
        sum << "gamma " << gamma << ": mean regret " << fmt(means[0]) << " <= " << fmt(kSsgFactor * expr)
            << ", doubling ratio " << fmt(ratio, 3) << "; ";
        det[fmt(gamma)] = {{"mean_regret", means[0]}, {"mean_regret_2T", means[1]}, {"expression", expr},
                           {"ratio", ratio}};
    }
    r.summary = sum.str();
    r.summary.resize(r.summary.size() - 2);
    r.details = det;
    return r;
}

struct MtData {
    json per_gamma = json::object();
    bool regret_ok = true;
    bool contain_ok = true;
    bool final_ok = true;
    std::string regret_summary, contain_summary;
};

const MtData& mt_data() {
    static std::optional<MtData> cache;
    if (cache) return *cache;
    MtData d;
    ssg::SecurityGame G = acceptance_ssg_game();
    std::ostringstream rs, cs;
    for (double gamma : {0.5, 0.9}) {
        json cfg = {{"name", "multithreaded-clinch-g" + fmt(gamma)},
                    {"scenario", "ssg"},
                    {"T", kSsgT},
                    {"seeds", seed_list(kSsgSeeds)},
                    {"write_csv", false},
                    {"algorithm", {{"name", "multithreaded-clinch"}}},
                    {"agent", {{"kind", "induced"}, {"gamma", gamma}, {"tie", "worst_for_principal"}}},
                    {"game", ssg_game_json()}};
        fs::path dir = artifact_dir("multithreaded-clinch") / ("gamma-" + fmt(gamma));
        harness::SweepReport rep = harness::run_sweep(make_config(cfg), dir.string(), 1);
        write_curves(dir / "regret_curve.csv", rep.episodes);
        double n = G.n(), Tg = discounted_horizon(gamma), C = G.C(), W = G.W(), T = kSsgT;
        double lt = log_term(G);
        double expr = n * lt * std::pow(std::log(T), 2) + n * Tg * lt * std::log(C * n * Tg * T / W);
        double fails = 0, exploit = 0;
        int seeds_clean = 0, final_in = 0;
        for (const auto& e : rep.episodes) {
            fails += e.extra.at("containment_failures");
            exploit += e.extra.at("exploit_rounds");
            seeds_clean += e.extra.at("containment_failures") == 0.0;
            final_in += e.extra.at("final_contained") == 1.0;
        }
        bool ok = rep.regret.mean <= kSsgFactor * expr;
        d.regret_ok = d.regret_ok && ok;
        d.contain_ok = d.contain_ok && seeds_clean == static_cast<int>(rep.episodes.size());
        d.final_ok = d.final_ok && final_in == static_cast<int>(rep.episodes.size());
        double rate = exploit > 0 ? 1.0 - fails / exploit : 1.0;
        rs << "gamma " << gamma << ": mean regret " << fmt(rep.regret.mean) << " <= " << fmt(kSsgFactor * expr) << "; ";
        cs << "gamma " << gamma << ": B contains x* on " << fmt(100.0 * rate, 4) << "% of exploit rounds, "
           << seeds_clean << "/" << rep.episodes.size() << " seeds clean, final B contains x* on " << final_in << "/"
           << rep.episodes.size() << "; ";
        d.per_gamma[fmt(gamma)] = {{"mean_regret", rep.regret.mean}, {"expression", expr},
                                   {"containment_rate", rate},   {"seeds_clean", seeds_clean},
                                   {"final_contained", final_in}};
    }
    d.regret_summary = rs.str();
    d.regret_summary.resize(d.regret_summary.size() - 2);
    d.contain_summary = cs.str();
    d.contain_summary.resize(d.contain_summary.size() - 2);
    cache = std::move(d);
    return *cache;
}

CriterionResult mt_regret() {
    const MtData& d = mt_data();
    CriterionResult r;
    r.pass = d.regret_ok;
    r.summary = d.regret_summary;
    r.details = d.per_gamma;
    return r;
}

CriterionResult mt_containment() {
    const MtData& d = mt_data();
    CriterionResult r;
    r.pass = d.contain_ok;
    r.summary = d.contain_summary;
    r.details = d.per_gamma;
    return r;
}

// Downward-closed body {z in [0,c]^3 : w.z <= 1}.
struct Body {
    double cap;
    Vec w;
    bool contains(const Vec& z) const {
        for (double v : z)
            if (v < 0.0 || v > cap) return false;
        return dot(w, z) <= 1.0;
    }
    double alpha() const { return std::min(cap, 1.0 / w[0]); }
};

Vec sample_body(const Body& b, Rng& rng) {
    Vec z(3);
    while (true) {
        for (double& c : z) c = rng.uniform() * b.cap;
        if (b.contains(z)) return z;
    }
}

// Uniform sampler of {z : lo <= z <= hi on active coordinates, z = lo elsewhere, sum z <= 1}.
// Rejection from the box or from the corner simplex, whichever is tighter.
std::function<Vec(Rng&)> region_sampler(const Vec& lo, const Vec& hi, const std::vector<bool>& active) {
    int n = static_cast<int>(lo.size());
    std::vector<int> idx;
    double slack = 1.0, box = 1.0;
    for (int j = 0; j < n; ++j) {
        slack -= lo[j];
        if (active[j]) {
            idx.push_back(j);
            box *= hi[j] - lo[j];
        }
    }
    int k = static_cast<int>(idx.size());
    double simplex = std::pow(std::max(slack, 0.0), k);
    for (int i = 2; i <= k; ++i) simplex /= i;
    bool from_box = box <= simplex;
    return [=](Rng& g) {
        Vec z(lo);
        while (true) {
            if (from_box) {
                for (int j : idx) z[j] = g.uniform(lo[j], hi[j]);
            } else {
                double tot = 0.0;
                Vec e(k + 1);
                for (double& c : e) {
                    c = -std::log(1.0 - g.uniform());
                    tot += c;
                }
                for (int i = 0; i < k; ++i) z[idx[i]] = lo[idx[i]] + slack * e[i] / tot;
            }
            bool ok = std::accumulate(z.begin(), z.end(), 0.0) <= 1.0;
            for (int j : idx) ok = ok && z[j] <= hi[j];
            if (ok) return z;
        }
    };
}

CriterionResult volume() {
    CriterionResult r;
    Rng rng(77);
    const int bodies = 10;
    int b1_ok = 0, b2_ok = 0;
    double b1_worst = 1.0, b2_worst = -1.0;
    for (int k = 0; k < bodies; ++k) {
        Body B{rng.uniform(0.3, 1.0), {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)}};
        Rng crng(mix_seed(k, "centroid"));
        Vec xc(3, 0.0);
        for (long long i = 0; i < kVolumeSamples; ++i) {
            Vec z = sample_body(B, crng);
            for (int j = 0; j < 3; ++j) xc[j] += z[j] / kVolumeSamples;
        }
        auto sampler = [&B](Rng& g) { return sample_body(B, g); };
        Vec dir = classify::random_unit_vector(3, rng);
        oracles::VolumeEstimate v1 = oracles::monte_carlo_volume(
            sampler, [&](const Vec& z) { return dot(dir, z) >= dot(dir, xc); }, kVolumeSamples, mix_seed(k, "b1"));
        b1_ok += v1.hi >= 1.0 / std::exp(1.0);
        b1_worst = std::min(b1_worst, v1.fraction);
        double alpha = B.alpha(), beta = rng.uniform(0.0, 0.1) * alpha;
        double bound = std::pow(1.0 + std::exp(1.0) * beta / alpha, 3) * (1.0 - 1.0 / std::exp(1.0)) + kB2Slack;
        oracles::VolumeEstimate v2 = oracles::monte_carlo_volume(
            sampler, [&](const Vec& z) { return z[0] >= xc[0] - beta; }, kVolumeSamples, mix_seed(k, "b2"));
        b2_ok += v2.lo < bound;
        b2_worst = std::max(b2_worst, v2.fraction - bound);
    }
    // Clinch search regions shrink on every non-locking iteration.
    int iters = 0, shrink_ok = 0;
    double worst_ratio = 0.0;
    for (int k = 0; k < 3; ++k) {
        Rng grng(mix_seed(k, "volume-game"));
        auto G = std::make_shared<const ssg::SecurityGame>(ssg::random_linear_game(3, grng));
        GameSpec S = G->spec();
        ssg::ClinchOptions opt;
        opt.centroid_samples = kClinchCentroidSamples;
        ssg::ClinchSearch cs(G, 0.05, Vec(3, 0.0), Vec(3, 1.0), 0.0, k + 1, opt);
        Vec lo, hi;
        std::vector<bool> act;
        bool have = false;
        while (!cs.done() && iters < 60) {
            if (!cs.in_main_loop()) break;
            Vec q = cs.query();
            if (!cs.in_main_loop()) break;
            if (have && act == cs.active()) {
                Vec nlo = cs.lower();
                Vec plo = lo, phi = hi;
                std::vector<bool> pact = act;
                auto sampler = region_sampler(plo, phi, pact);
                auto pred = [&](const Vec& z) {
                    for (int j = 0; j < 3; ++j)
                        if (z[j] < nlo[j]) return false;
                    return true;
                };
                oracles::VolumeEstimate v = oracles::monte_carlo_volume(sampler, pred, kVolumeSamples,
                                                                        mix_seed(iters, "shrink"));
                ++iters;
                shrink_ok += v.lo < kShrink * kShrinkSlack;
                worst_ratio = std::max(worst_ratio, v.fraction);
            }
            lo = cs.lower();
            hi = cs.upper();
            act = cs.active();
            have = true;
            cs.respond(best_response(S, q));
        }
    }
    r.pass = b1_ok == bodies && b2_ok == bodies && iters > 0 && shrink_ok == iters;
    r.summary = "centroid halfspaces keep >= 1/e on " + std::to_string(b1_ok) + "/" + std::to_string(bodies) +
                " bodies (min " + fmt(b1_worst) + "), shifted bound holds on " + std::to_string(b2_ok) + "/" +
                std::to_string(bodies) + ", clinch shrink < 0.9 on " + std::to_string(shrink_ok) + "/" +
                std::to_string(iters) + " iterations (max ratio " + fmt(worst_ratio) + ")";
    r.details = {{"b1_min_fraction", b1_worst}, {"b2_max_excess", b2_worst}, {"max_shrink_ratio", worst_ratio},
                 {"iterations", iters}};
    return r;
}

CriterionResult delay_deviation() {
    CriterionResult r;
    Rng rng(91);
    int cases = 0, bad = 0, live = 0;
    double worst = -1e300;
    for (int k = 0; k < 12; ++k) {
        int cols = 2 + k % 2;
        finite::FiniteGame g = finite::random_game(2, cols, mix_seed(k, "delay-game"));
        GameSpec S = finite::to_game_spec(g);
        std::vector<Vec> table;
        for (int y = 0; y < cols; ++y) table.push_back(finite::sample_simplex(2, rng));
        Vec init = finite::sample_simplex(2, rng);
        for (int D : {1, 2, 3})
            for (double gamma : {0.5, 0.9})
                for (int h : {4, 6}) {
                    DelayedResponsePolicy pol(D, init, table);
                    oracles::AgentOptimum opt = oracles::exhaustive_agent_optimum(S, pol, gamma, h);
                    double bound = induced_epsilon(gamma, D) + kDelayTol;
                    double ml = *std::max_element(opt.round_loss.begin(), opt.round_loss.end());
                    ++cases;
                    bad += ml > bound;
                    live += ml > 1e-12;
                    worst = std::max(worst, ml - induced_epsilon(gamma, D));
                }
    }
    r.pass = bad == 0;
    r.summary = std::to_string(cases - bad) + "/" + std::to_string(cases) +
                " exhaustive optima keep every round within gamma^D/(1-gamma) (max excess " + fmt(worst) + ", " +
                std::to_string(live) + " optima deviate from myopic play)";
    r.details = {{"cases", cases}, {"violations", bad}, {"max_excess", worst}, {"non_myopic", live}};
    return r;
}

CriterionResult bbs() {
    CriterionResult r;
    r.pass = true;
    const int T = 100000;
    const double gamma = 0.9, Tg = discounted_horizon(gamma);
    double bound = kBbsFactor * (std::log(T) + Tg * std::log(Tg));
    std::ostringstream sum;
    json det = json::object();
    for (double v : {0.17, 0.63, 0.99}) {
        json cfg = {{"name", "bbs-v" + fmt(v)},
                    {"scenario", "demand"},
                    {"T", T},
                    {"seeds", seed_list(5)},
                    {"write_csv", false},
                    {"algorithm", {{"name", "batched-binary-search"}, {"gamma", gamma}}},
                    {"agent", {{"kind", "induced"}, {"gamma", gamma}, {"tie", "worst_for_principal"}}},
                    {"game", {{"kind", "fixed"}, {"v", v}}}};
        fs::path dir = artifact_dir("batched-binary-search") / ("v-" + fmt(v));
        harness::SweepReport rep = harness::run_sweep(make_config(cfg), dir.string(), 1);
        write_curves(dir / "regret_curve.csv", rep.episodes);
        bool inv = true;
        for (const auto& e : rep.episodes) inv = inv && e.extra.at("interval_invariant") == 1.0;
        bool ok = rep.regret.max <= bound && inv;
        r.pass = r.pass && ok;
        sum << "v " << v << ": max regret " << fmt(rep.regret.max) << (inv ? ", invariant ok" : ", invariant broken")
            << "; ";
        det[fmt(v)] = {{"max_regret", rep.regret.max}, {"invariant", inv}};
    }
    r.summary = sum.str() + "bound " + fmt(bound);
    det["bound"] = bound;
    r.details = det;
    return r;
}

CriterionResult se_delayed() {
    CriterionResult r;
    const int T = 100000, K = 10, seeds = 50;
    std::vector<double> forms, regrets;
    long long checks = 0, viol = 0, pairs = 0, pull_bad = 0;
    for (double delta : {0.0, 0.05})
        for (int D : {0, 100})
            for (int s = 0; s < seeds; ++s) {
                Rng rng(mix_seed(s, "se-instance"));
                Vec means(K);
                for (double& m : means) m = rng.uniform();
                double best = *std::max_element(means.begin(), means.end());
                demand::ShiftAdversary adv = delta > 0 ? demand::confusing_shift(means, delta) : demand::no_shift();
                demand::BanditRun run = demand::run_bernoulli_bandit(means, D, delta, T, adv, mix_seed(s, "se-run"));
                double form = delta * T + D * std::log(K);
                for (int i = 0; i < K; ++i) {
                    double gap = best - means[i];
                    if (gap <= 0.0) continue;
                    form += std::log(T) / gap;
                    if (gap >= 8.0 * delta) {
                        ++pairs;
                        int m = std::max(1, run.remaining_at_last_pull[i]);
                        double lim = 128.0 * std::log(T) / (gap * gap) + static_cast<double>(D) / m + 2.0;
                        pull_bad += run.pulls[i] > lim;
                    }
                }
                forms.push_back(form);
                regrets.push_back(run.regret);
                checks += run.bound_checks;
                viol += run.bound_violations;
            }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < forms.size(); ++i) {
        num += forms[i] * regrets[i];
        den += forms[i] * forms[i];
    }
    double c = num / den;
    double vrate = checks ? static_cast<double>(viol) / checks : 0.0;
    double prate = pairs ? static_cast<double>(pull_bad) / pairs : 0.0;
    r.pass = c <= kSeConstant && vrate <= kSeViolationRate && prate <= kPullViolationRate;
    r.summary = "fitted constant " + fmt(c) + ", confidence violations " + fmt(vrate) + ", pull-bound violations " +
                std::to_string(pull_bad) + "/" + std::to_string(pairs);
    r.details = {{"constant", c}, {"violation_rate", vrate}, {"pull_violation_rate", prate}, {"pairs", pairs}};
    return r;
}

CriterionResult pricing() {
    CriterionResult r;
    const int T = 100000;
    const double gamma = 0.9, Tg = discounted_horizon(gamma);
    demand::DemandCurve curve = demand::linear_demand();
    auto cfg_for = [&](int t, int seeds) {
        return json{{"name", "pricing-T" + std::to_string(t)},
                    {"scenario", "demand"},
                    {"T", t},
                    {"seeds", seed_list(seeds)},
                    {"write_csv", false},
                    {"algorithm", {{"name", "se-pricing"}, {"gamma", gamma}}},
                    {"agent", {{"kind", "induced"}, {"gamma", gamma}, {"tie", "worst_for_principal"}}},
                    {"game", {{"kind", "linear"}}}};
    };
    fs::path dir = artifact_dir("demand-pricing");
    harness::SweepReport rep = harness::run_sweep(make_config(cfg_for(T, 30)), (dir / "T-100000").string(), 1);
    write_curves(dir / "T-100000" / "regret_curve.csv", rep.episodes);
    double bound = kPricingFactor * ((curve.C2 + 1.0 / curve.C1) * std::sqrt(T * std::log(T)) +
                                     Tg * std::pow(std::log(curve.L * Tg * T), 2));
    demand::PricingParams pp = demand::pricing_params(curve, gamma, T);
    double gap = demand::discretization_gap(curve, pp.K), gap_bound = curve.C2 / (pp.K * pp.K);
    // T sweep for the scaling artifact
    std::vector<double> ts, ms;
    json points = json::array();
    for (int t : {10000, 20000, 50000, 100000}) {
        double m = rep.regret.mean;
        if (t != T) m = harness::run_sweep(make_config(cfg_for(t, 5)), (dir / ("T-" + std::to_string(t))).string(), 1)
                            .regret.mean;
        ts.push_back(t);
        ms.push_back(m);
        points.push_back({{"T", t}, {"mean_regret", m}});
    }
    harness::Fit fit =
        harness::fit_scaling(ts, ms, [](double t) { return std::sqrt(t * std::log(t)); }, true);
    write_json(dir / "report.json",
               {{"name", "demand-pricing"}, {"form", "sqrt(T*log(T))"}, {"points", points}, {"fit", harness::to_json(fit)}});
    r.pass = rep.regret.mean <= bound && gap <= gap_bound + 1e-15;
    r.summary = "mean regret " + fmt(rep.regret.mean) + " <= " + fmt(bound) + ", discretization gap " + fmt(gap) +
                " <= C2/K^2 = " + fmt(gap_bound) + " at K = " + std::to_string(pp.K);
    r.details = {{"mean_regret", rep.regret.mean}, {"bound", bound}, {"gap", gap}, {"gap_bound", gap_bound},
                 {"K", pp.K}, {"fit", harness::to_json(fit)}};
    return r;
}

CriterionResult gdwog() {
    CriterionResult r;
    r.pass = true;
    std::ostringstream sum;
    json det = json::object();
    for (int d : {2, 5}) {
        Vec a(d, 0.0);
        a[0] = 0.5;
        classify::CostFn cost = [a](const Vec& u) {
            double s = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - a[i]) * (u[i] - a[i]);
            return s;
        };
        classify::GDwoGParams p;
        p.d = d;
        p.R = 1.0;
        p.C = 2.25;
        p.L = 3.0;
        p.T = 10000;
        double bound = classify::gdwog_regret_bound(p);
        double worst = 0.0;
        for (int s = 1; s <= 10; ++s) worst = std::max(worst, classify::run_gdwog(cost, 0.0, p, s).regret);
        Vec v(d, 0.0);
        v[d - 1] = 0.2;
        Vec grad(d);
        for (int i = 0; i < d; ++i) grad[i] = 2.0 * (v[i] - a[i]);
        Vec e(d, 0.0);
        e[0] = 1.0;
        const double lambda = 0.01, delta = 0.1;
        classify::BiasEstimate b = classify::gradient_bias(cost, grad, v, delta, lambda,
                                                           classify::sign_flip_perturbation(e, lambda), kBiasSamples, d);
        bool ok = worst <= bound && b.bias <= b.bound + kBiasSigmas * b.sigma;
        r.pass = r.pass && ok;
        sum << "d " << d << ": max regret " << fmt(worst) << " <= " << fmt(bound) << ", bias " << fmt(b.bias)
            << " <= " << fmt(b.bound + kBiasSigmas * b.sigma) << "; ";
        det[std::to_string(d)] = {{"max_regret", worst}, {"bound", bound}, {"bias", b.bias}, {"bias_bound", b.bound},
                                  {"sigma", b.sigma}};
    }
    r.summary = sum.str();
    r.summary.resize(r.summary.size() - 2);
    r.details = det;
    return r;
}

CriterionResult classification() {
    CriterionResult r;
    const int T = 100000;
    json cfg = {{"name", "nonmyopic-classification"},
                {"scenario", "classify"},
                {"T", T},
                {"seeds", seed_list(20)},
                {"write_csv", false},
                {"algorithm", {{"name", "nonmyopic-gdwog"}, {"gamma", 0.8}}},
                {"agent", {{"kind", "induced"}, {"deviation", "loss_max"}}},
                {"game", {{"d", 3}, {"R", 1.0}, {"alpha", 1.0}, {"loss", "logistic"}}}};
    fs::path dir = artifact_dir("nonmyopic-classification");
    harness::SweepReport rep = harness::run_sweep(make_config(cfg), dir.string(), 1);
    write_curves(dir / "regret_curve.csv", rep.episodes);
    classify::NonmyopicParams np;
    np.d = 3;
    np.gamma = 0.8;
    np.T = T;
    double bound = classify::nonmyopic_regret_bound(np);
    r.pass = rep.regret.max <= bound;
    r.summary = "max regret " + fmt(rep.regret.max) + " (mean " + fmt(rep.regret.mean) + ") <= " + fmt(bound);
    r.details = {{"max_regret", rep.regret.max}, {"mean_regret", rep.regret.mean}, {"bound", bound}};
    return r;
}

CriterionResult noisy_stack() {
    CriterionResult r;
    int runs = 0, opt_ok = 0, exploit_ok = 0, elim_ok = 0;
    double worst_exploit = 0.0;
    json rows = json::array();
    for (int dim : {2, 3}) {
        auto games = finite::corpus(dim, dim, 10, 0.1, 7);
        for (bool assumed : {false, true})
            for (const auto& g : games) {
                finite::LpSolution lp = finite::multiple_lps(g);
                for (int s = 0; s < 3; ++s) {
                    finite::NoisyStackParams p;
                    p.T = 100000;
                    p.r = g.r;
                    p.L = g.L_cond;
                    AgentPtr agent;
                    if (assumed)
                        agent = std::make_unique<EpsAdversarialAgent>(finite::noisy_stack_eps(p, g.m()),
                                                                      TieMode::WorstForPrincipal);
                    else
                        agent = std::make_unique<MyopicAgent>();
                    finite::NoisyStackRun run = finite::run_noisy_stack(g, *agent, p, s);
                    RegretLedger led = stackelberg_regret(run.transcript, lp.value, false);
                    double exploit = 0.0;
                    for (std::size_t i = run.search_end; i < led.per_round.size(); ++i) exploit += led.per_round[i];
                    double delta = 1.0 / (p.L * std::sqrt(static_cast<double>(g.m())) * p.T);
                    double gap = 1.0;
                    if (static_cast<int>(run.optimizer_output.size()) > lp.y && !run.optimizer_output[lp.y].empty())
                        gap = lp.value - finite::mixed_payoffs(g, run.optimizer_output[lp.y], lp.y).first;
                    ++runs;
                    opt_ok += std::abs(gap) <= delta;
                    exploit_ok += exploit <= g.m() + 1.0;
                    elim_ok += run.eliminations <= g.m();
                    worst_exploit = std::max(worst_exploit, exploit);
                    rows.push_back({{"game", g.name}, {"m", g.m()}, {"agent", assumed ? "assumed-eps" : "myopic"},
                                    {"seed", s}, {"gap", gap}, {"delta", delta}, {"exploit_regret", exploit},
                                    {"eliminations", run.eliminations}, {"regret", led.cumulative_regret}});
                }
            }
    }
    write_json(artifact_dir("noisy-stack") / "runs.json", rows);
    double rate = static_cast<double>(opt_ok) / runs;
    r.pass = rate >= kNoisyOptimizerRate && exploit_ok == runs && elim_ok == runs;
    r.summary = "optimizer within delta on " + std::to_string(opt_ok) + "/" + std::to_string(runs) +
                ", exploit regret <= m+1 on " + std::to_string(exploit_ok) + "/" + std::to_string(runs) + " (max " +
                fmt(worst_exploit) + "), eliminations <= m on " + std::to_string(elim_ok) + "/" +
                std::to_string(runs) + "; m <= 2 only";
    r.details = {{"optimizer_rate", rate}, {"max_exploit_regret", worst_exploit}, {"runs", runs}};
    return r;
}

CriterionResult properties() {
    CriterionResult r;
    r.pass = true;
    std::ostringstream sum;
    json det = json::object();
    for (const std::string& gname : property_groups()) {
        PropertyResult p = run_property_group(gname, kPropertyCases);
        r.pass = r.pass && p.violations == 0 && p.cases == kPropertyCases;
        sum << gname << ' ' << (p.cases - p.violations) << '/' << p.cases;
        if (!p.note.empty()) sum << " (" << p.note << ")";
        sum << "; ";
        det[gname] = {{"cases", p.cases}, {"violations", p.violations}, {"worst", p.worst}};
    }
    r.summary = sum.str();
    r.summary.resize(r.summary.size() - 2);
    r.details = det;
    return r;
}

}  // namespace

std::vector<Criterion> criteria() {
    return {
        {"clinch-queries", "Clinch query complexity and accuracy", clinch_queries},
        {"clinch-vs-cubic", "Clinch against a cubic extrapolation", clinch_vs_cubic},
        {"batched-clinch", "BatchedClinch regret and doubling", batched_clinch},
        {"multithreaded-clinch-regret", "MultiThreadedClinch regret with unknown discount", mt_regret},
        {"multithreaded-clinch-containment", "MultiThreadedClinch box containment of x*", mt_containment},
        {"volume", "Centroid halfspace and search-region volume checks", volume},
        {"delay-deviation", "Exhaustive agent deviation under delayed policies", delay_deviation},
        {"batched-binary-search", "BatchedBinarySearch regret and interval invariant", bbs},
        {"se-delayed", "Delayed successive elimination", se_delayed},
        {"demand-pricing", "Posted pricing against a linear demand", pricing},
        {"gdwog", "Bandit gradient descent regret and estimator bias", gdwog},
        {"nonmyopic-classification", "Non-myopic strategic classification", classification},
        {"noisy-stack", "NoisyStack on small finite games", noisy_stack},
        {"property-groups", "Randomized structural property groups", properties},
    };
}

const std::vector<std::string>& known_unattainable() {
    static const std::vector<std::string> ids = {"multithreaded-clinch-containment"};
    return ids;
}

std::vector<CriterionResult> run_suite(std::ostream& out, const std::vector<std::string>& only) {
    std::vector<CriterionResult> results;
    const auto& ku = known_unattainable();
    const std::vector<Criterion> all = criteria();
    for (const std::string& id : only)
        if (std::none_of(all.begin(), all.end(), [&](const Criterion& c) { return c.id == id; }))
            throw ParameterError("unknown criterion id '" + id + "'");
    for (const Criterion& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        auto t0 = std::chrono::steady_clock::now();
        CriterionResult r;
        try {
            r = c.run();
        } catch (const std::exception& e) {
            r.pass = false;
            r.summary = std::string("error: ") + e.what();
        }
        r.id = c.id;
        r.title = c.title;
        r.seconds = seconds_since(t0);
        r.known_unattainable = std::find(ku.begin(), ku.end(), c.id) != ku.end();
        out << (r.pass ? "PASS " : "FAIL ") << r.id << ": " << r.summary << " [" << fmt(r.seconds, 3) << "s"
            << (r.known_unattainable && !r.pass ? ", known unattainable" : "") << "]" << std::endl;
        results.push_back(std::move(r));
    }
    fs::path root = fs::path(harness::output_root("out")) / "acceptance";
    fs::create_directories(root);
    write_json(root / "summary.json", to_json(results));
    return results;
}

int exit_code(const std::vector<CriterionResult>& results) {
    for (const auto& r : results)
        if (!r.pass && !r.known_unattainable) return 2;
    return 0;
}

json to_json(const std::vector<CriterionResult>& results) {
    json a = json::array();
    for (const auto& r : results)
        a.push_back({{"id", r.id},
                     {"title", r.title},
                     {"pass", r.pass},
                     {"known_unattainable", r.known_unattainable},
                     {"summary", r.summary},
                     {"details", r.details},
                     {"seconds", r.seconds}});
    return a;
}

}  // namespace stacklab::acceptance
