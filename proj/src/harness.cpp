#include "stacklab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "stacklab/classify.hpp"
#include "stacklab/demand.hpp"
#include "stacklab/finite.hpp"
#include "stacklab/oracles.hpp"
#include "stacklab/ssg.hpp"

namespace stacklab::harness {

namespace fs = std::filesystem;

namespace {

// Typed view of a JSON object that rejects unknown keys and reports the field path.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("", "must be an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            bool ok = false;
            for (const char* k : keys) ok = ok || it.key() == k;
            if (!ok) fail(it.key(), "unknown key");
        }
    }
    bool has(const char* k) const { return j_.contains(k); }
    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        std::string p = path_;
        if (!key.empty()) p += (p.empty() ? "" : ".") + key;
        throw ConfigError(p + ": " + what);
    }
    const json& at(const char* k) const {
        if (!j_.contains(k)) fail(k, "missing required field");
        return j_.at(k);
    }
    double num(const char* k) const {
        const json& v = at(k);
        if (!v.is_number()) fail(k, "expected a number");
        return v.get<double>();
    }
    double num(const char* k, double d) const { return has(k) ? num(k) : d; }
    int integer(const char* k) const {
        const json& v = at(k);
        if (!v.is_number_integer()) fail(k, "expected an integer");
        return v.get<int>();
    }
    int integer(const char* k, int d) const { return has(k) ? integer(k) : d; }
    std::string str(const char* k) const {
        const json& v = at(k);
        if (!v.is_string()) fail(k, "expected a string");
        return v.get<std::string>();
    }
    std::string str(const char* k, const std::string& d) const { return has(k) ? str(k) : d; }
    Vec vec(const char* k) const {
        const json& v = at(k);
        if (!v.is_array()) fail(k, "expected an array of numbers");
        Vec out;
        for (const json& e : v) {
            if (!e.is_number()) fail(k, "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }
    Node child(const char* k) const { return Node(at(k), path_.empty() ? k : path_ + "." + k); }
    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
};

template <class F>
auto guarded(const Node& n, const char* key, F f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        n.fail(key, e.what());
    }
}

TieMode tie_of(const Node& n) {
    return guarded(n, "tie", [&] { return parse_tie_mode(n.str("tie", "worst_for_principal")); });
}

// Slack model shared by the price and finite scenarios.
EpsAdversarialAgent slack_agent(const Node& a) {
    std::string kind = a.str("kind");
    TieMode tie = tie_of(a);
    if (kind == "eps-adversarial") {
        a.allow({"kind", "eps", "tie"});
        double eps = a.num("eps");
        if (!(eps >= 0.0)) a.fail("eps", "must be non-negative");
        return EpsAdversarialAgent(eps, tie);
    }
    if (kind == "induced") {
        a.allow({"kind", "gamma", "tie", "floor"});
        double g = a.num("gamma");
        if (!(g > 0.0 && g < 1.0)) a.fail("gamma", "must lie in (0,1)");
        return EpsAdversarialAgent::induced(g, tie, a.num("floor", 0.0));
    }
    a.fail("kind", "unknown agent kind '" + kind + "'");
}

AgentPtr generic_agent(const Node& a) {
    std::string kind = a.str("kind");
    if (kind == "myopic") {
        a.allow({"kind"});
        return std::make_unique<MyopicAgent>();
    }
    return std::make_unique<EpsAdversarialAgent>(slack_agent(a));
}

void validate_ssg(const ExperimentConfig& c) {
    Node g(c.game, "game");
    if (g.has("generator")) {
        g.allow({"generator", "n", "seed", "C0"});
        if (g.str("generator") != "random-linear") g.fail("generator", "only random-linear is available");
        if (g.integer("n") < 1) g.fail("n", "must be positive");
    } else {
        g.allow({"v_intercepts", "v_slopes", "u_intercepts", "u_slopes"});
        std::size_t n = g.vec("v_intercepts").size();
        for (const char* k : {"v_slopes", "u_intercepts", "u_slopes"})
            if (g.vec(k).size() != n) g.fail(k, "length differs from v_intercepts");
    }
    Node a(c.algorithm, "algorithm");
    std::string name = a.str("name");
    if (name == "batched-clinch") {
        a.allow({"name", "gamma", "centroid_samples"});
        double gm = a.num("gamma");
        if (!(gm > 0.0 && gm < 1.0)) a.fail("gamma", "must lie in (0,1)");
    } else if (name == "multithreaded-clinch") {
        a.allow({"name", "centroid_samples"});
    } else if (name == "clinch-commit") {
        a.allow({"name", "lambda", "centroid_samples"});
        if (!(a.num("lambda") > 0.0)) a.fail("lambda", "must be positive");
    } else {
        a.fail("name", "unknown ssg algorithm '" + name + "'");
    }
    generic_agent(Node(c.agent, "agent"));
}

void validate_demand(const ExperimentConfig& c) {
    Node g(c.game, "game");
    std::string kind = g.str("kind");
    if (kind == "fixed") {
        g.allow({"kind", "v"});
        double v = g.num("v");
        if (!(v >= 0.0 && v <= 1.0)) g.fail("v", "must lie in [0,1]");
    } else if (kind == "linear") {
        g.allow({"kind"});
    } else {
        g.fail("kind", "unknown demand kind '" + kind + "' (fixed or linear)");
    }
    Node a(c.algorithm, "algorithm");
    std::string name = a.str("name");
    if (name == "batched-binary-search") {
        a.allow({"name", "gamma"});
        if (kind != "fixed") a.fail("name", "batched-binary-search needs a fixed-value game");
        double gm = a.num("gamma");
        if (!(gm > 0.0 && gm < 1.0)) a.fail("gamma", "must lie in (0,1)");
    } else if (name == "binary-search") {
        a.allow({"name"});
        if (kind != "fixed") a.fail("name", "binary-search needs a fixed-value game");
    } else if (name == "se-pricing") {
        a.allow({"name", "gamma"});
        if (kind != "linear") a.fail("name", "se-pricing needs a demand curve");
        if (!a.has("gamma"))
            a.fail("gamma", "unknown discount factors are not supported; give gamma");
        double gm = a.num("gamma");
        if (!(gm > 0.0 && gm < 1.0)) a.fail("gamma", "must lie in (0,1)");
    } else {
        a.fail("name", "unknown demand algorithm '" + name + "'");
    }
    Node ag(c.agent, "agent");
    if (kind == "linear") {
        std::string k = ag.str("kind");
        if (k == "myopic") {
            ag.allow({"kind"});
        } else {
            slack_agent(ag);
        }
    } else {
        generic_agent(ag);
    }
}

void validate_classify(const ExperimentConfig& c) {
    Node g(c.game, "game");
    g.allow({"d", "R", "alpha", "loss", "p_pos", "mean_shift", "sigma"});
    if (g.integer("d", 3) < 1) g.fail("d", "must be positive");
    if (!(g.num("R", 1.0) >= 1.0)) g.fail("R", "must be at least 1");
    if (!(g.num("alpha", 1.0) > 0.0)) g.fail("alpha", "must be positive");
    guarded(g, "loss", [&] { return classify::parse_loss(g.str("loss", "logistic")); });
    Node a(c.algorithm, "algorithm");
    a.allow({"name", "gamma", "copies"});
    if (a.str("name") != "nonmyopic-gdwog") a.fail("name", "only nonmyopic-gdwog is available");
    double gm = a.num("gamma");
    if (!(gm > 0.0 && gm < 1.0)) a.fail("gamma", "must lie in (0,1)");
    Node ag(c.agent, "agent");
    ag.allow({"kind", "eps", "deviation"});
    std::string k = ag.str("kind");
    if (k != "exact" && k != "fixed" && k != "induced") ag.fail("kind", "expected exact, fixed or induced");
    if (k == "fixed" && !(ag.num("eps") >= 0.0)) ag.fail("eps", "must be non-negative");
    guarded(ag, "deviation", [&] { return classify::parse_deviation(ag.str("deviation", "loss_max")); });
}

finite::FiniteGame finite_game(const ExperimentConfig& c) {
    Node g(c.game, "game");
    if (g.has("generator")) {
        g.allow({"generator", "rows", "cols", "seed", "min_radius"});
        if (g.str("generator") != "random") g.fail("generator", "only random is available");
        int rows = g.integer("rows"), cols = g.integer("cols");
        auto games = guarded(g, "rows", [&] {
            return finite::corpus(rows, cols, 1, g.num("min_radius", 0.1),
                                  static_cast<std::uint64_t>(g.integer("seed", 0)));
        });
        return games.front();
    }
    g.allow({"rows", "cols", "u0", "v0", "r", "L"});
    int rows = g.integer("rows"), cols = g.integer("cols");
    Vec u0 = g.vec("u0"), v0 = g.vec("v0");
    finite::FiniteGame fg = guarded(g, "u0", [&] { return finite::make_game(rows, cols, u0, v0, c.name); });
    if (g.has("r")) fg.r = g.num("r");
    if (g.has("L")) fg.L_cond = g.num("L");
    if (!g.has("r") || !g.has("L")) finite::fit_regularity(fg, 0);
    if (!(fg.r > 0.0)) g.fail("r", "the optimal region has no interior; give r > 0 or choose another game");
    return fg;
}

void validate_finite(const ExperimentConfig& c) {
    finite_game(c);
    Node a(c.algorithm, "algorithm");
    a.allow({"name", "c", "budget", "steps_per_stage"});
    if (a.str("name") != "noisy-stack") a.fail("name", "only noisy-stack is available");
    Node ag(c.agent, "agent");
    std::string k = ag.str("kind");
    if (k == "assumed-eps") {
        ag.allow({"kind", "tie"});
        tie_of(ag);
    } else {
        generic_agent(ag);
    }
}

ssg::SecurityGame ssg_game(const ExperimentConfig& c) {
    Node g(c.game, "game");
    if (g.has("generator")) {
        Rng rng(static_cast<std::uint64_t>(g.integer("seed", 0)));
        return ssg::random_linear_game(g.integer("n"), rng, g.num("C0", 2.0));
    }
    Vec va = g.vec("v_intercepts"), vb = g.vec("v_slopes"), ua = g.vec("u_intercepts"), ub = g.vec("u_slopes");
    return guarded(g, "v_intercepts", [&] {
        return ssg::linear_game(va, vb, ua, ub, StrategySpace::simplex_downward(static_cast<int>(va.size())));
    });
}

// Principal-favouring value of the conservative optimum.
double ssg_benchmark(const ssg::SecurityGame& G, Vec* xstar) {
    std::vector<oracles::Curve1D> vs;
    for (const auto& cv : G.v_curves()) vs.push_back([cv](double s) { return cv(s); });
    oracles::WaterFilling wf = oracles::water_filling(vs);
    GameSpec S = G.spec();
    double best_v = -std::numeric_limits<double>::infinity(), best_u = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < G.n(); ++y) best_v = std::max(best_v, S.v(wf.x, y));
    for (int y = 0; y < G.n(); ++y)
        if (S.v(wf.x, y) >= best_v - 1e-9) best_u = std::max(best_u, S.u(wf.x, y));
    if (xstar) *xstar = wf.x;
    return best_u;
}

bool is_myopic(const json& agent) { return agent.value("kind", "") == "myopic" || agent.value("kind", "") == "exact"; }

std::string csv_text(const std::function<void(std::ostream&)>& w) {
    std::ostringstream os;
    w(os);
    return os.str();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": syntax error: " +
                          e.what());
    }
    Node root(j, "");
    root.allow({"name", "scenario", "T", "seeds", "output", "algorithm", "agent", "game", "write_csv"});
    ExperimentConfig c;
    c.name = root.str("name");
    if (c.name.empty() || c.name.find('/') != std::string::npos) root.fail("name", "must be a plain non-empty name");
    c.scenario = root.str("scenario");
    c.T = root.integer("T");
    if (c.T < 1) root.fail("T", "must be positive");
    const json& s = root.at("seeds");
    if (!s.is_array() || s.empty()) root.fail("seeds", "expected a non-empty array of non-negative integers");
    for (const json& e : s) {
        if (!e.is_number_unsigned()) root.fail("seeds", "expected a non-empty array of non-negative integers");
        c.seeds.push_back(e.get<std::uint64_t>());
    }
    c.output = root.str("output", "");
    if (root.has("write_csv") && !root.at("write_csv").is_boolean()) root.fail("write_csv", "expected true or false");
    c.write_csv = root.has("write_csv") ? root.at("write_csv").get<bool>() : true;
    c.algorithm = root.at("algorithm");
    c.agent = root.at("agent");
    c.game = root.at("game");
    if (c.scenario == "ssg") validate_ssg(c);
    else if (c.scenario == "demand") validate_demand(c);
    else if (c.scenario == "classify") validate_classify(c);
    else if (c.scenario == "finite") validate_finite(c);
    else root.fail("scenario", "expected one of ssg, demand, classify, finite");
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

Aggregate aggregate(const std::vector<double>& xs) {
    Aggregate a;
    a.count = static_cast<int>(xs.size());
    if (xs.empty()) return a;
    std::vector<double> s(xs);
    std::sort(s.begin(), s.end());
    a.min = s.front();
    a.max = s.back();
    a.mean = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
    std::size_t k = s.size();
    a.median = k % 2 ? s[k / 2] : 0.5 * (s[k / 2 - 1] + s[k / 2]);
    double var = 0.0;
    for (double x : s) var += (x - a.mean) * (x - a.mean);
    double se = k > 1 ? std::sqrt(var / (k - 1) / k) : 0.0;
    a.ci_lo = a.mean - 1.96 * se;
    a.ci_hi = a.mean + 1.96 * se;
    return a;
}

Fit fit_scaling(const std::vector<double>& scale, const std::vector<double>& y,
                const std::function<double(double)>& form, bool intercept) {
    if (scale.size() != y.size() || y.empty()) throw ParameterError("fit_scaling: need matching non-empty data");
    std::vector<double> distinct(scale);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 4) throw ParameterError("fit_scaling: need at least four distinct scale points");
    std::size_t N = y.size();
    std::vector<double> f(N);
    for (std::size_t i = 0; i < N; ++i) f[i] = form(scale[i]);
    double fm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        fm += f[i] / N;
        ym += y[i] / N;
    }
    Fit fit;
    if (intercept) {
        double sff = 0.0, sfy = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            sff += (f[i] - fm) * (f[i] - fm);
            sfy += (f[i] - fm) * (y[i] - ym);
        }
        if (!(sff > 1e-12 * std::max(1.0, fm * fm))) throw ParameterError("fit_scaling: degenerate design matrix");
        fit.slope = sfy / sff;
        fit.intercept = ym - fit.slope * fm;
    } else {
        double sff = 0.0, sfy = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            sff += f[i] * f[i];
            sfy += f[i] * y[i];
        }
        if (!(sff > 0.0)) throw ParameterError("fit_scaling: degenerate design matrix");
        fit.slope = sfy / sff;
    }
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        double r = y[i] - (fit.intercept + fit.slope * f[i]);
        ss_res += r * r;
        ss_tot += (y[i] - ym) * (y[i] - ym);
    }
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    fit.flagged = fit.r2 < 0.5;
    return fit;
}

json to_json(const Fit& f) {
    return {{"intercept", f.intercept}, {"slope", f.slope}, {"r2", f.r2}, {"flagged", f.flagged}};
}

json SweepReport::to_json() const {
    json eps = json::array();
    for (const EpisodeResult& e : episodes) {
        json x = {{"seed", e.seed}, {"regret", e.regret}, {"benchmark", e.benchmark}, {"rounds", e.rounds}};
        if (!e.csv.empty()) x["csv"] = fs::path(e.csv).filename().string();
        for (const auto& [k, v] : e.extra) x["extra"][k] = v;
        eps.push_back(x);
    }
    json r = {{"name", name},
              {"scenario", scenario},
              {"algorithm", algorithm},
              {"T", T},
              {"episodes", eps},
              {"regret",
               {{"mean", regret.mean},
                {"median", regret.median},
                {"ci95", {regret.ci_lo, regret.ci_hi}},
                {"min", regret.min},
                {"max", regret.max},
                {"count", regret.count}}}};
    if (bound) r["bound"] = *bound;
    return r;
}

EpisodeResult run_one(const ExperimentConfig& cfg, std::uint64_t seed, bool keep_csv) {
    EpisodeResult res;
    res.seed = seed;
    Node agent_node(cfg.agent, "agent");
    Node algo(cfg.algorithm, "algorithm");
    const int T = cfg.T;
    if (cfg.scenario == "ssg") {
        ssg::SecurityGame G = ssg_game(cfg);
        Vec xstar;
        res.benchmark = ssg_benchmark(G, &xstar);
        ssg::ClinchOptions opt;
        opt.centroid_samples = algo.integer("centroid_samples", opt.centroid_samples);
        std::string name = algo.str("name");
        PolicyPtr p;
        ssg::MultiThreadedClinch* mt = nullptr;
        if (name == "batched-clinch") {
            p = std::make_unique<ssg::BatchedClinch>(G, T, algo.num("gamma"), opt);
        } else if (name == "multithreaded-clinch") {
            auto m = std::make_unique<ssg::MultiThreadedClinch>(G, T, opt);
            m->set_reference(xstar);
            mt = m.get();
            p = std::move(m);
        } else {
            p = std::make_unique<ssg::ExploreCommitClinch>(G, algo.num("lambda"), opt);
        }
        AgentPtr agent = generic_agent(agent_node);
        GameSpec S = G.spec();
        Transcript tr = run_episode(*p, *agent, S, T, seed);
        RegretLedger led = stackelberg_regret(tr, res.benchmark, is_myopic(cfg.agent));
        res.regret = led.cumulative_regret;
        res.curve = led.cumulative;
        res.rounds = static_cast<int>(tr.rounds.size());
        if (mt) {
            res.extra["containment_failures"] = mt->containment_failures();
            res.extra["exploit_rounds"] = mt->exploit_rounds();
            auto [blo, bhi] = mt->intersection_box();
            bool in = true;
            for (int i = 0; i < G.n(); ++i) in = in && blo[i] <= xstar[i] + 1e-12 && xstar[i] <= bhi[i] + 1e-12;
            res.extra["final_contained"] = in ? 1.0 : 0.0;
        }
        if (keep_csv) res.csv = csv_text([&](std::ostream& os) { write_transcript_csv(os, tr, led, true); });
        return res;
    }
    if (cfg.scenario == "demand") {
        Node g(cfg.game, "game");
        std::string name = algo.str("name");
        if (g.str("kind") == "fixed") {
            double v = g.num("v");
            GameSpec S = demand::fixed_value_game(v);
            PolicyPtr p;
            demand::BatchedBinarySearch* bbs = nullptr;
            if (name == "batched-binary-search") {
                auto b = std::make_unique<demand::BatchedBinarySearch>(algo.num("gamma"), T);
                bbs = b.get();
                p = std::move(b);
            } else {
                p = std::make_unique<demand::BinarySearchPolicy>(T);
            }
            AgentPtr agent = generic_agent(agent_node);
            Transcript tr = run_episode(*p, *agent, S, T, seed);
            res.benchmark = v;
            RegretLedger led = stackelberg_regret(tr, v, is_myopic(cfg.agent));
            res.regret = led.cumulative_regret;
            res.curve = led.cumulative;
            res.rounds = static_cast<int>(tr.rounds.size());
            if (bbs) {
                bool inv = true;
                for (const auto& s : bbs->trace()) inv = inv && v >= s.lo - 1e-12 && v <= s.hi + 1e-12;
                res.extra["interval_invariant"] = inv ? 1.0 : 0.0;
                res.extra["iterations"] = static_cast<double>(bbs->trace().size());
            }
            if (keep_csv) res.csv = csv_text([&](std::ostream& os) { write_transcript_csv(os, tr, led, true); });
            return res;
        }
        demand::DemandCurve curve = demand::linear_demand();
        double gamma = algo.num("gamma");
        demand::SEPricingPolicy pol = demand::demand_pricing_policy(curve, gamma, T);
        std::unique_ptr<demand::StochasticBuyer> buyer;
        if (agent_node.str("kind") == "myopic") {
            buyer = std::make_unique<demand::StochasticBuyer>(demand::StochasticBuyer::myopic(curve));
        } else {
            buyer = std::make_unique<demand::StochasticBuyer>(curve, slack_agent(agent_node), tie_of(agent_node));
        }
        Transcript tr = run_episode(pol, *buyer, demand::pricing_game(curve), T, seed);
        RegretLedger led = demand::pricing_regret(tr, curve);
        res.benchmark = led.benchmark_value;
        res.regret = led.cumulative_regret;
        res.curve = led.cumulative;
        res.rounds = static_cast<int>(tr.rounds.size());
        res.extra["K"] = pol.K();
        if (keep_csv) res.csv = csv_text([&](std::ostream& os) { demand::write_pricing_csv(os, tr, led); });
        return res;
    }
    if (cfg.scenario == "classify") {
        Node g(cfg.game, "game");
        classify::NonmyopicParams np;
        np.d = g.integer("d", 3);
        np.R = g.num("R", 1.0);
        np.alpha = g.num("alpha", 1.0);
        np.loss = classify::parse_loss(g.str("loss", "logistic"));
        np.gamma = algo.num("gamma");
        np.T = T;
        if (algo.has("copies")) np.copies = algo.integer("copies");
        classify::TypeGenerator gen;
        gen.d = np.d;
        gen.R = np.R;
        gen.alpha = np.alpha;
        gen.p_pos = g.num("p_pos", gen.p_pos);
        gen.mean_shift = g.num("mean_shift", gen.mean_shift);
        gen.sigma = g.num("sigma", gen.sigma);
        classify::AgentModel am;
        std::string k = agent_node.str("kind");
        am.kind = k == "exact" ? classify::AgentModel::Kind::Exact
                  : k == "fixed" ? classify::AgentModel::Kind::Fixed
                                 : classify::AgentModel::Kind::Induced;
        am.eps = agent_node.num("eps", 0.0);
        am.deviation = classify::parse_deviation(agent_node.str("deviation", "loss_max"));
        classify::NonmyopicClassifier pol(np, seed);
        auto types = gen.draw(T, seed);
        classify::ClassTranscript tr = classify::run_classification(pol, types, am, seed);
        classify::ClassRegret reg = classify::classification_regret(tr, np.R);
        res.regret = reg.total;
        res.curve = reg.cumulative;
        res.benchmark = reg.benchmark;
        res.rounds = static_cast<int>(tr.rounds.size());
        res.extra["copies"] = pol.copies();
        res.extra["agent_eps"] = tr.agent_eps;
        if (keep_csv) res.csv = csv_text([&](std::ostream& os) { classify::write_classification_csv(os, tr, reg); });
        return res;
    }
    // finite
    finite::FiniteGame fg = finite_game(cfg);
    finite::NoisyStackParams p;
    p.T = T;
    p.r = fg.r;
    p.L = fg.L_cond;
    p.c = algo.num("c", 3.0);
    if (algo.has("budget")) p.search.budget = algo.integer("budget");
    if (algo.has("steps_per_stage")) p.search.steps_per_stage = algo.integer("steps_per_stage");
    AgentPtr agent;
    if (agent_node.str("kind") == "assumed-eps") {
        agent = std::make_unique<EpsAdversarialAgent>(finite::noisy_stack_eps(p, fg.m()), tie_of(agent_node));
    } else {
        agent = generic_agent(agent_node);
    }
    finite::LpSolution lp = finite::multiple_lps(fg);
    finite::NoisyStackRun run = finite::run_noisy_stack(fg, *agent, p, seed);
    RegretLedger led = stackelberg_regret(run.transcript, lp.value, false);
    res.benchmark = lp.value;
    res.regret = led.cumulative_regret;
    res.curve = led.cumulative;
    res.rounds = static_cast<int>(run.transcript.rounds.size());
    double exploit = 0.0;
    for (std::size_t i = run.search_end; i < led.per_round.size(); ++i) exploit += led.per_round[i];
    res.extra["exploit_regret"] = exploit;
    res.extra["search_end"] = run.search_end;
    res.extra["eliminations"] = run.eliminations;
    res.extra["candidates"] = static_cast<double>(run.candidates.size());
    res.extra["fallback"] = run.fallback ? 1.0 : 0.0;
    if (keep_csv)
        res.csv = csv_text([&](std::ostream& os) { finite::write_finite_csv(os, run.transcript, led); });
    return res;
}

namespace {
std::optional<double> theory_bound(const ExperimentConfig& cfg) {
    double T = cfg.T;
    if (cfg.scenario == "demand") {
        Node a(cfg.algorithm, "algorithm");
        std::string name = a.str("name");
        if (name == "batched-binary-search") {
            double Tg = discounted_horizon(a.num("gamma"));
            return kBatchedSearchBoundFactor * (std::log(T) + Tg * std::log(Tg));
        }
        if (name == "se-pricing") {
            demand::DemandCurve c = demand::linear_demand();
            double Tg = discounted_horizon(a.num("gamma"));
            return kPricingBoundFactor *
                   ((c.C2 + 1.0 / c.C1) * std::sqrt(T * std::log(T)) + Tg * std::pow(std::log(c.L * Tg * T), 2));
        }
    }
    if (cfg.scenario == "classify") {
        Node g(cfg.game, "game");
        classify::NonmyopicParams np;
        np.d = g.integer("d", 3);
        np.R = g.num("R", 1.0);
        np.alpha = g.num("alpha", 1.0);
        np.gamma = Node(cfg.algorithm, "algorithm").num("gamma");
        np.T = cfg.T;
        return classify::nonmyopic_regret_bound(np);
    }
    return std::nullopt;
}
}  // namespace

SweepReport run_sweep(const ExperimentConfig& cfg, const std::string& dir, int parallel) {
    fs::create_directories(dir);
    SweepReport rep;
    rep.name = cfg.name;
    rep.scenario = cfg.scenario;
    rep.algorithm = cfg.algorithm.value("name", "");
    rep.T = cfg.T;
    rep.bound = theory_bound(cfg);
    std::size_t N = cfg.seeds.size();
    rep.episodes.resize(N);
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= N) return;
            try {
                EpisodeResult r = run_one(cfg, cfg.seeds[i], cfg.write_csv);
                if (cfg.write_csv) {
                    std::string path = (fs::path(dir) / ("seed-" + std::to_string(cfg.seeds[i]) + ".csv")).string();
                    std::ofstream out(path, std::ios::binary);
                    out << r.csv;
                    if (!out) throw std::runtime_error("cannot write " + path);
                    r.csv = path;
                }
                rep.episodes[i] = std::move(r);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
                next = N;
            }
        }
    };
    int k = std::max(1, std::min<int>(parallel, static_cast<int>(N)));
    if (k == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < k; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (err) std::rethrow_exception(err);
    std::vector<double> xs;
    for (const auto& e : rep.episodes) xs.push_back(e.regret);
    rep.regret = aggregate(xs);
    std::ofstream out(fs::path(dir) / "report.json", std::ios::binary);
    out << rep.to_json().dump(2) << '\n';
    return rep;
}

SweepReport recompute_report(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "report.json");
    if (!in) throw ConfigError(dir + ": no report.json");
    json j = json::parse(in);
    SweepReport rep;
    rep.name = j.at("name");
    rep.scenario = j.at("scenario");
    rep.algorithm = j.at("algorithm");
    rep.T = j.at("T");
    if (j.contains("bound")) rep.bound = j.at("bound").get<double>();
    std::vector<double> xs;
    for (const json& e : j.at("episodes")) {
        EpisodeResult r;
        r.seed = e.at("seed");
        r.benchmark = e.at("benchmark");
        if (!e.contains("csv")) throw ConfigError(dir + ": episode without a stored trace");
        r.csv = (fs::path(dir) / e.at("csv").get<std::string>()).string();
        std::ifstream c(r.csv);
        if (!c) throw ConfigError(r.csv + ": missing trace");
        std::string header, line, last;
        std::getline(c, header);
        std::vector<std::string> cols;
        std::stringstream hs(header);
        for (std::string f; std::getline(hs, f, ',');) cols.push_back(f);
        auto it = std::find(cols.begin(), cols.end(), "cumulative_regret");
        if (it == cols.end()) it = std::find(cols.begin(), cols.end(), "regret");
        if (it == cols.end()) throw ConfigError(r.csv + ": no regret column");
        std::size_t idx = it - cols.begin();
        int rows = 0;
        while (std::getline(c, line)) {
            if (line.empty()) continue;
            last = line;
            ++rows;
        }
        r.rounds = rows;
        std::stringstream ls(last);
        std::string f;
        for (std::size_t i = 0; i <= idx && std::getline(ls, f, ','); ++i) {
        }
        r.regret = rows ? std::stod(f) : 0.0;
        if (e.contains("extra"))
            for (auto it2 = e.at("extra").begin(); it2 != e.at("extra").end(); ++it2) r.extra[it2.key()] = *it2;
        xs.push_back(r.regret);
        rep.episodes.push_back(std::move(r));
    }
    rep.regret = aggregate(xs);
    return rep;
}

std::string output_root(const std::string& fallback) {
    const char* e = std::getenv("STACKLAB_OUT");
    return e && *e ? std::string(e) : fallback;
}

}  // namespace stacklab::harness
