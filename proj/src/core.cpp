#include "stacklab/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

namespace stacklab {

std::uint64_t mix_seed(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::uint64_t z = seed ^ (h + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(mix_seed(seed, "root")) {}

Rng Rng::substream(std::string_view name) const { return Rng(mix_seed(seed_, name)); }

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    std::normal_distribution<double> d(0.0, 1.0);
    return d(engine_);
}

int Rng::uniform_int(int n) {
    if (n <= 0) throw ParameterError("uniform_int: n must be positive");
    return static_cast<int>(engine_() % static_cast<std::uint64_t>(n));
}

bool Rng::bernoulli(double p) { return uniform() < p; }

StrategySpace StrategySpace::simplex_downward(int n) {
    StrategySpace s;
    s.kind = SpaceKind::SimplexDownward;
    s.dim = n;
    return s;
}

StrategySpace StrategySpace::box(int n) {
    StrategySpace s;
    s.kind = SpaceKind::Box;
    s.dim = n;
    return s;
}

StrategySpace StrategySpace::boxed_simplex(Vec caps) {
    StrategySpace s;
    s.kind = SpaceKind::BoxedSimplex;
    s.dim = static_cast<int>(caps.size());
    s.caps = std::move(caps);
    return s;
}

StrategySpace StrategySpace::simplex(int n) {
    StrategySpace s;
    s.kind = SpaceKind::Simplex;
    s.dim = n;
    return s;
}

StrategySpace StrategySpace::convex(int n, std::function<bool(const Vec&)> member) {
    StrategySpace s;
    s.kind = SpaceKind::Convex;
    s.dim = n;
    s.member = std::move(member);
    return s;
}

bool StrategySpace::contains(const Vec& x, double tol) const {
    if (static_cast<int>(x.size()) != dim) return false;
    double sum = 0.0;
    for (int i = 0; i < dim; ++i) {
        if (!std::isfinite(x[i]) || x[i] < -tol) return false;
        if (kind != SpaceKind::Convex && x[i] > 1.0 + tol) return false;
        if (kind == SpaceKind::BoxedSimplex && x[i] > caps[i] + tol) return false;
        sum += x[i];
    }
    switch (kind) {
        case SpaceKind::SimplexDownward:
        case SpaceKind::BoxedSimplex:
            return sum <= 1.0 + tol;
        case SpaceKind::Box:
            return true;
        case SpaceKind::Simplex:
            return std::abs(sum - 1.0) <= tol;
        case SpaceKind::Convex: {
            Vec c(x);
            for (double& v : c) v = std::clamp(v, 0.0, 1.0);
            for (int i = 0; i < dim; ++i)
                if (x[i] > 1.0 + tol) return false;
            return member(c) || member(x);
        }
    }
    return false;
}

bool StrategySpace::downward_closed() const { return kind != SpaceKind::Simplex; }

std::string StrategySpace::name() const {
    switch (kind) {
        case SpaceKind::SimplexDownward: return "simplex_downward";
        case SpaceKind::Box: return "box";
        case SpaceKind::BoxedSimplex: return "boxed_simplex";
        case SpaceKind::Simplex: return "simplex";
        case SpaceKind::Convex: return "convex";
    }
    return "unknown";
}

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const Vec& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

double dist_inf(const Vec& a, const Vec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double dist2(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

void GameSpec::validate() const {
    if (num_actions < 1) throw ParameterError("game " + name + ": no agent actions");
    if (!u || !v) throw ParameterError("game " + name + ": missing payoff function");
    if (space.dim < 1) throw ParameterError("game " + name + ": empty strategy space");
}

std::vector<int> best_response_set(const GameSpec& g, const Vec& x, double eps) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> vals(g.num_actions);
    for (int y = 0; y < g.num_actions; ++y) {
        vals[y] = g.v(x, y);
        best = std::max(best, vals[y]);
    }
    std::vector<int> out;
    for (int y = 0; y < g.num_actions; ++y)
        if (vals[y] >= best - eps - 1e-12) out.push_back(y);
    return out;
}

int best_response(const GameSpec& g, const Vec& x) {
    auto br = best_response_set(g, x, 0.0);
    int best = br.front();
    double bu = g.u(x, best);
    for (int y : br) {
        double uy = g.u(x, y);
        if (uy > bu) {
            bu = uy;
            best = y;
        }
    }
    return best;
}

TieMode parse_tie_mode(const std::string& s) {
    if (s == "worst_for_principal") return TieMode::WorstForPrincipal;
    if (s == "best_for_principal") return TieMode::BestForPrincipal;
    if (s == "boundary_seeking") return TieMode::BoundarySeeking;
    throw ParameterError("unknown tie mode: " + s);
}

std::string to_string(TieMode m) {
    switch (m) {
        case TieMode::WorstForPrincipal: return "worst_for_principal";
        case TieMode::BestForPrincipal: return "best_for_principal";
        case TieMode::BoundarySeeking: return "boundary_seeking";
    }
    return "unknown";
}

int eps_adversarial_response(const GameSpec& g, const Vec& x, double eps, TieMode mode) {
    if (eps < 0) throw ParameterError("eps must be non-negative");
    auto set = best_response_set(g, x, eps);
    int pick = set.front();
    switch (mode) {
        case TieMode::BestForPrincipal: {
            double bu = g.u(x, pick);
            for (int y : set)
                if (g.u(x, y) > bu) bu = g.u(x, y), pick = y;
            break;
        }
        case TieMode::WorstForPrincipal: {
            double bu = g.u(x, pick);
            for (int y : set)
                if (g.u(x, y) < bu) bu = g.u(x, y), pick = y;
            break;
        }
        case TieMode::BoundarySeeking: {
            // least-preferred member, then largest own coordinate when the dimensions line up
            bool aligned = static_cast<int>(x.size()) == g.num_actions;
            auto key = [&](int y) { return g.v(x, y); };
            for (int y : set) {
                double ky = key(y), kp = key(pick);
                if (ky < kp - 1e-15) pick = y;
                else if (aligned && std::abs(ky - kp) <= 1e-15 && x[y] > x[pick]) pick = y;
            }
            break;
        }
    }
    return pick;
}

Screen Screen::delay(int d) {
    if (d < 1) throw ParameterError("delay must be at least 1");
    return {Kind::Delay, d};
}

Screen Screen::batch(int b) {
    if (b < 1) throw ParameterError("batch size must be at least 1");
    return {Kind::Batch, b};
}

int Screen::visible_through(int t) const {
    switch (kind) {
        case Kind::None: return t - 1;
        case Kind::Delay: return t - rounds;
        case Kind::Batch: return rounds * ((t - 1) / rounds);
    }
    return t - 1;
}

std::optional<int> Policy::effective_delay() const {
    Screen s = screen();
    if (s.kind == Screen::Kind::None) return 1;
    return s.rounds;
}

DelayedResponsePolicy::DelayedResponsePolicy(int delay, Vec initial, std::vector<Vec> table)
    : delay_(delay), initial_(std::move(initial)), table_(std::move(table)) {
    if (delay_ < 1) throw ParameterError("delay must be at least 1");
}

Vec DelayedResponsePolicy::act(int t) {
    int s = t - delay_;
    if (s >= 1 && s <= static_cast<int>(seen_.size())) {
        int y = seen_[s - 1];
        if (y >= 0 && y < static_cast<int>(table_.size())) return table_[y];
    }
    return initial_;
}

void DelayedResponsePolicy::observe(int s, const Vec&, int y) {
    if (static_cast<int>(seen_.size()) < s) seen_.resize(s, -1);
    seen_[s - 1] = y;
}

AgentResponse MyopicAgent::respond(const AgentContext& c) {
    int y = best_response(c.game, c.x);
    return {y, c.game.v(c.x, y)};
}

EpsAdversarialAgent::EpsAdversarialAgent(double eps, TieMode mode) : eps_(eps), mode_(mode) {
    if (eps < 0) throw ParameterError("eps must be non-negative");
}

EpsAdversarialAgent EpsAdversarialAgent::induced(double gamma, TieMode mode, double floor_eps) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie in (0,1)");
    EpsAdversarialAgent a(0.0, mode);
    a.gamma_ = gamma;
    a.floor_eps_ = floor_eps;
    return a;
}

std::string EpsAdversarialAgent::name() const {
    return gamma_ ? "eps-adversarial(induced," + to_string(mode_) + ")"
                  : "eps-adversarial(" + format_double(eps_) + "," + to_string(mode_) + ")";
}

double EpsAdversarialAgent::eps_for(const Policy& p) const {
    if (!gamma_) return eps_;
    auto d = p.effective_delay();
    if (!d) return floor_eps_;
    return std::max(floor_eps_, induced_epsilon(*gamma_, *d));
}

AgentResponse EpsAdversarialAgent::respond(const AgentContext& c) {
    int y = eps_adversarial_response(c.game, c.x, eps_for(c.policy), mode_);
    return {y, c.game.v(c.x, y)};
}

AgentResponse ScriptedAgent::respond(const AgentContext& c) {
    int y = program_(c);
    if (y < 0 || y >= c.game.num_actions) throw EpisodeError("scripted agent returned invalid action");
    return {y, c.game.v(c.x, y)};
}

AgentPtr sequence_agent(std::vector<int> ys) {
    return std::make_unique<ScriptedAgent>(
        [ys = std::move(ys)](const AgentContext& c) {
            if (c.t <= static_cast<int>(ys.size())) return ys[c.t - 1];
            return best_response(c.game, c.x);
        },
        "sequence");
}

EpisodeStepper::EpisodeStepper(const GameSpec& g, PolicyPtr policy) : game_(&g), policy_(std::move(policy)) {}

EpisodeStepper::EpisodeStepper(const EpisodeStepper& o)
    : game_(o.game_), policy_(o.policy_->clone()), t_(o.t_), released_(o.released_), pending_(o.pending_),
      xs_(o.xs_), ys_(o.ys_) {}

const Vec& EpisodeStepper::next_action() {
    if (pending_) throw EpisodeError("next_action called twice without record");
    int t = t_ + 1;
    int through = std::min(policy_->screen().visible_through(t), t_);
    while (released_ < through) {
        ++released_;
        policy_->observe(released_, xs_[released_ - 1], ys_[released_ - 1]);
    }
    Vec x = policy_->act(t);
    if (!game_->space.contains(x, 1e-9)) {
        std::ostringstream os;
        os << "policy " << policy_->name() << " played an action outside the strategy space at round " << t;
        throw EpisodeError(os.str());
    }
    xs_.push_back(std::move(x));
    pending_ = true;
    return xs_.back();
}

void EpisodeStepper::record(int y) {
    if (!pending_) throw EpisodeError("record called before next_action");
    if (y < 0 || y >= game_->num_actions) throw EpisodeError("invalid agent action");
    ys_.push_back(y);
    ++t_;
    pending_ = false;
}

namespace {

struct Planner {
    const GameSpec& g;
    double gamma;
    int horizon;
    PlanResult best;
    std::vector<int> path;

    void dfs(EpisodeStepper& st, double value, double disc) {
        if (st.round() == horizon) {
            if (value > best.value + 1e-15 || best.actions.empty()) {
                best.value = value;
                best.actions = path;
            }
            return;
        }
        const Vec x = st.next_action();
        for (int y = 0; y < g.num_actions; ++y) {
            EpisodeStepper child(st);
            child.record(y);
            path.push_back(y);
            dfs(child, value + disc * g.v(x, y), disc * gamma);
            path.pop_back();
        }
    }
};

}  // namespace

PlanResult plan_discounted(const GameSpec& g, const Policy& policy, double gamma, int horizon) {
    if (horizon < 1 || horizon > 8) throw ParameterError("planning horizon must be in [1,8]");
    if (g.num_actions > 4) throw ParameterError("planning supports at most 4 agent actions");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie in [0,1)");
    Planner p{g, gamma, horizon, {}, {}};
    p.best.value = -std::numeric_limits<double>::infinity();
    EpisodeStepper st(g, policy.clone());
    p.dfs(st, 0.0, 1.0);
    return p.best;
}

ExhaustiveDiscountedAgent::ExhaustiveDiscountedAgent(double gamma, int horizon, const Policy& principal)
    : gamma_(gamma), horizon_(horizon), principal_(principal.clone()) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie in [0,1)");
    if (horizon < 1 || horizon > 8) throw ParameterError("horizon must be in [1,8]");
}

ExhaustiveDiscountedAgent::ExhaustiveDiscountedAgent(const ExhaustiveDiscountedAgent& o)
    : Agent(o), gamma_(o.gamma_), horizon_(o.horizon_), principal_(o.principal_->clone()), plan_(o.plan_) {}

AgentResponse ExhaustiveDiscountedAgent::respond(const AgentContext& c) {
    if (c.t > horizon_) {
        int y = best_response(c.game, c.x);
        return {y, c.game.v(c.x, y)};
    }
    if (plan_.empty()) plan_ = plan_discounted(c.game, *principal_, gamma_, horizon_).actions;
    int y = plan_[c.t - 1];
    return {y, c.game.v(c.x, y)};
}

Transcript run_episode(Policy& policy, Agent& agent, const GameSpec& game, int T, std::uint64_t seed) {
    if (T < 1) throw ParameterError("T must be at least 1");
    game.validate();
    Rng root(seed);
    Rng agent_rng = root.substream("agent");
    policy.reseed(mix_seed(seed, "policy"));
    Transcript tr;
    tr.seed = seed;
    tr.algorithm = policy.name();
    tr.agent = agent.name();
    tr.rounds.reserve(T);
    Screen screen = policy.screen();
    int released = 0;
    for (int t = 1; t <= T; ++t) {
        int through = std::min(screen.visible_through(t), t - 1);
        while (released < through) {
            const Round& r = tr.rounds[released];
            policy.observe(r.t, r.x, r.y);
            ++released;
        }
        Round r;
        r.t = t;
        r.x = policy.act(t);
        if (!game.space.contains(r.x, 1e-9)) {
            std::ostringstream os;
            os << "policy " << policy.name() << " played an action outside the strategy space at round " << t;
            throw EpisodeError(os.str());
        }
        r.info = policy.info();
        AgentContext ctx{t, r.x, game, policy, agent_rng};
        AgentResponse resp = agent.respond(ctx);
        if (resp.y < 0 || resp.y >= game.num_actions) {
            throw EpisodeError("agent " + agent.name() + " returned an invalid action at round " + std::to_string(t));
        }
        r.y = resp.y;
        r.principal_payoff = game.u(r.x, r.y);
        r.agent_payoff = resp.agent_payoff;
        tr.rounds.push_back(std::move(r));
    }
    return tr;
}

RegretLedger stackelberg_regret(const Transcript& tr, double benchmark, bool strict) {
    RegretLedger led;
    led.benchmark_value = benchmark;
    led.per_round.reserve(tr.rounds.size());
    led.cumulative.reserve(tr.rounds.size());
    double cum = 0.0;
    for (const Round& r : tr.rounds) {
        double reg = benchmark - r.principal_payoff;
        if (strict && reg < -1e-9) {
            throw EpisodeError("benchmark " + format_double(benchmark) + " below realized payoff " +
                               format_double(r.principal_payoff) + " at round " + std::to_string(r.t));
        }
        cum += reg;
        led.per_round.push_back(reg);
        led.cumulative.push_back(cum);
    }
    led.cumulative_regret = cum;
    return led;
}

double discounted_horizon(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie in (0,1)");
    return 1.0 / (1.0 - gamma);
}

double induced_epsilon(double gamma, int D) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie in (0,1)");
    if (D < 0) throw ParameterError("delay must be non-negative");
    return std::pow(gamma, D) / (1.0 - gamma);
}

int required_delay(double gamma, double eps) {
    double Tg = discounted_horizon(gamma);
    if (!(eps > 0.0)) throw ParameterError("eps must be positive");
    double d = std::ceil(Tg * std::log(Tg / eps) - 1e-12);
    return static_cast<int>(std::max(1.0, d));
}

namespace {

int batch_of(const Policy& p) {
    // a D-delayed policy is also D-batched
    Screen s = p.screen();
    return s.kind == Screen::Kind::None ? 1 : s.rounds;
}

}  // namespace

BatchedToDelayed::BatchedToDelayed(const Policy& inner) : B_(batch_of(inner)) {
    copies_[0] = inner.clone();
    copies_[1] = inner.clone();
}

BatchedToDelayed::BatchedToDelayed(const BatchedToDelayed& o)
    : Policy(o), B_(o.B_), info_(o.info_), last_copy_(o.last_copy_) {
    copies_[0] = o.copies_[0]->clone();
    copies_[1] = o.copies_[1]->clone();
    buffer_[0] = o.buffer_[0];
    buffer_[1] = o.buffer_[1];
    released_[0] = o.released_[0];
    released_[1] = o.released_[1];
}

std::string BatchedToDelayed::name() const { return "two-copy(" + copies_[0]->name() + ")"; }

void BatchedToDelayed::reseed(std::uint64_t s) {
    copies_[0]->reseed(mix_seed(s, "copy0"));
    copies_[1]->reseed(mix_seed(s, "copy1"));
}

Vec BatchedToDelayed::act(int t) {
    int k = copy_of(t, B_);
    int tau = local_round(t, B_);
    Policy& c = *copies_[k];
    int through = std::min(c.screen().visible_through(tau), tau - 1);
    auto& buf = buffer_[k];
    while (released_[k] < through && released_[k] < static_cast<int>(buf.size()) &&
           buf[released_[k]].first.size() > 0) {
        const auto& e = buf[released_[k]];
        c.observe(released_[k] + 1, e.first, e.second);
        ++released_[k];
    }
    Vec x = c.act(tau);
    info_ = c.info();
    info_.thread = k + 1;
    last_copy_ = k;
    return x;
}

void BatchedToDelayed::observe(int s, const Vec& x, int y) {
    int k = copy_of(s, B_);
    int tau = local_round(s, B_);
    auto& buf = buffer_[k];
    if (static_cast<int>(buf.size()) < tau) buf.resize(tau);
    buf[tau - 1] = {x, y};
}

std::optional<int> BatchedToDelayed::effective_delay() const {
    auto d = copies_[last_copy_]->effective_delay();
    if (!d) return std::nullopt;
    // each local round of a copy spans at least one global round, and copies alternate batches
    return std::max(B_, *d + B_ * ((*d + B_ - 1) / B_));
}

PolicyPtr batched_to_delayed(const Policy& batched) { return std::make_unique<BatchedToDelayed>(batched); }

std::string format_double(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string join_vec(const Vec& x, char sep) {
    std::string s;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i) s.push_back(sep);
        s += format_double(x[i]);
    }
    return s;
}

void write_transcript_csv(std::ostream& os, const Transcript& tr, const RegretLedger& ledger, bool with_info,
                          bool with_candidate) {
    os << "t,x,y,principal_payoff,agent_payoff,cumulative_regret";
    if (with_info) os << ",epoch,thread,phase";
    if (with_candidate) os << ",phase,candidate_y";
    os << '\n';
    for (std::size_t i = 0; i < tr.rounds.size(); ++i) {
        const Round& r = tr.rounds[i];
        os << r.t << ',' << join_vec(r.x) << ',' << r.y << ',' << format_double(r.principal_payoff) << ','
           << format_double(r.agent_payoff) << ','
           << format_double(i < ledger.cumulative.size() ? ledger.cumulative[i] : 0.0);
        if (with_info) os << ',' << r.info.epoch << ',' << r.info.thread << ',' << r.info.phase;
        if (with_candidate) os << ',' << r.info.phase << ',' << r.info.candidate;
        os << '\n';
    }
}

}  // namespace stacklab
