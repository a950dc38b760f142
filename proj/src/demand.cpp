#include "stacklab/demand.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace stacklab::demand {

GameSpec fixed_value_game(double value) {
    if (!(value >= 0.0 && value <= 1.0)) throw ParameterError("fixed value must lie in [0,1]");
    GameSpec g;
    g.name = "fixed-value(" + format_double(value) + ")";
    g.space = StrategySpace::box(1);
    g.num_actions = 2;
    g.u = [](const Vec& x, int y) { return y == 1 ? x[0] : 0.0; };
    g.v = [value](const Vec& x, int y) { return y == 1 ? value - x[0] : 0.0; };
    return g;
}

void DemandCurve::validate() const {
    auto present = [](double c) { return std::isfinite(c) && c > 0.0; };
    if (!demand || !sample) throw ConfigError("demand curve " + name + ": missing demand or sampler");
    if (!present(L)) throw ConfigError("demand curve " + name + ": missing Lipschitz constant L");
    if (!present(C1)) throw ConfigError("demand curve " + name + ": missing curvature constant C1");
    if (!present(C2)) throw ConfigError("demand curve " + name + ": missing curvature constant C2");
    if (!(p_star > 0.0 && p_star < 1.0)) throw ConfigError("demand curve " + name + ": peak must lie in (0,1)");
    double prev = demand(0.0);
    for (int i = 1; i <= 256; ++i) {
        double d = demand(i / 256.0);
        if (d > prev + 1e-12) throw ConfigError("demand curve " + name + ": demand must be non-increasing");
        prev = d;
    }
}

DemandCurve linear_demand() {
    DemandCurve c;
    c.name = "linear";
    c.demand = [](double p) { return std::clamp(1.0 - p, 0.0, 1.0); };
    c.sample = [](Rng& r) { return r.uniform(); };
    c.L = 1.0;
    c.C1 = 1.0;
    c.C2 = 1.0;
    c.p_star = 0.5;
    return c;
}

bool in_eps_br(int a, double v, double p, double eps) {
    double buy = v - p;
    double best = std::max(buy, 0.0);
    return (a == 1 ? buy : 0.0) >= best - eps;
}

std::pair<int, int> purchase_envelope(double v, double p, double eps) {
    return {v > p + eps ? 1 : 0, v >= p - eps ? 1 : 0};
}

BatchedBinarySearch::BatchedBinarySearch(double gamma, int T) : gamma_(gamma), T_(T) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("batched-binary-search: gamma must lie in (0,1)");
    if (T < 1) throw ParameterError("batched-binary-search: T must be positive");
    first_batch_ = batch_len(0.25);
    current_batch_ = first_batch_;
}

int BatchedBinarySearch::batch_len(double eps) const { return required_delay(gamma_, eps); }

Vec BatchedBinarySearch::act(int t) {
    info_.candidate = -1;
    if (committed_) {
        info_.phase = "exploit";
        return {vhat_};
    }
    if (remaining_ > 0) {
        --remaining_;
        info_.phase = "exploit";
        return {vhat_};
    }
    if (pending_round_ >= 0) throw EpisodeError("batched-binary-search: query feedback not released before next query");
    if (!trace_.empty()) vhat_ = std::max(lo_ - eps_, 0.0);
    if (hi_ - lo_ <= 1.0 / T_) {
        committed_ = true;
        info_.phase = "exploit";
        return {vhat_};
    }
    eps_ = (hi_ - lo_) / 4.0;
    pending_price_ = (lo_ + hi_) / 2.0;
    pending_round_ = t;
    current_batch_ = batch_len(eps_);
    remaining_ = current_batch_;
    ++info_.epoch;
    info_.phase = "explore";
    return {pending_price_};
}

void BatchedBinarySearch::observe(int s, const Vec&, int y) {
    if (s != pending_round_) return;
    if (y == 1) lo_ = pending_price_ - eps_;
    else hi_ = pending_price_ + eps_;
    trace_.push_back({s, pending_price_, y, lo_, hi_});
    pending_round_ = -1;
}

std::optional<int> BatchedBinarySearch::effective_delay() const {
    if (committed_) return std::nullopt;
    return current_batch_;
}

Vec BinarySearchPolicy::act(int) {
    if (hi_ - lo_ <= 1.0 / T_) return {lo_};
    return {(lo_ + hi_) / 2.0};
}

void BinarySearchPolicy::observe(int, const Vec& x, int y) {
    if (hi_ - lo_ <= 1.0 / T_) return;
    if (y == 1) lo_ = x[0];
    else hi_ = x[0];
}

void set_bounds(ArmState& a, double delta, double T) {
    double n = static_cast<double>(std::max<long long>(a.pulls, 1));
    a.mean = a.reward_sum / n;
    double width = std::sqrt(2.0 * std::log(T) / n) + delta;
    a.lcb = a.mean - width;
    a.ucb = a.mean + width;
}

void update_confidence_bounds(std::vector<ArmState>& arms, const std::vector<Pull>& history, int t_effective,
                              double delta, double T) {
    for (ArmState& a : arms) {
        a.pulls = 0;
        a.reward_sum = 0.0;
    }
    int upto = std::min<int>(t_effective, static_cast<int>(history.size()));
    for (int s = 0; s < upto; ++s) {
        const Pull& p = history[s];
        if (p.arm < 0 || p.arm >= static_cast<int>(arms.size())) throw ParameterError("history names an unknown arm");
        ++arms[p.arm].pulls;
        arms[p.arm].reward_sum += p.reward;
    }
    for (ArmState& a : arms)
        if (!a.eliminated) set_bounds(a, delta, T);
}

SEDelayed::SEDelayed(int K, int D, double delta, int T) : D_(D), delta_(delta), T_(T) {
    if (K < 1) throw ParameterError("se-delayed: need at least one arm");
    if (D < 0) throw ParameterError("se-delayed: delay must be non-negative");
    if (!(delta >= 0.0)) throw ParameterError("se-delayed: delta must be non-negative");
    if (T < 1) throw ParameterError("se-delayed: T must be positive");
    arms_.resize(K);
    for (int i = 0; i < K; ++i) {
        arms_[i].price = static_cast<double>(i + 1) / K;
        set_bounds(arms_[i], delta_, T_);
        active_.push_back(i);
    }
    phase_ = active_;
    total_pulls_.assign(K, 0);
    last_m_.assign(K, 0);
    round_arm_.push_back(-1);
}

std::vector<int> SEDelayed::surviving() const { return active_; }

int SEDelayed::choose(int t) {
    if (t != static_cast<int>(round_arm_.size())) throw EpisodeError("se-delayed: rounds must be chosen in order");
    if (cursor_ == phase_.size()) {
        end_phase();
        phase_ = active_;
        cursor_ = 0;
    }
    int arm = phase_[cursor_++];
    round_arm_.push_back(arm);
    ++total_pulls_[arm];
    last_m_[arm] = surviving_count();
    return arm;
}

void SEDelayed::release(int s, double reward) {
    if (s < 1 || s >= static_cast<int>(round_arm_.size())) throw EpisodeError("se-delayed: feedback for an unplayed round");
    ArmState& a = arms_[round_arm_[s]];
    ++a.pulls;
    a.reward_sum += reward;
}

void SEDelayed::end_phase() {
    for (int i : active_) set_bounds(arms_[i], delta_, T_);
    if (on_update) on_update(arms_, active_);
    double best_lcb = -std::numeric_limits<double>::infinity();
    for (int i : active_) best_lcb = std::max(best_lcb, arms_[i].lcb);
    std::vector<int> keep;
    for (int i : active_) {
        if (arms_[i].ucb >= best_lcb) keep.push_back(i);
        else arms_[i].eliminated = true;
    }
    active_ = std::move(keep);
}

ShiftAdversary no_shift() {
    return [](int, int, const std::vector<Pull>&) { return 0.0; };
}

ShiftAdversary confusing_shift(const Vec& means, double delta) {
    int best = static_cast<int>(std::max_element(means.begin(), means.end()) - means.begin());
    return [best, delta](int, int arm, const std::vector<Pull>&) { return arm == best ? -delta : delta; };
}

BanditRun run_bernoulli_bandit(const Vec& means, int D, double delta, int T, const ShiftAdversary& adv,
                               std::uint64_t seed) {
    int K = static_cast<int>(means.size());
    SEDelayed se(K, D, delta, T);
    Rng rng = Rng(seed).substream("rewards");
    double top = *std::max_element(means.begin(), means.end());
    std::vector<int> best;
    for (int i = 0; i < K; ++i)
        if (means[i] == top) best.push_back(i);
    BanditRun run;
    std::size_t prev_count = K;
    se.on_update = [&](const std::vector<ArmState>& arms, const std::vector<int>& active) {
        bool any_best = false;
        for (int i : active) {
            ++run.bound_checks;
            if (arms[i].lcb > means[i] || arms[i].ucb < means[i]) ++run.bound_violations;
            if (means[i] == top) any_best = true;
        }
        if (!any_best) run.best_survived = false;
        if (active.size() > prev_count) run.monotone = false;
        prev_count = active.size();
    };
    std::vector<Pull> history;
    history.reserve(T);
    int lag = std::max(D, 1);
    int released = 0;
    for (int t = 1; t <= T; ++t) {
        while (released + 1 <= t - lag) {
            ++released;
            se.release(released, history[released - 1].reward);
        }
        int arm = se.choose(t);
        double shift = std::clamp(adv(t, arm, history), -delta, delta);
        double r = (rng.bernoulli(means[arm]) ? 1.0 : 0.0) + shift;
        history.push_back({arm, r});
        run.regret += top - means[arm];
    }
    if (static_cast<std::size_t>(se.surviving_count()) > prev_count) run.monotone = false;
    run.pulls = se.total_pulls();
    run.remaining_at_last_pull = se.remaining_at_last_pull();
    return run;
}

SEPricingPolicy::SEPricingPolicy(int K, int D, double delta, int T) : D_(D), se_(K, D, delta, T) {}

Vec SEPricingPolicy::act(int t) {
    int arm = se_.choose(t);
    info_.surviving = se_.surviving_count();
    info_.candidate = arm + 1;
    info_.phase = se_.surviving_count() == 1 ? "exploit" : "explore";
    return {se_.arms()[arm].price};
}

void SEPricingPolicy::observe(int s, const Vec& x, int y) { se_.release(s, y == 1 ? x[0] : 0.0); }

PricingParams pricing_params(const DemandCurve& curve, double gamma, int T) {
    curve.validate();
    if (T < 3) throw ParameterError("demand pricing: T must be at least 3");
    PricingParams p;
    double lt = std::log(static_cast<double>(T));
    p.K = std::max(2, static_cast<int>(std::floor(std::pow(T / lt, 0.25))));
    p.eps = 1.0 / (curve.L * T);
    p.D = required_delay(gamma, p.eps);
    p.delta = curve.L * p.eps;
    return p;
}

SEPricingPolicy demand_pricing_policy(const DemandCurve& curve, double gamma, int T) {
    PricingParams p = pricing_params(curve, gamma, T);
    return SEPricingPolicy(p.K, p.D, p.delta, T);
}

StochasticBuyer::StochasticBuyer(DemandCurve curve, EpsAdversarialAgent slack, TieMode mode)
    : curve_(std::move(curve)), slack_(std::move(slack)), mode_(mode) {}

StochasticBuyer StochasticBuyer::myopic(DemandCurve curve) {
    StochasticBuyer b(std::move(curve), EpsAdversarialAgent(0.0, TieMode::BestForPrincipal), TieMode::BestForPrincipal);
    b.slack_.reset();
    return b;
}

std::string StochasticBuyer::name() const {
    if (!slack_) return "stochastic-buyer(myopic)";
    return "stochastic-buyer(" + slack_->name() + ")";
}

AgentResponse StochasticBuyer::respond(const AgentContext& c) {
    double v = curve_.sample(c.rng);
    last_value_ = v;
    double p = c.x[0];
    int a;
    if (!slack_) {
        a = v >= p ? 1 : 0;
    } else {
        double eps = slack_->eps_for(c.policy);
        bool buy_ok = in_eps_br(1, v, p, eps);
        bool skip_ok = in_eps_br(0, v, p, eps);
        switch (mode_) {
            case TieMode::WorstForPrincipal: a = skip_ok ? 0 : 1; break;
            case TieMode::BestForPrincipal: a = buy_ok ? 1 : 0; break;
            case TieMode::BoundarySeeking: {
                int myopic = v >= p ? 1 : 0;
                int flip = 1 - myopic;
                a = (flip == 1 ? buy_ok : skip_ok) ? flip : myopic;
                break;
            }
            default: a = v >= p ? 1 : 0;
        }
    }
    return {a, a == 1 ? v - p : 0.0};
}

GameSpec pricing_game(const DemandCurve& curve) {
    double mean = 0.0;
    const int N = 4096;
    for (int i = 0; i < N; ++i) mean += curve.demand((i + 0.5) / N);
    mean /= N;
    GameSpec g;
    g.name = "pricing(" + curve.name + ")";
    g.space = StrategySpace::box(1);
    g.num_actions = 2;
    g.u = [](const Vec& x, int y) { return y == 1 ? x[0] : 0.0; };
    g.v = [mean](const Vec& x, int y) { return y == 1 ? mean - x[0] : 0.0; };
    return g;
}

namespace {
Vec grid_revenue(const DemandCurve& curve, int K) {
    if (K < 1) throw ParameterError("price grid needs K >= 1");
    Vec f(K);
    for (int i = 1; i <= K; ++i) f[i - 1] = curve.revenue(static_cast<double>(i) / K);
    return f;
}
}  // namespace

double discretization_gap(const DemandCurve& curve, int K) {
    Vec f = grid_revenue(curve, K);
    return curve.revenue(curve.p_star) - *std::max_element(f.begin(), f.end());
}

double inverse_gap_sum(const DemandCurve& curve, int K) {
    Vec f = grid_revenue(curve, K);
    double top = *std::max_element(f.begin(), f.end());
    double s = 0.0;
    for (double fi : f)
        if (top - fi > 1e-15) s += 1.0 / (top - fi);
    return s;
}

RegretLedger pricing_regret(const Transcript& tr, const DemandCurve& curve) {
    return stackelberg_regret(tr, curve.revenue(curve.p_star), false);
}

void write_pricing_csv(std::ostream& os, const Transcript& tr, const RegretLedger& ledger) {
    os << "t,price,bought,regret,surviving_arms\n";
    for (std::size_t i = 0; i < tr.rounds.size(); ++i) {
        const Round& r = tr.rounds[i];
        os << r.t << ',' << format_double(r.x[0]) << ',' << r.y << ',' << format_double(ledger.cumulative[i]) << ','
           << r.info.surviving << '\n';
    }
}

}  // namespace stacklab::demand
