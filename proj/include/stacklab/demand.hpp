#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stacklab/core.hpp"

namespace stacklab::demand {

/// Posted price game for a buyer with fixed value: x = (p), y = 1 buys.
GameSpec fixed_value_game(double value);

/// Stochastic buyer values with demand d(p) = Pr(v >= p) and revenue f(p) = p d(p).
struct DemandCurve {
    std::string name;
    std::function<double(double)> demand;
    std::function<double(Rng&)> sample;
    double L = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double p_star = 0.5;

    double revenue(double p) const { return p * demand(p); }
    void validate() const;
};

/// d(p) = 1 - p, values uniform on [0,1].
DemandCurve linear_demand();

/// Whether purchase decision a lies in BR^eps(p) for a buyer with value v.
bool in_eps_br(int a, double v, double p, double eps);

/// Bracket implied by an eps-approximate purchase decision: 1{v > p+eps} <= a <= 1{v >= p-eps}.
std::pair<int, int> purchase_envelope(double v, double p, double eps);

class BatchedBinarySearch : public Policy {
public:
    BatchedBinarySearch(double gamma, int T);
    std::string name() const override { return "batched-binary-search"; }
    Screen screen() const override { return Screen::delay(first_batch_); }
    Vec act(int t) override;
    void observe(int s, const Vec& x, int y) override;
    PolicyPtr clone() const override { return std::make_unique<BatchedBinarySearch>(*this); }
    RoundInfo info() const override { return info_; }
    std::optional<int> effective_delay() const override;

    struct Step {
        int round;
        double price;
        int bought;
        double lo, hi;
    };
    const std::vector<Step>& trace() const { return trace_; }
    double lower() const { return lo_; }
    double upper() const { return hi_; }
    bool committed() const { return committed_; }
    int batch_len(double eps) const;

private:
    double gamma_;
    int T_;
    double lo_ = 0.0, hi_ = 1.0, vhat_ = 0.0, eps_ = 0.25;
    int first_batch_;
    int current_batch_;
    int remaining_ = 0;
    int pending_round_ = -1;
    double pending_price_ = 0.0;
    bool committed_ = false;
    std::vector<Step> trace_;
    RoundInfo info_;
};

/// Undelayed binary search that commits to the lower end once the interval is below 1/T.
class BinarySearchPolicy : public Policy {
public:
    explicit BinarySearchPolicy(int T) : T_(T) {}
    std::string name() const override { return "binary-search"; }
    Vec act(int t) override;
    void observe(int s, const Vec& x, int y) override;
    PolicyPtr clone() const override { return std::make_unique<BinarySearchPolicy>(*this); }

private:
    int T_;
    double lo_ = 0.0, hi_ = 1.0;
};

struct ArmState {
    double price = 0.0;
    long long pulls = 0;
    double reward_sum = 0.0;
    double mean = 0.0;
    double lcb = 0.0;
    double ucb = 0.0;
    bool eliminated = false;
};

struct Pull {
    int arm;
    double reward;
};

/// Recomputes bounds from the history prefix through round t_effective (1-based).
void update_confidence_bounds(std::vector<ArmState>& arms, const std::vector<Pull>& history, int t_effective,
                              double delta, double T);

/// Bound formula shared by the recompute and the incremental paths.
void set_bounds(ArmState& a, double delta, double T);

/// Successive elimination with D-delayed feedback and perturbation slack delta.
class SEDelayed {
public:
    SEDelayed(int K, int D, double delta, int T);

    /// Arm for round t. Only feedback released so far is used.
    int choose(int t);
    /// Feedback of round s becomes visible.
    void release(int s, double reward);

    int K() const { return static_cast<int>(arms_.size()); }
    int delay() const { return D_; }
    const std::vector<ArmState>& arms() const { return arms_; }
    std::vector<int> surviving() const;
    int surviving_count() const { return static_cast<int>(active_.size()); }
    const std::vector<long long>& total_pulls() const { return total_pulls_; }
    /// Remaining-arm count at each arm's last pull.
    const std::vector<int>& remaining_at_last_pull() const { return last_m_; }
    /// Invoked at every elimination step with the fresh bounds.
    std::function<void(const std::vector<ArmState>&, const std::vector<int>&)> on_update;

private:
    void end_phase();
    int D_;
    double delta_;
    int T_;
    std::vector<ArmState> arms_;
    std::vector<int> active_;
    std::vector<int> phase_;
    std::size_t cursor_ = 0;
    std::vector<int> round_arm_;
    std::vector<long long> total_pulls_;
    std::vector<int> last_m_;
};

/// Reward shift in [-delta, delta], chosen from the full history.
using ShiftAdversary = std::function<double(int t, int arm, const std::vector<Pull>& history)>;

ShiftAdversary no_shift();
/// Pushes the best arm down and every other arm up by delta.
ShiftAdversary confusing_shift(const Vec& means, double delta);

struct BanditRun {
    double regret = 0.0;
    std::vector<long long> pulls;
    std::vector<int> remaining_at_last_pull;
    long long bound_checks = 0;
    long long bound_violations = 0;
    bool best_survived = true;
    bool monotone = true;
};

/// Bernoulli bandit run of SE-Delayed. Pseudo-regret uses the true means.
BanditRun run_bernoulli_bandit(const Vec& means, int D, double delta, int T, const ShiftAdversary& adv,
                               std::uint64_t seed);

/// SE-Delayed over posted prices i/K, as a D-delayed principal policy.
class SEPricingPolicy : public Policy {
public:
    SEPricingPolicy(int K, int D, double delta, int T);
    std::string name() const override { return "se-delayed-pricing"; }
    Screen screen() const override { return D_ > 0 ? Screen::delay(D_) : Screen::none(); }
    Vec act(int t) override;
    void observe(int s, const Vec& x, int y) override;
    PolicyPtr clone() const override { return std::make_unique<SEPricingPolicy>(*this); }
    RoundInfo info() const override { return info_; }
    std::optional<int> effective_delay() const override { return D_; }

    const SEDelayed& core() const { return se_; }
    int K() const { return se_.K(); }

private:
    int D_;
    SEDelayed se_;
    RoundInfo info_;
};

struct PricingParams {
    int K;
    int D;
    double eps;
    double delta;
};

/// K = max(2, floor((T/ln T)^(1/4))), eps = 1/(LT), D = ceil(T_gamma ln(T_gamma/eps)), delta = L eps.
PricingParams pricing_params(const DemandCurve& curve, double gamma, int T);
SEPricingPolicy demand_pricing_policy(const DemandCurve& curve, double gamma, int T);

/// Buyer drawing a fresh value each round and answering within BR^eps.
class StochasticBuyer : public Agent {
public:
    StochasticBuyer(DemandCurve curve, EpsAdversarialAgent slack, TieMode mode);
    static StochasticBuyer myopic(DemandCurve curve);
    std::string name() const override;
    AgentResponse respond(const AgentContext& c) override;
    AgentPtr clone() const override { return std::make_unique<StochasticBuyer>(*this); }
    double last_value() const { return last_value_; }

private:
    DemandCurve curve_;
    std::optional<EpsAdversarialAgent> slack_;
    TieMode mode_;
    double last_value_ = 0.0;
};

/// Game spec with u = p y and v the expected buyer payoff y (E[v] - p).
/// StochasticBuyer evaluates its own realized payoff instead.
GameSpec pricing_game(const DemandCurve& curve);

/// f(p*) - max_i f(i/K) on the grid {i/K : 1 <= i <= K}.
double discretization_gap(const DemandCurve& curve, int K);
/// Sum of 1/Delta_i over grid prices with positive gap.
double inverse_gap_sum(const DemandCurve& curve, int K);

/// Regret against T f(p*) from realized revenue.
RegretLedger pricing_regret(const Transcript& tr, const DemandCurve& curve);

/// Columns t,price,bought,regret,surviving_arms.
void write_pricing_csv(std::ostream& os, const Transcript& tr, const RegretLedger& ledger);

}  // namespace stacklab::demand
