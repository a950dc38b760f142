#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stacklab {

using Vec = std::vector<double>;

class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Missing or inconsistent configuration keys.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class EpisodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Seeded generator with named substreams so that paired runs stay aligned.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    Rng substream(std::string_view name) const;
    std::uint64_t seed() const { return seed_; }

    double uniform();
    double uniform(double lo, double hi);
    double normal();
    int uniform_int(int n);
    bool bernoulli(double p);
    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view name);

enum class SpaceKind { SimplexDownward, Box, BoxedSimplex, Simplex, Convex };

/// Principal strategy space. Convex spaces carry a membership test.
struct StrategySpace {
    SpaceKind kind = SpaceKind::SimplexDownward;
    int dim = 1;
    Vec caps;
    std::function<bool(const Vec&)> member;

    static StrategySpace simplex_downward(int n);
    static StrategySpace box(int n);
    static StrategySpace boxed_simplex(Vec caps);
    static StrategySpace simplex(int n);
    static StrategySpace convex(int n, std::function<bool(const Vec&)> member);

    bool contains(const Vec& x, double tol = 1e-9) const;
    bool downward_closed() const;
    std::string name() const;
};

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
double norm_inf(const Vec& a);
double dist_inf(const Vec& a, const Vec& b);
double dist2(const Vec& a, const Vec& b);

struct GameSpec {
    std::string name;
    StrategySpace space;
    int num_actions = 1;
    std::function<double(const Vec&, int)> u;
    std::function<double(const Vec&, int)> v;

    void validate() const;
};

/// Best responses with ties broken for the principal.
std::vector<int> best_response_set(const GameSpec& g, const Vec& x, double eps = 0.0);
int best_response(const GameSpec& g, const Vec& x);

enum class TieMode { WorstForPrincipal, BestForPrincipal, BoundarySeeking };

TieMode parse_tie_mode(const std::string& s);
std::string to_string(TieMode m);

int eps_adversarial_response(const GameSpec& g, const Vec& x, double eps, TieMode mode);

struct Screen {
    enum class Kind { None, Delay, Batch };
    Kind kind = Kind::None;
    int rounds = 0;

    static Screen none() { return {}; }
    static Screen delay(int d);
    static Screen batch(int b);
    /// Last round whose feedback may be seen before acting in round t.
    int visible_through(int t) const;
};

struct RoundInfo {
    int epoch = 0;
    int thread = 0;
    std::string phase;
    int candidate = -1;
    int surviving = -1;
};

/// A principal policy. The runner releases feedback according to screen().
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual Screen screen() const { return Screen::none(); }
    virtual Vec act(int t) = 0;
    virtual void observe(int s, const Vec& x, int y) = 0;
    virtual std::unique_ptr<Policy> clone() const = 0;
    virtual RoundInfo info() const { return {}; }
    /// Rounds until feedback of the round just played can affect play; empty if never.
    virtual std::optional<int> effective_delay() const;
    /// Seed hook for randomized policies; called once before round 1.
    virtual void reseed(std::uint64_t) {}
};

using PolicyPtr = std::unique_ptr<Policy>;

class ConstantPolicy : public Policy {
public:
    explicit ConstantPolicy(Vec x) : x_(std::move(x)) {}
    std::string name() const override { return "constant"; }
    Vec act(int) override { return x_; }
    void observe(int, const Vec&, int) override {}
    PolicyPtr clone() const override { return std::make_unique<ConstantPolicy>(*this); }
    std::optional<int> effective_delay() const override { return std::nullopt; }

private:
    Vec x_;
};

/// Plays table[y_{t-D}] once that feedback is visible, and a default before.
class DelayedResponsePolicy : public Policy {
public:
    DelayedResponsePolicy(int delay, Vec initial, std::vector<Vec> table);
    std::string name() const override { return "delayed-response"; }
    Screen screen() const override { return Screen::delay(delay_); }
    Vec act(int t) override;
    void observe(int s, const Vec& x, int y) override;
    PolicyPtr clone() const override { return std::make_unique<DelayedResponsePolicy>(*this); }

private:
    int delay_;
    Vec initial_;
    std::vector<Vec> table_;
    std::vector<int> seen_;
};

struct AgentContext {
    int t;
    const Vec& x;
    const GameSpec& game;
    const Policy& policy;
    Rng& rng;
};

struct AgentResponse {
    int y;
    double agent_payoff;
};

class Agent {
public:
    virtual ~Agent() = default;
    virtual std::string name() const = 0;
    virtual AgentResponse respond(const AgentContext& c) = 0;
    virtual std::unique_ptr<Agent> clone() const = 0;
};

using AgentPtr = std::unique_ptr<Agent>;

class MyopicAgent : public Agent {
public:
    std::string name() const override { return "myopic"; }
    AgentResponse respond(const AgentContext& c) override;
    AgentPtr clone() const override { return std::make_unique<MyopicAgent>(*this); }
};

/// Responds inside BR^eps. The slack is either fixed or induced by the policy delay.
class EpsAdversarialAgent : public Agent {
public:
    EpsAdversarialAgent(double eps, TieMode mode);
    /// Slack gamma^D/(1-gamma) for the policy's effective delay D, floor when feedback is unused.
    static EpsAdversarialAgent induced(double gamma, TieMode mode, double floor_eps = 0.0);
    std::string name() const override;
    AgentResponse respond(const AgentContext& c) override;
    AgentPtr clone() const override { return std::make_unique<EpsAdversarialAgent>(*this); }
    double eps_for(const Policy& p) const;

private:
    double eps_ = 0.0;
    TieMode mode_;
    std::optional<double> gamma_;
    double floor_eps_ = 0.0;
};

class ScriptedAgent : public Agent {
public:
    using Program = std::function<int(const AgentContext&)>;
    explicit ScriptedAgent(Program p, std::string label = "scripted")
        : program_(std::move(p)), label_(std::move(label)) {}
    std::string name() const override { return label_; }
    AgentResponse respond(const AgentContext& c) override;
    AgentPtr clone() const override { return std::make_unique<ScriptedAgent>(*this); }

private:
    Program program_;
    std::string label_;
};

/// Plays a fixed action sequence, then myopic when it runs out.
AgentPtr sequence_agent(std::vector<int> ys);

struct PlanResult {
    double value = 0.0;
    std::vector<int> actions;
};

/// Exact maximization of sum_t gamma^(t-1) v_t over agent action sequences for horizon h.
PlanResult plan_discounted(const GameSpec& g, const Policy& policy, double gamma, int horizon);

/// gamma-discounting agent that plans exhaustively over the first h rounds, myopic after.
class ExhaustiveDiscountedAgent : public Agent {
public:
    ExhaustiveDiscountedAgent(double gamma, int horizon, const Policy& principal);
    ExhaustiveDiscountedAgent(const ExhaustiveDiscountedAgent& o);
    std::string name() const override { return "exhaustive-discounted"; }
    AgentResponse respond(const AgentContext& c) override;
    AgentPtr clone() const override { return std::make_unique<ExhaustiveDiscountedAgent>(*this); }
    const std::vector<int>& plan() const { return plan_; }

private:
    double gamma_;
    int horizon_;
    PolicyPtr principal_;
    std::vector<int> plan_;
};

struct Round {
    int t = 0;
    Vec x;
    int y = 0;
    double principal_payoff = 0.0;
    double agent_payoff = 0.0;
    RoundInfo info;
};

struct Transcript {
    std::vector<Round> rounds;
    std::uint64_t seed = 0;
    std::string algorithm;
    std::string agent;
    std::vector<std::pair<std::string, std::string>> metadata;
};

/// Steps a policy against feedback release rules, one round at a time.
class EpisodeStepper {
public:
    EpisodeStepper(const GameSpec& g, PolicyPtr policy);
    EpisodeStepper(const EpisodeStepper& o);
    EpisodeStepper& operator=(const EpisodeStepper&) = delete;

    /// Principal action for the next round, feedback released per the screen.
    const Vec& next_action();
    void record(int y);
    int round() const { return t_; }
    const Policy& policy() const { return *policy_; }
    Policy& policy() { return *policy_; }
    const std::vector<int>& responses() const { return ys_; }
    const std::vector<Vec>& actions() const { return xs_; }

private:
    const GameSpec* game_;
    PolicyPtr policy_;
    int t_ = 0;
    int released_ = 0;
    bool pending_ = false;
    std::vector<Vec> xs_;
    std::vector<int> ys_;
};

Transcript run_episode(Policy& policy, Agent& agent, const GameSpec& game, int T, std::uint64_t seed);

struct RegretLedger {
    double benchmark_value = 0.0;
    double cumulative_regret = 0.0;
    std::vector<double> per_round;
    std::vector<double> cumulative;
};

/// Stackelberg regret against a per-round benchmark.
/// strict rejects benchmarks below a realized payoff, which signals a wrong oracle
/// when the agent best responds exactly.
RegretLedger stackelberg_regret(const Transcript& tr, double benchmark, bool strict = true);

double discounted_horizon(double gamma);
double induced_epsilon(double gamma, int D);
int required_delay(double gamma, double eps);

/// Runs two independent copies on alternating batches of a B-batched policy.
class BatchedToDelayed : public Policy {
public:
    explicit BatchedToDelayed(const Policy& inner);
    std::string name() const override;
    Screen screen() const override { return Screen::delay(B_); }
    Vec act(int t) override;
    void observe(int s, const Vec& x, int y) override;
    PolicyPtr clone() const override { return std::make_unique<BatchedToDelayed>(*this); }
    BatchedToDelayed(const BatchedToDelayed& o);
    RoundInfo info() const override { return info_; }
    std::optional<int> effective_delay() const override;
    void reseed(std::uint64_t s) override;

    static int copy_of(int t, int B) { return ((t - 1) / B) % 2; }
    static int local_round(int t, int B) { return (((t - 1) / B) / 2) * B + (t - 1) % B + 1; }

private:
    int B_;
    PolicyPtr copies_[2];
    std::vector<std::pair<Vec, int>> buffer_[2];
    int released_[2] = {0, 0};
    RoundInfo info_;
    int last_copy_ = 0;
};

PolicyPtr batched_to_delayed(const Policy& batched);

std::string format_double(double v);
std::string join_vec(const Vec& x, char sep = ';');
void write_transcript_csv(std::ostream& os, const Transcript& tr, const RegretLedger& ledger,
                          bool with_info = false, bool with_candidate = false);

}  // namespace stacklab
