#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stacklab/core.hpp"

namespace stacklab::classify {

/// Agent type a = (x, y, f) with quadratic manipulation cost f(z) = (alpha/2)|z|^2.
struct AgentType {
    Vec x;
    int y = 1;
    double alpha = 1.0;
};

enum class LossKind { Logistic, Hinge };
LossKind parse_loss(const std::string& s);
std::string to_string(LossKind k);

double loss(LossKind k, const Vec& theta, const Vec& xhat, int y);

/// <theta, xhat> - f(xhat - x) for strategic rounds; 0 or -inf otherwise.
double agent_payoff(const Vec& theta, const Vec& xhat, const AgentType& a);

/// Unique best response: x + theta/alpha when y = -1, x when y = +1.
Vec agent_best_response(const Vec& theta, const AgentType& a);

/// Loss of theta against the best-responding agent.
double strategic_loss(LossKind k, const Vec& theta, const AgentType& a);
/// A subgradient of theta -> strategic_loss.
Vec strategic_loss_gradient(LossKind k, const Vec& theta, const AgentType& a);

enum class Deviation { LossMax, LossMin, Random };
Deviation parse_deviation(const std::string& s);
std::string to_string(Deviation d);

/// A point of BR^eps(theta): best response moved by sqrt(2 eps/alpha) (or less, for Random).
Vec eps_agent_response(const Vec& theta, const AgentType& a, double eps, Deviation dev, Rng& rng);

Vec project_ball(const Vec& w, double radius);
Vec random_unit_vector(int d, Rng& rng);

struct Domain {
    std::string kind = "ball";
    double radius = 1.0;
    /// Euclidean projection onto the domain scaled by shrink.
    Vec project(const Vec& w, double shrink) const;
};

struct GDwoGParams {
    int d = 2;
    double R = 1.0;
    double C = 1.0;
    double L = 1.0;
    int T = 1;
    /// Overrides of the default exploration radius and step size.
    std::optional<double> delta;
    std::optional<double> eta;
};

/// One-point bandit gradient descent on a ball domain.
class GDwoG {
public:
    GDwoG(GDwoGParams p, Domain S = {});
    Vec query(Rng& rng);
    void update(double cost);

    const Vec& iterate() const { return v_; }
    const Vec& direction() const { return s_; }
    double delta() const { return delta_; }
    double eta() const { return eta_; }
    int steps() const { return steps_; }
    const GDwoGParams& params() const { return p_; }

private:
    GDwoGParams p_;
    Domain S_;
    double delta_;
    double eta_;
    Vec v_;
    Vec s_;
    bool pending_ = false;
    int steps_ = 0;
};

double gdwog_regret_bound(const GDwoGParams& p);

using CostFn = std::function<double(const Vec&)>;
/// Perturbed report of the cost c at query u, with direction s.
using Perturbation = std::function<double(const Vec& u, const Vec& s, double c, Rng& rng)>;

Perturbation no_perturbation();
/// c + lambda sign(<s, e>): aligns the perturbation with the sampling direction.
Perturbation sign_flip_perturbation(Vec e, double lambda);
Perturbation uniform_perturbation(double lambda);

struct GDwoGRun {
    double cost_sum = 0.0;
    double regret = 0.0;
    std::vector<Vec> queries;
};

/// Runs GDwoG on a fixed cost with known minimum value over the domain.
GDwoGRun run_gdwog(const CostFn& c, double min_value, GDwoGParams p, std::uint64_t seed,
                   const Perturbation& perturb = no_perturbation(), bool keep_queries = false);

struct BiasEstimate {
    Vec mean;
    Vec target;
    double bias = 0.0;
    double sigma = 0.0;
    double bound = 0.0;
    long long samples = 0;
};

/// Monte Carlo bias of the one-point estimator (d/delta) c~(v + delta s) s against grad_smoothed(v).
BiasEstimate gradient_bias(const CostFn& c, const Vec& grad_smoothed, const Vec& v, double delta, double lambda,
                           const Perturbation& perturb, long long N, std::uint64_t seed);

/// i.i.d. agent types: labels Bernoulli(p_pos), features y * mean_shift/sqrt(d) + sigma N(0, I), clipped to R.
struct TypeGenerator {
    int d = 3;
    double R = 1.0;
    double alpha = 1.0;
    double p_pos = 0.5;
    double mean_shift = 0.5;
    double sigma = 0.5;
    std::vector<AgentType> draw(int T, std::uint64_t seed) const;
};

struct NonmyopicParams {
    int d = 3;
    double R = 1.0;
    double alpha = 1.0;
    double gamma = 0.8;
    int T = 1;
    LossKind loss = LossKind::Logistic;
    std::optional<int> copies;
};

/// D parallel GDwoG copies, round t served by copy ((t-1) mod D) + 1.
class NonmyopicClassifier {
public:
    explicit NonmyopicClassifier(NonmyopicParams p, std::uint64_t seed = 0);
    Vec act(int t);
    void observe(int t, double loss);

    int copies() const { return D_; }
    double eps() const { return eps_; }
    /// Copy and step index (both from 1) of round t.
    static std::pair<int, int> route(int t, int D);
    const GDwoG& copy(int r) const { return copies_.at(r - 1); }
    bool degenerate() const { return degenerate_; }
    /// Payoff scale used to convert delays into agent slack.
    double payoff_scale() const;
    const NonmyopicParams& params() const { return p_; }

private:
    NonmyopicParams p_;
    int D_ = 1;
    double eps_ = 0.0;
    bool degenerate_ = false;
    std::vector<GDwoG> copies_;
    std::vector<Rng> rngs_;
};

struct AgentModel {
    enum class Kind { Exact, Fixed, Induced };
    Kind kind = Kind::Exact;
    double eps = 0.0;
    Deviation deviation = Deviation::LossMax;
};

struct ClassRound {
    int t = 0;
    int copy = 1;
    Vec theta;
    Vec xhat;
    double loss = 0.0;
};

struct ClassTranscript {
    std::vector<ClassRound> rounds;
    std::vector<AgentType> types;
    LossKind loss = LossKind::Logistic;
    double agent_eps = 0.0;
};

ClassTranscript run_classification(NonmyopicClassifier& policy, const std::vector<AgentType>& types,
                                   const AgentModel& agent, std::uint64_t seed);

struct Benchmark {
    double value = 0.0;
    Vec theta;
    double grid_value = 0.0;
    double descent_value = 0.0;
};

/// min over |theta| <= R of sum_t strategic_loss, by a coarse grid plus multi-start projected descent.
Benchmark best_fixed_classifier(LossKind k, const std::vector<AgentType>& types, const std::vector<int>& rounds,
                                double R, int grid_points = 50, int starts = 4, int iters = 300);

struct ClassRegret {
    double total = 0.0;
    double benchmark = 0.0;
    std::vector<double> cumulative;
};

ClassRegret classification_regret(const ClassTranscript& tr, double R);
/// Regret of the subsequence given by 0-based round indices, against its own best fixed classifier.
double subsequence_regret(const ClassTranscript& tr, const std::vector<int>& rounds, double R);

double nonmyopic_regret_bound(const NonmyopicParams& p);

/// Columns t,copy,theta,loss,regret.
void write_classification_csv(std::ostream& os, const ClassTranscript& tr, const ClassRegret& reg);

}  // namespace stacklab::classify
