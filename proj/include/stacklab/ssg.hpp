#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stacklab/core.hpp"

namespace stacklab::ssg {

/// Monotone utility curve on [0,1].
struct Curve {
    enum class Kind { Linear, Logistic, PiecewiseLinear };
    Kind kind = Kind::Linear;
    // linear: a + b*s
    double a = 0.0, b = 0.0;
    // logistic: base + scale / (1 + exp(-k (s - c)))
    double base = 0.0, scale = 0.0, k = 0.0, c = 0.0;
    // piecewise linear through (knots[i], values[i]), knots cover [0,1]
    Vec knots, values;

    static Curve linear(double intercept, double slope);
    static Curve logistic(double base, double scale, double k, double center);
    static Curve piecewise(Vec knots, Vec values);

    double operator()(double s) const;
    /// Solves curve(s) = w. Linear and logistic use closed forms, piecewise uses bisection.
    /// Returns NaN when w is outside the curve's range on [0,1] (linear extends analytically).
    double inverse(double w) const;
    bool closed_form_inverse() const { return kind != Kind::PiecewiseLinear; }
    /// Extreme difference quotients over [0,1] (exact for linear, dense sampling otherwise).
    std::pair<double, double> slope_range() const;
};

class SecurityGame {
public:
    SecurityGame(std::vector<Curve> u, std::vector<Curve> v, StrategySpace space,
                 std::optional<double> C = std::nullopt, std::optional<double> W = std::nullopt);

    int n() const { return n_; }
    const std::vector<Curve>& u_curves() const { return u_; }
    const std::vector<Curve>& v_curves() const { return v_; }
    const StrategySpace& space() const { return space_; }
    double C() const { return C_; }
    double W() const { return W_; }

    double u(const Vec& x, int y) const { return u_[y](x[y]); }
    double v(const Vec& x, int y) const { return v_[y](x[y]); }
    /// Least coverage s in [0,1] with v^y(s) <= w; +inf if none.
    double coverage_needed(int y, double w) const;
    /// Largest x_y over the best-response region of y; negative when that region is empty.
    double region_width(int y) const;
    GameSpec spec() const;

private:
    int n_;
    std::vector<Curve> u_, v_;
    StrategySpace space_;
    double C_ = 1.0;
    double W_ = 1.0;
};

/// Linear game v^y = a_y - b_y x_y, u^y = c_y + d_y x_y.
SecurityGame linear_game(const Vec& v_intercepts, const Vec& v_slopes, const Vec& u_intercepts, const Vec& u_slopes,
                         StrategySpace space);

/// Random linear game on the downward simplex, slopes in [1/C0, C0].
SecurityGame random_linear_game(int n, Rng& rng, double C0 = 2.0);

/// Two-target game on the quarter disk used as a non-polyhedral example.
SecurityGame disk_game();

class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyRegion : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Centroid of {x in X : lo <= x <= hi}. Exact for boxes, hit-and-run otherwise.
class CentroidEstimator {
public:
    explicit CentroidEstimator(std::uint64_t seed = 1, int samples = 4096, int burn_in = 16);
    Vec centroid(const StrategySpace& space, const Vec& lo, const Vec& hi);
    /// Uniform-ish draw from the same region via the chain (for volume diagnostics).
    Vec draw(const StrategySpace& space, const Vec& lo, const Vec& hi);
    int samples() const { return samples_; }

private:
    void warm_start(const StrategySpace& space, const Vec& lo, const Vec& hi);
    void step(const StrategySpace& space, const Vec& lo, const Vec& hi);
    Rng rng_;
    int samples_;
    int burn_in_;
    Vec state_;
};

Vec centroid(const StrategySpace& space, const Vec& lo, const Vec& hi, Rng& rng, int samples = 4096);

struct ClinchOptions {
    int centroid_samples = 4096;
    double safety = 4.0;
    bool enforce_accuracy = true;
    bool tighten_for_centroid = true;
};

using Oracle = std::function<int(const Vec&)>;

/// Resumable Clinch search followed by mass conservation.
class ClinchSearch {
public:
    ClinchSearch(std::shared_ptr<const SecurityGame> game, double delta, Vec lo, Vec hi, double eps,
                 std::uint64_t seed, ClinchOptions opt = {});

    bool done() const { return stage_ == Stage::Done; }
    bool in_main_loop() const { return stage_ == Stage::Main; }
    const Vec& query();
    void respond(int y);
    const Vec& result() const;

    int queries() const { return queries_; }
    int main_iterations() const { return iterations_; }
    double lambda() const { return lambda_; }
    double delta() const { return delta_; }
    double eps() const { return eps_; }
    double tau() const { return tau_; }
    double loop_guard() const { return guard_; }
    int query_budget() const { return budget_; }
    const Vec& lower() const { return lo_; }
    const Vec& upper() const { return hi_; }
    const std::vector<bool>& active() const { return active_; }
    const Vec& last_main_query() const { return x_; }

private:
    enum class Stage { Main, Conserve, Done };
    void lock_coordinates();
    void advance_conserve();

    std::shared_ptr<const SecurityGame> game_;
    double delta_, lambda_, eps_, tau_;
    Vec lo_, hi_;
    std::vector<bool> active_;
    ClinchOptions opt_;
    CentroidEstimator cent_;
    Stage stage_ = Stage::Main;
    bool pending_ = false;
    Vec q_;
    Vec x_;
    int iterations_ = 0;
    int queries_ = 0;
    double guard_ = 0.0;
    int budget_ = 0;
    int cm_target_ = 0;
    double cm_l_ = 0.0, cm_u_ = 0.0, cm_m_ = 0.0;
    Vec xhat_;
};

struct ClinchResult {
    Vec x;
    int queries = 0;
    int main_iterations = 0;
};

ClinchResult clinch(const Oracle& oracle, const SecurityGame& game, double delta, const Vec& lo, const Vec& hi,
                    double eps, std::uint64_t seed = 1, ClinchOptions opt = {});

struct ConserveResult {
    Vec x;
    int queries = 0;
};

ConserveResult conserve_mass(const Vec& x, double lambda, const Vec& lo, const Oracle& oracle);

/// x - (W lambda / 2) e_yhat with yhat the principal's favourite among heavily covered targets.
Vec perturb(const Vec& xhat, double lambda, const SecurityGame& game);
int perturb_target(const Vec& xhat, const SecurityGame& game);

struct SimplexResult {
    Vec x;
    Vec xhat;
    int iterations = 0;
    Vec residual_mass;
};

SimplexResult clinch_simplex(const Oracle& oracle, const SecurityGame& game, double lambda);
int clinch_simplex_iterations(const SecurityGame& game, double lambda);

/// Runs Clinch at delta = 2^{-8Ln}/3 and rounds to the dyadic grid.
Vec exact_round(const Vec& xhat, int L_bits, int n);
Vec exact_search(const Oracle& oracle, const SecurityGame& game, int L_bits, std::uint64_t seed = 1);

class BatchedClinch : public Policy {
public:
    BatchedClinch(const SecurityGame& game, int T, double gamma, ClinchOptions opt = {});
    std::string name() const override { return "batched-clinch"; }
    Screen screen() const override { return Screen::delay(min_batch_); }
    Vec act(int t) override;
    void observe(int s, const Vec& x, int y) override;
    PolicyPtr clone() const override { return std::make_unique<BatchedClinch>(*this); }
    RoundInfo info() const override { return info_; }
    std::optional<int> effective_delay() const override { return batch_len(std::min(epoch_, epochs_)); }
    void reseed(std::uint64_t s) override { seed_ = s; start_epoch(); }

    int epochs() const { return epochs_; }
    int batch_len(int epoch) const;
    int epoch() const { return epoch_; }
    bool committed() const { return committed_; }
    const Vec& current_estimate() const { return xtilde_; }
    int explore_rounds() const { return explore_rounds_; }
    int perturb_failures() const { return perturb_failures_; }

private:
    void start_epoch();
    std::shared_ptr<const SecurityGame> game_;
    int T_;
    double gamma_;
    ClinchOptions opt_;
    int epochs_;
    int min_batch_;
    int epoch_ = 1;
    bool committed_ = false;
    Vec xtilde_;
    Vec box_lo_, box_hi_;
    std::optional<ClinchSearch> search_;
    int remaining_ = 0;
    int pending_round_ = -1;
    std::uint64_t seed_ = 1;
    RoundInfo info_;
    int explore_rounds_ = 0;
    int perturb_failures_ = 0;
};

class MultiThreadedClinch : public Policy {
public:
    MultiThreadedClinch(const SecurityGame& game, int T, ClinchOptions opt = {});
    std::string name() const override { return "multithreaded-clinch"; }
    Vec act(int t) override;
    void observe(int s, const Vec& x, int y) override;
    PolicyPtr clone() const override { return std::make_unique<MultiThreadedClinch>(*this); }
    RoundInfo info() const override { return info_; }
    std::optional<int> effective_delay() const override;
    void reseed(std::uint64_t s) override;

    static int thread_of(int t);
    int threads() const { return static_cast<int>(threads_.size()); }
    /// Counts exploit rounds whose intersected box misses the reference point.
    void set_reference(Vec xstar) { reference_ = std::move(xstar); }
    int containment_failures() const { return containment_failures_; }
    int exploit_rounds() const { return exploit_rounds_; }
    std::pair<Vec, Vec> intersection_box() const;
    std::pair<Vec, Vec> thread_box(int r) const { return {threads_[r - 1].lo, threads_[r - 1].hi}; }
    double thread_delta(int r) const { return threads_[r - 1].delta; }
    int thread_restarts(int r) const { return threads_[r - 1].restarts; }

private:
    struct Thread {
        double delta;
        Vec lo, hi;
        std::optional<ClinchSearch> search;
        int restarts = 0;
        int pending_round = -1;
    };
    void restart(Thread& th, int index);
    std::shared_ptr<const SecurityGame> game_;
    int T_;
    ClinchOptions opt_;
    std::vector<Thread> threads_;
    std::uint64_t seed_ = 1;
    RoundInfo info_;
    bool explore_ = true;
    int current_thread_ = 1;
    bool cache_valid_ = false;
    Vec cached_play_;
    Vec cache_lo_, cache_hi_;
    std::optional<Vec> reference_;
    int containment_failures_ = 0;
    int exploit_rounds_ = 0;
};

/// Clinch driven round by round against the agent, then committing to the perturbed output.
class ExploreCommitClinch : public Policy {
public:
    ExploreCommitClinch(const SecurityGame& game, double lambda, ClinchOptions opt = {});
    std::string name() const override { return "clinch-commit"; }
    Vec act(int t) override;
    void observe(int s, const Vec& x, int y) override;
    PolicyPtr clone() const override { return std::make_unique<ExploreCommitClinch>(*this); }
    RoundInfo info() const override { return info_; }

private:
    std::shared_ptr<const SecurityGame> game_;
    double lambda_;
    ClinchOptions opt_;
    std::optional<ClinchSearch> search_;
    Vec commit_;
    RoundInfo info_;
};

}  // namespace stacklab::ssg
