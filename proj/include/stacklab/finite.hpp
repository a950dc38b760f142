#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stacklab/core.hpp"

namespace stacklab::finite {

/// Mixed-strategy game over m+1 principal pure strategies and n agent actions.
struct FiniteGame {
    std::string name;
    int rows = 2;  // m + 1
    int cols = 2;  // n
    std::vector<double> u0;  // row-major rows x cols
    std::vector<double> v0;
    double r = 0.0;
    double L_cond = 1.0;

    int m() const { return rows - 1; }
    double u0_at(int i, int y) const { return u0[i * cols + y]; }
    double v0_at(int i, int y) const { return v0[i * cols + y]; }
    void validate() const;
};

FiniteGame make_game(int rows, int cols, std::vector<double> u0, std::vector<double> v0, std::string name = "");

/// (u(x,y), v(x,y)) under the mixture x.
std::pair<double, double> mixed_payoffs(const FiniteGame& g, const Vec& x, int y);

GameSpec to_game_spec(const FiniteGame& g);

/// Isometry between the simplex in R^{m+1} and R^m, centred at the barycentre.
class SimplexEmbedding {
public:
    explicit SimplexEmbedding(int rows);
    Vec embed(const Vec& x) const;
    Vec lift(const Vec& z) const;
    int dim() const { return rows_ - 1; }
    /// Row i of the basis (coordinates of vertex direction i in R^m).
    const Vec& basis_row(int i) const { return Q_[i]; }

private:
    int rows_;
    std::vector<Vec> Q_;
};

Vec project_to_simplex(const Vec& w);
Vec sample_simplex(int rows, Rng& rng);
Vec random_sphere(int d, Rng& rng);

/// Linear constraints a.x >= b describing K_y^eps inside the simplex (nonnegativity included).
struct Polytope {
    std::vector<Vec> A;
    Vec b;
    bool contains(const Vec& x, double tol = 1e-12) const;
};
Polytope best_response_polytope(const FiniteGame& g, int y, double eps = 0.0);

struct LpSolution {
    Vec x;
    int y = -1;
    double value = 0.0;
    Vec per_action;  // -inf for empty regions
};

/// Stackelberg optimum by solving one linear program per agent action (vertex enumeration).
LpSolution multiple_lps(const FiniteGame& g);

/// Euclidean projection onto a polytope inside the simplex, by face enumeration. Empty optional if infeasible.
std::optional<Vec> project_to_polytope(const Polytope& P, const Vec& a);

/// Largest inscribed embedded ball of K_y found by sampling; 0 when empty.
double inscribed_radius(const FiniteGame& g, int y, int samples, std::uint64_t seed, Vec* centre = nullptr);

struct HausdorffEstimate {
    bool defined = false;
    double value = 0.0;
    long long samples = 0;
};
/// Two-sided Monte Carlo estimate of d_H(K_y, K_y^eps) in the embedded metric.
HausdorffEstimate hausdorff_estimate(const FiniteGame& g, int y, double eps, long long samples, std::uint64_t seed);

/// Oracle answering one principal query with an agent action; each call is one round.
using ResponseOracle = std::function<int(const Vec& x)>;

int probe_count(int m, int T);
double probe_radius(int m, double L, double eps);

/// Accepts x only if every perturbed probe returns y.
bool conservative_membership(int y, const Vec& x, const ResponseOracle& oracle, int T, int m, double L, double eps,
                             Rng& rng);

struct LinOptOptions {
    long long budget = 0;        // membership calls; 0 selects 50 m^2 ln(1/delta)
    /// Steps between halvings of the temperature. 0 spreads the budget over the stages
    /// (at least ceil(2 sqrt(m)) each) and spends what is left at the final temperature.
    int steps_per_stage = 0;
    double initial_temperature = 1.0;
};

struct LinOptResult {
    Vec z;
    double value = 0.0;
    long long calls = 0;
    int steps = 0;
    double final_temperature = 0.0;
};

/// Maximizes g.z over {z : mem(z)} intersected with B(R) and the halfspaces H z <= h.
/// Hit-and-run simulated annealing: chords are located by bisection with membership calls.
LinOptResult membership_lin_opt(const Vec& g, const std::function<bool(const Vec&)>& mem, const Vec& z0, double r,
                                double R, double delta, Rng& rng, LinOptOptions opt = {},
                                const std::vector<Vec>& H = {}, const Vec& h = {});

struct NoisyStackParams {
    int T = 100000;
    double r = 0.05;
    double L = 1.0;
    double c = 3.0;
    /// A zero budget is replaced by min(50 m^2 ln(1/delta), an equal share of the rounds left per candidate).
    LinOptOptions search{0, 0, 0.1};
};

double noisy_stack_eps(const NoisyStackParams& p, int m);
long long noisy_stack_samples(const NoisyStackParams& p, int m);
double ball_volume(int m, double r);

struct NoisyStackRun {
    Transcript transcript;
    std::vector<int> candidates;          // after sampling
    std::vector<Vec> optimizer_output;    // lifted x_hat per candidate (empty if dropped)
    std::vector<int> dropped;
    int eliminations = 0;
    bool fallback = false;
    int search_end = 0;                   // last round of the search phase
    std::string label;
};

/// Runs the sample/search/exploit policy against an agent for T rounds.
NoisyStackRun run_noisy_stack(const FiniteGame& g, Agent& agent, const NoisyStackParams& p, std::uint64_t seed);

/// Random game with entries in [0,1], with r and L_cond filled in from the geometry.
FiniteGame random_game(int rows, int cols, std::uint64_t seed);
/// Fills r (half the inscribed radius of K_{y*}) and L_cond (twice the measured Hausdorff slope, at least 1).
void fit_regularity(FiniteGame& g, std::uint64_t seed);

/// Games whose optimal region has inscribed radius at least min_radius.
std::vector<FiniteGame> corpus(int rows, int cols, int count, double min_radius, std::uint64_t seed);

/// write_transcript_csv with phase and candidate_y columns.
void write_finite_csv(std::ostream& os, const Transcript& tr, const RegretLedger& ledger);

}  // namespace stacklab::finite
