#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "stacklab/core.hpp"

namespace stacklab::oracles {

struct OracleReport {
    double value = 0.0;
    std::string method;
    double resolution = 0.0;
    long long samples = 0;
    double certified_error = 0.0;
    Vec argmax;

    std::string to_json_line() const;
};

using Fraction = boost::rational<std::int64_t>;

/// Decreasing agent payoff curve on [0,1].
using Curve1D = std::function<double(double)>;

struct WaterFilling {
    Vec x;
    double w = 0.0;
};

/// Least s in [0,1] with v(s) <= w, by bisection. 0 when v(0) <= w, +inf when v(1) > w.
double threshold(const Curve1D& v, double w, double tol = 1e-13);

/// Conservative optimizer on the downward simplex (or capped by caps when non-empty).
WaterFilling water_filling(const std::vector<Curve1D>& v, const Vec& caps = {}, double tol = 1e-12);

struct RationalWaterFilling {
    std::vector<Fraction> x;
    Fraction w;
};

/// Exact water-filling for linear curves v^y(s) = a_y - b_y s on the downward simplex.
RationalWaterFilling water_filling_exact(const std::vector<Fraction>& a, const std::vector<Fraction>& b);

/// Max over a regular grid of u(x, brr(x)), ties broken for the principal.
/// slope_bound scales the certified error (C * resolution * dim).
OracleReport grid_optimum(const GameSpec& g, double resolution, double slope_bound = 1.0);

struct AgentOptimum {
    double value = 0.0;
    std::vector<int> actions;
    std::vector<double> round_loss;  // v(x_t, br(x_t)) - v(x_t, y_t) along the optimal plan
    long long sequences = 0;
};

/// Exact optimum of the discounted agent payoff by enumerating all action sequences.
/// Deterministic principal policies make open-loop sequences equivalent to agent policies.
AgentOptimum exhaustive_agent_optimum(const GameSpec& g, const Policy& policy, double gamma, int horizon);

struct VolumeEstimate {
    double fraction = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    long long samples = 0;
};

/// Wilson 99% interval for k successes in N trials.
VolumeEstimate wilson99(long long k, long long N);

VolumeEstimate monte_carlo_volume(const std::function<Vec(Rng&)>& sampler, const std::function<bool(const Vec&)>& pred,
                                  long long N, std::uint64_t seed);

}  // namespace stacklab::oracles
