#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stacklab/core.hpp"

namespace stacklab::harness {

using json = nlohmann::json;

/// Parsed experiment file. The raw sub-objects are validated per scenario before any run.
struct ExperimentConfig {
    std::string name;
    std::string scenario;  // ssg | demand | classify | finite
    int T = 0;
    std::vector<std::uint64_t> seeds;
    std::string output;
    json algorithm;
    json agent;
    json game;
    bool write_csv = true;
};

/// Throws ConfigError carrying the offending field path (and line for syntax errors).
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

struct EpisodeResult {
    std::uint64_t seed = 0;
    double regret = 0.0;
    double benchmark = 0.0;
    int rounds = 0;
    std::string csv;
    Vec curve;  // cumulative regret after each round
    std::map<std::string, double> extra;
};

struct Aggregate {
    double mean = 0.0;
    double median = 0.0;
    double ci_lo = 0.0;  // normal 95% interval of the mean
    double ci_hi = 0.0;
    double min = 0.0;
    double max = 0.0;
    int count = 0;
};
Aggregate aggregate(const std::vector<double>& xs);

struct Fit {
    double intercept = 0.0;
    double slope = 0.0;
    double r2 = 0.0;
    bool flagged = false;
};

/// Least-squares fit of y against form(scale), with or without intercept.
/// Needs at least four distinct scale points; a degenerate design throws ParameterError.
Fit fit_scaling(const std::vector<double>& scale, const std::vector<double>& y,
                const std::function<double(double)>& form, bool intercept = true);
json to_json(const Fit& f);

/// Constants of the regret bounds written to report.json and checked by the acceptance suite.
inline constexpr double kBatchedSearchBoundFactor = 10.0;
inline constexpr double kPricingBoundFactor = 8.0;

struct SweepReport {
    std::string name;
    std::string scenario;
    std::string algorithm;
    int T = 0;
    std::vector<EpisodeResult> episodes;
    Aggregate regret;
    std::optional<double> bound;
    json to_json() const;
};

/// Runs one seed and returns its regret. The CSV text is stored in the result when requested.
EpisodeResult run_one(const ExperimentConfig& cfg, std::uint64_t seed, bool keep_csv);

/// Runs every seed (parallel > 1 uses worker threads) and writes seed-<s>.csv plus report.json under dir.
SweepReport run_sweep(const ExperimentConfig& cfg, const std::string& dir, int parallel = 1);

/// Recomputes aggregates from the per-seed CSVs in dir (last cumulative regret column).
SweepReport recompute_report(const std::string& dir);

/// Output root: STACKLAB_OUT when set, else the given default.
std::string output_root(const std::string& fallback);

}  // namespace stacklab::harness
