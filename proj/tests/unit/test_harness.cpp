#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "stacklab/harness.hpp"

using namespace stacklab;
using namespace stacklab::harness;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"({
  "name": "unit-bbs",
  "scenario": "demand",
  "T": 2000,
  "seeds": [1, 2, 3, 4],
  "algorithm": {"name": "batched-binary-search", "gamma": 0.5},
  "agent": {"kind": "induced", "gamma": 0.5},
  "game": {"kind": "fixed", "v": 0.37}
})";

std::string error_of(const std::string& text) {
    try {
        parse_config(text, "unit.json");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& leaf) {
    fs::path p = fs::temp_directory_path() / ("stacklab-unit-" + leaf);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("config parses") {
    ExperimentConfig c = parse_config(kConfig);
    CHECK(c.name == "unit-bbs");
    CHECK(c.T == 2000);
    CHECK(c.seeds.size() == 4);
    CHECK(c.write_csv);
}

TEST_CASE("config errors carry a field path") {
    std::string s = kConfig;
    std::string bad = s;
    bad.replace(bad.find("\"gamma\": 0.5}"), 13, "\"gamma\": 0.5, \"bogus\": 1}");
    CHECK(error_of(bad).find("algorithm.bogus") != std::string::npos);
    std::string top = s;
    top.replace(top.find("\"T\""), 3, "\"Tx\"");
    CHECK(error_of(top).find("Tx") != std::string::npos);
    std::string neg = s;
    neg.replace(neg.find("\"v\": 0.37"), 9, "\"v\": 1.5");
    CHECK(error_of(neg).find("game.v") != std::string::npos);
    std::string wc = s;
    wc.replace(wc.find("\"T\""), 3, "\"write_csv\": 1, \"T\"");
    CHECK(error_of(wc).find("write_csv") != std::string::npos);
}

TEST_CASE("syntax errors carry line and column") {
    std::string e = error_of("{\n  \"name\": \"x\",\n  oops\n}");
    CHECK(e.rfind("unit.json:3:", 0) == 0);
    CHECK(e.find("syntax error") != std::string::npos);
}

TEST_CASE("runs are byte-identical per seed") {
    ExperimentConfig c = parse_config(kConfig);
    EpisodeResult a = run_one(c, 7, true), b = run_one(c, 7, true);
    CHECK(a.csv == b.csv);
    CHECK(a.regret == b.regret);
    CHECK(a.curve.size() == static_cast<std::size_t>(c.T));
}

TEST_CASE("parallel sweeps match serial sweeps") {
    ExperimentConfig c = parse_config(kConfig);
    fs::path d1 = scratch("serial"), d2 = scratch("parallel");
    SweepReport r1 = run_sweep(c, d1.string(), 1);
    SweepReport r2 = run_sweep(c, d2.string(), 3);
    REQUIRE(r1.episodes.size() == r2.episodes.size());
    for (std::size_t i = 0; i < r1.episodes.size(); ++i) CHECK(r1.episodes[i].regret == r2.episodes[i].regret);
    for (std::uint64_t s : c.seeds) {
        std::string f = "seed-" + std::to_string(s) + ".csv";
        CHECK(slurp(d1 / f) == slurp(d2 / f));
    }
    CHECK(slurp(d1 / "report.json") == slurp(d2 / "report.json"));
    SweepReport re = recompute_report(d1.string());
    CHECK(re.regret.mean == doctest::Approx(r1.regret.mean).epsilon(1e-12));
    CHECK(re.regret.max == doctest::Approx(r1.regret.max).epsilon(1e-12));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("aggregate") {
    Aggregate a = aggregate({4.0, 1.0, 3.0, 2.0});
    CHECK(a.mean == doctest::Approx(2.5));
    CHECK(a.median == doctest::Approx(2.5));
    CHECK(a.min == 1.0);
    CHECK(a.max == 4.0);
    CHECK(a.count == 4);
    // sample sd sqrt(5/3), half width 1.96 sd / 2
    CHECK(a.ci_hi - a.mean == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-3));
}

TEST_CASE("scaling fits") {
    auto nlogn = [](double n) { return n * std::log(n); };
    std::vector<double> n{10, 20, 40, 80, 160, 320};
    std::vector<double> y;
    Rng rng(1);
    for (double v : n) y.push_back(3.0 * nlogn(v) * (1.0 + 0.02 * (rng.uniform() - 0.5)));
    Fit f = fit_scaling(n, y, nlogn, false);
    CHECK(f.slope == doctest::Approx(3.0).epsilon(0.05));
    CHECK(f.r2 > 0.99);
    CHECK_FALSE(f.flagged);
    Fit g = fit_scaling(n, {5, 6, 5, 6, 5, 6}, nlogn, true);
    CHECK(g.flagged);
    CHECK_THROWS_AS(fit_scaling({1, 1, 1, 1}, {1, 2, 3, 4}, nlogn), ParameterError);
    CHECK_THROWS_AS(fit_scaling({1, 2, 3}, {1, 2, 3}, nlogn), ParameterError);
}

TEST_CASE("output root honours the environment") {
    CHECK(!output_root("fallback").empty());
}
