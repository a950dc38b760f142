#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stacklab/acceptance.hpp"
#include "stacklab/harness.hpp"

namespace fs = std::filesystem;
using namespace stacklab;

namespace {

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    for (const std::string& tok : split(s)) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(tok, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != tok.size() || tok.front() == '-') throw ConfigError("--seeds: not a seed: " + tok);
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("--seeds: empty list");
    return out;
}

int run_suite(const std::string& suite, const std::string& only) {
    if (suite == "acceptance") {
        auto results = acceptance::run_suite(std::cout, split(only));
        int code = acceptance::exit_code(results);
        std::cout << (code == 0 ? "acceptance: ok" : "acceptance: failed") << std::endl;
        return code;
    }
    if (suite == "properties") {
        bool ok = true;
        for (const std::string& g : acceptance::property_groups()) {
            acceptance::PropertyResult r = acceptance::run_property_group(g);
            ok = ok && r.violations == 0;
            std::cout << (r.violations == 0 ? "PASS " : "FAIL ") << g << ": " << r.cases - r.violations << "/"
                      << r.cases << std::endl;
        }
        return ok ? 0 : 2;
    }
    throw ConfigError("--suite: unknown suite " + suite);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stacklab: repeated Stackelberg game experiments"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run an experiment config or a test suite");
    std::string config, seeds, out, suite, only;
    int parallel = 1;
    run->add_option("--config", config, "experiment config (JSON)");
    run->add_option("--seeds", seeds, "comma-separated seeds overriding the config");
    run->add_option("--out", out, "output directory");
    run->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("--suite", suite, "acceptance | properties");
    run->add_option("--only", only, "comma-separated criterion ids (with --suite acceptance)");

    auto* report = app.add_subcommand("report", "recompute aggregates from a sweep directory");
    std::string in;
    report->add_option("--in", in, "sweep directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*run) {
            if (!suite.empty()) {
                if (!config.empty()) throw ConfigError("--suite and --config are exclusive");
                return run_suite(suite, only);
            }
            if (config.empty()) throw ConfigError("run needs --config or --suite");
            harness::ExperimentConfig cfg = harness::load_config(config);
            if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
            std::string dir = out;
            if (dir.empty())
                dir = (fs::path(harness::output_root("out")) / (cfg.output.empty() ? cfg.name : cfg.output)).string();
            harness::SweepReport rep = harness::run_sweep(cfg, dir, parallel);
            std::cout << rep.to_json().dump(2) << std::endl;
            return 0;
        }
        harness::SweepReport rep = harness::recompute_report(in);
        std::cout << rep.to_json().dump(2) << std::endl;
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
