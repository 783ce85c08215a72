// bvclab: configuration-driven experiments on backward volume contraction.
//
// Stages write their artifacts into the configured output directory:
//   profile  -> tails.csv, tailclass.json
//   rates    -> rates.json            (needs profile)
//   chains   -> chains.csv, tower.json (needs rates)
//   backward -> sigma.csv, backward_fit.json (needs rates)
//   report   -> report.json           (needs all of the above)
//
// Exit codes: 0 success, 2 usage/config error, 3 hypothesis violation.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bvc/bvc.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
};

bvc::ExperimentConfig load(const CliOptions& opt) {
    bvc::ExperimentConfig cfg = bvc::ExperimentConfig::from_file(opt.config_path);
    if (opt.out_dir) cfg.out_dir = *opt.out_dir;
    if (opt.seed) cfg.seed = *opt.seed;
    return cfg;
}

void add_common(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_path, "experiment configuration file")->required();
    cmd->add_option("--out", opt.out_dir, "override the output directory");
    cmd->add_option("--seed", opt.seed, "override the configured seed");
    cmd->add_option("--threads", opt.threads, "worker threads (results are thread-count invariant)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical experiments on backward volume contraction for expanding maps"};
    app.require_subcommand(1);

    CliOptions opt;
    CLI::App* profile = app.add_subcommand("profile", "hitting-time tails and classification");
    CLI::App* rates = app.add_subcommand("rates", "derive the backward rate b_n");
    CLI::App* chains = app.add_subcommand("chains", "concatenation check, chains, tower mass");
    CLI::App* backward = app.add_subcommand("backward", "pre-image trees and the uniform bound");
    CLI::App* report = app.add_subcommand("report", "aggregate verdicts into report.json");
    for (CLI::App* cmd : {profile, rates, chains, backward, report}) add_common(cmd, opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (profile->parsed()) {
            const bvc::ExperimentConfig cfg = load(opt);
            const auto out = bvc::run_profile(cfg, opt.threads);
            std::printf("profile: regime=%s censored=%g -> %s\n",
                        bvc::to_string(out.cls.regime), out.profile.censored_fraction,
                        cfg.out_dir.c_str());
        } else if (rates->parsed()) {
            const auto out = bvc::run_rates(load(opt), opt.threads);
            std::printf("rates: b=%s n0=%d gamma=%g\n", out.b.describe().c_str(), out.n0,
                        out.gamma);
        } else if (chains->parsed()) {
            const auto out = bvc::run_chains(load(opt), opt.threads);
            std::printf("chains: concat_violations=%zu tower=%s\n", out.concat_violations,
                        bvc::to_string(out.tower.series.verdict));
        } else if (backward->parsed()) {
            const auto out = bvc::run_backward(load(opt), opt.threads);
            std::printf("backward: roots=%d frac_beta_ok=%g bounds=%s\n", out.roots,
                        out.frac_beta_ok, out.all_bounds_hold ? "hold" : "VIOLATED");
        } else if (report->parsed()) {
            const bool all = bvc::run_report(load(opt));
            std::printf("report: %s\n", all ? "all checks pass" : "SOME CHECKS FAIL");
        }
    } catch (const bvc::hypothesis_error& e) {
        std::fprintf(stderr, "hypothesis violation: %s\n", e.what());
        return 3;
    } catch (const bvc::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
