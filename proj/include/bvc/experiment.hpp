#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bvc/backward_verifier.hpp"
#include "bvc/chain_machinery.hpp"
#include "bvc/config.hpp"
#include "bvc/dynamics.hpp"
#include "bvc/errors.hpp"
#include "bvc/expansion_profile.hpp"
#include "bvc/rate_derivation.hpp"
#include "bvc/rate_sequences.hpp"

namespace bvc {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::json;

// CSV floats carry 17 significant digits: enough to round-trip a double,
// locale-independent under the default "C" locale.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot write " + path.string());
    out << text;
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("missing input file: " + path.string());
    json j;
    in >> j;
    return j;
}

inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["system"] = {{"kind", c.kind}, {"d", c.d}, {"a", c.a}, {"a0", c.a0},
                   {"alpha", c.alpha_pert}, {"interval", {c.interval_lo, c.interval_hi}}};
    j["thresholds"] = {{"lambda", c.lambda}, {"beta_target", c.beta_target}};
    j["horizons"] = {{"orbit", c.orbit_horizon},
                     {"tree_depth", c.tree_depth},
                     {"node_cap", c.node_cap},
                     {"fit_window_lo", c.fit_window_lo}};
    j["sampling"] = {{"tail_samples", c.tail_samples},
                     {"chain_samples", c.chain_samples},
                     {"concat_triples", c.concat_triples},
                     {"backward_roots", c.backward_roots},
                     {"seed", c.seed}};
    json rates;
    rates["slack"] = c.slack;
    if (c.gamma_override) rates["gamma"] = *c.gamma_override;
    if (c.rate_family_override) rates["family"] = *c.rate_family_override;
    if (!c.custom_table.empty()) rates["table"] = c.custom_table;
    j["rates"] = rates;
    j["output"] = {{"dir", c.out_dir}};
    return j;
}

// ---------------------------------------------------------------------------
// profile stage: tails.csv + tailclass.json
// ---------------------------------------------------------------------------

inline const std::vector<double>& lp_grid() {
    static const std::vector<double> grid{3.5, 4.0, 5.0, 8.0};
    return grid;
}

struct ProfileOutputs {
    TailProfile profile;
    TailClass cls;
};

inline void write_tails_csv(const std::filesystem::path& path, const TailProfile& t) {
    std::ostringstream out;
    out << "n,mu_hat,gamma_tail,stderr\n";
    const double n_samp = t.sample_size > 0 ? static_cast<double>(t.sample_size) : 0.0;
    for (int n = 1; n <= t.horizon; ++n) {
        const double g = t.gamma_tail[static_cast<std::size_t>(n)];
        const double se = n_samp > 0.0 ? std::sqrt(g * (1.0 - g) / n_samp) : 0.0;
        out << n << ',' << fmt17(t.mu_hat[static_cast<std::size_t>(n)]) << ',' << fmt17(g) << ','
            << fmt17(se) << '\n';
    }
    write_text_file(path, out.str());
}

inline TailProfile read_tails_csv(const std::filesystem::path& csv_path, const json& meta) {
    std::ifstream in(csv_path);
    if (!in) throw config_error("missing input file: " + csv_path.string());
    std::string line;
    if (!std::getline(in, line)) throw config_error("empty tails.csv");
    std::vector<double> mu, gamma;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() < 3) throw config_error("bad tails.csv row: " + line);
        mu.push_back(std::stod(cells[1]));
        gamma.push_back(std::stod(cells[2]));
    }
    TailProfile t;
    t.horizon = static_cast<int>(mu.size());
    t.mu_hat.assign(mu.size() + 1, 0.0);
    t.gamma_tail.assign(mu.size() + 1, 0.0);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        t.mu_hat[i + 1] = mu[i];
        t.gamma_tail[i + 1] = gamma[i];
    }
    t.censored_fraction = meta.at("censored_fraction").get<double>();
    t.sample_size = meta.at("sample_size").get<long long>();
    t.seed = meta.at("seed").get<std::uint64_t>();
    return t;
}

inline ProfileOutputs run_profile(const ExperimentConfig& cfg, unsigned threads = 1) {
    const MapSystem system = cfg.make_system();
    const RateSequence a = make_rate_exp(cfg.lambda);
    ProfileOutputs out;
    out.profile = estimate_tails(system, a, cfg.orbit_horizon, cfg.tail_samples, cfg.seed, threads);
    out.cls = classify_tail(out.profile);

    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    write_tails_csv(dir / "tails.csv", out.profile);

    json j;
    j["regime"] = to_string(out.cls.regime);
    j["alpha_hat"] = out.cls.alpha_hat;
    j["tau_hat"] = out.cls.tau_hat;
    j["log_c_hat"] = out.cls.log_c_hat;
    j["fit_quality"] = out.cls.fit_quality;
    j["window"] = {out.cls.window_lo, out.cls.window_hi};
    j["seed"] = out.profile.seed;
    j["sample_size"] = out.profile.sample_size;
    j["censored_fraction"] = out.profile.censored_fraction;
    j["horizon"] = out.profile.horizon;
    j["lambda"] = cfg.lambda;
    j["system"] = system.describe();
    if (out.cls.regime == TailRegime::kUndetermined) j["warning"] = "classification undetermined: " + out.cls.note;
    json lp = json::array();
    for (double p : lp_grid()) {
        const LpReport rep = lp_diagnostic(out.profile, p);
        lp.push_back({{"p", p},
                      {"verdict", to_string(rep.series.verdict)},
                      {"k_min", rep.k_min},
                      {"partial_sum",
                       rep.series.partial_sums.empty() ? 0.0 : rep.series.partial_sums.back()}});
    }
    j["lp_grid"] = lp;
    write_json_file(dir / "tailclass.json", j);
    return out;
}

// ---------------------------------------------------------------------------
// rates stage: rates.json
// ---------------------------------------------------------------------------

struct RatesOutputs {
    RateSequence b;
    int n0 = 0;
    double gamma = 0.0;
    bool domination_verified = false;
};

inline TailClass tailclass_from_json(const json& j) {
    TailClass cls;
    const std::string regime = j.at("regime").get<std::string>();
    if (regime == "EXPONENTIAL") cls.regime = TailRegime::kExponential;
    else if (regime == "STRETCHED") cls.regime = TailRegime::kStretched;
    else if (regime == "POLYNOMIAL") cls.regime = TailRegime::kPolynomial;
    else if (regime == "TRIVIAL") cls.regime = TailRegime::kTrivial;
    else cls.regime = TailRegime::kUndetermined;
    cls.alpha_hat = j.at("alpha_hat").get<double>();
    cls.tau_hat = j.at("tau_hat").get<double>();
    cls.log_c_hat = j.at("log_c_hat").get<double>();
    cls.fit_quality = j.at("fit_quality").get<double>();
    cls.window_lo = j.at("window")[0].get<int>();
    cls.window_hi = j.at("window")[1].get<int>();
    return cls;
}

inline RateSequence rate_from_json(const json& j) {
    const std::string family = j.at("family").get<std::string>();
    if (family == "EXP") return make_rate_exp(j.at("c").get<double>());
    if (family == "STRETCHED")
        return make_rate_stretched(j.at("c").get<double>(), j.at("tau").get<double>());
    if (family == "POLY") return make_rate_poly(j.at("c").get<double>());
    if (family == "CUSTOM") return make_rate_custom(j.at("table").get<std::vector<double>>());
    throw config_error("rates.json: unknown family " + family);
}

inline RatesOutputs run_rates(const ExperimentConfig& cfg, unsigned /*threads*/ = 1) {
    const std::filesystem::path dir(cfg.out_dir);
    const json meta = read_json_file(dir / "tailclass.json");
    const TailProfile profile = read_tails_csv(dir / "tails.csv", meta);
    const TailClass cls = tailclass_from_json(meta);
    const RateSequence a = make_rate_exp(cfg.lambda);
    const double gamma_default = cfg.gamma_override ? *cfg.gamma_override : 0.5;

    json j;
    j["lambda"] = cfg.lambda;
    j["regime"] = to_string(cls.regime);
    j["alpha_hat"] = cls.alpha_hat;
    j["slack"] = cfg.slack;

    RatesOutputs out;
    if (cfg.rate_family_override && *cfg.rate_family_override == "CUSTOM") {
        out.b = make_rate_custom(cfg.custom_table);
        out.gamma = gamma_default;
        const auto n0 = scan_n0(a, out.b, profile, out.gamma);
        out.n0 = n0 ? *n0 : 0;
        out.domination_verified = n0.has_value();
        j["table"] = cfg.custom_table;
    } else if (cls.regime == TailRegime::kTrivial) {
        // Tails vanish from n = 2 on: Gamma_n^{-gamma} is vacuous there and
        // any submultiplicative b <= a works; run with the threshold rate
        // shrunk by the usual slack.
        out.b = make_rate_exp((1.0 - cfg.slack) * cfg.lambda);
        out.gamma = gamma_default;
        const auto n0 = scan_n0(a, out.b, profile, out.gamma);
        if (!n0) throw hypothesis_error("run_rates: no n0 for trivial-tail fallback");
        out.n0 = *n0;
        out.domination_verified = verify_domination(a, out.b, profile, out.gamma, out.n0);
        j["trivial_tail_fallback"] = true;
    } else {
        DeriveOptions opts;
        opts.gamma_override = cfg.gamma_override;
        opts.slack = cfg.slack;
        if (cfg.rate_family_override) {
            const std::string& f = *cfg.rate_family_override;
            opts.family_override = f == "EXP"       ? RateFamily::kExp
                                   : f == "STRETCHED" ? RateFamily::kStretched
                                                      : RateFamily::kPoly;
        }
        DerivedRate derived = derive_b(a, profile, cls, opts);
        out.b = std::move(derived.b);
        out.n0 = derived.n0;
        out.gamma = derived.gamma;
        out.domination_verified = verify_domination(a, out.b, profile, out.gamma, out.n0);
    }

    j["family"] = to_string(out.b.family());
    if (out.b.family() != RateFamily::kCustom) {
        j["c"] = out.b.c();
        if (out.b.family() == RateFamily::kStretched) j["tau"] = out.b.tau();
    }
    j["gamma"] = out.gamma;
    j["n0"] = out.n0;
    j["certified_submultiplicative"] = out.b.certified_submultiplicative();
    j["certification_bound"] = out.b.certification_bound();
    j["domination_verified"] = out.domination_verified;

    const SeriesReport ts = theorem_series(profile, out.gamma);
    j["theorem_series"] = {{"gamma", out.gamma},
                           {"verdict", to_string(ts.verdict)},
                           {"partial_sum", ts.partial_sums.empty() ? 0.0 : ts.partial_sums.back()}};
    write_json_file(dir / "rates.json", j);
    return out;
}

// ---------------------------------------------------------------------------
// chains stage: chains.csv + tower.json
// ---------------------------------------------------------------------------

struct ChainsOutputs {
    std::size_t concat_violations = 0;
    TailProfile u_profile;
    TowerMassReport tower;
};

inline ChainsOutputs run_chains(const ExperimentConfig& cfg, unsigned threads = 1) {
    const std::filesystem::path dir(cfg.out_dir);
    const MapSystem system = cfg.make_system();
    const RateSequence b = rate_from_json(read_json_file(dir / "rates.json"));
    if (!b.certified_submultiplicative())
        throw hypothesis_error("run_chains: rate " + b.describe() + " is not certified");
    const int horizon = cfg.orbit_horizon;
    if (horizon > b.max_index())
        throw config_error("run_chains: orbit horizon past the rate's certified table");

    const auto violations =
        concatenation_check(system, b, static_cast<std::uint64_t>(cfg.concat_triples), horizon,
                            cfg.seed, threads);

    // per-sample first-entry values, then the histogram over the same values
    const CounterRng rng{cfg.seed};
    const long long n_samples = cfg.chain_samples;
    std::vector<int> u_values(static_cast<std::size_t>(n_samples), -1);
    for_chunks(static_cast<std::size_t>(n_samples), threads,
               [&](unsigned, std::size_t begin, std::size_t end) {
                   for (std::size_t i = begin; i < end; ++i) {
                       const Point x = system.sample(rng, streams::kChains, i);
                       u_values[i] = first_entry_value(system, x, b, horizon);
                   }
               });
    std::vector<long long> counts(static_cast<std::size_t>(horizon) + 1, 0);
    long long censored = 0;
    {
        std::ostringstream out;
        out << "sample,u_value,chain_length,censored\n";
        for (std::size_t i = 0; i < u_values.size(); ++i) {
            const int u = u_values[i];
            if (u < 0) {
                ++censored;
                out << i << ",-1,-1,1\n";
            } else {
                ++counts[static_cast<std::size_t>(u)];
                out << i << ',' << u << ',' << u << ",0\n";
            }
        }
        write_text_file(dir / "chains.csv", out.str());
    }

    ChainsOutputs out;
    out.concat_violations = violations.size();
    out.u_profile = TailProfile::from_counts(counts, censored, n_samples, cfg.seed);
    out.tower = tower_mass(b, out.u_profile);

    json j;
    j["rate"] = b.describe();
    j["concatenation"] = {{"triples", cfg.concat_triples},
                          {"violations", violations.size()},
                          {"tolerance", kImplicationTolerance}};
    j["u_histogram"] = {{"samples", n_samples},
                        {"censored", censored},
                        {"censored_fraction", out.u_profile.censored_fraction}};
    j["per_n_terms"] = out.tower.series.terms;
    j["partial_sums"] = out.tower.series.partial_sums;
    j["block_ratios"] = out.tower.series.block_ratios;
    j["verdict"] = to_string(out.tower.series.verdict);
    write_json_file(dir / "tower.json", j);
    return out;
}

// ---------------------------------------------------------------------------
// backward stage: sigma.csv + backward_fit.json
// ---------------------------------------------------------------------------

struct BackwardOutputs {
    int roots = 0;
    int fitted_roots = 0; // trees deep enough for the fit window
    double frac_beta_ok = 0.0;
    bool all_bounds_hold = true;
    double max_censored_fraction = 0.0;
    int truncated_roots = 0;
};

inline BackwardOutputs run_backward(const ExperimentConfig& cfg, unsigned threads = 1) {
    const std::filesystem::path dir(cfg.out_dir);
    const MapSystem system = cfg.make_system();
    const RateSequence b = rate_from_json(read_json_file(dir / "rates.json"));
    if (!b.certified_submultiplicative())
        throw hypothesis_error("run_backward: rate " + b.describe() + " is not certified");

    const CounterRng rng{cfg.seed};
    std::ostringstream sigma_csv;
    sigma_csv << "root,n,node_count,sigma_log,argmin_branch\n";
    json roots = json::array();
    BackwardOutputs agg;
    agg.roots = cfg.backward_roots;
    std::map<int, int> n_hat_dist;
    int beta_ok = 0;

    for (int r = 0; r < cfg.backward_roots; ++r) {
        const Point root = system.sample(rng, streams::kRoots, static_cast<std::uint64_t>(r));
        const PreimageTree tree = build_tree(system, root, cfg.tree_depth, cfg.node_cap);
        const SigmaProfile prof = sigma_profile(tree);
        // boundary roots can lose every inverse branch within a few levels;
        // such trees are recorded and skipped in the fit aggregate
        const bool fittable = tree.complete_depth() >= cfg.fit_window_lo + 4;
        BackwardFit fit;
        if (fittable) fit = fit_backward(prof, b, FitWindow{cfg.fit_window_lo, -1});
        InclusionReport inc;
        if (tree.complete_depth() >= 1) {
            inc = verify_inclusion(system, tree, b, cfg.orbit_horizon, threads);
        } else {
            inc.min_membership_margin = 0.0;
            inc.min_quotient_margin = 0.0;
            inc.min_uniform_margin = 0.0;
        }
        attach_inclusion(fit, inc.n_hat, system);

        for (std::size_t i = 0; i < prof.n.size(); ++i) {
            sigma_csv << r << ',' << prof.n[i] << ',' << prof.node_count[i] << ','
                      << fmt17(prof.sigma_log[i]) << ',' << prof.argmin_path[i] << '\n';
        }

        const double censored_frac =
            inc.nodes_checked > 0
                ? static_cast<double>(inc.censored_nodes) / static_cast<double>(inc.nodes_checked)
                : 0.0;
        const std::size_t hard_violations = inc.violations.size() - static_cast<std::size_t>(inc.censored_nodes);
        const bool bounds_ok = hard_violations == 0 &&
                               inc.min_membership_margin >= -kImplicationTolerance &&
                               inc.min_quotient_margin >= -kImplicationTolerance &&
                               inc.min_uniform_margin >= -kImplicationTolerance;
        if (fittable) {
            ++agg.fitted_roots;
            if (fit.beta >= cfg.beta_target) ++beta_ok;
        }
        agg.all_bounds_hold = agg.all_bounds_hold && bounds_ok;
        if (censored_frac > agg.max_censored_fraction) agg.max_censored_fraction = censored_frac;
        if (tree.truncated) ++agg.truncated_roots;
        ++n_hat_dist[inc.n_hat];

        json jr;
        jr["root"] = r;
        jr["point"] = {root.x0, root.x1};
        jr["fitted"] = fittable;
        if (fittable) {
            jr["family"] = to_string(fit.family);
            jr["log_cx"] = fit.log_cx;
            jr["beta"] = fit.beta;
            jr["fit_quality"] = fit.fit_quality;
            jr["unreliable"] = fit.unreliable;
            jr["window"] = {fit.window_lo, fit.window_hi};
            jr["c_from_n"] = fit.c_from_n;
        }
        jr["n_hat"] = inc.n_hat;
        jr["nodes_checked"] = inc.nodes_checked;
        jr["censored_nodes"] = inc.censored_nodes;
        jr["censored_fraction"] = censored_frac;
        jr["hard_violations"] = hard_violations;
        jr["min_membership_margin"] = inc.min_membership_margin;
        jr["min_quotient_margin"] = inc.min_quotient_margin;
        jr["min_uniform_margin"] = inc.min_uniform_margin;
        jr["bounds_hold"] = bounds_ok;
        jr["truncated"] = tree.truncated;
        jr["complete_depth"] = tree.complete_depth();
        jr["discarded_branches"] = tree.discarded_branches;
        roots.push_back(jr);
    }
    agg.frac_beta_ok =
        agg.fitted_roots > 0 ? static_cast<double>(beta_ok) / agg.fitted_roots : 0.0;

    write_text_file(dir / "sigma.csv", sigma_csv.str());
    json j;
    json nh;
    for (const auto& [k, v] : n_hat_dist) nh[std::to_string(k)] = v;
    j["aggregate"] = {{"roots", cfg.backward_roots},
                      {"fitted_roots", agg.fitted_roots},
                      {"rate", b.describe()},
                      {"beta_target", cfg.beta_target},
                      {"frac_beta_ge_target", agg.frac_beta_ok},
                      {"n_hat_distribution", nh},
                      {"all_bounds_hold", agg.all_bounds_hold},
                      {"max_censored_fraction", agg.max_censored_fraction},
                      {"truncated_roots", agg.truncated_roots}};
    j["roots"] = roots;
    write_json_file(dir / "backward_fit.json", j);
    return agg;
}

// ---------------------------------------------------------------------------
// report stage: report.json
// ---------------------------------------------------------------------------

inline bool report_check(json& checks, const std::string& name, bool pass,
                         const std::string& detail) {
    checks.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
    return pass;
}

inline bool run_report(const ExperimentConfig& cfg) {
    const std::filesystem::path dir(cfg.out_dir);
    const json tailclass = read_json_file(dir / "tailclass.json");
    const TailProfile profile = read_tails_csv(dir / "tails.csv", tailclass);
    const json rates = read_json_file(dir / "rates.json");
    const json tower = read_json_file(dir / "tower.json");
    const json backward = read_json_file(dir / "backward_fit.json");

    json checks = json::array();
    bool all = true;

    bool monotone = true;
    for (int n = 1; n + 1 <= profile.horizon; ++n) {
        monotone = monotone && profile.gamma_tail[static_cast<std::size_t>(n) + 1] <=
                                   profile.gamma_tail[static_cast<std::size_t>(n)] + 1e-15;
    }
    all &= report_check(checks, "tails_monotone", monotone, "gamma_tail non-increasing in n");
    const std::string regime = tailclass.at("regime").get<std::string>();
    all &= report_check(checks, "tail_classified", regime != "UNDETERMINED", "regime = " + regime);
    all &= report_check(checks, "rate_certified",
                        rates.at("certified_submultiplicative").get<bool>(),
                        "family = " + rates.at("family").get<std::string>());
    all &= report_check(checks, "rate_domination", rates.at("domination_verified").get<bool>(),
                        "b_n <= min(a_n, Gamma_n^-gamma) from n0 = " +
                            std::to_string(rates.at("n0").get<int>()));
    const auto concat_viol = tower.at("concatenation").at("violations").get<std::size_t>();
    all &= report_check(checks, "concatenation_clean", concat_viol == 0,
                        std::to_string(concat_viol) + " violations over " +
                            std::to_string(tower.at("concatenation").at("triples").get<long long>()) +
                            " triples");
    const std::string tower_verdict = tower.at("verdict").get<std::string>();
    all &= report_check(checks, "tower_series_resolved", tower_verdict != "DIVERGENT_OR_UNKNOWN",
                        "verdict = " + tower_verdict);
    const json& agg = backward.at("aggregate");
    all &= report_check(checks, "backward_beta",
                        agg.at("frac_beta_ge_target").get<double>() >= 0.95,
                        "fraction of roots with beta >= " + fmt17(cfg.beta_target) + ": " +
                            fmt17(agg.at("frac_beta_ge_target").get<double>()));
    all &= report_check(checks, "backward_bounds", agg.at("all_bounds_hold").get<bool>(),
                        "uniform bound and inclusion re-checks on every root");
    all &= report_check(checks, "inclusion_censoring",
                        agg.at("max_censored_fraction").get<double>() < 0.01,
                        "max censored node fraction = " +
                            fmt17(agg.at("max_censored_fraction").get<double>()));

    json j;
    j["version"] = kVersion;
    std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["generated_at"] = stamp;
    j["config"] = config_to_json(cfg);
    j["checks"] = checks;
    j["all_pass"] = all;
    write_json_file(dir / "report.json", j);
    return all;
}

} // namespace bvc
