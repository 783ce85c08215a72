#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "bvc/backward_verifier.hpp"
#include "bvc/chain_machinery.hpp"
#include "bvc/dynamics.hpp"
#include "bvc/rate_sequences.hpp"
#include "bvc/rng.hpp"

using namespace bvc;

namespace {

const double kLog2 = 0.6931471805599453;

// independent depth-first recomputation of the level minima: every branch
// product re-derived from preimages() and log_jacobian() alone
double dfs_min_sigma(const MapSystem& m, const Point& y, int depth) {
    if (depth == 0) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (const PreimageBranch& br : m.preimages(y)) {
        const double v = m.log_jacobian(br.point) + dfs_min_sigma(m, br.point, depth - 1);
        if (v < best) best = v;
    }
    return best;
}

} // namespace

TEST_CASE("build_tree: doubling level counts and exact jacobians") {
    const MapSystem dbl = MapSystem::doubling(2);
    const PreimageTree tree = build_tree(dbl, {0.3, 0.0}, 4);
    REQUIRE(tree.complete_depth() == 4);
    CHECK(tree.node_counts == std::vector<std::int64_t>{1, 2, 4, 8, 16});
    for (int n = 0; n <= 4; ++n) {
        for (const TreeNode& node : tree.levels[static_cast<std::size_t>(n)]) {
            CHECK(node.back_log_jac == Catch::Approx(n * kLog2).margin(1e-12));
        }
    }
    CHECK_FALSE(tree.truncated);
}

TEST_CASE("build_tree: quadratic critical target at depth one") {
    const MapSystem quad = MapSystem::quadratic(2.0);
    const PreimageTree tree = build_tree(quad, {0.0, 0.0}, 1);
    REQUIRE(tree.complete_depth() == 1);
    REQUIRE(tree.levels[1].size() == 2);
    CHECK(tree.levels[1][0].point.x0 == Catch::Approx(0.7071067811865476).margin(1e-15));
    CHECK(tree.levels[1][1].point.x0 == Catch::Approx(-0.7071067811865476).margin(1e-15));
    // log(4 * sqrt(1/2)) = 1.5 log 2, equal on both branches by symmetry
    CHECK(tree.levels[1][0].back_log_jac == Catch::Approx(1.0397207708399179).margin(1e-12));
    CHECK(tree.levels[1][1].back_log_jac == Catch::Approx(1.0397207708399179).margin(1e-12));
}

TEST_CASE("build_tree: level minima match a depth-first recomputation") {
    const MapSystem quad = MapSystem::quadratic(2.0);
    const PreimageTree tree = build_tree(quad, {0.3, 0.0}, 10);
    REQUIRE(tree.complete_depth() == 10);
    CHECK(tree.node_counts[10] == 1024);
    for (int n = 1; n <= 10; ++n) {
        const double oracle = dfs_min_sigma(quad, {0.3, 0.0}, n);
        CHECK(tree.level_minima[static_cast<std::size_t>(n)] ==
              Catch::Approx(oracle).margin(1e-9));
    }
}

TEST_CASE("build_tree: every node maps forward to the root") {
    const MapSystem quad = MapSystem::quadratic(2.0);
    const Point root{0.3, 0.0};
    const PreimageTree tree = build_tree(quad, root, 10);
    for (int n = 1; n <= tree.complete_depth(); ++n) {
        for (const TreeNode& node : tree.levels[static_cast<std::size_t>(n)]) {
            Point p = node.point;
            for (int k = 0; k < n; ++k) p = quad.evaluate(p);
            CHECK(std::fabs(p.x0 - root.x0) < 1e-9);
        }
    }
}

TEST_CASE("build_tree: node budget handling") {
    const MapSystem dbl = MapSystem::doubling(2);
    CHECK_THROWS_AS(build_tree(dbl, {0.3, 0.0}, 25), config_error); // 2^25 > default cap

    // viana fiber-branch variance can overrun a cap the circle factor passes
    const MapSystem vi = MapSystem::viana(1.8, 0.05, 2, -1.88, 1.9);
    const PreimageTree tree = build_tree(vi, {0.37, 0.21}, 8, 300);
    CHECK(tree.truncated);
    CHECK(tree.complete_depth() < 8);
    CHECK(tree.complete_depth() >= 2);
    const SigmaProfile prof = sigma_profile(tree);
    CHECK(prof.n.size() == static_cast<std::size_t>(tree.complete_depth()) + 1);
}

TEST_CASE("sigma_profile: doubling is exactly linear") {
    const MapSystem dbl = MapSystem::doubling(2);
    const PreimageTree tree = build_tree(dbl, {0.71, 0.0}, 10);
    const SigmaProfile prof = sigma_profile(tree);
    for (int n = 0; n <= 10; ++n) {
        CHECK(prof.sigma_log[static_cast<std::size_t>(n)] ==
              Catch::Approx(n * kLog2).margin(1e-9));
        CHECK(prof.node_count[static_cast<std::size_t>(n)] == (std::int64_t{1} << n));
    }
    // argmin paths are well-formed branch sequences
    CHECK(prof.argmin_path[0].empty());
    CHECK_FALSE(prof.argmin_path[5].empty());
}

TEST_CASE("fit_backward: exact linear data") {
    SigmaProfile prof;
    for (int n = 0; n <= 12; ++n) {
        prof.n.push_back(n);
        prof.sigma_log.push_back(n * kLog2);
        prof.node_count.push_back(1);
        prof.argmin_index.push_back(0);
        prof.argmin_path.push_back("");
    }
    const BackwardFit fit = fit_backward(prof, make_rate_exp(0.5), FitWindow{4, -1});
    CHECK(fit.beta == Catch::Approx(kLog2).margin(1e-9));
    // worst-case residual sits at the window's left edge
    CHECK(fit.log_cx == Catch::Approx(4.0 * (kLog2 - 0.5)).margin(1e-9));
    CHECK(fit.fit_quality == Catch::Approx(1.0).margin(1e-12));
    CHECK_FALSE(fit.unreliable);

    // matched rate: the bound constant collapses to C_x = 1
    const BackwardFit exact = fit_backward(prof, make_rate_exp(kLog2), FitWindow{4, -1});
    CHECK(exact.log_cx == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("fit_backward: constant profiles are flagged unreliable") {
    SigmaProfile prof;
    for (int n = 0; n <= 10; ++n) {
        prof.n.push_back(n);
        prof.sigma_log.push_back(0.0);
        prof.node_count.push_back(1);
        prof.argmin_index.push_back(0);
        prof.argmin_path.push_back("");
    }
    const BackwardFit fit = fit_backward(prof, make_rate_exp(0.5), FitWindow{4, -1});
    CHECK(fit.unreliable);
    CHECK(fit.log_cx == Catch::Approx(-0.5 * 10).margin(1e-12)); // bound degenerates
    CHECK(fit.beta == Catch::Approx(0.0).margin(1e-12));

    CHECK_THROWS_AS(fit_backward(prof, make_rate_exp(0.5), FitWindow{4, 6}), config_error);
}

TEST_CASE("fit_backward: measured quadratic profile dominates the rate") {
    const MapSystem quad = MapSystem::quadratic(2.0);
    const RateSequence b = make_rate_exp(0.2);
    const PreimageTree tree = build_tree(quad, {0.3, 0.0}, 12);
    const SigmaProfile prof = sigma_profile(tree);
    const BackwardFit fit = fit_backward(prof, b, FitWindow{4, -1});
    // direct recomputation of the min residual
    double min_resid = std::numeric_limits<double>::infinity();
    for (int n = 4; n <= 12; ++n) {
        const double r = prof.sigma_log[static_cast<std::size_t>(n)] - 0.2 * n;
        if (r < min_resid) min_resid = r;
    }
    CHECK(fit.log_cx == Catch::Approx(min_resid).margin(1e-12));
    CHECK(fit.beta > 0.2);
    // uniform bound at every window level, by construction
    for (int n = 4; n <= 12; ++n) {
        CHECK(prof.sigma_log[static_cast<std::size_t>(n)] >= fit.log_cx + 0.2 * n - 1e-12);
    }
}

TEST_CASE("cx_from_N applies K^-N") {
    const MapSystem quad = MapSystem::quadratic(2.0);
    CHECK(cx_from_N(3, quad) == Catch::Approx(1.0 / 64.0).epsilon(1e-12)); // K = 4
    CHECK(cx_from_N(0, quad) == 1.0);
    const MapSystem dbl = MapSystem::doubling(2);
    CHECK(cx_from_N(5, dbl) == Catch::Approx(1.0 / 32.0).epsilon(1e-12));
    CHECK_THROWS_AS(cx_from_N(-1, quad), config_error);

    BackwardFit fit;
    attach_inclusion(fit, 2, quad);
    CHECK(fit.n_hat == 2);
    CHECK(fit.c_from_n == Catch::Approx(1.0 / 16.0).epsilon(1e-12));
}

TEST_CASE("verify_inclusion: doubling is tight with N_hat = 0") {
    const MapSystem dbl = MapSystem::doubling(2);
    const PreimageTree tree = build_tree(dbl, {0.44, 0.0}, 8);
    const InclusionReport rep = verify_inclusion(dbl, tree, make_rate_exp(0.5), 30);
    CHECK(rep.n_hat == 0);
    CHECK(rep.censored_nodes == 0);
    CHECK(rep.violations.empty());
    CHECK(rep.min_membership_margin >= -kImplicationTolerance);
    CHECK(rep.min_quotient_margin >= -kImplicationTolerance);
    CHECK(rep.min_uniform_margin >= -kImplicationTolerance);
    CHECK(rep.nodes_checked == 2 + 4 + 8 + 16 + 32 + 64 + 128 + 256);
}

TEST_CASE("verify_inclusion: quadratic tree, all nodes covered") {
    const MapSystem quad = MapSystem::quadratic(2.0);
    const RateSequence b = make_rate_exp(0.2);
    const PreimageTree tree = build_tree(quad, {0.3, 0.0}, 10);
    const InclusionReport rep = verify_inclusion(quad, tree, b, 50);
    CHECK(rep.censored_nodes == 0);
    CHECK(rep.violations.empty());
    CHECK(rep.n_hat >= 0);
    CHECK(rep.min_membership_margin >= -kImplicationTolerance);
    CHECK(rep.min_quotient_margin >= -kImplicationTolerance);
    CHECK(rep.min_uniform_margin >= -kImplicationTolerance);

    // thread-count invariance of the whole report
    const InclusionReport rep4 = verify_inclusion(quad, tree, b, 50, 4);
    CHECK(rep4.n_hat == rep.n_hat);
    CHECK(rep4.censored_nodes == rep.censored_nodes);
    CHECK(rep4.min_membership_margin == rep.min_membership_margin);

    // independent re-verification on sampled nodes: first_entry + manual glue
    // + strict membership, bypassing verify_inclusion internals
    const CounterRng rng{31337};
    for (std::uint64_t t = 0; t < 50; ++t) {
        const int n = 1 + static_cast<int>(rng.below(10, streams::kSynthetic, t, 0));
        const auto& level = tree.levels[static_cast<std::size_t>(n)];
        const std::size_t idx = rng.below(level.size(), streams::kSynthetic, t, 1);
        const ChainState cs = first_entry(quad, level[idx].point, b, 50);
        REQUIRE_FALSE(cs.censored);
        long long m = cs.u_value;
        if (cs.u_value < n) {
            std::vector<std::optional<int>> u(static_cast<std::size_t>(n));
            Point p = level[idx].point;
            for (int j = 0; j < n; ++j) {
                const ChainState cj = first_entry(quad, p, b, 50);
                REQUIRE_FALSE(cj.censored);
                u[static_cast<std::size_t>(j)] = cj.u_value;
                p = quad.evaluate(p);
            }
            const ChainDecomposition dec = glue_decomposition(u, n);
            REQUIRE(dec.ok);
            m = dec.total;
        }
        CHECK(m >= n);
        CHECK(m <= n + rep.n_hat);
        CHECK(membership_U(quad, level[idx].point, b, static_cast<int>(m)));
    }
}

TEST_CASE("verify_inclusion horizon guard") {
    const MapSystem dbl = MapSystem::doubling(2);
    const PreimageTree tree = build_tree(dbl, {0.5, 0.0}, 6);
    CHECK_THROWS_AS(verify_inclusion(dbl, tree, make_rate_exp(0.5), 4), config_error);
}

TEST_CASE("verify_inclusion reports censored nodes and checks the rest") {
    // rate close to the expansion rate + short horizon: slow nodes censor
    const MapSystem quad = MapSystem::quadratic(2.0);
    const RateSequence b = make_rate_exp(0.66);
    const PreimageTree tree = build_tree(quad, {0.3, 0.0}, 5);
    const InclusionReport rep = verify_inclusion(quad, tree, b, 6);
    CHECK(rep.censored_nodes > 0);
    std::int64_t censored_listed = 0;
    for (const InclusionViolation& v : rep.violations) {
        if (v.censored) {
            ++censored_listed;
        } else {
            // any non-censored violation would be a real inclusion failure
            CHECK(v.margin >= -kImplicationTolerance);
        }
    }
    CHECK(censored_listed == rep.censored_nodes);
    CHECK(rep.n_hat >= 0); // computed over the non-censored rest
    CHECK(rep.nodes_checked == 2 + 4 + 8 + 16 + 32);
}

TEST_CASE("doubling exactness across seeded roots") {
    const MapSystem dbl = MapSystem::doubling(2);
    const RateSequence exact = make_rate_exp(kLog2);
    const CounterRng rng{808};
    for (std::uint64_t r = 0; r < 10; ++r) {
        const Point root = dbl.sample(rng, streams::kRoots, r);
        const PreimageTree tree = build_tree(dbl, root, 10);
        const SigmaProfile prof = sigma_profile(tree);
        for (int n = 0; n <= 10; ++n)
            CHECK(std::fabs(prof.sigma_log[static_cast<std::size_t>(n)] - n * kLog2) < 1e-9);
        BackwardFit fit = fit_backward(prof, exact, FitWindow{4, -1});
        const InclusionReport rep = verify_inclusion(dbl, tree, exact, 40);
        attach_inclusion(fit, rep.n_hat, dbl);
        CHECK(rep.n_hat == 0);
        CHECK(std::fabs(fit.log_cx) < 1e-9);      // C_x = 1
        CHECK(std::fabs(fit.beta - kLog2) < 1e-9); // slope log 2
        CHECK(fit.c_from_n == 1.0);
        CHECK(rep.violations.empty());
    }
}
