#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bvc/chain_machinery.hpp"
#include "bvc/dynamics.hpp"
#include "bvc/errors.hpp"
#include "bvc/linfit.hpp"
#include "bvc/parallel.hpp"
#include "bvc/rate_sequences.hpp"

namespace bvc {

struct TreeNode {
    Point point;
    std::int32_t parent = -1; // index into the previous level
    std::int32_t branch_id = 0;
    std::int32_t multiplicity = 1; // 2 marks the quadratic double root
    double back_log_jac = 0.0;     // log |det Df^n| along the branch up to the root
};

// Leveled enumeration of the pre-image sets f^{-n}(x). Level n holds every
// pre-image inside the domain, in lexicographic branch order; back_log_jac
// accumulates the chain rule node -> parent -> ... -> root.
struct PreimageTree {
    Point root;
    int requested_depth = 0;
    std::vector<std::vector<TreeNode>> levels;
    std::vector<double> level_minima; // per complete level; sigma-hat in log space
    std::vector<std::int64_t> node_counts;
    bool truncated = false;           // node_cap hit mid-build (viana branch variance)
    std::int64_t discarded_branches = 0; // viana fiber roots outside the invariant interval

    int complete_depth() const { return static_cast<int>(levels.size()) - 1; }

    // branch ids along root -> node, "/"-separated
    std::string branch_path(int level, std::int64_t index) const {
        std::vector<std::int32_t> ids;
        std::int64_t i = index;
        for (int n = level; n >= 1; --n) {
            const TreeNode& node = levels[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)];
            ids.push_back(node.branch_id);
            i = node.parent;
        }
        std::string out;
        for (auto it = ids.rbegin(); it != ids.rend(); ++it) {
            if (!out.empty()) out += '/';
            out += std::to_string(*it);
        }
        return out;
    }
};

inline constexpr std::int64_t kDefaultNodeCap = std::int64_t{1} << 21;

inline PreimageTree build_tree(const MapSystem& system, const Point& root, int n_max,
                               std::int64_t node_cap = kDefaultNodeCap) {
    if (n_max < 0) throw config_error("build_tree: negative depth");
    if (node_cap < 1) throw config_error("build_tree: bad node cap");
    // upfront estimate from the guaranteed branch factor; the viana fiber
    // variance is handled by the mid-build cap below
    long double estimate = 1.0L;
    for (int n = 0; n < n_max; ++n) {
        estimate *= system.nominal_branching();
        if (estimate > static_cast<long double>(node_cap)) {
            throw config_error("build_tree: estimated node count " +
                               std::to_string(system.nominal_branching()) + "^" +
                               std::to_string(n_max) + " exceeds node cap " +
                               std::to_string(node_cap));
        }
    }

    PreimageTree tree;
    tree.root = root;
    tree.requested_depth = n_max;
    tree.levels.push_back({TreeNode{root, -1, 0, 1, 0.0}});
    tree.level_minima.push_back(0.0);
    tree.node_counts.push_back(1);

    for (int n = 1; n <= n_max; ++n) {
        const auto& prev = tree.levels.back();
        std::vector<TreeNode> next;
        const std::size_t most = prev.size() * static_cast<std::size_t>(system.max_branching());
        next.reserve(most < static_cast<std::size_t>(node_cap) + 1
                         ? most
                         : static_cast<std::size_t>(node_cap) + 1);
        bool over_cap = false;
        int discarded = 0;
        for (std::size_t pi = 0; pi < prev.size() && !over_cap; ++pi) {
            const auto branches = system.preimages(prev[pi].point, &discarded);
            tree.discarded_branches += discarded;
            for (const PreimageBranch& br : branches) {
                TreeNode node;
                node.point = br.point;
                node.parent = static_cast<std::int32_t>(pi);
                node.branch_id = br.branch_id;
                node.multiplicity = br.multiplicity;
                node.back_log_jac = prev[pi].back_log_jac + system.log_jacobian(br.point);
                next.push_back(node);
                if (static_cast<std::int64_t>(next.size()) > node_cap) {
                    over_cap = true;
                    break;
                }
            }
        }
        if (over_cap) {
            tree.truncated = true;
            break; // the partial level is dropped; the tree ends at n - 1
        }
        if (next.empty()) {
            tree.truncated = true;
            break;
        }
        double level_min = std::numeric_limits<double>::infinity();
        for (const TreeNode& node : next) {
            if (node.back_log_jac < level_min) level_min = node.back_log_jac;
        }
        tree.level_minima.push_back(level_min);
        tree.node_counts.push_back(static_cast<std::int64_t>(next.size()));
        tree.levels.push_back(std::move(next));
    }
    return tree;
}

// sigma-hat profile: per-level minima of back_log_jac over f^{-n}(x), ending
// at the last complete level of a truncated tree.
struct SigmaProfile {
    std::vector<int> n;
    std::vector<double> sigma_log;
    std::vector<std::int64_t> node_count;
    std::vector<std::int64_t> argmin_index;
    std::vector<std::string> argmin_path;
};

inline SigmaProfile sigma_profile(const PreimageTree& tree) {
    SigmaProfile prof;
    for (int n = 0; n <= tree.complete_depth(); ++n) {
        const auto& level = tree.levels[static_cast<std::size_t>(n)];
        std::int64_t argmin = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < level.size(); ++i) {
            if (level[i].back_log_jac < best) {
                best = level[i].back_log_jac;
                argmin = static_cast<std::int64_t>(i);
            }
        }
        prof.n.push_back(n);
        prof.sigma_log.push_back(best);
        prof.node_count.push_back(tree.node_counts[static_cast<std::size_t>(n)]);
        prof.argmin_index.push_back(argmin);
        prof.argmin_path.push_back(tree.branch_path(n, argmin));
    }
    return prof;
}

struct FitWindow {
    int lo = 4; // first levels are transient; the uniform constant absorbs them
    int hi = -1; // -1: the profile's last level
};

// Uniform-bound witness: log C_x is the worst-case residual
// min_{window}(sigma_n - log b_n), so sigma_n >= log C_x + log b_n holds at
// every fitted level by construction, not just on average. beta is the slope
// of sigma_n against the rate family's growth variable (n, n^tau, log(n+1)).
struct BackwardFit {
    RateFamily family = RateFamily::kExp;
    double log_cx = 0.0;
    double beta = 0.0;
    double fit_quality = 0.0;
    bool unreliable = false;
    int window_lo = 0;
    int window_hi = 0;
    int n_hat = -1;      // filled in from verify_inclusion
    double c_from_n = 1.0; // K^{-n_hat}
};

inline BackwardFit fit_backward(const SigmaProfile& prof, const RateSequence& b, FitWindow window) {
    BackwardFit fit;
    fit.family = b.family();
    const int last = prof.n.empty() ? -1 : prof.n.back();
    fit.window_lo = window.lo;
    fit.window_hi = window.hi < 0 ? last : window.hi;
    if (fit.window_hi > last) fit.window_hi = last;
    if (fit.window_lo < 0 || fit.window_hi - fit.window_lo + 1 < 5)
        throw config_error("fit_backward: need at least 5 levels in the fit window");

    std::vector<double> xs, ys;
    double min_resid = std::numeric_limits<double>::infinity();
    for (int n = fit.window_lo; n <= fit.window_hi; ++n) {
        const double sigma = prof.sigma_log[static_cast<std::size_t>(n)];
        if (!std::isfinite(sigma)) continue; // degenerate level minima stay out of the fit
        const double resid = sigma - b.log_at(n);
        if (resid < min_resid) min_resid = resid;
        double g;
        switch (b.family()) {
            case RateFamily::kExp: g = static_cast<double>(n); break;
            case RateFamily::kStretched: g = std::pow(static_cast<double>(n), b.tau()); break;
            case RateFamily::kPoly: g = std::log(static_cast<double>(n) + 1.0); break;
            default: g = static_cast<double>(n); break;
        }
        xs.push_back(g);
        ys.push_back(sigma);
    }
    if (xs.size() < 5) throw config_error("fit_backward: fewer than 5 finite levels in window");
    const LinearFit lf = fit_line(xs, ys);
    fit.log_cx = min_resid;
    fit.beta = lf.slope;
    fit.fit_quality = lf.r2;
    fit.unreliable = lf.r2 < 0.5;
    return fit;
}

inline double cx_from_N(int n, const MapSystem& system) {
    if (n < 0) throw config_error("cx_from_N: N must be >= 0");
    return std::exp(-static_cast<double>(n) * system.sup_log_jac());
}

inline void attach_inclusion(BackwardFit& fit, int n_hat, const MapSystem& system) {
    fit.n_hat = n_hat;
    fit.c_from_n = cx_from_N(n_hat, system);
}

struct InclusionViolation {
    int level = 0;
    std::int64_t node = 0;
    bool censored = false;       // first_entry censored at this node or an ancestor
    long long glued_total = -1;  // covering index m when the glue succeeded
    double margin = 0.0;         // membership margin at m (when applicable)
};

// Per-node verification of the chain gluing: every non-censored node y at
// level n is covered by some U_m with n <= m <= n + N_hat, re-checked through
// the membership predicate. Also tracks the quantified form of the backward
// volume-quotient bound along the way.
struct InclusionReport {
    int n_hat = 0;
    std::int64_t nodes_checked = 0;
    std::int64_t censored_nodes = 0;
    std::vector<InclusionViolation> violations;
    double min_membership_margin = std::numeric_limits<double>::infinity();
    // back_log_jac(y) + (m - n) * log K - log b_m  >= 0 up to tolerance
    double min_quotient_margin = std::numeric_limits<double>::infinity();
    // back_log_jac(y) - log b_n - log cx_from_N(n_hat) >= 0 up to tolerance
    double min_uniform_margin = std::numeric_limits<double>::infinity();
};

inline InclusionReport verify_inclusion(const MapSystem& system, const PreimageTree& tree,
                                        const RateSequence& b, int horizon,
                                        unsigned threads = 1) {
    require_certified(b);
    const int depth = tree.complete_depth();
    if (horizon < depth) throw config_error("verify_inclusion: horizon below tree depth");
    if (horizon > b.max_index())
        throw config_error("verify_inclusion: horizon past certified table");

    // phase 1: first-entry value for every node, level by level
    std::vector<std::vector<int>> u_by_level(static_cast<std::size_t>(depth) + 1);
    for (int n = 0; n <= depth; ++n) {
        const auto& level = tree.levels[static_cast<std::size_t>(n)];
        auto& us = u_by_level[static_cast<std::size_t>(n)];
        us.assign(level.size(), -1);
        for_chunks(level.size(), threads, [&](unsigned, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                us[i] = first_entry_value(system, level[i].point, b, horizon);
            }
        });
    }

    InclusionReport rep;
    int max_excess = 0;
    for (int n = 1; n <= depth; ++n) {
        const auto& us = u_by_level[static_cast<std::size_t>(n)];
        for (std::size_t i = 0; i < us.size(); ++i) {
            if (us[i] >= 0 && us[i] - n > max_excess) max_excess = us[i] - n;
        }
    }
    rep.n_hat = max_excess;

    // phase 2: glue along ancestors and re-check membership at the glued total
    const double log_k = system.sup_log_jac();
    const double uniform_shift = static_cast<double>(rep.n_hat) * log_k;
    for (int n = 1; n <= depth; ++n) {
        const auto& level = tree.levels[static_cast<std::size_t>(n)];
        const auto& us = u_by_level[static_cast<std::size_t>(n)];
        std::vector<InclusionReport> chunk_reps(threads == 0 ? 1 : threads);
        for_chunks(level.size(), threads, [&](unsigned chunk, std::size_t begin, std::size_t end) {
            InclusionReport& local = chunk_reps[chunk];
            std::vector<std::optional<int>> u_along;
            for (std::size_t i = begin; i < end; ++i) {
                ++local.nodes_checked;
                if (us[i] < 0) {
                    ++local.censored_nodes;
                    local.violations.push_back({n, static_cast<std::int64_t>(i), true, -1, 0.0});
                    continue;
                }
                long long m;
                if (us[i] >= n) {
                    m = us[i]; // the node's own chain already covers the root
                } else {
                    u_along.assign(static_cast<std::size_t>(n), std::nullopt);
                    u_along[0] = us[i];
                    std::int64_t anc = level[i].parent;
                    for (int j = 1; j < n; ++j) {
                        const int anc_level = n - j; // f^j of the node
                        const int anc_u =
                            u_by_level[static_cast<std::size_t>(anc_level)][static_cast<std::size_t>(anc)];
                        if (anc_u >= 0) u_along[static_cast<std::size_t>(j)] = anc_u;
                        anc = tree.levels[static_cast<std::size_t>(anc_level)][static_cast<std::size_t>(anc)].parent;
                    }
                    const ChainDecomposition dec = glue_decomposition(u_along, n);
                    if (!dec.ok) {
                        ++local.censored_nodes;
                        local.violations.push_back({n, static_cast<std::int64_t>(i), true, -1, 0.0});
                        continue;
                    }
                    m = dec.total;
                }
                if (m > static_cast<long long>(b.max_index())) {
                    // glued total past a CUSTOM table's certified length:
                    // unverifiable at this horizon, reported like censoring
                    ++local.censored_nodes;
                    local.violations.push_back({n, static_cast<std::int64_t>(i), true, m, 0.0});
                    continue;
                }
                const double margin =
                    membership_margin(system, level[i].point, b, static_cast<int>(m));
                if (margin < local.min_membership_margin) local.min_membership_margin = margin;
                const double quotient = level[i].back_log_jac +
                                        static_cast<double>(m - n) * log_k - b.log_at(static_cast<int>(m));
                if (quotient < local.min_quotient_margin) local.min_quotient_margin = quotient;
                const double uniform = level[i].back_log_jac + uniform_shift - b.log_at(n);
                if (uniform < local.min_uniform_margin) local.min_uniform_margin = uniform;
                if (margin < -kImplicationTolerance || m > static_cast<long long>(n) + rep.n_hat) {
                    local.violations.push_back({n, static_cast<std::int64_t>(i), false, m, margin});
                }
            }
        });
        for (auto& local : chunk_reps) {
            rep.nodes_checked += local.nodes_checked;
            rep.censored_nodes += local.censored_nodes;
            rep.violations.insert(rep.violations.end(), local.violations.begin(),
                                  local.violations.end());
            if (local.min_membership_margin < rep.min_membership_margin)
                rep.min_membership_margin = local.min_membership_margin;
            if (local.min_quotient_margin < rep.min_quotient_margin)
                rep.min_quotient_margin = local.min_quotient_margin;
            if (local.min_uniform_margin < rep.min_uniform_margin)
                rep.min_uniform_margin = local.min_uniform_margin;
        }
    }
    return rep;
}

} // namespace bvc
