#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "bvc/dynamics.hpp"
#include "bvc/errors.hpp"
#include "bvc/expansion_profile.hpp"
#include "bvc/parallel.hpp"
#include "bvc/rate_sequences.hpp"
#include "bvc/rng.hpp"
#include "bvc/series.hpp"

namespace bvc {

// Membership is a strict log-space predicate; only implication re-checks
// (concatenation, gluing) get this slack, to absorb the non-associativity
// between one direct orbit sum and the same factors summed in segments.
inline constexpr double kImplicationTolerance = 1e-8;

inline void require_certified(const RateSequence& b) {
    if (!b.certified_submultiplicative())
        throw hypothesis_error("rate " + b.describe() + " is not certified submultiplicative");
}

// S_n(x) - log b_n; -inf for degenerate orbits
inline double membership_margin(const MapSystem& system, const Point& x, const RateSequence& b,
                                int n) {
    if (n < 1 || n > kOrbitHorizonLimit) throw config_error("membership: bad n");
    double s = 0.0;
    Point p = x;
    for (int k = 0; k < n; ++k) {
        const double lj = system.log_jacobian(p);
        if (is_degenerate_log(lj)) return kNegativeDegenerate;
        s += lj;
        if (k + 1 < n) p = system.evaluate(p);
    }
    return s - b.log_at(n);
}

// x in U_n  <=>  |det Df^n(x)| >= b_n
inline bool membership_U(const MapSystem& system, const Point& x, const RateSequence& b, int n) {
    require_certified(b);
    return membership_margin(system, x, b, n) >= 0.0;
}

// u(x) = min{ n : x in U_n } plus the chain {x, f(x), ..., f^{u-1}(x)}.
struct ChainState {
    Point base;
    bool censored = false;
    int u_value = 0; // horizon when censored
    std::vector<Point> chain;
};

// lean scan used by bulk loops; -1 when censored (horizon or degeneracy)
inline int first_entry_value(const MapSystem& system, const Point& x, const RateSequence& b,
                             int horizon) {
    double s = 0.0;
    Point p = x;
    for (int n = 1; n <= horizon; ++n) {
        const double lj = system.log_jacobian(p);
        if (is_degenerate_log(lj)) return -1;
        s += lj;
        if (s >= b.log_at(n)) return n;
        if (n < horizon) p = system.evaluate(p);
    }
    return -1;
}

inline ChainState first_entry(const MapSystem& system, const Point& x, const RateSequence& b,
                              int horizon) {
    require_certified(b);
    if (horizon < 1 || horizon > kOrbitHorizonLimit) throw config_error("first_entry: bad horizon");
    if (horizon > b.max_index()) throw config_error("first_entry: horizon past certified table");
    ChainState out;
    out.base = x;
    const int u = first_entry_value(system, x, b, horizon);
    if (u < 0) {
        out.censored = true;
        out.u_value = horizon;
        return out;
    }
    out.u_value = u;
    out.chain.reserve(static_cast<std::size_t>(u));
    Point p = x;
    for (int k = 0; k < u; ++k) {
        out.chain.push_back(p);
        if (k + 1 < u) p = system.evaluate(p);
    }
    return out;
}

// One failed implication x in U_n, f^n(x) in U_m => x in U_{n+m}.
struct ConcatViolation {
    std::uint64_t triple_index = 0;
    Point x;
    int n = 0;
    int m = 0;
    double margin = 0.0; // S_{n+m}(x) - log b_{n+m}, negative past tolerance
};

// Samples (x, n, m) triples with n + m <= horizon and reports every violation
// of the concatenation property. For a certified rate the list must be empty:
// S_{n+m}(x) = S_n(x) + S_m(f^n x) >= log b_n + log b_m >= log b_{n+m} is
// exact arithmetic; only summation order separates the two sides.
inline std::vector<ConcatViolation> concatenation_check(const MapSystem& system,
                                                        const RateSequence& b,
                                                        std::uint64_t triples, int horizon,
                                                        std::uint64_t seed, unsigned threads = 1) {
    require_certified(b);
    if (horizon < 2 || horizon > kOrbitHorizonLimit)
        throw config_error("concatenation_check: bad horizon");
    if (horizon > b.max_index())
        throw config_error("concatenation_check: horizon past certified table");
    const CounterRng rng{seed};
    const unsigned chunks = threads == 0 ? 1 : threads;
    std::vector<std::vector<ConcatViolation>> found(chunks);
    for_chunks(triples, chunks, [&](unsigned chunk, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Point x = system.sample(rng, streams::kConcat, i);
            const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(horizon - 1),
                                                         streams::kConcat, i, 2));
            const int m = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(horizon - n),
                                                         streams::kConcat, i, 3));
            const OrbitRecord orb = system.orbit(x, n + m);
            const double sn = orb.cum_log_jac[static_cast<std::size_t>(n)];
            if (is_degenerate_log(sn) || sn < b.log_at(n)) continue;
            // fresh accumulation from f^n(x), independent of orb's sums
            const double sm = membership_margin(system, orb.points[static_cast<std::size_t>(n)], b, m);
            if (is_degenerate_log(sm) || sm < 0.0) continue;
            const double margin =
                orb.cum_log_jac[static_cast<std::size_t>(n + m)] - b.log_at(n + m);
            if (margin < -kImplicationTolerance) {
                found[chunk].push_back({i, x, n, m, margin});
            }
        }
    });
    std::vector<ConcatViolation> out;
    for (auto& f : found) {
        out.insert(out.end(), f.begin(), f.end());
    }
    return out;
}

// Output of the greedy chain gluing: segment lengths (u_0, ..., u_s) stacked
// along an orbit until they first cover target_n.
struct ChainDecomposition {
    std::vector<int> segments;
    long long total = 0;
    int target_n = 0;
    bool terminal_contains_x = false;
    bool ok = false;
    long long failed_offset = -1; // orbit index with a censored/missing u-value
};

// u_along_orbit[j] is the first-entry value of f^j(z); nullopt marks censored.
// Greedy rule: if u_0 >= target_n the single chain already covers the target;
// otherwise stack u-values at offsets u_0, u_0+u_1, ... until the partial sum
// first reaches target_n.
inline ChainDecomposition glue_decomposition(std::span<const std::optional<int>> u_along_orbit,
                                             int target_n) {
    ChainDecomposition out;
    out.target_n = target_n;
    if (target_n < 1) throw config_error("glue_decomposition: target must be >= 1");
    long long offset = 0;
    while (out.total < target_n) {
        if (offset >= static_cast<long long>(u_along_orbit.size()) ||
            !u_along_orbit[static_cast<std::size_t>(offset)]) {
            out.failed_offset = offset;
            return out;
        }
        const int u = *u_along_orbit[static_cast<std::size_t>(offset)];
        if (u < 1) throw config_error("glue_decomposition: u-values must be positive");
        out.segments.push_back(u);
        out.total += u;
        offset += u;
    }
    out.ok = true;
    // the terminal chain starts at offset total - u_s < target_n and spans past it
    out.terminal_contains_x = out.total - out.segments.back() < target_n;
    return out;
}

// Tower-mass diagnostics: per-n majorized terms
// sum_{j<n} min(1, b_j * Leb(U*_n)) with U*_n = u^{-1}(n), using only the
// submultiplicative majorization of the pushforwards, never direct
// image-measure estimation.
struct TowerMassReport {
    std::vector<double> mass; // mass[n-1] = estimated Leb(U*_n)
    SeriesReport series;
    double censored_mass = 0.0;
};

inline TowerMassReport tower_mass(const RateSequence& b, const TailProfile& u_profile,
                                  int horizon = -1) {
    require_certified(b);
    const int h = horizon > 0 ? (horizon < u_profile.horizon ? horizon : u_profile.horizon)
                              : u_profile.horizon;
    if (h > b.max_index()) throw config_error("tower_mass: horizon past certified table");
    TowerMassReport rep;
    rep.censored_mass = u_profile.censored_fraction;
    rep.mass.resize(static_cast<std::size_t>(h));
    std::vector<double> terms(static_cast<std::size_t>(h));
    for (int n = 1; n <= h; ++n) {
        const double mass = u_profile.mu_hat[static_cast<std::size_t>(n)];
        rep.mass[static_cast<std::size_t>(n) - 1] = mass;
        double term = 0.0;
        if (mass > 0.0) {
            const double log_mass = std::log(mass);
            for (int j = 0; j < n; ++j) {
                const double lt = b.log_at(j) + log_mass;
                term += lt >= 0.0 ? 1.0 : std::exp(lt);
            }
        }
        terms[static_cast<std::size_t>(n) - 1] = term;
    }
    rep.series = analyze_series(std::move(terms), u_profile.censored_fraction > 0.0);
    return rep;
}

// Estimates the u-histogram (mass of U*_n = u^{-1}(n)) over a Lebesgue
// sample; the chain-level analogue of estimate_tails.
inline TailProfile estimate_u_histogram(const MapSystem& system, const RateSequence& b,
                                        int horizon, long long n_samples, std::uint64_t seed,
                                        unsigned threads = 1) {
    require_certified(b);
    if (n_samples < 100) throw config_error("estimate_u_histogram: need at least 100 samples");
    if (horizon < 1 || horizon > kOrbitHorizonLimit)
        throw config_error("estimate_u_histogram: bad horizon");
    if (horizon > b.max_index())
        throw config_error("estimate_u_histogram: horizon past certified table");
    const CounterRng rng{seed};
    const unsigned chunks = threads == 0 ? 1 : threads;
    std::vector<std::vector<long long>> counts(
        chunks, std::vector<long long>(static_cast<std::size_t>(horizon) + 1, 0));
    std::vector<long long> censored(chunks, 0);
    for_chunks(static_cast<std::size_t>(n_samples), chunks,
               [&](unsigned chunk, std::size_t begin, std::size_t end) {
                   for (std::size_t i = begin; i < end; ++i) {
                       const Point x = system.sample(rng, streams::kChains, i);
                       const int u = first_entry_value(system, x, b, horizon);
                       if (u < 0) {
                           ++censored[chunk];
                       } else {
                           ++counts[chunk][static_cast<std::size_t>(u)];
                       }
                   }
               });
    std::vector<long long> total(static_cast<std::size_t>(horizon) + 1, 0);
    long long total_censored = 0;
    for (unsigned c = 0; c < chunks; ++c) {
        total_censored += censored[c];
        for (std::size_t n = 1; n < total.size(); ++n) total[n] += counts[c][n];
    }
    return TailProfile::from_counts(total, total_censored, n_samples, seed);
}

} // namespace bvc
