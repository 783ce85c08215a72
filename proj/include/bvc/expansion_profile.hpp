#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "bvc/dynamics.hpp"
#include "bvc/errors.hpp"
#include "bvc/linfit.hpp"
#include "bvc/parallel.hpp"
#include "bvc/rate_sequences.hpp"
#include "bvc/rng.hpp"
#include "bvc/series.hpp"

namespace bvc {

// h(x) = min{ n > 0 : |det Df^n(x)| >= a_n }, scanned up to a horizon.
struct HittingResult {
    bool censored = false;
    int value = 0;       // hitting time, or the horizon when censored
    double margin = 0.0; // S_n - log a_n at the hit; max deficit over the scan when censored
};

inline HittingResult hitting_time(const MapSystem& system, const Point& x,
                                  const RateSequence& a, int horizon) {
    if (horizon < 1 || horizon > kOrbitHorizonLimit)
        throw config_error("hitting_time: horizon outside configured orbit limit");
    if (horizon > a.max_index())
        throw config_error("hitting_time: horizon past the rate's certified table");
    double s = 0.0;
    double max_deficit = -std::numeric_limits<double>::infinity();
    Point p = x;
    for (int n = 1; n <= horizon; ++n) {
        const double lj = system.log_jacobian(p);
        if (is_degenerate_log(lj)) {
            return {true, horizon, kNegativeDegenerate};
        }
        s += lj;
        const double margin = s - a.log_at(n);
        if (margin >= 0.0) return {false, n, margin};
        if (margin > max_deficit) max_deficit = margin;
        if (n < horizon) p = system.evaluate(p);
    }
    return {true, horizon, max_deficit};
}

// Empirical histogram of h over a Lebesgue sample, with the tail measures
// Gamma_n = Leb{h >= n}. Lebesgue is normalized to a probability on the
// domain. Planted (synthetic) profiles carry sample_size = 0 and are taken
// literally, without renormalization.
struct TailProfile {
    int horizon = 0;
    std::vector<double> mu_hat;     // mu_hat[n], n = 1..horizon; [0] unused
    std::vector<double> gamma_tail; // gamma_tail[n] = sum_{k>=n} mu_hat[k] + censored
    double censored_fraction = 0.0;
    long long sample_size = 0;
    std::uint64_t seed = 0;

    static TailProfile from_counts(const std::vector<long long>& counts, long long censored,
                                   long long n_samples, std::uint64_t seed) {
        TailProfile t;
        t.horizon = static_cast<int>(counts.size()) - 1;
        t.sample_size = n_samples;
        t.seed = seed;
        t.mu_hat.assign(counts.size(), 0.0);
        t.gamma_tail.assign(counts.size(), 0.0);
        const double n = static_cast<double>(n_samples);
        long long suffix = censored;
        for (int k = t.horizon; k >= 1; --k) {
            t.mu_hat[static_cast<std::size_t>(k)] = static_cast<double>(counts[static_cast<std::size_t>(k)]) / n;
            suffix += counts[static_cast<std::size_t>(k)];
            t.gamma_tail[static_cast<std::size_t>(k)] = static_cast<double>(suffix) / n;
        }
        t.censored_fraction = static_cast<double>(censored) / n;
        return t;
    }

    // masses[n-1] is proportional to mu(h = n); normalized together with the
    // censored share to a probability
    static TailProfile planted_masses(const std::vector<double>& masses, double censored_mass = 0.0) {
        if (masses.empty()) throw config_error("planted_masses: empty");
        TailProfile t;
        t.horizon = static_cast<int>(masses.size());
        t.sample_size = 0;
        double total = censored_mass;
        for (double m : masses) {
            if (m < 0.0) throw config_error("planted_masses: negative mass");
            total += m;
        }
        if (!(total > 0.0)) throw config_error("planted_masses: zero mass");
        t.mu_hat.assign(static_cast<std::size_t>(t.horizon) + 1, 0.0);
        t.gamma_tail.assign(static_cast<std::size_t>(t.horizon) + 1, 0.0);
        t.censored_fraction = censored_mass / total;
        double suffix = t.censored_fraction;
        for (int n = t.horizon; n >= 1; --n) {
            t.mu_hat[static_cast<std::size_t>(n)] = masses[static_cast<std::size_t>(n) - 1] / total;
            suffix += t.mu_hat[static_cast<std::size_t>(n)];
            t.gamma_tail[static_cast<std::size_t>(n)] = suffix;
        }
        return t;
    }

    // gamma[n-1] = Gamma_n taken literally (no normalization); the mass at the
    // horizon absorbs everything beyond it, so censored_fraction stays 0
    static TailProfile planted_gamma(const std::vector<double>& gamma) {
        if (gamma.empty()) throw config_error("planted_gamma: empty");
        TailProfile t;
        t.horizon = static_cast<int>(gamma.size());
        t.sample_size = 0;
        t.mu_hat.assign(static_cast<std::size_t>(t.horizon) + 1, 0.0);
        t.gamma_tail.assign(static_cast<std::size_t>(t.horizon) + 1, 0.0);
        for (int n = 1; n <= t.horizon; ++n) {
            const double g = gamma[static_cast<std::size_t>(n) - 1];
            const double next = n < t.horizon ? gamma[static_cast<std::size_t>(n)] : 0.0;
            if (g < next - 1e-15) throw config_error("planted_gamma: tail must be non-increasing");
            t.gamma_tail[static_cast<std::size_t>(n)] = g;
            t.mu_hat[static_cast<std::size_t>(n)] = g - next;
        }
        return t;
    }
};

inline TailProfile estimate_tails(const MapSystem& system, const RateSequence& a, int horizon,
                                  long long n_samples, std::uint64_t seed, unsigned threads = 1) {
    if (n_samples < 100) throw config_error("estimate_tails: need at least 100 samples");
    if (horizon < 1 || horizon > kOrbitHorizonLimit)
        throw config_error("estimate_tails: bad horizon");
    if (horizon > a.max_index())
        throw config_error("estimate_tails: horizon past the rate's certified table");
    const CounterRng rng{seed};
    const unsigned chunks = threads == 0 ? 1 : threads;
    std::vector<std::vector<long long>> counts(chunks,
                                               std::vector<long long>(static_cast<std::size_t>(horizon) + 1, 0));
    std::vector<long long> censored(chunks, 0);
    for_chunks(static_cast<std::size_t>(n_samples), chunks,
               [&](unsigned chunk, std::size_t begin, std::size_t end) {
                   auto& local = counts[chunk];
                   for (std::size_t i = begin; i < end; ++i) {
                       const Point x = system.sample(rng, streams::kTails, i);
                       const HittingResult h = hitting_time(system, x, a, horizon);
                       if (h.censored) {
                           ++censored[chunk];
                       } else {
                           ++local[static_cast<std::size_t>(h.value)];
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

enum class TailRegime { kExponential, kStretched, kPolynomial, kTrivial, kUndetermined };

inline const char* to_string(TailRegime r) {
    switch (r) {
        case TailRegime::kExponential: return "EXPONENTIAL";
        case TailRegime::kStretched: return "STRETCHED";
        case TailRegime::kPolynomial: return "POLYNOMIAL";
        case TailRegime::kTrivial: return "TRIVIAL";
        default: return "UNDETERMINED";
    }
}

struct TailClass {
    TailRegime regime = TailRegime::kUndetermined;
    double alpha_hat = 0.0;
    double tau_hat = 0.0;
    double log_c_hat = 0.0;
    double fit_quality = 0.0;
    int window_lo = 0;
    int window_hi = 0;
    std::string note;
};

// classification fit window: [kFitWindowLo, last n with >= kMinSurvivors
// surviving samples]; small-n transients and large-n Monte Carlo noise both
// bias the regression
inline constexpr int kFitWindowLo = 5;
inline constexpr long long kMinSurvivors = 30;
inline constexpr int kMinWindowPoints = 4;
// EXP is the tau = 1 member of the STRETCHED family, so raw max-R^2 would
// never select it; simpler families win ties within this tolerance. Planted
// noiseless stretched tails beat the exponential fit by >= 0.026 R^2 on the
// acceptance horizons, so 0.015 separates real stretching from noise.
inline constexpr double kModelTieTolerance = 1.5e-2;

inline std::pair<int, int> classification_window(const TailProfile& t) {
    int hi = 0;
    for (int n = 1; n <= t.horizon; ++n) {
        const double g = t.gamma_tail[static_cast<std::size_t>(n)];
        if (g <= 0.0) break;
        if (t.sample_size > 0 && g * static_cast<double>(t.sample_size) < static_cast<double>(kMinSurvivors))
            break;
        hi = n;
    }
    return {kFitWindowLo, hi};
}

// Fits log Gamma_n against -alpha*n + logC, -alpha*n^tau + logC and
// -alpha*log n + logC over the window and reports the best fit, with the
// parsimony tie-break described above.
inline TailClass classify_tail(const TailProfile& t) {
    TailClass out;

    bool trivial = t.censored_fraction == 0.0;
    for (int n = 2; trivial && n <= t.horizon; ++n) {
        trivial = t.gamma_tail[static_cast<std::size_t>(n)] == 0.0;
    }
    if (trivial) {
        out.regime = TailRegime::kTrivial;
        out.fit_quality = 1.0;
        return out;
    }

    int nonzero = 0;
    for (int n = 1; n <= t.horizon; ++n) {
        if (t.gamma_tail[static_cast<std::size_t>(n)] > 0.0) ++nonzero;
    }
    if (nonzero < 10) {
        out.note = "fewer than 10 non-zero tail entries";
        return out;
    }

    const auto [lo, hi] = classification_window(t);
    out.window_lo = lo;
    out.window_hi = hi;
    if (hi - lo + 1 < kMinWindowPoints) {
        out.note = "fit window too short";
        return out;
    }

    std::vector<double> ns, ys;
    for (int n = lo; n <= hi; ++n) {
        ns.push_back(static_cast<double>(n));
        ys.push_back(std::log(t.gamma_tail[static_cast<std::size_t>(n)]));
    }

    struct Candidate {
        TailRegime regime;
        double alpha, tau, logc, r2;
    };
    std::vector<Candidate> cands;

    const LinearFit exp_fit = fit_line(ns, ys);
    if (exp_fit.slope < 0.0)
        cands.push_back({TailRegime::kExponential, -exp_fit.slope, 1.0, exp_fit.intercept, exp_fit.r2});

    std::vector<double> xs(ns.size());
    for (std::size_t i = 0; i < ns.size(); ++i) xs[i] = std::log(ns[i]);
    const LinearFit poly_fit = fit_line(xs, ys);
    if (poly_fit.slope < 0.0)
        cands.push_back({TailRegime::kPolynomial, -poly_fit.slope, 0.0, poly_fit.intercept, poly_fit.r2});

    Candidate best_stretched{TailRegime::kStretched, 0, 0, 0, -1.0};
    for (int g = 1; g <= 20; ++g) {
        const double tau = 0.05 * g;
        for (std::size_t i = 0; i < ns.size(); ++i) xs[i] = std::pow(ns[i], tau);
        const LinearFit f = fit_line(xs, ys);
        if (f.slope < 0.0 && f.r2 > best_stretched.r2) {
            best_stretched = {TailRegime::kStretched, -f.slope, tau, f.intercept, f.r2};
        }
    }
    if (best_stretched.r2 >= 0.0) cands.push_back(best_stretched);

    if (cands.empty()) {
        out.note = "no decaying fit";
        return out;
    }
    double best_r2 = -1.0;
    for (const auto& c : cands) best_r2 = c.r2 > best_r2 ? c.r2 : best_r2;
    const Candidate* pick = nullptr;
    for (TailRegime pref : {TailRegime::kExponential, TailRegime::kPolynomial, TailRegime::kStretched}) {
        for (const auto& c : cands) {
            if (c.regime == pref && c.r2 >= best_r2 - kModelTieTolerance) {
                pick = &c;
                break;
            }
        }
        if (pick) break;
    }
    out.regime = pick->regime;
    out.alpha_hat = pick->alpha;
    out.tau_hat = pick->tau;
    out.log_c_hat = pick->logc;
    out.fit_quality = pick->r2;
    return out;
}

// Partial sums of sum_n n^p mu(h = n), the least K with mu(h = n) <= K n^{-p}
// on the support, and the dyadic-block convergence verdict.
struct LpReport {
    double p = 0.0;
    double k_min = 0.0;
    SeriesReport series;
};

inline LpReport lp_diagnostic(const TailProfile& t, double p) {
    if (!(p > 0.0)) throw config_error("lp_diagnostic: need p > 0");
    LpReport rep;
    rep.p = p;
    std::vector<double> terms(static_cast<std::size_t>(t.horizon));
    for (int n = 1; n <= t.horizon; ++n) {
        const double mu = t.mu_hat[static_cast<std::size_t>(n)];
        const double np = std::pow(static_cast<double>(n), p);
        terms[static_cast<std::size_t>(n) - 1] = np * mu;
        if (mu > 0.0 && np * mu > rep.k_min) rep.k_min = np * mu;
    }
    rep.series = analyze_series(std::move(terms), t.censored_fraction > 0.0);
    return rep;
}

} // namespace bvc
