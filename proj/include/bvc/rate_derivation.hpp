#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bvc/errors.hpp"
#include "bvc/expansion_profile.hpp"
#include "bvc/rate_sequences.hpp"
#include "bvc/series.hpp"

namespace bvc {

// A backward rate b with the witnesses making it usable: the first index n0
// from which b_n <= min{a_n, Gamma_n^{-gamma}} holds on the profile horizon.
struct DerivedRate {
    RateSequence b;
    int n0 = 0;
    double gamma = 0.0;
    double slack = 0.0;
};

struct DeriveOptions {
    std::optional<double> gamma_override;
    double slack = 0.1; // beta takes (1 - slack) of the theoretical budget
    std::optional<RateFamily> family_override;
};

// log of the domination bound min{a_n, Gamma_n^{-gamma}}; empirical zeros of
// Gamma_n make the second factor +inf
inline double domination_log_bound(const RateSequence& a, const TailProfile& t, double gamma, int n) {
    const double la = a.log_at(n);
    const double g = t.gamma_tail[static_cast<std::size_t>(n)];
    if (g <= 0.0) return la;
    const double lg = -gamma * std::log(g);
    return la < lg ? la : lg;
}

// The budget-equality case (beta exactly gamma*alpha on a planted tail) sits
// on a float knife edge; comparisons get the certification tolerance.
inline constexpr double kDominationTolerance = kCertTolerance;

// least n0 with log b_n <= domination bound for every n in [n0, horizon];
// CUSTOM tables are only inspected up to their certified length
inline std::optional<int> scan_n0(const RateSequence& a, const RateSequence& b,
                                  const TailProfile& t, double gamma) {
    const int top = t.horizon < b.max_index() ? t.horizon : b.max_index();
    std::optional<int> candidate;
    for (int n = top; n >= 1; --n) {
        if (b.log_at(n) <= domination_log_bound(a, t, gamma, n) + kDominationTolerance) {
            candidate = n;
        } else {
            break;
        }
    }
    return candidate;
}

inline bool verify_domination(const RateSequence& a, const RateSequence& b,
                              const TailProfile& t, double gamma, int n0) {
    const int top = t.horizon < b.max_index() ? t.horizon : b.max_index();
    for (int n = n0; n <= top; ++n) {
        if (b.log_at(n) > domination_log_bound(a, t, gamma, n) + kDominationTolerance) return false;
    }
    return n0 >= 1 && n0 <= top;
}

// Builds the backward rate matching the classified tail regime:
//   EXPONENTIAL(alpha)      -> EXP(beta),          beta = (1-slack)*min(lambda, gamma*alpha)
//   STRETCHED(alpha, tau)   -> STRETCHED(beta,tau), beta = (1-slack)*min(lambda, gamma*alpha)
//   POLYNOMIAL(alpha), a>2  -> POLY(beta),          beta = (1-slack)*gamma*alpha
// gamma defaults to 0.5 (EXP/STRETCHED) or 0.5*(1 - 2/alpha) (POLY: keeps the
// tower series budget alpha*(1-gamma) > 2 half-spent).
inline DerivedRate derive_b(const RateSequence& a, const TailProfile& profile,
                            const TailClass& cls, const DeriveOptions& opts = {}) {
    if (a.family() != RateFamily::kExp)
        throw config_error("derive_b: threshold sequence must be EXP(lambda)");
    if (cls.regime == TailRegime::kTrivial || cls.regime == TailRegime::kUndetermined)
        throw hypothesis_error(std::string("derive_b: tail class ") + to_string(cls.regime) +
                               " pins no rate");
    if (!(opts.slack >= 0.0) || !(opts.slack < 1.0))
        throw config_error("derive_b: slack must be in [0, 1)");

    const double lambda = a.c();
    const double alpha = cls.alpha_hat;
    RateFamily family;
    switch (cls.regime) {
        case TailRegime::kExponential: family = RateFamily::kExp; break;
        case TailRegime::kStretched: family = RateFamily::kStretched; break;
        default: family = RateFamily::kPoly; break;
    }
    if (opts.family_override) {
        if (*opts.family_override == RateFamily::kCustom)
            throw config_error("derive_b: cannot derive a CUSTOM rate");
        family = *opts.family_override;
    }

    double gamma;
    if (opts.gamma_override) {
        gamma = *opts.gamma_override;
    } else if (family == RateFamily::kPoly) {
        gamma = alpha > 2.0 ? 0.5 * (1.0 - 2.0 / alpha) : 0.0;
    } else {
        gamma = 0.5;
    }
    if (family == RateFamily::kPoly && !(alpha > 2.0))
        throw hypothesis_error("derive_b: polynomial tail needs alpha > 2, got alpha = " +
                               std::to_string(alpha));
    if (!(gamma > 0.0) || !(gamma < 1.0))
        throw config_error("derive_b: gamma must be in (0, 1)");

    const double keep = 1.0 - opts.slack;
    RateSequence b = [&] {
        switch (family) {
            case RateFamily::kExp:
                return make_rate_exp(keep * (lambda < gamma * alpha ? lambda : gamma * alpha));
            case RateFamily::kStretched: {
                const double tau = cls.tau_hat > 0.0 && cls.tau_hat <= 1.0 ? cls.tau_hat : 0.5;
                return make_rate_stretched(keep * (lambda < gamma * alpha ? lambda : gamma * alpha), tau);
            }
            default:
                return make_rate_poly(keep * gamma * alpha);
        }
    }();

    const std::optional<int> n0 = scan_n0(a, b, profile, gamma);
    if (!n0)
        throw hypothesis_error("derive_b: no n0 within horizon dominates " + b.describe());
    return {std::move(b), *n0, gamma, opts.slack};
}

// Partial sums of sum_n n * Gamma_n^{1-gamma} with the dyadic-block verdict;
// the quantity the concatenation argument actually consumes.
inline SeriesReport theorem_series(const TailProfile& t, double gamma) {
    if (!(gamma > 0.0) || !(gamma < 1.0)) throw config_error("theorem_series: gamma in (0, 1)");
    std::vector<double> terms(static_cast<std::size_t>(t.horizon));
    for (int n = 1; n <= t.horizon; ++n) {
        const double g = t.gamma_tail[static_cast<std::size_t>(n)];
        terms[static_cast<std::size_t>(n) - 1] =
            g > 0.0 ? static_cast<double>(n) * std::pow(g, 1.0 - gamma) : 0.0;
    }
    return analyze_series(std::move(terms), t.censored_fraction > 0.0);
}

} // namespace bvc
