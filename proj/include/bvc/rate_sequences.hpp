#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bvc/errors.hpp"

namespace bvc {

enum class RateFamily { kExp, kStretched, kPoly, kCustom };

inline const char* to_string(RateFamily f) {
    switch (f) {
        case RateFamily::kExp: return "EXP";
        case RateFamily::kStretched: return "STRETCHED";
        case RateFamily::kPoly: return "POLY";
        default: return "CUSTOM";
    }
}

// pairwise submultiplicativity is checked exhaustively up to this bound
inline constexpr int kCertBound = 2000;
inline constexpr double kCertTolerance = 1e-9;

// A monotone non-decreasing sequence b_n with b_0 = 1, from one of the
// closed-form families
//
//   EXP(c):          b_n = e^{c n}
//   STRETCHED(c,t):  b_n = e^{c n^t},   0 < t <= 1
//   POLY(c):         b_n = (n + 1)^c
//
// or a tabulated CUSTOM sequence. POLY uses (n+1)^c rather than n^c: n^c
// breaks b_k b_n >= b_{k+n} at k = 1, while (k+1)(n+1) >= k+n+1 always holds.
//
// certified_submultiplicative() records the exhaustive pairwise check
// b_k b_n >= b_{k+n} for 1 <= k, n <= certification_bound() (log-space,
// tolerance kCertTolerance); the closed-form families additionally hold
// analytically for all k, n. CUSTOM tables refuse indices past their length.
class RateSequence {
public:
    // default-constructed sequences are inert placeholders (b_n = 1,
    // uncertified); build real ones through the make_rate_* factories
    RateSequence() = default;

    double log_at(int n) const {
        if (n <= 0) return 0.0;
        switch (family_) {
            case RateFamily::kExp: return c_ * n;
            case RateFamily::kStretched: return c_ * std::pow(static_cast<double>(n), tau_);
            case RateFamily::kPoly: return c_ * std::log(static_cast<double>(n) + 1.0);
            default:
                if (static_cast<std::size_t>(n) > table_.size()) {
                    throw config_error("CUSTOM rate: index " + std::to_string(n) +
                                       " past certified table of length " +
                                       std::to_string(table_.size()));
                }
                return table_[static_cast<std::size_t>(n) - 1];
        }
    }

    RateFamily family() const { return family_; }
    double c() const { return c_; }
    double tau() const { return tau_; }
    bool certified_submultiplicative() const { return certified_; }
    int certification_bound() const { return cert_bound_; }
    // largest index log_at accepts; INT_MAX-ish for closed forms
    int max_index() const {
        return family_ == RateFamily::kCustom ? static_cast<int>(table_.size())
                                              : kOrbitableLimit;
    }
    const std::vector<double>& custom_log_table() const { return table_; }

    std::string describe() const {
        switch (family_) {
            case RateFamily::kExp: return "EXP(" + std::to_string(c_) + ")";
            case RateFamily::kStretched:
                return "STRETCHED(" + std::to_string(c_) + ", " + std::to_string(tau_) + ")";
            case RateFamily::kPoly: return "POLY(" + std::to_string(c_) + ")";
            default: return "CUSTOM[" + std::to_string(table_.size()) + "]";
        }
    }

    friend RateSequence make_rate_exp(double c);
    friend RateSequence make_rate_stretched(double c, double tau);
    friend RateSequence make_rate_poly(double c);
    friend RateSequence make_rate_custom(std::vector<double> values);

private:
    static constexpr int kOrbitableLimit = 1 << 20;

    // exhaustive pairwise check over 1 <= k <= n, k + n <= 2 * bound
    bool exhaustive_check(int bound) const {
        for (int k = 1; k <= bound; ++k) {
            const double lk = log_at(k);
            for (int n = k; n <= bound && k + n <= 2 * bound; ++n) {
                if (family_ == RateFamily::kCustom &&
                    static_cast<std::size_t>(k + n) > table_.size())
                    break;
                if (lk + log_at(n) < log_at(k + n) - kCertTolerance) return false;
            }
        }
        return true;
    }

    void certify() {
        cert_bound_ = kCertBound;
        if (family_ == RateFamily::kCustom) {
            cert_bound_ = static_cast<int>(table_.size());
        }
        certified_ = exhaustive_check(cert_bound_);
    }

    RateFamily family_ = RateFamily::kExp;
    double c_ = 0.0;
    double tau_ = 1.0;
    std::vector<double> table_; // log b_1 .. log b_m for CUSTOM
    bool certified_ = false;
    int cert_bound_ = 0;
};

inline RateSequence make_rate_exp(double c) {
    if (!(c > 0.0)) throw config_error("EXP rate: need c > 0");
    RateSequence r;
    r.family_ = RateFamily::kExp;
    r.c_ = c;
    r.certify();
    return r;
}

inline RateSequence make_rate_stretched(double c, double tau) {
    if (!(c > 0.0)) throw config_error("STRETCHED rate: need c > 0");
    if (!(tau > 0.0) || !(tau <= 1.0)) throw config_error("STRETCHED rate: need tau in (0, 1]");
    RateSequence r;
    r.family_ = RateFamily::kStretched;
    r.c_ = c;
    r.tau_ = tau;
    r.certify();
    return r;
}

inline RateSequence make_rate_poly(double c) {
    if (!(c > 0.0)) throw config_error("POLY rate: need c > 0");
    RateSequence r;
    r.family_ = RateFamily::kPoly;
    r.c_ = c;
    r.certify();
    return r;
}

// `values` are the sequence values b_1..b_m themselves (not logs). Monotone
// positive tables are accepted; tables failing the exhaustive pairwise check
// come back with certified_submultiplicative() == false.
inline RateSequence make_rate_custom(std::vector<double> values) {
    if (values.empty()) throw config_error("CUSTOM rate: empty table");
    RateSequence r;
    r.family_ = RateFamily::kCustom;
    r.table_.reserve(values.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0)) throw config_error("CUSTOM rate: values must be positive");
        const double lv = std::log(values[i]);
        if (i > 0 && lv < prev) throw config_error("CUSTOM rate: table must be non-decreasing");
        r.table_.push_back(lv);
        prev = lv;
    }
    r.certify();
    return r;
}

// Integrability budget gamma < (p-3)/(p-1): the largest usable gamma for a
// given integrability exponent p > 3.
inline double gamma_bound(double p) {
    if (!(p > 3.0)) throw hypothesis_error("gamma_bound: requires p > 3");
    return (p - 3.0) / (p - 1.0);
}

} // namespace bvc
