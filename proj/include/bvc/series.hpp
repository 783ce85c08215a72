#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace bvc {

// A finite-horizon tool cannot prove convergence; verdicts are a labeled
// proxy: dyadic block sums B_j over n in [2^j, 2^{j+1}) must shrink by the
// configured ratio for the last few complete blocks.
enum class Verdict { kConvergent, kDivergent, kDivergentOrUnknown };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::kConvergent: return "CONVERGENT";
        case Verdict::kDivergent: return "DIVERGENT";
        default: return "DIVERGENT_OR_UNKNOWN";
    }
}

inline constexpr double kBlockRatioThreshold = 0.9;
inline constexpr int kBlockRatiosRequired = 3;

struct SeriesReport {
    std::vector<double> terms;        // terms[i] is the n = i+1 term
    std::vector<double> partial_sums; // same indexing
    std::vector<double> block_sums;   // complete dyadic blocks only
    std::vector<double> block_ratios; // block_sums[j+1] / block_sums[j]
    Verdict verdict = Verdict::kDivergentOrUnknown;
};

// `terms` holds the series terms for n = 1..H. Any unresolved mass beyond the
// horizon (censored samples) defeats a finite-horizon verdict.
inline SeriesReport analyze_series(std::vector<double> terms, bool censored_mass_present) {
    SeriesReport rep;
    rep.terms = std::move(terms);
    const std::size_t h = rep.terms.size();
    rep.partial_sums.resize(h);
    double acc = 0.0;
    for (std::size_t i = 0; i < h; ++i) {
        acc += rep.terms[i];
        rep.partial_sums[i] = acc;
    }
    // complete blocks [2^j, 2^{j+1}) inside [1, h]
    for (std::size_t lo = 1; 2 * lo - 1 <= h; lo *= 2) {
        double b = 0.0;
        for (std::size_t n = lo; n < 2 * lo; ++n) b += rep.terms[n - 1];
        rep.block_sums.push_back(b);
    }
    for (std::size_t j = 0; j + 1 < rep.block_sums.size(); ++j) {
        const double prev = rep.block_sums[j];
        const double next = rep.block_sums[j + 1];
        double ratio;
        if (next == 0.0) {
            ratio = 0.0;
        } else if (prev == 0.0) {
            ratio = std::numeric_limits<double>::infinity();
        } else {
            ratio = next / prev;
        }
        rep.block_ratios.push_back(ratio);
    }

    if (censored_mass_present) {
        rep.verdict = Verdict::kDivergentOrUnknown;
        return rep;
    }
    if (rep.block_ratios.empty()) {
        double tail = 0.0;
        for (std::size_t n = 2; n <= h; ++n) tail += rep.terms[n - 1];
        rep.verdict = (h > 0 && tail == 0.0) ? Verdict::kConvergent : Verdict::kDivergentOrUnknown;
        return rep;
    }
    const std::size_t avail = rep.block_ratios.size();
    const std::size_t take = avail < static_cast<std::size_t>(kBlockRatiosRequired)
                                 ? avail
                                 : static_cast<std::size_t>(kBlockRatiosRequired);
    bool ok = true;
    for (std::size_t j = avail - take; j < avail; ++j) {
        ok = ok && rep.block_ratios[j] <= kBlockRatioThreshold;
    }
    rep.verdict = ok ? Verdict::kConvergent : Verdict::kDivergent;
    return rep;
}

} // namespace bvc
