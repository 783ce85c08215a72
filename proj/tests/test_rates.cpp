#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bvc/expansion_profile.hpp"
#include "bvc/rate_derivation.hpp"
#include "bvc/rate_sequences.hpp"
#include "bvc/rng.hpp"

using namespace bvc;

namespace {

std::vector<double> planted_exponential_gamma(double alpha, int horizon) {
    std::vector<double> g(static_cast<std::size_t>(horizon));
    for (int n = 1; n <= horizon; ++n)
        g[static_cast<std::size_t>(n) - 1] = std::exp(-alpha * n);
    return g;
}

std::vector<double> planted_poly_gamma(double alpha, int horizon) {
    std::vector<double> g(static_cast<std::size_t>(horizon));
    for (int n = 1; n <= horizon; ++n)
        g[static_cast<std::size_t>(n) - 1] = std::pow(static_cast<double>(n), -alpha);
    return g;
}

std::vector<double> planted_poly_masses(double p, int horizon) {
    std::vector<double> m(static_cast<std::size_t>(horizon));
    for (int n = 1; n <= horizon; ++n)
        m[static_cast<std::size_t>(n) - 1] = std::pow(static_cast<double>(n), -p);
    return m;
}

} // namespace

TEST_CASE("rate family values and parameter validation") {
    const RateSequence e = make_rate_exp(0.1);
    CHECK(e.log_at(0) == 0.0);
    CHECK(e.log_at(2) + e.log_at(3) == Catch::Approx(e.log_at(5)).margin(1e-12));
    CHECK(e.log_at(5) == Catch::Approx(0.5).margin(1e-12));
    CHECK(e.certified_submultiplicative());

    const RateSequence p = make_rate_poly(2.0);
    CHECK(std::exp(p.log_at(1)) == Catch::Approx(4.0).margin(1e-12));
    CHECK(std::exp(p.log_at(2)) == Catch::Approx(9.0).margin(1e-12));
    CHECK(std::exp(p.log_at(1)) * std::exp(p.log_at(1)) >= std::exp(p.log_at(2)));
    CHECK(p.certified_submultiplicative());

    CHECK(make_rate_stretched(0.3, 0.5).certified_submultiplicative());

    CHECK_THROWS_AS(make_rate_exp(0.0), config_error);
    CHECK_THROWS_AS(make_rate_poly(-1.0), config_error);
    CHECK_THROWS_AS(make_rate_stretched(0.3, 1.5), config_error);
    CHECK_THROWS_AS(make_rate_stretched(0.3, 0.0), config_error);
}

TEST_CASE("custom tables: certification verdicts and horizon refusal") {
    const RateSequence bad = make_rate_custom({2.0, 3.0, 7.0});
    CHECK_FALSE(bad.certified_submultiplicative()); // 2*3 = 6 < 7
    CHECK(bad.certification_bound() == 3);

    const RateSequence good = make_rate_custom({2.0, 3.0, 6.0});
    CHECK(good.certified_submultiplicative());
    CHECK(good.log_at(3) == Catch::Approx(std::log(6.0)).margin(1e-12));
    CHECK_THROWS_AS(good.log_at(4), config_error); // past the certified table

    CHECK_THROWS_AS(make_rate_custom({3.0, 2.0}), config_error); // non-monotone
    CHECK_THROWS_AS(make_rate_custom({-1.0}), config_error);
    CHECK_THROWS_AS(make_rate_custom({}), config_error);
}

TEST_CASE("submultiplicativity certificate holds on random pairs") {
    const CounterRng rng{424242};
    for (const RateSequence& r :
         {make_rate_exp(0.7), make_rate_stretched(0.9, 0.4), make_rate_poly(3.5)}) {
        REQUIRE(r.certified_submultiplicative());
        for (std::uint64_t i = 0; i < 5000; ++i) {
            const int k = 1 + static_cast<int>(rng.below(kCertBound, streams::kSynthetic, i, 0));
            const int n = 1 + static_cast<int>(rng.below(kCertBound, streams::kSynthetic, i, 1));
            CHECK(r.log_at(k) + r.log_at(n) >= r.log_at(k + n) - 1e-9);
        }
        // monotone non-decreasing
        for (int n = 0; n < 3000; ++n) CHECK(r.log_at(n + 1) >= r.log_at(n));
    }
}

TEST_CASE("gamma_bound implements (p-3)/(p-1)") {
    CHECK(gamma_bound(5.0) == Catch::Approx(0.5).margin(1e-15));
    CHECK(gamma_bound(3.0001) == Catch::Approx(4.9997500125e-5).epsilon(1e-6));
    CHECK_THROWS_AS(gamma_bound(3.0), hypothesis_error);
    CHECK_THROWS_AS(gamma_bound(2.0), hypothesis_error);
}

TEST_CASE("derive_b: exponential budget-equality case") {
    // planted Gamma_n = e^{-0.4 n}: gamma*alpha = 0.2 with zero slack gives
    // b = EXP(0.2) and n0 = 1 (equality at every n)
    const TailProfile prof = TailProfile::planted_gamma(planted_exponential_gamma(0.4, 60));
    const TailClass cls = classify_tail(prof);
    REQUIRE(cls.regime == TailRegime::kExponential);
    REQUIRE(cls.alpha_hat == Catch::Approx(0.4).epsilon(1e-6));

    DeriveOptions opts;
    opts.gamma_override = 0.5;
    opts.slack = 0.0;
    const DerivedRate d = derive_b(make_rate_exp(0.5), prof, cls, opts);
    CHECK(d.b.family() == RateFamily::kExp);
    CHECK(d.b.c() == Catch::Approx(0.2).margin(1e-9));
    CHECK(d.n0 == 1);
    CHECK(verify_domination(make_rate_exp(0.5), d.b, prof, d.gamma, d.n0));
}

TEST_CASE("derive_b: polynomial tails give POLY rates with scanned n0") {
    const TailProfile prof = TailProfile::planted_gamma(planted_poly_gamma(4.0, 200));
    const TailClass cls = classify_tail(prof);
    REQUIRE(cls.regime == TailRegime::kPolynomial);
    REQUIRE(cls.alpha_hat == Catch::Approx(4.0).epsilon(1e-6));

    DeriveOptions opts;
    opts.gamma_override = 0.4;
    opts.slack = 0.1;
    const RateSequence a = make_rate_exp(0.5);
    const DerivedRate d = derive_b(a, prof, cls, opts);
    CHECK(d.b.family() == RateFamily::kPoly);
    CHECK(d.b.c() == Catch::Approx(0.9 * 0.4 * 4.0).epsilon(1e-6)); // 1.6*(1-slack)

    // independent n0 oracle: first n from which beta*log(n+1) clears both caps
    const double beta = d.b.c();
    int expected_n0 = -1;
    for (int n0 = 1; n0 <= 200 && expected_n0 < 0; ++n0) {
        bool all = true;
        for (int n = n0; n <= 200 && all; ++n) {
            const double lhs = beta * std::log(static_cast<double>(n) + 1.0);
            const double cap_a = 0.5 * n;
            const double cap_g = 0.4 * 4.0 * std::log(static_cast<double>(n));
            all = lhs <= (cap_a < cap_g ? cap_a : cap_g) + 1e-9;
        }
        if (all) expected_n0 = n0;
    }
    CHECK(expected_n0 == 6);
    CHECK(d.n0 == expected_n0);
    CHECK(verify_domination(a, d.b, prof, d.gamma, d.n0));
}

TEST_CASE("derive_b rejects what the hypotheses reject") {
    const TailProfile heavy = TailProfile::planted_gamma(planted_poly_gamma(1.5, 200));
    const TailClass cls = classify_tail(heavy);
    REQUIRE(cls.regime == TailRegime::kPolynomial);
    REQUIRE(cls.alpha_hat == Catch::Approx(1.5).epsilon(1e-6));
    CHECK_THROWS_AS(derive_b(make_rate_exp(0.5), heavy, cls), hypothesis_error);

    TailClass trivial;
    trivial.regime = TailRegime::kTrivial;
    CHECK_THROWS_AS(derive_b(make_rate_exp(0.5), heavy, trivial), hypothesis_error);
    TailClass undet;
    undet.regime = TailRegime::kUndetermined;
    CHECK_THROWS_AS(derive_b(make_rate_exp(0.5), heavy, undet), hypothesis_error);

    TailClass expcls;
    expcls.regime = TailRegime::kExponential;
    expcls.alpha_hat = 0.4;
    CHECK_THROWS_AS(derive_b(make_rate_poly(2.0), heavy, expcls), config_error);
}

TEST_CASE("derive_b: stretched tails keep their tau") {
    std::vector<double> g(120);
    for (int n = 1; n <= 120; ++n)
        g[static_cast<std::size_t>(n) - 1] = std::exp(-0.3 * std::sqrt(static_cast<double>(n)));
    const TailProfile prof = TailProfile::planted_gamma(g);
    const TailClass cls = classify_tail(prof);
    REQUIRE(cls.regime == TailRegime::kStretched);
    CHECK(cls.tau_hat == Catch::Approx(0.5).margin(1e-9));
    const DerivedRate d = derive_b(make_rate_exp(0.5), prof, cls);
    CHECK(d.b.family() == RateFamily::kStretched);
    CHECK(d.b.tau() == Catch::Approx(0.5).margin(1e-9));
    CHECK(d.b.c() == Catch::Approx(0.9 * 0.5 * 0.3).epsilon(0.02));
    CHECK(verify_domination(make_rate_exp(0.5), d.b, prof, d.gamma, d.n0));
}

TEST_CASE("theorem_series verdicts match the exponent arithmetic oracle") {
    // mu(h = n) ~ n^{-5}: Gamma_n ~ n^{-4}; terms n * Gamma_n^{1-gamma}
    const TailProfile prof = TailProfile::planted_masses(planted_poly_masses(5.0, 200));

    const SeriesReport conv = theorem_series(prof, 0.25); // terms ~ n^{-2}
    CHECK(conv.verdict == Verdict::kConvergent);
    const SeriesReport div = theorem_series(prof, 0.6); // terms ~ n^{-0.6}
    CHECK(div.verdict == Verdict::kDivergent);

    // independent recomputation of the partial sums from the planted masses
    std::vector<double> gamma(201, 0.0);
    {
        double suffix = 0.0;
        for (int n = 200; n >= 1; --n) {
            suffix += prof.mu_hat[static_cast<std::size_t>(n)];
            gamma[static_cast<std::size_t>(n)] = suffix;
        }
    }
    double direct = 0.0;
    for (int n = 1; n <= 200; ++n)
        direct += n * std::pow(gamma[static_cast<std::size_t>(n)], 1.0 - 0.25);
    CHECK(conv.partial_sums.back() == Catch::Approx(direct).epsilon(1e-9));

    // geometric tails dominate the polynomial factor; the horizon must be
    // long enough that the n*e^{-0.2n} transient peak leaves the last three
    // dyadic blocks
    const TailProfile expprof = TailProfile::planted_gamma(planted_exponential_gamma(0.4, 150));
    CHECK(theorem_series(expprof, 0.5).verdict == Verdict::kConvergent);

    const TailProfile censored = TailProfile::planted_masses(planted_poly_masses(5.0, 200), 0.1);
    CHECK(theorem_series(censored, 0.25).verdict == Verdict::kDivergentOrUnknown);

    CHECK_THROWS_AS(theorem_series(prof, 0.0), config_error);
    CHECK_THROWS_AS(theorem_series(prof, 1.0), config_error);
}

TEST_CASE("lp convergence for p > 3 propagates to the theorem series") {
    // whenever sum n^p mu(n) looks convergent and gamma < (p-3)/(p-1), the
    // theorem series must look convergent too
    const TailProfile prof = TailProfile::planted_masses(planted_poly_masses(5.0, 200));
    for (double p : {3.5, 4.0, 4.2}) {
        const LpReport lp = lp_diagnostic(prof, p);
        if (lp.series.verdict != Verdict::kConvergent) continue;
        const double bound = gamma_bound(p);
        for (double f : {0.3, 0.6, 0.9}) {
            const double gamma = f * bound;
            CHECK(theorem_series(prof, gamma).verdict == Verdict::kConvergent);
        }
    }
}
