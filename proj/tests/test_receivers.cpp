#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/special_functions/erf.hpp>

#include "qillum/error.hpp"
#include "qillum/receivers.hpp"
#include "qillum/special.hpp"

using namespace qillum;

namespace {

const ScenarioParams ref{0.01, 20.0, 0.01, 1};

// Per-mode Bhattacharyya exponent of two geometric laws by brute-force series.
double bhattacharyya_series(double n0, double n1, int terms) {
    long double acc = 0.0L;
    for (int n = 0; n < terms; ++n) {
        const long double l0 = n * std::log(static_cast<long double>(n0)) - (n + 1) * std::log1p(static_cast<long double>(n0));
        const long double l1 = n * std::log(static_cast<long double>(n1)) - (n + 1) * std::log1p(static_cast<long double>(n1));
        acc += std::exp(0.5L * (l0 + l1));
    }
    return -static_cast<double>(std::log(acc));
}

}  // namespace

TEST_CASE("OPA photon statistics") {
    const OpaConfig cfg = default_opa_config(ref);
    CHECK(cfg.epsilon_sq() == doctest::Approx(0.01 / std::sqrt(20.0)).epsilon(1e-12));
    CHECK(default_epsilon_sq(ref) == doctest::Approx(2.2360679775e-3).epsilon(1e-10));
    const OpaStatistics s = opa_statistics(ref, cfg);
    // Direct evaluation of the mean-photon formulas.
    const double g = cfg.gain, ns = 0.01, nb = 20.0, k = 0.01;
    const double n0 = g * ns + (g - 1) * (1 + nb);
    const double n1 = g * ns + (g - 1) * (1 + nb + k * ns) + 2 * std::sqrt(g * (g - 1)) * std::sqrt(k * ns * (ns + 1));
    CHECK(s.n0 == doctest::Approx(n0).epsilon(1e-14));
    CHECK(s.n1 == doctest::Approx(n1).epsilon(1e-14));
    CHECK(s.n0 == doctest::Approx(0.056980).epsilon(1e-4));
    CHECK(s.n1 == doctest::Approx(0.057932).epsilon(1e-4));
    CHECK(s.sigma0 == doctest::Approx(std::sqrt(n0 * (n0 + 1))));
    CHECK(opa_exponent(s) == doctest::Approx(1.864e-6).epsilon(1e-3));

    ScenarioParams pm = ref;
    pm.m = 1000;
    const OpaStatistics t = opa_statistics(pm, cfg);
    CHECK(t.threshold == static_cast<std::int64_t>(std::ceil(1000.0 * (t.sigma1 * t.n0 + t.sigma0 * t.n1) / (t.sigma0 + t.sigma1))));

    ScenarioParams nb1 = ref;
    nb1.n_b = 1.0;
    CHECK(default_epsilon_sq(nb1) == doctest::Approx(nb1.n_s));
    ScenarioParams ns0 = ref;
    ns0.n_s = 0.0;
    CHECK(default_epsilon_sq(ns0) == 0.0);
}

TEST_CASE("OPA degenerate inputs") {
    OpaConfig unit;
    unit.gain = 1.0;
    const OpaStatistics s = opa_statistics(ref, unit);
    CHECK(s.n0 == doctest::Approx(ref.n_s));
    CHECK(s.n1 == s.n0);
    ScenarioParams k0 = ref;
    k0.kappa = 0.0;
    const OpaConfig cfg = default_opa_config(ref);
    CHECK(opa_statistics(k0, cfg).n1 == opa_statistics(k0, cfg).n0);
    const PerformanceReport r = opa_error_prob_exact(k0, cfg, 12345);
    CHECK(*r.pe_exact == 0.5);
    CHECK(r.degenerate);
    OpaConfig bad;
    bad.gain = 0.9;
    CHECK_THROWS_AS(opa_statistics(ref, bad), Error);
    CHECK_THROWS_AS(opa_count_pmf(0.1, 3, -1), Error);
}

TEST_CASE("OPA count pmf") {
    CHECK(opa_count_pmf(0.2, 9, 0) == doctest::Approx(std::pow(1.2, -9.0)).epsilon(1e-13));
    CHECK(opa_count_pmf(0.2, 1, 4) == doctest::Approx(std::pow(0.2, 4) / std::pow(1.2, 5)).epsilon(1e-13));
}

TEST_CASE("OPA exact error probability against direct summation") {
    const OpaConfig cfg = default_opa_config(ref);
    for (std::int64_t m : {1, 10, 200, 1000}) {
        const PerformanceReport r = opa_error_prob_exact(ref, cfg, m);
        ScenarioParams p = ref;
        p.m = m;
        const OpaStatistics s = opa_statistics(p, cfg);
        double below0 = 0.0, below1 = 0.0;
        for (std::int64_t n = 0; n < s.threshold; ++n) {
            below0 += opa_count_pmf(s.n0, m, n);
            below1 += opa_count_pmf(s.n1, m, n);
        }
        CHECK(*r.pe_exact == doctest::Approx(0.5 * ((1.0 - below0) + below1)).epsilon(1e-10));
        CHECK(*r.threshold == s.threshold);
    }
}

TEST_CASE("OPA exact and Gaussian forms agree in the central-limit regime") {
    const OpaConfig cfg = default_opa_config(ref);
    const double r = opa_exponent(opa_statistics(ref, cfg));
    for (double md : {3e6, 5e6, 1e7}) {
        const auto m = static_cast<std::int64_t>(md);
        REQUIRE(md * r >= 5.0);
        const double ex = *opa_error_prob_exact(ref, cfg, m).pe_exact;
        const double ga = opa_error_prob_gaussian(ref, cfg, m).pe_gaussian;
        CHECK(std::fabs(ga - ex) / ex <= 0.10);
    }
}

TEST_CASE("OPA exact slope approaches R_OPA") {
    const OpaConfig cfg = default_opa_config(ref);
    const double r = opa_exponent(opa_statistics(ref, cfg));
    const std::int64_t m1 = 4000000, m2 = 8000000;
    const double l1 = std::log(*opa_error_prob_exact(ref, cfg, m1).pe_exact);
    const double l2 = std::log(*opa_error_prob_exact(ref, cfg, m2).pe_exact);
    // The erfc prefactor contributes ln(M)/2 per doubling; remove it before fitting.
    const double slope = -((l2 - l1) + 0.5 * std::log(2.0)) / static_cast<double>(m2 - m1);
    CHECK(slope == doctest::Approx(r).epsilon(0.02));
}

TEST_CASE("Gaussian-approximation reports") {
    const OpaConfig cfg = default_opa_config(ref);
    CHECK(opa_error_prob_gaussian(ref, cfg, 1).pe_gaussian == doctest::Approx(0.5).epsilon(1e-2));
    CHECK(pc_error_prob_gaussian(ref, 1).pe_gaussian == doctest::Approx(0.5).epsilon(1e-2));
    const PerformanceReport far = gaussian_report(ReceiverKind::pc, 1e-3, 10000000);
    CHECK(far.pe_gaussian == 0.0);  // underflows; the log survives
    const double ln_half_erfc = -1e4 - std::log(100.0 * std::sqrt(M_PI)) - std::log(2.0);
    CHECK(far.log10_pe == doctest::Approx(ln_half_erfc / std::log(10.0)).epsilon(1e-6));
}

TEST_CASE("Bhattacharyya exponents") {
    const OpaConfig cfg = default_opa_config(ref);
    const auto b = opa_bhattacharyya_exponent(ref, cfg);
    CHECK(b.eq6 == doctest::Approx(1.946e-6).epsilon(1e-3));
    const OpaStatistics s = opa_statistics(ref, cfg);
    CHECK(b.exact == doctest::Approx(bhattacharyya_series(s.n0, s.n1, 10000)).epsilon(1e-9));
    for (auto [n0, n1] : {std::pair{0.1, 0.4}, {0.5, 0.9}, {0.02, 1.0}, {0.3, 0.3}}) {
        const double closed = std::log(std::sqrt((1 + n0) * (1 + n1)) - std::sqrt(n0 * n1));
        CHECK(closed == doctest::Approx(bhattacharyya_series(n0, n1, 10000)).epsilon(1e-12));
        CHECK(-std::log(thermal_count_overlap(n0, n1, 0.5)) == doctest::Approx(closed).epsilon(1e-12));
    }
    OpaConfig unit;
    unit.gain = 1.0;
    CHECK(opa_bhattacharyya_exponent(ref, unit).exact == 0.0);
}

TEST_CASE("Chernoff exponent of the count laws is at least the Bhattacharyya exponent") {
    for (auto [n0, n1] : {std::pair{0.056980, 0.057932}, {0.1, 0.4}, {0.02, 3.0}}) {
        double best = 0.0;
        for (int i = 0; i <= 1000; ++i) best = std::max(best, -std::log(thermal_count_overlap(n0, n1, i / 1000.0)));
        const double bhat = -std::log(thermal_count_overlap(n0, n1, 0.5));
        CHECK(best >= bhat);
    }
}

TEST_CASE("phase-conjugate statistics") {
    const PcStatistics st = pc_statistics(ref);
    CHECK(st.c_q == doctest::Approx(0.0100499).epsilon(1e-5));
    CHECK(st.h1.mean == doctest::Approx(0.0200998).epsilon(1e-5));
    CHECK(st.h0.mean == 0.0);
    CHECK(st.h0.variance == doctest::Approx(21.430).epsilon(1e-4));
    CHECK(st.h1.nbar_x - st.h1.nbar_y == doctest::Approx(2 * st.c_q));
    CHECK(st.h0.nbar_c == doctest::Approx(21.0));
    CHECK(st.h1.nbar_c == doctest::Approx(21.0001));
    for (const PcMoments& m : {st.h0, st.h1})
        CHECK(m.nbar_x + m.nbar_y == doctest::Approx(m.nbar_c + m.nbar_i).epsilon(1e-14));
    ScenarioParams k0 = ref;
    k0.kappa = 0.0;
    const PcStatistics z = pc_statistics(k0);
    CHECK(z.h1.mean == 0.0);
    CHECK(z.h0.variance == z.h1.variance);
    CHECK(pc_exponent_eq9(k0) == 0.0);
}

TEST_CASE("phase-conjugate variance identity on random parameters") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        ScenarioParams p{std::pow(10.0, -3 + 3 * u(rng)), std::pow(10.0, -1 + 4 * u(rng)), u(rng), 1};
        const PcStatistics st = pc_statistics(p);
        for (const PcMoments& m : {st.h0, st.h1}) {
            const double direct = m.nbar_x * (m.nbar_x + 1) + m.nbar_y * (m.nbar_y + 1) -
                                  0.5 * (m.nbar_c - m.nbar_i) * (m.nbar_c - m.nbar_i);
            CHECK(m.variance == doctest::Approx(direct).epsilon(1e-12));
        }
        const double nc = st.h0.nbar_c, ni = st.h0.nbar_i;
        CHECK(st.h0.variance == doctest::Approx(2 * nc * ni + nc + ni).epsilon(1e-12));
        // H1 picks up only C_q^2 terms on top of the same expression.
        const double nc1 = st.h1.nbar_c;
        CHECK(st.h1.variance == doctest::Approx(2 * nc1 * ni + nc1 + ni + 2 * st.c_q * st.c_q).epsilon(1e-12));
    }
}

TEST_CASE("closed-form PC exponent consistency with the moment route") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        ScenarioParams any{std::pow(10.0, -3 + 3 * u(rng)), std::pow(10.0, -1 + 4 * u(rng)), u(rng), 1};
        const PcStatistics a = pc_statistics(any);
        CHECK(a.c_q * a.c_q / (a.h0.variance + a.h1.variance) ==
              doctest::Approx(pc_exponent_eq9(any)).epsilon(1e-12));
        ScenarioParams low{std::pow(10.0, -3 + 1.5 * u(rng)), std::pow(10.0, 1 + 3 * u(rng)),
                           std::pow(10.0, -3 + u(rng)), 1};
        CHECK(pc_exponent(pc_statistics(low)) == doctest::Approx(pc_exponent_eq9(low)).epsilon(1e-9));
    }
    CHECK(pc_exponent_eq9(ref) == doctest::Approx(2.3565e-6).epsilon(1e-4));
    ScenarioParams deep{1e-3, 1e4, 1e-2, 1};
    const double ratio = pc_exponent_eq9(deep) / (deep.kappa * deep.n_s / (2 * deep.n_b));
    CHECK(ratio >= 0.99);
    CHECK(ratio <= 1.0);
}

TEST_CASE("the uncorrected H0 variance breaks the closed-form PC exponent") {
    const PcStatistics st = pc_statistics(ref, PcVarianceModel::uncorrected);
    CHECK(std::fabs(pc_exponent(st) - pc_exponent_eq9(ref)) / pc_exponent_eq9(ref) > 0.5);
    CHECK(st.h1.variance == pc_statistics(ref).h1.variance);
}

TEST_CASE("homodyne baseline") {
    CHECK(homodyne_exponent(ref) == doctest::Approx(1e-4 / 82.0).epsilon(1e-14));
    const PerformanceReport r = homodyne_error_prob(ref, 820000);
    CHECK(r.pe_gaussian == doctest::Approx(0.5 * boost::math::erfc(1.0)).epsilon(1e-12));
    CHECK(r.pe_gaussian == doctest::Approx(0.07865).epsilon(1e-4));
    const HomodyneStatistics h = homodyne_statistics(ref);
    CHECK(h.variance == doctest::Approx(41.0 / 4.0));
    CHECK(h.mean1 == doctest::Approx(0.01));
}

TEST_CASE("asymptotic exponents") {
    const AsymptoticExponents a = asymptotic_exponents(ref);
    CHECK(a.r_q == doctest::Approx(5e-6).epsilon(1e-14));
    CHECK(a.r_c == doctest::Approx(1.25e-6).epsilon(1e-14));
    CHECK(a.r_q / a.r_c == 4.0);
    ScenarioParams k0 = ref;
    k0.kappa = 0.0;
    CHECK(asymptotic_exponents(k0).r_q == 0.0);
    ScenarioParams nb0 = ref;
    nb0.n_b = 0.0;
    CHECK_THROWS_AS(asymptotic_exponents(nb0), Error);
}

TEST_CASE("exponent ordering at the reference point") {
    const OpaConfig cfg = default_opa_config(ref);
    const double rq = asymptotic_exponents(ref).r_q;
    const double rpc = pc_exponent_eq9(ref);
    const double rb = opa_bhattacharyya_exponent(ref, cfg).eq6;
    const double ropa = opa_exponent(opa_statistics(ref, cfg));
    const double rh = homodyne_exponent(ref);
    CHECK(rq > rpc);
    CHECK(rpc > rb);
    CHECK(rb > ropa);
    CHECK(ropa > rh);
}

TEST_CASE("error probabilities fall with M") {
    const OpaConfig cfg = default_opa_config(ref);
    double prev[3] = {0.5, 0.5, 0.5};
    for (double md = 1e3; md <= 1e7; md *= 1.7) {
        const auto m = static_cast<std::int64_t>(md);
        const double cur[3] = {opa_error_prob_exact(ref, cfg, m).pe(), pc_error_prob_gaussian(ref, m).pe(),
                               homodyne_error_prob(ref, m).pe()};
        for (int i = 0; i < 3; ++i) {
            CHECK(cur[i] <= prev[i]);
            CHECK(cur[i] > 0.0);
            prev[i] = cur[i];
        }
    }
}

TEST_CASE("single-photon detection variant") {
    OpaConfig cfg = default_opa_config(ref);
    cfg.detector = OpaDetector::single_photon;
    const ClickStatistics c = opa_click_statistics(ref, cfg);
    const OpaStatistics s = opa_statistics(ref, default_opa_config(ref));
    CHECK(c.p0 == doctest::Approx(1.0 - 1.0 / (1.0 + s.n0)));
    CHECK(c.p1 == doctest::Approx(1.0 - 1.0 / (1.0 + s.n1)));
    const PerformanceReport r = opa_error_prob_exact(ref, cfg, 2000000);
    CHECK(r.receiver == ReceiverKind::opa_click);
    CHECK(*r.pe_exact < 0.5);
    CHECK(*r.pe_exact == doctest::Approx(opa_error_prob_gaussian(ref, cfg, 2000000).pe_gaussian).epsilon(0.1));
}

TEST_CASE("Monte Carlo OPA decisions") {
    const OpaConfig cfg = default_opa_config(ref);
    SUBCASE("matches the exact error probability") {
        const std::int64_t m = 100000, trials = 10000;
        const SimulationResult sim = simulate_counts(ref, ReceiverKind::opa, cfg, m, 2024, trials);
        const double exact = *opa_error_prob_exact(ref, cfg, m).pe_exact;
        const double se = std::sqrt(exact * (1 - exact) / trials);
        CHECK(std::fabs(sim.error_rate - exact) <= 3 * se);
        CHECK(sim.threshold == *opa_error_prob_exact(ref, cfg, m).threshold);
    }
    SUBCASE("no target return is a coin flip") {
        ScenarioParams k0 = ref;
        k0.kappa = 0.0;
        const SimulationResult sim = simulate_counts(k0, ReceiverKind::opa, cfg, 1000, 9, 4000);
        CHECK(std::fabs(sim.error_rate - 0.5) <= 3 * std::sqrt(0.25 / 4000));
    }
    SUBCASE("deterministic for a seed") {
        const SimulationResult a = simulate_counts(ref, ReceiverKind::opa, cfg, 5000, 77, 300);
        const SimulationResult b = simulate_counts(ref, ReceiverKind::opa, cfg, 5000, 77, 300);
        REQUIRE(a.outcomes.size() == b.outcomes.size());
        for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
            CHECK(a.outcomes[i].count == b.outcomes[i].count);
            CHECK(a.outcomes[i].truth == b.outcomes[i].truth);
        }
    }
    SUBCASE("unsupported receivers") {
        try {
            simulate_counts(ref, ReceiverKind::pc, cfg, 10, 1, 10);
            FAIL("sampled the phase-conjugate receiver");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::domain);
        }
    }
}
