#include <doctest.h>

#include <cmath>
#include <cstdint>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "qillum/error.hpp"
#include "qillum/special.hpp"

using namespace qillum;

namespace {

// Direct log-space term for the negative binomial law, independent of the
// library's own log-gamma bookkeeping.
double nb_log_term(double mean, std::int64_t m, std::int64_t n) {
    return std::lgamma(static_cast<double>(n + m)) - std::lgamma(static_cast<double>(n + 1)) -
           std::lgamma(static_cast<double>(m)) + n * std::log(mean) -
           static_cast<double>(n + m) * std::log1p(mean);
}

}  // namespace

TEST_CASE("regularized incomplete beta against Boost") {
    for (double a : {0.5, 1.0, 3.0, 57.0, 1e3, 1e5})
        for (double b : {0.5, 2.0, 40.0, 1e4, 1e6})
            for (double x : {1e-6, 0.01, 0.2, 0.5, 0.9, 0.999}) {
                const BetaTails t = regularized_beta(a, b, x);
                const double lo = boost::math::ibeta(a, b, x);
                const double hi = boost::math::ibetac(a, b, x);
                // The smaller tail carries full relative accuracy.
                if (lo < hi) {
                    if (lo > 1e-290) CHECK(t.lower == doctest::Approx(lo).epsilon(1e-10));
                    CHECK(t.upper == doctest::Approx(hi).epsilon(1e-12));
                } else {
                    if (hi > 1e-290) CHECK(t.upper == doctest::Approx(hi).epsilon(1e-10));
                    CHECK(t.lower == doctest::Approx(lo).epsilon(1e-12));
                }
            }
}

TEST_CASE("beta edge cases") {
    CHECK(regularized_beta(2.0, 3.0, 0.0).lower == 0.0);
    CHECK(regularized_beta(2.0, 3.0, 1.0).upper == 0.0);
    CHECK_THROWS_AS(regularized_beta(-1.0, 3.0, 0.5), Error);
    CHECK_THROWS_AS(regularized_beta(1.0, 3.0, 1.5), Error);
}

TEST_CASE("negative binomial pmf normalisation") {
    for (double mean : {0.056980, 0.5, 4.0})
        for (std::int64_t m : {1, 7, 1000}) {
            const ThermalCountLaw law(mean, m);
            long double acc = 0.0L;
            std::int64_t n = 0;
            for (; n < 200000; ++n) {
                acc += law.pmf(n);
                if (n > m * mean && law.sf(n) < 1e-17) break;
            }
            // Remaining mass is bounded by the survival function at the cut.
            CHECK(std::fabs(static_cast<double>(acc) + law.sf(n) - 1.0) <= 1e-12);
            CHECK(law.sf(n) < 1e-15);
        }
}

TEST_CASE("negative binomial pmf agrees with the explicit formula") {
    for (double mean : {0.01, 0.9, 20.0})
        for (std::int64_t m : {1, 3, 500})
            for (std::int64_t n : {0, 1, 5, 77, 1200}) {
                const double expect = std::exp(nb_log_term(mean, m, n));
                CHECK(ThermalCountLaw(mean, m).pmf(n) == doctest::Approx(expect).epsilon(1e-11));
            }
    // Geometric law for a single mode.
    CHECK(ThermalCountLaw(2.0, 1).pmf(3) == doctest::Approx(8.0 / 81.0).epsilon(1e-14));
    // Empty count.
    CHECK(ThermalCountLaw(0.3, 40).pmf(0) == doctest::Approx(std::pow(1.3, -40.0)).epsilon(1e-13));
}

TEST_CASE("negative binomial tails against direct summation") {
    for (double mean : {0.056980, 0.057932, 0.5, 3.0})
        for (std::int64_t m : {1, 10, 100, 1000}) {
            const ThermalCountLaw law(mean, m);
            const auto k_max = static_cast<std::int64_t>(m * mean * 4 + 60);
            double acc = 0.0;
            double worst = 0.0;
            for (std::int64_t k = 0; k <= k_max; ++k) {
                acc += std::exp(nb_log_term(mean, m, k));
                worst = std::max(worst, std::fabs(law.cdf(k) - acc));
                worst = std::max(worst, std::fabs(law.sf(k) - (1.0 - acc)));
            }
            CHECK(worst <= 1e-10);
        }
    const ThermalCountLaw law(0.3, 5);
    CHECK(law.cdf(-1) == 0.0);
    CHECK(law.sf(-1) == 1.0);
    CHECK(ThermalCountLaw(0.0, 5).cdf(0) == 1.0);
    CHECK(ThermalCountLaw(0.0, 5).sf(0) == 0.0);
}

TEST_CASE("negative binomial far tail keeps relative accuracy") {
    // Tail at ten standard deviations for M = 1e7 against Boost.
    const double mean = 0.056980;
    const std::int64_t m = 10000000;
    const auto k = static_cast<std::int64_t>(m * mean + 10.0 * std::sqrt(m * mean * (1 + mean)));
    const double expect = boost::math::ibeta(static_cast<double>(k + 1), static_cast<double>(m), mean / (1.0 + mean));
    CHECK(ThermalCountLaw(mean, m).sf(k) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("binomial click law") {
    const ClickCountLaw law(0.3, 25);
    double acc = 0.0;
    for (std::int64_t k = 0; k <= 25; ++k) {
        const double direct = std::exp(std::lgamma(26.0) - std::lgamma(k + 1.0) - std::lgamma(26.0 - k) +
                                       k * std::log(0.3) + (25 - k) * std::log(0.7));
        CHECK(std::exp(law.log_pmf(k)) == doctest::Approx(direct).epsilon(1e-12));
        acc += direct;
        CHECK(law.cdf(k) == doctest::Approx(acc).epsilon(1e-11));
    }
    CHECK(law.sf(25) == 0.0);
}

TEST_CASE("erfc helpers") {
    for (double x : {0.0, 0.3, 1.0, 4.0, 10.0, 24.9, 25.1, 30.0, 100.0, 1e4}) {
        const double expect = static_cast<double>(std::log(std::erfc(static_cast<long double>(x))));
        if (std::isfinite(expect)) CHECK(log_erfc(x) == doctest::Approx(expect).epsilon(1e-12));
        else CHECK(log_erfc(x) == doctest::Approx(-x * x - std::log(x * std::sqrt(M_PI))).epsilon(1e-9));
    }
    CHECK(half_erfc(0.0) == 0.5);
    CHECK(half_erfc(1.0) == doctest::Approx(0.5 * boost::math::erfc(1.0)).epsilon(1e-15));
}
