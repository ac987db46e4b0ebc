#include "qillum/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qillum/error.hpp"

namespace qillum {
namespace {

constexpr double kLnSqrt2Pi = 0.91893853320467274178;

// lgamma(z) - [(z - 1/2) ln z - z + ln sqrt(2 pi)]
double stirling_error(double z) {
    if (z < 15.0) {
        return std::lgamma(z) - ((z - 0.5) * std::log(z) - z + kLnSqrt2Pi);
    }
    const double r = 1.0 / z;
    const double r2 = r * r;
    return r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0))));
}

// ln[ x^a (1-x)^b / B(a, b) ] without forming the large lgamma terms whose
// cancellation would cost digits when a or b is in the millions.
double log_beta_prefactor(double a, double b, double x) {
    const double c = a + b;
    const double p0 = a / c;
    const double q0 = b / c;
    const double dev = a * std::log1p((x - p0) / p0) + b * std::log1p((p0 - x) / q0);
    return dev + 0.5 * std::log(a * b / c) - kLnSqrt2Pi - stirling_error(a) - stirling_error(b) +
           stirling_error(c);
}

// Continued fraction for I_x(a, b) (modified Lentz), valid and fast for
// x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    constexpr int max_iter = 2'000'000;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    fail(ErrorCode::numerical, "incomplete beta continued fraction did not converge (a=" +
                                   std::to_string(a) + ", b=" + std::to_string(b) + ")");
}

}  // namespace

double log_erfc(double x) {
    if (x < 25.0) return std::log(std::erfc(x));
    // Asymptotic expansion of erfcx; terms shrink quickly for x >= 25.
    const double r2 = 1.0 / (2.0 * x * x);
    const double series = 1.0 - r2 * (1.0 - 3.0 * r2 * (1.0 - 5.0 * r2 * (1.0 - 7.0 * r2)));
    return -x * x - std::log(x * std::sqrt(std::numbers::pi)) + std::log(series);
}

double half_erfc(double x) { return 0.5 * std::erfc(x); }

BetaTails regularized_beta(double a, double b, double x) {
    require(a > 0.0 && b > 0.0, ErrorCode::domain, "incomplete beta needs a, b > 0");
    require(x >= 0.0 && x <= 1.0, ErrorCode::domain, "incomplete beta needs x in [0, 1]");
    if (x == 0.0) return {0.0, 1.0};
    if (x == 1.0) return {1.0, 0.0};
    if (x < (a + 1.0) / (a + b + 2.0)) {
        const double lower =
            std::exp(log_beta_prefactor(a, b, x)) * beta_continued_fraction(a, b, x) / a;
        return {lower, 1.0 - lower};
    }
    const double y = 1.0 - x;
    const double upper =
        std::exp(log_beta_prefactor(b, a, y)) * beta_continued_fraction(b, a, y) / b;
    return {1.0 - upper, upper};
}

ThermalCountLaw::ThermalCountLaw(double mean, std::int64_t modes) : mean_(mean), modes_(modes) {
    require(std::isfinite(mean) && mean >= 0.0, ErrorCode::domain,
            "thermal count law needs a finite mean >= 0");
    require(modes >= 1, ErrorCode::domain, "thermal count law needs at least one mode");
}

double ThermalCountLaw::log_pmf(std::int64_t n) const {
    require(n >= 0, ErrorCode::domain, "photon count must be >= 0");
    const double m = static_cast<double>(modes_);
    if (mean_ == 0.0) return n == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    const double nn = static_cast<double>(n);
    return std::lgamma(nn + m) - std::lgamma(nn + 1.0) - std::lgamma(m) + nn * std::log(mean_) -
           (nn + m) * std::log1p(mean_);
}

double ThermalCountLaw::pmf(std::int64_t n) const { return std::exp(log_pmf(n)); }

BetaTails ThermalCountLaw::tails(std::int64_t k) const {
    // P(N <= k) = I_{1/(1+N)}(M, k + 1)
    return regularized_beta(static_cast<double>(modes_), static_cast<double>(k) + 1.0,
                            1.0 / (1.0 + mean_));
}

double ThermalCountLaw::cdf(std::int64_t k) const {
    if (k < 0) return 0.0;
    if (mean_ == 0.0) return 1.0;
    return tails(k).lower;
}

double ThermalCountLaw::sf(std::int64_t k) const {
    if (k < 0) return 1.0;
    if (mean_ == 0.0) return 0.0;
    return tails(k).upper;
}

ClickCountLaw::ClickCountLaw(double p, std::int64_t trials) : p_(p), trials_(trials) {
    require(p >= 0.0 && p <= 1.0, ErrorCode::domain, "click probability must lie in [0, 1]");
    require(trials >= 1, ErrorCode::domain, "click count law needs at least one trial");
}

double ClickCountLaw::log_pmf(std::int64_t k) const {
    require(k >= 0, ErrorCode::domain, "click count must be >= 0");
    if (k > trials_) return -std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(trials_);
    const double kk = static_cast<double>(k);
    const double lp = kk == 0.0 ? 0.0 : kk * std::log(p_);
    const double lq = kk == n ? 0.0 : (n - kk) * std::log1p(-p_);
    return std::lgamma(n + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(n - kk + 1.0) + lp + lq;
}

double ClickCountLaw::cdf(std::int64_t k) const {
    if (k < 0) return 0.0;
    if (k >= trials_) return 1.0;
    if (p_ == 0.0) return 1.0;
    if (p_ == 1.0) return 0.0;
    // P(X <= k) = I_{1-p}(n - k, k + 1)
    return regularized_beta(static_cast<double>(trials_ - k), static_cast<double>(k) + 1.0, 1.0 - p_)
        .lower;
}

double ClickCountLaw::sf(std::int64_t k) const {
    if (k < 0) return 1.0;
    if (k >= trials_) return 0.0;
    if (p_ == 0.0) return 0.0;
    if (p_ == 1.0) return 1.0;
    return regularized_beta(static_cast<double>(trials_ - k), static_cast<double>(k) + 1.0, 1.0 - p_)
        .upper;
}

}  // namespace qillum
