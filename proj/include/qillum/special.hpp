#pragma once

// Special functions and count laws shared by the receiver models.

#include <cstdint>

namespace qillum {

/// ln erfc(x), accurate in the far tail where erfc underflows.
double log_erfc(double x);

/// erfc(x) / 2, the one-sided Gaussian tail at sqrt(2) x.
double half_erfc(double x);

/// Regularized incomplete beta I_x(a, b) and its complement 1 - I_x(a, b).
/// Whichever tail is evaluated directly by the continued fraction keeps full
/// relative accuracy; the other is obtained by subtraction.
struct BetaTails {
    double lower;
    double upper;
};

BetaTails regularized_beta(double a, double b, double x);

/// Total photon count over `modes` independent thermal modes of mean `mean`
/// photons each (negative binomial law).
class ThermalCountLaw {
public:
    ThermalCountLaw(double mean, std::int64_t modes);

    double mean() const noexcept { return mean_; }
    std::int64_t modes() const noexcept { return modes_; }

    double log_pmf(std::int64_t n) const;
    double pmf(std::int64_t n) const;
    /// P(N <= k); k < 0 gives 0.
    double cdf(std::int64_t k) const;
    /// P(N > k); k < 0 gives 1.
    double sf(std::int64_t k) const;

private:
    BetaTails tails(std::int64_t k) const;

    double mean_;
    std::int64_t modes_;
};

/// Number of clicking detectors among `trials` on/off detectors that each
/// fire with probability `p` (binomial law).
class ClickCountLaw {
public:
    ClickCountLaw(double p, std::int64_t trials);

    double p() const noexcept { return p_; }
    std::int64_t trials() const noexcept { return trials_; }

    double log_pmf(std::int64_t k) const;
    double cdf(std::int64_t k) const;
    double sf(std::int64_t k) const;

private:
    double p_;
    std::int64_t trials_;
};

}  // namespace qillum
