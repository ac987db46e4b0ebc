#pragma once

// Receiver models: OPA photon counting, phase-conjugate balanced detection and
// the coherent-state homodyne baseline. Everything here is closed form apart
// from the exact negative-binomial tails and the Monte Carlo check.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "qillum/scenario.hpp"

namespace qillum {

enum class ReceiverKind { opa, opa_click, pc, homodyne };

std::string_view to_string(ReceiverKind kind) noexcept;

enum class OpaDetector {
    photon_counting,  ///< full photon-number resolution on every output mode
    single_photon,    ///< on/off detection, click probability 1 - 1/(1 + N_m)
};

struct OpaConfig {
    double gain = 1.0;
    OpaDetector detector = OpaDetector::photon_counting;

    static OpaConfig from_epsilon_sq(double epsilon_sq,
                                     OpaDetector detector = OpaDetector::photon_counting);
    double epsilon_sq() const noexcept { return gain - 1.0; }
    /// G == 1 is the identity: both hypotheses give the same output.
    bool degenerate() const noexcept { return gain == 1.0; }
    void validate() const;
};

/// Low-gain choice eps^2 = N_S / sqrt(N_B).
double default_epsilon_sq(const ScenarioParams& params);
OpaConfig default_opa_config(const ScenarioParams& params);

struct OpaStatistics {
    double n0 = 0.0;      ///< mean photons per output mode under H0
    double n1 = 0.0;      ///< mean photons per output mode under H1
    double sigma0 = 0.0;  ///< sqrt(n0 (n0 + 1))
    double sigma1 = 0.0;
    std::int64_t threshold = 0;  ///< decide H0 when the total count is below this
};

/// Uses params.m for the threshold.
OpaStatistics opa_statistics(const ScenarioParams& params, const OpaConfig& cfg);

/// On/off variant: per-mode click probabilities and binomial moments.
struct ClickStatistics {
    double p0 = 0.0;
    double p1 = 0.0;
    double sigma0 = 0.0;  ///< sqrt(p0 (1 - p0))
    double sigma1 = 0.0;
    std::int64_t threshold = 0;
};

ClickStatistics opa_click_statistics(const ScenarioParams& params, const OpaConfig& cfg);

/// Negative-binomial probability of n photons over M thermal modes of mean
/// `mean`, evaluated in log space.
double opa_count_pmf(double mean, std::int64_t m, std::int64_t n);

struct PerformanceReport {
    ReceiverKind receiver = ReceiverKind::opa;
    std::int64_t m = 1;
    std::optional<double> pe_exact;
    double pe_gaussian = 0.5;
    double log10_pe = 0.0;  ///< of pe_exact when present, else pe_gaussian
    double exponent = 0.0;  ///< nats per mode pair
    std::optional<std::int64_t> threshold;
    bool degenerate = false;  ///< empty decision region or indistinguishable hypotheses

    double pe() const noexcept { return pe_exact.value_or(pe_gaussian); }
};

/// Mean-separation exponent (mu1 - mu0)^2 / 2 (sigma0 + sigma1)^2.
double separation_exponent(double mu0, double mu1, double sigma0, double sigma1);

/// Threshold ceil(M (sigma1 mu0 + sigma0 mu1) / (sigma0 + sigma1)).
std::int64_t separation_threshold(double mu0, double mu1, double sigma0, double sigma1,
                                  std::int64_t m);

/// P_e = erfc(sqrt(exponent * M)) / 2 together with its log10.
PerformanceReport gaussian_report(ReceiverKind kind, double exponent, std::int64_t m);

double opa_exponent(const OpaStatistics& stats);

PerformanceReport opa_error_prob_exact(const ScenarioParams& params, const OpaConfig& cfg,
                                       std::int64_t m);
PerformanceReport opa_error_prob_gaussian(const ScenarioParams& params, const OpaConfig& cfg,
                                          std::int64_t m);

struct BhattacharyyaExponents {
    double exact = 0.0;  ///< -ln sum_n sqrt(p0(n) p1(n)) per mode, closed form
    double eq6 = 0.0;    ///< low-gain rational approximation in eps^2
};

BhattacharyyaExponents opa_bhattacharyya_exponent(const ScenarioParams& params,
                                                  const OpaConfig& cfg);

/// sum_n p0(n)^s p1(n)^(1-s) for two single-mode thermal count laws.
double thermal_count_overlap(double n0, double n1, double s);

/// Which H0 variance the phase-conjugate model uses. `uncorrected` drops the
/// -(Nbar_C - Nbar_I)^2 / 2 term under H0; it exists only so that the
/// consistency checks can demonstrate they catch it.
enum class PcVarianceModel { corrected, uncorrected };

struct PcMoments {
    double nbar_c = 0.0;
    double nbar_i = 0.0;
    double nbar_x = 0.0;
    double nbar_y = 0.0;
    double mean = 0.0;      ///< per-mode mean of N_X - N_Y
    double variance = 0.0;  ///< per-mode variance of N_X - N_Y
};

struct PcStatistics {
    double c_q = 0.0;  ///< <a_C^+ a_I> = sqrt(kappa N_S (N_S + 1))
    PcMoments h0;
    PcMoments h1;
    std::int64_t threshold = 0;

    double sigma0() const;
    double sigma1() const;
};

PcStatistics pc_statistics(const ScenarioParams& params,
                           PcVarianceModel model = PcVarianceModel::corrected);
double pc_exponent(const PcStatistics& stats);
/// Closed-form kappa N_S (N_S + 1) / (2 N_B + 4 N_S N_B + 6 N_S + 4 kappa N_S^2 + 3 kappa N_S + 2).
double pc_exponent_eq9(const ScenarioParams& params);
PerformanceReport pc_error_prob_gaussian(const ScenarioParams& params, std::int64_t m,
                                         PcVarianceModel model = PcVarianceModel::corrected);

struct HomodyneStatistics {
    double mean0 = 0.0;
    double mean1 = 0.0;     ///< sqrt(kappa N_S)
    double variance = 0.25; ///< (2 N_B + 1) / 4
};

HomodyneStatistics homodyne_statistics(const ScenarioParams& params);
double homodyne_exponent(const ScenarioParams& params);
PerformanceReport homodyne_error_prob(const ScenarioParams& params, std::int64_t m);

struct AsymptoticExponents {
    double r_q = 0.0;  ///< entangled transmitter, kappa N_S / N_B
    double r_c = 0.0;  ///< coherent transmitter, kappa N_S / (4 N_B)
};

AsymptoticExponents asymptotic_exponents(const ScenarioParams& params);

struct TrialOutcome {
    Hypothesis truth = Hypothesis::H0;
    Hypothesis decision = Hypothesis::H0;
    std::int64_t count = 0;
};

struct SimulationResult {
    std::vector<TrialOutcome> outcomes;
    std::int64_t errors = 0;
    double error_rate = 0.0;
    double standard_error = 0.0;  ///< sqrt(p (1 - p) / trials) at the empirical rate
    std::int64_t threshold = 0;
};

/// Monte Carlo of the OPA threshold receiver. Each trial draws a fair-coin
/// hypothesis and the total count over M modes. Deterministic for a seed.
/// Throws ErrorCode::domain for receivers without a sampler (PC, homodyne).
SimulationResult simulate_counts(const ScenarioParams& params, ReceiverKind receiver,
                                 const OpaConfig& cfg, std::int64_t m, std::uint64_t seed,
                                 std::int64_t trials);

}  // namespace qillum
