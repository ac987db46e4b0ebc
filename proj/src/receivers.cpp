#include "qillum/receivers.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "qillum/error.hpp"
#include "qillum/special.hpp"

namespace qillum {
namespace {

constexpr double kLn10 = std::numbers::ln10;

double log10_half_erfc(double x) { return (log_erfc(x) - std::numbers::ln2) / kLn10; }

PerformanceReport indistinguishable(ReceiverKind kind, std::int64_t m) {
    PerformanceReport r;
    r.receiver = kind;
    r.m = m;
    r.pe_exact = 0.5;
    r.pe_gaussian = 0.5;
    r.log10_pe = std::log10(0.5);
    r.exponent = 0.0;
    r.degenerate = true;
    return r;
}

}  // namespace

std::string_view to_string(ReceiverKind kind) noexcept {
    switch (kind) {
        case ReceiverKind::opa: return "opa";
        case ReceiverKind::opa_click: return "opa_click";
        case ReceiverKind::pc: return "pc";
        case ReceiverKind::homodyne: return "homodyne";
    }
    return "unknown";
}

OpaConfig OpaConfig::from_epsilon_sq(double epsilon_sq, OpaDetector detector) {
    OpaConfig cfg{1.0 + epsilon_sq, detector};
    cfg.validate();
    return cfg;
}

void OpaConfig::validate() const {
    require(std::isfinite(gain) && gain >= 1.0, ErrorCode::domain, "OPA gain must be >= 1");
}

double default_epsilon_sq(const ScenarioParams& params) {
    params.validate();
    require(params.n_b > 0.0, ErrorCode::domain, "default OPA gain needs N_B > 0");
    return params.n_s / std::sqrt(params.n_b);
}

OpaConfig default_opa_config(const ScenarioParams& params) {
    return OpaConfig::from_epsilon_sq(default_epsilon_sq(params));
}

double separation_exponent(double mu0, double mu1, double sigma0, double sigma1) {
    const double s = sigma0 + sigma1;
    if (mu0 == mu1) return 0.0;
    require(s > 0.0, ErrorCode::domain, "separation exponent needs a positive spread");
    const double d = mu1 - mu0;
    return d * d / (2.0 * s * s);
}

std::int64_t separation_threshold(double mu0, double mu1, double sigma0, double sigma1,
                                  std::int64_t m) {
    const double s = sigma0 + sigma1;
    if (s <= 0.0) return static_cast<std::int64_t>(std::ceil(static_cast<double>(m) * mu0));
    const double per_mode = (sigma1 * mu0 + sigma0 * mu1) / s;
    return static_cast<std::int64_t>(std::ceil(static_cast<double>(m) * per_mode));
}

PerformanceReport gaussian_report(ReceiverKind kind, double exponent, std::int64_t m) {
    require(m >= 1, ErrorCode::domain, "M must be >= 1");
    require(exponent >= 0.0, ErrorCode::domain, "error exponent must be >= 0");
    PerformanceReport r;
    r.receiver = kind;
    r.m = m;
    r.exponent = exponent;
    const double x = std::sqrt(exponent * static_cast<double>(m));
    r.pe_gaussian = half_erfc(x);
    r.log10_pe = log10_half_erfc(x);
    r.degenerate = exponent == 0.0;
    return r;
}

OpaStatistics opa_statistics(const ScenarioParams& params, const OpaConfig& cfg) {
    params.validate();
    cfg.validate();
    const double g = cfg.gain;
    const double ns = params.n_s;
    const double nb = params.n_b;
    const double k = params.kappa;
    OpaStatistics s;
    s.n0 = g * ns + (g - 1.0) * (1.0 + nb);
    s.n1 = g * ns + (g - 1.0) * (1.0 + nb + k * ns) +
           2.0 * std::sqrt(g * (g - 1.0)) * std::sqrt(k * ns * (ns + 1.0));
    s.sigma0 = std::sqrt(s.n0 * (s.n0 + 1.0));
    s.sigma1 = std::sqrt(s.n1 * (s.n1 + 1.0));
    s.threshold = separation_threshold(s.n0, s.n1, s.sigma0, s.sigma1, params.m);
    return s;
}

ClickStatistics opa_click_statistics(const ScenarioParams& params, const OpaConfig& cfg) {
    const OpaStatistics counts = opa_statistics(params, cfg);
    ClickStatistics c;
    c.p0 = counts.n0 / (1.0 + counts.n0);
    c.p1 = counts.n1 / (1.0 + counts.n1);
    c.sigma0 = std::sqrt(c.p0 * (1.0 - c.p0));
    c.sigma1 = std::sqrt(c.p1 * (1.0 - c.p1));
    c.threshold = separation_threshold(c.p0, c.p1, c.sigma0, c.sigma1, params.m);
    return c;
}

double opa_count_pmf(double mean, std::int64_t m, std::int64_t n) {
    require(n >= 0, ErrorCode::domain, "photon count must be >= 0");
    return ThermalCountLaw(mean, m).pmf(n);
}

double opa_exponent(const OpaStatistics& stats) {
    return separation_exponent(stats.n0, stats.n1, stats.sigma0, stats.sigma1);
}

PerformanceReport opa_error_prob_exact(const ScenarioParams& params, const OpaConfig& cfg,
                                       std::int64_t m) {
    ScenarioParams p = params;
    p.m = m;
    p.validate();
    const bool clicks = cfg.detector == OpaDetector::single_photon;
    const ReceiverKind kind = clicks ? ReceiverKind::opa_click : ReceiverKind::opa;

    PerformanceReport r = opa_error_prob_gaussian(p, cfg, m);
    double upper0 = 0.0;
    double lower1 = 0.0;
    std::int64_t threshold = 0;
    if (clicks) {
        const ClickStatistics s = opa_click_statistics(p, cfg);
        if (s.p0 == s.p1) return indistinguishable(kind, m);
        threshold = s.threshold;
        upper0 = ClickCountLaw(s.p0, m).sf(threshold - 1);
        lower1 = ClickCountLaw(s.p1, m).cdf(threshold - 1);
    } else {
        const OpaStatistics s = opa_statistics(p, cfg);
        if (s.n0 == s.n1) return indistinguishable(kind, m);
        threshold = s.threshold;
        upper0 = ThermalCountLaw(s.n0, m).sf(threshold - 1);
        lower1 = ThermalCountLaw(s.n1, m).cdf(threshold - 1);
    }
    const double pe = 0.5 * (upper0 + lower1);
    r.pe_exact = pe;
    r.log10_pe = std::log10(pe);
    r.threshold = threshold;
    // A zero threshold always declares H1.
    r.degenerate = threshold <= 0;
    return r;
}

PerformanceReport opa_error_prob_gaussian(const ScenarioParams& params, const OpaConfig& cfg,
                                          std::int64_t m) {
    ScenarioParams p = params;
    p.m = m;
    if (cfg.detector == OpaDetector::single_photon) {
        const ClickStatistics s = opa_click_statistics(p, cfg);
        PerformanceReport r = gaussian_report(
            ReceiverKind::opa_click, separation_exponent(s.p0, s.p1, s.sigma0, s.sigma1), m);
        r.threshold = s.threshold;
        return r;
    }
    const OpaStatistics s = opa_statistics(p, cfg);
    PerformanceReport r = gaussian_report(ReceiverKind::opa, opa_exponent(s), m);
    r.threshold = s.threshold;
    return r;
}

double thermal_count_overlap(double n0, double n1, double s) {
    require(n0 >= 0.0 && n1 >= 0.0, ErrorCode::domain, "thermal means must be >= 0");
    require(s >= 0.0 && s <= 1.0, ErrorCode::domain, "s must lie in [0, 1]");
    // Geometric series in (n0/(1+n0))^s (n1/(1+n1))^(1-s).
    const double head = std::pow(1.0 + n0, s) * std::pow(1.0 + n1, 1.0 - s);
    const double ratio = std::pow(n0, s) * std::pow(n1, 1.0 - s);
    return 1.0 / (head - ratio);
}

BhattacharyyaExponents opa_bhattacharyya_exponent(const ScenarioParams& params,
                                                  const OpaConfig& cfg) {
    const OpaStatistics s = opa_statistics(params, cfg);
    BhattacharyyaExponents out;
    // u - v - 1 = (sqrt n0 - sqrt n1)^2 / (u + v + 1), no cancellation near n0 = n1.
    const double u = std::sqrt((1.0 + s.n0) * (1.0 + s.n1));
    const double v = std::sqrt(s.n0 * s.n1);
    const double d = std::sqrt(s.n0) - std::sqrt(s.n1);
    out.exact = std::log1p(d * d / (u + v + 1.0));

    const double e2 = cfg.epsilon_sq();
    const double ns = params.n_s;
    const double nb = params.n_b;
    const double num = e2 * params.kappa * ns * (ns + 1.0);
    const double den = 2.0 * ns * (ns + 1.0) + 2.0 * e2 * (1.0 + 2.0 * ns) * (1.0 + ns + nb);
    out.eq6 = den > 0.0 ? num / den : 0.0;
    return out;
}

double PcStatistics::sigma0() const { return std::sqrt(h0.variance); }
double PcStatistics::sigma1() const { return std::sqrt(h1.variance); }

PcStatistics pc_statistics(const ScenarioParams& params, PcVarianceModel model) {
    params.validate();
    const double ns = params.n_s;
    PcStatistics st;
    st.c_q = std::sqrt(params.kappa * ns * (ns + 1.0));

    auto fill = [&](PcMoments& mo, double nbar_c, double cross, bool correct) {
        mo.nbar_c = nbar_c;
        mo.nbar_i = ns;
        const double half = 0.5 * (nbar_c + ns);
        mo.nbar_x = half + cross;
        mo.nbar_y = half - cross;
        mo.mean = 2.0 * cross;
        const double common = 0.5 * (nbar_c - ns) * (nbar_c - ns);
        mo.variance = mo.nbar_x * (mo.nbar_x + 1.0) + mo.nbar_y * (mo.nbar_y + 1.0) -
                      (correct ? common : 0.0);
    };
    fill(st.h0, 1.0 + params.n_b, 0.0, model == PcVarianceModel::corrected);
    fill(st.h1, 1.0 + params.kappa * ns + params.n_b, st.c_q, true);
    st.threshold =
        separation_threshold(st.h0.mean, st.h1.mean, st.sigma0(), st.sigma1(), params.m);
    return st;
}

double pc_exponent(const PcStatistics& stats) {
    return separation_exponent(stats.h0.mean, stats.h1.mean, stats.sigma0(), stats.sigma1());
}

double pc_exponent_eq9(const ScenarioParams& params) {
    params.validate();
    const double ns = params.n_s;
    const double nb = params.n_b;
    const double k = params.kappa;
    const double den =
        2.0 * nb + 4.0 * ns * nb + 6.0 * ns + 4.0 * k * ns * ns + 3.0 * k * ns + 2.0;
    return k * ns * (ns + 1.0) / den;
}

PerformanceReport pc_error_prob_gaussian(const ScenarioParams& params, std::int64_t m,
                                         PcVarianceModel model) {
    ScenarioParams p = params;
    p.m = m;
    const PcStatistics st = pc_statistics(p, model);
    PerformanceReport r = gaussian_report(ReceiverKind::pc, pc_exponent(st), m);
    r.threshold = st.threshold;
    return r;
}

HomodyneStatistics homodyne_statistics(const ScenarioParams& params) {
    params.validate();
    return {0.0, std::sqrt(params.kappa * params.n_s), (2.0 * params.n_b + 1.0) / 4.0};
}

double homodyne_exponent(const ScenarioParams& params) {
    params.validate();
    return params.kappa * params.n_s / (4.0 * params.n_b + 2.0);
}

PerformanceReport homodyne_error_prob(const ScenarioParams& params, std::int64_t m) {
    return gaussian_report(ReceiverKind::homodyne, homodyne_exponent(params), m);
}

AsymptoticExponents asymptotic_exponents(const ScenarioParams& params) {
    params.validate();
    require(params.n_b > 0.0, ErrorCode::domain, "asymptotic exponents need N_B > 0");
    const double r_q = params.kappa * params.n_s / params.n_b;
    return {r_q, r_q / 4.0};
}

SimulationResult simulate_counts(const ScenarioParams& params, ReceiverKind receiver,
                                 const OpaConfig& cfg, std::int64_t m, std::uint64_t seed,
                                 std::int64_t trials) {
    require(receiver == ReceiverKind::opa || receiver == ReceiverKind::opa_click,
            ErrorCode::domain,
            "Monte Carlo sampling is only available for the OPA receivers, not " +
                std::string(to_string(receiver)));
    require(trials >= 1, ErrorCode::domain, "need at least one trial");
    ScenarioParams p = params;
    p.m = m;
    p.validate();

    const OpaStatistics counts = opa_statistics(p, cfg);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);

    SimulationResult res;
    res.outcomes.reserve(static_cast<std::size_t>(trials));
    std::int64_t threshold = 0;

    auto draw = [&](double mean) -> std::int64_t {
        if (mean <= 0.0) return 0;
        if (receiver == ReceiverKind::opa_click) {
            std::binomial_distribution<std::int64_t> clicks(m, mean / (1.0 + mean));
            return clicks(rng);
        }
        // Sum of M geometric counts with success probability 1/(1 + mean).
        std::negative_binomial_distribution<std::int64_t> photons(m, 1.0 / (1.0 + mean));
        return photons(rng);
    };

    if (receiver == ReceiverKind::opa_click) {
        threshold = opa_click_statistics(p, cfg).threshold;
    } else {
        threshold = counts.threshold;
    }

    for (std::int64_t t = 0; t < trials; ++t) {
        TrialOutcome o;
        o.truth = coin(rng) ? Hypothesis::H1 : Hypothesis::H0;
        o.count = draw(o.truth == Hypothesis::H1 ? counts.n1 : counts.n0);
        o.decision = o.count < threshold ? Hypothesis::H0 : Hypothesis::H1;
        if (o.decision != o.truth) ++res.errors;
        res.outcomes.push_back(o);
    }
    const double n = static_cast<double>(trials);
    res.error_rate = static_cast<double>(res.errors) / n;
    res.standard_error = std::sqrt(res.error_rate * (1.0 - res.error_rate) / n);
    res.threshold = threshold;
    return res;
}

}  // namespace qillum
