#include "qillum/scenario.hpp"

#include <array>
#include <cmath>

#include "qillum/error.hpp"

namespace qillum {

void ScenarioParams::validate() const {
    require(std::isfinite(n_s) && n_s >= 0.0, ErrorCode::domain, "N_S must be a finite value >= 0");
    require(std::isfinite(n_b) && n_b >= 0.0, ErrorCode::domain, "N_B must be a finite value >= 0");
    require(std::isfinite(kappa) && kappa >= 0.0 && kappa <= 1.0, ErrorCode::domain,
            "kappa must lie in [0, 1]");
    require(m >= 1, ErrorCode::domain, "M must be >= 1");
}

double bath_photons(const ScenarioParams& params, Hypothesis h) {
    params.validate();
    if (h == Hypothesis::H0) return params.n_b;
    if (params.kappa >= 1.0) return 0.0;
    // Rescaled so the transmitted noise (1 - kappa) * N_B' equals N_B.
    return params.n_b / (1.0 - params.kappa);
}

GaussianState return_idler_state(const ScenarioParams& params, Hypothesis h) {
    params.validate();
    const GaussianState source = tmsv_state(params.n_s);  // modes: signal, idler
    if (h == Hypothesis::H1 && params.kappa >= 1.0) {
        // Lossless limit: the signal itself comes back, no bath is mixed in.
        return source;
    }
    const double transmissivity = h == Hypothesis::H0 ? 0.0 : params.kappa;
    const GaussianState joint = tensor(source, thermal_state(bath_photons(params, h)));
    const std::array<int, 2> mixed{0, 2};
    const GaussianState out =
        apply_mode_map(joint, ModeMap::beamsplitter(transmissivity), mixed);
    const std::array<int, 2> keep{0, 1};
    return partial_state(out, keep);
}

GaussianState coherent_return_state(const ScenarioParams& params, Hypothesis h) {
    params.validate();
    const GaussianState noise = thermal_state(params.n_b);
    if (h == Hypothesis::H0) return noise;
    CVector mean(1);
    mean(0) = std::sqrt(params.kappa * params.n_s);
    return GaussianState(mean, noise.smatrix());
}

}  // namespace qillum
