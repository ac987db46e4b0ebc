#pragma once

#include <cstdint>
#include <string_view>

#include "qillum/gaussian.hpp"

namespace qillum {

enum class Hypothesis { H0, H1 };

constexpr std::string_view to_string(Hypothesis h) noexcept {
    return h == Hypothesis::H0 ? "H0" : "H1";
}

/// One detection problem: mean signal photons per mode, mean background
/// photons per mode, round-trip transmissivity and number of mode pairs.
struct ScenarioParams {
    double n_s = 0.01;
    double n_b = 20.0;
    double kappa = 0.01;
    std::int64_t m = 1;

    /// Throws ErrorCode::domain when any field is outside its range.
    void validate() const;
};

/// Return-idler state (mode 0 = return, mode 1 = idler) for the entangled
/// transmitter. Built as TMSV (x) thermal bath -> beamsplitter -> trace bath.
GaussianState return_idler_state(const ScenarioParams& params, Hypothesis h);

/// Single return mode for the coherent-state transmitter.
GaussianState coherent_return_state(const ScenarioParams& params, Hypothesis h);

/// Mean photon number of the thermal bath mixed into the return under `h`.
double bath_photons(const ScenarioParams& params, Hypothesis h);

}  // namespace qillum
