#include <doctest.h>

#include <array>
#include <cmath>

#include "qillum/error.hpp"
#include "qillum/scenario.hpp"

using namespace qillum;

namespace {

CMatrix printed(double r, double i, double c) {
    CMatrix v = CMatrix::Zero(4, 4);
    v(0, 0) = r + 1.0;
    v(1, 1) = i + 1.0;
    v(2, 2) = r;
    v(3, 3) = i;
    v(0, 3) = v(3, 0) = v(1, 2) = v(2, 1) = c;
    return v;
}

double rel_dev(const CMatrix& a, const CMatrix& b) {
    return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("return-idler states match the closed-form matrices") {
    for (const ScenarioParams p : {ScenarioParams{}, ScenarioParams{0.1, 1.0, 0.1, 1},
                                   ScenarioParams{2.0, 0.5, 0.7, 1}}) {
        const double c = std::sqrt(p.kappa * p.n_s * (p.n_s + 1.0));
        CHECK(rel_dev(return_idler_state(p, Hypothesis::H0).smatrix(), printed(p.n_b, p.n_s, 0.0)) <= 1e-12);
        CHECK(rel_dev(return_idler_state(p, Hypothesis::H1).smatrix(),
                      printed(p.kappa * p.n_s + p.n_b, p.n_s, c)) <= 1e-12);
    }
}

TEST_CASE("cross correlation at the reference point") {
    const GaussianState s = return_idler_state(ScenarioParams{}, Hypothesis::H1);
    CHECK(s.smatrix()(0, 3).real() == doctest::Approx(0.0100498756).epsilon(1e-9));
}

TEST_CASE("no return means no information") {
    ScenarioParams p;
    p.kappa = 0.0;
    CHECK(rel_dev(return_idler_state(p, Hypothesis::H1).smatrix(),
                  return_idler_state(p, Hypothesis::H0).smatrix()) == 0.0);
    CHECK(coherent_return_state(p, Hypothesis::H1).mean()(0) == cplx{0.0, 0.0});
}

TEST_CASE("continuity at kappa -> 0") {
    ScenarioParams p;
    p.kappa = 1e-12;
    CHECK(rel_dev(return_idler_state(p, Hypothesis::H1).smatrix(),
                  return_idler_state(p, Hypothesis::H0).smatrix()) < 1e-6);
}

TEST_CASE("background photons are equal under both hypotheses") {
    ScenarioParams p{0.3, 5.0, 0.4, 1};
    const double h1 = return_idler_state(p, Hypothesis::H1).smatrix()(2, 2).real();
    CHECK(h1 - p.kappa * p.n_s == doctest::Approx(p.n_b).epsilon(1e-13));
    CHECK(bath_photons(p, Hypothesis::H1) * (1.0 - p.kappa) == doctest::Approx(p.n_b));
}

TEST_CASE("idler is untouched") {
    const std::array<int, 1> idler{1};
    for (Hypothesis h : {Hypothesis::H0, Hypothesis::H1}) {
        const GaussianState s = partial_state(return_idler_state(ScenarioParams{}, h), idler);
        CHECK((s.smatrix() - thermal_state(0.01).smatrix()).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("lossless edge") {
    ScenarioParams p{0.2, 3.0, 1.0, 1};
    const GaussianState h1 = return_idler_state(p, Hypothesis::H1);
    CHECK((h1.smatrix() - tmsv_state(0.2).smatrix()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(return_idler_state(p, Hypothesis::H0).smatrix()(2, 2).real() == 3.0);
}

TEST_CASE("coherent returns") {
    ScenarioParams p;
    const GaussianState h0 = coherent_return_state(p, Hypothesis::H0);
    const GaussianState h1 = coherent_return_state(p, Hypothesis::H1);
    CHECK(h0.mean()(0) == cplx{0.0, 0.0});
    CHECK(h1.mean()(0).real() == doctest::Approx(0.01).epsilon(1e-14));
    CHECK((h1.smatrix() - thermal_state(20.0).smatrix()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("parameter validation") {
    for (const ScenarioParams p : {ScenarioParams{-1.0, 1.0, 0.1, 1}, ScenarioParams{0.1, -1.0, 0.1, 1},
                                   ScenarioParams{0.1, 1.0, 1.5, 1}, ScenarioParams{0.1, 1.0, 0.1, 0},
                                   ScenarioParams{NAN, 1.0, 0.1, 1}}) {
        try {
            p.validate();
            FAIL("accepted invalid parameters");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::domain);
        }
    }
}
