#include <doctest.h>

#include <array>
#include <cmath>

#include "qillum/error.hpp"
#include "qillum/gaussian.hpp"

using namespace qillum;

namespace {

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("tmsv second moments") {
    SUBCASE("vacuum limit") {
        const GaussianState s = tmsv_state(0.0);
        CMatrix v = CMatrix::Zero(4, 4);
        v(0, 0) = v(1, 1) = 1.0;
        CHECK(max_abs(s.smatrix() - v) == 0.0);
    }
    SUBCASE("N_S = 1") {
        const GaussianState s = tmsv_state(1.0);
        CHECK(s.smatrix()(0, 0).real() == doctest::Approx(2.0));
        CHECK(s.smatrix()(1, 1).real() == doctest::Approx(2.0));
        CHECK(s.smatrix()(2, 2).real() == doctest::Approx(1.0));
        CHECK(s.smatrix()(3, 3).real() == doctest::Approx(1.0));
        for (auto [r, c] : {std::pair{0, 3}, {3, 0}, {1, 2}, {2, 1}})
            CHECK(s.smatrix()(r, c).real() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    }
    SUBCASE("pure for any N_S") {
        for (double ns : {0.0, 1e-3, 0.01, 1.0, 37.0}) {
            const RVector nu = tmsv_state(ns).symplectic_eigenvalues();
            CHECK(nu(0) == doctest::Approx(0.5).epsilon(1e-9));
            CHECK(nu(1) == doctest::Approx(0.5).epsilon(1e-9));
        }
    }
    CHECK_THROWS_AS(tmsv_state(-0.1), Error);
}

TEST_CASE("thermal and coherent states") {
    const GaussianState t = thermal_state(20.0);
    CHECK(t.smatrix()(0, 0).real() == 21.0);
    CHECK(t.smatrix()(1, 1).real() == 20.0);
    CHECK(t.symplectic_eigenvalues()(0) == doctest::Approx(20.5).epsilon(1e-12));
    CHECK(max_abs(thermal_state(0.0).smatrix() - vacuum_state(1).smatrix()) == 0.0);

    const GaussianState c = coherent_state(0.001);
    CHECK(c.mean()(0).real() == doctest::Approx(0.001).epsilon(1e-15));
    CHECK(max_abs(c.smatrix() - vacuum_state(1).smatrix()) == 0.0);
    const cplx alpha{0.3, -1.2};
    CHECK(moments(coherent_state(alpha)).photon_number(0) == doctest::Approx(std::norm(alpha)));
    CHECK_THROWS_AS(thermal_state(-1.0), Error);
}

TEST_CASE("block-swap symmetry is enforced") {
    CMatrix bad = thermal_state(1.0).smatrix();
    bad(0, 0) = 5.0;
    try {
        GaussianState s(bad);
        FAIL("accepted an inconsistent second-moment matrix");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::contract);
    }
    CHECK_THROWS_AS(GaussianState(CMatrix::Zero(3, 3)), Error);
    CHECK_THROWS_AS(GaussianState(CVector::Zero(2), thermal_state(1.0).smatrix()), Error);
}

TEST_CASE("physicality check rejects sub-vacuum states") {
    CMatrix number = CMatrix::Zero(1, 1);
    CMatrix pairing = CMatrix::Zero(1, 1);
    pairing(0, 0) = 0.5;  // <a a> too large for zero photons
    const GaussianState s = gaussian_from_blocks(CVector::Zero(1), number, pairing);
    CHECK_FALSE(s.is_physical());
    CHECK(s.physicality_margin() < -0.1);
    CHECK(tmsv_state(0.3).is_physical());
}

TEST_CASE("mode maps") {
    SUBCASE("commutators") {
        CHECK(ModeMap::beamsplitter(0.37).commutator_defect() < 1e-15);
        CHECK(ModeMap::two_mode_squeezer(3.0).commutator_defect() < 1e-14);
        CHECK(ModeMap::identity(3).commutator_defect() == 0.0);
    }
    SUBCASE("identity map leaves the state alone") {
        const GaussianState s = tmsv_state(0.4);
        const std::array<int, 2> modes{0, 1};
        CHECK(max_abs(apply_mode_map(s, ModeMap::identity(2), modes).smatrix() - s.smatrix()) < 1e-15);
    }
    SUBCASE("unit-gain squeezer is the identity") {
        const ModeMap m = ModeMap::two_mode_squeezer(1.0);
        CHECK(max_abs(m.A - CMatrix::Identity(2, 2)) == 0.0);
        CHECK(max_abs(m.B) == 0.0);
    }
    SUBCASE("squeezer on vacuum gives a TMSV with N_S = G - 1") {
        const std::array<int, 2> modes{0, 1};
        const GaussianState out = apply_mode_map(vacuum_state(2), ModeMap::two_mode_squeezer(1.8), modes);
        CHECK(max_abs(out.smatrix() - tmsv_state(0.8).smatrix()) < 1e-14);
    }
    SUBCASE("non-symplectic maps are contract violations") {
        ModeMap bad = ModeMap::beamsplitter(0.5);
        bad.A *= 1.1;
        const std::array<int, 2> modes{0, 1};
        try {
            apply_mode_map(tmsv_state(0.1), bad, modes);
            FAIL("accepted a non-symplectic map");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::contract);
        }
    }
    SUBCASE("bad indices are domain errors") {
        const std::array<int, 2> out_of_range{0, 2};
        const std::array<int, 2> repeated{1, 1};
        for (std::span<const int> modes : {std::span<const int>(out_of_range), std::span<const int>(repeated)}) {
            try {
                apply_mode_map(tmsv_state(0.1), ModeMap::beamsplitter(0.5), modes);
                FAIL("accepted bad mode indices");
            } catch (const Error& e) {
                CHECK(e.code() == ErrorCode::domain);
            }
        }
    }
}

TEST_CASE("beamsplitter build of the target-present return") {
    const double ns = 0.01, nb = 20.0, k = 0.01;
    const GaussianState in = tensor(tmsv_state(ns), thermal_state(nb / (1.0 - k)));
    const std::array<int, 2> modes{0, 2};
    const std::array<int, 2> keep{0, 1};
    const GaussianState out = partial_state(apply_mode_map(in, ModeMap::beamsplitter(k), modes), keep);
    const CMatrix v = out.smatrix();
    CHECK(v(0, 0).real() == doctest::Approx(k * ns + nb + 1.0).epsilon(1e-13));
    CHECK(v(2, 2).real() == doctest::Approx(k * ns + nb).epsilon(1e-13));
    CHECK(v(1, 1).real() == doctest::Approx(ns + 1.0).epsilon(1e-13));
    CHECK(v(0, 3).real() == doctest::Approx(std::sqrt(k * ns * (ns + 1.0))).epsilon(1e-13));
    CHECK(v(0, 1) == cplx{0.0, 0.0});
}

TEST_CASE("composition equals sequential application") {
    const GaussianState in = tensor(tensor(tmsv_state(0.2), thermal_state(1.5)), coherent_state({0.4, 0.1}));
    const std::array<int, 2> a{0, 2};
    const ModeMap first = ModeMap::beamsplitter(0.6);
    const ModeMap second = ModeMap::two_mode_squeezer(1.3);
    const GaussianState seq = apply_mode_map(apply_mode_map(in, first, a), second, a);
    const GaussianState once = apply_mode_map(in, ModeMap::compose(first, second), a);
    const double scale = max_abs(seq.smatrix());
    CHECK(max_abs(seq.smatrix() - once.smatrix()) <= 1e-12 * scale);
    CHECK((seq.mean() - once.mean()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(ModeMap::compose(first, second).commutator_defect() < 1e-14);
}

TEST_CASE("pure inputs stay pure under mode maps") {
    const GaussianState in = tensor(tmsv_state(0.5), vacuum_state(1));
    const std::array<int, 2> a{1, 2};
    const GaussianState out = apply_mode_map(in, ModeMap::compose(ModeMap::beamsplitter(0.3),
                                                                  ModeMap::two_mode_squeezer(2.0)),
                                             a);
    const RVector nu = out.symplectic_eigenvalues();
    for (Eigen::Index i = 0; i < nu.size(); ++i) CHECK(nu(i) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("partial state commutes with maps on kept modes") {
    const GaussianState in = tensor(tmsv_state(0.3), thermal_state(4.0));
    const std::array<int, 2> act{0, 2};
    const std::array<int, 2> keep{0, 2};
    const std::array<int, 2> act_reduced{0, 1};
    const ModeMap bs = ModeMap::beamsplitter(0.25);
    const GaussianState a = partial_state(apply_mode_map(in, bs, act), keep);
    const GaussianState b = apply_mode_map(partial_state(in, keep), bs, act_reduced);
    CHECK(max_abs(a.smatrix() - b.smatrix()) < 1e-13);

    const std::array<int, 1> signal{0};
    CHECK(max_abs(partial_state(tmsv_state(0.3), signal).smatrix() - thermal_state(0.3).smatrix()) < 1e-15);
}

TEST_CASE("moments") {
    const Moments m = moments(tmsv_state(0.7));
    CHECK(m.pairing(0, 1).real() == doctest::Approx(std::sqrt(0.7 * 1.7)));
    CHECK(m.photon_number(0) == doctest::Approx(0.7));
    const Moments v = moments(vacuum_state(2));
    CHECK(v.photon_number.cwiseAbs().maxCoeff() == 0.0);
    CHECK(v.pairing.cwiseAbs().maxCoeff() == 0.0);
    CHECK(v.correlation.cwiseAbs().maxCoeff() == 0.0);
}
