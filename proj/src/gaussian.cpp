#include "qillum/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "qillum/error.hpp"

namespace qillum {
namespace {

double scale_of(const CMatrix& m) { return std::max(1.0, m.cwiseAbs().maxCoeff()); }

// Rebuilds V from its number and pairing blocks so the block-swap symmetry
// holds exactly.
CMatrix assemble(const CMatrix& number, const CMatrix& pairing) {
    const Eigen::Index n = number.rows();
    CMatrix v(2 * n, 2 * n);
    v.topLeftCorner(n, n) = number.transpose() + CMatrix::Identity(n, n);
    v.topRightCorner(n, n) = pairing;
    v.bottomLeftCorner(n, n) = pairing.conjugate();
    v.bottomRightCorner(n, n) = number;
    return v;
}

CMatrix symmetrized(const CMatrix& v) {
    const Eigen::Index n = v.rows() / 2;
    const CMatrix ul = v.topLeftCorner(n, n);
    const CMatrix ur = v.topRightCorner(n, n);
    const CMatrix ll = v.bottomLeftCorner(n, n);
    const CMatrix lr = v.bottomRightCorner(n, n);

    CMatrix number = 0.5 * (lr + (ul - CMatrix::Identity(n, n)).transpose());
    number = 0.5 * (number + number.adjoint()).eval();
    CMatrix pairing = 0.5 * (ur + ll.conjugate());
    pairing = 0.5 * (pairing + pairing.transpose()).eval();
    return assemble(number, pairing);
}

void check_shape(const CVector& mean, const CMatrix& v) {
    require(v.rows() == v.cols() && v.rows() % 2 == 0 && v.rows() > 0, ErrorCode::contract,
            "second-moment matrix must be square with even, positive size");
    require(mean.size() * 2 == v.rows(), ErrorCode::contract,
            "mean vector length must equal the number of modes");
    const CMatrix sym = symmetrized(v);
    const double defect = (sym - v).cwiseAbs().maxCoeff();
    require(defect <= 1e-9 * scale_of(v), ErrorCode::contract,
            "second-moment matrix violates block-swap symmetry (defect " +
                std::to_string(defect) + ")");
}

void check_modes(std::span<const int> modes, int n_modes) {
    std::set<int> seen;
    for (int m : modes) {
        require(m >= 0 && m < n_modes, ErrorCode::domain,
                "mode index " + std::to_string(m) + " out of range for " +
                    std::to_string(n_modes) + "-mode state");
        require(seen.insert(m).second, ErrorCode::domain,
                "mode index " + std::to_string(m) + " listed twice");
    }
}

}  // namespace

GaussianState::GaussianState(CMatrix smatrix) : smatrix_(std::move(smatrix)) {
    mean_ = CVector::Zero(smatrix_.rows() / 2);
    check_shape(mean_, smatrix_);
    smatrix_ = symmetrized(smatrix_);
}

GaussianState::GaussianState(CVector mean, CMatrix smatrix)
    : mean_(std::move(mean)), smatrix_(std::move(smatrix)) {
    check_shape(mean_, smatrix_);
    smatrix_ = symmetrized(smatrix_);
    has_mean_ = mean_.size() > 0 && mean_.cwiseAbs().maxCoeff() > 0.0;
}

CMatrix GaussianState::number_block() const {
    const int n = n_modes();
    return smatrix_.bottomRightCorner(n, n);
}

CMatrix GaussianState::pairing_block() const {
    const int n = n_modes();
    return smatrix_.topRightCorner(n, n);
}

RMatrix GaussianState::quadrature_covariance() const {
    const int n = n_modes();
    const double r = 1.0 / std::sqrt(2.0);
    const cplx i{0.0, 1.0};
    CMatrix t = CMatrix::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) {
        t(j, j) = r;
        t(j, n + j) = r;
        t(n + j, j) = -i * r;
        t(n + j, n + j) = i * r;
    }
    // <dv dv^T> = V P, P swapping the annihilator and creator halves.
    CMatrix vp(2 * n, 2 * n);
    vp.leftCols(n) = smatrix_.rightCols(n);
    vp.rightCols(n) = smatrix_.leftCols(n);
    const CMatrix w = t * vp * t.transpose();
    return (0.5 * (w + w.transpose())).real();
}

RVector GaussianState::symplectic_eigenvalues() const {
    const int n = n_modes();
    const RMatrix sigma = quadrature_covariance();
    Eigen::SelfAdjointEigenSolver<RMatrix> es(sigma);
    if (es.eigenvalues().minCoeff() <= 0.0) {
        // Not positive definite: report the offending spectrum directly.
        return es.eigenvalues().head(n);
    }
    const RMatrix root = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
                         es.eigenvectors().transpose();
    RMatrix omega = RMatrix::Zero(2 * n, 2 * n);
    omega.topRightCorner(n, n) = RMatrix::Identity(n, n);
    omega.bottomLeftCorner(n, n) = -RMatrix::Identity(n, n);
    const CMatrix h = cplx{0.0, 1.0} * (root * omega * root).cast<cplx>();
    Eigen::SelfAdjointEigenSolver<CMatrix> hs(0.5 * (h + h.adjoint()), Eigen::EigenvaluesOnly);
    return hs.eigenvalues().tail(n);
}

double GaussianState::physicality_margin() const {
    return symplectic_eigenvalues().minCoeff() - 0.5;
}

bool GaussianState::is_physical(double tol) const { return physicality_margin() >= -tol; }

double ModeMap::commutator_defect() const {
    const Eigen::Index n = A.rows();
    const CMatrix c = A * A.adjoint() - B * B.adjoint() - CMatrix::Identity(n, n);
    const CMatrix s = A * B.transpose();
    return std::max(c.cwiseAbs().maxCoeff(), (s - s.transpose()).cwiseAbs().maxCoeff());
}

CMatrix ModeMap::transfer_matrix() const {
    const Eigen::Index n = A.rows();
    CMatrix s(2 * n, 2 * n);
    s.topLeftCorner(n, n) = A;
    s.topRightCorner(n, n) = B;
    s.bottomLeftCorner(n, n) = B.conjugate();
    s.bottomRightCorner(n, n) = A.conjugate();
    return s;
}

ModeMap ModeMap::identity(int n) {
    return {CMatrix::Identity(n, n), CMatrix::Zero(n, n)};
}

ModeMap ModeMap::beamsplitter(double transmissivity) {
    require(transmissivity >= 0.0 && transmissivity <= 1.0, ErrorCode::domain,
            "beamsplitter transmissivity must lie in [0, 1]");
    const double t = std::sqrt(transmissivity);
    const double r = std::sqrt(1.0 - transmissivity);
    CMatrix a(2, 2);
    a << t, r, -r, t;
    return {a, CMatrix::Zero(2, 2)};
}

ModeMap ModeMap::two_mode_squeezer(double gain) {
    require(gain >= 1.0, ErrorCode::domain, "two-mode squeezer gain must be >= 1");
    const double g = std::sqrt(gain);
    const double h = std::sqrt(gain - 1.0);
    CMatrix a = CMatrix::Identity(2, 2) * g;
    CMatrix b(2, 2);
    b << 0.0, h, h, 0.0;
    return {a, b};
}

ModeMap ModeMap::compose(const ModeMap& first, const ModeMap& second) {
    require(first.size() == second.size(), ErrorCode::contract,
            "cannot compose mode maps of different sizes");
    return {second.A * first.A + second.B * first.B.conjugate(),
            second.A * first.B + second.B * first.A.conjugate()};
}

GaussianState gaussian_from_blocks(CVector mean, const CMatrix& number, const CMatrix& pairing) {
    require(number.rows() == number.cols() && pairing.rows() == number.rows() &&
                pairing.cols() == number.cols() && mean.size() == number.rows(),
            ErrorCode::contract, "moment blocks must be square and match the mean length");
    const CMatrix n = 0.5 * (number + number.adjoint());
    const CMatrix p = 0.5 * (pairing + pairing.transpose());
    return GaussianState(std::move(mean), assemble(n, p));
}

GaussianState tmsv_state(double n_s) {
    require(n_s >= 0.0, ErrorCode::domain, "mean photon number must be non-negative");
    CMatrix number = CMatrix::Zero(2, 2);
    number(0, 0) = n_s;
    number(1, 1) = n_s;
    CMatrix pairing = CMatrix::Zero(2, 2);
    const double c = std::sqrt(n_s * (n_s + 1.0));
    pairing(0, 1) = c;
    pairing(1, 0) = c;
    return GaussianState(assemble(number, pairing));
}

GaussianState thermal_state(double n) {
    require(n >= 0.0, ErrorCode::domain, "mean photon number must be non-negative");
    CMatrix v = CMatrix::Zero(2, 2);
    v(0, 0) = n + 1.0;
    v(1, 1) = n;
    return GaussianState(v);
}

GaussianState coherent_state(cplx alpha) {
    CVector mean(1);
    mean(0) = alpha;
    CMatrix v = CMatrix::Zero(2, 2);
    v(0, 0) = 1.0;
    return GaussianState(mean, v);
}

GaussianState vacuum_state(int n_modes) {
    require(n_modes > 0, ErrorCode::domain, "vacuum needs at least one mode");
    return GaussianState(assemble(CMatrix::Zero(n_modes, n_modes), CMatrix::Zero(n_modes, n_modes)));
}

GaussianState tensor(const GaussianState& a, const GaussianState& b) {
    const int na = a.n_modes();
    const int nb = b.n_modes();
    const int n = na + nb;
    CMatrix number = CMatrix::Zero(n, n);
    CMatrix pairing = CMatrix::Zero(n, n);
    number.topLeftCorner(na, na) = a.number_block();
    number.bottomRightCorner(nb, nb) = b.number_block();
    pairing.topLeftCorner(na, na) = a.pairing_block();
    pairing.bottomRightCorner(nb, nb) = b.pairing_block();
    CVector mean(n);
    mean << a.mean(), b.mean();
    return GaussianState(mean, assemble(number, pairing));
}

GaussianState apply_mode_map(const GaussianState& state, const ModeMap& map,
                             std::span<const int> input_modes) {
    const int n = state.n_modes();
    require(map.A.rows() == map.A.cols() && map.B.rows() == map.A.rows() &&
                map.B.cols() == map.A.cols(),
            ErrorCode::contract, "mode map blocks must be square and of equal size");
    require(static_cast<int>(input_modes.size()) == map.size(), ErrorCode::contract,
            "mode map size does not match the number of input modes");
    check_modes(input_modes, n);
    const double defect = map.commutator_defect();
    require(defect <= kPhysTol, ErrorCode::contract,
            "mode map does not preserve commutators (defect " + std::to_string(defect) + ")");

    CMatrix s = CMatrix::Identity(2 * n, 2 * n);
    for (int a = 0; a < map.size(); ++a) {
        const int ia = input_modes[a];
        s(ia, ia) = 0.0;
        s(n + ia, n + ia) = 0.0;
    }
    for (int a = 0; a < map.size(); ++a) {
        const int ia = input_modes[a];
        for (int b = 0; b < map.size(); ++b) {
            const int ib = input_modes[b];
            s(ia, ib) = map.A(a, b);
            s(ia, n + ib) = map.B(a, b);
            s(n + ia, ib) = std::conj(map.B(a, b));
            s(n + ia, n + ib) = std::conj(map.A(a, b));
        }
    }
    const CMatrix v = s * state.smatrix() * s.adjoint();

    CVector mean = state.mean();
    if (state.has_mean()) {
        CVector full(2 * n);
        full << state.mean(), state.mean().conjugate();
        mean = (s * full).head(n);
    }
    GaussianState out(mean, symmetrized(v));
    require(out.is_physical(), ErrorCode::numerical,
            "mode map produced an unphysical state");
    return out;
}

GaussianState partial_state(const GaussianState& state, std::span<const int> keep) {
    const int n = state.n_modes();
    check_modes(keep, n);
    require(!keep.empty(), ErrorCode::domain, "partial_state needs at least one mode");
    const int k = static_cast<int>(keep.size());
    std::vector<int> idx(2 * k);
    for (int j = 0; j < k; ++j) {
        idx[j] = keep[j];
        idx[k + j] = n + keep[j];
    }
    CMatrix v(2 * k, 2 * k);
    for (int r = 0; r < 2 * k; ++r)
        for (int c = 0; c < 2 * k; ++c) v(r, c) = state.smatrix()(idx[r], idx[c]);
    CVector mean(k);
    for (int j = 0; j < k; ++j) mean(j) = state.mean()(keep[j]);
    return GaussianState(mean, v);
}

Moments moments(const GaussianState& state) {
    const CVector& a = state.mean();
    const CMatrix number = state.number_block();
    Moments m;
    m.correlation = number + a.conjugate() * a.transpose();
    m.pairing = state.pairing_block() + a * a.transpose();
    m.photon_number = m.correlation.diagonal().real().cwiseMax(0.0);
    return m;
}

}  // namespace qillum
