#pragma once

// Multimode Gaussian states described by first moments and the
// non-symmetrized second-moment matrix
//
//     V_jk = < dv_j  dvbar_k >,   v = [a_1..a_n, a_1^+..a_n^+],
//                                 vbar = [a_1^+..a_n^+, a_1..a_n],
//
// with dv = v - <v>. For n modes the ordering is "all annihilators, then all
// creators"; for two modes this reproduces the familiar 4x4 layout in which
// the (0,0) entry of a two-mode squeezed vacuum is N_S + 1 and the (0,3)
// entry is sqrt(N_S (N_S + 1)).

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qillum {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Absolute tolerance on the symplectic-eigenvalue deficit below 1/2.
inline constexpr double kPhysTol = 1e-9;

class GaussianState {
public:
    /// Zero-mean state from a second-moment matrix. Throws on shape or
    /// symmetry violations (ErrorCode::contract).
    explicit GaussianState(CMatrix smatrix);
    GaussianState(CVector mean, CMatrix smatrix);

    int n_modes() const noexcept { return static_cast<int>(mean_.size()); }
    const CVector& mean() const noexcept { return mean_; }
    const CMatrix& smatrix() const noexcept { return smatrix_; }
    bool has_mean() const noexcept { return has_mean_; }

    /// Central <a_j^+ a_k> block.
    CMatrix number_block() const;
    /// Central <a_j a_k> block.
    CMatrix pairing_block() const;

    /// Symmetrized real quadrature covariance in (q_1..q_n, p_1..p_n) order,
    /// vacuum = identity / 2.
    RMatrix quadrature_covariance() const;
    /// Ascending symplectic eigenvalues of the quadrature covariance.
    RVector symplectic_eigenvalues() const;
    /// Smallest symplectic eigenvalue minus 1/2 (negative means unphysical).
    double physicality_margin() const;
    bool is_physical(double tol = kPhysTol) const;

private:
    CVector mean_;
    CMatrix smatrix_;
    bool has_mean_ = false;
};

/// Bogoliubov map a'_j = sum_k A_jk a_k + B_jk a_k^+ on a set of n modes.
struct ModeMap {
    CMatrix A;
    CMatrix B;

    int size() const noexcept { return static_cast<int>(A.rows()); }

    /// Largest entry of |A A^+ - B B^+ - 1| and |A B^T - (A B^T)^T|.
    double commutator_defect() const;
    /// Full 2n x 2n transfer matrix S with v' = S v.
    CMatrix transfer_matrix() const;

    static ModeMap identity(int n);
    /// a_0' = sqrt(t) a_0 + sqrt(1-t) a_1, a_1' = -sqrt(1-t) a_0 + sqrt(t) a_1.
    static ModeMap beamsplitter(double transmissivity);
    /// a_0' = sqrt(G) a_0 + sqrt(G-1) a_1^+, a_1' = sqrt(G) a_1 + sqrt(G-1) a_0^+.
    static ModeMap two_mode_squeezer(double gain);
    /// Maps compose as "first then second": returns second o first.
    static ModeMap compose(const ModeMap& first, const ModeMap& second);
};

/// State from a mean vector and central <a^+ a>, <a a> blocks.
GaussianState gaussian_from_blocks(CVector mean, const CMatrix& number, const CMatrix& pairing);

GaussianState tmsv_state(double n_s);
GaussianState thermal_state(double n);
GaussianState coherent_state(cplx alpha);
GaussianState vacuum_state(int n_modes);

/// Block-diagonal product state, modes of `a` first.
GaussianState tensor(const GaussianState& a, const GaussianState& b);

/// Applies `map` to the listed modes (map index i acts on state mode
/// input_modes[i]); untouched modes pass through.
GaussianState apply_mode_map(const GaussianState& state, const ModeMap& map,
                             std::span<const int> input_modes);

/// Reduced state on `keep`, in the order given.
GaussianState partial_state(const GaussianState& state, std::span<const int> keep);

/// Raw (non-central) moments, mean contributions included.
struct Moments {
    RVector photon_number;  ///< <a_j^+ a_j>
    CMatrix pairing;        ///< <a_j a_k>
    CMatrix correlation;    ///< <a_j^+ a_k>
};

Moments moments(const GaussianState& state);

}  // namespace qillum
