#pragma once

// Truncated Fock-basis numerics used as an independent oracle for the
// Gaussian-moment results: hypothesis states as density matrices, receiver
// moments from operator expectation values, and the quantum Chernoff quantity
// Q_s = Tr[rho0^s rho1^(1-s)].
//
// Basis states of a multimode register are flattened row-major with mode 0
// most significant.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "qillum/gaussian.hpp"
#include "qillum/scenario.hpp"

namespace qillum {

inline constexpr double kTailTol = 1e-9;

using Index = Eigen::Index;
using SparseOp = Eigen::SparseMatrix<cplx>;

struct TruncationSpec {
    std::vector<int> dims;  ///< per-mode dimensions; empty means "choose automatically"
    double tail_tol = kTailTol;
    bool auto_grow = true;
};

/// Heuristic dimension ceil(mean + 10 sqrt(mean (mean + 1)) + 10).
int heuristic_dim(double mean);
/// Probability mass of a thermal state at or above level `dim`.
double thermal_tail(double mean, int dim);
/// heuristic_dim grown by 25% steps until thermal_tail <= tail_tol.
int covering_dim(double mean, double tail_tol);
/// ceil(1.25 * dim), at least dim + 1.
int grown_dim(int dim);

class FockOperator {
public:
    FockOperator(std::vector<int> dims, CMatrix matrix, bool hermitian);

    const std::vector<int>& dims() const noexcept { return dims_; }
    const CMatrix& matrix() const noexcept { return matrix_; }
    bool hermitian() const noexcept { return hermitian_; }
    Index dimension() const noexcept { return matrix_.rows(); }
    int n_modes() const noexcept { return static_cast<int>(dims_.size()); }
    double trace() const { return matrix_.trace().real(); }

private:
    std::vector<int> dims_;
    CMatrix matrix_;
    bool hermitian_;
};

Index flat_index(std::span<const int> dims, std::span<const int> occupation);
std::vector<int> occupation(std::span<const int> dims, Index flat);
Index register_size(std::span<const int> dims);

FockOperator thermal_fock(double mean, int dim, double tail_tol = kTailTol);
/// Pure two-mode squeezed vacuum |psi><psi| on dims {signal, idler}. Grows the
/// dims when spec.auto_grow is set; otherwise throws ErrorCode::truncation
/// if the discarded amplitude mass exceeds spec.tail_tol.
FockOperator tmsv_fock(double n_s, const TruncationSpec& spec);
/// Amplitudes sqrt(N^n / (N+1)^(n+1)) for n < dim.
RVector tmsv_amplitudes(double n_s, int dim);

FockOperator tensor(const FockOperator& a, const FockOperator& b);
FockOperator partial_trace(const FockOperator& rho, std::span<const int> keep);
/// Zero-pads each mode up to `dims` (component-wise >= current dims).
FockOperator pad(const FockOperator& rho, std::span<const int> dims);

/// Block-sparse unitary on a small register. Each sector is closed under the
/// generator that produced it.
struct Sector {
    std::vector<Index> basis;
    CMatrix block;
};

struct FockUnitary {
    std::vector<int> dims;
    std::vector<Sector> sectors;

    CMatrix dense() const;
    /// max over columns of | ||U e_k|| - 1 |.
    double unitarity_defect() const;
};

/// exp(K) for an anti-Hermitian generator given by its nonzero entries,
/// computed sector by sector through a Hermitian eigendecomposition.
FockUnitary exponentiate_generator(std::vector<int> dims,
                                   const std::vector<Eigen::Triplet<cplx>>& generator,
                                   double tail_tol = kTailTol);

/// U^+ a_0 U = sqrt(t) a_0 + sqrt(1-t) a_1.
FockUnitary beamsplitter_fock(std::array<int, 2> dims, double transmissivity);
/// U^+ a_0 U = sqrt(G) a_0 + sqrt(G-1) a_1^+.
FockUnitary two_mode_squeezer_fock(std::array<int, 2> dims, double gain);
/// U^+ a U = a + alpha.
FockUnitary displacement_fock(int dim, cplx alpha);

/// U rho U^+ with U acting on the listed modes of rho.
FockOperator apply_unitary(const FockOperator& rho, const FockUnitary& u,
                           std::span<const int> modes);
/// U psi for a pure register vector.
CVector apply_unitary(const CVector& psi, std::span<const int> dims, const FockUnitary& u,
                      std::span<const int> modes);

SparseOp annihilation(std::span<const int> dims, int mode);
SparseOp number_operator(std::span<const int> dims, int mode);
cplx expectation(const FockOperator& rho, const SparseOp& op);

/// Gaussian moments (mean and central second moments) read off the operator,
/// normalised by its trace.
GaussianState gaussian_moments(const FockOperator& rho);

/// Return (x) idler state via an explicit three-mode construction: TMSV
/// (x) thermal bath, exponentiated beamsplitter on signal/bath, trace over
/// the bath. spec.dims = {return, idler, bath}; empty dims are chosen from
/// the mean photon numbers. Dense: meant for reduced parameters.
FockOperator channel_output_fock(const ScenarioParams& params, Hypothesis h,
                                 const TruncationSpec& spec);

/// Dimensions {return, idler, bath} covering the scenario to spec.tail_tol.
std::array<int, 3> channel_dims(const ScenarioParams& params, Hypothesis h,
                                const TruncationSpec& spec);

/// Block-diagonal Hermitian operator; every sector is an invariant subspace.
class SectorOperator {
public:
    SectorOperator(std::vector<int> dims, std::vector<Sector> sectors);

    const std::vector<int>& dims() const noexcept { return dims_; }
    const std::vector<Sector>& sectors() const noexcept { return sectors_; }
    double trace() const;
    SectorOperator normalized() const;
    FockOperator dense() const;

    /// Splits a dense operator into the connected components of its support.
    static SectorOperator from_dense(const FockOperator& rho);

private:
    std::vector<int> dims_;
    std::vector<Sector> sectors_;
};

/// Same return (x) idler state as channel_output_fock, built from closed-form
/// photon-number-conserving beamsplitter amplitudes and stored in sectors of
/// fixed n_return - n_idler. Scales to the hundreds of return levels needed
/// at bright background.
SectorOperator channel_output_sectors(const ScenarioParams& params, Hypothesis h,
                                      std::array<int, 3> dims);

/// Eigen-data of a pair of states sharing one sector partition, from which
/// Q_s is evaluated for any s without further decompositions.
class ChernoffSpectrum {
public:
    ChernoffSpectrum(const SectorOperator& rho0, const SectorOperator& rho1);
    ChernoffSpectrum(const FockOperator& rho0, const FockOperator& rho1);

    double qs(double s) const;

private:
    struct Block {
        RVector lambda0;
        RVector lambda1;
        RMatrix overlap;  ///< |<u_i|v_j>|^2
    };
    void add_pair(const CMatrix& a, const CMatrix& b);

    std::vector<Block> blocks_;
};

double qs_overlap(const FockOperator& rho0, const FockOperator& rho1, double s);

struct QcbResult {
    double q_qcb = 1.0;
    double s_star = 0.5;
    double exponent = 0.0;  ///< -ln Q_QCB
    double q_half = 1.0;    ///< Bhattacharyya overlap Q_{1/2}
};

/// 21-point grid in s followed by golden-section refinement to |ds| <= 1e-4.
QcbResult qcb(const ChernoffSpectrum& spectrum);
QcbResult qcb(const FockOperator& rho0, const FockOperator& rho1);

struct TruncationLevel {
    std::vector<int> dims;
    double exponent = 0.0;
};

struct QcbCertificate {
    QcbResult result;
    std::vector<TruncationLevel> levels;
    double last_relative_change = 0.0;
    bool converged = false;
};

/// Per-mode QCB of the entangled-transmitter hypotheses, growing all dims by
/// 25% until the exponent changes by less than `rel_change` between levels.
QcbCertificate qcb_tmsv(const ScenarioParams& params, const TruncationSpec& spec = {},
                        double rel_change = 0.01, int max_levels = 8);
/// Same for the coherent transmitter (displaced thermal return mode).
QcbCertificate qcb_coherent(const ScenarioParams& params, const TruncationSpec& spec = {},
                            double rel_change = 0.01, int max_levels = 8);

/// Moments of the balanced-difference observable N = a_C^+ a_I + a_I^+ a_C
/// after phase conjugation a_C = sqrt(2) a_V + a_R^+ with a vacuum ancilla.
struct PcMomentCheck {
    double mean = 0.0;
    double variance = 0.0;
    double nbar_c = 0.0;
    double nbar_i = 0.0;
    cplx cross{0.0, 0.0};  ///< <a_C^+ a_I>
    double trace = 0.0;
};

struct PcCheckSpec {
    TruncationSpec channel;  ///< dims {return, idler, bath}
    int conj_dim = 0;        ///< conjugated mode; 0 = automatic
    int spare_dim = 0;       ///< discarded amplifier output; 0 = automatic
};

PcMomentCheck pc_moment_check(const ScenarioParams& params, Hypothesis h,
                              const PcCheckSpec& spec = {});

}  // namespace qillum
