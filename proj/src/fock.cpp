#include "qillum/fock.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qillum/error.hpp"

namespace qillum {
namespace {

constexpr double kNegativeEigTol = 1e-10;
constexpr double kEigFloor = 1e-300;

std::vector<Index> strides_of(std::span<const int> dims) {
    std::vector<Index> s(dims.size(), 1);
    for (int m = static_cast<int>(dims.size()) - 2; m >= 0; --m) s[m] = s[m + 1] * dims[m + 1];
    return s;
}

void check_dims(std::span<const int> dims) {
    require(!dims.empty(), ErrorCode::domain, "a Fock register needs at least one mode");
    for (int d : dims) require(d >= 1, ErrorCode::domain, "Fock dimensions must be >= 1");
}

// Union-find over basis indices; used to split operators into the connected
// components of their nonzero pattern.
class Components {
public:
    explicit Components(Index n) : parent_(static_cast<std::size_t>(n)) {
        std::iota(parent_.begin(), parent_.end(), Index{0});
    }
    Index find(Index i) {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }
    void join(Index a, Index b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }
    std::vector<std::vector<Index>> groups() {
        std::vector<std::vector<Index>> out;
        std::vector<Index> slot(parent_.size(), -1);
        for (Index i = 0; i < static_cast<Index>(parent_.size()); ++i) {
            const Index r = find(i);
            if (slot[r] < 0) {
                slot[r] = static_cast<Index>(out.size());
                out.emplace_back();
            }
            out[slot[r]].push_back(i);
        }
        return out;
    }

private:
    std::vector<Index> parent_;
};

CMatrix submatrix(const CMatrix& m, const std::vector<Index>& idx) {
    const Index n = static_cast<Index>(idx.size());
    CMatrix out(n, n);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c) out(r, c) = m(idx[r], idx[c]);
    return out;
}

// Offsets of the acted-on sub-register inside the full register, and the
// base offsets of every configuration of the remaining modes.
struct Embedding {
    std::vector<Index> offsets;
    std::vector<Index> bases;
};

Embedding embedding(std::span<const int> dims, std::span<const int> modes,
                    std::span<const int> sub_dims) {
    const int n = static_cast<int>(dims.size());
    require(modes.size() == sub_dims.size(), ErrorCode::contract,
            "unitary acts on a different number of modes than listed");
    std::vector<bool> acted(n, false);
    for (std::size_t a = 0; a < modes.size(); ++a) {
        const int m = modes[a];
        require(m >= 0 && m < n, ErrorCode::domain, "mode index out of range");
        require(!acted[m], ErrorCode::domain, "mode listed twice");
        require(dims[m] == sub_dims[a], ErrorCode::contract,
                "unitary dimension does not match the register mode it acts on");
        acted[m] = true;
    }
    const auto strides = strides_of(dims);

    Embedding e;
    const Index sub_size = register_size(sub_dims);
    e.offsets.resize(static_cast<std::size_t>(sub_size));
    for (Index k = 0; k < sub_size; ++k) {
        const auto occ = occupation(sub_dims, k);
        Index off = 0;
        for (std::size_t a = 0; a < modes.size(); ++a) off += occ[a] * strides[modes[a]];
        e.offsets[k] = off;
    }
    std::vector<int> rest_dims;
    std::vector<Index> rest_strides;
    for (int m = 0; m < n; ++m) {
        if (!acted[m]) {
            rest_dims.push_back(dims[m]);
            rest_strides.push_back(strides[m]);
        }
    }
    if (rest_dims.empty()) {
        e.bases = {0};
        return e;
    }
    const Index rest_size = register_size(rest_dims);
    e.bases.resize(static_cast<std::size_t>(rest_size));
    for (Index k = 0; k < rest_size; ++k) {
        const auto occ = occupation(rest_dims, k);
        Index base = 0;
        for (std::size_t a = 0; a < rest_dims.size(); ++a) base += occ[a] * rest_strides[a];
        e.bases[k] = base;
    }
    return e;
}

void apply_in_place(CVector& psi, const FockUnitary& u, const Embedding& e) {
    CVector in;
    for (const Sector& sec : u.sectors) {
        const Index n = static_cast<Index>(sec.basis.size());
        in.resize(n);
        for (Index base : e.bases) {
            for (Index k = 0; k < n; ++k) in(k) = psi(base + e.offsets[sec.basis[k]]);
            const CVector out = sec.block * in;
            for (Index k = 0; k < n; ++k) psi(base + e.offsets[sec.basis[k]]) = out(k);
        }
    }
}

int grow_until_covered(int dim, double mean, double tail_tol, bool auto_grow,
                       const char* mode_name) {
    while (thermal_tail(mean, dim) > tail_tol) {
        if (!auto_grow) {
            fail(ErrorCode::truncation,
                 std::string("truncation too small for ") + mode_name + " mode: dim " +
                     std::to_string(dim) + " leaves tail mass " +
                     std::to_string(thermal_tail(mean, dim)));
        }
        dim = grown_dim(dim);
    }
    return dim;
}

}  // namespace

int heuristic_dim(double mean) {
    require(mean >= 0.0, ErrorCode::domain, "mean photon number must be >= 0");
    return static_cast<int>(std::ceil(mean + 10.0 * std::sqrt(mean * (mean + 1.0)) + 10.0));
}

double thermal_tail(double mean, int dim) {
    if (mean <= 0.0) return 0.0;
    return std::exp(static_cast<double>(dim) * std::log(mean / (1.0 + mean)));
}

int covering_dim(double mean, double tail_tol) {
    return grow_until_covered(heuristic_dim(mean), mean, tail_tol, true, "");
}

int grown_dim(int dim) { return std::max(dim + 1, static_cast<int>(std::ceil(1.25 * dim))); }

Index register_size(std::span<const int> dims) {
    Index n = 1;
    for (int d : dims) n *= d;
    return n;
}

Index flat_index(std::span<const int> dims, std::span<const int> occ) {
    Index idx = 0;
    for (std::size_t m = 0; m < dims.size(); ++m) idx = idx * dims[m] + occ[m];
    return idx;
}

std::vector<int> occupation(std::span<const int> dims, Index flat) {
    std::vector<int> occ(dims.size());
    for (int m = static_cast<int>(dims.size()) - 1; m >= 0; --m) {
        occ[m] = static_cast<int>(flat % dims[m]);
        flat /= dims[m];
    }
    return occ;
}

FockOperator::FockOperator(std::vector<int> dims, CMatrix matrix, bool hermitian)
    : dims_(std::move(dims)), matrix_(std::move(matrix)), hermitian_(hermitian) {
    check_dims(dims_);
    require(matrix_.rows() == matrix_.cols() && matrix_.rows() == register_size(dims_),
            ErrorCode::contract, "Fock operator matrix does not match its dims");
}

FockOperator thermal_fock(double mean, int dim, double tail_tol) {
    require(mean >= 0.0, ErrorCode::domain, "mean photon number must be >= 0");
    require(dim >= 1, ErrorCode::domain, "Fock dimension must be >= 1");
    const double tail = thermal_tail(mean, dim);
    require(tail <= tail_tol, ErrorCode::truncation,
            "thermal state with mean " + std::to_string(mean) + " needs more than " +
                std::to_string(dim) + " levels (tail " + std::to_string(tail) + ")");
    CMatrix m = CMatrix::Zero(dim, dim);
    if (mean == 0.0) {
        m(0, 0) = 1.0;
    } else {
        const double lr = std::log(mean / (1.0 + mean));
        const double l0 = -std::log1p(mean);
        for (int n = 0; n < dim; ++n) m(n, n) = std::exp(l0 + n * lr);
    }
    return FockOperator({dim}, std::move(m), true);
}

RVector tmsv_amplitudes(double n_s, int dim) {
    require(n_s >= 0.0, ErrorCode::domain, "mean photon number must be >= 0");
    RVector c = RVector::Zero(dim);
    if (n_s == 0.0) {
        c(0) = 1.0;
        return c;
    }
    const double lr = 0.5 * std::log(n_s / (1.0 + n_s));
    const double l0 = -0.5 * std::log1p(n_s);
    for (int n = 0; n < dim; ++n) c(n) = std::exp(l0 + n * lr);
    return c;
}

FockOperator tmsv_fock(double n_s, const TruncationSpec& spec) {
    require(n_s >= 0.0, ErrorCode::domain, "mean photon number must be >= 0");
    std::array<int, 2> dims{};
    if (spec.dims.empty()) {
        dims.fill(heuristic_dim(n_s));
    } else {
        require(spec.dims.size() == 2, ErrorCode::config, "TMSV truncation needs two dims");
        dims = {spec.dims[0], spec.dims[1]};
    }
    for (int& d : dims) d = grow_until_covered(d, n_s, spec.tail_tol, spec.auto_grow, "TMSV");
    const int shared = std::min(dims[0], dims[1]);
    const RVector c = tmsv_amplitudes(n_s, shared);
    const std::vector<int> d{dims[0], dims[1]};
    CVector psi = CVector::Zero(register_size(d));
    for (int n = 0; n < shared; ++n) psi(static_cast<Index>(n) * dims[1] + n) = c(n);
    return FockOperator(d, psi * psi.adjoint(), true);
}

FockOperator tensor(const FockOperator& a, const FockOperator& b) {
    std::vector<int> dims = a.dims();
    dims.insert(dims.end(), b.dims().begin(), b.dims().end());
    const Index na = a.dimension();
    const Index nb = b.dimension();
    CMatrix m(na * nb, na * nb);
    for (Index i = 0; i < na; ++i)
        for (Index j = 0; j < na; ++j) m.block(i * nb, j * nb, nb, nb) = a.matrix()(i, j) * b.matrix();
    return FockOperator(std::move(dims), std::move(m), a.hermitian() && b.hermitian());
}

FockOperator partial_trace(const FockOperator& rho, std::span<const int> keep) {
    const auto& dims = rho.dims();
    const int n = rho.n_modes();
    std::vector<bool> kept(n, false);
    std::vector<int> keep_dims;
    for (int m : keep) {
        require(m >= 0 && m < n, ErrorCode::domain, "mode index out of range");
        require(!kept[m], ErrorCode::domain, "mode listed twice");
        kept[m] = true;
        keep_dims.push_back(dims[m]);
    }
    require(!keep_dims.empty(), ErrorCode::domain, "partial trace must keep a mode");
    const std::vector<int> keep_modes(keep.begin(), keep.end());
    const Embedding e = embedding(dims, keep_modes, keep_dims);
    const Index nk = static_cast<Index>(e.offsets.size());
    CMatrix out = CMatrix::Zero(nk, nk);
    for (Index base : e.bases)
        for (Index c = 0; c < nk; ++c)
            for (Index r = 0; r < nk; ++r)
                out(r, c) += rho.matrix()(base + e.offsets[r], base + e.offsets[c]);
    return FockOperator(std::move(keep_dims), std::move(out), rho.hermitian());
}

FockOperator pad(const FockOperator& rho, std::span<const int> dims) {
    require(dims.size() == rho.dims().size(), ErrorCode::contract, "pad needs one dim per mode");
    for (std::size_t m = 0; m < dims.size(); ++m)
        require(dims[m] >= rho.dims()[m], ErrorCode::contract, "pad cannot shrink a mode");
    const std::vector<int> nd(dims.begin(), dims.end());
    std::vector<Index> map(static_cast<std::size_t>(rho.dimension()));
    for (Index i = 0; i < rho.dimension(); ++i) map[i] = flat_index(nd, occupation(rho.dims(), i));
    CMatrix m = CMatrix::Zero(register_size(nd), register_size(nd));
    for (Index c = 0; c < rho.dimension(); ++c)
        for (Index r = 0; r < rho.dimension(); ++r) m(map[r], map[c]) = rho.matrix()(r, c);
    return FockOperator(nd, std::move(m), rho.hermitian());
}

CMatrix FockUnitary::dense() const {
    const Index n = register_size(dims);
    CMatrix u = CMatrix::Zero(n, n);
    for (const Sector& s : sectors)
        for (std::size_t c = 0; c < s.basis.size(); ++c)
            for (std::size_t r = 0; r < s.basis.size(); ++r)
                u(s.basis[r], s.basis[c]) = s.block(static_cast<Index>(r), static_cast<Index>(c));
    return u;
}

double FockUnitary::unitarity_defect() const {
    double worst = 0.0;
    for (const Sector& s : sectors)
        for (Index c = 0; c < s.block.cols(); ++c)
            worst = std::max(worst, std::fabs(s.block.col(c).norm() - 1.0));
    return worst;
}

FockUnitary exponentiate_generator(std::vector<int> dims,
                                   const std::vector<Eigen::Triplet<cplx>>& generator,
                                   double tail_tol) {
    check_dims(dims);
    const Index n = register_size(dims);
    Components comp(n);
    for (const auto& t : generator) {
        require(t.row() >= 0 && t.row() < n && t.col() >= 0 && t.col() < n, ErrorCode::contract,
                "generator entry outside the register");
        comp.join(t.row(), t.col());
    }
    const auto groups = comp.groups();
    std::vector<Index> slot(static_cast<std::size_t>(n));
    std::vector<Index> group_of(static_cast<std::size_t>(n));
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t k = 0; k < groups[g].size(); ++k) {
            slot[groups[g][k]] = static_cast<Index>(k);
            group_of[groups[g][k]] = static_cast<Index>(g);
        }
    std::vector<CMatrix> gens(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const Index sz = static_cast<Index>(groups[g].size());
        gens[g] = CMatrix::Zero(sz, sz);
    }
    for (const auto& t : generator) gens[group_of[t.row()]](slot[t.row()], slot[t.col()]) += t.value();

    FockUnitary u;
    u.dims = std::move(dims);
    u.sectors.reserve(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const CMatrix& k = gens[g];
        require((k + k.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, k.cwiseAbs().maxCoeff()),
                ErrorCode::contract, "generator is not anti-Hermitian");
        Sector s;
        s.basis = groups[g];
        if (k.size() == 1) {
            s.block = k.array().exp().matrix();
        } else {
            // K = -i H with H Hermitian, so exp(K) = V exp(-i Lambda) V^+.
            const CMatrix h = cplx{0.0, 1.0} * k;
            Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (h + h.adjoint()));
            const CVector phase = (es.eigenvalues().cast<cplx>() * cplx{0.0, -1.0}).array().exp();
            s.block = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
        }
        u.sectors.push_back(std::move(s));
    }
    const double defect = u.unitarity_defect();
    require(defect <= 10.0 * tail_tol, ErrorCode::truncation,
            "truncated unitary lost norm (defect " + std::to_string(defect) + ")");
    return u;
}

FockUnitary beamsplitter_fock(std::array<int, 2> dims, double transmissivity) {
    require(transmissivity >= 0.0 && transmissivity <= 1.0, ErrorCode::domain,
            "beamsplitter transmissivity must lie in [0, 1]");
    const double theta = std::acos(std::sqrt(transmissivity));
    std::vector<Eigen::Triplet<cplx>> gen;
    const std::vector<int> d{dims[0], dims[1]};
    if (theta != 0.0) {
        // K = theta (a0^+ a1 - a0 a1^+)
        for (int n0 = 0; n0 < dims[0]; ++n0)
            for (int n1 = 0; n1 < dims[1]; ++n1) {
                const Index col = static_cast<Index>(n0) * dims[1] + n1;
                if (n0 + 1 < dims[0] && n1 > 0)
                    gen.emplace_back(col + dims[1] - 1, col, theta * std::sqrt((n0 + 1.0) * n1));
                if (n0 > 0 && n1 + 1 < dims[1])
                    gen.emplace_back(col - dims[1] + 1, col, -theta * std::sqrt(n0 * (n1 + 1.0)));
            }
    }
    return exponentiate_generator(d, gen);
}

FockUnitary two_mode_squeezer_fock(std::array<int, 2> dims, double gain) {
    require(gain >= 1.0, ErrorCode::domain, "two-mode squeezer gain must be >= 1");
    const double r = std::acosh(std::sqrt(gain));
    std::vector<Eigen::Triplet<cplx>> gen;
    const std::vector<int> d{dims[0], dims[1]};
    if (r != 0.0) {
        // K = r (a0^+ a1^+ - a0 a1)
        for (int n0 = 0; n0 < dims[0]; ++n0)
            for (int n1 = 0; n1 < dims[1]; ++n1) {
                const Index col = static_cast<Index>(n0) * dims[1] + n1;
                if (n0 + 1 < dims[0] && n1 + 1 < dims[1])
                    gen.emplace_back(col + dims[1] + 1, col, r * std::sqrt((n0 + 1.0) * (n1 + 1.0)));
                if (n0 > 0 && n1 > 0)
                    gen.emplace_back(col - dims[1] - 1, col, -r * std::sqrt(1.0 * n0 * n1));
            }
    }
    return exponentiate_generator(d, gen);
}

FockUnitary displacement_fock(int dim, cplx alpha) {
    std::vector<Eigen::Triplet<cplx>> gen;
    if (alpha != cplx{0.0, 0.0}) {
        // K = alpha a^+ - conj(alpha) a
        for (int n = 0; n + 1 < dim; ++n) {
            gen.emplace_back(n + 1, n, alpha * std::sqrt(n + 1.0));
            gen.emplace_back(n, n + 1, -std::conj(alpha) * std::sqrt(n + 1.0));
        }
    }
    return exponentiate_generator({dim}, gen);
}

CVector apply_unitary(const CVector& psi, std::span<const int> dims, const FockUnitary& u,
                      std::span<const int> modes) {
    require(psi.size() == register_size(dims), ErrorCode::contract,
            "state vector does not match its dims");
    const Embedding e = embedding(dims, modes, u.dims);
    CVector out = psi;
    apply_in_place(out, u, e);
    return out;
}

FockOperator apply_unitary(const FockOperator& rho, const FockUnitary& u,
                           std::span<const int> modes) {
    const Embedding e = embedding(rho.dims(), modes, u.dims);
    CMatrix x = rho.matrix();
    CVector col;
    for (Index c = 0; c < x.cols(); ++c) {
        col = x.col(c);
        apply_in_place(col, u, e);
        x.col(c) = col;
    }
    CMatrix y = x.adjoint();
    for (Index c = 0; c < y.cols(); ++c) {
        col = y.col(c);
        apply_in_place(col, u, e);
        y.col(c) = col;
    }
    CMatrix out = y.adjoint();
    if (rho.hermitian()) out = 0.5 * (out + out.adjoint()).eval();
    return FockOperator(rho.dims(), std::move(out), rho.hermitian());
}

SparseOp annihilation(std::span<const int> dims, int mode) {
    check_dims(dims);
    require(mode >= 0 && mode < static_cast<int>(dims.size()), ErrorCode::domain,
            "mode index out of range");
    const Index n = register_size(dims);
    const Index stride = strides_of(dims)[mode];
    std::vector<Eigen::Triplet<cplx>> t;
    t.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const int k = static_cast<int>((i / stride) % dims[mode]);
        if (k > 0) t.emplace_back(i - stride, i, std::sqrt(static_cast<double>(k)));
    }
    SparseOp a(n, n);
    a.setFromTriplets(t.begin(), t.end());
    return a;
}

SparseOp number_operator(std::span<const int> dims, int mode) {
    const SparseOp a = annihilation(dims, mode);
    return SparseOp(a.adjoint() * a);
}

cplx expectation(const FockOperator& rho, const SparseOp& op) {
    require(op.rows() == rho.dimension() && op.cols() == rho.dimension(), ErrorCode::contract,
            "operator does not match the state dimension");
    cplx acc{0.0, 0.0};
    for (Index k = 0; k < op.outerSize(); ++k)
        for (SparseOp::InnerIterator it(op, k); it; ++it)
            acc += rho.matrix()(it.col(), it.row()) * it.value();
    return acc;
}

GaussianState gaussian_moments(const FockOperator& rho) {
    const int n = rho.n_modes();
    const double tr = rho.trace();
    require(tr > 0.0, ErrorCode::numerical, "operator has non-positive trace");
    std::vector<SparseOp> a;
    for (int j = 0; j < n; ++j) a.push_back(annihilation(rho.dims(), j));
    CVector mean(n);
    for (int j = 0; j < n; ++j) mean(j) = expectation(rho, a[j]) / tr;
    CMatrix number(n, n);
    CMatrix pairing(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const SparseOp nk = a[j].adjoint() * a[k];
            const SparseOp pk = a[j] * a[k];
            number(j, k) = expectation(rho, nk) / tr - std::conj(mean(j)) * mean(k);
            pairing(j, k) = expectation(rho, pk) / tr - mean(j) * mean(k);
        }
    return gaussian_from_blocks(mean, number, pairing);
}

std::array<int, 3> channel_dims(const ScenarioParams& params, Hypothesis h,
                                const TruncationSpec& spec) {
    params.validate();
    const double bath = bath_photons(params, h);
    const double ret = h == Hypothesis::H0 ? params.n_b : params.kappa * params.n_s + params.n_b;
    std::array<int, 3> d{};
    if (spec.dims.empty()) {
        d = {heuristic_dim(ret), heuristic_dim(params.n_s), heuristic_dim(bath)};
    } else {
        require(spec.dims.size() == 3, ErrorCode::config,
                "channel truncation needs dims {return, idler, bath}");
        d = {spec.dims[0], spec.dims[1], spec.dims[2]};
    }
    d[0] = grow_until_covered(d[0], ret, spec.tail_tol, spec.auto_grow, "return");
    d[1] = grow_until_covered(d[1], params.n_s, spec.tail_tol, spec.auto_grow, "idler");
    d[2] = grow_until_covered(d[2], bath, spec.tail_tol, spec.auto_grow, "bath");
    // The return slot first carries the signal half of the TMSV.
    d[0] = std::max(d[0], d[1]);
    return d;
}

FockOperator channel_output_fock(const ScenarioParams& params, Hypothesis h,
                                 const TruncationSpec& spec) {
    const auto [d_r, d_i, d_b] = channel_dims(params, h, spec);
    const RVector c = tmsv_amplitudes(params.n_s, d_i);
    const std::vector<int> ri{d_r, d_i};

    CVector psi = CVector::Zero(register_size(ri));
    for (int n = 0; n < d_i; ++n) psi(static_cast<Index>(n) * d_i + n) = c(n);

    if (h == Hypothesis::H1 && params.kappa >= 1.0) {
        return FockOperator(ri, psi * psi.adjoint(), true);
    }
    const double transmissivity = h == Hypothesis::H0 ? 0.0 : params.kappa;
    const FockUnitary u = beamsplitter_fock({d_r, d_b}, transmissivity);
    const FockOperator bath = thermal_fock(bath_photons(params, h), d_b, spec.tail_tol);

    const std::vector<int> reg{d_r, d_i, d_b};
    const std::array<int, 2> mixed{0, 2};
    const Embedding e = embedding(reg, mixed, u.dims);
    using RowMajor = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    CMatrix rho = CMatrix::Zero(register_size(ri), register_size(ri));
    CVector phi(register_size(reg));
    for (int k = 0; k < d_b; ++k) {
        const double p = bath.matrix()(k, k).real();
        if (p == 0.0) continue;
        phi.setZero();
        for (Index j = 0; j < psi.size(); ++j) phi(j * d_b + k) = psi(j);
        apply_in_place(phi, u, e);
        const Eigen::Map<const RowMajor> m(phi.data(), register_size(ri), d_b);
        rho.noalias() += p * (m * m.adjoint());
    }
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return FockOperator(ri, std::move(rho), true);
}

SectorOperator::SectorOperator(std::vector<int> dims, std::vector<Sector> sectors)
    : dims_(std::move(dims)), sectors_(std::move(sectors)) {
    check_dims(dims_);
    const Index n = register_size(dims_);
    for (const Sector& s : sectors_) {
        require(s.block.rows() == static_cast<Index>(s.basis.size()) &&
                    s.block.cols() == s.block.rows(),
                ErrorCode::contract, "sector block does not match its basis");
        for (Index i : s.basis)
            require(i >= 0 && i < n, ErrorCode::contract, "sector basis index out of range");
    }
}

double SectorOperator::trace() const {
    double t = 0.0;
    for (const Sector& s : sectors_) t += s.block.trace().real();
    return t;
}

SectorOperator SectorOperator::normalized() const {
    const double t = trace();
    require(t > 0.0, ErrorCode::numerical, "cannot normalise an operator with trace <= 0");
    std::vector<Sector> out = sectors_;
    for (Sector& s : out) s.block /= t;
    return SectorOperator(dims_, std::move(out));
}

FockOperator SectorOperator::dense() const {
    const Index n = register_size(dims_);
    CMatrix m = CMatrix::Zero(n, n);
    for (const Sector& s : sectors_)
        for (std::size_t c = 0; c < s.basis.size(); ++c)
            for (std::size_t r = 0; r < s.basis.size(); ++r)
                m(s.basis[r], s.basis[c]) = s.block(static_cast<Index>(r), static_cast<Index>(c));
    return FockOperator(dims_, std::move(m), true);
}

SectorOperator SectorOperator::from_dense(const FockOperator& rho) {
    const Index n = rho.dimension();
    Components comp(n);
    for (Index c = 0; c < n; ++c)
        for (Index r = 0; r < n; ++r)
            if (r != c && rho.matrix()(r, c) != cplx{0.0, 0.0}) comp.join(r, c);
    std::vector<Sector> sectors;
    for (auto& g : comp.groups()) {
        Sector s;
        s.block = submatrix(rho.matrix(), g);
        s.basis = std::move(g);
        sectors.push_back(std::move(s));
    }
    return SectorOperator(rho.dims(), std::move(sectors));
}

SectorOperator channel_output_sectors(const ScenarioParams& params, Hypothesis h,
                                      std::array<int, 3> dims) {
    params.validate();
    const auto [d_r, d_i, d_b_in] = dims;
    require(d_r >= 1 && d_i >= 1 && d_b_in >= 1, ErrorCode::domain, "dims must be >= 1");

    const bool lossless = h == Hypothesis::H1 && params.kappa >= 1.0;
    const double kappa = h == Hypothesis::H0 ? 0.0 : params.kappa;
    const double bath_mean = lossless ? 0.0 : bath_photons(params, h);
    const int d_b = lossless ? 1 : d_b_in;
    const double t = std::sqrt(kappa);
    const double r = std::sqrt(1.0 - kappa);
    const RVector c = tmsv_amplitudes(params.n_s, d_i);

    // Sector for n_return - n_idler = delta holds the states (n + delta, n).
    const int delta_min = -(d_i - 1);
    const int n_sectors = d_r + d_i - 1;
    std::vector<int> lo(n_sectors), hi(n_sectors);
    std::vector<RMatrix> blocks(n_sectors);
    for (int s = 0; s < n_sectors; ++s) {
        const int delta = delta_min + s;
        lo[s] = std::max(0, -delta);
        hi[s] = std::min(d_i, d_r - delta);  // exclusive
        blocks[s] = RMatrix::Zero(hi[s] - lo[s], hi[s] - lo[s]);
    }

    const double lt = t > 0.0 ? std::log(t) : 0.0;
    const double lr = r > 0.0 ? std::log(r) : 0.0;
    // amp[n][l]: amplitude of |n + k - l>_R |l>_B in U |n>_S |k>_B.
    std::vector<RVector> amp(d_i);
    for (int k = 0; k < d_b; ++k) {
        const double pk =
            bath_mean == 0.0 ? (k == 0 ? 1.0 : 0.0)
                             : std::exp(-std::log1p(bath_mean) + k * std::log(bath_mean / (1.0 + bath_mean)));
        if (pk == 0.0) continue;

        // U |0>_S |k>_B = sum_j sqrt(C(k, j)) r^j t^(k-j) |j>_R |k-j>_B
        RVector cur = RVector::Zero(k + 1);
        if (t == 0.0) {
            cur(0) = 1.0;  // j = k, l = 0
        } else if (r == 0.0) {
            cur(k) = 1.0;  // j = 0, l = k
        } else {
            const double lk = std::lgamma(k + 1.0);
            for (int l = 0; l <= k; ++l) {
                const int j = k - l;
                const double lc = lk - std::lgamma(j + 1.0) - std::lgamma(l + 1.0);
                cur(l) = std::exp(0.5 * lc + j * lr + l * lt);
            }
        }
        amp[0] = cur;
        // Each signal photon adds (t a_R^+ - r a_B^+) / sqrt(step).
        for (int n = 1; n < d_i; ++n) {
            const int total = k + n - 1;
            RVector next = RVector::Zero(total + 2);
            const double norm = 1.0 / std::sqrt(static_cast<double>(n));
            for (int l = 0; l <= total; ++l) {
                const double v = cur(l);
                if (v == 0.0) continue;
                const int j = total - l;
                next(l) += t * std::sqrt(j + 1.0) * v * norm;
                next(l + 1) -= r * std::sqrt(l + 1.0) * v * norm;
            }
            cur = std::move(next);
            amp[n] = cur;
        }

        for (int l = 0; l <= k + d_i - 1; ++l) {
            const int delta = k - l;
            if (delta < delta_min || delta > d_r - 1) continue;
            const int s = delta - delta_min;
            RMatrix& b = blocks[s];
            for (int n = std::max(lo[s], l - k); n < hi[s]; ++n) {
                const double an = c(n) * amp[n](l);
                if (an == 0.0) continue;
                for (int m = std::max(lo[s], l - k); m < hi[s]; ++m)
                    b(n - lo[s], m - lo[s]) += pk * an * c(m) * amp[m](l);
            }
        }
    }

    std::vector<Sector> sectors;
    sectors.reserve(n_sectors);
    for (int s = 0; s < n_sectors; ++s) {
        if (blocks[s].size() == 0) continue;
        const int delta = delta_min + s;
        Sector sec;
        for (int n = lo[s]; n < hi[s]; ++n)
            sec.basis.push_back(static_cast<Index>(n + delta) * d_i + n);
        sec.block = (0.5 * (blocks[s] + blocks[s].transpose())).cast<cplx>();
        sectors.push_back(std::move(sec));
    }
    return SectorOperator({d_r, d_i}, std::move(sectors));
}

void ChernoffSpectrum::add_pair(const CMatrix& a, const CMatrix& b) {
    auto decompose = [](const CMatrix& m) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()));
        require(es.info() == Eigen::Success, ErrorCode::numerical, "eigendecomposition failed");
        RVector lam = es.eigenvalues();
        const double worst = lam.minCoeff();
        require(worst >= -kNegativeEigTol, ErrorCode::numerical,
                "state has a negative eigenvalue " + std::to_string(worst));
        // Below this the eigensolver cannot tell an eigenvalue from zero, and
        // lambda^s would turn rounding noise into O(1) contributions.
        const double floor = std::max(
            kEigFloor, 8.0 * static_cast<double>(lam.size()) * std::numeric_limits<double>::epsilon() *
                           std::max(0.0, lam.maxCoeff()));
        for (Index i = 0; i < lam.size(); ++i)
            if (lam(i) < floor) lam(i) = 0.0;
        return std::pair{lam, CMatrix(es.eigenvectors())};
    };
    auto [l0, u0] = decompose(a);
    auto [l1, u1] = decompose(b);
    Block blk;
    blk.lambda0 = std::move(l0);
    blk.lambda1 = std::move(l1);
    blk.overlap = (u0.adjoint() * u1).cwiseAbs2();
    blocks_.push_back(std::move(blk));
}

ChernoffSpectrum::ChernoffSpectrum(const SectorOperator& rho0, const SectorOperator& rho1) {
    require(rho0.dims() == rho1.dims(), ErrorCode::contract, "states have different dims");
    require(rho0.sectors().size() == rho1.sectors().size(), ErrorCode::contract,
            "states use different sector partitions");
    for (std::size_t i = 0; i < rho0.sectors().size(); ++i) {
        const Sector& a = rho0.sectors()[i];
        const Sector& b = rho1.sectors()[i];
        require(a.basis == b.basis, ErrorCode::contract, "states use different sector partitions");
        add_pair(a.block, b.block);
    }
}

ChernoffSpectrum::ChernoffSpectrum(const FockOperator& rho0, const FockOperator& rho1) {
    require(rho0.dims() == rho1.dims(), ErrorCode::contract, "states have different dims");
    const Index n = rho0.dimension();
    Components comp(n);
    for (Index c = 0; c < n; ++c)
        for (Index r = 0; r < n; ++r)
            if (r != c && (rho0.matrix()(r, c) != cplx{0.0, 0.0} ||
                           rho1.matrix()(r, c) != cplx{0.0, 0.0}))
                comp.join(r, c);
    for (const auto& g : comp.groups()) add_pair(submatrix(rho0.matrix(), g), submatrix(rho1.matrix(), g));
}

double ChernoffSpectrum::qs(double s) const {
    require(s >= 0.0 && s <= 1.0, ErrorCode::domain, "s must lie in [0, 1]");
    double q = 0.0;
    RVector a, b;
    for (const Block& blk : blocks_) {
        a = blk.lambda0.unaryExpr([s](double x) { return x > 0.0 ? std::pow(x, s) : 0.0; });
        b = blk.lambda1.unaryExpr([s](double x) { return x > 0.0 ? std::pow(x, 1.0 - s) : 0.0; });
        q += a.dot(blk.overlap * b);
    }
    return q;
}

double qs_overlap(const FockOperator& rho0, const FockOperator& rho1, double s) {
    return ChernoffSpectrum(rho0, rho1).qs(s);
}

QcbResult qcb(const ChernoffSpectrum& spectrum) {
    constexpr int grid = 21;
    std::array<double, grid> q{};
    int best = 0;
    for (int i = 0; i < grid; ++i) {
        q[i] = spectrum.qs(i / 20.0);
        if (q[i] < q[best]) best = i;
    }
    double lo = std::max(0.0, (best - 1) / 20.0);
    double hi = std::min(1.0, (best + 1) / 20.0);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo);
    double x2 = lo + phi * (hi - lo);
    double f1 = spectrum.qs(x1);
    double f2 = spectrum.qs(x2);
    while (hi - lo > 1e-4) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = spectrum.qs(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = spectrum.qs(x2);
        }
    }
    QcbResult r;
    r.q_half = spectrum.qs(0.5);
    r.s_star = 0.5 * (lo + hi);
    r.q_qcb = spectrum.qs(r.s_star);
    // The grid point may still beat the refined interior (minimum on the boundary).
    if (q[best] < r.q_qcb) {
        r.q_qcb = q[best];
        r.s_star = best / 20.0;
    }
    if (r.q_half - r.q_qcb <= 1e-14 * r.q_half) {
        r.q_qcb = std::min(r.q_qcb, r.q_half);
        r.s_star = 0.5;
    }
    require(r.q_qcb <= r.q_half * (1.0 + 1e-14), ErrorCode::numerical,
            "Chernoff minimum exceeds the Bhattacharyya overlap");
    r.exponent = -std::log(r.q_qcb);
    return r;
}

QcbResult qcb(const FockOperator& rho0, const FockOperator& rho1) {
    return qcb(ChernoffSpectrum(rho0, rho1));
}

namespace {

template <class Evaluate>
QcbCertificate converge(std::vector<int> dims, Evaluate&& evaluate, double rel_change,
                        int max_levels) {
    require(max_levels >= 2, ErrorCode::config, "convergence needs at least two levels");
    QcbCertificate cert;
    for (int level = 0; level < max_levels; ++level) {
        const QcbResult r = evaluate(dims);
        cert.levels.push_back({dims, r.exponent});
        cert.result = r;
        if (cert.levels.size() >= 2) {
            const double prev = cert.levels[cert.levels.size() - 2].exponent;
            const double diff = std::fabs(r.exponent - prev);
            const double scale = std::max(std::fabs(r.exponent), std::fabs(prev));
            cert.last_relative_change = scale > 1e-15 ? diff / scale : 0.0;
            if (scale <= 1e-15 || cert.last_relative_change < rel_change) {
                cert.converged = true;
                return cert;
            }
        }
        for (int& d : dims) d = grown_dim(d);
    }
    return cert;
}

// kappa N_S = 0: the two hypotheses are the same state, Q_s = 1 for every s.
QcbCertificate identical_hypotheses(std::vector<int> dims) {
    QcbCertificate cert;
    cert.levels.push_back({std::move(dims), 0.0});
    cert.converged = true;
    return cert;
}

}  // namespace

QcbCertificate qcb_tmsv(const ScenarioParams& params, const TruncationSpec& spec,
                        double rel_change, int max_levels) {
    params.validate();
    const auto d0 = channel_dims(params, Hypothesis::H0, spec);
    const auto d1 = channel_dims(params, Hypothesis::H1, spec);
    std::vector<int> dims{std::max(d0[0], d1[0]), std::max(d0[1], d1[1]), std::max(d0[2], d1[2])};
    if (params.kappa * params.n_s == 0.0) return identical_hypotheses(std::move(dims));
    return converge(
        std::move(dims),
        [&](const std::vector<int>& d) {
            const std::array<int, 3> a{d[0], d[1], d[2]};
            const SectorOperator rho0 = channel_output_sectors(params, Hypothesis::H0, a).normalized();
            const SectorOperator rho1 = channel_output_sectors(params, Hypothesis::H1, a).normalized();
            return qcb(ChernoffSpectrum(rho0, rho1));
        },
        rel_change, max_levels);
}

QcbCertificate qcb_coherent(const ScenarioParams& params, const TruncationSpec& spec,
                            double rel_change, int max_levels) {
    params.validate();
    const double alpha = std::sqrt(params.kappa * params.n_s);
    int dim = 0;
    if (spec.dims.empty()) {
        dim = heuristic_dim(params.n_b + alpha * alpha);
    } else {
        require(spec.dims.size() == 1, ErrorCode::config, "coherent truncation needs one dim");
        dim = spec.dims[0];
    }
    dim = grow_until_covered(dim, params.n_b + alpha * alpha, spec.tail_tol, spec.auto_grow,
                             "return");
    if (alpha == 0.0) return identical_hypotheses({dim});
    return converge(
        std::vector<int>{dim},
        [&](const std::vector<int>& d) {
            const FockOperator rho0 = thermal_fock(params.n_b, d[0], spec.tail_tol);
            const std::array<int, 1> mode{0};
            const FockOperator rho1 = apply_unitary(rho0, displacement_fock(d[0], alpha), mode);
            const FockOperator n0(rho0.dims(), rho0.matrix() / rho0.trace(), true);
            const FockOperator n1(rho1.dims(), rho1.matrix() / rho1.trace(), true);
            return qcb(n0, n1);
        },
        rel_change, max_levels);
}

PcMomentCheck pc_moment_check(const ScenarioParams& params, Hypothesis h,
                              const PcCheckSpec& spec) {
    params.validate();
    const auto dims = channel_dims(params, h, spec.channel);
    TruncationSpec fixed = spec.channel;
    fixed.dims = {dims[0], dims[1], dims[2]};
    const FockOperator rho = channel_output_fock(params, h, fixed);
    const int d_r = dims[0];
    const int d_i = dims[1];

    const double n_ret = h == Hypothesis::H0 ? params.n_b : params.kappa * params.n_s + params.n_b;
    constexpr double gain = 2.0;
    const int d_c = spec.conj_dim > 0 ? spec.conj_dim : covering_dim(1.0 + n_ret, spec.channel.tail_tol);
    const int d_spare =
        std::max(d_r, spec.spare_dim > 0 ? spec.spare_dim
                                          : covering_dim(gain * n_ret + gain - 1.0, spec.channel.tail_tol));

    // Register (spare/return, idler, conjugate); the ancilla starts in vacuum.
    const std::vector<int> reg{d_spare, d_i, d_c};
    const FockUnitary u = two_mode_squeezer_fock({d_c, d_spare}, gain);
    const std::array<int, 2> acted{2, 0};

    const SparseOp a_c = annihilation(reg, 2);
    const SparseOp a_i = annihilation(reg, 1);
    const SparseOp diff = SparseOp(a_c.adjoint() * a_i) + SparseOp(a_i.adjoint() * a_c);
    const SparseOp n_c = a_c.adjoint() * a_c;
    const SparseOp n_i = a_i.adjoint() * a_i;
    const SparseOp cross = a_c.adjoint() * a_i;

    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix());
    const RVector& w = es.eigenvalues();
    const double w_max = w.maxCoeff();

    PcMomentCheck out;
    double m1 = 0.0, m2 = 0.0, nc = 0.0, ni = 0.0, total = 0.0;
    cplx cr{0.0, 0.0};
    CVector psi(register_size(reg));
    for (Index k = 0; k < w.size(); ++k) {
        if (w(k) <= 1e-15 * w_max) continue;
        psi.setZero();
        const CVector phi = es.eigenvectors().col(k);
        for (int rr = 0; rr < d_r; ++rr)
            for (int ii = 0; ii < d_i; ++ii)
                psi((static_cast<Index>(rr) * d_i + ii) * d_c) = phi(static_cast<Index>(rr) * d_i + ii);
        const CVector out_psi = apply_unitary(psi, reg, u, acted);
        const CVector npsi = diff * out_psi;
        total += w(k) * out_psi.squaredNorm();
        m1 += w(k) * out_psi.dot(npsi).real();
        m2 += w(k) * npsi.squaredNorm();
        nc += w(k) * out_psi.dot(n_c * out_psi).real();
        ni += w(k) * out_psi.dot(n_i * out_psi).real();
        cr += w(k) * out_psi.dot(cross * out_psi);
    }
    out.trace = total;
    out.mean = m1 / total;
    out.variance = m2 / total - out.mean * out.mean;
    out.nbar_c = nc / total;
    out.nbar_i = ni / total;
    out.cross = cr / total;
    return out;
}

}  // namespace qillum
