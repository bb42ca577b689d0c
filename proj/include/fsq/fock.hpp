#pragma once

#include <vector>

#include <Eigen/Sparse>

#include "fsq/filtration.hpp"
#include "fsq/modes.hpp"

namespace fsq {

using SpMatC = Eigen::SparseMatrix<cplx>;

inline constexpr int kFockDimMax = 12;

// Antisymmetric Fock space of a finite subspace b, in the occupation-number
// basis. States are bitmasks; bit l occupied means a factor create[l] applied
// to the vacuum, modes ordered ascending from the left.

class FockRep {
  public:
    FockRep() = default;

    /// basis: orthonormal columns spanning b inside a ModeSpace.
    FockRep(const ModeSpace& ms, MatC basis, int d_max = kFockDimMax)
        : ms_(&ms), basis_(std::move(basis)) {
        d_ = int(basis_.cols());
        FSQ_REQUIRE(d_ >= 1, "fock: empty subspace");
        FSQ_REQUIRE(d_ <= d_max, "fock: subspace dimension exceeds d_max");
        dim_ = 1 << d_;
        build();
    }

    /// Abstract rep on d modes (no ambient mode space); kappa acts as plain
    /// coordinate conjugation. Used for generic CAR/tensor estimates.
    explicit FockRep(int d, int d_max = kFockDimMax) : ms_(nullptr) {
        FSQ_REQUIRE(d >= 1 && d <= d_max, "fock: dimension out of range");
        d_ = d;
        dim_ = 1 << d_;
        basis_ = MatC::Identity(d_, d_);
        build();
    }

    int n_modes() const { return d_; }
    int dim() const { return dim_; }
    const MatC& subspace_basis() const { return basis_; }
    const ModeSpace* mode_space() const { return ms_; }

    const SpMatC& create(int l) const { return cr_[size_t(l)]; }
    const SpMatC& annihilate(int l) const { return an_[size_t(l)]; }

    MatC create_dense(int l) const { return MatC(cr_[size_t(l)]); }
    MatC annihilate_dense(int l) const { return MatC(an_[size_t(l)]); }

    /// Number operator (diagonal).
    MatC number_op() const {
        MatC n = MatC::Zero(dim_, dim_);
        for (int m = 0; m < dim_; ++m) n(m, m) = double(__builtin_popcount(unsigned(m)));
        return n;
    }

    VecC vacuum() const {
        VecC v = VecC::Zero(dim_);
        v[0] = 1.0;
        return v;
    }

    /// Coefficients of P_b f in the subspace basis (f in ambient coordinates).
    VecC coords(const VecC& f) const { return basis_.adjoint() * f; }

    /// alpha^dag(f) for ambient f; the projection P_b is applied implicitly.
    MatC creation(const VecC& f) const { return creation_coords(coords(f)); }

    /// alpha(f); antilinear in f.
    MatC annihilation(const VecC& f) const { return annihilation_coords(coords(f)); }

    MatC creation_coords(const VecC& c) const {
        MatC a = MatC::Zero(dim_, dim_);
        for (int l = 0; l < d_; ++l)
            if (c[l] != cplx(0, 0)) a += c[l] * MatC(cr_[size_t(l)]);
        return a;
    }

    MatC annihilation_coords(const VecC& c) const {
        MatC a = MatC::Zero(dim_, dim_);
        for (int l = 0; l < d_; ++l)
            if (c[l] != cplx(0, 0)) a += std::conj(c[l]) * MatC(an_[size_t(l)]);
        return a;
    }

    /// pi_b(Psi(f)) = alpha^dag(P_b f) + alpha(P_b kappa U f).
    MatC field(const VecC& f) const {
        FSQ_REQUIRE(ms_ != nullptr, "field: rep has no ambient mode space");
        return creation(f) + annihilation(ms_->kappa_U(f));
    }

    cplx vacuum_expect(const MatC& a) const { return a(0, 0); }

    /// Projection onto the 2^(dim small) occupation states of a nested
    /// subspace, as a dense matrix. `small` has orthonormal columns that must
    /// lie in the span of this rep's subspace.
    MatC hat_projection(const MatC& small) const {
        MatC c = basis_.adjoint() * small;  // coords of the small basis, d x ds
        // check nesting
        for (int l = 0; l < small.cols(); ++l) {
            double defect = std::abs(1.0 - c.col(l).norm());
            FSQ_REQUIRE(defect < 1e-8, "hat_projection: subspaces are not nested");
        }
        const int ds = int(small.cols());
        MatC p = MatC::Zero(dim_, dim_);
        // occupation states of the small system: wedges of its basis vectors
        for (int mask = 0; mask < (1 << ds); ++mask) {
            VecC v = vacuum();
            for (int l = ds - 1; l >= 0; --l)
                if (mask & (1 << l)) v = creation_coords(c.col(l)) * v;
            p += v * v.adjoint();
        }
        return p;
    }

  private:
    void build() {
        cr_.resize(size_t(d_));
        an_.resize(size_t(d_));
        for (int l = 0; l < d_; ++l) {
            std::vector<Eigen::Triplet<cplx>> tc, ta;
            for (int m = 0; m < dim_; ++m) {
                if (m & (1 << l)) continue;
                int below = __builtin_popcount(unsigned(m) & ((1u << l) - 1u));
                double sgn = (below % 2 == 0) ? 1.0 : -1.0;
                tc.emplace_back(m | (1 << l), m, sgn);
                ta.emplace_back(m, m | (1 << l), sgn);
            }
            cr_[size_t(l)].resize(dim_, dim_);
            cr_[size_t(l)].setFromTriplets(tc.begin(), tc.end());
            an_[size_t(l)].resize(dim_, dim_);
            an_[size_t(l)].setFromTriplets(ta.begin(), ta.end());
        }
    }

    const ModeSpace* ms_ = nullptr;
    MatC basis_;
    int d_ = 0, dim_ = 0;
    std::vector<SpMatC> cr_, an_;
};

/// <f1 ^ ... ^ fn, g1 ^ ... ^ gn> = det(<fi,gj>)/n! ; the paper's wedge
/// normalisation, used as an oracle against Fock-side norms.
inline cplx wedge_inner(const ModeSpace& ms, const std::vector<VecC>& f,
                        const std::vector<VecC>& g) {
    FSQ_REQUIRE(f.size() == g.size(), "wedge_inner: rank mismatch");
    const int n = int(f.size());
    MatC m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = ms.inner(f[size_t(i)], g[size_t(j)]);
    double fact = 1.0;
    for (int i = 2; i <= n; ++i) fact *= i;
    return m.determinant() / fact;
}

// Left Araki-Wyss representation with scalar one-particle density rho =
// lambda * 1, materialised on the doubled subspace b (+) kappa b.

class ArakiWyssState {
  public:
    ArakiWyssState(const FockRep& rep, double lambda) : lambda_(lambda) {
        FSQ_REQUIRE(lambda > 0.0 && lambda < 0.5, "araki-wyss: lambda must lie in (0,1/2)");
        FSQ_REQUIRE(rep.mode_space() != nullptr, "araki-wyss: rep needs an ambient mode space");
        ms_ = rep.mode_space();
        basis_ = rep.subspace_basis();
        d_ = int(basis_.cols());
        FSQ_REQUIRE(2 * d_ <= kFockDimMax, "araki-wyss: doubled space exceeds d_max");
        // external direct sum h (+) h: modes [0,d) carry (b_l, 0) and modes
        // [d, 2d) carry (0, kappa b_l); both families are orthonormal.
        rep2_ = FockRep(2 * d_);
    }

    const FockRep& doubled_rep() const { return rep2_; }
    double lambda() const { return lambda_; }

    /// pi_rho(alpha^dag(f)) for ambient f.
    MatC pi_create(const VecC& f) const { return pi_create_coords(orig_coords(f)); }

    MatC pi_annihilate(const VecC& f) const { return pi_create_coords(orig_coords(f)).adjoint(); }

    /// pi_rho for subspace coordinates c of f: alpha2^dag(sqrt(1-l) f, 0) +
    /// alpha2(0, kappa sqrt(l) f); in coordinates kappa(c_l b_l) has
    /// conjugated coefficients over the second copy, and the antilinearity of
    /// alpha2 conjugates them back.
    MatC pi_create_coords(const VecC& c) const {
        const double s1 = std::sqrt(1.0 - lambda_), s2 = std::sqrt(lambda_);
        VecC up = VecC::Zero(2 * d_), down = VecC::Zero(2 * d_);
        for (int l = 0; l < d_; ++l) {
            up[l] = s1 * c[l];
            down[d_ + l] = s2 * std::conj(c[l]);
        }
        return rep2_.creation_coords(up) + rep2_.annihilation_coords(down);
    }

    /// omega_rho(A) for A on the doubled rep.
    cplx expect(const MatC& a) const { return a(0, 0); }

    /// pi_rho(Psi(f)) with the unmodified conjugation U.
    MatC pi_field(const VecC& f) const {
        return pi_create_coords(orig_coords(f)) +
               pi_create_coords(orig_coords(ms_->kappa_U(f))).adjoint();
    }

    /// pi_rho(Psi_rho(f)) with U~ = U (1-2 lambda)^{-1}; restores covariance
    /// <kappa U f, g> under omega_rho.
    MatC pi_field_modified(const VecC& f) const {
        VecC g = ms_->kappa_U(f) / (1.0 - 2.0 * lambda_);
        return pi_create_coords(orig_coords(f)) + pi_create_coords(orig_coords(g)).adjoint();
    }

    /// coordinates of P_b f in the subspace basis
    VecC orig_coords(const VecC& f) const { return basis_.adjoint() * f; }

  private:
    const ModeSpace* ms_ = nullptr;
    FockRep rep2_;
    MatC basis_;
    int d_ = 0;
    double lambda_ = 0.0;
};

}  // namespace fsq
