#pragma once

#include <vector>

#include "fsq/modes.hpp"

namespace fsq {

// Weak filtration: a nested chain b_1 c b_2 c ... of kappa*U-invariant
// subspaces generated by orbits {eps, kappa*U eps} of successive basis
// vectors. Gamma_n is the set of chain elements of dimension <= n.

class Filtration {
  public:
    Filtration() = default;

    Filtration(const ModeSpace& ms, int n_max, double tol = 1e-12) : ms_(&ms) {
        FSQ_REQUIRE(n_max >= 1 && n_max <= ms.dim(), "filtration: n_max out of range");
        MatC basis(ms.dim(), 0);
        int seed = 0;
        while (basis.cols() < n_max && seed < ms.dim()) {
            VecC e = VecC::Zero(ms.dim());
            e[seed] = 1.0;
            ++seed;
            auto r1 = mgs_residual(basis, e, tol);
            if (!r1) continue;  // seed already in the span
            MatC grown(ms.dim(), basis.cols() + 1);
            grown << basis, *r1;
            VecC img = ms.kappa_U(*r1);
            auto r2 = mgs_residual(grown, img, tol);
            if (r2) {
                MatC g2(ms.dim(), grown.cols() + 1);
                g2 << grown, *r2;
                basis = std::move(g2);
            } else {
                basis = std::move(grown);
            }
            chain_.push_back(basis);
            if (basis.cols() >= n_max) break;
        }
        FSQ_REQUIRE(!chain_.empty(), "filtration: orthonormalisation degenerated at level 1");
    }

    const ModeSpace& mode_space() const { return *ms_; }

    /// Number of chain elements.
    int depth() const { return int(chain_.size()); }

    /// c-th chain element as orthonormal columns.
    const MatC& subspace(int c) const { return chain_[size_t(c)]; }

    int dim_of(int c) const { return int(chain_[size_t(c)].cols()); }

    /// Largest chain dimension not exceeding n (0 if none).
    int top_dim(int n) const {
        int d = 0;
        for (const auto& b : chain_)
            if (b.cols() <= n) d = std::max<int>(d, int(b.cols()));
        return d;
    }

    /// Indices of chain elements of dimension <= n (the set Gamma_n).
    std::vector<int> gamma(int n) const {
        std::vector<int> out;
        for (int c = 0; c < depth(); ++c)
            if (dim_of(c) <= n) out.push_back(c);
        return out;
    }

    /// Orthogonal projection of f onto chain element c.
    VecC project(int c, const VecC& f) const {
        const MatC& b = chain_[size_t(c)];
        return b * (b.adjoint() * f);
    }

    /// Coefficients of P_b f in the subspace basis.
    VecC coords(int c, const VecC& f) const { return chain_[size_t(c)].adjoint() * f; }

    /// max_l dist(kappa*U b_l, b); the invariance defect of chain element c.
    double invariance_defect(int c) const {
        const MatC& b = chain_[size_t(c)];
        double worst = 0.0;
        for (int l = 0; l < b.cols(); ++l) {
            VecC img = ms_->kappa_U(b.col(l));
            VecC res = img - b * (b.adjoint() * img);
            worst = std::max(worst, res.norm());
        }
        return worst;
    }

  private:
    const ModeSpace* ms_ = nullptr;
    std::vector<MatC> chain_;
};

}  // namespace fsq
