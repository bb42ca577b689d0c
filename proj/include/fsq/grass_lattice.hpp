#pragma once

#include <map>

#include "fsq/algebra.hpp"
#include "fsq/grid.hpp"

namespace fsq {

// Lattice of Grassmann-polynomial values for the solver: coefficients are
// stored plane-major (one space-time lattice per monomial bitmask), so
// products are vectorised plane combinations and spectral operators act on
// whole planes. Coefficients are plain scalars: a solver run is localised at
// fixed filtration contexts, and context-dependent inputs (the fermionic
// square's central part) enter as empty-mask planes evaluated per run.

inline int grassmann_sign(std::uint32_t a, std::uint32_t b) {
    // (-1)^{crossings} when sorting the concatenation a|b, 0 on collision
    if (a & b) return 0;
    int crossings = 0;
    for (std::uint32_t m = b; m;) {
        const int bit = __builtin_ctz(m);
        m &= m - 1;
        crossings += __builtin_popcount(a >> (bit + 1));
    }
    return (crossings % 2 == 0) ? 1 : -1;
}

class GrassLattice {
  public:
    GrassLattice() = default;
    explicit GrassLattice(const SpaceTimeGrid& g, int n_modes, int degree_cap = 32)
        : grid_(g), n_modes_(n_modes), cap_(degree_cap) {}

    const SpaceTimeGrid& grid() const { return grid_; }
    int n_modes() const { return n_modes_; }
    int degree_cap() const { return cap_; }
    const std::map<std::uint32_t, VecC>& planes() const { return planes_; }
    bool empty() const { return planes_.empty(); }

    VecC& plane(std::uint32_t mask) {
        auto it = planes_.find(mask);
        if (it == planes_.end())
            it = planes_.emplace(mask, VecC::Zero(grid_.size())).first;
        return it->second;
    }
    const VecC* plane_if(std::uint32_t mask) const {
        auto it = planes_.find(mask);
        return it == planes_.end() ? nullptr : &it->second;
    }

    GrassLattice& operator+=(const GrassLattice& o) {
        for (const auto& [m, p] : o.planes_) plane(m) += p;
        return *this;
    }
    GrassLattice& axpy(cplx a, const GrassLattice& o) {
        for (const auto& [m, p] : o.planes_) plane(m) += a * p;
        return *this;
    }
    GrassLattice& operator*=(cplx c) {
        for (auto& [m, p] : planes_) p *= c;
        return *this;
    }

    /// pointwise multiplication by a scalar lattice
    GrassLattice& scale_field(const VecC& f) {
        for (auto& [m, p] : planes_) p.array() *= f.array();
        return *this;
    }

    Parity parity(double tol = 1e-14) const {
        bool ev = false, od = false;
        for (const auto& [m, p] : planes_) {
            if (p.lpNorm<Eigen::Infinity>() <= tol) continue;
            (__builtin_popcount(m) % 2 == 0 ? ev : od) = true;
        }
        if (ev && od) return Parity::Mixed;
        return od ? Parity::Odd : Parity::Even;
    }

    /// graded pointwise product; degrees above the cap are dropped and their
    /// coefficient mass recorded
    GrassLattice mul(const GrassLattice& o, TruncationLedger* ledger = nullptr) const {
        FSQ_REQUIRE(grid_.compatible(o.grid_), "grass lattice: grid mismatch");
        GrassLattice out(grid_, n_modes_, cap_);
        for (const auto& [ma, pa] : planes_) {
            for (const auto& [mb, pb] : o.planes_) {
                const int sgn = grassmann_sign(ma, mb);
                if (sgn == 0) continue;
                const std::uint32_t mm = ma | mb;
                if (__builtin_popcount(mm) > cap_) {
                    if (ledger)
                        ledger->dropped_mass +=
                            (pa.array().abs() * pb.array().abs()).maxCoeff();
                    continue;
                }
                if (sgn > 0)
                    out.plane(mm).array() += pa.array() * pb.array();
                else
                    out.plane(mm).array() -= pa.array() * pb.array();
            }
        }
        if (ledger)
            for (const auto& [m, p] : out.planes_)
                ledger->retained_mass += p.lpNorm<Eigen::Infinity>();
        return out;
    }
    GrassLattice operator*(const GrassLattice& o) const { return mul(o); }

    /// drop negligible planes
    GrassLattice& prune(double tol = 1e-14) {
        for (auto it = planes_.begin(); it != planes_.end();) {
            if (it->second.lpNorm<Eigen::Infinity>() <= tol)
                it = planes_.erase(it);
            else
                ++it;
        }
        return *this;
    }

    /// strong coefficient norm: sum over planes of the sup over the lattice
    double coeff_norm() const {
        double acc = 0;
        for (const auto& [m, p] : planes_) acc += p.lpNorm<Eigen::Infinity>();
        return acc;
    }

    /// AlgebraElement at one lattice point, with the plane value entering
    /// every context slot (solver values are context-resolved already).
    AlgebraElement element_at(const Algebra& alg, long idx) const {
        AlgebraElement e(alg);
        for (const auto& [m, p] : planes_) {
            if (p[idx] == cplx(0, 0)) continue;
            Monomial mono;
            for (std::uint32_t mm = m; mm;) {
                const int bit = __builtin_ctz(mm);
                mm &= mm - 1;
                mono.push_back(bit);
            }
            e += wickless_monomial(alg, mono, p[idx]);
        }
        return e;
    }

  private:
    static AlgebraElement wickless_monomial(const Algebra& alg, const Monomial& mono, cplx c) {
        AlgebraElement e = AlgebraElement::unit(alg, c);
        for (int i : mono) {
            VecC f = VecC::Zero(alg.mode_space().dim());
            f[i] = 1.0;
            e = e * AlgebraElement::field(alg, f);
        }
        return e;
    }

    SpaceTimeGrid grid_;
    int n_modes_ = 0, cap_ = 32;
    std::map<std::uint32_t, VecC> planes_;
};

/// || pi_b (value at lattice point) || on a chain element, using cached
/// psi-word matrices over the solver's mode space.
class LatticeNormEvaluator {
  public:
    LatticeNormEvaluator(const Algebra& alg, int chain) : alg_(&alg), chain_(chain) {}

    double norm_at(const GrassLattice& lat, long idx) const {
        const FockRep& rep = alg_->rep(chain_);
        MatC acc = MatC::Zero(rep.dim(), rep.dim());
        accumulate(lat, idx, cplx(1, 0), acc);
        return op_norm(acc);
    }

    /// norm of a linear combination sum_i w_i * value(idx_i)
    double norm_combo(const GrassLattice& lat,
                      const std::vector<std::pair<long, double>>& weights) const {
        const FockRep& rep = alg_->rep(chain_);
        MatC acc = MatC::Zero(rep.dim(), rep.dim());
        for (const auto& [idx, w] : weights) accumulate(lat, idx, cplx(w, 0), acc);
        return op_norm(acc);
    }

    /// norm of the pointwise difference of two lattices at idx
    double norm_diff_at(const GrassLattice& a, const GrassLattice& b, long idx) const {
        const FockRep& rep = alg_->rep(chain_);
        MatC acc = MatC::Zero(rep.dim(), rep.dim());
        accumulate(a, idx, cplx(1, 0), acc);
        accumulate(b, idx, cplx(-1, 0), acc);
        return op_norm(acc);
    }

  private:
    void accumulate(const GrassLattice& lat, long idx, cplx w, MatC& acc) const {
        for (const auto& [m, p] : lat.planes()) {
            const cplx c = w * p[idx];
            if (c == cplx(0, 0)) continue;
            Monomial mono;
            for (std::uint32_t mm = m; mm;) {
                const int bit = __builtin_ctz(mm);
                mm &= mm - 1;
                mono.push_back(bit);
            }
            acc += c * alg_->word_matrix(chain_, mono);
        }
    }

    const Algebra* alg_;
    int chain_;
};

}  // namespace fsq
