#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fsq/fock.hpp"

namespace fsq {

// Symbolic layer of the extended algebra. Elements are Grassmann polynomials
// in the field generators psi_i = Psi(eps_i) together with central scalars.
// A monomial is a strictly increasing index list; the empty list is the unit.
//
// Central anticommutators [alpha(u), alpha^dag(v)]_+ evaluate to a different
// scalar under every projection pi_b, so coefficients are stored per
// evaluation context: one slot per filtration chain element plus one for the
// unprojected algebra (used by digamma and the vacuum L^2 structure).

using Monomial = std::vector<int>;

struct CtxScalar {
    std::vector<cplx> v;

    CtxScalar() = default;
    explicit CtxScalar(size_t n, cplx c = cplx(0, 0)) : v(n, c) {}

    CtxScalar& operator+=(const CtxScalar& o) {
        for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
        return *this;
    }
    CtxScalar operator*(const CtxScalar& o) const {
        CtxScalar r(v.size());
        for (size_t i = 0; i < v.size(); ++i) r.v[i] = v[i] * o.v[i];
        return r;
    }
    CtxScalar operator*(cplx c) const {
        CtxScalar r(v.size());
        for (size_t i = 0; i < v.size(); ++i) r.v[i] = v[i] * c;
        return r;
    }
    double max_abs() const {
        double m = 0;
        for (const auto& c : v) m = std::max(m, std::abs(c));
        return m;
    }
    bool negligible(double tol = 0.0) const { return max_abs() <= tol; }
};

struct TruncationLedger {
    double dropped_mass = 0.0;
    double retained_mass = 0.0;
};

struct SeminormReport {
    int level = 0;
    double value = 0.0;
    int witness_dim = 0;  // dimension of the subspace attaining the max
};

class Algebra {
  public:
    Algebra(const ModeSpace& ms, const Filtration& filt, int degree_cap = 6)
        : ms_(&ms), filt_(&filt), degree_cap_(degree_cap) {
        n_ctx_ = filt.depth() + 1;  // chain elements + full
        reps_.resize(size_t(filt.depth()));
        psi_cache_.resize(size_t(filt.depth()) + 1);
        word_cache_.resize(size_t(filt.depth()) + 1);
    }

    const ModeSpace& mode_space() const { return *ms_; }
    const Filtration& filtration() const { return *filt_; }
    int n_ctx() const { return n_ctx_; }
    int full_ctx() const { return n_ctx_ - 1; }
    int degree_cap() const { return degree_cap_; }

    const FockRep& rep(int chain) const {
        auto& slot = reps_[size_t(chain)];
        if (!slot) slot = std::make_unique<FockRep>(*ms_, filt_->subspace(chain));
        return *slot;
    }

    /// Full-mode reference rep; only materialisable for small mode spaces.
    const FockRep& reference_rep() const {
        if (!ref_rep_) {
            FSQ_REQUIRE(ms_->dim() <= kFockDimMax,
                        "reference rep: mode space exceeds the Fock dimension budget");
            ref_rep_ = std::make_unique<FockRep>(*ms_, MatC::Identity(ms_->dim(), ms_->dim()));
        }
        return *ref_rep_;
    }

    /// pi(psi_i) on context ctx (chain element or full), cached.
    const MatC& psi_matrix(int ctx, int mode) const {
        auto& cache = psi_cache_[size_t(ctx)];
        auto it = cache.find(mode);
        if (it != cache.end()) return it->second;
        VecC e = VecC::Zero(ms_->dim());
        e[mode] = 1.0;
        const FockRep& r = (ctx == full_ctx()) ? reference_rep() : rep(ctx);
        return cache.emplace(mode, r.field(e)).first->second;
    }

    /// pi of a monomial word; short words are cached.
    MatC word_matrix(int ctx, const Monomial& m) const {
        const FockRep& r = (ctx == full_ctx()) ? reference_rep() : rep(ctx);
        if (m.empty()) return MatC::Identity(r.dim(), r.dim());
        if (m.size() <= 2) {
            auto& cache = word_cache_[size_t(ctx)];
            auto it = cache.find(m);
            if (it != cache.end()) return it->second;
            MatC w = psi_matrix(ctx, m[0]);
            for (size_t i = 1; i < m.size(); ++i) w = w * psi_matrix(ctx, m[i]);
            if (cache.size() < 4096) cache.emplace(m, w);
            return w;
        }
        Monomial head(m.begin(), m.begin() + 2);
        MatC w = word_matrix(ctx, head);
        for (size_t i = 2; i < m.size(); ++i) w = w * psi_matrix(ctx, m[i]);
        return w;
    }

    /// Context values of the central element [alpha(u), alpha^dag(v)]_+.
    CtxScalar central_values(const VecC& u, const VecC& v) const {
        CtxScalar c{size_t(n_ctx_)};
        for (int ch = 0; ch < filt_->depth(); ++ch) {
            VecC cu = filt_->coords(ch, u), cv = filt_->coords(ch, v);
            c.v[size_t(ch)] = cu.dot(cv);
        }
        c.v[size_t(full_ctx())] = u.dot(v);
        return c;
    }

    CtxScalar uniform(cplx c) const { return CtxScalar(size_t(n_ctx_), c); }

  private:
    const ModeSpace* ms_;
    const Filtration* filt_;
    int degree_cap_, n_ctx_;
    mutable std::vector<std::unique_ptr<FockRep>> reps_;
    mutable std::unique_ptr<FockRep> ref_rep_;
    mutable std::vector<std::map<int, MatC>> psi_cache_;
    mutable std::vector<std::map<Monomial, MatC>> word_cache_;
};

enum class Parity { Even, Odd, Mixed };

class AlgebraElement {
  public:
    AlgebraElement() = default;
    explicit AlgebraElement(const Algebra& alg) : alg_(&alg) {}

    static AlgebraElement unit(const Algebra& alg, cplx c = cplx(1, 0)) {
        AlgebraElement e(alg);
        if (c != cplx(0, 0)) e.terms_[Monomial{}] = alg.uniform(c);
        return e;
    }

    /// Degree-1 element Psi(f), linear in f (orthonormal coefficients).
    static AlgebraElement field(const Algebra& alg, const VecC& f) {
        AlgebraElement e(alg);
        for (int i = 0; i < f.size(); ++i)
            if (f[i] != cplx(0, 0)) e.terms_[Monomial{i}] = alg.uniform(f[i]);
        return e;
    }

    /// Central element [alpha(u), alpha^dag(v)]_+ (u enters antilinearly).
    static AlgebraElement central_pair(const Algebra& alg, const VecC& u, const VecC& v) {
        AlgebraElement e(alg);
        CtxScalar c = alg.central_values(u, v);
        if (!c.negligible()) e.terms_[Monomial{}] = c;
        return e;
    }

    const Algebra& algebra() const { return *alg_; }
    const std::map<Monomial, CtxScalar>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }

    int max_degree() const {
        int d = 0;
        for (const auto& [m, c] : terms_) d = std::max<int>(d, int(m.size()));
        return d;
    }

    Parity parity() const {
        bool has_even = false, has_odd = false;
        for (const auto& [m, c] : terms_) {
            if (c.negligible(1e-14)) continue;
            (m.size() % 2 == 0 ? has_even : has_odd) = true;
        }
        if (has_even && has_odd) return Parity::Mixed;
        return has_odd ? Parity::Odd : Parity::Even;
    }

    AlgebraElement& operator+=(const AlgebraElement& o) {
        for (const auto& [m, c] : o.terms_) {
            auto it = terms_.find(m);
            if (it == terms_.end())
                terms_[m] = c;
            else
                it->second += c;
        }
        return *this;
    }
    AlgebraElement operator+(const AlgebraElement& o) const {
        AlgebraElement r = *this;
        r += o;
        return r;
    }
    AlgebraElement operator-(const AlgebraElement& o) const { return *this + o * cplx(-1, 0); }
    AlgebraElement operator*(cplx c) const {
        AlgebraElement r(*alg_);
        for (const auto& [m, s] : terms_) r.terms_[m] = s * c;
        return r;
    }

    /// Graded product. Degrees above the algebra cap are dropped; the dropped
    /// coefficient mass is recorded when a ledger is supplied.
    AlgebraElement mul(const AlgebraElement& o, TruncationLedger* ledger = nullptr) const {
        AlgebraElement r(*alg_);
        Monomial merged;
        for (const auto& [ma, ca] : terms_) {
            for (const auto& [mb, cb] : o.terms_) {
                int sgn = merge_sign(ma, mb, merged);
                if (sgn == 0) continue;
                CtxScalar c = ca * cb;
                if (sgn < 0) c = c * cplx(-1, 0);
                if (int(merged.size()) > alg_->degree_cap()) {
                    if (ledger) ledger->dropped_mass += c.max_abs();
                    continue;
                }
                auto it = r.terms_.find(merged);
                if (it == r.terms_.end())
                    r.terms_[merged] = c;
                else
                    it->second += c;
            }
        }
        if (ledger)
            for (const auto& [m, c] : r.terms_) ledger->retained_mass += c.max_abs();
        return r;
    }
    AlgebraElement operator*(const AlgebraElement& o) const { return mul(o); }

    /// Drop terms of negligible coefficient.
    AlgebraElement& prune(double tol = 1e-15) {
        for (auto it = terms_.begin(); it != terms_.end();) {
            if (it->second.negligible(tol))
                it = terms_.erase(it);
            else
                ++it;
        }
        return *this;
    }

    /// pi on a context: chain index in [0, depth) or full_ctx().
    MatC evaluate(int ctx) const {
        const FockRep& r =
            (ctx == alg_->full_ctx()) ? alg_->reference_rep() : alg_->rep(ctx);
        MatC out = MatC::Zero(r.dim(), r.dim());
        for (const auto& [m, c] : terms_) {
            cplx coeff = c.v[size_t(ctx)];
            if (coeff == cplx(0, 0)) continue;
            out += coeff * alg_->word_matrix(ctx, m);
        }
        return out;
    }

    MatC digamma() const { return evaluate(alg_->full_ctx()); }

    /// ||a||_n = max over chain elements of dimension <= n of ||pi_b(a)||.
    /// All chain elements are evaluated; the sup over the chain is attained
    /// at the top element whenever ||.||_b is monotone under inclusion, which
    /// is asserted separately in the test-suite.
    SeminormReport seminorm(int n) const {
        SeminormReport rep;
        rep.level = n;
        for (int c : alg_->filtration().gamma(n)) {
            double v = op_norm(evaluate(c));
            if (v >= rep.value) {
                rep.value = v;
                rep.witness_dim = alg_->filtration().dim_of(c);
            }
        }
        return rep;
    }

    /// One line per monomial: "i1,i2,... : re,im" (unprojected coefficients).
    std::string dump() const {
        std::string out;
        for (const auto& [m, c] : terms_) {
            std::string idx;
            for (size_t i = 0; i < m.size(); ++i) {
                if (i) idx += ",";
                idx += std::to_string(m[i]);
            }
            cplx z = c.v[size_t(alg_->full_ctx())];
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%s : %.17g,%.17g\n", idx.c_str(), z.real(), z.imag());
            out += buf;
        }
        return out;
    }

  private:
    const Algebra* alg_ = nullptr;
    std::map<Monomial, CtxScalar> terms_;
};

inline AlgebraElement operator*(cplx c, const AlgebraElement& a) { return a * c; }

/// Recursive Wick power on a basis wedge e_{i1} ^ ... ^ e_{in} (strictly
/// increasing indices).
inline AlgebraElement wick_basis(const Algebra& alg, const Monomial& idx) {
    const int n = int(idx.size());
    FSQ_REQUIRE(n <= alg.degree_cap(), "wick power: rank exceeds the degree cap");
    if (n == 0) return AlgebraElement::unit(alg);
    VecC e1 = VecC::Zero(alg.mode_space().dim());
    e1[idx[0]] = 1.0;
    if (n == 1) return AlgebraElement::field(alg, e1);
    Monomial rest(idx.begin() + 1, idx.end());
    AlgebraElement out = AlgebraElement::field(alg, e1) * wick_basis(alg, rest);
    VecC ku1 = alg.mode_space().kappa_U(e1);
    for (int j = 1; j < n; ++j) {
        Monomial sub;
        for (int t = 1; t < n; ++t)
            if (t != j) sub.push_back(idx[size_t(t)]);
        VecC ej = VecC::Zero(alg.mode_space().dim());
        ej[idx[size_t(j)]] = 1.0;
        AlgebraElement ct = AlgebraElement::central_pair(alg, ku1, ej);
        double sgn = (j % 2 == 0) ? 1.0 : -1.0;  // -(-1)^i with i = j+1
        out += ct * wick_basis(alg, sub) * cplx(sgn, 0);
    }
    return out;
}

/// Wick power of an antisymmetric rank-n tensor given by coefficients over
/// strictly increasing index tuples.
inline AlgebraElement wick_power(const Algebra& alg, const std::map<Monomial, cplx>& tensor) {
    AlgebraElement out(alg);
    for (const auto& [idx, c] : tensor) {
        for (size_t t = 1; t < idx.size(); ++t)
            FSQ_REQUIRE(idx[t - 1] < idx[t], "wick power: tuples must be strictly increasing");
        out += wick_basis(alg, idx) * c;
    }
    return out;
}

/// Wick square of a decomposable tensor u ^ v:
/// Psi(u) Psi(v) - [alpha(kappa U u), alpha^dag(v)]_+.
inline AlgebraElement wick_square_pair(const Algebra& alg, const VecC& u, const VecC& v) {
    AlgebraElement out = AlgebraElement::field(alg, u) * AlgebraElement::field(alg, v);
    out += AlgebraElement::central_pair(alg, alg.mode_space().kappa_U(u), v) * cplx(-1, 0);
    return out;
}

/// omega(a^dag b) in the vacuum GNS structure on the reference rep.
inline cplx l2_inner_vacuum(const AlgebraElement& a, const AlgebraElement& b) {
    const FockRep& r = a.algebra().reference_rep();
    VecC va = a.digamma() * r.vacuum();
    VecC vb = b.digamma() * r.vacuum();
    return va.dot(vb);
}

/// Evaluation through the Araki-Wyss representation (doubled reference rep).
inline MatC evaluate_araki_wyss(const AlgebraElement& a, const ArakiWyssState& aw) {
    const Algebra& alg = a.algebra();
    const FockRep& r2 = aw.doubled_rep();
    MatC out = MatC::Zero(r2.dim(), r2.dim());
    for (const auto& [m, c] : a.terms()) {
        cplx coeff = c.v[size_t(alg.full_ctx())];
        if (coeff == cplx(0, 0)) continue;
        MatC word = MatC::Identity(r2.dim(), r2.dim());
        for (int idx : m) {
            VecC e = VecC::Zero(alg.mode_space().dim());
            e[idx] = 1.0;
            word = word * aw.pi_field(e);
        }
        out += coeff * word;
    }
    return out;
}

inline cplx l2_inner_araki_wyss(const AlgebraElement& a, const AlgebraElement& b,
                                const ArakiWyssState& aw) {
    MatC ma = evaluate_araki_wyss(a, aw), mb = evaluate_araki_wyss(b, aw);
    return aw.expect(ma.adjoint() * mb);
}

/// Pfaffian of the antisymmetric pairing matrix c by recursive expansion
/// along the first row; pairing_sum(2k points) = sum over matchings with
/// crossing signs.
inline cplx pfaffian(const MatC& c) {
    const int n = int(c.rows());
    if (n == 0) return cplx(1, 0);
    if (n % 2 == 1) return cplx(0, 0);
    if (n == 2) return c(0, 1);
    cplx acc(0, 0);
    std::vector<int> rest;
    for (int j = 1; j < n; ++j) {
        rest.clear();
        for (int t = 1; t < n; ++t)
            if (t != j) rest.push_back(t);
        MatC sub(n - 2, n - 2);
        for (int r = 0; r < n - 2; ++r)
            for (int s = 0; s < n - 2; ++s) sub(r, s) = c(rest[size_t(r)], rest[size_t(s)]);
        double sgn = (j % 2 == 1) ? 1.0 : -1.0;
        acc += sgn * c(0, j) * pfaffian(sub);
    }
    return acc;
}

/// ||F||_{h^wedge n} of an antisymmetric tensor over strictly increasing
/// tuples: the 1/n! convention gives ||.||^2 = sum |c|^2 / n!.
inline double tensor_norm(const std::map<Monomial, cplx>& tensor, int rank) {
    double s = 0;
    for (const auto& [m, c] : tensor) s += std::norm(c);
    double fact = 1.0;
    for (int i = 2; i <= rank; ++i) fact *= i;
    return std::sqrt(s / fact);
}

struct WickBoundReport {
    int rank = 0;
    int dim_b = 0;
    double ratio = 0.0;        // ||Psi^{<>n}(F)||_b / ((1+dim b)^{(n-1)/2} ||F||)
    double lower_gap = 0.0;    // ||Psi^{<>n}(F)||_deepest - ||F|| (>= 0 expected)
};

/// Empirical constant of the Wick-power bound on chain element `chain`. The
/// lower bound ||F|| <= ||Psi^{<>n}(F)|| is evaluated at `lower_chain`
/// (deepest chain element by default; pass `chain` when the tensor is
/// supported there anyway).
inline WickBoundReport wick_norm_bound_check(const Algebra& alg,
                                             const std::map<Monomial, cplx>& tensor, int rank,
                                             int chain, int lower_chain = -1) {
    WickBoundReport rep;
    rep.rank = rank;
    rep.dim_b = alg.filtration().dim_of(chain);
    AlgebraElement w = wick_power(alg, tensor);
    const double nf = tensor_norm(tensor, rank);
    const double growth = std::pow(1.0 + rep.dim_b, 0.5 * (rank - 1));
    rep.ratio = op_norm(w.evaluate(chain)) / (growth * nf);
    if (lower_chain < 0) lower_chain = alg.filtration().depth() - 1;
    rep.lower_gap = op_norm(w.evaluate(lower_chain)) - nf;
    return rep;
}

struct WickRuleReport {
    cplx matrix_value;    // omega(Psi(f1)...Psi(f2k)) from dense matrices
    cplx pairing_value;   // signed pairing (Pfaffian) expansion
    double abs_error;
};

/// Compare omega(Psi(f1)...Psi(f2k)) against the fermionic Wick rule with
/// two-point function omega(Psi(f)Psi(g)) = <kappa U f, g>.
inline WickRuleReport wick_rule_check(const Algebra& alg, const std::vector<VecC>& f) {
    FSQ_REQUIRE(f.size() % 2 == 0 && f.size() <= 8, "wick rule: need 2k <= 8 vectors");
    const ModeSpace& ms = alg.mode_space();
    const FockRep& r = alg.reference_rep();
    MatC prod = MatC::Identity(r.dim(), r.dim());
    for (const auto& v : f) prod = prod * r.field(v);
    const int n = int(f.size());
    MatC c(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) c(i, j) = ms.inner(ms.kappa_U(f[size_t(i)]), f[size_t(j)]);
    WickRuleReport rep;
    rep.matrix_value = r.vacuum_expect(prod);
    rep.pairing_value = pfaffian(c);
    rep.abs_error = std::abs(rep.matrix_value - rep.pairing_value);
    return rep;
}

}  // namespace fsq
