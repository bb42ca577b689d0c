#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "fsq/common.hpp"

#include <nlohmann/json.hpp>

namespace fsq {

// Single-particle space h = L^2(R_t) (x) H^{-(1+2delta)/2}(T^2) (x) C^4,
// discretised by time boxes, symmetric Fourier modes on the unit torus and
// the 4 spinor components. Coefficient vectors are expressed in the
// orthonormalised basis throughout; the raw basis carries the diagonal Gram
// weight w(k) = (4 pi^2 |k|^2 + M^2)^{-(1+2delta)/2}.

struct BasisLabel {
    int time_idx;
    int k1, k2;   // spatial frequency
    int spinor;   // 0..3, C^2 (+) C^2 split at 2
};

/// 2x2 Fourier symbol of the Dirac operator at frequency k.
inline Eigen::Matrix2cd dirac_symbol(int k1, int k2) {
    const double p1 = 2.0 * kPi * k1, p2 = 2.0 * kPi * k2;
    Eigen::Matrix2cd d;
    d << cplx(0, 0), cplx(-p2, -p1),
         cplx(p2, -p1), cplx(0, 0);
    return d;
}

/// Conjugated variant (complex-conjugate operator, not adjoint).
inline Eigen::Matrix2cd dirac_bar_symbol(int k1, int k2) {
    const double p1 = 2.0 * kPi * k1, p2 = 2.0 * kPi * k2;
    Eigen::Matrix2cd d;
    d << cplx(0, 0), cplx(p2, -p1),
         cplx(-p2, -p1), cplx(0, 0);
    return d;
}

/// 4x4 symbol of the conjugation unitary
/// U = sqrt(-Lap+M^2) antidiag( (-D+M)^{-1}, -(Dbar+M)^{-1} ).
inline Eigen::Matrix4cd conjugation_symbol(int k1, int k2, double M) {
    const double p1 = 2.0 * kPi * k1, p2 = 2.0 * kPi * k2;
    const double s = std::sqrt(p1 * p1 + p2 * p2 + M * M);
    Eigen::Matrix2cd d = dirac_symbol(k1, k2);
    Eigen::Matrix2cd db = dirac_bar_symbol(k1, k2);
    Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    Eigen::Matrix4cd u = Eigen::Matrix4cd::Zero();
    u.block<2, 2>(0, 2) = (M * id + d) / s;
    u.block<2, 2>(2, 0) = -(M * id - db) / s;
    return u;
}

class ModeSpace {
  public:
    ModeSpace() = default;

    /// n_time time boxes on [t_min, t_max], spatial cutoff K per dimension
    /// (frequencies -K..K), 4 spinor components.
    ModeSpace(int n_time, int n_space, double delta, double mass_M,
              double t_min = -2.0, double t_max = 1.0)
        : n_time_(n_time), delta_(delta), mass_(mass_M), t_min_(t_min), t_max_(t_max) {
        FSQ_REQUIRE(n_time >= 1 && n_space >= 1, "mode space: cutoffs must be >= 1");
        FSQ_REQUIRE(delta > 0.0 && delta < 0.5, "mode space: delta must lie in (0,1/2)");
        FSQ_REQUIRE(mass_M > 0.0, "mode space: M must be positive");
        FSQ_REQUIRE(t_max > t_min, "mode space: empty time window");
        k_cut_ = (n_space - 1) / 2;
        for (int a = -k_cut_; a <= k_cut_; ++a)
            for (int b = -k_cut_; b <= k_cut_; ++b) freqs_.push_back({a, b});
        n_freq_ = int(freqs_.size());
        dt_box_ = (t_max_ - t_min_) / n_time_;
        labels_.reserve(size_t(dim()));
        for (int j = 0; j < n_time_; ++j)
            for (int f = 0; f < n_freq_; ++f)
                for (int s = 0; s < 4; ++s)
                    labels_.push_back({j, freqs_[f][0], freqs_[f][1], s});
        gram_.resize(dim());
        for (int i = 0; i < dim(); ++i) gram_[i] = weight(labels_[i].k1, labels_[i].k2);
        flip_.resize(size_t(n_freq_));
        for (int f = 0; f < n_freq_; ++f) {
            auto [a, b] = freqs_[f];
            flip_[f] = freq_index(-a, -b);
        }
        u_symbols_.reserve(size_t(n_freq_));
        for (int f = 0; f < n_freq_; ++f)
            u_symbols_.push_back(conjugation_symbol(freqs_[f][0], freqs_[f][1], mass_));
    }

    int dim() const { return n_time_ * n_freq_ * 4; }
    int n_time() const { return n_time_; }
    int n_freq() const { return n_freq_; }
    int k_cut() const { return k_cut_; }
    double delta() const { return delta_; }
    double mass() const { return mass_; }
    double t_min() const { return t_min_; }
    double t_max() const { return t_max_; }
    double dt_box() const { return dt_box_; }
    const std::vector<BasisLabel>& labels() const { return labels_; }

    /// Raw-basis Gram weight (-Lap+M^2)^{-(1+2delta)/2} at frequency k.
    double weight(int k1, int k2) const {
        const double lap = 4.0 * kPi * kPi * double(k1 * k1 + k2 * k2);
        return std::pow(lap + mass_ * mass_, -(1.0 + 2.0 * delta_) / 2.0);
    }

    int freq_index(int k1, int k2) const {
        FSQ_REQUIRE(std::abs(k1) <= k_cut_ && std::abs(k2) <= k_cut_, "frequency outside cutoff");
        return (k1 + k_cut_) * (2 * k_cut_ + 1) + (k2 + k_cut_);
    }

    int index(int j, int f, int s) const { return (j * n_freq_ + f) * 4 + s; }

    /// Diagonal Gram of the raw (un-normalised) basis, as a dense matrix.
    MatC gram_matrix() const {
        MatC g = MatC::Zero(dim(), dim());
        for (int i = 0; i < dim(); ++i) g(i, i) = gram_[i];
        return g;
    }

    /// h inner product of orthonormal-basis coefficient vectors.
    cplx inner(const VecC& f, const VecC& g) const {
        FSQ_REQUIRE(f.size() == dim() && g.size() == dim(), "inner: dimension mismatch");
        return f.dot(g);  // Eigen dot conjugates the left argument
    }

    /// kappa: complex conjugation; conjugates coefficients and flips k -> -k.
    VecC kappa(const VecC& f) const {
        FSQ_REQUIRE(f.size() == dim(), "kappa: dimension mismatch");
        VecC out(dim());
        for (int j = 0; j < n_time_; ++j)
            for (int fi = 0; fi < n_freq_; ++fi)
                for (int s = 0; s < 4; ++s)
                    out[index(j, flip_[fi], s)] = std::conj(f[index(j, fi, s)]);
        return out;
    }

    /// U: block Fourier multiplier per spatial frequency, identity in time.
    VecC apply_U(const VecC& f) const {
        FSQ_REQUIRE(f.size() == dim(), "apply_U: dimension mismatch");
        VecC out(dim());
        for (int j = 0; j < n_time_; ++j)
            for (int fi = 0; fi < n_freq_; ++fi) {
                Eigen::Vector4cd blk;
                for (int s = 0; s < 4; ++s) blk[s] = f[index(j, fi, s)];
                Eigen::Vector4cd r = u_symbols_[size_t(fi)] * blk;
                for (int s = 0; s < 4; ++s) out[index(j, fi, s)] = r[s];
            }
        return out;
    }

    VecC kappa_U(const VecC& f) const { return kappa(apply_U(f)); }

    /// Pointwise evaluation of the orthonormal basis function with index i at
    /// space-time point (t, x1, x2); time part is the unit-box profile.
    cplx eval_basis(int i, double t, double x1, double x2) const {
        const BasisLabel& L = labels_[size_t(i)];
        const double a = t_min_ + L.time_idx * dt_box_;
        if (t < a || t >= a + dt_box_) return cplx(0, 0);
        const double tb = 1.0 / std::sqrt(dt_box_);
        const double ph = 2.0 * kPi * (L.k1 * x1 + L.k2 * x2);
        const double nrm = 1.0 / std::sqrt(gram_[size_t(i)]);
        return tb * nrm * cplx(std::cos(ph), std::sin(ph));
    }

    nlohmann::json manifest() const {
        nlohmann::json j;
        j["schema"] = "fsq.mode_space.v1";
        j["n_time"] = n_time_;
        j["k_cut"] = k_cut_;
        j["delta"] = delta_;
        j["mass_M"] = mass_;
        j["window"] = {t_min_, t_max_};
        j["dim"] = dim();
        std::uint64_t h = 1469598103934665603ull;
        h = fnv1a(gram_.data(), gram_.size() * sizeof(double), h);
        j["gram_hash"] = h;
        std::vector<std::string> lbl;
        lbl.reserve(labels_.size());
        for (const auto& L : labels_)
            lbl.push_back("t" + std::to_string(L.time_idx) + "_k" + std::to_string(L.k1) + "," +
                          std::to_string(L.k2) + "_s" + std::to_string(L.spinor));
        j["basis"] = lbl;
        return j;
    }

  private:
    int n_time_ = 0, n_freq_ = 0, k_cut_ = 0;
    double delta_ = 0.25, mass_ = 1.0, t_min_ = 0.0, t_max_ = 1.0, dt_box_ = 1.0;
    std::vector<std::array<int, 2>> freqs_;
    std::vector<BasisLabel> labels_;
    std::vector<double> gram_;
    std::vector<int> flip_;
    std::vector<Eigen::Matrix4cd> u_symbols_;
};

/// Modified Gram-Schmidt against the columns of `basis` (orthonormal), then
/// normalisation. Returns nullopt if the residual is below tol.
inline std::optional<VecC> mgs_residual(const MatC& basis, const VecC& v, double tol = 1e-12) {
    VecC r = v;
    for (int c = 0; c < basis.cols(); ++c) r -= basis.col(c).dot(r) * basis.col(c);
    // second pass for numerical orthogonality
    for (int c = 0; c < basis.cols(); ++c) r -= basis.col(c).dot(r) * basis.col(c);
    const double n = r.norm();
    if (n < tol) return std::nullopt;
    return VecC(r / n);
}

}  // namespace fsq
