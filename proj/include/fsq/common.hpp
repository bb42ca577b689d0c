#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fsq {

using cplx = std::complex<double>;
using VecC = Eigen::VectorXcd;
using VecD = Eigen::VectorXd;
using MatC = Eigen::MatrixXcd;
using MatD = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

#define FSQ_REQUIRE(cond, msg)                             \
    do {                                                   \
        if (!(cond)) throw std::invalid_argument(msg);     \
    } while (0)

/// Largest singular value. Dense eigen-solve of A^dag A up to 1024,
/// power iteration above.
inline double op_norm(const MatC& a) {
    if (a.rows() == 0) return 0.0;
    if (a.rows() <= 1024) {
        Eigen::SelfAdjointEigenSolver<MatC> es(a.adjoint() * a);
        double lam = es.eigenvalues().maxCoeff();
        return lam > 0 ? std::sqrt(lam) : 0.0;
    }
    // power iteration on A^dag A
    VecC v = VecC::Random(a.cols());
    v.normalize();
    double lam = 0;
    for (int it = 0; it < 200; ++it) {
        VecC w = a.adjoint() * (a * v);
        double nl = w.norm();
        if (nl == 0) return 0.0;
        w /= nl;
        if (std::abs(nl - lam) < 1e-11 * std::max(1.0, nl) && it > 10) {
            lam = nl;
            break;
        }
        lam = nl;
        v = w;
    }
    return std::sqrt(lam);
}

/// Least-squares slope of y against x, with R^2.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    FSQ_REQUIRE(x.size() == y.size() && x.size() >= 2, "fit_line: need >= 2 points");
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    const double den = n * sxx - sx * sx;
    LineFit f;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    double ss_res = 0, ss_tot = 0, ym = sy / n;
    for (size_t i = 0; i < x.size(); ++i) {
        double p = f.slope * x[i] + f.intercept;
        ss_res += (y[i] - p) * (y[i] - p);
        ss_tot += (y[i] - ym) * (y[i] - ym);
    }
    f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

/// Fit log|y| = zeta*log(x) + c. Points with y <= 0 are skipped.
inline LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < x.size(); ++i) {
        if (y[i] > 0 && x[i] > 0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    return fit_line(lx, ly);
}

/// FNV-1a over raw bytes; used for reproducibility manifests.
inline std::uint64_t fnv1a(const void* data, size_t n, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

inline std::uint64_t fnv1a(const VecC& v, std::uint64_t h = 1469598103934665603ull) {
    return fnv1a(v.data(), sizeof(cplx) * size_t(v.size()), h);
}

/// Sign of sorting a concatenation of two strictly increasing index lists,
/// 0 if they share an index. Used for Grassmann monomial products.
inline int merge_sign(const std::vector<int>& a, const std::vector<int>& b, std::vector<int>& out) {
    out.clear();
    out.reserve(a.size() + b.size());
    size_t i = 0, j = 0;
    long crossings = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) return 0;
        if (a[i] < b[j]) {
            out.push_back(a[i++]);
        } else {
            // b[j] hops over the remaining a-entries
            crossings += long(a.size() - i);
            out.push_back(b[j++]);
        }
    }
    while (i < a.size()) out.push_back(a[i++]);
    while (j < b.size()) out.push_back(b[j++]);
    return (crossings % 2 == 0) ? 1 : -1;
}

}  // namespace fsq
