#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "fsq/grid.hpp"
#include "fsq/modes.hpp"

namespace fsq {

// Singular space-time kernels with parabolic scaling s = (2,1,1),
// |z|_s = sqrt|t| + |x1| + |x2|, scaling dimension 4. Heat-type kernels are
// stored as per-spatial-frequency time profiles
//     g_a(t) = e^{-a t} chi(t) 1_{t>0},  a = 4 pi^2 |k|^2 + mass^2,
// with chi a smooth cutoff that is 1 on (-inf,1] and 0 on [2,inf). Grid
// caches hold cell averages; mollification is applied inside the profile
// integrals so the epsilon-dependence survives coarse grids.

inline double parabolic_norm(double t, double x1, double x2) {
    return std::sqrt(std::abs(t)) + std::abs(x1) + std::abs(x2);
}

/// Smooth time cutoff: 1 on (-inf,1], 0 on [2,inf).
inline double time_cutoff(double t) {
    if (t <= 1.0) return 1.0;
    if (t >= 2.0) return 0.0;
    const double u = t - 1.0;
    return 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

/// Compactly supported bump profile (1-r^2)^4 on [-1,1]; mass 256/315.
inline double bump_profile(double r) {
    if (std::abs(r) >= 1.0) return 0.0;
    const double q = 1.0 - r * r;
    return q * q * q * q;
}

inline double bump_mass() { return 256.0 / 315.0; }

namespace detail {
// 16-point Gauss-Legendre nodes/weights on [-1,1].
inline const double* gl16_x() {
    static const double x[16] = {
        -0.9894009349916499, -0.9445750230732326, -0.8656312023878318, -0.7554044083550030,
        -0.6178762444026438, -0.4580167776572274, -0.2816035507792589, -0.0950125098376374,
        0.0950125098376374,  0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
        0.7554044083550030,  0.8656312023878318,  0.9445750230732326,  0.9894009349916499};
    return x;
}
inline const double* gl16_w() {
    static const double w[16] = {
        0.0271524594117541, 0.0622535239386479, 0.0951585116824928, 0.1246289712555339,
        0.1495959888165767, 0.1691565193950025, 0.1826034150449236, 0.1894506104550685,
        0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
        0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};
    return w;
}

template <typename F>
double gl16(F&& f, double a, double b) {
    const double* x = gl16_x();
    const double* w = gl16_w();
    const double h = 0.5 * (b - a), m = 0.5 * (a + b);
    double s = 0;
    for (int i = 0; i < 16; ++i) s += w[i] * f(m + h * x[i]);
    return s * h;
}
}  // namespace detail

/// 1D Fourier transform of the bump profile: \int b(r) e^{-2 pi i xi r} dr
/// (real, even in xi).
inline double bump_hat(double xi) {
    return detail::gl16(
        [xi](double r) { return bump_profile(r) * std::cos(2.0 * kPi * xi * r); }, -1.0, 1.0);
}

/// Parabolic mollifier rho_eps(t,x) = eps^{-4} rho(eps^{-2} t, eps^{-1} x)
/// with rho(t,x) = b(t) b(x1) b(x2) / mass^3 (mass one by construction).
struct Mollifier {
    double eps = 0.0;  // eps = 0 means no mollification

    bool active() const { return eps > 0.0; }
    double value(double t, double x1, double x2) const {
        const double m = bump_mass();
        const double e2 = eps * eps;
        return bump_profile(t / e2) * bump_profile(x1 / eps) * bump_profile(x2 / eps) /
               (m * m * m * e2 * eps * eps);
    }
    /// Fourier transform of the spatial factor at integer frequency k.
    double fourier_x(int k1, int k2) const {
        if (!active()) return 1.0;
        const double m = bump_mass();
        return bump_hat(eps * k1) * bump_hat(eps * k2) / (m * m);
    }
    /// Time smearing of a profile g: (rho_t,eps * g)(t).
    template <typename G>
    double smear_time(G&& g, double t) const {
        if (!active()) return g(t);
        const double e2 = eps * eps, m = bump_mass();
        return detail::gl16([&](double u) { return bump_profile(u) * g(t - e2 * u); }, -1.0,
                            1.0) /
               m;
    }
};

namespace detail {
inline const double* gl8_x() {
    static const double x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                0.7966664774136267,  0.9602898564975363};
    return x;
}
inline const double* gl8_w() {
    static const double w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                0.2223810344533745, 0.1012285362903763};
    return w;
}
}  // namespace detail

/// Full parabolic smearing (rho_eps * F)(t,x) of a pointwise evaluator by
/// tensor Gauss-Legendre quadrature over the product bump.
template <typename F>
inline double smear_spacetime(F&& f, double t, double x1, double x2, double eps) {
    if (eps <= 0.0) return f(t, x1, x2);
    const double e2 = eps * eps, m = bump_mass();
    const double* xt = detail::gl16_x();
    const double* wt = detail::gl16_w();
    const double* xs = detail::gl8_x();
    const double* ws = detail::gl8_w();
    double acc = 0;
    for (int a = 0; a < 16; ++a) {
        const double bu = bump_profile(xt[a]);
        if (bu == 0) continue;
        for (int b = 0; b < 8; ++b) {
            const double bv = bump_profile(xs[b]);
            if (bv == 0) continue;
            for (int c = 0; c < 8; ++c) {
                const double bw = bump_profile(xs[c]);
                if (bw == 0) continue;
                acc += wt[a] * ws[b] * ws[c] * bu * bv * bw *
                       f(t - e2 * xt[a], x1 - eps * xs[b], x2 - eps * xs[c]);
            }
        }
    }
    return acc / (m * m * m);
}

/// e^{-a t} chi(t) 1_{t>0}.
inline double heat_profile(double a, double t) {
    if (t <= 0.0) return 0.0;
    return std::exp(-a * t) * time_cutoff(t);
}

inline double heat_profile_moll(double a, double t, const Mollifier& rho) {
    return rho.smear_time([a](double s) { return heat_profile(a, s); }, t);
}

/// Cell average of the (mollified) heat profile over [t0, t1].
inline double heat_profile_cell(double a, double t0, double t1, const Mollifier& rho) {
    return detail::gl16([&](double t) { return heat_profile_moll(a, t, rho); }, t0, t1) /
           (t1 - t0);
}

/// Autocorrelation Phi(u) = \int g_a(t) g_a(t+|u|) dt; closed form when the
/// cutoff region carries no mass.
inline double heat_autocorr(double a, double u) {
    u = std::abs(u);
    if (a >= 12.0) return std::exp(-a * u) / (2.0 * a);
    return detail::gl16(
        [&](double t) { return heat_profile(a, t) * heat_profile(a, t + u); }, 0.0, 2.2);
}

/// R^2 heat kernel with mass factor: e^{-t m^2} H_t(x), H the Gaussian.
inline double heat_core(double t, double x1, double x2, double msq) {
    if (t <= 0.0) return 0.0;
    return std::exp(-t * msq) * std::exp(-(x1 * x1 + x2 * x2) / (4.0 * t)) / (4.0 * kPi * t);
}

/// Spatially periodised, temporally truncated heat kernel on the unit torus.
inline double heat_periodised(double t, double x1, double x2, double msq, int images = 6) {
    if (t <= 0.0) return 0.0;
    const double c = time_cutoff(t);
    if (c == 0.0) return 0.0;
    double s = 0;
    for (int j1 = -images; j1 <= images; ++j1)
        for (int j2 = -images; j2 <= images; ++j2) s += heat_core(t, x1 + j1, x2 + j2, msq);
    return c * s;
}

/// d/dx_i of the periodised heat kernel.
inline void heat_periodised_grad(double t, double x1, double x2, double msq, double& g1,
                                 double& g2, int images = 6) {
    g1 = g2 = 0.0;
    if (t <= 0.0) return;
    const double c = time_cutoff(t);
    if (c == 0.0) return;
    for (int j1 = -images; j1 <= images; ++j1)
        for (int j2 = -images; j2 <= images; ++j2) {
            const double y1 = x1 + j1, y2 = x2 + j2;
            const double h = heat_core(t, y1, y2, msq);
            g1 += -y1 / (2.0 * t) * h;
            g2 += -y2 / (2.0 * t) * h;
        }
    g1 *= c;
    g2 *= c;
}

struct SingularKernel {
    std::string name;
    double zeta = 0.0;           // declared scaling exponent
    double support_radius = 0.0; // parabolic support bound after truncation
    bool slope_asserted = true;  // log-type kernels are report-only
    /// pointwise magnitude (max over components) away from the origin
    std::function<double(double, double, double)> amp;
    /// cell-averaged grid cache for convolution work (scalar kernels)
    std::function<Field(const SpaceTimeGrid&)> make_cache;
};

/// Cache built from per-frequency time profiles: value_hat(cell, k) =
/// rho_x(eps k) * cell-average of the mollified profile.
inline Field profile_cache(const SpaceTimeGrid& g, double msq, const Mollifier& rho) {
    Field f(g);
    for (int it = 0; it < g.nt; ++it) {
        const double t0 = g.t0 + it * g.dt, t1 = t0 + g.dt;
        for (int ix = 0; ix < g.nx; ++ix)
            for (int iy = 0; iy < g.nx; ++iy) {
                const int k1 = g.freq(ix), k2 = g.freq(iy);
                const double a = 4.0 * kPi * kPi * double(k1 * k1 + k2 * k2) + msq;
                f.at(it, ix, iy) = rho.fourier_x(k1, k2) * heat_profile_cell(a, t0, t1, rho);
            }
    }
    spatial_ifft(f);
    return f;
}

/// K: truncated, periodised kernel of (d_t - Lap + m^2)^{-1}; zeta = -2.
inline SingularKernel heat_kernel_K(double m, double eps = 0.0) {
    SingularKernel k;
    k.name = eps > 0 ? "K_eps" : "K";
    k.zeta = -2.0;
    k.support_radius = std::sqrt(2.0 + eps * eps) + 1.5 + eps;
    const double msq = m * m;
    if (eps == 0.0) {
        k.amp = [msq](double t, double x1, double x2) {
            return std::abs(heat_periodised(t, x1, x2, msq));
        };
    } else {
        k.amp = [msq, eps](double t, double x1, double x2) {
            return std::abs(smear_spacetime(
                [&](double s, double y1, double y2) { return heat_periodised(s, y1, y2, msq); },
                t, x1, x2, eps));
        };
    }
    k.make_cache = [msq, eps](const SpaceTimeGrid& g) {
        return profile_cache(g, msq, Mollifier{eps});
    };
    return k;
}

/// G: same object with the fermion mass M (kernel of the transposed
/// integration operator is its time reflection).
inline SingularKernel kernel_G(double M, double eps = 0.0) {
    SingularKernel k = heat_kernel_K(M, eps);
    k.name = eps > 0 ? "G_eps" : "G";
    return k;
}

/// G^slash: (D + M) G, C^2x2-valued; amp is the largest component magnitude.
inline SingularKernel dirac_kernel_G_slash(double M, double eps = 0.0, bool conjugated = false) {
    SingularKernel k;
    k.name = conjugated ? "Gbar_slash" : "G_slash";
    k.zeta = -3.0;
    k.support_radius = std::sqrt(2.0 + eps * eps) + 1.5 + eps;
    const double msq = M * M;
    k.amp = [msq, M, eps](double t, double x1, double x2) {
        auto grad = [&](int which) {
            return smear_spacetime(
                [&](double s, double y1, double y2) {
                    double g1, g2;
                    heat_periodised_grad(s, y1, y2, msq, g1, g2);
                    return which == 0 ? g1 : g2;
                },
                t, x1, x2, eps);
        };
        double d = M * smear_spacetime([&](double s, double y1, double y2) {
            return heat_periodised(s, y1, y2, msq);
        }, t, x1, x2, eps);
        double g1 = grad(0), g2 = grad(1);
        // off-diagonal entries of (D+M)G have magnitude |(-g1 +- i g2)|
        return std::max(std::abs(d), std::hypot(g1, g2));
    };
    // cache of the upper-right component (-d1 + i d2) G via the multiplier
    // i(-p1 + i p2) per spatial frequency
    k.make_cache = [msq, eps, conjugated](const SpaceTimeGrid& g) {
        Mollifier rho{eps};
        Field f(g);
        for (int it = 0; it < g.nt; ++it) {
            const double t0 = g.t0 + it * g.dt, t1 = t0 + g.dt;
            for (int ix = 0; ix < g.nx; ++ix)
                for (int iy = 0; iy < g.nx; ++iy) {
                    const int k1 = g.freq(ix), k2 = g.freq(iy);
                    const double p1 = 2.0 * kPi * k1, p2 = 2.0 * kPi * k2;
                    const double a = p1 * p1 + p2 * p2 + msq;
                    const cplx sym = conjugated ? cplx(p2, -p1) : cplx(-p2, -p1);
                    f.at(it, ix, iy) =
                        sym * rho.fourier_x(k1, k2) * heat_profile_cell(a, t0, t1, rho);
                }
        }
        spatial_ifft(f);
        return f;
    };
    return k;
}

/// Spatial Bessel-type kernel of (-Lap+M^2)^{-(1+2delta)/2} on R^2.
inline double bessel_Q_analytic(double r, double M, double delta) {
    FSQ_REQUIRE(r > 0.0, "bessel_Q_analytic: r must be positive");
    const double nu = 0.5 - delta;
    return std::pow(2.0 * M / r, nu) * std::cyl_bessel_k(nu, M * r) /
           (2.0 * kPi * std::tgamma(0.5 + delta));
}

/// Periodised Q with its grid cache via the exact multiplier.
inline SingularKernel bessel_Q(double M, double delta) {
    SingularKernel k;
    k.name = "Q";
    k.zeta = 2.0 * delta - 1.0;  // spatial exponent; kernel lives on T^2
    k.support_radius = 1.0;
    k.slope_asserted = true;
    k.amp = [M, delta](double /*t*/, double x1, double x2) {
        double s = 0;
        for (int j1 = -4; j1 <= 4; ++j1)
            for (int j2 = -4; j2 <= 4; ++j2) {
                const double r = std::hypot(x1 + j1, x2 + j2);
                if (r > 0) s += bessel_Q_analytic(r, M, delta);
            }
        return std::abs(s);
    };
    k.make_cache = [M, delta](const SpaceTimeGrid& g) {
        Field f(g);
        for (int ix = 0; ix < g.nx; ++ix)
            for (int iy = 0; iy < g.nx; ++iy) {
                const int k1 = g.freq(ix), k2 = g.freq(iy);
                const double lap = 4.0 * kPi * kPi * double(k1 * k1 + k2 * k2);
                const double mult = std::pow(lap + M * M, -(1.0 + 2.0 * delta) / 2.0);
                for (int it = 0; it < g.nt; ++it) f.at(it, ix, iy) = mult;
            }
        spatial_ifft(f);
        return f;
    };
    return k;
}

/// K*2-type kernels: inverse of -d_t^2 + (-Lap + msq)^2 evaluated by a
/// frequency sum; weight_pow scales the multiplier by a^{weight_pow}.
inline double star2_eval(double t, double x1, double x2, double msq, double weight_pow) {
    const double r = parabolic_norm(t, x1, x2);
    FSQ_REQUIRE(r > 1e-6, "star2_eval: too close to the origin");
    int kc = int(std::ceil(2.0 + 1.2 / r));
    kc = std::min(kc, 600);
    double s = 0;
    for (int k1 = -kc; k1 <= kc; ++k1)
        for (int k2 = -kc; k2 <= kc; ++k2) {
            const double a = 4.0 * kPi * kPi * double(k1 * k1 + k2 * k2) + msq;
            const double c = std::pow(a, weight_pow) * std::exp(-a * std::abs(t)) / (2.0 * a);
            s += c * std::cos(2.0 * kPi * (k1 * x1 + k2 * x2));
        }
    return s;
}

inline SingularKernel star2_K(double m) {
    SingularKernel k;
    k.name = "K_star2";
    k.zeta = -0.05;  // stands in for 0-; log-type, not slope-asserted
    k.slope_asserted = false;
    k.support_radius = 4.0;
    const double msq = m * m;
    k.amp = [msq](double t, double x1, double x2) {
        return std::abs(star2_eval(t, x1, x2, msq, 0.0));
    };
    k.make_cache = nullptr;
    return k;
}

/// G^{slash,*2}: multiplier a^{(1-2delta)/2} / (tau^2 + a^2); zeta = -1+2delta.
inline SingularKernel star2_G_slash(double M, double delta) {
    SingularKernel k;
    k.name = "G_slash_star2";
    k.zeta = -1.0 + 2.0 * delta;
    k.support_radius = 4.0;
    const double msq = M * M, wp = (1.0 - 2.0 * delta) / 2.0;
    k.amp = [msq, wp](double t, double x1, double x2) {
        return std::abs(star2_eval(t, x1, x2, msq, wp));
    };
    k.make_cache = nullptr;
    return k;
}

// ---------------------------------------------------------------------------
// Scaling-exponent measurement and power counting
// ---------------------------------------------------------------------------

struct SlopeReport {
    double zeta_declared = 0.0;
    double zeta_measured = 0.0;
    double r2 = 0.0;
    double deviation() const { return std::abs(zeta_measured - zeta_declared); }
};

/// log-log fit of sup_{direction} |K| over parabolic shells r in
/// [r_lo, r_hi]. Directions mix time and space; kernels supported in t>0 are
/// probed there automatically (zero directions are skipped in the sup).
inline SlopeReport measure_zeta(const SingularKernel& k, double r_lo, double r_hi,
                                int n_pts = 18) {
    std::vector<double> rs, vals;
    for (int i = 0; i < n_pts; ++i) {
        const double r = r_lo * std::pow(r_hi / r_lo, double(i) / (n_pts - 1));
        double best = 0;
        for (double theta : {0.0, 0.3, 0.6, 1.0}) {
            const double t_abs = theta * r * (theta * r);
            const double xr = (1.0 - theta) * r;
            for (double phi : {0.0, 0.5, 1.0, 1.7}) {
                const double x1 = xr * std::cos(phi), x2 = xr * std::sin(phi);
                for (double ts : {1.0, -1.0}) {
                    if (theta == 0.0 && ts < 0) continue;
                    best = std::max(best, k.amp(ts * t_abs, x1, x2));
                }
            }
        }
        if (best > 0) {
            rs.push_back(r);
            vals.push_back(best);
        }
    }
    SlopeReport rep;
    rep.zeta_declared = k.zeta;
    LineFit f = fit_loglog(rs, vals);
    rep.zeta_measured = f.slope;
    rep.r2 = f.r2;
    return rep;
}

/// Spatial-only slope for kernels on the torus (used by Q).
inline SlopeReport measure_zeta_spatial(const SingularKernel& k, double r_lo, double r_hi,
                                        int n_pts = 18) {
    std::vector<double> rs, vals;
    for (int i = 0; i < n_pts; ++i) {
        const double r = r_lo * std::pow(r_hi / r_lo, double(i) / (n_pts - 1));
        double best = 0;
        for (double phi : {0.0, 0.4, 0.9, 1.3}) best = std::max(best, k.amp(0.0, r * std::cos(phi), r * std::sin(phi)));
        rs.push_back(r);
        vals.push_back(best);
    }
    SlopeReport rep;
    rep.zeta_declared = k.zeta;
    LineFit f = fit_loglog(rs, vals);
    rep.zeta_measured = f.slope;
    rep.r2 = f.r2;
    return rep;
}

enum class PowerCountMode { Product, Convolution };

/// Power counting for pointwise products (zeta1 + zeta2) and convolutions
/// (zeta1 + zeta2 + 4). Preconditions mirror the convolution hypotheses.
inline SlopeReport power_counting_check(const SingularKernel& k1, const SingularKernel& k2,
                                        PowerCountMode mode, double r_lo = 5e-3,
                                        double r_hi = 0.25, const SpaceTimeGrid* conv_grid = nullptr) {
    if (mode == PowerCountMode::Product) {
        SingularKernel prod;
        prod.name = k1.name + "*" + k2.name;
        prod.zeta = k1.zeta + k2.zeta;
        prod.amp = [&k1, &k2](double t, double x1, double x2) {
            return k1.amp(t, x1, x2) * k2.amp(t, x1, x2);
        };
        return measure_zeta(prod, r_lo, r_hi);
    }
    FSQ_REQUIRE(std::min(k1.zeta, k2.zeta) > -4.0,
                "power counting: convolution needs zeta1, zeta2 > -4");
    FSQ_REQUIRE(k1.zeta + k2.zeta + 4.0 < 0.0,
                "power counting: convolution needs zeta1 + zeta2 + 4 < 0");
    FSQ_REQUIRE(k1.make_cache && k2.make_cache, "power counting: kernels lack grid caches");
    FSQ_REQUIRE(conv_grid != nullptr, "power counting: convolution needs a grid");
    Field c1 = k1.make_cache(*conv_grid), c2 = k2.make_cache(*conv_grid);
    Field conv = convolve(c1, c2);
    // shell maxima on the grid cache
    std::vector<double> rs, vals;
    const auto& g = *conv_grid;
    const double r_min = std::max(r_lo, 3.0 * std::max(std::sqrt(g.dt), g.dx()));
    for (int i = 0; i < 14; ++i) {
        const double r = r_min * std::pow(r_hi / r_min, double(i) / 13.0);
        double best = 0;
        for (int it = 0; it < g.nt; ++it)
            for (int ix = 0; ix < g.nx; ++ix)
                for (int iy = 0; iy < g.nx; ++iy) {
                    double x1 = g.x_of(ix), x2 = g.x_of(iy);
                    if (x1 > 0.5) x1 -= 1.0;
                    if (x2 > 0.5) x2 -= 1.0;
                    const double rr = parabolic_norm(g.time_center(it), x1, x2);
                    if (rr >= r && rr < 1.12 * r)
                        best = std::max(best, std::abs(conv.at(it, ix, iy)));
                }
        if (best > 0) {
            rs.push_back(r);
            vals.push_back(best);
        }
    }
    SlopeReport rep;
    rep.zeta_declared = k1.zeta + k2.zeta + 4.0;
    LineFit f = fit_loglog(rs, vals);
    rep.zeta_measured = f.slope;
    rep.r2 = f.r2;
    return rep;
}

struct MollifierRateReport {
    double zbar = 0.0;
    double rate_expected = 0.0;  // zeta - zbar
    double rate_measured = 0.0;
    double r2 = 0.0;
};

/// || K - K_eps ||_{zbar} ~ eps^{zeta-zbar}: sup-norm at exponent zbar over a
/// fixed shell range, fitted across dyadic epsilon.
template <typename MakeKernel>
inline MollifierRateReport mollifier_rate_check(MakeKernel&& make, double zeta, double zbar,
                                                const std::vector<double>& eps_list,
                                                double r_lo = 0.03, double r_hi = 0.4) {
    SingularKernel base = make(0.0);
    std::vector<double> es, norms;
    for (double e : eps_list) {
        SingularKernel moll = make(e);
        double sup = 0;
        for (int i = 0; i < 16; ++i) {
            const double r = r_lo * std::pow(r_hi / r_lo, double(i) / 15.0);
            for (double theta : {0.2, 0.6, 1.0}) {
                const double t = theta * r * theta * r;
                const double xr = (1.0 - theta) * r;
                const double d = std::abs(base.amp(t, xr, 0.0) - moll.amp(t, xr, 0.0));
                sup = std::max(sup, d * std::pow(r, -zbar));
            }
        }
        es.push_back(e);
        norms.push_back(sup);
    }
    MollifierRateReport rep;
    rep.zbar = zbar;
    rep.rate_expected = zeta - zbar;
    LineFit f = fit_loglog(es, norms);
    rep.rate_measured = f.slope;
    rep.r2 = f.r2;
    return rep;
}

}  // namespace fsq
