#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fsq/kernels.hpp"

using namespace fsq;

TEST_CASE("heat kernel values") {
    SECTION("core value at (1,0) is 1/(4 pi)") {
        REQUIRE(heat_core(1.0, 0.0, 0.0, 0.0) == Catch::Approx(1.0 / (4.0 * kPi)).epsilon(1e-12));
    }

    SECTION("spatial mass: \\int K(t,.) dx = e^{-t m^2} (quadrature oracle)") {
        const double m = 1.3;
        for (double t : {0.05, 0.3, 0.8}) {
            const int n = 128;
            double acc = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    acc += heat_periodised(t, i / double(n), j / double(n), m * m) / (n * n);
            REQUIRE(acc == Catch::Approx(std::exp(-t * m * m)).epsilon(1e-5));
        }
    }

    SECTION("temporal truncation") {
        REQUIRE(time_cutoff(0.99) == 1.0);
        REQUIRE(time_cutoff(2.01) == 0.0);
        REQUIRE(heat_periodised(2.5, 0.1, 0.1, 1.0) == 0.0);
    }
}

TEST_CASE("declared scaling exponents are recovered") {
    const double m = 1.0, M = 1.0, delta = 0.25;

    SECTION("K in N^{-2}") {
        auto rep = measure_zeta(heat_kernel_K(m), 4e-3, 0.25);
        INFO("measured " << rep.zeta_measured);
        REQUIRE(rep.deviation() < 0.15);
    }

    SECTION("G_slash in N^{-3}") {
        auto rep = measure_zeta(dirac_kernel_G_slash(M), 4e-3, 0.25);
        INFO("measured " << rep.zeta_measured);
        REQUIRE(rep.deviation() < 0.15);
    }

    SECTION("G_slash_star2 in N^{-1+2delta}") {
        auto rep = measure_zeta(star2_G_slash(M, delta), 8e-3, 0.25);
        INFO("measured " << rep.zeta_measured);
        REQUIRE(rep.deviation() < 0.15);
    }

    SECTION("Q has spatial exponent 2 delta - 1") {
        auto rep = measure_zeta_spatial(bessel_Q(M, delta), 2e-3, 0.08);
        INFO("measured " << rep.zeta_measured);
        REQUIRE(rep.deviation() < 0.1);
    }
}

TEST_CASE("Q tail and Fourier consistency") {
    const double M = 1.0, delta = 0.25;

    SECTION("exponential tail on |x| in [1,3]") {
        // Q(r) ~ r^{delta-1} e^{-M r}: fit log(Q r^{1-delta}) against r
        std::vector<double> rs, vals;
        for (double r = 1.0; r <= 3.0; r += 0.2) {
            rs.push_back(r);
            vals.push_back(std::log(bessel_Q_analytic(r, M, delta) * std::pow(r, 1.0 - delta)));
        }
        LineFit f = fit_line(rs, vals);
        INFO("tail rate " << f.slope);
        REQUIRE(std::abs(f.slope + M) < 0.05 * M);
    }

    SECTION("periodised kernel acts like the multiplier on periodic data (FFT oracle)") {
        // sample the analytic periodised kernel on the grid (cell-averaged
        // near the singularity), convolve a smooth periodic test function
        // with it, and compare with the exact multiplier action.
        SpaceTimeGrid g{96, 1, 0.0, 1.0};
        SingularKernel q = bessel_Q(M, delta);
        Field sampled(g);
        for (int ix = 0; ix < g.nx; ++ix)
            for (int iy = 0; iy < g.nx; ++iy) {
                double x1 = g.x_of(ix), x2 = g.x_of(iy);
                if (x1 > 0.5) x1 -= 1.0;
                if (x2 > 0.5) x2 -= 1.0;
                if (ix == 0 && iy == 0) {
                    double acc = 0;
                    const int nr = 400, na = 32;
                    const double rmax = 0.5 * g.dx();
                    for (int ir = 0; ir < nr; ++ir)
                        for (int ia = 0; ia < na; ++ia) {
                            const double r = (ir + 0.5) * rmax / nr;
                            acc += bessel_Q_analytic(r, M, delta) * r * (rmax / nr) *
                                   (2.0 * kPi / na);
                        }
                    const int sub = 32;
                    for (int a = 0; a < sub; ++a)
                        for (int b = 0; b < sub; ++b) {
                            const double v1 = (a + 0.5) * g.dx() / sub - 0.5 * g.dx();
                            const double v2 = (b + 0.5) * g.dx() / sub - 0.5 * g.dx();
                            if (std::hypot(v1, v2) <= rmax) continue;
                            acc += q.amp(0.0, v1, v2) * g.dx() * g.dx() / (sub * sub);
                        }
                    sampled.at(0, 0, 0) = acc / (g.dx() * g.dx());
                } else if (std::hypot(x1, x2) < 8.0 * g.dx()) {
                    const int sub = 8;
                    double acc = 0;
                    for (int a = 0; a < sub; ++a)
                        for (int b = 0; b < sub; ++b)
                            acc += q.amp(0.0, x1 + (a + 0.5) * g.dx() / sub - 0.5 * g.dx(),
                                         x2 + (b + 0.5) * g.dx() / sub - 0.5 * g.dx());
                    sampled.at(0, ix, iy) = acc / (sub * sub);
                } else {
                    sampled.at(0, ix, iy) = q.amp(0.0, x1, x2);
                }
            }
        // smooth periodic test data with a few low modes
        Field u(g), want(g);
        for (int ix = 0; ix < g.nx; ++ix)
            for (int iy = 0; iy < g.nx; ++iy) {
                const double x1 = g.x_of(ix), x2 = g.x_of(iy);
                u.at(0, ix, iy) = std::cos(2 * kPi * x1) + 0.5 * std::cos(2 * kPi * (2 * x1 + x2));
                const double m1 = std::pow(4 * kPi * kPi + M * M, -(1 + 2 * delta) / 2);
                const double m2 = std::pow(4 * kPi * kPi * 5 + M * M, -(1 + 2 * delta) / 2);
                want.at(0, ix, iy) = m1 * std::cos(2 * kPi * x1) +
                                     0.5 * m2 * std::cos(2 * kPi * (2 * x1 + x2));
            }
        Field got = convolve(u, sampled);
        double sup = 0, ref = 0;
        for (long i = 0; i < g.size(); ++i) {
            sup = std::max(sup, std::abs(got.data[i] - want.data[i]));
            ref = std::max(ref, std::abs(want.data[i]));
        }
        REQUIRE(sup / ref < 0.01);
    }
}

TEST_CASE("convolution") {
    SpaceTimeGrid g{24, 72, 0.0, 1.0 / 48.0};
    Field K = heat_kernel_K(1.0).make_cache(g);

    SECTION("delta impulse reproduces the kernel cache") {
        Field delta(g);
        delta.at(0, 2, 3) = 1.0 / g.cell_vol();
        Field conv = convolve(delta, K);
        double worst = 0;
        for (int it = 0; it < g.nt; ++it)
            for (int ix = 0; ix < g.nx; ++ix)
                for (int iy = 0; iy < g.nx; ++iy)
                    worst = std::max(worst, std::abs(conv.at(it, ix, iy) -
                                                     K.at(it, (ix - 2 + g.nx) % g.nx,
                                                          (iy - 3 + g.nx) % g.nx)));
        REQUIRE(worst < 1e-10);
    }

    SECTION("grid mismatch rejected") {
        Field other{SpaceTimeGrid{16, 72, 0.0, 1.0 / 48.0}};
        REQUIRE_THROWS_AS(convolve(other, K), std::invalid_argument);
    }

    SECTION("adjoint consistency <K*f, g> = <f, K^T*g>") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> n01;
        Field f(g), h(g);
        for (long i = 0; i < g.size(); ++i) {
            f.data[i] = cplx(n01(rng), n01(rng));
            h.data[i] = cplx(n01(rng), n01(rng));
        }
        Field kt{SpaceTimeGrid{g.nx, g.nt, -double(g.nt - 1) * g.dt, g.dt}};
        for (int it = 0; it < g.nt; ++it)
            for (int ix = 0; ix < g.nx; ++ix)
                for (int iy = 0; iy < g.nx; ++iy)
                    kt.at(it, ix, iy) = K.at(g.nt - 1 - it, (g.nx - ix) % g.nx,
                                             (g.nx - iy) % g.nx);
        Field kf = convolve(f, K), kth = convolve(h, kt);
        cplx lhs(0, 0), rhs(0, 0);
        for (long i = 0; i < g.size(); ++i) {
            lhs += std::conj(kf.data[i]) * h.data[i];
            rhs += std::conj(f.data[i]) * kth.data[i];
        }
        lhs *= g.cell_vol();
        rhs *= g.cell_vol();
        REQUIRE(std::abs(lhs - rhs) < 1e-9 * std::max(1.0, std::abs(lhs)));
    }

    SECTION("K * K is log-flat (zeta close to 0 from below)") {
        SingularKernel k1 = heat_kernel_K(1.0), k2 = heat_kernel_K(1.0);
        SingularKernel prod;  // probe via the star2 synthesis, same object
        SingularKernel s2 = star2_K(1.0);
        auto rep = measure_zeta(s2, 0.02, 0.3);
        INFO("K*K slope " << rep.zeta_measured);
        REQUIRE(rep.zeta_measured < 0.0);
        REQUIRE(rep.zeta_measured > -0.8);
    }
}

TEST_CASE("power counting") {
    const double m = 1.0, M = 1.0, delta = 0.25;

    SECTION("product additivity: two zeta = -2 kernels give -4") {
        auto rep = power_counting_check(heat_kernel_K(m), kernel_G(M), PowerCountMode::Product,
                                        4e-3, 0.2);
        INFO("measured " << rep.zeta_measured << " declared " << rep.zeta_declared);
        REQUIRE(std::abs(rep.zeta_measured - rep.zeta_declared) < 0.2);
    }

    SECTION("Gbar_slash_star2 . G_slash_star2 has slope -2+4delta") {
        auto rep = power_counting_check(star2_G_slash(M, delta), star2_G_slash(M, delta),
                                        PowerCountMode::Product, 8e-3, 0.2);
        INFO("measured " << rep.zeta_measured << " declared " << rep.zeta_declared);
        REQUIRE(std::abs(rep.zeta_measured - rep.zeta_declared) < 0.2);
    }

    SECTION("K_star2 . G_slash_star2 (log factor, report only)") {
        auto rep = power_counting_check(star2_K(m), star2_G_slash(M, delta),
                                        PowerCountMode::Product, 8e-3, 0.2);
        WARN("K_star2 x G_slash_star2 slope " << rep.zeta_measured << " vs -1+2delta+0- = "
                                              << (-1 + 2 * delta));
        REQUIRE(rep.zeta_measured < -1.0 + 2 * delta + 0.1);
    }

    SECTION("convolution preconditions mirror the hypotheses") {
        REQUIRE_THROWS_AS(power_counting_check(heat_kernel_K(m), kernel_G(M),
                                               PowerCountMode::Convolution),
                          std::invalid_argument);  // -2 + -2 + 4 = 0, not < 0
    }

    SECTION("convolution additivity: G_slash-component * K has slope -1") {
        SpaceTimeGrid g{32, 128, 0.0, 1.0 / 64.0};
        auto rep = power_counting_check(dirac_kernel_G_slash(M), heat_kernel_K(m),
                                        PowerCountMode::Convolution, 5e-3, 0.3, &g);
        INFO("measured " << rep.zeta_measured << " declared " << rep.zeta_declared);
        REQUIRE(std::abs(rep.zeta_measured - rep.zeta_declared) < 0.2);
    }
}

TEST_CASE("mollifier") {
    SECTION("mass one at every epsilon (grid quadrature)") {
        for (double eps : {0.25, 0.125, 0.0625}) {
            Mollifier rho{eps};
            const int nt = 64, nx = 48;
            const double dtq = 2.2 * eps * eps / nt, dxq = 2.2 * eps / nx;
            double acc = 0;
            for (int a = 0; a < nt; ++a)
                for (int b = 0; b < nx; ++b)
                    for (int c = 0; c < nx; ++c) {
                        const double t = -1.1 * eps * eps + (a + 0.5) * dtq;
                        const double x1 = -1.1 * eps + (b + 0.5) * dxq;
                        const double x2 = -1.1 * eps + (c + 0.5) * dxq;
                        acc += rho.value(t, x1, x2) * dtq * dxq * dxq;
                    }
            REQUIRE(acc == Catch::Approx(1.0).margin(1e-4));
        }
    }

    SECTION("pointwise convergence away from the origin") {
        SingularKernel base = heat_kernel_K(1.0);
        double prev = 1e9;
        for (double eps : {0.2, 0.1, 0.05}) {
            SingularKernel moll = heat_kernel_K(1.0, eps);
            const double d = std::abs(base.amp(0.3, 0.2, 0.1) - moll.amp(0.3, 0.2, 0.1));
            REQUIRE(d < prev * (1 + 1e-12));
            prev = d;
        }
        REQUIRE(prev < 2e-3);
    }

    SECTION("mollification rate at zbar = zeta - 1/2") {
        auto rep = mollifier_rate_check([](double e) { return heat_kernel_K(1.0, e); }, -2.0,
                                        -2.5, {0.25, 0.177, 0.125, 0.088, 0.0625});
        INFO("rate " << rep.rate_measured << " expected " << rep.rate_expected);
        REQUIRE(std::abs(rep.rate_measured - rep.rate_expected) < 0.1);
    }
}

TEST_CASE("periodisation consistency: multiplier caches match image sums") {
    SpaceTimeGrid g{24, 48, 0.0, 1.0 / 48.0};
    Field K = heat_kernel_K(1.0).make_cache(g);
    SingularKernel analytic = heat_kernel_K(1.0);
    // compare at cells where the kernel is slowly varying
    for (int it : {16, 24, 40}) {
        for (int ix : {0, 5, 12}) {
            const double t = g.time_center(it), x = g.x_of(ix) <= 0.5 ? g.x_of(ix) : g.x_of(ix) - 1;
            const double a = analytic.amp(t, x, 0.0);
            const double c = std::abs(K.at(it, ix, 0));
            REQUIRE(std::abs(a - c) <= 0.01 * std::max(a, 1e-3));
        }
    }
}

TEST_CASE("spinor parity: Dirac gradient vanishes at x = 0") {
    double g1, g2;
    heat_periodised_grad(0.3, 0.0, 0.0, 1.0, g1, g2);
    REQUIRE(std::abs(g1) < 1e-12);
    REQUIRE(std::abs(g2) < 1e-12);
}
