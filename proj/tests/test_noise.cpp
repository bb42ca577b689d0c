#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fsq/noise.hpp"

using namespace fsq;

TEST_CASE("white noise covariance (Monte-Carlo oracle)") {
    SpaceTimeGrid g{8, 16, 0.0, 1.0 / 16.0};
    // fixed bump test function and a disjoint copy
    std::vector<std::pair<long, double>> f, h;
    for (int it = 2; it < 6; ++it)
        for (int ix = 0; ix < 3; ++ix)
            for (int iy = 0; iy < 3; ++iy) {
                f.push_back({g.idx(it, ix, iy), 1.0});
                h.push_back({g.idx(it + 8, ix + 4, iy + 4), 1.0});
            }
    const double f_l2_sq = double(f.size()) * g.cell_vol();  // indicator norm
    const int n = 10000;
    double acc = 0, cross = 0;
    for (int s = 0; s < n; ++s) {
        BosonicSample xi(g, 1000 + std::uint64_t(s));
        cplx vf = xi.pair(f), vh = xi.pair(h);
        acc += std::norm(vf);
        cross += (vf * vh).real();
    }
    acc /= n;
    cross /= n;
    const double sigma3 = 3.0 * f_l2_sq * std::sqrt(2.0 / n);
    REQUIRE(std::abs(acc - f_l2_sq) < sigma3);
    REQUIRE(std::abs(cross) < sigma3);
}

TEST_CASE("noise regularity exponents") {
    const double M = 1.0, delta = 0.25, kappa = 0.05;

    SECTION("bosonic sample reads -2-kappa within 0.2") {
        SpaceTimeGrid g{48, 512, 0.0, 1.0 / 512.0};
        double acc = 0;
        const int seeds = 3;
        for (int s = 0; s < seeds; ++s)
            acc += estimate_norm(white_noise(g, 50 + std::uint64_t(s)), -2.0 - kappa, {}, true)
                       .fitted_alpha;
        acc /= seeds;
        INFO("mean exponent " << acc);
        REQUIRE(std::abs(acc - (-2.0 - kappa)) < 0.2);
    }

    SECTION("fermionic noise reads -3/2+delta") {
        SpaceTimeGrid g{48, 256, 0.0, 1.0 / 256.0};
        BesovEstimate e = fermion_regularity(g, M, delta, FermionObservable::Noise);
        INFO("fitted " << e.fitted_alpha);
        REQUIRE(std::abs(e.fitted_alpha - (-1.5 + delta)) < 0.2);
    }

    SECTION("integrated fermionic noise reads 1/2+delta") {
        SpaceTimeGrid g{48, 256, 0.0, 1.0 / 256.0};
        BesovEstimate e = fermion_regularity(g, M, delta, FermionObservable::Integrated);
        INFO("fitted " << e.fitted_alpha);
        REQUIRE(std::abs(e.fitted_alpha - (0.5 + delta)) < 0.2);
    }

    SECTION("derivative tree reads -1/2+delta") {
        SpaceTimeGrid g{48, 256, 0.0, 1.0 / 256.0};
        BesovEstimate e = fermion_regularity(g, M, delta, FermionObservable::Derivative);
        INFO("fitted " << e.fitted_alpha);
        REQUIRE(std::abs(e.fitted_alpha - (-0.5 + delta)) < 0.2);
    }
}

TEST_CASE("fermion field covariances on mode vectors") {
    ModeSpace ms(2, 3, 0.25, 1.0);
    Filtration filt(ms, 4);
    Algebra alg(ms, filt);
    FermionField ff(alg);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;

    SECTION("omega(Psi(f) Psi(g)) = <kappa U f, g>") {
        // use a small mode space whose reference rep is materialisable
        ModeSpace small(1, 1, 0.25, 1.0);
        Filtration sfilt(small, 4);
        Algebra salg(small, sfilt);
        FermionField sff(salg);
        for (int t = 0; t < 5; ++t) {
            VecC f(small.dim()), g(small.dim());
            for (int i = 0; i < small.dim(); ++i) {
                f[i] = cplx(n01(rng), n01(rng));
                g[i] = cplx(n01(rng), n01(rng));
            }
            cplx lhs = sff.covariance(f, g);
            cplx rhs = small.inner(small.kappa_U(f), g);
            REQUIRE(std::abs(lhs - rhs) < 1e-8 * std::max(1.0, std::abs(rhs)));
        }
    }

    SECTION("omega(psi-bar(f) psi(g)) matches the Fourier-multiplier formula") {
        // Body machinery: <kappa U embed_{34} f, embed_{12} g>_h. Independent
        // route: sum over modes of the bilinear pairing with the multiplier
        // a^{-delta} (M + Dbar(k))^{-1}. (The introduction's delta/2
        // convention differs; the h-inner-product construction is
        // authoritative here.)
        ModeSpace small(1, 3, 0.25, 1.0);
        const int nm = small.dim() / 4;
        for (int t = 0; t < 5; ++t) {
            // scalar C^2-valued mode data for f and g
            MatC f2(nm, 2), g2(nm, 2);
            for (int i = 0; i < nm; ++i)
                for (int c = 0; c < 2; ++c) {
                    f2(i, c) = cplx(n01(rng), n01(rng));
                    g2(i, c) = cplx(n01(rng), n01(rng));
                }
            VecC F = VecC::Zero(small.dim()), G = VecC::Zero(small.dim());
            for (int i = 0; i < nm; ++i)
                for (int c = 0; c < 2; ++c) {
                    F[4 * i + 2 + c] = f2(i, c);
                    G[4 * i + c] = g2(i, c);
                }
            cplx lhs = small.inner(small.kappa_U(F), G);
            // Fourier-side formula (orthonormal coefficients absorb the
            // Gram weight, leaving the unitary symbol)
            cplx rhs(0, 0);
            for (int i = 0; i < nm; ++i) {
                const BasisLabel& L = small.labels()[size_t(4 * i)];
                const int iflip =
                    small.index(L.time_idx, small.freq_index(-L.k1, -L.k2), 0) / 4;
                const double p1 = 2 * kPi * L.k1, p2 = 2 * kPi * L.k2;
                const double s = std::sqrt(p1 * p1 + p2 * p2 + 1.0);
                Eigen::Matrix2cd A =
                    (Eigen::Matrix2cd::Identity() + dirac_symbol(-L.k1, -L.k2)) / s;
                Eigen::Vector2cd fv(f2(iflip, 0), f2(iflip, 1));
                Eigen::Vector2cd gv(g2(i, 0), g2(i, 1));
                rhs += ((A * fv).transpose() * gv)(0);  // bilinear pairing
            }
            REQUIRE(std::abs(lhs - rhs) < 1e-8 * std::max(1.0, std::abs(rhs)));
        }
    }

    SECTION("noise bound over all levels") {
        VecC f(ms.dim());
        for (int i = 0; i < ms.dim(); ++i) f[i] = cplx(n01(rng), n01(rng));
        AlgebraElement pf = ff.field(f);
        for (int n : {2, 4}) REQUIRE(pf.seminorm(n).value <= std::sqrt(2.0) * f.norm() * (1 + 1e-9));
    }

    SECTION("parity bookkeeping") {
        VecC f2(ms.dim() / 4);
        for (int i = 0; i < f2.size(); ++i) f2[i] = cplx(n01(rng), n01(rng));
        AlgebraElement p = ff.psi(f2, 0);
        REQUIRE(p.parity() == Parity::Odd);
        REQUIRE((p * ff.psi_bar(f2, 1)).parity() == Parity::Even);
    }
}

TEST_CASE("mollified linear solution converges") {
    const double kappa = 0.05, nu = 0.5;
    SpaceTimeGrid g{32, 256, 0.0, 1.0 / 256.0};
    Field xi = white_noise(g, 77);
    Field one = convolve(xi, heat_kernel_K(1.0).make_cache(g));
    std::vector<double> eps_list = {0.25, 0.177, 0.125, 0.088};
    std::vector<double> dists;
    for (double e : eps_list) {
        Field one_eps = convolve(xi, heat_kernel_K(1.0, e).make_cache(g));
        Field diff(g);
        diff.data = one.data - one_eps.data;
        dists.push_back(estimate_norm(diff, -kappa - nu, {}, true).value);
    }
    for (size_t i = 1; i < dists.size(); ++i) REQUIRE(dists[i] < dists[i - 1]);
    LineFit f = fit_loglog(eps_list, dists);
    INFO("decay rate " << f.slope);
    REQUIRE(f.slope > 0.1);
}

TEST_CASE("bosonic Wick powers on samples") {
    SpaceTimeGrid g{8, 16, 0.0, 1.0 / 16.0};
    std::vector<std::pair<long, double>> fidx;
    for (int it = 4; it < 10; ++it)
        for (int ix = 1; ix < 4; ++ix)
            for (int iy = 1; iy < 4; ++iy) fidx.push_back({g.idx(it, ix, iy), 1.0});
    const double norm_sq = double(fidx.size()) * g.cell_vol();
    MatC gram(2, 2);
    gram.setConstant(norm_sq);  // f paired with itself

    SECTION("n = 1 reduces to xi(f)") {
        BosonicSample xi(g, 5);
        cplx v = xi.pair(fidx);
        REQUIRE(bosonic_wick_value({v}, MatC::Zero(1, 1)) == v);
    }

    SECTION("Wick square is centred and orthogonal to the first chaos") {
        const int n = 4000;
        cplx mean2(0, 0), cross(0, 0);
        for (int s = 0; s < n; ++s) {
            BosonicSample xi(g, 9000 + std::uint64_t(s));
            cplx v = xi.pair(fidx);
            cplx w2 = bosonic_wick_value({v, v}, gram);
            mean2 += w2;
            cross += w2 * v;
        }
        mean2 /= n;
        cross /= n;
        // Var(xi(f)^2 - ||f||^2) = 2 ||f||^4
        const double s2 = 3.0 * std::sqrt(2.0 / n) * norm_sq;
        REQUIRE(std::abs(mean2) < s2);
        const double s3 = 3.0 * std::sqrt(15.0 / n) * std::pow(norm_sq, 1.5);
        REQUIRE(std::abs(cross) < s3);
    }

    SECTION("mixed sample is bounded by |xi(f)| ||Psi(g)||_n") {
        ModeSpace ms(2, 1, 0.25, 1.0);
        Filtration filt(ms, 4);
        Algebra alg(ms, filt);
        BosonicSample xi(g, 31);
        cplx v = xi.pair(fidx);
        std::mt19937_64 rng(3);
        std::normal_distribution<double> n01;
        std::map<Monomial, cplx> t1;
        VecC gv(ms.dim());
        for (int i = 0; i < ms.dim(); ++i) {
            gv[i] = cplx(n01(rng), n01(rng));
            t1[Monomial{i}] = gv[i];
        }
        AlgebraElement mixed = mixed_wick_sample(alg, {v}, MatC::Zero(1, 1), t1, 1);
        AlgebraElement psi_g = AlgebraElement::field(alg, gv);
        for (int n : {2, 4})
            REQUIRE(mixed.seminorm(n).value <=
                    std::abs(v) * psi_g.seminorm(n).value * (1 + 1e-9));
    }
}
