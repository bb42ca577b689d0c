#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fsq/filtration.hpp"
#include "fsq/kernels.hpp"
#include "fsq/modes.hpp"

using namespace fsq;

namespace {

VecC random_vec(const ModeSpace& ms, std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    VecC v(ms.dim());
    for (int i = 0; i < ms.dim(); ++i) v[i] = cplx(n01(rng), n01(rng));
    return v;
}

}  // namespace

TEST_CASE("mode space construction and Gram") {
    ModeSpace ms(2, 3, 0.25, 1.0);
    REQUIRE(ms.dim() == 2 * 9 * 4);

    SECTION("parameter validation") {
        REQUIRE_THROWS_AS(ModeSpace(2, 3, 0.0, 1.0), std::invalid_argument);
        REQUIRE_THROWS_AS(ModeSpace(2, 3, 0.5, 1.0), std::invalid_argument);
        REQUIRE_THROWS_AS(ModeSpace(2, 3, 0.25, -1.0), std::invalid_argument);
    }

    SECTION("k = 0 weight is (M^2)^{-(1+2 delta)/2}") {
        REQUIRE(ms.weight(0, 0) == Catch::Approx(std::pow(1.0, -0.75)));
        ModeSpace ms2(1, 1, 0.1, 2.0);
        REQUIRE(ms2.weight(0, 0) == Catch::Approx(std::pow(4.0, -0.6)));
    }

    SECTION("distinct Fourier-spinor modes are Gram-orthogonal") {
        MatC g = ms.gram_matrix();
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < 20; ++j)
                if (i != j) REQUIRE(std::abs(g(i, j)) == 0.0);
    }

    SECTION("Gram positivity") {
        MatC g = ms.gram_matrix();
        Eigen::SelfAdjointEigenSolver<MatC> es(g);
        REQUIRE(es.eigenvalues().minCoeff() > 0.0);
    }

    SECTION("orthonormalised basis") {
        std::mt19937_64 rng(7);
        VecC f = random_vec(ms, rng), g = random_vec(ms, rng);
        for (int t = 0; t < 10; ++t) {
            int i = int(rng() % ms.dim()), j = int(rng() % ms.dim());
            VecC ei = VecC::Zero(ms.dim()), ej = VecC::Zero(ms.dim());
            ei[i] = 1;
            ej[j] = 1;
            cplx ip = ms.inner(ei, ej);
            REQUIRE(std::abs(ip - (i == j ? cplx(1, 0) : cplx(0, 0))) < 1e-14);
        }
        // Hermitian symmetry
        REQUIRE(std::abs(ms.inner(f, g) - std::conj(ms.inner(g, f))) < 1e-12);
    }
}

TEST_CASE("weight at k=(1,0) against direct quadrature of the kernel pairing") {
    // delta = 0.25, M = 1: weight (1 + 4 pi^2)^{-0.75}. Oracle: pair the mode
    // e^{2 pi i x_1} against Q * e^{2 pi i x_1} by real-space quadrature of
    // the periodised Bessel kernel (origin cell by polar sub-integration).
    const double delta = 0.25, M = 1.0;
    ModeSpace ms(1, 3, delta, M);
    const double analytic = std::pow(1.0 + 4.0 * kPi * kPi, -0.75);
    REQUIRE(ms.weight(1, 0) == Catch::Approx(analytic).epsilon(1e-12));

    // quadrature oracle: Q-hat(k) = 2 pi \int_0^inf Q(r) J0(2 pi |k| r) r dr.
    // The singular end is handled by the substitution r = s^2.
    const double kabs = 1.0;
    auto integrand = [&](double r) {
        return bessel_Q_analytic(r, M, delta) * std::cyl_bessel_j(0.0, 2.0 * kPi * kabs * r) * r;
    };
    double acc = 0.0;
    {
        const int n1 = 4000;  // [0, 0.25] via r = s^2
        const double smax = 0.5;
        for (int i = 0; i < n1; ++i) {
            const double s = (i + 0.5) * smax / n1;
            acc += integrand(s * s) * 2.0 * s * (smax / n1);
        }
        const int n2 = 60000;  // [0.25, 15]
        for (int i = 0; i < n2; ++i) {
            const double r = 0.25 + (i + 0.5) * (15.0 - 0.25) / n2;
            acc += integrand(r) * ((15.0 - 0.25) / n2);
        }
        acc *= 2.0 * kPi;
    }
    REQUIRE(std::abs(acc - analytic) / analytic < 0.01);
}

TEST_CASE("kappa and U") {
    ModeSpace ms(2, 3, 0.2, 1.3);
    std::mt19937_64 rng(11);
    VecC f = random_vec(ms, rng), g = random_vec(ms, rng);

    SECTION("kappa^2 = 1 and antiunitarity") {
        REQUIRE((ms.kappa(ms.kappa(f)) - f).norm() < 1e-14);
        REQUIRE(std::abs(ms.inner(ms.kappa(f), ms.kappa(g)) - ms.inner(g, f)) < 1e-12);
    }

    SECTION("U unitary") {
        REQUIRE(std::abs(ms.apply_U(f).norm() - f.norm()) < 1e-10);
        REQUIRE(std::abs(ms.inner(ms.apply_U(f), ms.apply_U(g)) - ms.inner(f, g)) < 1e-10);
    }

    SECTION("kappa-antisymmetry: <kappa U f, g> = -<kappa U g, f>") {
        cplx a = ms.inner(ms.kappa_U(f), g);
        cplx b = ms.inner(ms.kappa_U(g), f);
        REQUIRE(std::abs(a + b) < 1e-10);
    }

    SECTION("(kappa U)^2 = -1 on every basis vector") {
        for (int i = 0; i < ms.dim(); ++i) {
            VecC e = VecC::Zero(ms.dim());
            e[i] = 1;
            REQUIRE((ms.kappa_U(ms.kappa_U(e)) + e).norm() < 1e-10);
        }
    }
}

TEST_CASE("filtration") {
    ModeSpace ms(2, 3, 0.25, 1.0);
    Filtration filt(ms, 8);

    SECTION("chain structure and dimensions") {
        REQUIRE(filt.depth() >= 3);
        int prev = 0;
        for (int c = 0; c < filt.depth(); ++c) {
            REQUIRE(filt.dim_of(c) > prev);
            prev = filt.dim_of(c);
        }
        REQUIRE(filt.top_dim(8) == 8);
        // nesting: earlier chain columns are a prefix of later ones
        for (int c = 0; c + 1 < filt.depth(); ++c) {
            const MatC& a = filt.subspace(c);
            const MatC& b = filt.subspace(c + 1);
            REQUIRE((b.leftCols(a.cols()) - a).norm() < 1e-14);
        }
    }

    SECTION("kappa U invariance within 1e-10") {
        for (int c = 0; c < filt.depth(); ++c) REQUIRE(filt.invariance_defect(c) < 1e-10);
    }

    SECTION("P_b commutes with kappa U") {
        std::mt19937_64 rng(3);
        VecC f = random_vec(ms, rng);
        for (int c = 0; c < filt.depth(); ++c) {
            VecC lhs = filt.project(c, ms.kappa_U(f));
            VecC rhs = ms.kappa_U(filt.project(c, f));
            REQUIRE((lhs - rhs).norm() < 1e-10 * std::max(1.0, f.norm()));
        }
    }

    SECTION("top space of Gamma_n has dimension n for even n") {
        for (int n = 2; n <= 8; n += 2) REQUIRE(filt.top_dim(n) == n);
    }
}

TEST_CASE("scaling sanity: h-norm of a fixed smooth function is cutoff-stable") {
    // periodised Gaussian bump times a box in time; coefficients decay fast
    auto h_norm_sq = [](int n_space) {
        ModeSpace ms(1, n_space, 0.25, 1.0, 0.0, 1.0);
        double acc = 0.0;
        for (int i = 0; i < ms.dim(); ++i) {
            const BasisLabel& L = ms.labels()[size_t(i)];
            if (L.spinor != 0) continue;
            // f-hat(k) of sum_j exp(-|x+j|^2 * 20) is (pi/20) exp(-pi^2 |k|^2 / 20)
            const double fk = (kPi / 20.0) *
                              std::exp(-kPi * kPi * double(L.k1 * L.k1 + L.k2 * L.k2) / 20.0);
            // orthonormal coefficient = sqrt(w) * fhat ... raw coeff fk over
            // basis with norm sqrt(w): coefficient in ON basis = fk*sqrt(w)
            acc += ms.weight(L.k1, L.k2) * fk * fk;
        }
        return acc;
    };
    const double a = h_norm_sq(7), b = h_norm_sq(13);
    REQUIRE(std::abs(a - b) / b < 0.01);
}

TEST_CASE("mode space JSON manifest") {
    ModeSpace ms(2, 3, 0.25, 1.0);
    auto j = ms.manifest();
    REQUIRE(j["schema"] == "fsq.mode_space.v1");
    REQUIRE(j["dim"] == ms.dim());
    REQUIRE(j["basis"].size() == size_t(ms.dim()));
    REQUIRE(j.contains("gram_hash"));
}
