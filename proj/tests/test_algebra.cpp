#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fsq/algebra.hpp"

using namespace fsq;

namespace {

struct Ctx {
    ModeSpace ms;
    Filtration filt;
    Algebra alg;
    Ctx(int n_time, int n_space, int depth, int cap = 6)
        : ms(n_time, n_space, 0.25, 1.0), filt(ms, depth), alg(ms, filt, cap) {}
};

VecC random_vec(const ModeSpace& ms, std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    VecC v(ms.dim());
    for (int i = 0; i < ms.dim(); ++i) v[i] = cplx(n01(rng), n01(rng));
    return v;
}

AlgebraElement random_element(const Algebra& alg, std::mt19937_64& rng, int degree) {
    AlgebraElement a = AlgebraElement::unit(alg, cplx(0.3, -0.1));
    for (int d = 1; d <= degree; ++d) {
        AlgebraElement m = AlgebraElement::field(alg, random_vec(alg.mode_space(), rng));
        for (int t = 1; t < d; ++t)
            m = m * AlgebraElement::field(alg, random_vec(alg.mode_space(), rng));
        a += m;
    }
    return a;
}

}  // namespace

TEST_CASE("field generators") {
    Ctx c(2, 1, 8);  // dim 8, chain up to the full space
    std::mt19937_64 rng(2);

    SECTION("Psi(0) = 0 and linearity") {
        AlgebraElement z = AlgebraElement::field(c.alg, VecC::Zero(c.ms.dim()));
        REQUIRE(z.empty());
        VecC f = random_vec(c.ms, rng), g = random_vec(c.ms, rng);
        AlgebraElement lhs = AlgebraElement::field(c.alg, f + cplx(0, 2) * g);
        AlgebraElement rhs =
            AlgebraElement::field(c.alg, f) + AlgebraElement::field(c.alg, g) * cplx(0, 2);
        REQUIRE((lhs - rhs).prune().empty());
    }

    SECTION("Psi supercommutes under every pi_b") {
        VecC f = random_vec(c.ms, rng), g = random_vec(c.ms, rng);
        AlgebraElement pf = AlgebraElement::field(c.alg, f);
        AlgebraElement pg = AlgebraElement::field(c.alg, g);
        AlgebraElement anti = pf * pg + pg * pf;
        for (int ch = 0; ch < c.filt.depth(); ++ch)
            REQUIRE(op_norm(anti.evaluate(ch)) < 1e-10 * f.norm() * g.norm());
    }

    SECTION("noise bound ||pi_b(Psi(f))|| <= sqrt(2) ||f||") {
        for (int t = 0; t < 5; ++t) {
            VecC f = random_vec(c.ms, rng);
            AlgebraElement pf = AlgebraElement::field(c.alg, f);
            for (int ch = 0; ch < c.filt.depth(); ++ch)
                REQUIRE(op_norm(pf.evaluate(ch)) <= std::sqrt(2.0) * f.norm() * (1 + 1e-10));
        }
    }
}

TEST_CASE("products") {
    Ctx c(2, 1, 8);
    std::mt19937_64 rng(3);
    VecC e1 = VecC::Zero(c.ms.dim()), e2 = VecC::Zero(c.ms.dim());
    e1[0] = 1;
    e2[1] = 1;
    AlgebraElement p1 = AlgebraElement::field(c.alg, e1);
    AlgebraElement p2 = AlgebraElement::field(c.alg, e2);

    SECTION("Grassmann nilpotency and sign rule") {
        REQUIRE((p1 * p1).prune().empty());
        REQUIRE(((p1 * p2) + (p2 * p1)).prune().empty());
    }

    SECTION("pi_b is multiplicative (dense-matrix oracle)") {
        for (int t = 0; t < 4; ++t) {
            AlgebraElement a = random_element(c.alg, rng, 2);
            AlgebraElement b = random_element(c.alg, rng, 2);
            AlgebraElement ab = a * b;
            for (int ch = 0; ch < c.filt.depth(); ++ch) {
                MatC lhs = ab.evaluate(ch);
                MatC rhs = a.evaluate(ch) * b.evaluate(ch);
                REQUIRE((lhs - rhs).norm() < 1e-12 * std::max(1.0, rhs.norm()));
            }
        }
    }

    SECTION("multiplicativity on 3-letter words") {
        for (int t = 0; t < 4; ++t) {
            VecC f = random_vec(c.ms, rng), g = random_vec(c.ms, rng), h = random_vec(c.ms, rng);
            AlgebraElement w = AlgebraElement::field(c.alg, f) *
                               AlgebraElement::field(c.alg, g) * AlgebraElement::field(c.alg, h);
            for (int ch = 0; ch < c.filt.depth(); ++ch) {
                const FockRep& rep = c.alg.rep(ch);
                MatC direct = rep.field(f) * rep.field(g) * rep.field(h);
                REQUIRE((w.evaluate(ch) - direct).norm() < 1e-12 * std::max(1.0, direct.norm()));
            }
        }
    }

    SECTION("pi_b(1) is the identity") {
        AlgebraElement one = AlgebraElement::unit(c.alg);
        for (int ch = 0; ch < c.filt.depth(); ++ch) {
            const int dim = c.alg.rep(ch).dim();
            REQUIRE((one.evaluate(ch) - MatC::Identity(dim, dim)).norm() == 0.0);
        }
    }

    SECTION("supercommutativity of homogeneous elements under pi_b") {
        std::vector<VecC> vs;
        for (int i = 0; i < 4; ++i) vs.push_back(random_vec(c.ms, rng));
        AlgebraElement odd3 = AlgebraElement::field(c.alg, vs[0]) *
                              AlgebraElement::field(c.alg, vs[1]) *
                              AlgebraElement::field(c.alg, vs[2]);
        AlgebraElement odd1 = AlgebraElement::field(c.alg, vs[3]);
        AlgebraElement even = AlgebraElement::field(c.alg, vs[0]) *
                              AlgebraElement::field(c.alg, vs[1]);
        REQUIRE(odd3.parity() == Parity::Odd);
        REQUIRE(even.parity() == Parity::Even);
        AlgebraElement comm_oo = odd3 * odd1 + odd1 * odd3;   // odd*odd anticommute
        AlgebraElement comm_eo = even * odd1 - odd1 * even;   // even*odd commute
        for (int ch = 0; ch < c.filt.depth(); ++ch) {
            REQUIRE(op_norm(comm_oo.evaluate(ch)) < 1e-9);
            REQUIRE(op_norm(comm_eo.evaluate(ch)) < 1e-9);
        }
    }

    SECTION("degree cap records dropped mass") {
        Ctx capped(2, 1, 4, 2);
        TruncationLedger led;
        AlgebraElement a = random_element(capped.alg, rng, 2);
        AlgebraElement b = random_element(capped.alg, rng, 2);
        AlgebraElement ab = a.mul(b, &led);
        REQUIRE(ab.max_degree() <= 2);
        REQUIRE(led.dropped_mass > 0.0);
        REQUIRE(led.retained_mass > 0.0);
    }
}

TEST_CASE("seminorms") {
    Ctx c(2, 1, 8);
    std::mt19937_64 rng(5);

    SECTION("||1||_n = 1") {
        AlgebraElement one = AlgebraElement::unit(c.alg);
        for (int n = 2; n <= 8; n += 2) REQUIRE(one.seminorm(n).value == Catch::Approx(1.0));
    }

    SECTION("C*-identity via matrices") {
        for (int t = 0; t < 3; ++t) {
            AlgebraElement a = random_element(c.alg, rng, 3);
            for (int n : {2, 4, 6, 8}) {
                double best_aa = 0, best_a = 0;
                for (int ch : c.filt.gamma(n)) {
                    MatC m = a.evaluate(ch);
                    best_a = std::max(best_a, op_norm(m));
                    best_aa = std::max(best_aa, op_norm(MatC(m.adjoint() * m)));
                }
                REQUIRE(std::abs(best_aa - best_a * best_a) <
                        1e-9 * std::max(1.0, best_a * best_a));
            }
        }
    }

    SECTION("m-convexity ||ab||_n <= ||a||_n ||b||_n") {
        for (int t = 0; t < 3; ++t) {
            AlgebraElement a = random_element(c.alg, rng, 2);
            AlgebraElement b = random_element(c.alg, rng, 2);
            AlgebraElement ab = a * b;
            for (int n : {2, 4, 6, 8}) {
                double va = a.seminorm(n).value, vb = b.seminorm(n).value;
                REQUIRE(ab.seminorm(n).value <= va * vb * (1 + 1e-9));
            }
        }
    }

    SECTION("monotone in n, and per-subspace monotone along the chain") {
        for (int t = 0; t < 3; ++t) {
            AlgebraElement a = random_element(c.alg, rng, 3);
            double prev = 0;
            for (int n = 2; n <= 8; n += 2) {
                double v = a.seminorm(n).value;
                REQUIRE(v >= prev - 1e-12);
                prev = v;
            }
            // the chain-top shortcut assumption: ||pi_b(a)|| grows along the chain
            double prev_b = 0;
            for (int ch = 0; ch < c.filt.depth(); ++ch) {
                double v = op_norm(a.evaluate(ch));
                REQUIRE(v >= prev_b - 1e-9 * std::max(1.0, prev_b));
                prev_b = v;
            }
        }
    }
}

TEST_CASE("digamma") {
    Ctx c(2, 1, 8);
    std::mt19937_64 rng(7);
    const FockRep& ref = c.alg.reference_rep();

    SECTION("digamma(Psi(f)) is the field matrix") {
        VecC f = random_vec(c.ms, rng);
        AlgebraElement pf = AlgebraElement::field(c.alg, f);
        REQUIRE((pf.digamma() - ref.field(f)).norm() < 1e-12 * f.norm());
    }

    SECTION("central pairs map to scalars") {
        VecC u = random_vec(c.ms, rng), v = random_vec(c.ms, rng);
        AlgebraElement ct = AlgebraElement::central_pair(c.alg, u, v);
        MatC m = ct.digamma();
        cplx want = c.ms.inner(u, v);
        REQUIRE((m - want * MatC::Identity(ref.dim(), ref.dim())).norm() < 1e-10);
        // and the matrix-level anticommutator equals the same scalar
        MatC ac = ref.annihilation(u) * ref.creation(v) + ref.creation(v) * ref.annihilation(u);
        REQUIRE((ac - want * MatC::Identity(ref.dim(), ref.dim())).norm() < 1e-10);
    }

    SECTION("||digamma(a)|| <= sup_n ||a||_n (chain reaching the full space)") {
        for (int t = 0; t < 3; ++t) {
            AlgebraElement a = random_element(c.alg, rng, 2);
            REQUIRE(op_norm(a.digamma()) <= a.seminorm(c.ms.dim()).value * (1 + 1e-9));
        }
    }

    SECTION("central elements commute with everything at matrix level") {
        AlgebraElement a = random_element(c.alg, rng, 3);
        VecC f = random_vec(c.ms, rng), g = random_vec(c.ms, rng);
        for (int ch = 0; ch < c.filt.depth(); ++ch) {
            const FockRep& rep = c.alg.rep(ch);
            MatC ac = rep.creation(f) * rep.annihilation(g) +
                      rep.annihilation(g) * rep.creation(f);
            MatC am = a.evaluate(ch);
            REQUIRE((am * ac - ac * am).norm() < 1e-10 * std::max(1.0, am.norm() * ac.norm()));
        }
    }
}

TEST_CASE("wick powers") {
    Ctx c(2, 1, 8);
    std::mt19937_64 rng(11);

    SECTION("rank 0 and 1 bases") {
        REQUIRE(wick_power(c.alg, {{Monomial{}, cplx(2.5, 0)}}).dump() ==
                AlgebraElement::unit(c.alg, cplx(2.5, 0)).dump());
        VecC e3 = VecC::Zero(c.ms.dim());
        e3[3] = 1;
        REQUIRE(wick_power(c.alg, {{Monomial{3}, cplx(1, 0)}}).dump() ==
                AlgebraElement::field(c.alg, e3).dump());
    }

    SECTION("Wick squares are centred (vacuum-expectation oracle)") {
        for (int t = 0; t < 5; ++t) {
            VecC f = random_vec(c.ms, rng), g = random_vec(c.ms, rng);
            AlgebraElement w2 = wick_square_pair(c.alg, f, g);
            const FockRep& ref = c.alg.reference_rep();
            cplx om = ref.vacuum_expect(w2.digamma());
            REQUIRE(std::abs(om) < 1e-10 * f.norm() * g.norm());
        }
    }

    SECTION("rank exceeding the degree cap is rejected") {
        Ctx capped(2, 1, 4, 2);
        REQUIRE_THROWS_AS(wick_power(capped.alg, {{Monomial{0, 1, 2}, cplx(1, 0)}}),
                          std::invalid_argument);
    }

    SECTION("L2 identity: Psi^{<>n} equals a creation word in vacuum L2, n <= 3") {
        const FockRep& ref = c.alg.reference_rep();
        for (int n = 1; n <= 3; ++n) {
            std::vector<VecC> fs;
            for (int i = 0; i < n; ++i) fs.push_back(random_vec(c.ms, rng));
            // antisymmetric tensor of f1 ^ ... ^ fn over increasing tuples
            std::map<Monomial, cplx> tensor;
            std::vector<int> idx(static_cast<size_t>(n), 0);
            std::function<void(int, int)> rec = [&](int pos, int start) {
                if (pos == n) {
                    MatC minor(n, n);
                    for (int r = 0; r < n; ++r)
                        for (int s = 0; s < n; ++s) minor(r, s) = fs[size_t(s)][idx[size_t(r)]];
                    cplx det = minor.determinant();
                    if (std::abs(det) > 1e-14)
                        tensor[Monomial(idx.begin(), idx.end())] = det;
                    return;
                }
                for (int i = start; i < c.ms.dim(); ++i) {
                    idx[size_t(pos)] = i;
                    rec(pos + 1, i + 1);
                }
            };
            rec(0, 0);
            AlgebraElement w = wick_power(c.alg, tensor);
            VecC lhs = w.digamma() * ref.vacuum();
            VecC rhs = ref.vacuum();
            for (int i = n - 1; i >= 0; --i) rhs = ref.creation(fs[size_t(i)]) * rhs;
            REQUIRE((lhs - rhs).norm() < 1e-10 * std::max(1.0, rhs.norm()));
        }
    }

    SECTION("wick bound report: n = 1 ratio is sqrt(2), dimension-free") {
        VecC f = random_vec(c.ms, rng);
        std::map<Monomial, cplx> t1;
        for (int i = 0; i < c.ms.dim(); ++i)
            if (std::abs(f[i]) > 0) t1[Monomial{i}] = f[i];
        for (int ch = 0; ch < c.filt.depth(); ++ch) {
            auto rep = wick_norm_bound_check(c.alg, t1, 1, ch);
            REQUIRE(rep.ratio <= std::sqrt(2.0) * (1 + 1e-9));
        }
        // at the deepest level the ratio is sqrt(2) exactly
        auto deep = wick_norm_bound_check(c.alg, t1, 1, c.filt.depth() - 1);
        REQUIRE(deep.ratio == Catch::Approx(std::sqrt(2.0)).epsilon(1e-6));
    }

    SECTION("wick bound, rank 2: stable constant and the lower bound") {
        std::normal_distribution<double> n01;
        auto random_tensor = [&](int ch) {
            // random tensor supported on the chain subspace's mode span
            std::map<Monomial, cplx> tensor;
            for (int i = 0; i < c.ms.dim(); ++i)
                for (int j = i + 1; j < c.ms.dim(); ++j) {
                    VecC ei = VecC::Zero(c.ms.dim()), ej = VecC::Zero(c.ms.dim());
                    ei[i] = 1;
                    ej[j] = 1;
                    if (c.filt.coords(ch, ei).norm() < 1e-9 ||
                        c.filt.coords(ch, ej).norm() < 1e-9)
                        continue;
                    tensor[Monomial{i, j}] = cplx(n01(rng), n01(rng));
                }
            return tensor;
        };
        auto sat_tensor = [&](int ch) {
            // symplectic pair tensor over the chain element's basis columns;
            // saturates the (1+dim)^{1/2} growth of the bound
            const MatC& b = c.filt.subspace(ch);
            std::map<Monomial, cplx> tensor;
            for (int l = 0; l + 1 < b.cols(); l += 2) {
                VecC u = b.col(l), v = b.col(l + 1);
                for (int i = 0; i < c.ms.dim(); ++i)
                    for (int j = i + 1; j < c.ms.dim(); ++j) {
                        cplx coef = u[i] * v[j] - u[j] * v[i];
                        if (std::abs(coef) > 1e-14) tensor[Monomial{i, j}] += coef;
                    }
            }
            return tensor;
        };
        double cmin = 1e9, cmax = 0;
        for (int ch = 0; ch < std::min(4, c.filt.depth()); ++ch) {
            double best = wick_norm_bound_check(c.alg, sat_tensor(ch), 2, ch, ch).ratio;
            for (int t = 0; t < 50; ++t) {
                auto rep = wick_norm_bound_check(c.alg, random_tensor(ch), 2, ch, ch);
                best = std::max(best, rep.ratio);
                REQUIRE(rep.lower_gap > -1e-9);
            }
            cmin = std::min(cmin, best);
            cmax = std::max(cmax, best);
        }
        INFO("empirical C2 range [" << cmin << ", " << cmax << "]");
        REQUIRE(cmax / cmin < 1.5);
        // lower bound at the deepest chain element on a handful of tensors
        for (int t = 0; t < 5; ++t) {
            auto rep = wick_norm_bound_check(c.alg, random_tensor(c.filt.depth() - 1), 2,
                                             c.filt.depth() - 1);
            REQUIRE(rep.lower_gap > -1e-9);
        }
    }

    SECTION("norm-growth diagnostic (reported, not asserted)") {
        std::map<Monomial, cplx> fid;
        for (int j = 0; j + 1 < c.ms.dim(); j += 2) fid[Monomial{j, j + 1}] = cplx(1, 0);
        double nrm = tensor_norm(fid, 2);
        for (auto& [m, v] : fid) v /= nrm;
        AlgebraElement w = wick_power(c.alg, fid);
        std::string msg = "||Psi^{<>2}(F_id)||_n:";
        double prev = 0;
        for (int n = 2; n <= 8; n += 2) {
            double v = w.seminorm(n).value;
            msg += " " + std::to_string(v);
            REQUIRE(v >= prev - 1e-9);
            prev = v;
        }
        WARN(msg);
    }
}

TEST_CASE("L2 inner products") {
    Ctx c(2, 1, 8);  // dim 8
    std::mt19937_64 rng(13);
    AlgebraElement one = AlgebraElement::unit(c.alg);

    SECTION("l2(1,1) = 1") { REQUIRE(std::abs(l2_inner_vacuum(one, one) - cplx(1, 0)) < 1e-14); }

    SECTION("vacuum null ideal is nontrivial; omega_rho resolves it") {
        VecC u = random_vec(c.ms, rng), v = random_vec(c.ms, rng);
        // central extension kernel element: [alpha(u), alpha^dag(v)]_+ - <u,v> 1
        AlgebraElement a =
            AlgebraElement::central_pair(c.alg, u, v) - AlgebraElement::unit(c.alg, c.ms.inner(u, v));
        bool nonzero_somewhere = false;
        for (int ch = 0; ch < c.filt.depth() - 1; ++ch)
            if (op_norm(a.evaluate(ch)) > 1e-6) nonzero_somewhere = true;
        REQUIRE(nonzero_somewhere);
        REQUIRE(std::abs(l2_inner_vacuum(a, a)) < 1e-12);
    }

    SECTION("omega_rho positivity on random elements") {
        FockRep rep(c.ms, c.filt.subspace(0));
        ArakiWyssState aw(rep, 0.25);
        for (int t = 0; t < 5; ++t) {
            AlgebraElement a = random_element(c.alg, rng, 2);
            cplx v = l2_inner_araki_wyss(a, a, aw);
            REQUIRE(v.real() > 1e-10);
            REQUIRE(std::abs(v.imag()) < 1e-9 * v.real());
        }
    }
}

TEST_CASE("fermionic Wick rule") {
    Ctx c(2, 1, 8);
    std::mt19937_64 rng(17);

    SECTION("two-point covariance") {
        VecC f = random_vec(c.ms, rng), g = random_vec(c.ms, rng);
        auto rep = wick_rule_check(c.alg, {f, g});
        cplx want = c.ms.inner(c.ms.kappa_U(f), g);
        REQUIRE(std::abs(rep.matrix_value - want) < 1e-10 * std::max(1.0, std::abs(want)));
        REQUIRE(rep.abs_error < 1e-10 * std::max(1.0, std::abs(want)));
        // antisymmetry
        auto swapped = wick_rule_check(c.alg, {g, f});
        REQUIRE(std::abs(rep.matrix_value + swapped.matrix_value) < 1e-10);
    }

    SECTION("4-point pairing expansion") {
        std::vector<VecC> f;
        for (int i = 0; i < 4; ++i) f.push_back(random_vec(c.ms, rng));
        auto rep = wick_rule_check(c.alg, f);
        auto c2 = [&](int i, int j) {
            return c.ms.inner(c.ms.kappa_U(f[size_t(i)]), f[size_t(j)]);
        };
        cplx want = c2(0, 1) * c2(2, 3) - c2(0, 2) * c2(1, 3) + c2(0, 3) * c2(1, 2);
        REQUIRE(std::abs(rep.matrix_value - want) < 1e-8 * std::max(1.0, std::abs(want)));
        REQUIRE(rep.abs_error < 1e-8 * std::max(1.0, std::abs(want)));
    }

    SECTION("6- and 8-point against the matrix oracle") {
        for (int n : {6, 8}) {
            std::vector<VecC> f;
            for (int i = 0; i < n; ++i) f.push_back(random_vec(c.ms, rng) / 2.0);
            auto rep = wick_rule_check(c.alg, f);
            REQUIRE(rep.abs_error < 1e-8 * std::max(1.0, std::abs(rep.matrix_value)));
        }
    }
}

TEST_CASE("dump format") {
    Ctx c(1, 1, 2);
    VecC f = VecC::Zero(c.ms.dim());
    f[1] = cplx(0.5, -2.0);
    AlgebraElement a = AlgebraElement::field(c.alg, f) + AlgebraElement::unit(c.alg, cplx(3, 0));
    REQUIRE(a.dump() == " : 3,0\n1 : 0.5,-2\n");
}
