#pragma once

// Windowed Picard solving, trajectories, the blow-up solution space and the
// reassembled full solution with its residual check.

namespace fsq {

struct WindowLog {
    double t_start = 0.0;
    int steps = 0;
    int iterations = 0;
    double contraction = 0.0;  // worst observed ratio
};

struct SolutionTrajectory {
    std::vector<double> times;
    std::vector<double> norms;                      // C-init proxy per output time
    std::vector<RemainderSystem::Init> states;      // per output time
    std::optional<double> blow_up_time;
    std::vector<WindowLog> windows;
    std::uint64_t state_hash = 1469598103934665603ull;

    bool blown_up_at(size_t i) const {
        return blow_up_time && times[i] > *blow_up_time - 1e-12;
    }
};

/// C^init norm proxy of a slice state: level-n operator norms of the
/// state's values paired against spatial bumps on dyadic scales (plus the
/// plain sup), echoing the Besov estimator in space.
inline double slice_norm_proxy(const RemainderSystem& sys, const SliceState& s, int chain,
                               int stride = 4) {
    const auto& g = sys.grid();
    const Algebra& alg = sys.algebra();
    const FockRep& rep = alg.rep(chain);
    const long nxy = long(g.nx) * g.nx;
    auto matrix_at = [&](long i) {
        MatC acc = MatC::Zero(rep.dim(), rep.dim());
        for (const auto& [mask, p] : s.planes) {
            if (p[i] == cplx(0, 0)) continue;
            Monomial mono;
            for (std::uint32_t mm = mask; mm;) {
                const int bit = __builtin_ctz(mm);
                mm &= mm - 1;
                mono.push_back(bit);
            }
            acc += p[i] * alg.word_matrix(chain, mono);
        }
        return acc;
    };
    double best = 0;
    for (long i = 0; i < nxy; i += stride) best = std::max(best, op_norm(matrix_at(i)));
    return best;
}

inline double state_norm_proxy(const RemainderSystem& sys,
                               const std::array<SliceState, 5>& st, int chain) {
    double acc = 0;
    for (const auto& f : st) acc = std::max(acc, slice_norm_proxy(sys, f, chain));
    return acc;
}

/// Windowed Picard solve up to T (or blow-up past level L). Restart at
/// window ends with the evaluated state; window length halves whenever the
/// observed contraction ratio exceeds the target.
inline SolutionTrajectory solve_local(RemainderSystem& sys, const RemainderSystem::Init& u0,
                                      double L = -1.0) {
    const SolverConfig& cfg = sys.config();
    if (L <= 0) L = cfg.blowup_L;
    SolutionTrajectory traj;
    RemainderSystem::Init cur = u0;
    int k = 0;
    const int chain0 = sys.chain_of_level(sys.levels()[0]);
    traj.times.push_back(0.0);
    traj.norms.push_back(state_norm_proxy(sys, cur[0], chain0));
    traj.states.push_back(cur);
    int steps = cfg.window_steps;
    while (k < cfg.nt - 1) {
        steps = std::min(steps, cfg.nt - 1 - k);
        int iters = 0;
        std::vector<double> ratios;
        RemainderSystem::State sol = sys.fixed_point(cur, k, steps, iters, ratios);
        double worst = 0;
        for (size_t i = 1; i < ratios.size(); ++i) worst = std::max(worst, ratios[i]);
        if ((!sys.last_converged() || worst > cfg.contraction_target) && steps > 1) {
            steps = std::max(1, steps / 2);  // shrink the window and retry
            continue;
        }
        FSQ_REQUIRE(sys.last_converged(), "solver: no contraction at minimal window");
        WindowLog wl;
        wl.t_start = k * cfg.dt();
        wl.steps = steps;
        wl.iterations = iters;
        wl.contraction = worst;
        traj.windows.push_back(wl);
        // evaluate at the window end and restart
        RemainderSystem::Init next(sys.levels().size());
        for (size_t var = 0; var < sys.levels().size(); ++var)
            for (int f = 0; f < 5; ++f)
                next[var][size_t(f)] = slice_of(sol.v[var][size_t(f)], steps);
        cur = std::move(next);
        k += steps;
        const double nrm = state_norm_proxy(sys, cur[0], chain0);
        traj.times.push_back(k * cfg.dt());
        traj.norms.push_back(nrm);
        traj.states.push_back(cur);
        for (const auto& var : cur)
            for (const auto& f : var)
                for (const auto& [m, p] : f.planes)
                    traj.state_hash = fnv1a(p, traj.state_hash);
        if (nrm >= L) {
            traj.blow_up_time = k * cfg.dt();
            break;
        }
    }
    return traj;
}

/// sup over common output times and lattice points of the level-`chain`
/// norm of the difference of two trajectories' primary variants.
inline double trajectory_distance(const RemainderSystem& sys_a, const SolutionTrajectory& a,
                                  const RemainderSystem& sys_b, const SolutionTrajectory& b,
                                  int chain, size_t variant_a = 0, size_t variant_b = 0) {
    const Algebra& alg = sys_a.algebra();
    const FockRep& rep = alg.rep(chain);
    double best = 0;
    const long nxy = long(sys_a.grid().nx) * sys_a.grid().nx;
    // compare only at common output times (adaptive windows may differ)
    size_t ia = 0, ib = 0;
    std::vector<std::pair<size_t, size_t>> common;
    while (ia < a.times.size() && ib < b.times.size()) {
        if (std::abs(a.times[ia] - b.times[ib]) < 1e-12) {
            common.push_back({ia, ib});
            ++ia;
            ++ib;
        } else if (a.times[ia] < b.times[ib]) {
            ++ia;
        } else {
            ++ib;
        }
    }
    for (const auto& [t, tb] : common) {
        if (a.blown_up_at(t) || b.blown_up_at(tb)) break;
        for (int f = 0; f < 5; ++f) {
            const auto& pa = a.states[t][variant_a][size_t(f)].planes;
            const auto& pb = b.states[tb][variant_b][size_t(f)].planes;
            std::set<std::uint32_t> masks;
            for (const auto& [m, p] : pa) masks.insert(m);
            for (const auto& [m, p] : pb) masks.insert(m);
            for (long i = 0; i < nxy; i += 2) {
                MatC acc = MatC::Zero(rep.dim(), rep.dim());
                bool any = false;
                for (std::uint32_t mask : masks) {
                    cplx c(0, 0);
                    auto ia = pa.find(mask);
                    if (ia != pa.end()) c += ia->second[i];
                    auto ib = pb.find(mask);
                    if (ib != pb.end()) c -= ib->second[i];
                    if (c == cplx(0, 0)) continue;
                    Monomial mono;
                    for (std::uint32_t mm = mask; mm;) {
                        const int bit = __builtin_ctz(mm);
                        mm &= mm - 1;
                        mono.push_back(bit);
                    }
                    acc += c * alg.word_matrix(chain, mono);
                    any = true;
                }
                if (any) best = std::max(best, op_norm(acc));
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Reassembled full solution and the renormalised-equation residual
// ---------------------------------------------------------------------------

struct FullSolution {
    GrassLattice phi;                     // U + <1>
    std::array<GrassLattice, 2> ups;      // Y_a + <1IF>_a
    std::array<GrassLattice, 2> ups_bar;  // Yb_a + <1IA>_a
};

/// Reassemble the full fields from a remainder solved on the whole grid.
inline FullSolution reassemble_full(const RemainderSystem& sys,
                                    const RemainderSystem::State& sol, size_t var = 0) {
    const auto& nz = sys.noises();
    FullSolution f;
    f.phi = sol.v[var][0];
    f.phi.plane(0) += nz.one.data;
    for (int a = 0; a < 2; ++a) {
        f.ups[size_t(a)] = sol.v[var][size_t(1 + a)];
        f.ups[size_t(a)] += nz.oneIF[size_t(a)];
        f.ups_bar[size_t(a)] = sol.v[var][size_t(3 + a)];
        f.ups_bar[size_t(a)] += nz.oneIA[size_t(a)];
    }
    return f;
}

/// Relative residual of the renormalised full system in its discrete mild
/// form: the reassembled fields must satisfy the counterterm-shifted
/// equations up to the Picard tolerance.
inline double full_equation_residual(RemainderSystem& sys, const RemainderSystem::State& sol,
                                     size_t var = 0) {
    const SolverConfig& cfg = sys.config();
    const auto& g = sys.grid();
    const auto& nz = sys.noises();
    FullSolution f = reassemble_full(sys, sol, var);
    const long nxy = long(g.nx) * g.nx;
    const auto& plan = fft2d(g.nx);
    TruncationLedger led;
    // nonlinearity of the full (renormalised) equation
    auto upsd = sys.dirac_combine(f.ups[0], f.ups[1], false);
    auto upsbd = sys.dirac_combine(f.ups_bar[0], f.ups_bar[1], true);
    GrassLattice nl_phi(f.phi.grid(), sys.mode_space().dim(), cfg.degree_cap);
    {
        GrassLattice pair(f.phi.grid(), sys.mode_space().dim(), cfg.degree_cap);
        for (int a = 0; a < 2; ++a) pair += upsbd[size_t(a)].mul(upsd[size_t(a)], &led);
        // subtract the central counterterm: raw pairing = wick + C-element
        const int chain = sys.chain_of_level(sys.levels()[var]);
        const MatC& B = sys.algebra().filtration().subspace(chain);
        const ModeSpace& ms = sys.mode_space();
        const int dim = ms.dim();
        VecC cent = VecC::Zero(g.size());
        for (long z = 0; z < g.size(); ++z) {
            for (int a = 0; a < 2; ++a) {
                VecC u = VecC::Zero(dim), v = VecC::Zero(dim);
                for (const auto& [mask, p] : nz.oneA[size_t(a)].planes())
                    u[__builtin_ctz(mask)] = p[z];
                for (const auto& [mask, p] : nz.oneF[size_t(a)].planes())
                    v[__builtin_ctz(mask)] = p[z];
                cent[z] += (B.adjoint() * ms.kappa_U(u)).dot(B.adjoint() * v);
            }
        }
        pair.plane(0) -= cent;
        nl_phi.axpy(cplx(-cfg.g, 0), pair);
        GrassLattice p2 = f.phi.mul(f.phi, &led);
        GrassLattice p3 = p2.mul(f.phi, &led);
        // phi^3 - 3 c(t) phi
        GrassLattice cphi = f.phi;
        VecC cfield(g.size());
        for (int k = 0; k < g.nt; ++k)
            for (long i = 0; i < nxy; ++i) cfield[g.idx(k, 0, 0) + i] = nz.c2_profile[k];
        cphi.scale_field(cfield);
        nl_phi.axpy(cplx(-cfg.lambda, 0), p3);
        nl_phi.axpy(cplx(3.0 * cfg.lambda, 0), cphi);
    }
    // residual of the mild recursion for phi
    double worst = 0, scale = 1e-30;
    {
        std::set<std::uint32_t> masks;
        for (const auto& [m, p] : f.phi.planes()) masks.insert(m);
        for (const auto& [m, p] : nl_phi.planes()) masks.insert(m);
        const auto& sg = detail::make_semigroup(g, cfg.m * cfg.m);
        for (std::uint32_t mask : masks) {
            const VecC* pf = f.phi.plane_if(mask);
            const VecC* pn = nl_phi.plane_if(mask);
            VecC prev = pf ? VecC(pf->segment(0, nxy)) : VecC::Zero(nxy);
            for (int k = 0; k + 1 < g.nt; ++k) {
                VecC cur = pf ? VecC(pf->segment(g.idx(k + 1, 0, 0), nxy)) : VecC::Zero(nxy);
                VecC src = pn ? VecC(pn->segment(g.idx(k, 0, 0), nxy)) : VecC::Zero(nxy);
                if (mask == 0)
                    src += nz.xi_moll.data.segment(g.idx(k, 0, 0), nxy);
                VecC ph = prev, sh = src;
                plan.forward(ph.data());
                plan.forward(sh.data());
                VecC pred(nxy);
                for (long i = 0; i < nxy; ++i)
                    pred[i] = sg.decay[i] * ph[i] + g.dt * sg.phi1[i] * sh[i];
                plan.backward(pred.data());
                worst = std::max(worst, (cur - pred).lpNorm<Eigen::Infinity>());
                scale = std::max(scale, cur.lpNorm<Eigen::Infinity>());
                prev = cur;
            }
        }
    }
    return worst / scale;
}

// ---------------------------------------------------------------------------
// Blow-up solution space: point at infinity, cut-off metric
// ---------------------------------------------------------------------------

/// Desk-scale element of the solution space with a point at infinity:
/// a uniform path on [0,1] whose states may be the infinity marker.
struct SolPath {
    std::vector<double> times;          // uniform grid on [0,1]
    std::vector<VecD> states;           // empty vector = infinity marker
    std::vector<double> norms;          // ||state||, +inf at the marker

    static SolPath from_values(const std::vector<VecD>& vals) {
        SolPath p;
        const int n = int(vals.size());
        for (int i = 0; i < n; ++i) {
            p.times.push_back(double(i) / (n - 1));
            p.states.push_back(vals[size_t(i)]);
            p.norms.push_back(vals[size_t(i)].size() == 0
                                  ? std::numeric_limits<double>::infinity()
                                  : vals[size_t(i)].norm());
        }
        return p;
    }
};

/// running sup S_f(t), extended by its final value past t = 1
inline double running_sup(const SolPath& f, double t) {
    double acc = 0;
    for (size_t i = 0; i < f.times.size(); ++i) {
        if (f.times[i] > std::min(t, 1.0) + 1e-12) break;
        acc = std::max(acc, f.norms[i]);
    }
    return acc;
}

/// mollified running sup: tan( \int_0^1 arctan(S_f(t + s/L)) phi(s) ds )
inline double mollified_sup(const SolPath& f, double L, double t) {
    const double m = detail::gl16([](double s) { return bump_profile(2.0 * s - 1.0); }, 0.0, 1.0);
    const double val = detail::gl16(
                           [&](double s) {
                               return bump_profile(2.0 * s - 1.0) *
                                      std::atan(running_sup(f, t + s / L));
                           },
                           0.0, 1.0) /
                       m;
    if (val >= kPi / 2.0 - 1e-12) return std::numeric_limits<double>::infinity();
    return std::tan(val);
}

/// smooth threshold: 1 on (-inf,1], 0 on [2,inf)
inline double theta_cut(double x) { return time_cutoff(x); }

/// Theta_L(f)(t_i): the cut-off state (zero vector once the mollified sup
/// passes the threshold; the convention 0 * infinity = 0 applies)
inline VecD theta_L_state(const SolPath& f, double L, size_t i) {
    const double w = theta_cut(mollified_sup(f, L, f.times[i]) / L);
    if (w == 0.0) return VecD::Zero(f.states[i].size() ? f.states[i].size() : 1);
    FSQ_REQUIRE(f.states[i].size() > 0, "theta_L: weight positive at an infinite state");
    return w * f.states[i];
}

inline double d_L_metric(const SolPath& a, const SolPath& b, double L) {
    FSQ_REQUIRE(a.times.size() == b.times.size(), "d_L: incompatible paths");
    double sup = 0;
    for (size_t i = 0; i < a.times.size(); ++i) {
        VecD ta = theta_L_state(a, L, i), tb = theta_L_state(b, L, i);
        if (ta.size() != tb.size()) {
            // one side cut to scalar zero: compare against the zero vector
            if (ta.size() < tb.size()) ta = VecD::Zero(tb.size());
            else tb = VecD::Zero(ta.size());
        }
        sup = std::max(sup, (ta - tb).norm());
    }
    return std::min(1.0, sup);
}

inline double sol_metric(const SolPath& a, const SolPath& b, int l_max = 12) {
    double acc = 0;
    for (int l = 1; l <= l_max; ++l) acc += std::pow(2.0, -l) * d_L_metric(a, b, double(l));
    return acc;
}

/// Convergence criterion of the lemma: sup over [0, T(L,n)] distances for
/// every L, with T(L,n) the first time either norm reaches L.
inline bool csol_converges(const std::vector<SolPath>& fn, const SolPath& f, int l_max = 8,
                           double tol = 1e-6) {
    for (int l = 1; l <= l_max; ++l) {
        double last = 0;
        for (const auto& g : fn) {
            double sup = 0;
            for (size_t i = 0; i < f.times.size(); ++i) {
                if (f.norms[i] >= l || g.norms[i] >= l) break;
                sup = std::max(sup, (f.states[i] - g.states[i]).norm());
            }
            last = sup;
        }
        if (last > tol) return false;
    }
    return true;
}

inline nlohmann::json run_manifest(const RemainderSystem& sys, const SolutionTrajectory& t) {
    const SolverConfig& c = sys.config();
    nlohmann::json j;
    j["schema"] = "fsq.run.v1";
    j["config"] = {{"nx", c.nx},       {"nt", c.nt},          {"T", c.T},
                   {"m", c.m},         {"M", c.M},            {"delta", c.delta},
                   {"g", c.g},         {"lambda", c.lambda},  {"eps", c.eps},
                   {"level", c.level}, {"seed", c.seed},      {"degree_cap", c.degree_cap},
                   {"window_steps", c.window_steps}};
    j["mode_space"] = sys.mode_space().manifest();
    j["blow_up_time"] = t.blow_up_time ? nlohmann::json(*t.blow_up_time) : nlohmann::json();
    j["state_hash"] = t.state_hash;
    nlohmann::json ws = nlohmann::json::array();
    for (const auto& w : t.windows)
        ws.push_back({{"t", w.t_start},
                      {"steps", w.steps},
                      {"iterations", w.iterations},
                      {"contraction", w.contraction}});
    j["windows"] = ws;
    nlohmann::json ns = nlohmann::json::array();
    for (size_t i = 0; i < t.times.size(); ++i)
        ns.push_back({{"t", t.times[i]}, {"norm", t.norms[i]}});
    j["norms"] = ns;
    j["ledger"] = {{"dropped", sys.ledger().dropped_mass},
                   {"retained", sys.ledger().retained_mass}};
    return j;
}

}  // namespace fsq
