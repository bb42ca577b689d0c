#pragma once

#include <optional>
#include <set>

#include <nlohmann/json.hpp>

#include "fsq/grass_lattice.hpp"
#include "fsq/trees.hpp"

namespace fsq {

// Da Prato-Debussche solver for the remainder system, localised at a fixed
// filtration level. Everything is built around the discrete mild map
//   u_{k+1} = e^{-a dt} u_k + dt phi1(a dt) f(u_k)        (per spatial mode)
// so that linear identities (heat flow, restart consistency, the
// perturbative ansatz) hold exactly on the grid. Driving noises are
// generated by the same recursion.

struct SolverConfig {
    int nx = 16;
    int nt = 64;      // time steps on [0, T]
    double T = 0.25;
    double m = 1.0, M = 1.0, delta = 0.25;
    double g = 0.1, lambda = 0.1;
    double eps = 0.25;
    int level = 2;            // localisation level n
    int shadow_level = 0;     // > 0: lockstep variant at another level
    int fermion_time_modes = 2;
    int fermion_n_space = 1;  // spatial cutoff per dimension (1 => k = 0 only)
    double fermion_window_lo = -2.5, fermion_window_hi = 0.5;
    int degree_cap = 6;
    std::uint64_t seed = 1;
    double picard_tol = 1e-11;
    int picard_max = 60;
    int window_steps = 8;
    double contraction_target = 0.9;
    double blowup_L = 40.0;
    double prune_tol = 1e-14;
    double ledger_frac = 1e-6;

    double dt() const { return T / nt; }
    SpaceTimeGrid grid() const { return SpaceTimeGrid{nx, nt, 0.0, dt()}; }
};

namespace detail {

/// per-mode decay factors for the discrete mild map
struct Semigroup {
    VecD decay;   // e^{-a dt} per spatial mode (row-major nx*nx)
    VecD phi1;    // (1 - e^{-a dt}) / (a dt)
    VecD rate;    // a
};

inline Semigroup make_semigroup(const SpaceTimeGrid& g, double msq) {
    Semigroup s;
    const long nxy = long(g.nx) * g.nx;
    s.decay.resize(nxy);
    s.phi1.resize(nxy);
    s.rate.resize(nxy);
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = 0; iy < g.nx; ++iy) {
            const int k1 = g.freq(ix), k2 = g.freq(iy);
            const double a = 4.0 * kPi * kPi * double(k1 * k1 + k2 * k2) + msq;
            const double x = a * g.dt;
            s.rate[ix * g.nx + iy] = a;
            s.decay[ix * g.nx + iy] = std::exp(-x);
            s.phi1[ix * g.nx + iy] = x > 1e-12 ? (1.0 - std::exp(-x)) / x : 1.0;
        }
    return s;
}

/// apply the heat semigroup decay for `steps` steps to a spatial slice
inline VecC heat_flow(const Semigroup& sg, const SpaceTimeGrid& g, const VecC& slice,
                      int steps) {
    const auto& plan = fft2d(g.nx);
    VecC s = slice;
    plan.forward(s.data());
    for (long i = 0; i < s.size(); ++i) s[i] *= std::pow(sg.decay[i], steps);
    plan.backward(s.data());
    return s;
}

}  // namespace detail

/// slice state: planes of spatial fields at a single time
struct SliceState {
    std::map<std::uint32_t, VecC> planes;  // mask -> nx*nx values

    SliceState& operator+=(const SliceState& o) {
        for (const auto& [m, p] : o.planes) {
            auto it = planes.find(m);
            if (it == planes.end())
                planes[m] = p;
            else
                it->second += p;
        }
        return *this;
    }
};

inline SliceState slice_of(const GrassLattice& lat, int it) {
    SliceState s;
    const auto& g = lat.grid();
    const long nxy = long(g.nx) * g.nx;
    for (const auto& [m, p] : lat.planes()) {
        VecC v(nxy);
        for (long i = 0; i < nxy; ++i) v[i] = p[g.idx(it, 0, 0) + i];
        if (v.lpNorm<Eigen::Infinity>() > 0) s.planes[m] = v;
    }
    return s;
}

/// Driving noises on the global grid, built by the solver's own recursion so
/// that the perturbative ansatz holds exactly at grid level.
struct DrivingNoises {
    SpaceTimeGrid g;
    Field xi_moll;              // mollified bosonic noise
    Field one;                  // <1>
    Field two, three;           // Wick square and cube
    VecD c2_profile;            // per-slice Wick constant
    std::array<GrassLattice, 2> oneIF, oneIA;  // integrated fermionic noises
    std::array<GrassLattice, 2> oneF, oneA;    // derivative trees
    std::array<GrassLattice, 2> twoF, twoA;    // mixed products
    std::vector<GrassLattice> twoAF;           // per variant (level)
    std::vector<int> levels;                   // variant levels
};

class RemainderSystem {
  public:
    RemainderSystem(const SolverConfig& cfg)
        : cfg_(cfg),
          g_(cfg.grid()),
          ms_(cfg.fermion_time_modes, cfg.fermion_n_space, cfg.delta, cfg.M,
              cfg.fermion_window_lo, cfg.fermion_window_hi),
          filt_(ms_, std::max(cfg.level, cfg.shadow_level)),
          alg_(ms_, filt_, cfg.degree_cap),
          sg_b_(detail::make_semigroup(g_, cfg.m * cfg.m)),
          sg_f_(detail::make_semigroup(g_, cfg.M * cfg.M)) {
        levels_.push_back(cfg.level);
        if (cfg.shadow_level > 0 && cfg.shadow_level != cfg.level)
            levels_.push_back(cfg.shadow_level);
        build_noises();
    }

    const SolverConfig& config() const { return cfg_; }
    const SpaceTimeGrid& grid() const { return g_; }
    const ModeSpace& mode_space() const { return ms_; }
    const Algebra& algebra() const { return alg_; }
    const DrivingNoises& noises() const { return nz_; }
    const std::vector<int>& levels() const { return levels_; }
    int chain_of_level(int level) const {
        int best = 0;
        for (int c = 0; c < filt_.depth(); ++c)
            if (filt_.dim_of(c) <= level) best = c;
        return best;
    }
    const TruncationLedger& ledger() const { return ledger_; }

    /// one full state: lattices over a window grid, one set per variant
    struct State {
        SpaceTimeGrid wg;
        // [variant]: U, Y0, Y1, Yb0, Yb1
        std::vector<std::array<GrassLattice, 5>> v;

        double dist(const State& o) const {
            double acc = 0;
            for (size_t a = 0; a < v.size(); ++a)
                for (int f = 0; f < 5; ++f) {
                    GrassLattice d = v[a][size_t(f)];
                    d.axpy(cplx(-1, 0), o.v[a][size_t(f)]);
                    acc = std::max(acc, d.coeff_norm());
                }
            return acc;
        }
        double size() const {
            double acc = 0;
            for (const auto& var : v)
                for (const auto& f : var) acc = std::max(acc, f.coeff_norm());
            return acc;
        }
    };

    /// initial data per variant: slice states for (U, Y0, Y1, Yb0, Yb1)
    using Init = std::vector<std::array<SliceState, 5>>;

    Init zero_init() const {
        Init u0(levels_.size());
        return u0;
    }

    /// window = slices [k0, k0+steps] of the global grid (steps+1 slices)
    State fixed_point(const Init& u0, int k0, int steps, int& iterations,
                      std::vector<double>& ratios) {
        State cur = heat_flow_state(u0, k0, steps);
        State flow = cur;
        double prev_dist = -1;
        iterations = 0;
        for (int it = 0; it < cfg_.picard_max; ++it) {
            State next = apply_map(cur, flow, k0, steps);
            double d = next.dist(cur);
            if (prev_dist > 0 && prev_dist > 1e-16) ratios.push_back(d / prev_dist);
            prev_dist = d;
            cur = std::move(next);
            ++iterations;
            if (d < cfg_.picard_tol * std::max(1.0, cur.size())) return cur;
        }
        converged_ = false;
        return cur;
    }

    bool last_converged() const { return converged_; }

    /// full mild map on the window: heat flow of the initial data plus the
    /// integrated nonlinearity of `cur`
    State apply_map(const State& cur, const State& flow, int k0, int steps) {
        State out = flow;
        const int ns = steps + 1;
        for (size_t var = 0; var < levels_.size(); ++var) {
            // assemble the nonlinearity on the window per equation
            std::array<GrassLattice, 5> rhs = assemble_rhs(cur, var, k0, steps);
            for (int f = 0; f < 5; ++f) {
                const detail::Semigroup& sg = (f == 0) ? sg_b_ : sg_f_;
                integrate_lattice(sg, rhs[size_t(f)], out.v[var][size_t(f)]);
                out.v[var][size_t(f)].prune(cfg_.prune_tol);
            }
            (void)ns;
        }
        return out;
    }

    State heat_flow_state(const Init& u0, int k0, int steps) {
        State st;
        st.wg = SpaceTimeGrid{g_.nx, steps + 1, k0 * g_.dt, g_.dt};
        st.v.resize(levels_.size());
        const long nxy = long(g_.nx) * g_.nx;
        for (size_t var = 0; var < levels_.size(); ++var)
            for (int f = 0; f < 5; ++f) {
                GrassLattice lat(st.wg, ms_.dim(), cfg_.degree_cap);
                const detail::Semigroup& sg = (f == 0) ? sg_b_ : sg_f_;
                auto it = u0[var][size_t(f)].planes;
                for (const auto& [mask, p] : it) {
                    VecC& plane = lat.plane(mask);
                    for (int k = 0; k <= steps; ++k) {
                        VecC s = detail::heat_flow(sg, g_, p, k);
                        for (long i = 0; i < nxy; ++i) plane[st.wg.idx(k, 0, 0) + i] = s[i];
                    }
                }
                lat.prune(cfg_.prune_tol);
                st.v[var][size_t(f)] = std::move(lat);
            }
        return st;
    }

    /// (D + M) and (-Dbar + M) on spinor pairs, per plane, spectrally
    std::array<GrassLattice, 2> dirac_combine(const GrassLattice& c0, const GrassLattice& c1,
                                              bool conjugated) const {
        const auto& wg = c0.grid();
        std::array<GrassLattice, 2> out = {GrassLattice(wg, ms_.dim(), cfg_.degree_cap),
                                           GrassLattice(wg, ms_.dim(), cfg_.degree_cap)};
        auto sym = [&](int k1, int k2) {
            Eigen::Matrix2cd out;
            if (conjugated)
                out = cfg_.M * Eigen::Matrix2cd::Identity() - dirac_bar_symbol(k1, k2);
            else
                out = cfg_.M * Eigen::Matrix2cd::Identity() + dirac_symbol(k1, k2);
            return out;
        };
        const auto& plan = fft2d(wg.nx);
        std::set<std::uint32_t> masks;
        for (const auto& [m, p] : c0.planes()) masks.insert(m);
        for (const auto& [m, p] : c1.planes()) masks.insert(m);
        const long nxy = long(wg.nx) * wg.nx;
        for (std::uint32_t mask : masks) {
            const VecC* p0 = c0.plane_if(mask);
            const VecC* p1 = c1.plane_if(mask);
            VecC& o0 = out[0].plane(mask);
            VecC& o1 = out[1].plane(mask);
            for (int k = 0; k < wg.nt; ++k) {
                VecC s0 = p0 ? VecC(p0->segment(wg.idx(k, 0, 0), nxy)) : VecC::Zero(nxy);
                VecC s1 = p1 ? VecC(p1->segment(wg.idx(k, 0, 0), nxy)) : VecC::Zero(nxy);
                plan.forward(s0.data());
                plan.forward(s1.data());
                VecC r0(nxy), r1(nxy);
                for (int ix = 0; ix < wg.nx; ++ix)
                    for (int iy = 0; iy < wg.nx; ++iy) {
                        Eigen::Matrix2cd sm = sym(wg.freq(ix), wg.freq(iy));
                        const long i = ix * wg.nx + iy;
                        r0[i] = sm(0, 0) * s0[i] + sm(0, 1) * s1[i];
                        r1[i] = sm(1, 0) * s0[i] + sm(1, 1) * s1[i];
                    }
                plan.backward(r0.data());
                plan.backward(r1.data());
                o0.segment(wg.idx(k, 0, 0), nxy) = r0;
                o1.segment(wg.idx(k, 0, 0), nxy) = r1;
            }
        }
        out[0].prune(cfg_.prune_tol);
        out[1].prune(cfg_.prune_tol);
        return out;
    }

    /// restriction of a global lattice to the window slices [k0, k0+steps]
    GrassLattice window_view(const GrassLattice& global, const SpaceTimeGrid& wg,
                             int k0) const {
        GrassLattice out(wg, ms_.dim(), cfg_.degree_cap);
        const long nxy = long(g_.nx) * g_.nx;
        for (const auto& [m, p] : global.planes()) {
            VecC& plane = out.plane(m);
            for (int k = 0; k < wg.nt; ++k)
                plane.segment(wg.idx(k, 0, 0), nxy) = p.segment(g_.idx(k0 + k, 0, 0), nxy);
        }
        return out;
    }

    Field window_view(const Field& global, const SpaceTimeGrid& wg, int k0) const {
        Field out(wg);
        const long nxy = long(g_.nx) * g_.nx;
        for (int k = 0; k < wg.nt; ++k)
            out.data.segment(wg.idx(k, 0, 0), nxy) =
                global.data.segment(g_.idx(k0 + k, 0, 0), nxy);
        return out;
    }

  private:
    /// RHS of the remainder system for one variant on the window
    std::array<GrassLattice, 5> assemble_rhs(const State& st, size_t var, int k0, int steps) {
        const SpaceTimeGrid& wg = st.wg;
        const int lvl_chain = chain_of_level(levels_[var]);
        (void)lvl_chain;
        const GrassLattice& U = st.v[var][0];
        auto Yd = dirac_combine(st.v[var][1], st.v[var][2], false);
        auto Ybd = dirac_combine(st.v[var][3], st.v[var][4], true);
        // window views of the noises
        Field one_w = window_view(nz_.one, wg, k0);
        Field two_w = window_view(nz_.two, wg, k0);
        Field three_w = window_view(nz_.three, wg, k0);
        std::array<GrassLattice, 2> oneF_w = {window_view(nz_.oneF[0], wg, k0),
                                              window_view(nz_.oneF[1], wg, k0)};
        std::array<GrassLattice, 2> oneA_w = {window_view(nz_.oneA[0], wg, k0),
                                              window_view(nz_.oneA[1], wg, k0)};
        std::array<GrassLattice, 2> twoF_w = {window_view(nz_.twoF[0], wg, k0),
                                              window_view(nz_.twoF[1], wg, k0)};
        std::array<GrassLattice, 2> twoA_w = {window_view(nz_.twoA[0], wg, k0),
                                              window_view(nz_.twoA[1], wg, k0)};
        GrassLattice twoAF_w = window_view(nz_.twoAF[var], wg, k0);

        std::array<GrassLattice, 5> rhs;
        for (int f = 0; f < 5; ++f) rhs[size_t(f)] = GrassLattice(wg, ms_.dim(), cfg_.degree_cap);

        const cplx mg(-cfg_.g, 0), ml(-cfg_.lambda, 0);
        // bosonic equation
        {
            GrassLattice acc(wg, ms_.dim(), cfg_.degree_cap);
            for (int a = 0; a < 2; ++a) {
                acc += Ybd[size_t(a)].mul(Yd[size_t(a)], &ledger_);
                acc += Ybd[size_t(a)].mul(oneF_w[size_t(a)], &ledger_);
                acc += oneA_w[size_t(a)].mul(Yd[size_t(a)], &ledger_);
            }
            acc += twoAF_w;
            rhs[0].axpy(mg, acc);
            GrassLattice u2 = U.mul(U, &ledger_);
            GrassLattice cubic = u2.mul(U, &ledger_);
            GrassLattice u2one = u2;
            u2one.scale_field(one_w.data);
            GrassLattice utwo = U;
            utwo.scale_field(two_w.data);
            rhs[0].axpy(ml, cubic);
            rhs[0].axpy(3.0 * ml, u2one);
            rhs[0].axpy(3.0 * ml, utwo);
            GrassLattice three_l(wg, ms_.dim(), cfg_.degree_cap);
            three_l.plane(0) = three_w.data;
            rhs[0].axpy(ml, three_l);
        }
        // fermionic equations
        for (int a = 0; a < 2; ++a) {
            // Y_a: -g [ (U + <1>) Y^D_a + U <1F>_a + <2F>_a ]
            GrassLattice uy = U.mul(Yd[size_t(a)], &ledger_);
            GrassLattice oy = Yd[size_t(a)];
            oy.scale_field(one_w.data);
            GrassLattice uf = U.mul(oneF_w[size_t(a)], &ledger_);
            rhs[size_t(1 + a)].axpy(mg, uy);
            rhs[size_t(1 + a)].axpy(mg, oy);
            rhs[size_t(1 + a)].axpy(mg, uf);
            rhs[size_t(1 + a)].axpy(mg, twoF_w[size_t(a)]);
            // Yb_a
            GrassLattice uyb = U.mul(Ybd[size_t(a)], &ledger_);
            GrassLattice oyb = Ybd[size_t(a)];
            oyb.scale_field(one_w.data);
            GrassLattice ufb = U.mul(oneA_w[size_t(a)], &ledger_);
            rhs[size_t(3 + a)].axpy(mg, uyb);
            rhs[size_t(3 + a)].axpy(mg, oyb);
            rhs[size_t(3 + a)].axpy(mg, ufb);
            rhs[size_t(3 + a)].axpy(mg, twoA_w[size_t(a)]);
        }
        (void)steps;
        return rhs;
    }

    /// lift the mild integration over every plane of a lattice, in place on
    /// top of the heat-flow part already stored in `out` slices
    void integrate_lattice(const detail::Semigroup& sg, const GrassLattice& src,
                           GrassLattice& out) {
        const auto& wg = src.grid();
        const long nxy = long(g_.nx) * g_.nx;
        const auto& plan = fft2d(g_.nx);
        for (const auto& [mask, p] : src.planes()) {
            VecC cur = VecC::Zero(nxy);
            VecC* dst = &out.plane(mask);
            // out already holds the heat flow of the initial data; the
            // integrated source adds on top with I(0) = 0
            for (int k = 0; k + 1 < wg.nt; ++k) {
                VecC s = p.segment(wg.idx(k, 0, 0), nxy);
                plan.forward(s.data());
                for (long i = 0; i < nxy; ++i)
                    cur[i] = sg.decay[i] * cur[i] + wg.dt * sg.phi1[i] * s[i];
                VecC real_cur = cur;
                plan.backward(real_cur.data());
                dst->segment(wg.idx(k + 1, 0, 0), nxy) += real_cur;
            }
        }
    }

    void build_noises();

    SolverConfig cfg_;
    SpaceTimeGrid g_;
    ModeSpace ms_;
    Filtration filt_;
    Algebra alg_;
    detail::Semigroup sg_b_, sg_f_;
    DrivingNoises nz_;
    std::vector<int> levels_;
    TruncationLedger ledger_;
    bool converged_ = true;
};

}  // namespace fsq

#include "fsq/solver_noise.hpp"
#include "fsq/solver_run.hpp"
