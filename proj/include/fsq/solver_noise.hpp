#pragma once

// Driving-noise construction for the remainder solver. Everything runs
// through the same discrete mild recursion as the Picard map, so the
// perturbative ansatz phi = U + <1>, upsilon = Y + <1IF> holds exactly at
// grid level (up to the fixed-point tolerance).

namespace fsq {

inline void RemainderSystem::build_noises() {
    nz_.g = g_;
    nz_.levels = levels_;
    const long nxy = long(g_.nx) * g_.nx;
    const auto& plan = fft2d(g_.nx);
    const double e2 = cfg_.eps * cfg_.eps;
    Mollifier rho{cfg_.eps};

    // --- discrete time-smear weights (sum w_j dt = 1) -----------------------
    std::vector<double> tw;
    std::vector<int> toff;
    {
        const int half = int(std::floor(e2 / g_.dt));
        double mass = 0;
        for (int j = -half; j <= half; ++j) {
            const double v = cfg_.eps > 0 ? bump_profile(double(j) * g_.dt / e2) : (j == 0);
            if (v > 0) {
                tw.push_back(v);
                toff.push_back(j);
                mass += v * g_.dt;
            }
        }
        if (tw.empty()) {
            tw.push_back(1.0 / g_.dt);
            toff.push_back(0);
        } else {
            for (auto& v : tw) v /= mass;
        }
    }

    // --- mollified bosonic noise --------------------------------------------
    Field xi = white_noise(g_, cfg_.seed);
    nz_.xi_moll = Field(g_);
    {
        // spatial multiplier per slice, then the discrete time smear
        Field xs = xi;
        spatial_fft(xs);
        for (int k = 0; k < g_.nt; ++k)
            for (int ix = 0; ix < g_.nx; ++ix)
                for (int iy = 0; iy < g_.nx; ++iy)
                    xs.at(k, ix, iy) *= rho.fourier_x(g_.freq(ix), g_.freq(iy));
        spatial_ifft(xs);
        for (int k = 0; k < g_.nt; ++k) {
            double mass = 0;
            for (size_t j = 0; j < tw.size(); ++j) {
                const int src = k - toff[j];
                if (src < 0 || src >= g_.nt) continue;
                mass += tw[j] * g_.dt;
            }
            if (mass <= 0) continue;
            for (size_t j = 0; j < tw.size(); ++j) {
                const int src = k - toff[j];
                if (src < 0 || src >= g_.nt) continue;
                nz_.xi_moll.data.segment(g_.idx(k, 0, 0), nxy) +=
                    (tw[j] * g_.dt / mass) * xs.data.segment(g_.idx(src, 0, 0), nxy);
            }
        }
    }

    // --- <1> by the mild recursion ------------------------------------------
    nz_.one = Field(g_);
    {
        VecC cur = VecC::Zero(nxy);
        for (int k = 0; k < g_.nt; ++k) {
            VecC real_cur = cur;
            plan.backward(real_cur.data());
            nz_.one.data.segment(g_.idx(k, 0, 0), nxy) = real_cur;
            if (k + 1 >= g_.nt) break;
            VecC src = nz_.xi_moll.data.segment(g_.idx(k, 0, 0), nxy);
            plan.forward(src.data());
            for (long i = 0; i < nxy; ++i)
                cur[i] = sg_b_.decay[i] * cur[i] + g_.dt * sg_b_.phi1[i] * src[i];
        }
    }

    // --- per-slice Wick constant c(t) = Var(<1>(t, x)) ----------------------
    nz_.c2_profile = VecD::Zero(g_.nt);
    {
        // per mode: Var of the recursion driven by smeared white noise with
        // per-slice coefficient variance 1/dt and smear correlation
        for (long i = 0; i < nxy; ++i) {
            const int ix = int(i) / g_.nx, iy = int(i) % g_.nx;
            const double rx = rho.fourier_x(g_.freq(ix), g_.freq(iy));
            const double dec = sg_b_.decay[i], ph = g_.dt * sg_b_.phi1[i];
            // response of <1>(k) to the raw noise slice j:
            // R_k(j) = ph * sum_{k' < k} dec^{k-1-k'} * (tw dt at offset k'-j)
            // accumulate variances: Var = (1/dt) rx^2 sum_j R_k(j)^2, built
            // incrementally in k
            std::vector<double> resp(size_t(g_.nt) + size_t(tw.size()) + 4, 0.0);
            const int base = int(tw.size()) + 2;
            for (int k = 0; k < g_.nt; ++k) {
                if (k > 0) {
                    // resp <- dec * resp + ph * (smear row at slice k-1)
                    for (auto& r : resp) r *= dec;
                    double mass = 0;
                    for (size_t j = 0; j < tw.size(); ++j) {
                        const int src = (k - 1) - toff[j];
                        if (src >= 0 && src < g_.nt) mass += tw[j] * g_.dt;
                    }
                    if (mass > 0)
                        for (size_t j = 0; j < tw.size(); ++j) {
                            const int src = (k - 1) - toff[j];
                            if (src < 0 || src >= g_.nt) continue;
                            resp[size_t(src + base)] += ph * tw[j] * g_.dt / mass;
                        }
                }
                double acc = 0;
                for (double r : resp) acc += r * r;
                nz_.c2_profile[k] += rx * rx * acc / g_.dt;
            }
        }
    }

    // --- Wick square and cube ------------------------------------------------
    nz_.two = Field(g_);
    nz_.three = Field(g_);
    for (int k = 0; k < g_.nt; ++k) {
        const double c = nz_.c2_profile[k];
        for (long i = 0; i < nxy; ++i) {
            const cplx v = nz_.one.data[g_.idx(k, 0, 0) + i];
            nz_.two.data[g_.idx(k, 0, 0) + i] = v * v - c;
            nz_.three.data[g_.idx(k, 0, 0) + i] = v * v * v - 3.0 * c * v;
        }
    }

    // --- fermionic noise sources per spinor component ------------------------
    // mode coefficient (j, k, s) of rho_eps(z - .):
    //   e^{-2 pi i k x_z} rho_x(eps k) sqrt(w(k)/dt_box) R_j(t_z)
    auto source_lattice = [&](int spinor) {
        GrassLattice src(g_, ms_.dim(), cfg_.degree_cap);
        for (int f = 0; f < ms_.n_freq(); ++f) {
            const BasisLabel& L = ms_.labels()[size_t(ms_.index(0, f, 0))];
            const double rx = rho.fourier_x(L.k1, L.k2);
            const double sw = std::sqrt(ms_.weight(L.k1, L.k2) / ms_.dt_box());
            for (int j = 0; j < ms_.n_time(); ++j) {
                const double b0 = ms_.t_min() + j * ms_.dt_box(), b1 = b0 + ms_.dt_box();
                // R_j per time slice
                VecD rj(g_.nt);
                for (int k = 0; k < g_.nt; ++k) {
                    const double tz = g_.time_center(k);
                    if (cfg_.eps > 0) {
                        rj[k] = detail::gl16(
                                    [&](double t) {
                                        return bump_profile((tz - t) / e2) / (e2 * bump_mass());
                                    },
                                    std::max(b0, tz - e2), std::min(b1, tz + e2)) ;
                        if (tz - e2 > b1 || tz + e2 < b0) rj[k] = 0.0;
                    } else {
                        rj[k] = (tz >= b0 && tz < b1) ? 1.0 : 0.0;
                    }
                }
                const int mode = ms_.index(j, f, spinor);
                VecC& pl = src.plane(1u << mode);
                for (int k = 0; k < g_.nt; ++k) {
                    if (rj[k] == 0.0) continue;
                    for (int ix = 0; ix < g_.nx; ++ix)
                        for (int iy = 0; iy < g_.nx; ++iy) {
                            const double ph =
                                -2.0 * kPi * (L.k1 * g_.x_of(ix) + L.k2 * g_.x_of(iy));
                            pl[g_.idx(k, ix, iy)] =
                                cplx(std::cos(ph), std::sin(ph)) * rx * sw * rj[k];
                        }
                }
            }
        }
        src.prune(cfg_.prune_tol);
        return src;
    };

    auto integrate_deg1 = [&](const GrassLattice& src) {
        GrassLattice out(g_, ms_.dim(), cfg_.degree_cap);
        for (const auto& [mask, p] : src.planes()) {
            VecC cur = VecC::Zero(nxy);
            VecC& dst = out.plane(mask);
            for (int k = 0; k < g_.nt; ++k) {
                VecC real_cur = cur;
                plan.backward(real_cur.data());
                dst.segment(g_.idx(k, 0, 0), nxy) = real_cur;
                if (k + 1 >= g_.nt) break;
                VecC s = p.segment(g_.idx(k, 0, 0), nxy);
                plan.forward(s.data());
                for (long i = 0; i < nxy; ++i)
                    cur[i] = sg_f_.decay[i] * cur[i] + g_.dt * sg_f_.phi1[i] * s[i];
            }
        }
        out.prune(cfg_.prune_tol);
        return out;
    };

    for (int a = 0; a < 2; ++a) {
        nz_.oneIF[size_t(a)] = integrate_deg1(source_lattice(a));
        nz_.oneIA[size_t(a)] = integrate_deg1(source_lattice(2 + a));
    }
    {
        auto d = dirac_combine(nz_.oneIF[0], nz_.oneIF[1], false);
        nz_.oneF = {std::move(d[0]), std::move(d[1])};
        auto db = dirac_combine(nz_.oneIA[0], nz_.oneIA[1], true);
        nz_.oneA = {std::move(db[0]), std::move(db[1])};
    }
    for (int a = 0; a < 2; ++a) {
        nz_.twoF[size_t(a)] = nz_.oneF[size_t(a)];
        nz_.twoF[size_t(a)].scale_field(nz_.one.data);
        nz_.twoA[size_t(a)] = nz_.oneA[size_t(a)];
        nz_.twoA[size_t(a)].scale_field(nz_.one.data);
    }

    // --- fermionic Wick square per variant level -----------------------------
    // mode vectors u-bar_a(z), v_a(z) are the degree-1 coefficient lattices
    // of <1A>_a and <1F>_a
    const int dim = ms_.dim();
    auto vec_at = [&](const std::array<GrassLattice, 2>& lat, int a, long z) {
        VecC v = VecC::Zero(dim);
        for (const auto& [mask, p] : lat[size_t(a)].planes()) {
            const int bit = __builtin_ctz(mask);
            v[bit] = p[z];
        }
        return v;
    };
    nz_.twoAF.assign(levels_.size(), GrassLattice(g_, ms_.dim(), cfg_.degree_cap));
    for (size_t var = 0; var < levels_.size(); ++var) {
        GrassLattice& t = nz_.twoAF[var];
        const int chain = chain_of_level(levels_[var]);
        const MatC& B = filt_.subspace(chain);
        for (long z = 0; z < g_.size(); ++z) {
            VecC cent = VecC::Zero(1);
            for (int a = 0; a < 2; ++a) {
                VecC u = vec_at(nz_.oneA, a, z), v = vec_at(nz_.oneF, a, z);
                // degree-2 planes
                for (int i = 0; i < dim; ++i) {
                    if (u[i] == cplx(0, 0) && v[i] == cplx(0, 0)) continue;
                    for (int j = i + 1; j < dim; ++j) {
                        const cplx c = u[i] * v[j] - u[j] * v[i];
                        if (c == cplx(0, 0)) continue;
                        t.plane((1u << i) | (1u << j))[z] += c;
                    }
                }
                // central part, evaluated at this variant's chain element
                VecC ku = ms_.kappa_U(u);
                cent[0] += (B.adjoint() * ku).dot(B.adjoint() * v);
            }
            t.plane(0)[z] -= cent[0];
        }
        t.prune(cfg_.prune_tol);
    }
}

}  // namespace fsq
