#pragma once

#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <vector>

#include <fftw3.h>

#include "fsq/common.hpp"

namespace fsq {

// Periodic unit torus [0,1)^2 in space, uniform cells in time on a window
// [t0, t0 + nt*dt). Fields are stored time-major, spatial row-major.

struct SpaceTimeGrid {
    int nx = 0;
    int nt = 0;
    double t0 = 0.0;
    double dt = 0.0;

    double dx() const { return 1.0 / nx; }
    double cell_vol() const { return dt * dx() * dx(); }
    long size() const { return long(nt) * nx * nx; }
    long idx(int it, int ix, int iy) const { return (long(it) * nx + ix) * nx + iy; }
    double time_center(int it) const { return t0 + (it + 0.5) * dt; }
    double x_of(int i) const { return i * dx(); }
    /// signed integer frequency of FFT bin i
    int freq(int i) const { return i <= nx / 2 ? i : i - nx; }
    bool compatible(const SpaceTimeGrid& o) const {
        return nx == o.nx && nt == o.nt && t0 == o.t0 && std::abs(dt - o.dt) < 1e-15;
    }
};

/// Complex scalar lattice field.
struct Field {
    SpaceTimeGrid grid;
    VecC data;

    Field() = default;
    explicit Field(const SpaceTimeGrid& g) : grid(g), data(VecC::Zero(g.size())) {}
    cplx& at(int it, int ix, int iy) { return data[grid.idx(it, ix, iy)]; }
    cplx at(int it, int ix, int iy) const { return data[grid.idx(it, ix, iy)]; }
};

/// Cached FFTW plans for 2D transforms of size n x n (in-place, c2c).
class Fft2D {
  public:
    explicit Fft2D(int n) : n_(n) {
        buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * size_t(n) * n));
        fwd_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft2D() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    Fft2D(const Fft2D&) = delete;
    Fft2D& operator=(const Fft2D&) = delete;

    /// In-place forward transform with 1/n^2 so that coefficients are Fourier
    /// series coefficients: f(x) = sum_k c_k e^{2 pi i k.x}.
    void forward(cplx* slice) const {
        run(slice, fwd_);
        const double s = 1.0 / (double(n_) * n_);
        for (long i = 0; i < long(n_) * n_; ++i) slice[i] *= s;
    }
    void backward(cplx* slice) const { run(slice, bwd_); }

  private:
    void run(cplx* slice, fftw_plan p) const {
        std::memcpy(buf_, slice, sizeof(cplx) * size_t(n_) * n_);
        fftw_execute(p);
        std::memcpy(slice, buf_, sizeof(cplx) * size_t(n_) * n_);
    }
    int n_;
    fftw_complex* buf_;
    fftw_plan fwd_, bwd_;
};

inline const Fft2D& fft2d(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<Fft2D>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, std::make_unique<Fft2D>(n)).first;
    return *it->second;
}

/// Spatial Fourier coefficients of every time slice (in place).
inline void spatial_fft(Field& f) {
    const auto& plan = fft2d(f.grid.nx);
    for (int it = 0; it < f.grid.nt; ++it) plan.forward(f.data.data() + f.grid.idx(it, 0, 0));
}

inline void spatial_ifft(Field& f) {
    const auto& plan = fft2d(f.grid.nx);
    for (int it = 0; it < f.grid.nt; ++it) plan.backward(f.data.data() + f.grid.idx(it, 0, 0));
}

/// Space-time convolution: periodic in space, linear (zero-padded) in time.
/// Both fields must share the grid geometry (the kernel's time axis is taken
/// relative to 0, i.e. slice j of `kernel` is lag j*dt + kernel.grid.t0).
/// Result slice i: sum_j a(t_i - lag_j) k(lag_j) dt dx^2-weighted.
inline Field convolve(const Field& a, const Field& kernel) {
    FSQ_REQUIRE(a.grid.nx == kernel.grid.nx && std::abs(a.grid.dt - kernel.grid.dt) < 1e-15,
                "convolve: incompatible grids");
    const int nx = a.grid.nx, nta = a.grid.nt, ntk = kernel.grid.nt;
    Field fa = a, fk = kernel;
    spatial_fft(fa);
    spatial_fft(fk);
    Field out(a.grid);
    const double w = a.grid.cell_vol() * nx * nx;  // dt * dx^2, undone by coeff products
    // kernel lag offset in steps: lag_j = kernel.t0 + (j+.5) dt; output time
    // t_i = a.t0 + (i+.5) dt; contribution to slice i comes from a-slice
    // i - j - off where off = round(kernel.t0/dt) shifts the kernel window.
    const int off = int(std::lround(kernel.grid.t0 / a.grid.dt));
    for (int i = 0; i < nta; ++i) {
        for (int j = 0; j < ntk; ++j) {
            int src = i - j - off;
            if (src < 0 || src >= nta) continue;
            const cplx* pa = fa.data.data() + fa.grid.idx(src, 0, 0);
            const cplx* pk = fk.data.data() + fk.grid.idx(j, 0, 0);
            cplx* po = out.data.data() + out.grid.idx(i, 0, 0);
            for (long m = 0; m < long(nx) * nx; ++m) po[m] += w * pa[m] * pk[m];
        }
    }
    spatial_ifft(out);
    return out;
}

/// White-noise sample: i.i.d. centred Gaussians scaled by cell_vol^{-1/2}.
inline Field white_noise(const SpaceTimeGrid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    Field f(g);
    const double s = 1.0 / std::sqrt(g.cell_vol());
    for (long i = 0; i < g.size(); ++i) f.data[i] = s * n01(rng);
    return f;
}

}  // namespace fsq
