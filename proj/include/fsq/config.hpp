#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fsq/solver.hpp"

namespace fsq {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Experiment configuration: JSON file with nested keys; every field has a
/// default so partial configs are valid.
struct ExperimentConfig {
    // mode space
    int n_time = 2;
    int n_space = 1;
    double delta = 0.25;
    double mass_M = 1.0;
    double mass_m = 1.0;
    double window_lo = -2.5, window_hi = 0.5;
    // couplings
    double g = 0.1, lambda = 0.1;
    // localisation
    int filtration_depth = 4;
    int level = 2;
    int shadow_level = 0;
    int degree_cap = 6;
    // grids
    int nx = 16;
    int nt = 64;
    double T = 0.25;
    // sweeps
    std::vector<double> eps_list = {0.5, 0.35, 0.25, 0.177, 0.125};
    double eps = 0.25;
    std::vector<std::uint64_t> seeds = {1};
    // solver
    double picard_tol = 1e-11;
    int picard_max = 60;
    int window_steps = 8;
    double contraction_target = 0.9;
    double blowup_L = 40.0;
    double ledger_frac = 1e-6;
    // initial data amplitudes (cos/sin bump for U, degree-1 modes for Y)
    double u0_u = 0.5;
    double u0_y = 0.25;
    // output
    std::string out_dir = "out";

    void validate() const {
        if (!(delta > 0.0 && delta < 0.5))
            throw ConfigError("config: delta must lie in (0, 1/2)");
        if (mass_M <= 0 || mass_m <= 0) throw ConfigError("config: masses must be positive");
        if (picard_tol <= 0 || contraction_target <= 0 || blowup_L <= 0)
            throw ConfigError("config: tolerances must be positive");
        const double dx = 1.0 / nx;
        for (double e : eps_list)
            if (e > 0 && e < 2.0 * dx)
                throw ConfigError("config: eps below twice the grid spacing");
        if (eps > 0 && eps < 2.0 * dx)
            throw ConfigError("config: eps below twice the grid spacing");
    }

    SolverConfig solver(std::uint64_t seed_override = 0) const {
        SolverConfig s;
        s.nx = nx;
        s.nt = nt;
        s.T = T;
        s.m = mass_m;
        s.M = mass_M;
        s.delta = delta;
        s.g = g;
        s.lambda = lambda;
        s.eps = eps;
        s.level = level;
        s.shadow_level = shadow_level;
        s.fermion_time_modes = n_time;
        s.fermion_n_space = n_space;
        s.fermion_window_lo = window_lo;
        s.fermion_window_hi = window_hi;
        s.degree_cap = degree_cap;
        s.seed = seed_override ? seed_override : seeds.at(0);
        s.picard_tol = picard_tol;
        s.picard_max = picard_max;
        s.window_steps = window_steps;
        s.contraction_target = contraction_target;
        s.blowup_L = blowup_L;
        s.ledger_frac = ledger_frac;
        return s;
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("n_time", c.n_time);
        get("n_space", c.n_space);
        get("delta", c.delta);
        get("mass_M", c.mass_M);
        get("mass_m", c.mass_m);
        get("window_lo", c.window_lo);
        get("window_hi", c.window_hi);
        get("g", c.g);
        get("lambda", c.lambda);
        get("filtration_depth", c.filtration_depth);
        get("level", c.level);
        get("shadow_level", c.shadow_level);
        get("degree_cap", c.degree_cap);
        get("nx", c.nx);
        get("nt", c.nt);
        get("T", c.T);
        get("eps_list", c.eps_list);
        get("eps", c.eps);
        get("seeds", c.seeds);
        get("picard_tol", c.picard_tol);
        get("picard_max", c.picard_max);
        get("window_steps", c.window_steps);
        get("contraction_target", c.contraction_target);
        get("blowup_L", c.blowup_L);
        get("ledger_frac", c.ledger_frac);
        get("u0_u", c.u0_u);
        get("u0_y", c.u0_y);
        get("out_dir", c.out_dir);
        c.validate();
        return c;
    }

    static ExperimentConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot open " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        return from_json(j);
    }
};

}  // namespace fsq
