#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "epinet/rng.hpp"
#include "epinet/simulator.hpp"
#include "epinet/types.hpp"

namespace epinet::testing {

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform_open(rng); }

/// Moderate random rates that keep epidemics and link churn lively on small populations.
inline Parameters random_parameters(Rng& rng, std::size_t dim, bool external = false) {
    Parameters p;
    p.beta = uniform(rng, 0.1, 0.6);
    p.exp_eta = uniform(rng, 0.5, 2.0);
    p.phi = uniform(rng, 0.1, 0.5);
    p.gamma = uniform(rng, 0.05, 0.3);
    p.p_s = uniform(rng, 0.2, 0.8);
    for (std::size_t k = 0; k < dim; ++k) p.b_S.push_back(uniform(rng, -0.5, 0.5));
    for (auto& a : p.alpha.values) a = uniform(rng, 0.005, 0.05);
    for (auto& w : p.omega.values) w = uniform(rng, 0.02, 0.2);
    if (external) {
        ExternalParams ex;
        ex.xi = uniform(rng, 0.002, 0.02);
        for (std::size_t k = 0; k < dim; ++k) ex.b_E.push_back(uniform(rng, -0.5, 0.5));
        p.external = ex;
    }
    return p;
}

inline StepHazard random_step_hazard(Rng& rng, int max_pieces = 6) {
    const int pieces = 1 + static_cast<int>(uniform_open(rng) * max_pieces);
    std::vector<double> knots{uniform(rng, 0.0, 2.0)};
    std::vector<double> levels;
    for (int j = 0; j < pieces; ++j) {
        knots.push_back(knots.back() + uniform(rng, 0.1, 3.0));
        levels.push_back(uniform_open(rng) < 0.2 ? 0.0 : uniform(rng, 0.01, 2.0));
    }
    if (std::all_of(levels.begin(), levels.end(), [](double l) { return l == 0.0; })) levels.back() = 0.5;
    return StepHazard(knots, levels);
}

/// Two-phase configuration over (0, horizon] with the cut at the midpoint.
inline SimConfig two_phase_config(int population, double horizon, double density, std::uint64_t seed,
                                  std::size_t covariate_dim = 2) {
    SimConfig c;
    c.population = population;
    c.horizon = horizon;
    c.schedule = PhaseSchedule({{0.0, horizon / 2, 0}, {horizon / 2, horizon, 1}});
    c.network = ErdosRenyi{density};
    CovariateGenerator gen;
    for (std::size_t k = 0; k < covariate_dim; ++k) {
        gen.columns.push_back(k % 2 == 0 ? CovariateColumn::Bernoulli : CovariateColumn::Normal);
    }
    c.covariates = gen;
    c.seed = seed;
    return c;
}

/// Random simulated log with random parameters (a property-test input).
inline SimulationResult random_simulation(Rng& rng, int population, double horizon, std::size_t dim = 2,
                                          bool external = false) {
    const Parameters p = random_parameters(rng, dim, external);
    SimConfig c = two_phase_config(population, horizon, uniform(rng, 0.1, 0.4), rng(), dim);
    c.seeds.count = 1 + static_cast<int>(uniform_open(rng) * 2);
    return simulate(p, c);
}

/// The synthetic study setting: N individuals, T = 50 with the phase cut at 25,
/// ER density 0.05, one initially exposed case, Bernoulli + Normal covariates.
inline SimConfig study_config(int population, std::uint64_t seed) {
    return two_phase_config(population, 50.0, 0.05, seed, 2);
}

/// Study replicate `rep`, re-drawn with derived seeds until at least half the population is exposed.
inline SimulationResult study_replicate(int population, std::uint64_t master, int rep,
                                        const Parameters& truth = Parameters::reference_setting()) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        const SimConfig c = study_config(population, derive_seed(master, {static_cast<std::uint64_t>(rep), attempt}));
        SimulationResult r = simulate(truth, c);
        if (r.attack_rate() >= 0.5) return r;
    }
}

}  // namespace epinet::testing
