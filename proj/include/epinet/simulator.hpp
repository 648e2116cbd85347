#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "epinet/replay.hpp"
#include "epinet/rng.hpp"
#include "epinet/types.hpp"

namespace epinet {

struct ErdosRenyi {
    double density = 0.0;
};

struct ExplicitNetwork {
    std::vector<Edge> edges;
};

/// Seed cases: `count` individuals chosen uniformly, all in `status`, unless
/// `explicit_seeds` is given.
struct SeedSpec {
    int count = 1;
    Status status = Status::E;
    std::vector<std::pair<int, Status>> explicit_seeds;
};

enum class CovariateColumn : std::uint8_t { Bernoulli, Normal };

struct CovariateGenerator {
    std::vector<CovariateColumn> columns;
};

struct SimConfig {
    int population = 2;
    std::variant<ErdosRenyi, ExplicitNetwork> network = ErdosRenyi{};
    SeedSpec seeds;
    double horizon = 1.0;
    PhaseSchedule schedule;
    std::variant<Covariates, CovariateGenerator> covariates = CovariateGenerator{};
    std::uint64_t seed = 0;
    /// Recompute every aggregate rate from scratch after each event and
    /// compare with the incremental cache.
    bool verify_rates = false;
    /// Record the total rate in force on each inter-event segment.
    bool record_trace = false;

    void validate() const;
};

/// Total rate between two consecutive state changes or phase boundaries.
struct TraceSegment {
    double start = 0.0;
    double end = 0.0;
    double total_rate = 0.0;
};

struct SimulationResult {
    EventLog log;
    Covariates covariates;
    std::vector<TraceSegment> trace;
    bool ended_early = false;

    double attack_rate() const;
};

/// Each unordered pair present independently with probability `density`.
std::vector<Edge> sample_initial_network(int population, double density, Rng& rng);

Covariates generate_covariates(int population, const CovariateGenerator& spec, Rng& rng);

/// Aggregate event rates of a state, computed from scratch.
struct RateBreakdown {
    double exposure = 0.0;
    double manifestation = 0.0;
    double recovery = 0.0;
    double external = 0.0;
    std::array<double, kPairTypes> activation{};
    std::array<double, kPairTypes> termination{};

    double total() const;
};

RateBreakdown full_rates(const Parameters& params, const SystemState& state, const Covariates& covariates,
                         int phase);

/// Exact Gillespie simulation of the joint epidemic and network process.
SimulationResult simulate(const Parameters& params, const SimConfig& config);

}  // namespace epinet
