#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "epinet/io.hpp"

namespace epinet::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kNumerical = 3 };

struct SimulateOutcome {
    SimulationResult result;
    std::uint64_t seed_used = 0;
    int attempts = 0;
};

/// Simulates, retrying with derived seeds until the attack rate reaches `min_attack_rate`.
SimulateOutcome simulate_with_retries(const io::SimulationSpec& spec, std::uint64_t seed, double min_attack_rate,
                                      int max_retries);

io::Json fit_complete_report(const EventLog& log, const Covariates& covariates, bool external);

struct StemOptions {
    int runs = 1;
    int iters = 80;
    int burn_in = 60;
    std::optional<int> window;
    std::uint64_t seed = 0;
    bool random_init = false;
    bool external = false;
    std::optional<std::filesystem::path> dump_chains;
};

io::Json fit_stem_report(const EventLog& log, const Covariates& covariates, const ObservationSpec& spec,
                         const StemOptions& options);

io::Json variance_report(const io::ChainDump& dump, const Parameters& theta);

/// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace epinet::cli
