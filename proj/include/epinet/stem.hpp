#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epinet/estimator.hpp"
#include "epinet/likelihood.hpp"
#include "epinet/observed.hpp"

namespace epinet {

enum class InitMode { Neutral, Random, Explicit };

struct StemConfig {
    int burn_in = 60;
    int total_iters = 80;
    /// Averaging window m_it (last iterations kept for averaging and Louis samples).
    int window = 20;
    int runs = 1;
    std::uint64_t seed = 0;
    int max_attempts = 10000;
    int repair_rounds = 100;
    InitMode init = InitMode::Neutral;
    std::optional<Parameters> initial;
    FitOptions fit;

    void validate() const;
};

class StemError : public std::runtime_error {
public:
    StemError(const std::string& what, int iteration, std::vector<int> individuals = {})
        : std::runtime_error(what), iteration_(iteration), individuals_(std::move(individuals)) {}
    int iteration() const { return iteration_; }
    const std::vector<int>& individuals() const { return individuals_; }

private:
    int iteration_;
    std::vector<int> individuals_;
};

struct ParameterChain {
    /// Parameter iterates 1..total_iters.
    std::vector<Parameters> iterates;
    /// Augmented-data sufficient statistics of the last `window` iterations.
    std::vector<SufficientStats> samples;
    ImputationCounters counters;
    std::vector<std::string> flags;
};

/// Starting values for a run (neutral defaults, random perturbation, or explicit).
Parameters initial_parameters(const ObservedData& observed, const StemConfig& config, int run);

ParameterChain stem_run(const ObservedData& observed, const StemConfig& config, int run = 0);
std::vector<ParameterChain> stem_runs(const ObservedData& observed, const StemConfig& config);

enum class AveragingMode { WithinRun, AcrossRuns };

/// WithinRun: mean of the last m iterates of chains[0].
/// AcrossRuns: mean over the first m chains of each chain's last-`window` mean.
Parameters average_estimates(std::span<const ParameterChain> chains, AveragingMode mode, int m, int window = 1);

struct Information {
    Eigen::MatrixXd matrix;
    double asymmetry = 0.0;
    bool positive_definite = true;
};

/// Monte Carlo Louis identity: mean(-H) - cov(score) over augmented samples at theta.
Information louis_information(const Parameters& theta, std::span<const SufficientStats> samples,
                              const Covariates& covariates);

struct StandardErrors {
    Eigen::MatrixXd covariance;
    std::vector<double> se;  ///< NaN where the parameter carries no information
    double multiplier = 1.0;
};

double variance_multiplier(int m, AveragingMode mode);
StandardErrors asymptotic_se(const Eigen::MatrixXd& info, int m, AveragingMode mode);

}  // namespace epinet
