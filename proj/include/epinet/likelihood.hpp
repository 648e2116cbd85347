#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "epinet/types.hpp"

namespace epinet {

/// Counts and exact time integrals of the complete-data likelihood.
struct SufficientStats {
    std::size_t population = 0;
    double horizon = 0.0;

    long n_exposed = 0;          ///< internal exposure events
    long n_manifest = 0;         ///< E -> I transitions (internal cases)
    long n_external = 0;         ///< S -> I external onsets
    long n_recovered = 0;
    long n_Is = 0;               ///< subtype draws, internal and external
    long n_Ia = 0;
    std::array<long, kLinkRateSlots> activations{};
    std::array<long, kLinkRateSlots> terminations{};

    double integral_E = 0.0;
    double integral_I = 0.0;
    std::array<double, kLinkRateSlots> integral_disconnected{};
    std::array<double, kLinkRateSlots> integral_connected{};

    /// Per individual: integral of Ia / Is neighbour counts while susceptible
    /// (up to t_E, or T if never exposed).
    std::vector<double> pressure_a;
    std::vector<double> pressure_s;
    /// Ids of internally exposed individuals with the neighbour snapshot at exposure.
    std::vector<int> exposed_ids;
    std::vector<int> snapshot_a;
    std::vector<int> snapshot_s;
    std::vector<int> external_ids;
    /// Exposure / onset times; T if the event never happened, 0 if it precedes the window.
    std::vector<double> exposure_time;
    std::vector<double> onset_time;

    long n_infectives() const { return n_Is + n_Ia; }
};

/// Single chronological sweep over the log (phase boundaries included).
SufficientStats sufficient_statistics(const EventLog& log, const Covariates& covariates);

struct LogLikelihood {
    double epidemic = 0.0;
    double network = 0.0;
    double external = 0.0;
    /// Set when an exposure has no infectious contact at its time.
    bool impossible = false;

    double total() const { return epidemic + network + external; }
};

/// Complete-data log-likelihood; returns -inf (flagged) on impossible data.
LogLikelihood log_likelihood(const Parameters& params, const SufficientStats& stats, const Covariates& covariates);

/// Analytic gradient in ParameterLayout order (derivative w.r.t. exp_eta, not eta).
std::vector<double> score(const Parameters& params, const SufficientStats& stats, const Covariates& covariates);

/// Analytic Hessian of the complete-data log-likelihood in ParameterLayout order.
Eigen::MatrixXd hessian(const Parameters& params, const SufficientStats& stats, const Covariates& covariates);

/// Hessian by central differences of the analytic score (relative step `h`).
Eigen::MatrixXd hessian_numeric(const Parameters& params, const SufficientStats& stats, const Covariates& covariates,
                                double h = 1e-6);

}  // namespace epinet
