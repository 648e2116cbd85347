#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epinet/likelihood.hpp"
#include "epinet/types.hpp"

namespace epinet {

/// Numerical failure inside an estimator; carries the last iterate when available.
class EstimationError : public std::runtime_error {
public:
    explicit EstimationError(const std::string& what, std::vector<double> last_iterate = {},
                             std::vector<double> residuals = {})
        : std::runtime_error(what), last_iterate_(std::move(last_iterate)), residuals_(std::move(residuals)) {}

    const std::vector<double>& last_iterate() const { return last_iterate_; }
    const std::vector<double>& residuals() const { return residuals_; }

private:
    std::vector<double> last_iterate_;
    std::vector<double> residuals_;
};

struct ClosedForm {
    /// nullopt means 0/0 (undetermined).
    std::optional<double> phi;
    std::optional<double> p_s;
    std::optional<double> gamma;
    std::array<std::optional<double>, kLinkRateSlots> alpha;
    std::array<std::optional<double>, kLinkRateSlots> omega;
    std::vector<std::string> flags;
};

ClosedForm closed_form_mles(const SufficientStats& stats);

struct PoissonFit {
    Eigen::VectorXd coef;
    int iterations = 0;
    double max_score = 0.0;
};

/// Maximizes sum_i y_i (x_i b + o_i) - exp(x_i b + o_i) by damped Newton.
PoissonFit poisson_offset_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, const Eigen::VectorXd& offsets,
                              const Eigen::VectorXd* start = nullptr, double tol = 1e-8, int max_iter = 100);

struct EpidemicEstimate {
    double beta = 0.0;
    std::vector<double> b_S;
    double exp_eta = 1.0;
    int iterations = 0;
    std::vector<double> residuals;  // score in (beta, b_S..., exp_eta) order
    std::vector<std::string> flags;
};

struct SolverOptions {
    double tol = 1e-8;
    int max_iter = 500;
    bool fix_beta = false;
    bool fix_b_S = false;
    bool fix_exp_eta = false;
};

/// Homogeneous-model starting point: beta = n_E / sum F_i(1), b_S = 0, exp_eta = 1.
EpidemicEstimate default_epidemic_init(const SufficientStats& stats, std::size_t dim);

EpidemicEstimate solve_beta_bS_eta(const SufficientStats& stats, const Covariates& covariates,
                                   const EpidemicEstimate& init, const SolverOptions& options = {});

struct ExternalEstimate {
    ExternalParams params;
    int iterations = 0;
    std::vector<double> residuals;
    std::vector<std::string> flags;
};

ExternalEstimate solve_external(const SufficientStats& stats, const Covariates& covariates,
                                const std::optional<ExternalParams>& init = std::nullopt,
                                const SolverOptions& options = {});

struct FitOptions {
    SolverOptions solver;
    bool external = false;
    /// Values used for parameters that are held fixed (and as fallback for undetermined closed forms).
    std::optional<Parameters> reference;
    /// Hold every parameter except exp_eta and b_S at `reference`.
    bool only_eta_and_b_S = false;
};

struct FitResult {
    Parameters params;
    std::vector<double> score;
    std::vector<std::string> flags;
    int iterations = 0;
};

FitResult fit_complete(const SufficientStats& stats, const Covariates& covariates, const FitOptions& options = {});

}  // namespace epinet
