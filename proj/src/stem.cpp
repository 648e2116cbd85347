#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <cmath>
#include <limits>
#include <string>

#include "epinet/stem.hpp"

namespace epinet {

void StemConfig::validate() const {
    if (total_iters < 1) throw std::invalid_argument("total iterations must be positive");
    if (burn_in < 0 || burn_in >= total_iters) throw std::invalid_argument("burn-in must be in [0, total iterations)");
    if (window < 1 || window > total_iters - burn_in) {
        throw std::invalid_argument("averaging window must be in [1, total iterations - burn-in]");
    }
    if (runs < 1) throw std::invalid_argument("at least one run is required");
    if (max_attempts < 1 || repair_rounds < 1) throw std::invalid_argument("imputation limits must be positive");
    if (init == InitMode::Explicit && !initial) throw std::invalid_argument("explicit init needs initial parameters");
    if (fit.only_eta_and_b_S && !fit.reference) throw std::invalid_argument("fixed-parameter mode needs reference values");
}

Parameters initial_parameters(const ObservedData& observed, const StemConfig& config, int run) {
    if (config.init == InitMode::Explicit) return *config.initial;
    const std::size_t dim = observed.covariates.dim();
    Parameters p;
    if (config.fit.only_eta_and_b_S) {
        p = *config.fit.reference;
        p.exp_eta = 1.0;
        p.b_S.assign(dim, 0.0);
    } else {
        p.beta = 0.1;
        p.exp_eta = 1.0;
        p.phi = 0.1;
        p.gamma = 0.1;
        p.p_s = 0.5;
        p.b_S.assign(dim, 0.0);
        p.alpha.values.fill(1e-3);
        p.omega.values.fill(1e-2);
        bool external = config.fit.external;
        for (const Event& e : observed.log.events) external = external || e.kind == EventKind::ExternalOnset;
        if (external) p.external = ExternalParams{0.01, std::vector<double>(dim, 0.0)};
    }
    if (config.init == InitMode::Random) {
        Rng rng = make_rng(config.seed, {static_cast<std::uint64_t>(run), 0xABCDULL});
        std::uniform_real_distribution<double> factor(-std::log(2.0), std::log(2.0));
        std::uniform_real_distribution<double> shift(-0.5, 0.5);
        if (!config.fit.only_eta_and_b_S) {
            p.beta *= std::exp(factor(rng));
            p.phi *= std::exp(factor(rng));
            p.gamma *= std::exp(factor(rng));
        }
        p.exp_eta *= std::exp(factor(rng));
        for (double& b : p.b_S) b += shift(rng);
    }
    return p;
}

ParameterChain stem_run(const ObservedData& observed, const StemConfig& config, int run) {
    config.validate();
    const Imputer imputer(observed, config.max_attempts, config.repair_rounds);
    Imputer::State state = imputer.initial_state();
    Parameters theta = initial_parameters(observed, config, run);
    ParameterChain chain;
    chain.iterates.reserve(static_cast<std::size_t>(config.total_iters));
    const auto r = static_cast<std::uint64_t>(run);

    for (int s = 1; s <= config.total_iters; ++s) {
        const auto it = static_cast<std::uint64_t>(s);
        SufficientStats stats;
        try {
            imputer.draw_exposures(state, theta, derive_seed(config.seed, {r, it, 1}), chain.counters);
            imputer.draw_recoveries(state, theta, derive_seed(config.seed, {r, it, 2}), chain.counters);
            stats = sufficient_statistics(imputer.augmented_log(state), observed.covariates);
        } catch (const SamplingError& err) {
            throw StemError(std::string("imputation failed: ") + err.what(), s, err.individuals());
        } catch (const ValidationError& err) {
            throw StemError(std::string("augmented data invalid: ") + err.what(), s);
        }
        FitOptions options = config.fit;
        if (!options.only_eta_and_b_S) options.reference = theta;
        try {
            FitResult fit = fit_complete(stats, observed.covariates, options);
            theta = std::move(fit.params);
            if (s == config.total_iters) chain.flags = std::move(fit.flags);
        } catch (const EstimationError& err) {
            throw StemError(std::string("M-step failed: ") + err.what(), s);
        }
        chain.iterates.push_back(theta);
        if (s > config.total_iters - config.window) chain.samples.push_back(std::move(stats));
    }
    return chain;
}

std::vector<ParameterChain> stem_runs(const ObservedData& observed, const StemConfig& config) {
    config.validate();
    const auto runs = static_cast<std::size_t>(config.runs);
    std::vector<ParameterChain> chains(runs);
    std::vector<std::exception_ptr> errors(runs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < runs; r = next++) {
            try {
                chains[r] = stem_run(observed, config, static_cast<int>(r));
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min<std::size_t>(runs, std::max(1u, std::thread::hardware_concurrency()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return chains;
}

namespace {

/// Mean that reproduces identical inputs exactly.
void running_mean(std::vector<double>& mean, const std::vector<double>& x, int count) {
    if (count == 1) {
        mean = x;
        return;
    }
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += (x[k] - mean[k]) / count;
}

std::vector<double> tail_mean(const ParameterChain& chain, const ParameterLayout& layout, int m) {
    if (m < 1 || static_cast<std::size_t>(m) > chain.iterates.size()) {
        throw std::invalid_argument("not enough iterations to average");
    }
    std::vector<double> mean;
    int count = 0;
    for (std::size_t k = chain.iterates.size() - static_cast<std::size_t>(m); k < chain.iterates.size(); ++k) {
        running_mean(mean, layout.flatten(chain.iterates[k]), ++count);
    }
    return mean;
}

}  // namespace

Parameters average_estimates(std::span<const ParameterChain> chains, AveragingMode mode, int m, int window) {
    if (chains.empty() || chains.front().iterates.empty()) throw std::invalid_argument("no chains to average");
    const ParameterLayout layout = ParameterLayout::of(chains.front().iterates.back());
    if (mode == AveragingMode::WithinRun) return layout.unflatten(tail_mean(chains.front(), layout, m));
    if (m < 1 || static_cast<std::size_t>(m) > chains.size()) throw std::invalid_argument("not enough runs to average");
    std::vector<double> mean;
    for (int r = 0; r < m; ++r) running_mean(mean, tail_mean(chains[static_cast<std::size_t>(r)], layout, window), r + 1);
    return layout.unflatten(mean);
}

Information louis_information(const Parameters& theta, std::span<const SufficientStats> samples,
                              const Covariates& covariates) {
    if (samples.size() < 2) throw std::invalid_argument("Louis estimate needs at least two augmented samples");
    const auto p = static_cast<Eigen::Index>(ParameterLayout::of(theta).size());
    Eigen::MatrixXd mean_neg_h = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd mean_g = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(p, p);
    double count = 0.0;
    for (const auto& st : samples) {
        const auto g_raw = score(theta, st, covariates);
        const Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(g_raw.data(), p);
        const Eigen::MatrixXd h = hessian(theta, st, covariates);
        count += 1.0;
        mean_neg_h += (-h - mean_neg_h) / count;
        const Eigen::VectorXd delta = g - mean_g;
        mean_g += delta / count;
        m2 += delta * (g - mean_g).transpose();
    }
    Information out;
    Eigen::MatrixXd info = mean_neg_h - m2 / (count - 1.0);
    out.asymmetry = (info - info.transpose()).cwiseAbs().maxCoeff();
    out.matrix = 0.5 * (info + info.transpose());
    for (Eigen::Index k = 0; k < p; ++k) {
        if (mean_neg_h(k, k) == 0.0) {
            out.matrix.row(k).setZero();
            out.matrix.col(k).setZero();
        }
    }

    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < p; ++k) {
        if (out.matrix(k, k) != 0.0) keep.push_back(k);
    }
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t a = 0; a < keep.size(); ++a) {
        for (std::size_t b = 0; b < keep.size(); ++b) {
            sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = out.matrix(keep[a], keep[b]);
        }
    }
    out.positive_definite = sub.size() == 0 || sub.llt().info() == Eigen::Success;
    return out;
}

double variance_multiplier(int m, AveragingMode mode) {
    if (m < 1) throw std::invalid_argument("averaging count must be positive");
    return mode == AveragingMode::AcrossRuns ? 1.0 + 0.5 / m : 1.5;
}

StandardErrors asymptotic_se(const Eigen::MatrixXd& info, int m, AveragingMode mode) {
    const Eigen::Index p = info.rows();
    if (info.cols() != p) throw std::invalid_argument("information matrix must be square");
    StandardErrors out;
    out.multiplier = variance_multiplier(m, mode);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.covariance = Eigen::MatrixXd::Constant(p, p, nan);
    out.se.assign(static_cast<std::size_t>(p), nan);

    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < p; ++k) {
        if (std::isfinite(info(k, k)) && info(k, k) != 0.0) keep.push_back(k);
    }
    const auto q = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd sub(q, q);
    for (Eigen::Index a = 0; a < q; ++a) {
        for (Eigen::Index b = 0; b < q; ++b) sub(a, b) = info(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (q > 0 && !lu.isInvertible()) throw EstimationError("information matrix is singular");
    const Eigen::MatrixXd inv = q > 0 ? Eigen::MatrixXd(lu.inverse()) : Eigen::MatrixXd();
    for (Eigen::Index a = 0; a < q; ++a) {
        for (Eigen::Index b = 0; b < q; ++b) {
            out.covariance(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]) = out.multiplier * inv(a, b);
        }
        const double v = out.multiplier * inv(a, a);
        out.se[static_cast<std::size_t>(keep[static_cast<std::size_t>(a)])] = v > 0.0 ? std::sqrt(v) : nan;
    }
    return out;
}

}  // namespace epinet
