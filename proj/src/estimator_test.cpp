#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "epinet/estimator.hpp"
#include "epinet/likelihood.hpp"
#include "epinet/simulator.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace epinet;

namespace {

bool has_flag(const std::vector<std::string>& flags, std::string_view prefix) {
    return std::any_of(flags.begin(), flags.end(), [&](const std::string& f) { return f.rfind(prefix, 0) == 0; });
}

SufficientStats empty_stats(std::size_t n) {
    SufficientStats st;
    st.population = n;
    st.horizon = 10.0;
    st.pressure_a.assign(n, 0.0);
    st.pressure_s.assign(n, 0.0);
    st.exposure_time.assign(n, 10.0);
    st.onset_time.assign(n, 10.0);
    return st;
}

SimulationResult lively(std::uint64_t seed, std::size_t dim, bool external) {
    Rng rng = make_rng(seed);
    for (;;) {
        SimulationResult r = testing::random_simulation(rng, 60, 20.0, dim, external);
        const SufficientStats st = sufficient_statistics(r.log, r.covariates);
        if (st.n_exposed >= 5 && (!external || st.n_external >= 2)) return r;
    }
}

/// Interior estimates zero their score; estimates on the zero boundary have a non-positive score.
void check_stationary(const FitResult& fit) {
    const ParameterLayout layout = ParameterLayout::of(fit.params);
    const auto theta = layout.flatten(fit.params);
    for (std::size_t k = 0; k < layout.size(); ++k) {
        INFO(layout.name(k), " = ", theta[k], " score ", fit.score[k]);
        if (theta[k] == 0.0 && layout.name(k).rfind("b_", 0) != 0) CHECK(fit.score[k] <= 0.0);
        else CHECK(std::abs(fit.score[k]) < 1e-6);
    }
}

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("closed forms are count over exposure ratios") {
    SufficientStats st = empty_stats(5);
    st.n_Is = 3;
    st.n_Ia = 2;
    st.n_manifest = 5;
    st.integral_E = 20.0;
    st.integral_I = 10.0;
    const ClosedForm cf = closed_form_mles(st);
    REQUIRE(cf.p_s);
    CHECK(*cf.p_s == doctest::Approx(0.6));
    REQUIRE(cf.phi);
    CHECK(*cf.phi == doctest::Approx(0.25));
    REQUIRE(cf.gamma);
    CHECK(*cf.gamma == 0.0);
    CHECK(has_flag(cf.flags, "gamma: boundary"));
    CHECK_FALSE(cf.alpha[0].has_value());
}

TEST_CASE("positive count with zero exposure time is an error") {
    SufficientStats st = empty_stats(2);
    st.n_recovered = 1;
    CHECK_THROWS_AS(closed_form_mles(st), EstimationError);
}

TEST_CASE("closed-form MLEs zero their score components") {
    const SimulationResult sim = lively(5, 2, false);
    const SufficientStats st = sufficient_statistics(sim.log, sim.covariates);
    const FitResult fit = fit_complete(st, sim.covariates);
    const ParameterLayout layout = ParameterLayout::of(fit.params);
    for (std::size_t k : {layout.phi(), layout.gamma(), layout.p_s()}) CHECK(std::abs(fit.score[k]) < 1e-6);
}

TEST_CASE("Poisson fit: intercept-only closed form") {
    Eigen::VectorXd y(4), o(4);
    y << 0, 2, 1, 3;
    o << 0.1, -0.4, 1.2, 0.0;
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 1);
    const PoissonFit fit = poisson_offset_fit(y, x, o);
    CHECK(fit.coef(0) == doctest::Approx(std::log(y.sum() / o.array().exp().sum())).epsilon(1e-10));
}

TEST_CASE("Poisson fit: all-zero responses and rank deficiency are errors") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
    CHECK_THROWS_AS(poisson_offset_fit(Eigen::VectorXd::Zero(3), x, Eigen::VectorXd::Zero(3)), EstimationError);
    Eigen::MatrixXd x2(3, 2);
    x2 << 1, 2, 1, 2, 1, 2;
    Eigen::VectorXd y(3);
    y << 1, 0, 2;
    CHECK_THROWS_AS(poisson_offset_fit(y, x2, Eigen::VectorXd::Zero(3)), EstimationError);
}

TEST_CASE("Poisson fit matches an independent Newton oracle") {
    Rng rng = make_rng(1234);
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::MatrixXd x(50, 2);
        Eigen::VectorXd o(50), y(50);
        for (int i = 0; i < 50; ++i) {
            x(i, 0) = 1.0;
            x(i, 1) = testing::uniform(rng, -1.0, 1.0);
            o(i) = testing::uniform(rng, -1.0, 0.5);
            const double mu = std::exp(0.3 + 0.8 * x(i, 1) + o(i));
            y(i) = std::floor(mu + testing::uniform(rng, 0.0, 1.0));  // integer counts near the mean
        }
        const PoissonFit fit = poisson_offset_fit(y, x, o);
        const Eigen::VectorXd ref = testing::poisson_newton(y, x, o);
        CHECK(std::abs(fit.coef(0) - ref(0)) < 1e-6);
        CHECK(std::abs(fit.coef(1) - ref(1)) < 1e-6);
        CHECK(fit.max_score < 1e-8);
    }
}

TEST_CASE("no covariates and only Ia infectives: beta is the homogeneous ratio") {
    Rng rng = make_rng(8);
    Parameters truth = testing::random_parameters(rng, 0);
    truth.p_s = 0.0;
    SufficientStats st;
    Covariates cov;
    for (std::uint64_t seed = 1;; ++seed) {
        SimConfig c = testing::two_phase_config(60, 20.0, 0.2, seed, 0);
        c.seeds.count = 2;
        const SimulationResult sim = simulate(truth, c);
        st = sufficient_statistics(sim.log, sim.covariates);
        cov = sim.covariates;
        if (st.n_exposed >= 3) break;
    }
    REQUIRE(st.n_Is == 0);
    double pressure = 0.0;
    for (double v : st.pressure_a) pressure += v;
    const EpidemicEstimate est = solve_beta_bS_eta(st, cov, default_epidemic_init(st, 0));
    CHECK(est.beta == doctest::Approx(static_cast<double>(st.n_exposed) / pressure).epsilon(1e-10));
    CHECK(has_flag(est.flags, "exp_eta: unidentified"));
}

TEST_CASE("beta, b_S and exp_eta solver zeroes its score residuals") {
    for (std::uint64_t seed : {11u, 12u, 13u, 14u}) {
        const SimulationResult sim = lively(seed, 2, false);
        const SufficientStats st = sufficient_statistics(sim.log, sim.covariates);
        const EpidemicEstimate est = solve_beta_bS_eta(st, sim.covariates, default_epidemic_init(st, 2));
        for (double r : est.residuals) CHECK(std::abs(r) < 1e-6);
        const FitResult fit = fit_complete(st, sim.covariates);
        check_stationary(fit);
    }
}

TEST_CASE("solver output does not decrease the likelihood from the default start") {
    const SimulationResult sim = lively(21, 2, false);
    const SufficientStats st = sufficient_statistics(sim.log, sim.covariates);
    const FitResult fit = fit_complete(st, sim.covariates);
    Parameters start = fit.params;
    const EpidemicEstimate init = default_epidemic_init(st, 2);
    start.beta = init.beta;
    start.b_S = init.b_S;
    start.exp_eta = init.exp_eta;
    CHECK(log_likelihood(fit.params, st, sim.covariates).total() >= log_likelihood(start, st, sim.covariates).total());
}

TEST_CASE("external block: zero cases and the covariate-free closed form") {
    SufficientStats st = empty_stats(4);
    const ExternalEstimate none = solve_external(st, Covariates(4, 1, {0, 1, 0, 1}));
    CHECK(none.params.xi == 0.0);
    CHECK(has_flag(none.flags, "xi: boundary"));

    st.n_external = 2;
    st.external_ids = {1, 3};
    st.onset_time = {10.0, 2.0, 10.0, 5.0};
    const ExternalEstimate est = solve_external(st, Covariates(4, 0));
    CHECK(est.params.xi == doctest::Approx(2.0 / 27.0));
}

TEST_CASE("external block zeroes its score and ignores internal statistics") {
    const SimulationResult sim = lively(31, 2, true);
    const SufficientStats st = sufficient_statistics(sim.log, sim.covariates);
    const ExternalEstimate est = solve_external(st, sim.covariates);
    for (double r : est.residuals) CHECK(std::abs(r) < 1e-6);
    SufficientStats stripped = st;
    stripped.n_exposed = 0;
    stripped.exposed_ids.clear();
    stripped.snapshot_a.clear();
    stripped.snapshot_s.clear();
    std::fill(stripped.pressure_a.begin(), stripped.pressure_a.end(), 0.0);
    std::fill(stripped.pressure_s.begin(), stripped.pressure_s.end(), 0.0);
    stripped.integral_E = 0.0;
    const ExternalEstimate again = solve_external(stripped, sim.covariates);
    CHECK(again.params == est.params);

    FitOptions opt;
    opt.external = true;
    check_stationary(fit_complete(st, sim.covariates, opt));
}

TEST_CASE("link-rate estimates depend only on network statistics") {
    const SimulationResult sim = lively(41, 2, false);
    const SufficientStats st = sufficient_statistics(sim.log, sim.covariates);
    SufficientStats alt = st;
    alt.integral_E *= 2.0;
    alt.n_recovered += 1;
    const ClosedForm a = closed_form_mles(st);
    const ClosedForm b = closed_form_mles(alt);
    CHECK(a.alpha == b.alpha);
    CHECK(a.omega == b.omega);
}

}  // TEST_SUITE
