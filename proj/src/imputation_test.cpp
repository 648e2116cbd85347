#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/quadrature/gauss.hpp>

#include "epinet/imputation.hpp"
#include "support/generators.hpp"
#include "support/stat_tests.hpp"

using namespace epinet;

namespace {

using Gauss = boost::math::quadrature::gauss<double, 30>;

/// CDF of the density proportional to f on the hazard support, by per-piece quadrature.
class QuadratureCdf {
public:
    QuadratureCdf(const StepHazard& h, std::function<double(double)> f) : h_(h), f_(std::move(f)) {
        cumulative_.push_back(0.0);
        for (std::size_t j = 0; j < h_.pieces(); ++j) {
            cumulative_.push_back(cumulative_.back() + Gauss::integrate(f_, h_.knots()[j], h_.knots()[j + 1]));
        }
    }
    double total() const { return cumulative_.back(); }
    double operator()(double t) const {
        if (t <= h_.lower()) return 0.0;
        if (t >= h_.upper()) return 1.0;
        const auto knots = h_.knots();
        const auto j = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin() - 1);
        return (cumulative_[j] + Gauss::integrate(f_, knots[j], t)) / total();
    }

private:
    StepHazard h_;
    std::function<double(double)> f_;
    std::vector<double> cumulative_;
};

std::function<double(double)> proposal_density(const StepHazard& h) {
    return [h](double t) { return h.at(t) * std::exp(-h.cumulative(t)); };
}

std::function<double(double)> target_density(const StepHazard& h, double phi, double t_I) {
    return [h, phi, t_I](double t) { return h.at(t) * std::exp(-h.cumulative(t) - phi * (t_I - t)); };
}

EventLog star_log(double horizon) {
    EventLog log;
    log.horizon = horizon;
    log.initial_statuses = {Status::S, Status::Ia, Status::Is, Status::S};
    log.initial_edges = {make_edge(0, 1), make_edge(0, 2)};
    log.schedule = PhaseSchedule({{0.0, horizon, 0}});
    return log;
}

}  // namespace

TEST_SUITE("imputation") {

TEST_CASE("exposure hazard levels") {
    const EventLog log = star_log(20.0);
    const ContactTimeline contacts(log);
    std::vector<InfectiousPeriod> periods(4);
    periods[1] = {true, 0.0, 100.0, Subtype::Ia};
    periods[2] = {true, 0.0, 100.0, Subtype::Is};
    Parameters p;
    p.beta = 0.2;
    p.exp_eta = std::exp(0.2);
    p.b_S = {0.0};
    const std::vector<double> x{0.7};
    const StepHazard h = build_exposure_hazard(0, contacts, periods, p, x, 1.0, 6.0);
    REQUIRE(h.pieces() == 1);
    CHECK(h.levels()[0] == doctest::Approx(0.444281).epsilon(1e-6));

    SUBCASE("no infectious neighbour gives a single zero piece") {
        const StepHazard z = build_exposure_hazard(3, contacts, periods, p, x, 1.0, 6.0);
        CHECK(z.pieces() == 1);
        CHECK(z.levels()[0] == 0.0);
    }
    SUBCASE("one Ia onset inside the window adds one change point") {
        std::vector<InfectiousPeriod> late(4);
        late[1] = {true, 3.0, 100.0, Subtype::Ia};
        p.b_S = {0.5};
        const StepHazard one = build_exposure_hazard(0, contacts, late, p, x, 1.0, 6.0);
        REQUIRE(one.pieces() == 2);
        CHECK(one.knots()[1] == 3.0);
        CHECK(one.levels()[0] == 0.0);
        CHECK(one.levels()[1] == doctest::Approx(0.2 * std::exp(0.5 * 0.7)));
    }
}

TEST_CASE("interval probabilities telescope to one") {
    Rng rng = make_rng(6);
    for (int k = 0; k < 200; ++k) {
        const StepHazard h = testing::random_step_hazard(rng);
        const auto probs = interval_probabilities(h);
        CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t j = 0; j < probs.size(); ++j) {
            if (h.levels()[j] == 0.0) CHECK(probs[j] == 0.0);
        }
    }
    CHECK(interval_probabilities(StepHazard({0.0, 2.0}, {0.3})) == std::vector<double>{1.0});
    CHECK_THROWS(sample_truncated_inhomo_exp(StepHazard({0.0, 2.0}, {0.0}), rng));
}

TEST_CASE("truncated inhomogeneous exponential matches its density") {
    const StepHazard h({0.0, 2.0, 4.0, 6.0}, {0.5, 0.0, 2.0});
    Rng rng = make_rng(101);
    std::vector<double> draws(100000);
    for (double& t : draws) t = sample_truncated_inhomo_exp(h, rng);
    CHECK(std::none_of(draws.begin(), draws.end(), [](double t) { return t > 2.0 && t < 4.0; }));
    const QuadratureCdf cdf(h, proposal_density(h));
    CHECK(testing::ks_test(draws, std::cref(cdf)).p_value > 0.001);
}

TEST_CASE("acceptance probability agrees with quadrature") {
    Rng rng = make_rng(15);
    for (int k = 0; k < 100; ++k) {
        const StepHazard h = testing::random_step_hazard(rng);
        const double phi = k % 10 == 0 ? h.levels()[0] : testing::uniform(rng, 0.0, 1.5);
        const double t_I = h.upper() + testing::uniform(rng, 0.0, 3.0);
        const QuadratureCdf prop(h, proposal_density(h));
        const QuadratureCdf targ(h, target_density(h, phi, t_I));
        const double expected = targ.total() / prop.total();
        CHECK(acceptance_probability(h, phi, t_I) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("proposal at the manifestation time is always accepted") {
    Rng rng = make_rng(2);
    for (int k = 0; k < 100; ++k) CHECK(sample_exposure_time(StepHazard({5.0 - 1e-12, 5.0}, {1.0}), 0.7, 5.0, rng).proposals == 1);
}

TEST_CASE("rejection sampler matches the exposure-time density") {
    struct Case {
        StepHazard h;
        double phi;
        double t_I;
    };
    const std::vector<Case> cases = {
        {StepHazard({0.0, 2.0, 4.0, 6.0}, {0.5, 0.0, 2.0}), 0.2, 10.0},
        {StepHazard({0.0, 2.0, 4.0, 6.0}, {0.5, 0.2, 2.0}), 0.2, 10.0},  // phi equals a level
        {StepHazard({1.0, 3.0, 7.0}, {0.05, 0.3}), 0.8, 7.0},
    };
    std::uint64_t seed = 500;
    for (const Case& c : cases) {
        Rng rng = make_rng(seed++);
        std::vector<double> draws(100000);
        long proposals = 0;
        for (double& t : draws) {
            const ExposureDraw d = sample_exposure_time(c.h, c.phi, c.t_I, rng);
            t = d.time;
            proposals += d.proposals;
        }
        const QuadratureCdf cdf(c.h, target_density(c.h, c.phi, c.t_I));
        CHECK(testing::ks_test(draws, std::cref(cdf)).p_value > 0.001);
        const double rate = static_cast<double>(draws.size()) / static_cast<double>(proposals);
        const double p = acceptance_probability(c.h, c.phi, c.t_I);
        CHECK(std::abs(rate - p) < 4.0 * std::sqrt(p * (1 - p) / static_cast<double>(proposals)) + 1e-3);
    }
}

TEST_CASE("direct sampler matches the exposure-time density") {
    const std::vector<std::tuple<StepHazard, double, double>> cases = {
        {StepHazard({0.0, 2.0, 4.0, 6.0}, {0.5, 0.0, 2.0}), 0.2, 10.0},
        {StepHazard({0.0, 2.0, 4.0, 6.0}, {0.5, 0.2, 2.0}), 0.2, 6.0},
        {StepHazard({0.0, 40.0, 47.0}, {2.0, 0.01}), 2.0, 47.36},  // acceptance far too small for rejection
    };
    std::uint64_t seed = 900;
    for (const auto& [h, phi, t_I] : cases) {
        Rng rng = make_rng(seed++);
        std::vector<double> draws(100000);
        for (double& t : draws) t = sample_exposure_time_direct(h, phi, t_I, rng);
        const QuadratureCdf cdf(h, target_density(h, phi, t_I));
        CHECK(testing::ks_test(draws, std::cref(cdf)).p_value > 0.001);
    }
}

TEST_CASE("rejection sampler reports an exhausted budget") {
    Rng rng = make_rng(1);
    CHECK_THROWS_AS(sample_exposure_time(StepHazard({0.0, 40.0, 47.0}, {2.0, 0.01}), 2.0, 47.36, rng, 50),
                    SamplingError);
}

TEST_CASE("truncated exponential") {
    Rng rng = make_rng(33);
    SUBCASE("support") {
        for (int k = 0; k < 10000; ++k) {
            const double lo = testing::uniform(rng, -5.0, 5.0);
            const double hi = lo + testing::uniform(rng, 1e-6, 10.0);
            const double rate = testing::uniform(rng, 0.0, 50.0);
            const double t = sample_truncated_exp(rate, lo, hi, rng);
            CHECK((t > lo && t < hi));
        }
    }
    SUBCASE("vanishing rate is uniform") {
        std::vector<double> draws(100000);
        for (double& t : draws) t = sample_truncated_exp(1e-9, 2.0, 5.0, rng);
        CHECK(testing::ks_test(draws, [](double x) { return std::clamp((x - 2.0) / 3.0, 0.0, 1.0); }).p_value > 0.001);
    }
    SUBCASE("mean on (0, 7) at rate 0.1") {
        std::vector<double> draws(1000000);
        for (double& t : draws) t = sample_truncated_exp(0.1, 0.0, 7.0, rng);
        const double expected = 1.0 / 0.1 - 7.0 * std::exp(-0.7) / (1.0 - std::exp(-0.7));
        const double se = std::sqrt(testing::variance(draws) / static_cast<double>(draws.size()));
        CHECK(std::abs(testing::mean(draws) - expected) < 3.0 * se);
    }
}

TEST_CASE("source probabilities") {
    const std::vector<SourceCandidate> c{{1, Subtype::Ia, true}, {2, Subtype::Is, true}, {3, Subtype::Is, false}};
    const auto p = source_probabilities(c, 2.0);
    CHECK(p[0] == doctest::Approx(0.2));
    CHECK(p[1] == doctest::Approx(0.4));
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("recovery sampler") {
    Rng rng = make_rng(44);
    const double gamma = 0.1;
    SUBCASE("empty recovery set") {
        const SourceQuery none = [](int, double) { return std::vector<SourceCandidate>{}; };
        CHECK(sample_recovery_times({}, {}, none, 1.0, gamma, rng).empty());
    }
    SUBCASE("sole potential source is forced past the exposure") {
        const std::vector<RecoveryCase> Q{{7, 1.0, 10.0}};
        const std::vector<ExposureCase> P{{3, 5.0}};
        const SourceQuery q = [](int, double) { return std::vector<SourceCandidate>{{7, Subtype::Ia, true}}; };
        for (int k = 0; k < 2000; ++k) {
            const auto t = sample_recovery_times(Q, P, q, 1.0, gamma, rng);
            REQUIRE(t.size() == 1);
            CHECK((t[0] > 5.0 && t[0] < 10.0));
        }
    }
    SUBCASE("a known source leaves the bound alone") {
        const std::vector<RecoveryCase> Q{{7, 1.0, 10.0}};
        const std::vector<ExposureCase> P{{3, 5.0}};
        const SourceQuery q = [](int, double) {
            return std::vector<SourceCandidate>{{7, Subtype::Ia, true}, {8, Subtype::Is, false}};
        };
        int below = 0;
        for (int k = 0; k < 2000; ++k) below += sample_recovery_times(Q, P, q, 1.0, gamma, rng)[0] < 5.0;
        CHECK(below > 0);
    }
    SUBCASE("subtype-weighted selection frequency") {
        const double e = std::exp(0.2);
        const double v = 3.0001;
        const std::vector<RecoveryCase> Q{{1, 0.0, v}, {2, 0.0, v}};
        const std::vector<ExposureCase> P{{5, 3.0}};
        const SourceQuery q = [](int, double) {
            return std::vector<SourceCandidate>{{1, Subtype::Ia, true}, {2, Subtype::Is, true}};
        };
        const double p_sel = e / (1.0 + e);
        CHECK(p_sel == doctest::Approx(0.549834).epsilon(1e-6));
        const double leak = (std::exp(-3.0 * gamma) - std::exp(-v * gamma)) / (1.0 - std::exp(-v * gamma));
        const double expected = p_sel + (1.0 - p_sel) * leak;
        const int trials = 100000;
        int past = 0;
        for (int k = 0; k < trials; ++k) past += sample_recovery_times(Q, P, q, e, gamma, rng)[1] > 3.0;
        const double freq = static_cast<double>(past) / trials;
        CHECK(std::abs(freq - expected) < 3.0 * std::sqrt(expected * (1 - expected) / trials));
    }
    SUBCASE("no potential source is an incompatibility") {
        const std::vector<RecoveryCase> Q{{7, 1.0, 10.0}};
        const std::vector<ExposureCase> P{{3, 5.0}};
        const SourceQuery none = [](int, double) { return std::vector<SourceCandidate>{}; };
        CHECK_THROWS_AS(sample_recovery_times(Q, P, none, 1.0, gamma, rng), SamplingError);
    }
}

}  // TEST_SUITE
