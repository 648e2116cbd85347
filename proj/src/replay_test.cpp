#include <doctest.h>

#include "epinet/replay.hpp"
#include "epinet/simulator.hpp"
#include "support/generators.hpp"

using namespace epinet;

namespace {

EventLog three_person_log() {
    EventLog log;
    log.horizon = 10.0;
    log.initial_statuses = {Status::S, Status::S, Status::Ia};
    log.initial_edges = {{0, 2}};
    log.schedule = PhaseSchedule::constant(10.0);
    return log;
}

}  // namespace

TEST_SUITE("core-model") {

TEST_CASE("phase schedule lookups") {
    const PhaseSchedule s({{0.0, 25.0, 0}, {25.0, 50.0, 1}});
    CHECK(s.phase_at(0.0) == 0);
    CHECK(s.phase_at(25.0) == 0);
    CHECK(s.phase_at(25.5) == 1);
    CHECK(s.measure(0) == doctest::Approx(25.0));
    CHECK(s.measure(1) == doctest::Approx(25.0));
    CHECK(s.next_boundary(10.0) == 25.0);
    CHECK(s.next_boundary(25.0) == 50.0);
    CHECK_THROWS_AS(PhaseSchedule({{0.0, 10.0, 0}, {12.0, 20.0, 1}}), ValidationError);
}

TEST_CASE("rate vectors use phase-major slots") {
    CHECK(link_slot(PairType::HH, 0) == 0);
    CHECK(link_slot(PairType::II, 0) == 2);
    CHECK(link_slot(PairType::HI, 1) == 4);
    CHECK(pair_type(Health::I, Health::H) == PairType::HI);
}

TEST_CASE("parameter layout flattens and restores every scalar") {
    const Parameters p = Parameters::reference_setting();
    const ParameterLayout layout = ParameterLayout::of(p);
    CHECK(layout.size() == 19);
    CHECK(layout.name(layout.alpha(4)) == "alpha_HI1");
    CHECK(layout.name(layout.omega(4)) == "omega_HI1");
    CHECK(layout.unflatten(layout.flatten(p)) == p);
    CHECK(*layout.index_of("b_S_1") == layout.b_S(1));

    Rng rng = make_rng(3);
    const Parameters q = testing::random_parameters(rng, 3, true);
    const ParameterLayout lq = ParameterLayout::of(q);
    CHECK(lq.size() == 5 + 3 + 12 + 1 + 3);
    CHECK(lq.unflatten(lq.flatten(q)) == q);
}

TEST_CASE("step hazard cumulative integral") {
    const StepHazard h({0.0, 3.0, 7.0, 10.0}, {0.5, 0.0, 2.0});
    CHECK(h.integral() == doctest::Approx(7.5));
    CHECK(h.cumulative(2.0) == doctest::Approx(1.0));
    CHECK(h.cumulative(8.0) == doctest::Approx(3.5));
    CHECK(h.at(8.0) == 2.0);
}

TEST_CASE("rate lookup matches the ground-truth vectors and is symmetric") {
    const Parameters p = Parameters::reference_setting();
    CHECK(rate_lookup(p, Health::H, Health::I, false, 1) == doctest::Approx(2e-4));
    CHECK(rate_lookup(p, Health::I, Health::H, true, 1) == doctest::Approx(50e-3));
    CHECK(rate_lookup(p, Health::H, Health::I, true, 1) == doctest::Approx(50e-3));
    for (Health a : {Health::H, Health::I}) {
        for (Health b : {Health::H, Health::I}) {
            for (bool c : {false, true}) {
                for (int phase : {0, 1}) CHECK(rate_lookup(p, a, b, c, phase) == rate_lookup(p, b, a, c, phase));
            }
        }
    }
}

TEST_CASE("replay of an empty log leaves the initial state") {
    const EventLog log = three_person_log();
    const SystemState s = replay(log, log.horizon);
    CHECK(s.status == log.initial_statuses);
    CHECK(s.network.edges() == log.initial_edges);
}

TEST_CASE("single link activation") {
    EventLog log = three_person_log();
    log.events.push_back({1.0, EventKind::LinkActivate, 0, 1, std::nullopt});
    CHECK_FALSE(replay(log, 0.5).network.connected(0, 1));
    CHECK(replay(log, 1.5).network.connected(0, 1));
    CHECK_NOTHROW(validate(log));
}

TEST_CASE("validation rejects inconsistent logs") {
    SUBCASE("exposure of a non-susceptible") {
        EventLog log = three_person_log();
        log.events.push_back({1.0, EventKind::Exposure, 2, std::nullopt, std::nullopt});
        CHECK_THROWS_AS(validate(log), ValidationError);
    }
    SUBCASE("equal timestamps") {
        EventLog log = three_person_log();
        log.events.push_back({1.0, EventKind::LinkActivate, 0, 1, std::nullopt});
        log.events.push_back({1.0, EventKind::LinkTerminate, 0, 1, std::nullopt});
        try {
            validate(log);
            FAIL("expected a validation error");
        } catch (const ValidationError& e) {
            CHECK(e.event_index() == std::optional<std::size_t>(1));
        }
    }
    SUBCASE("manifestation without subtype") {
        EventLog log = three_person_log();
        log.events.push_back({1.0, EventKind::Exposure, 0, std::nullopt, std::nullopt});
        log.events.push_back({2.0, EventKind::Manifestation, 0, std::nullopt, std::nullopt});
        CHECK_THROWS_AS(validate(log), ValidationError);
    }
    SUBCASE("terminating an absent link") {
        EventLog log = three_person_log();
        log.events.push_back({1.0, EventKind::LinkTerminate, 0, 1, std::nullopt});
        CHECK_THROWS_AS(validate(log), ValidationError);
    }
}

TEST_CASE("replay is prefix consistent on random logs") {
    Rng rng = make_rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        SimulationResult r = testing::random_simulation(rng, 15, 30.0);
        EventLog& log = r.log;
        if (log.events.size() > 200) log.events.resize(200);
        REQUIRE(log.events.size() > 20);
        validate(log);
        for (int q = 0; q < 20; ++q) {
            const double t = testing::uniform(rng, 0.0, log.events.back().time);
            const double u = testing::uniform(rng, t, log.horizon);
            SystemState inc = replay(log, t);
            for (std::size_t k = 0; k < log.events.size(); ++k) {
                if (log.events[k].time > t && log.events[k].time <= u) apply_event(inc, log.events[k], k);
            }
            const SystemState direct = replay(log, u);
            CHECK(inc.status == direct.status);
            CHECK(inc.network == direct.network);
        }
    }
}

}  // TEST_SUITE
