#include "epinet/replay.hpp"

#include <string>

namespace epinet {

namespace {

std::string describe(std::size_t index, const Event& e) {
    return "event " + std::to_string(index) + " (" + std::string(to_string(e.kind)) + " of " +
           std::to_string(e.actor) + " at t=" + std::to_string(e.time) + ")";
}

void check_fields(const Event& e, std::size_t index, std::size_t n, double horizon) {
    auto in_range = [n](int id) { return id >= 0 && static_cast<std::size_t>(id) < n; };
    if (!std::isfinite(e.time) || e.time < 0.0 || e.time > horizon) {
        throw ValidationError(describe(index, e) + ": time outside [0, T]", index);
    }
    if (!in_range(e.actor)) throw ValidationError(describe(index, e) + ": actor out of range", index);
    if (is_link_event(e.kind)) {
        if (!e.partner) throw ValidationError(describe(index, e) + ": link event without partner", index);
        if (*e.partner == e.actor) throw ValidationError(describe(index, e) + ": self link", index);
    }
    if (e.partner && !in_range(*e.partner)) {
        throw ValidationError(describe(index, e) + ": partner out of range", index);
    }
    const bool wants_subtype = e.kind == EventKind::Manifestation || e.kind == EventKind::ExternalOnset;
    if (wants_subtype != e.subtype.has_value()) {
        throw ValidationError(describe(index, e) + ": subtype present on the wrong event kind", index);
    }
    if (e.partner && !is_link_event(e.kind) && e.kind != EventKind::Exposure) {
        throw ValidationError(describe(index, e) + ": partner only allowed on link and exposure events", index);
    }
}

}  // namespace

SystemState initial_state(const EventLog& log) {
    const std::size_t n = log.population();
    SystemState state{log.initial_statuses, Network(n)};
    for (const auto& [i, j] : log.initial_edges) {
        if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= n || static_cast<std::size_t>(j) >= n || i == j) {
            throw ValidationError("initial edge (" + std::to_string(i) + ", " + std::to_string(j) + ") is invalid");
        }
        if (!state.network.connect(i, j)) {
            throw ValidationError("initial edge (" + std::to_string(i) + ", " + std::to_string(j) + ") repeated");
        }
    }
    return state;
}

void apply_event(SystemState& state, const Event& e, std::size_t index) {
    auto& status = state.status;
    const auto actor = static_cast<std::size_t>(e.actor);
    auto expect = [&](bool ok, const char* what) {
        if (!ok) throw ValidationError(describe(index, e) + ": " + what, index);
    };
    switch (e.kind) {
        case EventKind::Exposure:
            expect(status[actor] == Status::S, "actor is not susceptible");
            if (e.partner) {
                expect(is_infectious(status[static_cast<std::size_t>(*e.partner)]), "infector is not infectious");
                expect(state.network.connected(e.actor, *e.partner), "infector is not a contact");
            }
            status[actor] = Status::E;
            break;
        case EventKind::Manifestation:
            expect(status[actor] == Status::E, "actor is not exposed");
            status[actor] = status_of(*e.subtype);
            break;
        case EventKind::ExternalOnset:
            expect(status[actor] == Status::S, "actor is not susceptible");
            status[actor] = status_of(*e.subtype);
            break;
        case EventKind::Recovery:
            expect(is_infectious(status[actor]), "actor is not infectious");
            status[actor] = Status::R;
            break;
        case EventKind::LinkActivate:
            expect(state.network.connect(e.actor, *e.partner), "link already active");
            break;
        case EventKind::LinkTerminate:
            expect(state.network.disconnect(e.actor, *e.partner), "link not active");
            break;
    }
}

SystemState replay(const EventLog& log, double t) {
    SystemState state = initial_state(log);
    for (std::size_t k = 0; k < log.events.size(); ++k) {
        if (log.events[k].time > t) break;
        apply_event(state, log.events[k], k);
    }
    return state;
}

void validate(const EventLog& log) {
    if (!(log.horizon > 0.0) || !std::isfinite(log.horizon)) throw ValidationError("horizon must be positive");
    if (log.population() == 0) throw ValidationError("population is empty");
    if (log.schedule.horizon() != log.horizon) {
        throw ValidationError("phase schedule does not cover (0, T]");
    }
    SystemState state = initial_state(log);
    const std::size_t n = log.population();
    double previous = -1.0;
    for (std::size_t k = 0; k < log.events.size(); ++k) {
        const Event& e = log.events[k];
        check_fields(e, k, n, log.horizon);
        if (!(e.time > previous)) {
            throw ValidationError(describe(k, e) + ": timestamps must increase strictly", k);
        }
        previous = e.time;
        apply_event(state, e, k);
    }
}

double rate_lookup(const Parameters& params, Health a, Health b, bool connected, int phase) {
    const PairType type = pair_type(a, b);
    return connected ? params.omega(type, phase) : params.alpha(type, phase);
}

}  // namespace epinet
