#pragma once

#include <vector>

#include "epinet/network.hpp"
#include "epinet/types.hpp"

namespace epinet {

struct SystemState {
    std::vector<Status> status;
    Network network;
};

SystemState initial_state(const EventLog& log);

/// Applies one event in place. Throws ValidationError (tagged with `index`)
/// if the event is inconsistent with the current state.
void apply_event(SystemState& state, const Event& event, std::size_t index);

/// State at time t after applying every event with time <= t.
SystemState replay(const EventLog& log, double t);

/// Checks header invariants, event field rules, strict time ordering and
/// status/link consistency along the whole log.
void validate(const EventLog& log);

/// Link activation/termination rate for a pair with the given health views.
double rate_lookup(const Parameters& params, Health a, Health b, bool connected, int phase);

}  // namespace epinet
