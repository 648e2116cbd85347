#include <algorithm>
#include <string>

#include "epinet/likelihood.hpp"
#include "epinet/replay.hpp"

namespace epinet {

namespace {

/// Sweep state: counts needed for the piecewise-constant integrands.
class Sweep {
public:
    Sweep(const EventLog& log, SufficientStats& out) : out_(out), state_(initial_state(log)) {
        const std::size_t n = log.population();
        ia_.assign(n, 0);
        is_.assign(n, 0);
        since_.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const Status s = state_.status[i];
            if (s == Status::E) ++exposed_;
            if (is_infectious(s)) ++infectious_;
        }
        for (const auto& [i, j] : log.initial_edges) ++connected_[static_cast<int>(type_of(i, j))];
        for (std::size_t i = 0; i < n; ++i) {
            if (state_.status[i] != Status::S) continue;
            for (int j : state_.network.neighbors(static_cast<int>(i))) count(i, state_.status[static_cast<std::size_t>(j)], +1);
        }
    }

    void advance(double to, int phase) {
        const double dt = to - now_;
        if (dt <= 0.0) return;
        out_.integral_E += exposed_ * dt;
        out_.integral_I += infectious_ * dt;
        const double healthy = static_cast<double>(state_.status.size()) - infectious_;
        const double inf = infectious_;
        const std::array<double, kPairTypes> totals{healthy * (healthy - 1.0) / 2.0, healthy * inf,
                                                    inf * (inf - 1.0) / 2.0};
        for (int t = 0; t < kPairTypes; ++t) {
            const auto slot = static_cast<std::size_t>(link_slot(static_cast<PairType>(t), phase));
            const double mc = static_cast<double>(connected_[t]);
            out_.integral_connected[slot] += mc * dt;
            out_.integral_disconnected[slot] += (totals[static_cast<std::size_t>(t)] - mc) * dt;
        }
        now_ = to;
    }

    void apply(const Event& e, std::size_t index, int phase) {
        const auto a = static_cast<std::size_t>(e.actor);
        switch (e.kind) {
            case EventKind::Exposure:
                flush(a);
                out_.exposed_ids.push_back(e.actor);
                out_.snapshot_a.push_back(ia_[a]);
                out_.snapshot_s.push_back(is_[a]);
                out_.exposure_time[a] = e.time;
                ++out_.n_exposed;
                apply_event(state_, e, index);
                ++exposed_;
                break;
            case EventKind::Manifestation:
                ++out_.n_manifest;
                tally(*e.subtype);
                out_.onset_time[a] = e.time;
                --exposed_;
                infect(e, index);
                break;
            case EventKind::ExternalOnset:
                flush(a);
                ++out_.n_external;
                out_.external_ids.push_back(e.actor);
                tally(*e.subtype);
                out_.onset_time[a] = e.time;
                infect(e, index);
                break;
            case EventKind::Recovery: {
                ++out_.n_recovered;
                const Status old = state_.status[a];
                for (int j : state_.network.neighbors(e.actor)) {
                    shift_type(j, Health::I, Health::H);
                    neighbor_change(j, old, -1);
                }
                apply_event(state_, e, index);
                --infectious_;
                break;
            }
            case EventKind::LinkActivate:
            case EventKind::LinkTerminate: {
                const bool up = e.kind == EventKind::LinkActivate;
                const int slot = link_slot(type_of(e.actor, *e.partner), phase);
                auto& counter = up ? out_.activations : out_.terminations;
                ++counter[static_cast<std::size_t>(slot)];
                apply_event(state_, e, index);
                connected_[static_cast<int>(type_of(e.actor, *e.partner))] += up ? 1 : -1;
                const int delta = up ? 1 : -1;
                neighbor_change(e.actor, state_.status[static_cast<std::size_t>(*e.partner)], delta);
                neighbor_change(*e.partner, state_.status[a], delta);
                break;
            }
        }
    }

    void finish(double horizon) {
        for (std::size_t i = 0; i < state_.status.size(); ++i) {
            if (state_.status[i] == Status::S) {
                const double save = now_;
                now_ = horizon;
                flush(i);
                now_ = save;
            }
        }
    }

private:
    PairType type_of(int i, int j) const {
        return pair_type(health_of(state_.status[static_cast<std::size_t>(i)]),
                         health_of(state_.status[static_cast<std::size_t>(j)]));
    }

    void count(std::size_t i, Status neighbor, int delta) {
        if (neighbor == Status::Ia) ia_[i] += delta;
        if (neighbor == Status::Is) is_[i] += delta;
    }

    // Bank the pressure integral of a susceptible up to the current time.
    void flush(std::size_t i) {
        const double dt = now_ - since_[i];
        out_.pressure_a[i] += ia_[i] * dt;
        out_.pressure_s[i] += is_[i] * dt;
        since_[i] = now_;
    }

    void neighbor_change(int i, Status neighbor, int delta) {
        const auto s = static_cast<std::size_t>(i);
        if (state_.status[s] != Status::S || !is_infectious(neighbor)) return;
        flush(s);
        count(s, neighbor, delta);
    }

    void shift_type(int neighbor, Health from, Health to) {
        const Health h = health_of(state_.status[static_cast<std::size_t>(neighbor)]);
        --connected_[static_cast<int>(pair_type(from, h))];
        ++connected_[static_cast<int>(pair_type(to, h))];
    }

    void infect(const Event& e, std::size_t index) {
        apply_event(state_, e, index);
        ++infectious_;
        for (int j : state_.network.neighbors(e.actor)) {
            shift_type(j, Health::H, Health::I);
            neighbor_change(j, state_.status[static_cast<std::size_t>(e.actor)], +1);
        }
    }

    void tally(Subtype s) { (s == Subtype::Is ? out_.n_Is : out_.n_Ia) += 1; }

    SufficientStats& out_;
    SystemState state_;
    std::vector<int> ia_;
    std::vector<int> is_;
    std::vector<double> since_;
    double now_ = 0.0;
    double exposed_ = 0.0;
    double infectious_ = 0.0;
    std::array<long, kPairTypes> connected_{};
};

}  // namespace

SufficientStats sufficient_statistics(const EventLog& log, const Covariates& covariates) {
    validate(log);
    const std::size_t n = log.population();
    if (covariates.size() != n) {
        throw ValidationError("covariates have " + std::to_string(covariates.size()) + " rows for a population of " +
                              std::to_string(n));
    }
    SufficientStats out;
    out.population = n;
    out.horizon = log.horizon;
    out.pressure_a.assign(n, 0.0);
    out.pressure_s.assign(n, 0.0);
    out.exposure_time.assign(n, log.horizon);
    out.onset_time.assign(n, log.horizon);
    for (std::size_t i = 0; i < n; ++i) {
        const Status s = log.initial_statuses[i];
        if (s != Status::S) out.exposure_time[i] = 0.0;
        if (is_infectious(s) || s == Status::R) out.onset_time[i] = 0.0;
    }

    Sweep sweep(log, out);
    const auto intervals = log.schedule.intervals();
    std::size_t segment = 0;
    for (std::size_t k = 0; k < log.events.size(); ++k) {
        const Event& e = log.events[k];
        while (e.time > intervals[segment].end) {
            sweep.advance(intervals[segment].end, intervals[segment].phase);
            ++segment;
        }
        sweep.advance(e.time, intervals[segment].phase);
        sweep.apply(e, k, intervals[segment].phase);
    }
    for (; segment < intervals.size(); ++segment) sweep.advance(intervals[segment].end, intervals[segment].phase);
    sweep.finish(log.horizon);
    return out;
}

}  // namespace epinet
