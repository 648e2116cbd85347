#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "epinet/observed.hpp"
#include "epinet/replay.hpp"

namespace epinet {

bool HiddenSet::contains(int id) const {
    switch (mode) {
        case Mode::None:
            return false;
        case Mode::All:
            return true;
        case Mode::Listed:
            return std::find(ids.begin(), ids.end(), id) != ids.end();
    }
    return false;
}

ObservedData make_observed(const EventLog& complete, const Covariates& covariates, const ObservationSpec& spec) {
    validate(complete);
    const std::size_t n = complete.population();
    if (covariates.size() != n) throw ValidationError("covariate rows do not match the population");
    const double T = complete.horizon;

    std::vector<double> onset(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> manifest(n, T);
    for (std::size_t i = 0; i < n; ++i) {
        if (is_infectious(complete.initial_statuses[i])) onset[i] = 0.0;
    }
    for (const Event& e : complete.events) {
        const auto a = static_cast<std::size_t>(e.actor);
        if (e.kind == EventKind::Manifestation) manifest[a] = e.time;
        if (e.kind == EventKind::Manifestation || e.kind == EventKind::ExternalOnset) onset[a] = e.time;
    }

    ObservedData out;
    out.log = complete;
    out.log.events.clear();
    out.covariates = covariates;
    for (std::size_t k = 0; k < complete.events.size(); ++k) {
        const Event& e = complete.events[k];
        if (e.kind == EventKind::Exposure && spec.hide_exposure.contains(e.actor)) {
            const auto a = static_cast<std::size_t>(e.actor);
            HiddenExposure h{e.actor, 0.0, manifest[a], manifest[a]};
            if (auto it = spec.latency_intervals.find(e.actor); it != spec.latency_intervals.end()) {
                h.t_min = it->second.first;
                h.t_max = it->second.second;
            } else if (!std::isnan(onset[a])) {
                if (spec.latency_max) h.t_min = std::max(0.0, h.t_I - *spec.latency_max);
                if (spec.latency_min) h.t_max = std::max(0.0, h.t_I - *spec.latency_min);
            }
            if (!(h.t_min >= 0.0 && h.t_min < h.t_max && h.t_max <= h.t_I)) {
                throw ValidationError("invalid latency interval for individual " + std::to_string(e.actor), k);
            }
            out.exposures.push_back(h);
            continue;
        }
        if (e.kind == EventKind::Recovery && spec.hide_recovery.contains(e.actor)) {
            const auto a = static_cast<std::size_t>(e.actor);
            HiddenRecovery h{e.actor, 0.0, 0.0, 0};
            if (auto it = spec.recovery_bounds.find(e.actor); it != spec.recovery_bounds.end()) {
                h.lower = it->second.first;
                h.upper = it->second.second;
            } else {
                const double w = spec.recovery_window;
                if (!(w > 0.0)) throw ValidationError("recovery window width must be positive");
                const double k0 = std::floor(e.time / w);
                h.lower = std::max(k0 * w, onset[a]);
                h.upper = std::min((k0 + 1.0) * w, T);
            }
            if (!(h.lower >= onset[a] && h.lower < h.upper && h.upper <= T)) {
                throw ValidationError("invalid recovery bounds for individual " + std::to_string(e.actor), k);
            }
            out.recoveries.push_back(h);
            continue;
        }
        out.log.events.push_back(e);
    }

    std::vector<std::size_t> order(out.recoveries.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return out.recoveries[a].lower < out.recoveries[b].lower; });
    for (std::size_t k : order) {
        auto& h = out.recoveries[k];
        if (out.clusters.empty() || h.lower >= out.clusters.back().second) {
            out.clusters.emplace_back(h.lower, h.upper);
        } else {
            out.clusters.back().second = std::max(out.clusters.back().second, h.upper);
        }
        h.cluster = out.clusters.size() - 1;
    }
    for (const auto& h : out.recoveries) {
        out.clusters[h.cluster].first = std::min(out.clusters[h.cluster].first, h.lower);
    }
    return out;
}

Imputer::Imputer(const ObservedData& data, int max_attempts, int repair_rounds)
    : data_(data), contacts_(data.log), max_attempts_(max_attempts), repair_rounds_(repair_rounds) {
    const std::size_t n = data.log.population();
    const double T = data.log.horizon;
    base_periods_.assign(n, InfectiousPeriod{});
    for (std::size_t i = 0; i < n; ++i) {
        const Status s = data.log.initial_statuses[i];
        if (is_infectious(s)) {
            base_periods_[i] = {true, 0.0, T, s == Status::Is ? Subtype::Is : Subtype::Ia};
        }
    }
    for (const Event& e : data.log.events) {
        auto& p = base_periods_[static_cast<std::size_t>(e.actor)];
        if (e.kind == EventKind::Manifestation || e.kind == EventKind::ExternalOnset) {
            p = {true, e.time, T, *e.subtype};
        } else if (e.kind == EventKind::Recovery) {
            p.recovery = e.time;
        }
    }
    hidden_recovery_of_.assign(n, std::nullopt);
    hidden_exposure_of_.assign(n, std::nullopt);
    for (std::size_t k = 0; k < data.recoveries.size(); ++k) hidden_recovery_of_[static_cast<std::size_t>(data.recoveries[k].id)] = k;
    for (std::size_t k = 0; k < data.exposures.size(); ++k) hidden_exposure_of_[static_cast<std::size_t>(data.exposures[k].id)] = k;
}

Imputer::State Imputer::initial_state() const {
    State s;
    s.exposures.assign(data_.exposures.size(), std::numeric_limits<double>::quiet_NaN());
    s.recoveries.reserve(data_.recoveries.size());
    for (const auto& h : data_.recoveries) s.recoveries.push_back(h.upper);
    return s;
}

std::vector<InfectiousPeriod> Imputer::periods(const State& state) const {
    auto out = base_periods_;
    for (std::size_t k = 0; k < data_.recoveries.size(); ++k) {
        out[static_cast<std::size_t>(data_.recoveries[k].id)].recovery = state.recoveries[k];
    }
    return out;
}

std::vector<ExposureCase> Imputer::exposure_cases(const State& state) const {
    std::vector<ExposureCase> out;
    for (const Event& e : data_.log.events) {
        if (e.kind == EventKind::Exposure) out.push_back({e.actor, e.time});
    }
    for (std::size_t k = 0; k < data_.exposures.size(); ++k) out.push_back({data_.exposures[k].id, state.exposures[k]});
    std::sort(out.begin(), out.end(), [](const ExposureCase& a, const ExposureCase& b) { return a.time < b.time; });
    return out;
}

void ImputationCounters::merge(const ImputationCounters& other) {
    proposals += other.proposals;
    accepted += other.accepted;
    repairs += other.repairs;
    direct += other.direct;
    acceptance_sum += other.acceptance_sum;
}

double Imputer::draw_one_exposure(std::size_t k, const std::vector<InfectiousPeriod>& periods, const Parameters& params,
                                  Rng& rng, ImputationCounters& counters) const {
    const HiddenExposure& h = data_.exposures[k];
    const auto x = data_.covariates.row(static_cast<std::size_t>(h.id));
    const StepHazard hazard = build_exposure_hazard(h.id, contacts_, periods, params, x, h.t_min, h.t_max);
    if (!(hazard.integral() > 0.0)) throw SamplingError("no infectious contact inside the latency interval", {h.id});
    counters.acceptance_sum += acceptance_probability(hazard, params.phi, h.t_I);
    try {
        const ExposureDraw d = sample_exposure_time(hazard, params.phi, h.t_I, rng, max_attempts_);
        counters.proposals += d.proposals;
        ++counters.accepted;
        return d.time;
    } catch (const SamplingError&) {
        counters.proposals += max_attempts_;
        ++counters.direct;
        try {
            return sample_exposure_time_direct(hazard, params.phi, h.t_I, rng);
        } catch (const SamplingError& err) {
            throw SamplingError(err.what(), {h.id});
        }
    }
}

void Imputer::draw_exposures(State& state, const Parameters& params, std::uint64_t seed,
                             ImputationCounters& counters) const {
    const auto current = periods(state);
    for (std::size_t k = 0; k < data_.exposures.size(); ++k) {
        Rng rng = make_rng(seed, {static_cast<std::uint64_t>(data_.exposures[k].id)});
        state.exposures[k] = draw_one_exposure(k, current, params, rng, counters);
    }
}

void Imputer::draw_recoveries(State& state, const Parameters& params, std::uint64_t seed,
                              ImputationCounters& counters) const {
    if (data_.recoveries.empty()) return;
    std::vector<std::vector<std::size_t>> members(data_.clusters.size());
    for (std::size_t k = 0; k < data_.recoveries.size(); ++k) members[data_.recoveries[k].cluster].push_back(k);

    const SourceQuery query = [&](int p, double t) {
        std::vector<SourceCandidate> out;
        for (int j : contacts_.neighbors_at(p, t)) {
            const auto ju = static_cast<std::size_t>(j);
            const InfectiousPeriod& per = base_periods_[ju];
            if (!per.ever || per.onset >= t) continue;
            if (const auto& hk = hidden_recovery_of_[ju]) {
                const HiddenRecovery& h = data_.recoveries[*hk];
                if (t >= h.upper) continue;
                out.push_back({j, per.subtype, t > h.lower});
            } else if (t < per.recovery) {
                out.push_back({j, per.subtype, false});
            }
        }
        return out;
    };

    for (std::size_t c = 0; c < data_.clusters.size(); ++c) {
        const auto [lo, hi] = data_.clusters[c];
        std::vector<RecoveryCase> Q;
        for (std::size_t k : members[c]) {
            const auto& h = data_.recoveries[k];
            Q.push_back({h.id, h.lower, h.upper});
        }
        for (int round = 0;; ++round) {
            std::vector<ExposureCase> P;
            for (const auto& e : exposure_cases(state)) {
                if (e.time > lo && e.time <= hi) P.push_back(e);
            }
            Rng rng = make_rng(seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(round)});
            try {
                const auto times = sample_recovery_times(Q, P, query, params.exp_eta, params.gamma, rng);
                for (std::size_t q = 0; q < times.size(); ++q) state.recoveries[members[c][q]] = times[q];
                break;
            } catch (const SamplingError& err) {
                if (round + 1 >= repair_rounds_) throw;
                std::vector<int> fixable;
                for (int id : err.individuals()) {
                    if (!hidden_exposure_of_[static_cast<std::size_t>(id)]) throw;
                    fixable.push_back(id);
                }
                ++counters.repairs;
                const auto current = periods(state);
                for (int id : fixable) {
                    const std::size_t k = *hidden_exposure_of_[static_cast<std::size_t>(id)];
                    Rng r = make_rng(seed, {0xFFFFFFFFULL, static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(id)});
                    state.exposures[k] = draw_one_exposure(k, current, params, r, counters);
                }
            }
        }
    }
}

EventLog Imputer::augmented_log(const State& state) const {
    EventLog log = data_.log;
    for (std::size_t k = 0; k < data_.exposures.size(); ++k) {
        log.events.push_back({state.exposures[k], EventKind::Exposure, data_.exposures[k].id, std::nullopt, std::nullopt});
    }
    for (std::size_t k = 0; k < data_.recoveries.size(); ++k) {
        log.events.push_back({state.recoveries[k], EventKind::Recovery, data_.recoveries[k].id, std::nullopt, std::nullopt});
    }
    std::stable_sort(log.events.begin(), log.events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    return log;
}

bool Imputer::compatible(const State& state) const {
    for (std::size_t k = 0; k < data_.recoveries.size(); ++k) {
        const auto& h = data_.recoveries[k];
        if (!(state.recoveries[k] > h.lower && state.recoveries[k] < h.upper)) return false;
    }
    const EventLog log = augmented_log(state);
    try {
        SystemState s = epinet::initial_state(log);
        for (std::size_t k = 0; k < log.events.size(); ++k) {
            const Event& e = log.events[k];
            if (e.kind == EventKind::Exposure) {
                bool source = false;
                for (int j : s.network.neighbors(e.actor)) source = source || is_infectious(s.status[static_cast<std::size_t>(j)]);
                if (!source) return false;
            }
            apply_event(s, e, k);
        }
    } catch (const ValidationError&) {
        return false;
    }
    return true;
}

}  // namespace epinet
