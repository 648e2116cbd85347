#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "epinet/imputation.hpp"
#include "epinet/types.hpp"

namespace epinet {

struct HiddenSet {
    enum class Mode { None, All, Listed };
    Mode mode = Mode::None;
    std::vector<int> ids;

    bool contains(int id) const;
    static HiddenSet all() { return {Mode::All, {}}; }
    static HiddenSet none() { return {Mode::None, {}}; }
};

/// Which exposure / recovery times are unobserved, and what is known about them.
struct ObservationSpec {
    HiddenSet hide_exposure;
    HiddenSet hide_recovery;
    /// Hidden recoveries are known to the enclosing window of this width (e.g. 7 days).
    double recovery_window = 7.0;
    std::map<int, std::pair<double, double>> recovery_bounds;
    /// Latency bounds: exposure in (t_I - latency_max, t_I - latency_min), clipped at 0.
    std::optional<double> latency_min;
    std::optional<double> latency_max;
    std::map<int, std::pair<double, double>> latency_intervals;
};

struct HiddenExposure {
    int id = 0;
    double t_min = 0.0;
    double t_max = 0.0;
    /// Manifestation time, or T for individuals still latent at the end.
    double t_I = 0.0;
};

struct HiddenRecovery {
    int id = 0;
    double lower = 0.0;
    double upper = 0.0;
    std::size_t cluster = 0;
};

struct ObservedData {
    /// Every observed event; hidden exposures and recoveries are removed.
    EventLog log;
    Covariates covariates;
    std::vector<HiddenExposure> exposures;
    std::vector<HiddenRecovery> recoveries;
    /// Disjoint windows of overlapping hidden recoveries: (lower, upper].
    std::vector<std::pair<double, double>> clusters;

    bool complete() const { return exposures.empty() && recoveries.empty(); }
};

ObservedData make_observed(const EventLog& complete, const Covariates& covariates, const ObservationSpec& spec);

struct ImputationCounters {
    long proposals = 0;
    long accepted = 0;
    long repairs = 0;
    /// Exposure draws that exhausted the rejection budget and were drawn directly.
    long direct = 0;
    /// Sum over exposure draws of their exact acceptance probability.
    double acceptance_sum = 0.0;

    long draws() const { return accepted + direct; }
    double pooled_ratio() const { return proposals > 0 ? static_cast<double>(accepted) / proposals : 0.0; }
    double mean_acceptance() const { return draws() > 0 ? acceptance_sum / draws() : 0.0; }
    void merge(const ImputationCounters& other);
};

/// E-step machinery: holds the current imputed times and draws new ones.
class Imputer {
public:
    struct State {
        std::vector<double> exposures;   ///< parallel to ObservedData::exposures
        std::vector<double> recoveries;  ///< parallel to ObservedData::recoveries
    };

    explicit Imputer(const ObservedData& data, int max_attempts = 10000, int repair_rounds = 100);

    /// Recoveries start at their latest possible time; exposures are unset until the first draw.
    State initial_state() const;

    std::vector<InfectiousPeriod> periods(const State& state) const;
    /// Exposure times of every internally exposed individual (observed or imputed), by time.
    std::vector<ExposureCase> exposure_cases(const State& state) const;

    void draw_exposures(State& state, const Parameters& params, std::uint64_t seed, ImputationCounters& counters) const;
    void draw_recoveries(State& state, const Parameters& params, std::uint64_t seed, ImputationCounters& counters) const;

    EventLog augmented_log(const State& state) const;
    /// Every exposure has an infectious neighbour and imputed recoveries respect their bounds.
    bool compatible(const State& state) const;

    const ContactTimeline& contacts() const { return contacts_; }

private:
    double draw_one_exposure(std::size_t k, const std::vector<InfectiousPeriod>& periods, const Parameters& params,
                             Rng& rng, ImputationCounters& counters) const;

    const ObservedData& data_;
    ContactTimeline contacts_;
    int max_attempts_;
    int repair_rounds_;
    std::vector<InfectiousPeriod> base_periods_;
    std::vector<std::optional<std::size_t>> hidden_recovery_of_;
    std::vector<std::optional<std::size_t>> hidden_exposure_of_;
};

}  // namespace epinet
