#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace epinet {

enum class Status : std::uint8_t { S, E, Ia, Is, R };
enum class Subtype : std::uint8_t { Ia, Is };

/// Binary health view used by the link rates: H = {S, E, R}, I = {Ia, Is}.
enum class Health : std::uint8_t { H, I };

/// Unordered pair type; indices follow the (HH, HI, II) ordering of the rate vectors.
enum class PairType : std::uint8_t { HH = 0, HI = 1, II = 2 };

inline constexpr int kPairTypes = 3;
inline constexpr int kPhases = 2;
inline constexpr int kLinkRateSlots = kPairTypes * kPhases;

constexpr bool is_infectious(Status s) { return s == Status::Ia || s == Status::Is; }
constexpr Health health_of(Status s) { return is_infectious(s) ? Health::I : Health::H; }
constexpr Status status_of(Subtype t) { return t == Subtype::Is ? Status::Is : Status::Ia; }

constexpr PairType pair_type(Health a, Health b) {
    const int infected = (a == Health::I) + (b == Health::I);
    return static_cast<PairType>(infected);
}

/// Slot of (type, phase) in the six-entry rate vectors: phase-major, as
/// (HH0, HI0, II0, HH1, HI1, II1).
constexpr int link_slot(PairType type, int phase) { return phase * kPairTypes + static_cast<int>(type); }

std::string_view to_string(Status s);
std::string_view to_string(Subtype t);
std::string_view to_string(PairType t);
Status parse_status(std::string_view text);
Subtype parse_subtype(std::string_view text);

enum class EventKind : std::uint8_t {
    Exposure,
    Manifestation,
    Recovery,
    LinkActivate,
    LinkTerminate,
    ExternalOnset,
};

std::string_view to_string(EventKind k);
EventKind parse_event_kind(std::string_view text);

constexpr bool is_link_event(EventKind k) { return k == EventKind::LinkActivate || k == EventKind::LinkTerminate; }

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::Exposure;
    int actor = 0;
    /// Other endpoint for link events; optional infector for exposures.
    std::optional<int> partner;
    /// Present exactly for Manifestation and ExternalOnset.
    std::optional<Subtype> subtype;

    bool operator==(const Event&) const = default;
};

/// Error raised when an event log or its inputs break a structural invariant.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what, std::optional<std::size_t> event_index = std::nullopt)
        : std::runtime_error(what), event_index_(event_index) {}

    std::optional<std::size_t> event_index() const { return event_index_; }

private:
    std::optional<std::size_t> event_index_;
};

struct PhaseInterval {
    double start = 0.0;
    double end = 0.0;
    int phase = 0;

    bool operator==(const PhaseInterval&) const = default;
};

/// Partition of (0, T] into half-open intervals (start, end] labelled with
/// phase 0 or 1. Time 0 belongs to the first interval.
class PhaseSchedule {
public:
    PhaseSchedule() = default;
    explicit PhaseSchedule(std::vector<PhaseInterval> intervals);

    /// Single-phase schedule covering (0, horizon].
    static PhaseSchedule constant(double horizon, int phase = 0);

    int phase_at(double t) const;
    double horizon() const { return intervals_.empty() ? 0.0 : intervals_.back().end; }
    /// Total length of all intervals carrying `phase`.
    double measure(int phase) const;
    /// Earliest interval end strictly greater than t (the horizon if none).
    double next_boundary(double t) const;
    std::span<const PhaseInterval> intervals() const { return intervals_; }

    bool operator==(const PhaseSchedule&) const = default;

private:
    std::vector<PhaseInterval> intervals_;
};

/// Per-individual covariate rows of a shared dimension (possibly zero).
class Covariates {
public:
    Covariates() = default;
    Covariates(std::size_t individuals, std::size_t dim, std::vector<double> values = {});

    std::size_t size() const { return rows_; }
    std::size_t dim() const { return dim_; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
    std::span<double> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
    double operator()(std::size_t i, std::size_t k) const { return values_[i * dim_ + k]; }
    double& operator()(std::size_t i, std::size_t k) { return values_[i * dim_ + k]; }
    std::span<const double> values() const { return values_; }

    /// x_i . b for every row.
    std::vector<double> linear_predictor(std::span<const double> coef) const;
    /// Column-major copy, one contiguous vector per covariate.
    std::vector<std::vector<double>> columns() const;

    std::vector<std::string> names;

    bool operator==(const Covariates&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> values_;
};

/// Six rates indexed by (pair type, phase).
struct LinkRates {
    std::array<double, kLinkRateSlots> values{};

    double operator()(PairType type, int phase) const { return values[link_slot(type, phase)]; }
    double& operator()(PairType type, int phase) { return values[link_slot(type, phase)]; }

    bool operator==(const LinkRates&) const = default;
};

struct ExternalParams {
    double xi = 0.0;
    std::vector<double> b_E;

    bool operator==(const ExternalParams&) const = default;
};

struct Parameters {
    double beta = 0.0;
    double exp_eta = 1.0;
    double phi = 0.0;
    double gamma = 0.0;
    double p_s = 0.5;
    std::vector<double> b_S;
    LinkRates alpha;
    LinkRates omega;
    std::optional<ExternalParams> external;

    double eta() const { return std::log(exp_eta); }

    /// Rates and coefficients finite, rates non-negative, p_s in [0, 1].
    void validate() const;

    /// Ground truth of the synthetic study: beta 0.2, eta 0.2, gamma 0.1,
    /// phi 0.2, p_s 0.6, b_S = (1, 1) and the lockdown-style link rates.
    static Parameters reference_setting();

    bool operator==(const Parameters&) const = default;
};

/// Flat ordering of every scalar in Parameters, shared by the score,
/// information matrices, averaging and JSON output.
class ParameterLayout {
public:
    ParameterLayout(std::size_t covariate_dim, bool external);
    static ParameterLayout of(const Parameters& p);

    std::size_t size() const { return names_.size(); }
    std::size_t dim() const { return dim_; }
    bool external() const { return external_; }
    std::span<const std::string> names() const { return names_; }
    const std::string& name(std::size_t k) const { return names_[k]; }
    std::optional<std::size_t> index_of(std::string_view name) const;

    std::size_t beta() const { return 0; }
    std::size_t exp_eta() const { return 1; }
    std::size_t phi() const { return 2; }
    std::size_t gamma() const { return 3; }
    std::size_t p_s() const { return 4; }
    std::size_t b_S(std::size_t k) const { return 5 + k; }
    std::size_t alpha(int slot) const { return 5 + dim_ + static_cast<std::size_t>(slot); }
    std::size_t omega(int slot) const { return 5 + dim_ + kLinkRateSlots + static_cast<std::size_t>(slot); }
    std::size_t xi() const { return 5 + dim_ + 2 * kLinkRateSlots; }
    std::size_t b_E(std::size_t k) const { return xi() + 1 + k; }

    std::vector<double> flatten(const Parameters& p) const;
    Parameters unflatten(std::span<const double> values) const;

private:
    std::size_t dim_;
    bool external_;
    std::vector<std::string> names_;
};

/// Piecewise-constant hazard on (knots.front(), knots.back()); level j holds
/// on (knots[j], knots[j+1]).
class StepHazard {
public:
    StepHazard(std::vector<double> knots, std::vector<double> levels);

    std::size_t pieces() const { return levels_.size(); }
    double lower() const { return knots_.front(); }
    double upper() const { return knots_.back(); }
    std::span<const double> knots() const { return knots_; }
    std::span<const double> levels() const { return levels_; }
    double length(std::size_t j) const { return knots_[j + 1] - knots_[j]; }
    /// Hazard value at t (the level of the piece containing t).
    double at(double t) const;
    /// Integral of the hazard from lower() to t.
    double cumulative(double t) const;
    double integral() const;

private:
    std::vector<double> knots_;
    std::vector<double> levels_;
};

using Edge = std::pair<int, int>;

constexpr Edge make_edge(int i, int j) { return i < j ? Edge{i, j} : Edge{j, i}; }

struct EventLog {
    double horizon = 0.0;
    std::vector<Status> initial_statuses;
    /// Unordered pairs stored as (min, max), sorted.
    std::vector<Edge> initial_edges;
    PhaseSchedule schedule;
    std::vector<Event> events;

    std::size_t population() const { return initial_statuses.size(); }

    bool operator==(const EventLog&) const = default;
};

}  // namespace epinet
