#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epinet/rng.hpp"
#include "epinet/types.hpp"

namespace epinet {

/// Who was in contact with whom and when, from a fully observed network record.
class ContactTimeline {
public:
    struct Contact {
        int other;
        double start;
        double end;
    };

    explicit ContactTimeline(const EventLog& log);

    std::span<const Contact> contacts(int i) const { return by_individual_[static_cast<std::size_t>(i)]; }
    /// Contacts active at t (start < t < end).
    std::vector<int> neighbors_at(int i, double t) const;
    std::size_t population() const { return by_individual_.size(); }

private:
    std::vector<std::vector<Contact>> by_individual_;
};

/// Infectious period of an individual under the current augmentation.
struct InfectiousPeriod {
    bool ever = false;
    double onset = 0.0;
    double recovery = 0.0;
    Subtype subtype = Subtype::Ia;

    bool active_at(double t) const { return ever && onset < t && t < recovery; }
};

struct LatencyInterval {
    int id = 0;
    double t_min = 0.0;
    double t_max = 0.0;
};

/// lambda_i(t) = beta exp(b_S x_i) (I^a_i(t) + exp_eta I^s_i(t)) restricted to (t_min, t_max).
StepHazard build_exposure_hazard(int i, const ContactTimeline& contacts, std::span<const InfectiousPeriod> periods,
                                 const Parameters& params, std::span<const double> x_i, double t_min, double t_max);

/// Probability of each hazard piece under the truncated inhomogeneous exponential.
std::vector<double> interval_probabilities(const StepHazard& hazard);

double sample_truncated_inhomo_exp(const StepHazard& hazard, Rng& rng);

/// Inverse-CDF draw from Exponential(rate) truncated to (lower, upper); uniform when rate is 0.
double sample_truncated_exp(double rate, double lower, double upper, Rng& rng);

class SamplingError : public std::runtime_error {
public:
    SamplingError(const std::string& what, std::vector<int> individuals = {})
        : std::runtime_error(what), individuals_(std::move(individuals)) {}
    const std::vector<int>& individuals() const { return individuals_; }

private:
    std::vector<int> individuals_;
};

struct ExposureDraw {
    double time = 0.0;
    int proposals = 0;
};

/// Probability that one proposal from the hazard is accepted (the reciprocal of
/// the envelope constant), computed in closed form over the hazard pieces.
double acceptance_probability(const StepHazard& hazard, double phi, double t_I);

/// Rejection sampler: propose from the hazard, accept with exp(-phi (t_I - t)).
ExposureDraw sample_exposure_time(const StepHazard& hazard, double phi, double t_I, Rng& rng,
                                  int max_attempts = 10000);

/// Direct draw from the same target: the tilted density is exponential on each
/// hazard piece, so pieces are chosen by their closed-form masses and the time
/// within a piece by inverse CDF. Used when the rejection budget runs out.
double sample_exposure_time_direct(const StepHazard& hazard, double phi, double t_I, Rng& rng);

struct RecoveryCase {
    int id = 0;
    double lower = 0.0;  ///< known to be infectious up to here
    double upper = 0.0;  ///< recovered by here
};

struct ExposureCase {
    int id = 0;
    double time = 0.0;
};

struct SourceCandidate {
    int id = 0;
    Subtype subtype = Subtype::Ia;
    bool unresolved = false;  ///< member of Q (recovery time being sampled)
};

/// Neighbours of p at time t that are infectious at t or whose recovery is being sampled.
using SourceQuery = std::function<std::vector<SourceCandidate>(int p, double t)>;

/// Selection weights of candidate sources (1 for Ia, exp_eta for Is), normalized.
std::vector<double> source_probabilities(std::span<const SourceCandidate> candidates, double exp_eta);

/// Subtype-weighted DARCI. Returns one recovery time per element of Q.
std::vector<double> sample_recovery_times(std::span<const RecoveryCase> Q, std::span<const ExposureCase> P,
                                          const SourceQuery& query, double exp_eta, double gamma, Rng& rng);

}  // namespace epinet
