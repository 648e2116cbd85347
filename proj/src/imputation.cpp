#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "epinet/imputation.hpp"

namespace epinet {

ContactTimeline::ContactTimeline(const EventLog& log) : by_individual_(log.population()) {
    std::unordered_map<std::uint64_t, double> open;
    const auto key = [](int i, int j) {
        const Edge e = make_edge(i, j);
        return (static_cast<std::uint64_t>(e.first) << 32) | static_cast<std::uint32_t>(e.second);
    };
    const auto close = [&](int i, int j, double start, double end) {
        by_individual_[static_cast<std::size_t>(i)].push_back({j, start, end});
        by_individual_[static_cast<std::size_t>(j)].push_back({i, start, end});
    };
    for (const auto& [i, j] : log.initial_edges) open[key(i, j)] = 0.0;
    for (const Event& e : log.events) {
        if (e.kind != EventKind::LinkActivate && e.kind != EventKind::LinkTerminate) continue;
        const auto k = key(e.actor, *e.partner);
        if (e.kind == EventKind::LinkActivate) {
            open[k] = e.time;
        } else {
            auto it = open.find(k);
            if (it == open.end()) throw ValidationError("link terminated while not connected");
            close(e.actor, *e.partner, it->second, e.time);
            open.erase(it);
        }
    }
    for (const auto& [k, start] : open) {
        close(static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffULL), start, log.horizon);
    }
    for (auto& list : by_individual_) {
        std::sort(list.begin(), list.end(), [](const Contact& a, const Contact& b) {
            return a.start != b.start ? a.start < b.start : a.other < b.other;
        });
    }
}

std::vector<int> ContactTimeline::neighbors_at(int i, double t) const {
    std::vector<int> out;
    for (const Contact& c : contacts(i)) {
        if (c.start >= t) break;
        if (t < c.end) out.push_back(c.other);
    }
    return out;
}

StepHazard build_exposure_hazard(int i, const ContactTimeline& contacts, std::span<const InfectiousPeriod> periods,
                                 const Parameters& params, std::span<const double> x_i, double t_min, double t_max) {
    if (!(t_min < t_max)) throw std::invalid_argument("latency interval must have t_min < t_max");
    struct Change {
        double time;
        int da;
        int ds;
    };
    std::vector<Change> changes;
    for (const auto& c : contacts.contacts(i)) {
        const InfectiousPeriod& p = periods[static_cast<std::size_t>(c.other)];
        if (!p.ever) continue;
        const double lo = std::max({c.start, p.onset, t_min});
        const double hi = std::min({c.end, p.recovery, t_max});
        if (!(lo < hi)) continue;
        const int a = p.subtype == Subtype::Ia ? 1 : 0;
        changes.push_back({lo, a, 1 - a});
        changes.push_back({hi, -a, a - 1});
    }
    std::sort(changes.begin(), changes.end(), [](const Change& a, const Change& b) { return a.time < b.time; });

    double lp = 0.0;
    for (std::size_t k = 0; k < x_i.size(); ++k) lp += params.b_S[k] * x_i[k];
    const double scale = params.beta * std::exp(lp);

    std::vector<double> knots{t_min};
    std::vector<double> levels;
    int na = 0;
    int ns = 0;
    std::size_t k = 0;
    while (k < changes.size() && changes[k].time <= t_min) {
        na += changes[k].da;
        ns += changes[k].ds;
        ++k;
    }
    while (k < changes.size() && changes[k].time < t_max) {
        const double t = changes[k].time;
        levels.push_back(scale * (na + params.exp_eta * ns));
        knots.push_back(t);
        while (k < changes.size() && changes[k].time == t) {
            na += changes[k].da;
            ns += changes[k].ds;
            ++k;
        }
    }
    levels.push_back(scale * (na + params.exp_eta * ns));
    knots.push_back(t_max);
    return StepHazard(std::move(knots), std::move(levels));
}

std::vector<double> interval_probabilities(const StepHazard& h) {
    const auto levels = h.levels();
    double total = 0.0;
    for (std::size_t j = 0; j < h.pieces(); ++j) total += levels[j] * h.length(j);
    if (!(total > 0.0)) throw SamplingError("hazard has no mass on its interval");
    const double norm = -std::expm1(-total);
    std::vector<double> probs(h.pieces());
    double before = 0.0;
    for (std::size_t j = 0; j < h.pieces(); ++j) {
        const double piece = levels[j] * h.length(j);
        // exp(-before) - exp(-before - piece)
        probs[j] = std::exp(-before) * -std::expm1(-piece) / norm;
        before += piece;
    }
    return probs;
}

double sample_truncated_exp(double rate, double lower, double upper, Rng& rng) {
    if (!(lower < upper)) throw std::invalid_argument("truncated exponential needs lower < upper");
    if (!(rate >= 0.0)) throw std::invalid_argument("truncated exponential needs a nonnegative rate");
    const double len = upper - lower;
    for (;;) {
        const double u = uniform_open(rng);
        double t;
        if (rate * len == 0.0) t = lower + u * len;
        else t = lower - std::log1p(u * std::expm1(-rate * len)) / rate;
        if (t > lower && t < upper) return t;
    }
}

double sample_truncated_inhomo_exp(const StepHazard& hazard, Rng& rng) {
    const auto probs = interval_probabilities(hazard);
    const double u = uniform_open(rng);
    double acc = 0.0;
    std::size_t chosen = probs.size();
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (probs[j] <= 0.0) continue;
        acc += probs[j];
        chosen = j;
        if (u < acc) break;
    }
    const auto knots = hazard.knots();
    return sample_truncated_exp(hazard.levels()[chosen], knots[chosen], knots[chosen + 1], rng);
}

double acceptance_probability(const StepHazard& hazard, double phi, double t_I) {
    const auto knots = hazard.knots();
    const auto levels = hazard.levels();
    double before = 0.0;
    double total = 0.0;
    for (std::size_t j = 0; j < hazard.pieces(); ++j) {
        const double l = levels[j];
        const double len = hazard.length(j);
        if (l > 0.0) {
            const double d = phi - l;
            const double integral =
                std::abs(d) < 1e-12 * std::max(phi, l) ? len : std::expm1(d * len) / d;
            total += l * std::exp(-before - phi * (t_I - knots[j])) * integral;
        }
        before += l * len;
    }
    return total / -std::expm1(-before);
}

ExposureDraw sample_exposure_time(const StepHazard& hazard, double phi, double t_I, Rng& rng, int max_attempts) {
    if (hazard.upper() > t_I) throw std::invalid_argument("latency interval ends after manifestation");
    ExposureDraw draw;
    while (draw.proposals < max_attempts) {
        ++draw.proposals;
        const double t = sample_truncated_inhomo_exp(hazard, rng);
        const double accept = std::exp(-phi * (t_I - t));
        if (uniform_open(rng) < accept) {
            draw.time = t;
            return draw;
        }
    }
    throw SamplingError("exposure sampler exhausted its proposal budget");
}

double sample_exposure_time_direct(const StepHazard& hazard, double phi, double t_I, Rng& rng) {
    if (hazard.upper() > t_I) throw std::invalid_argument("latency interval ends after manifestation");
    const auto knots = hazard.knots();
    const auto levels = hazard.levels();
    std::vector<double> logw(hazard.pieces(), -std::numeric_limits<double>::infinity());
    double before = 0.0;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < hazard.pieces(); ++j) {
        const double l = levels[j];
        const double len = hazard.length(j);
        if (l > 0.0 && len > 0.0) {
            const double d = phi - l;
            double log_integral;
            if (std::abs(d) < 1e-12 * std::max(phi, l)) log_integral = std::log(len);
            else if (d > 0.0) log_integral = d * len + std::log(-std::expm1(-d * len)) - std::log(d);
            else log_integral = std::log(-std::expm1(d * len)) - std::log(-d);
            logw[j] = std::log(l) - before - phi * (t_I - knots[j]) + log_integral;
            top = std::max(top, logw[j]);
        }
        before += l * len;
    }
    if (!std::isfinite(top)) throw SamplingError("exposure hazard has no mass");
    std::vector<double> w(logw.size());
    double total = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) total += (w[j] = std::exp(logw[j] - top));
    const double u = uniform_open(rng) * total;
    double acc = 0.0;
    std::size_t chosen = w.size();
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (w[j] <= 0.0) continue;
        acc += w[j];
        chosen = j;
        if (u < acc) break;
    }
    const double lo = knots[chosen];
    const double hi = knots[chosen + 1];
    const double rate = levels[chosen] - phi;
    if (rate >= 0.0) return sample_truncated_exp(rate, lo, hi, rng);
    const double t = hi - (sample_truncated_exp(-rate, lo, hi, rng) - lo);
    return std::clamp(t, std::nextafter(lo, hi), std::nextafter(hi, lo));
}

std::vector<double> source_probabilities(std::span<const SourceCandidate> candidates, double exp_eta) {
    std::vector<double> w(candidates.size());
    double total = 0.0;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        w[k] = candidates[k].subtype == Subtype::Is ? exp_eta : 1.0;
        total += w[k];
    }
    for (double& v : w) v /= total;
    return w;
}

std::vector<double> sample_recovery_times(std::span<const RecoveryCase> Q, std::span<const ExposureCase> P,
                                          const SourceQuery& query, double exp_eta, double gamma, Rng& rng) {
    std::vector<double> lb(Q.size());
    std::unordered_map<int, std::size_t> index;
    for (std::size_t k = 0; k < Q.size(); ++k) {
        lb[k] = Q[k].lower;
        index.emplace(Q[k].id, k);
    }
    std::vector<ExposureCase> order(P.begin(), P.end());
    std::sort(order.begin(), order.end(), [](const ExposureCase& a, const ExposureCase& b) { return a.time < b.time; });
    for (const ExposureCase& p : order) {
        if (auto it = index.find(p.id); it != index.end()) lb[it->second] = std::max(lb[it->second], p.time);
    }

    for (const ExposureCase& p : order) {
        const auto candidates = query(p.id, p.time);
        if (candidates.empty()) throw SamplingError("exposure has no potential infection source", {p.id});
        bool known = false;
        std::vector<SourceCandidate> open;
        for (const auto& c : candidates) {
            if (!c.unresolved) {
                known = true;
                break;
            }
            auto it = index.find(c.id);
            if (it == index.end()) throw std::logic_error("unresolved source is not in the recovery set");
            if (lb[it->second] >= p.time) {
                known = true;
                break;
            }
            open.push_back(c);
        }
        if (known) continue;
        const auto probs = source_probabilities(open, exp_eta);
        const double u = uniform_open(rng);
        double acc = 0.0;
        std::size_t chosen = open.size() - 1;
        for (std::size_t k = 0; k < open.size(); ++k) {
            acc += probs[k];
            if (u < acc) {
                chosen = k;
                break;
            }
        }
        const std::size_t q = index.at(open[chosen].id);
        lb[q] = std::max(lb[q], p.time);
    }

    std::vector<double> out(Q.size());
    for (std::size_t k = 0; k < Q.size(); ++k) {
        if (!(lb[k] < Q[k].upper)) throw SamplingError("recovery lower bound reaches the interval end", {Q[k].id});
        out[k] = sample_truncated_exp(gamma, lb[k], Q[k].upper, rng);
    }
    return out;
}

}  // namespace epinet
