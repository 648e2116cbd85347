#include <cmath>
#include "epinet/types.hpp"

#include <algorithm>
#include <numeric>

namespace epinet {

namespace {
constexpr std::array<std::string_view, 5> kStatusNames{"S", "E", "Ia", "Is", "R"};
constexpr std::array<std::string_view, 6> kKindNames{"exposure",        "manifestation",  "recovery",
                                                     "link_activate",   "link_terminate", "external_onset"};
constexpr std::array<std::string_view, 3> kPairNames{"HH", "HI", "II"};
}  // namespace

std::string_view to_string(Status s) { return kStatusNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(Subtype t) { return t == Subtype::Is ? "Is" : "Ia"; }
std::string_view to_string(PairType t) { return kPairNames[static_cast<std::size_t>(t)]; }
std::string_view to_string(EventKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

Status parse_status(std::string_view text) {
    for (std::size_t k = 0; k < kStatusNames.size(); ++k) {
        if (kStatusNames[k] == text) return static_cast<Status>(k);
    }
    throw ValidationError("unknown status '" + std::string(text) + "'");
}

Subtype parse_subtype(std::string_view text) {
    if (text == "Is") return Subtype::Is;
    if (text == "Ia") return Subtype::Ia;
    throw ValidationError("unknown subtype '" + std::string(text) + "'");
}

EventKind parse_event_kind(std::string_view text) {
    for (std::size_t k = 0; k < kKindNames.size(); ++k) {
        if (kKindNames[k] == text) return static_cast<EventKind>(k);
    }
    throw ValidationError("unknown event kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------

PhaseSchedule::PhaseSchedule(std::vector<PhaseInterval> intervals) : intervals_(std::move(intervals)) {
    if (intervals_.empty()) throw ValidationError("phase schedule must contain at least one interval");
    if (intervals_.front().start != 0.0) throw ValidationError("phase schedule must start at time 0");
    for (std::size_t k = 0; k < intervals_.size(); ++k) {
        const auto& iv = intervals_[k];
        if (!(iv.end > iv.start) || !std::isfinite(iv.end)) {
            throw ValidationError("phase interval " + std::to_string(k) + " is empty or unbounded");
        }
        if (iv.phase != 0 && iv.phase != 1) {
            throw ValidationError("phase interval " + std::to_string(k) + " has a label other than 0 or 1");
        }
        if (k > 0 && iv.start != intervals_[k - 1].end) {
            throw ValidationError("phase intervals must be contiguous (gap or overlap at interval " +
                                  std::to_string(k) + ")");
        }
    }
}

PhaseSchedule PhaseSchedule::constant(double horizon, int phase) {
    return PhaseSchedule({PhaseInterval{0.0, horizon, phase}});
}

int PhaseSchedule::phase_at(double t) const {
    // (start, end]: the first interval whose end is >= t.
    auto it = std::lower_bound(intervals_.begin(), intervals_.end(), t,
                               [](const PhaseInterval& iv, double value) { return iv.end < value; });
    if (it == intervals_.end()) return intervals_.back().phase;
    return it->phase;
}

double PhaseSchedule::measure(int phase) const {
    double total = 0.0;
    for (const auto& iv : intervals_) {
        if (iv.phase == phase) total += iv.end - iv.start;
    }
    return total;
}

double PhaseSchedule::next_boundary(double t) const {
    for (const auto& iv : intervals_) {
        if (iv.end > t) return iv.end;
    }
    return horizon();
}

// ---------------------------------------------------------------------------

Covariates::Covariates(std::size_t individuals, std::size_t dim, std::vector<double> values)
    : rows_(individuals), dim_(dim), values_(std::move(values)) {
    if (values_.empty()) values_.assign(rows_ * dim_, 0.0);
    if (values_.size() != rows_ * dim_) throw ValidationError("covariate matrix has the wrong number of entries");
    for (double v : values_) {
        if (!std::isfinite(v)) throw ValidationError("covariate values must be finite");
    }
}

std::vector<double> Covariates::linear_predictor(std::span<const double> coef) const {
    if (coef.size() != dim_) throw std::invalid_argument("coefficient length does not match covariate dimension");
    std::vector<double> out(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        const auto x = row(i);
        out[i] = std::inner_product(x.begin(), x.end(), coef.begin(), 0.0);
    }
    return out;
}

std::vector<std::vector<double>> Covariates::columns() const {
    std::vector<std::vector<double>> cols(dim_, std::vector<double>(rows_));
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t k = 0; k < dim_; ++k) cols[k][i] = (*this)(i, k);
    }
    return cols;
}

// ---------------------------------------------------------------------------

void Parameters::validate() const {
    const auto rate = [](double v, const char* name) {
        if (!std::isfinite(v) || v < 0.0) throw ValidationError(std::string(name) + " must be a finite non-negative rate");
    };
    const auto finite = [](double v, const char* name) {
        if (!std::isfinite(v)) throw ValidationError(std::string(name) + " must be finite");
    };
    rate(beta, "beta");
    rate(exp_eta, "exp_eta");
    rate(phi, "phi");
    rate(gamma, "gamma");
    if (!(p_s >= 0.0 && p_s <= 1.0)) throw ValidationError("p_s must lie in [0, 1]");
    for (double b : b_S) finite(b, "b_S");
    for (double a : alpha.values) rate(a, "alpha");
    for (double w : omega.values) rate(w, "omega");
    if (external) {
        rate(external->xi, "xi");
        for (double b : external->b_E) finite(b, "b_E");
        if (external->b_E.size() != b_S.size()) throw ValidationError("b_E and b_S dimensions differ");
    }
}

Parameters Parameters::reference_setting() {
    Parameters p;
    p.beta = 0.2;
    p.exp_eta = std::exp(0.2);
    p.phi = 0.2;
    p.gamma = 0.1;
    p.p_s = 0.6;
    p.b_S = {1.0, 1.0};
    p.alpha.values = {6e-4, 6e-4, 6e-4, 6e-4, 2e-4, 6e-4};
    p.omega.values = {5e-3, 5e-3, 5e-3, 5e-3, 50e-3, 5e-3};
    return p;
}

ParameterLayout::ParameterLayout(std::size_t covariate_dim, bool external)
    : dim_(covariate_dim), external_(external) {
    names_ = {"beta", "exp_eta", "phi", "gamma", "p_s"};
    for (std::size_t k = 0; k < dim_; ++k) names_.push_back("b_S_" + std::to_string(k));
    for (const char* prefix : {"alpha_", "omega_"}) {
        for (int phase = 0; phase < kPhases; ++phase) {
            for (int t = 0; t < kPairTypes; ++t) {
                names_.push_back(std::string(prefix) + std::string(to_string(static_cast<PairType>(t))) +
                                 std::to_string(phase));
            }
        }
    }
    if (external_) {
        names_.push_back("xi");
        for (std::size_t k = 0; k < dim_; ++k) names_.push_back("b_E_" + std::to_string(k));
    }
}

ParameterLayout ParameterLayout::of(const Parameters& p) {
    return ParameterLayout(p.b_S.size(), p.external.has_value());
}

std::optional<std::size_t> ParameterLayout::index_of(std::string_view name) const {
    for (std::size_t k = 0; k < names_.size(); ++k) {
        if (names_[k] == name) return k;
    }
    return std::nullopt;
}

std::vector<double> ParameterLayout::flatten(const Parameters& p) const {
    if (p.b_S.size() != dim_ || p.external.has_value() != external_) {
        throw std::invalid_argument("parameters do not match the layout");
    }
    std::vector<double> v(size());
    v[beta()] = p.beta;
    v[exp_eta()] = p.exp_eta;
    v[phi()] = p.phi;
    v[gamma()] = p.gamma;
    v[p_s()] = p.p_s;
    for (std::size_t k = 0; k < dim_; ++k) v[b_S(k)] = p.b_S[k];
    for (int s = 0; s < kLinkRateSlots; ++s) {
        v[alpha(s)] = p.alpha.values[static_cast<std::size_t>(s)];
        v[omega(s)] = p.omega.values[static_cast<std::size_t>(s)];
    }
    if (external_) {
        if (p.external->b_E.size() != dim_) throw std::invalid_argument("b_E does not match the layout");
        v[xi()] = p.external->xi;
        for (std::size_t k = 0; k < dim_; ++k) v[b_E(k)] = p.external->b_E[k];
    }
    return v;
}

Parameters ParameterLayout::unflatten(std::span<const double> v) const {
    if (v.size() != size()) throw std::invalid_argument("flat parameter vector has the wrong length");
    Parameters p;
    p.beta = v[beta()];
    p.exp_eta = v[exp_eta()];
    p.phi = v[phi()];
    p.gamma = v[gamma()];
    p.p_s = v[p_s()];
    p.b_S.resize(dim_);
    for (std::size_t k = 0; k < dim_; ++k) p.b_S[k] = v[b_S(k)];
    for (int s = 0; s < kLinkRateSlots; ++s) {
        p.alpha.values[static_cast<std::size_t>(s)] = v[alpha(s)];
        p.omega.values[static_cast<std::size_t>(s)] = v[omega(s)];
    }
    if (external_) {
        ExternalParams ext;
        ext.xi = v[xi()];
        ext.b_E.resize(dim_);
        for (std::size_t k = 0; k < dim_; ++k) ext.b_E[k] = v[b_E(k)];
        p.external = std::move(ext);
    }
    return p;
}

// ---------------------------------------------------------------------------

StepHazard::StepHazard(std::vector<double> knots, std::vector<double> levels)
    : knots_(std::move(knots)), levels_(std::move(levels)) {
    if (levels_.empty() || knots_.size() != levels_.size() + 1) {
        throw std::invalid_argument("step hazard needs n >= 1 levels and n + 1 knots");
    }
    for (std::size_t j = 0; j < levels_.size(); ++j) {
        if (!(knots_[j + 1] > knots_[j])) throw std::invalid_argument("step hazard knots must increase strictly");
        if (!(levels_[j] >= 0.0) || !std::isfinite(levels_[j])) {
            throw std::invalid_argument("step hazard levels must be finite and nonnegative");
        }
    }
}

double StepHazard::at(double t) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) return levels_.front();
    auto j = static_cast<std::size_t>(std::distance(knots_.begin(), it)) - 1;
    return levels_[std::min(j, levels_.size() - 1)];
}

double StepHazard::cumulative(double t) const {
    double total = 0.0;
    for (std::size_t j = 0; j < levels_.size(); ++j) {
        if (t <= knots_[j]) break;
        total += levels_[j] * (std::min(t, knots_[j + 1]) - knots_[j]);
    }
    return total;
}

double StepHazard::integral() const {
    double total = 0.0;
    for (std::size_t j = 0; j < levels_.size(); ++j) total += levels_[j] * length(j);
    return total;
}

}  // namespace epinet
