#include "epinet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

namespace epinet {

namespace {

/// Set of ids with O(1) insert, erase and uniform draw.
class IndexedSet {
public:
    explicit IndexedSet(std::size_t n) : pos_(n, -1) {}

    void insert(int id) {
        pos_[static_cast<std::size_t>(id)] = static_cast<int>(items_.size());
        items_.push_back(id);
    }
    void erase(int id) {
        const int p = pos_[static_cast<std::size_t>(id)];
        const int last = items_.back();
        items_[static_cast<std::size_t>(p)] = last;
        pos_[static_cast<std::size_t>(last)] = p;
        items_.pop_back();
        pos_[static_cast<std::size_t>(id)] = -1;
    }
    bool contains(int id) const { return pos_[static_cast<std::size_t>(id)] >= 0; }
    std::size_t size() const { return items_.size(); }
    int pick(Rng& rng) const {
        std::uniform_int_distribution<std::size_t> d(0, items_.size() - 1);
        return items_[d(rng)];
    }
    std::span<const int> items() const { return items_; }

private:
    std::vector<int> items_;
    std::vector<int> pos_;
};

std::uint64_t edge_key(int i, int j) {
    const auto [a, b] = make_edge(i, j);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double pair_count(PairType type, double healthy, double infectious) {
    switch (type) {
        case PairType::HH: return healthy * (healthy - 1.0) / 2.0;
        case PairType::HI: return healthy * infectious;
        case PairType::II: return infectious * (infectious - 1.0) / 2.0;
    }
    return 0.0;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

/// Simulation state with incrementally maintained aggregate rates.
class Engine {
public:
    Engine(const Parameters& params, const Covariates& cov, SystemState state)
        : params_(params),
          state_(std::move(state)),
          n_(state_.status.size()),
          susceptible_(n_),
          exposed_(n_),
          infectious_(n_),
          healthy_(n_),
          ia_nbrs_(n_, 0),
          is_nbrs_(n_, 0),
          w_sus_(n_, 1.0),
          w_ext_(n_, 0.0) {
        const auto lp = cov.linear_predictor(params.b_S);
        for (std::size_t i = 0; i < n_; ++i) w_sus_[i] = std::exp(lp[i]);
        if (params.external) {
            const auto le = cov.linear_predictor(params.external->b_E);
            for (std::size_t i = 0; i < n_; ++i) w_ext_[i] = std::exp(le[i]);
        }
        for (std::size_t i = 0; i < n_; ++i) {
            const int id = static_cast<int>(i);
            switch (state_.status[i]) {
                case Status::S: susceptible_.insert(id); break;
                case Status::E: exposed_.insert(id); break;
                case Status::Ia:
                case Status::Is: infectious_.insert(id); break;
                case Status::R: break;
            }
            if (!is_infectious(state_.status[i])) healthy_.insert(id);
        }
        for (const auto& [i, j] : state_.network.edges()) {
            add_edge_record(i, j);
            ++connected_[static_cast<int>(type_of(i, j))];
        }
        for (int j : susceptible_.items()) {
            for (int k : state_.network.neighbors(j)) bump_pressure(j, state_.status[static_cast<std::size_t>(k)], +1);
            external_sum_ += w_ext_[static_cast<std::size_t>(j)];
        }
    }

    const SystemState& state() const { return state_; }

    RateBreakdown rates(int phase) const {
        RateBreakdown r;
        r.exposure = params_.beta * (pressure_a_ + params_.exp_eta * pressure_s_);
        r.manifestation = params_.phi * static_cast<double>(exposed_.size());
        r.recovery = params_.gamma * static_cast<double>(infectious_.size());
        if (params_.external) r.external = params_.external->xi * external_sum_;
        const double h = static_cast<double>(healthy_.size());
        const double inf = static_cast<double>(infectious_.size());
        for (int t = 0; t < kPairTypes; ++t) {
            const auto type = static_cast<PairType>(t);
            const double mc = static_cast<double>(connected_[t]);
            r.activation[static_cast<std::size_t>(t)] = params_.alpha(type, phase) * (pair_count(type, h, inf) - mc);
            r.termination[static_cast<std::size_t>(t)] = params_.omega(type, phase) * mc;
        }
        return r;
    }

    Event fire(const RateBreakdown& r, double t, Rng& rng) {
        double u = uniform_open(rng) * r.total();
        auto take = [&u](double rate) {
            if (u < rate) return true;
            u -= rate;
            return false;
        };
        if (take(r.exposure)) return expose(t, rng);
        if (take(r.manifestation)) return manifest(t, rng);
        if (take(r.recovery)) return recover(t, rng);
        if (take(r.external)) return external_onset(t, rng);
        for (int k = 0; k < kPairTypes; ++k) {
            if (take(r.activation[static_cast<std::size_t>(k)])) return activate(static_cast<PairType>(k), t, rng);
        }
        for (int k = 0; k < kPairTypes; ++k) {
            if (take(r.termination[static_cast<std::size_t>(k)])) return terminate(static_cast<PairType>(k), t, rng);
        }
        // Rounding left u just past the last positive category.
        for (int k = kPairTypes - 1; k >= 0; --k) {
            if (r.termination[static_cast<std::size_t>(k)] > 0) return terminate(static_cast<PairType>(k), t, rng);
        }
        for (int k = kPairTypes - 1; k >= 0; --k) {
            if (r.activation[static_cast<std::size_t>(k)] > 0) return activate(static_cast<PairType>(k), t, rng);
        }
        throw std::logic_error("event selection failed with positive total rate");
    }

private:
    Health health(int i) const { return health_of(state_.status[static_cast<std::size_t>(i)]); }
    PairType type_of(int i, int j) const { return pair_type(health(i), health(j)); }

    void bump_pressure(int sus, Status neighbor, int delta) {
        const auto s = static_cast<std::size_t>(sus);
        if (neighbor == Status::Ia) {
            ia_nbrs_[s] += delta;
            pressure_a_ += delta * w_sus_[s];
        } else if (neighbor == Status::Is) {
            is_nbrs_[s] += delta;
            pressure_s_ += delta * w_sus_[s];
        } else {
            return;
        }
        si_edges_ += delta;
        if (si_edges_ == 0) pressure_a_ = pressure_s_ = 0.0;
    }

    void leave_susceptible(int i) {
        const auto s = static_cast<std::size_t>(i);
        pressure_a_ -= ia_nbrs_[s] * w_sus_[s];
        pressure_s_ -= is_nbrs_[s] * w_sus_[s];
        si_edges_ -= ia_nbrs_[s] + is_nbrs_[s];
        if (si_edges_ == 0) pressure_a_ = pressure_s_ = 0.0;
        ia_nbrs_[s] = is_nbrs_[s] = 0;
        susceptible_.erase(i);
        external_sum_ -= w_ext_[s];
        if (susceptible_.size() == 0) external_sum_ = 0.0;
    }

    void become_infectious(int i, Subtype sub) {
        for (int j : state_.network.neighbors(i)) {
            --connected_[static_cast<int>(pair_type(Health::H, health(j)))];
            ++connected_[static_cast<int>(pair_type(Health::I, health(j)))];
        }
        state_.status[static_cast<std::size_t>(i)] = status_of(sub);
        healthy_.erase(i);
        infectious_.insert(i);
        for (int j : state_.network.neighbors(i)) {
            if (state_.status[static_cast<std::size_t>(j)] == Status::S) bump_pressure(j, status_of(sub), +1);
        }
    }

    Subtype draw_subtype(Rng& rng) const { return uniform_open(rng) < params_.p_s ? Subtype::Is : Subtype::Ia; }

    Event expose(double t, Rng& rng) {
        double total = 0.0;
        for (int j : susceptible_.items()) total += weight(j);
        double u = uniform_open(rng) * total;
        int chosen = -1;
        for (int j : susceptible_.items()) {
            const double w = weight(j);
            if (w <= 0.0) continue;
            chosen = j;
            if (u < w) break;
            u -= w;
        }
        // Infector among infectious contacts, weighted by relative infectiousness.
        double inf_total = 0.0;
        for (int k : state_.network.neighbors(chosen)) inf_total += infectiousness(k);
        double v = uniform_open(rng) * inf_total;
        int infector = -1;
        for (int k : state_.network.neighbors(chosen)) {
            const double w = infectiousness(k);
            if (w <= 0.0) continue;
            infector = k;
            if (v < w) break;
            v -= w;
        }
        leave_susceptible(chosen);
        state_.status[static_cast<std::size_t>(chosen)] = Status::E;
        exposed_.insert(chosen);
        Event e{t, EventKind::Exposure, chosen, std::nullopt, std::nullopt};
        if (infector >= 0) e.partner = infector;
        return e;
    }

    double weight(int j) const {
        const auto s = static_cast<std::size_t>(j);
        return w_sus_[s] * (ia_nbrs_[s] + params_.exp_eta * is_nbrs_[s]);
    }

    double infectiousness(int k) const {
        const Status s = state_.status[static_cast<std::size_t>(k)];
        if (s == Status::Ia) return 1.0;
        if (s == Status::Is) return params_.exp_eta;
        return 0.0;
    }

    Event manifest(double t, Rng& rng) {
        const int i = exposed_.pick(rng);
        const Subtype sub = draw_subtype(rng);
        exposed_.erase(i);
        become_infectious(i, sub);
        return Event{t, EventKind::Manifestation, i, std::nullopt, sub};
    }

    Event external_onset(double t, Rng& rng) {
        double u = uniform_open(rng) * external_sum_;
        int chosen = -1;
        for (int j : susceptible_.items()) {
            const double w = w_ext_[static_cast<std::size_t>(j)];
            chosen = j;
            if (u < w) break;
            u -= w;
        }
        const Subtype sub = draw_subtype(rng);
        leave_susceptible(chosen);
        become_infectious(chosen, sub);
        return Event{t, EventKind::ExternalOnset, chosen, std::nullopt, sub};
    }

    Event recover(double t, Rng& rng) {
        const int i = infectious_.pick(rng);
        const Status old = state_.status[static_cast<std::size_t>(i)];
        for (int j : state_.network.neighbors(i)) {
            if (state_.status[static_cast<std::size_t>(j)] == Status::S) bump_pressure(j, old, -1);
        }
        for (int j : state_.network.neighbors(i)) {
            --connected_[static_cast<int>(pair_type(Health::I, health(j)))];
            ++connected_[static_cast<int>(pair_type(Health::H, health(j)))];
        }
        state_.status[static_cast<std::size_t>(i)] = Status::R;
        infectious_.erase(i);
        healthy_.insert(i);
        return Event{t, EventKind::Recovery, i, std::nullopt, std::nullopt};
    }

    std::pair<const IndexedSet*, const IndexedSet*> members(PairType type) const {
        switch (type) {
            case PairType::HH: return {&healthy_, &healthy_};
            case PairType::HI: return {&healthy_, &infectious_};
            case PairType::II: return {&infectious_, &infectious_};
        }
        return {nullptr, nullptr};
    }

    Event activate(PairType type, double t, Rng& rng) {
        const auto [first, second] = members(type);
        int i = -1;
        int j = -1;
        bool found = false;
        for (int attempt = 0; attempt < 256 && !found; ++attempt) {
            i = first->pick(rng);
            j = second->pick(rng);
            found = i != j && !state_.network.connected(i, j);
        }
        if (!found) {
            std::vector<Edge> candidates;
            for (int a : first->items()) {
                for (int b : second->items()) {
                    if (a == b || state_.network.connected(a, b)) continue;
                    if (first == second && a > b) continue;
                    candidates.emplace_back(a, b);
                }
            }
            std::uniform_int_distribution<std::size_t> d(0, candidates.size() - 1);
            std::tie(i, j) = candidates[d(rng)];
        }
        state_.network.connect(i, j);
        add_edge_record(i, j);
        ++connected_[static_cast<int>(type)];
        link_pressure(i, j, +1);
        return Event{t, EventKind::LinkActivate, i, j, std::nullopt};
    }

    Event terminate(PairType type, double t, Rng& rng) {
        Edge chosen{-1, -1};
        std::uniform_int_distribution<std::size_t> d(0, edges_.size() - 1);
        for (int attempt = 0; attempt < 256; ++attempt) {
            const Edge& e = edges_[d(rng)];
            if (type_of(e.first, e.second) == type) {
                chosen = e;
                break;
            }
        }
        if (chosen.first < 0) {
            std::vector<Edge> candidates;
            for (const Edge& e : edges_) {
                if (type_of(e.first, e.second) == type) candidates.push_back(e);
            }
            std::uniform_int_distribution<std::size_t> c(0, candidates.size() - 1);
            chosen = candidates[c(rng)];
        }
        const auto [i, j] = chosen;
        link_pressure(i, j, -1);
        state_.network.disconnect(i, j);
        remove_edge_record(i, j);
        --connected_[static_cast<int>(type)];
        return Event{t, EventKind::LinkTerminate, i, j, std::nullopt};
    }

    void link_pressure(int i, int j, int delta) {
        const Status si = state_.status[static_cast<std::size_t>(i)];
        const Status sj = state_.status[static_cast<std::size_t>(j)];
        if (si == Status::S) bump_pressure(i, sj, delta);
        if (sj == Status::S) bump_pressure(j, si, delta);
    }

    void add_edge_record(int i, int j) {
        edge_index_[edge_key(i, j)] = edges_.size();
        edges_.push_back(make_edge(i, j));
    }

    void remove_edge_record(int i, int j) {
        const auto it = edge_index_.find(edge_key(i, j));
        const std::size_t p = it->second;
        edge_index_.erase(it);
        if (p + 1 != edges_.size()) {
            edges_[p] = edges_.back();
            edge_index_[edge_key(edges_[p].first, edges_[p].second)] = p;
        }
        edges_.pop_back();
    }

    const Parameters& params_;
    SystemState state_;
    std::size_t n_;
    IndexedSet susceptible_;
    IndexedSet exposed_;
    IndexedSet infectious_;
    IndexedSet healthy_;
    std::vector<int> ia_nbrs_;
    std::vector<int> is_nbrs_;
    std::vector<double> w_sus_;
    std::vector<double> w_ext_;
    double pressure_a_ = 0.0;
    double pressure_s_ = 0.0;
    long si_edges_ = 0;
    double external_sum_ = 0.0;
    std::array<long, kPairTypes> connected_{};
    std::vector<Edge> edges_;
    std::unordered_map<std::uint64_t, std::size_t> edge_index_;
};

void check_rates(const RateBreakdown& cached, const RateBreakdown& fresh, double t) {
    bool ok = close(cached.exposure, fresh.exposure) && close(cached.manifestation, fresh.manifestation) &&
              close(cached.recovery, fresh.recovery) && close(cached.external, fresh.external);
    for (std::size_t k = 0; k < kPairTypes; ++k) {
        ok = ok && close(cached.activation[k], fresh.activation[k]) && close(cached.termination[k], fresh.termination[k]);
    }
    if (!ok) throw std::logic_error("incremental rate cache diverged from full recomputation at t=" + std::to_string(t));
}

}  // namespace

double RateBreakdown::total() const {
    double t = exposure + manifestation + recovery + external;
    for (std::size_t k = 0; k < kPairTypes; ++k) t += activation[k] + termination[k];
    return t;
}

void SimConfig::validate() const {
    if (population < 2) throw ValidationError("population must be at least 2");
    if (!(horizon > 0.0)) throw ValidationError("horizon must be positive");
    if (schedule.horizon() != horizon) throw ValidationError("phase schedule must cover (0, horizon]");
    if (const auto* er = std::get_if<ErdosRenyi>(&network); er && !(er->density >= 0.0 && er->density <= 1.0)) {
        throw ValidationError("network density must lie in [0, 1]");
    }
    if (seeds.explicit_seeds.empty() && (seeds.count < 0 || seeds.count > population)) {
        throw ValidationError("seed count must lie in [0, population]");
    }
    if (const auto* cov = std::get_if<Covariates>(&covariates);
        cov && cov->size() != static_cast<std::size_t>(population)) {
        throw ValidationError("explicit covariates must have one row per individual");
    }
}

double SimulationResult::attack_rate() const {
    const std::size_t n = log.population();
    if (n == 0) return 0.0;
    std::vector<bool> hit(n, false);
    for (std::size_t i = 0; i < n; ++i) hit[i] = log.initial_statuses[i] != Status::S;
    for (const Event& e : log.events) {
        if (e.kind == EventKind::Exposure || e.kind == EventKind::ExternalOnset) hit[static_cast<std::size_t>(e.actor)] = true;
    }
    return static_cast<double>(std::count(hit.begin(), hit.end(), true)) / static_cast<double>(n);
}

std::vector<Edge> sample_initial_network(int population, double density, Rng& rng) {
    std::vector<Edge> edges;
    if (density <= 0.0) return edges;
    for (int i = 0; i < population; ++i) {
        for (int j = i + 1; j < population; ++j) {
            if (density >= 1.0 || uniform_open(rng) < density) edges.emplace_back(i, j);
        }
    }
    return edges;
}

Covariates generate_covariates(int population, const CovariateGenerator& spec, Rng& rng) {
    Covariates cov(static_cast<std::size_t>(population), spec.columns.size());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t k = 0; k < spec.columns.size(); ++k) {
        for (std::size_t i = 0; i < cov.size(); ++i) {
            cov(i, k) = spec.columns[k] == CovariateColumn::Bernoulli ? (uniform_open(rng) < 0.5 ? 1.0 : 0.0)
                                                                      : normal(rng);
        }
        cov.names.push_back("x" + std::to_string(k));
    }
    return cov;
}

RateBreakdown full_rates(const Parameters& params, const SystemState& state, const Covariates& covariates,
                         int phase) {
    RateBreakdown r;
    const std::size_t n = state.status.size();
    const auto lp = covariates.linear_predictor(params.b_S);
    std::vector<double> le;
    if (params.external) le = covariates.linear_predictor(params.external->b_E);
    double healthy = 0.0;
    double infectious = 0.0;
    std::array<double, kPairTypes> connected{};
    for (std::size_t i = 0; i < n; ++i) {
        const Status s = state.status[i];
        if (s == Status::E) r.manifestation += params.phi;
        if (is_infectious(s)) {
            r.recovery += params.gamma;
            infectious += 1.0;
        } else {
            healthy += 1.0;
        }
        if (s == Status::S) {
            double force = 0.0;
            for (int j : state.network.neighbors(static_cast<int>(i))) {
                const Status sj = state.status[static_cast<std::size_t>(j)];
                if (sj == Status::Ia) force += 1.0;
                if (sj == Status::Is) force += params.exp_eta;
            }
            r.exposure += params.beta * std::exp(lp[i]) * force;
            if (params.external) r.external += params.external->xi * std::exp(le[i]);
        }
    }
    for (const auto& [i, j] : state.network.edges()) {
        const auto type = pair_type(health_of(state.status[static_cast<std::size_t>(i)]),
                                    health_of(state.status[static_cast<std::size_t>(j)]));
        connected[static_cast<std::size_t>(type)] += 1.0;
    }
    for (int t = 0; t < kPairTypes; ++t) {
        const auto type = static_cast<PairType>(t);
        const auto k = static_cast<std::size_t>(t);
        r.activation[k] = params.alpha(type, phase) * (pair_count(type, healthy, infectious) - connected[k]);
        r.termination[k] = params.omega(type, phase) * connected[k];
    }
    return r;
}

SimulationResult simulate(const Parameters& params, const SimConfig& config) {
    config.validate();
    params.validate();
    Rng rng = make_rng(config.seed);
    Rng network_rng = make_rng(config.seed, {1});
    Rng covariate_rng = make_rng(config.seed, {2});
    Rng seed_rng = make_rng(config.seed, {3});

    SimulationResult result;
    if (const auto* cov = std::get_if<Covariates>(&config.covariates)) {
        result.covariates = *cov;
    } else {
        result.covariates = generate_covariates(config.population, std::get<CovariateGenerator>(config.covariates),
                                                covariate_rng);
    }
    if (result.covariates.dim() != params.b_S.size()) {
        throw ValidationError("b_S length does not match covariate dimension");
    }
    if (params.external && params.external->b_E.size() != result.covariates.dim()) {
        throw ValidationError("b_E length does not match covariate dimension");
    }

    EventLog& log = result.log;
    log.horizon = config.horizon;
    log.schedule = config.schedule;
    log.initial_statuses.assign(static_cast<std::size_t>(config.population), Status::S);
    if (!config.seeds.explicit_seeds.empty()) {
        for (const auto& [id, status] : config.seeds.explicit_seeds) {
            if (id < 0 || id >= config.population) throw ValidationError("seed id out of range");
            log.initial_statuses[static_cast<std::size_t>(id)] = status;
        }
    } else {
        std::vector<int> ids(static_cast<std::size_t>(config.population));
        std::iota(ids.begin(), ids.end(), 0);
        std::shuffle(ids.begin(), ids.end(), seed_rng);
        for (int k = 0; k < config.seeds.count; ++k) {
            log.initial_statuses[static_cast<std::size_t>(ids[static_cast<std::size_t>(k)])] = config.seeds.status;
        }
    }
    if (const auto* er = std::get_if<ErdosRenyi>(&config.network)) {
        log.initial_edges = sample_initial_network(config.population, er->density, network_rng);
    } else {
        for (const auto& [i, j] : std::get<ExplicitNetwork>(config.network).edges) log.initial_edges.push_back(make_edge(i, j));
        std::sort(log.initial_edges.begin(), log.initial_edges.end());
    }

    Engine engine(params, result.covariates, initial_state(log));
    const auto intervals = config.schedule.intervals();
    std::size_t segment = 0;
    double t = 0.0;
    while (segment < intervals.size()) {
        const int phase = intervals[segment].phase;
        const double boundary = intervals[segment].end;
        const RateBreakdown r = engine.rates(phase);
        if (config.verify_rates) check_rates(r, full_rates(params, engine.state(), result.covariates, phase), t);
        const double total = r.total();
        const double dt = total > 0.0 ? -std::log(uniform_open(rng)) / total : INFINITY;
        if (t + dt > boundary) {
            // Memorylessness: restart the clock under the next phase's rates.
            if (config.record_trace) result.trace.push_back({t, boundary, total});
            if (total <= 0.0 && segment + 1 == intervals.size()) result.ended_early = true;
            t = boundary;
            ++segment;
            continue;
        }
        if (config.record_trace) result.trace.push_back({t, t + dt, total});
        t += dt;
        log.events.push_back(engine.fire(r, t, rng));
    }
    return result;
}

}  // namespace epinet
