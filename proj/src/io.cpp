#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "epinet/io.hpp"
#include "epinet/replay.hpp"

namespace epinet::io {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

double parse_number(std::string_view text, std::size_t line) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ParseError("not a number: '" + std::string(text) + "'", line);
    }
    return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

template <typename T>
T field(const Json& obj, const char* key, std::size_t line) {
    if (!obj.contains(key)) throw ParseError(std::string("missing field '") + key + "'", line);
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string("bad value for '") + key + "'", line);
    }
}

Json schedule_json(const PhaseSchedule& s) {
    Json out = Json::array();
    for (const auto& iv : s.intervals()) out.push_back(Json::array({iv.start, iv.end, iv.phase}));
    return out;
}

PhaseSchedule schedule_from(const Json& j, double horizon) {
    if (j.is_null()) return PhaseSchedule::constant(horizon, 0);
    std::vector<PhaseInterval> ivs;
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != 3) throw ParseError("schedule rows must be [start, end, phase]");
        ivs.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<int>()});
    }
    return PhaseSchedule(ivs);
}

std::array<double, kLinkRateSlots> rates_from(const Json& j, const char* name) {
    if (!j.is_array() || j.size() != kLinkRateSlots) {
        throw ParseError(std::string(name) + " must list 6 rates (HH0, HI0, II0, HH1, HI1, II1)");
    }
    std::array<double, kLinkRateSlots> out{};
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = j[k].get<double>();
    return out;
}

HiddenSet hidden_from(const Json& j) {
    if (j.is_null()) return HiddenSet::none();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "all") return HiddenSet::all();
        if (s == "none") return HiddenSet::none();
        throw ParseError("hidden set must be \"all\", \"none\" or a list of ids");
    }
    if (j.is_array()) return {HiddenSet::Mode::Listed, j.get<std::vector<int>>()};
    throw ParseError("hidden set must be \"all\", \"none\" or a list of ids");
}

}  // namespace

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_event_log(const EventLog& log, std::ostream& out) {
    Json header;
    header["schema_version"] = kSchemaVersion;
    header["T"] = log.horizon;
    header["N"] = log.population();
    Json statuses = Json::array();
    for (Status s : log.initial_statuses) statuses.push_back(std::string(to_string(s)));
    header["initial_statuses"] = statuses;
    Json edges = Json::array();
    for (const auto& [i, j] : log.initial_edges) edges.push_back(Json::array({i, j}));
    header["initial_edges"] = edges;
    header["schedule"] = schedule_json(log.schedule);
    out << header.dump() << '\n';
    for (const Event& e : log.events) {
        out << "{\"time\":" << format_double(e.time) << ",\"kind\":\"" << to_string(e.kind) << "\",\"actor\":" << e.actor;
        if (e.partner) out << ",\"partner\":" << *e.partner;
        if (e.subtype) out << ",\"subtype\":\"" << to_string(*e.subtype) << '"';
        out << "}\n";
    }
}

void write_event_log(const EventLog& log, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_event_log(log, out);
}

EventLog read_event_log(std::istream& in) {
    EventLog log;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        Json obj;
        try {
            obj = Json::parse(line);
        } catch (const nlohmann::json::parse_error& err) {
            throw ParseError(std::string("invalid JSON: ") + err.what(), lineno);
        }
        if (!obj.is_object()) throw ParseError("expected a JSON object", lineno);
        if (!have_header) {
            const int version = field<int>(obj, "schema_version", lineno);
            if (version != kSchemaVersion) throw ParseError("unsupported schema_version", lineno);
            log.horizon = field<double>(obj, "T", lineno);
            const auto n = field<std::size_t>(obj, "N", lineno);
            for (const auto& s : field<std::vector<std::string>>(obj, "initial_statuses", lineno)) {
                try {
                    log.initial_statuses.push_back(parse_status(s));
                } catch (const std::exception& err) {
                    throw ParseError(err.what(), lineno);
                }
            }
            if (log.initial_statuses.size() != n) throw ParseError("initial_statuses length differs from N", lineno);
            for (const auto& e : field<std::vector<std::array<int, 2>>>(obj, "initial_edges", lineno)) {
                log.initial_edges.push_back(make_edge(e[0], e[1]));
            }
            std::sort(log.initial_edges.begin(), log.initial_edges.end());
            try {
                log.schedule = schedule_from(obj.contains("schedule") ? obj["schedule"] : Json(), log.horizon);
            } catch (const std::exception& err) {
                throw ParseError(err.what(), lineno);
            }
            have_header = true;
            continue;
        }
        Event e;
        e.time = field<double>(obj, "time", lineno);
        try {
            e.kind = parse_event_kind(field<std::string>(obj, "kind", lineno));
            if (obj.contains("subtype")) e.subtype = parse_subtype(obj["subtype"].get<std::string>());
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& err) {
            throw ParseError(err.what(), lineno);
        }
        e.actor = field<int>(obj, "actor", lineno);
        if (obj.contains("partner")) e.partner = field<int>(obj, "partner", lineno);
        log.events.push_back(e);
        if (log.events.size() >= 2 && !(log.events[log.events.size() - 2].time < e.time)) {
            throw ParseError("event times must increase strictly", lineno);
        }
    }
    if (!have_header) throw ParseError("event log has no header line");
    try {
        validate(log);
    } catch (const ValidationError& err) {
        if (err.event_index()) throw ParseError(err.what(), *err.event_index() + 2);
        throw;
    }
    return log;
}

EventLog read_event_log(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_event_log(in);
}

void write_covariates(const Covariates& cov, std::ostream& out) {
    out << "id";
    for (std::size_t k = 0; k < cov.dim(); ++k) {
        out << ',' << (k < cov.names.size() ? cov.names[k] : "x" + std::to_string(k));
    }
    out << '\n';
    for (std::size_t i = 0; i < cov.size(); ++i) {
        out << i;
        for (std::size_t k = 0; k < cov.dim(); ++k) out << ',' << format_double(cov(i, k));
        out << '\n';
    }
}

void write_covariates(const Covariates& cov, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_covariates(cov, out);
}

Covariates read_covariates(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> names;
    while (std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw ParseError("covariate file is empty");
    const auto head = split(line, ',');
    if (trim(head.front()) != "id") throw ParseError("first column must be 'id'", lineno);
    for (std::size_t k = 1; k < head.size(); ++k) names.push_back(trim(head[k]));
    const std::size_t dim = names.size();

    std::map<long, std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != dim + 1) throw ParseError("expected " + std::to_string(dim + 1) + " cells", lineno);
        const double idv = parse_number(cells[0], lineno);
        if (idv != std::floor(idv) || idv < 0) throw ParseError("id must be a nonnegative integer", lineno);
        const auto id = static_cast<long>(idv);
        std::vector<double> values;
        for (std::size_t k = 1; k < cells.size(); ++k) values.push_back(parse_number(cells[k], lineno));
        if (!rows.emplace(id, std::move(values)).second) throw ParseError("duplicate id " + std::to_string(id), lineno);
    }
    const std::size_t n = rows.size();
    std::vector<double> flat;
    flat.reserve(n * dim);
    long expect = 0;
    for (auto& [id, values] : rows) {
        if (id != expect) throw ParseError("missing id " + std::to_string(expect));
        ++expect;
        flat.insert(flat.end(), values.begin(), values.end());
    }
    Covariates cov(n, dim, std::move(flat));
    cov.names = names;
    return cov;
}

Covariates read_covariates(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_covariates(in);
}

std::vector<int> read_external_labels(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<int> ids;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto cells = split(t, ',');
        if (cells.size() != 2) throw ParseError("expected id,label", lineno);
        const std::string label = trim(cells[1]);
        if (trim(cells[0]) == "id") continue;
        const double idv = parse_number(cells[0], lineno);
        if (label == "external" || label == "1") ids.push_back(static_cast<int>(idv));
        else if (label != "internal" && label != "0") throw ParseError("label must be internal or external", lineno);
    }
    return ids;
}

EventLog apply_external_labels(const EventLog& log, const std::vector<int>& external_ids) {
    const std::set<int> ext(external_ids.begin(), external_ids.end());
    EventLog out = log;
    out.events.clear();
    for (const Event& e : log.events) {
        if (ext.count(e.actor)) {
            if (e.kind == EventKind::Exposure) continue;
            if (e.kind == EventKind::Manifestation) {
                Event x = e;
                x.kind = EventKind::ExternalOnset;
                out.events.push_back(x);
                continue;
            }
        }
        out.events.push_back(e);
    }
    validate(out);
    return out;
}

SimulationSpec parse_config(const Json& doc, const std::filesystem::path& base_dir) {
    SimulationSpec spec;
    if (!doc.is_object()) throw ParseError("config must be a JSON object");
    if (doc.value("schema_version", 0) != kSchemaVersion) throw ParseError("unsupported or missing schema_version");
    auto& c = spec.config;
    try {
        c.population = doc.at("population").get<int>();
        c.horizon = doc.at("horizon").get<double>();
        c.schedule = schedule_from(doc.contains("schedule") ? doc["schedule"] : Json(), c.horizon);

        const Json& p = doc.at("params");
        auto& q = spec.params;
        q.beta = p.at("beta").get<double>();
        if (p.contains("exp_eta")) q.exp_eta = p["exp_eta"].get<double>();
        else q.exp_eta = std::exp(p.value("eta", 0.0));
        q.phi = p.at("phi").get<double>();
        q.gamma = p.at("gamma").get<double>();
        q.p_s = p.at("p_s").get<double>();
        q.b_S = p.value("b_S", std::vector<double>{});
        q.alpha.values = rates_from(p.at("alpha"), "alpha");
        q.omega.values = rates_from(p.at("omega"), "omega");
        if (p.contains("external")) {
            q.external = ExternalParams{p["external"].at("xi").get<double>(),
                                        p["external"].value("b_E", std::vector<double>(q.b_S.size(), 0.0))};
        }

        const Json net = doc.value("network", Json::object());
        if (net.contains("edges")) {
            ExplicitNetwork en;
            for (const auto& e : net["edges"].get<std::vector<std::array<int, 2>>>()) en.edges.push_back(make_edge(e[0], e[1]));
            c.network = en;
        } else {
            c.network = ErdosRenyi{net.value("density", 0.0)};
        }

        const Json seeds = doc.value("seeds", Json::object());
        c.seeds.count = seeds.value("count", 1);
        c.seeds.status = parse_status(seeds.value("status", std::string("E")));
        if (seeds.contains("explicit")) {
            for (const auto& row : seeds["explicit"]) {
                c.seeds.explicit_seeds.emplace_back(row.at(0).get<int>(), parse_status(row.at(1).get<std::string>()));
            }
        }

        const Json cov = doc.value("covariates", Json::object());
        if (cov.contains("file")) {
            std::filesystem::path f = cov["file"].get<std::string>();
            if (f.is_relative() && !base_dir.empty()) f = base_dir / f;
            c.covariates = read_covariates(f);
        } else {
            CovariateGenerator gen;
            for (const auto& name : cov.value("columns", std::vector<std::string>{})) {
                if (name == "bernoulli") gen.columns.push_back(CovariateColumn::Bernoulli);
                else if (name == "normal") gen.columns.push_back(CovariateColumn::Normal);
                else throw ParseError("unknown covariate column kind '" + name + "'");
            }
            c.covariates = gen;
        }
    } catch (const nlohmann::json::exception& err) {
        throw ParseError(std::string("config: ") + err.what());
    }
    c.validate();
    spec.params.validate();
    return spec;
}

SimulationSpec read_config(const std::filesystem::path& path) {
    return parse_config(read_json(path), path.parent_path());
}

ObservationSpec parse_observation_spec(const Json& doc) {
    if (!doc.is_object()) throw ParseError("observed spec must be a JSON object");
    if (doc.value("schema_version", 0) != kSchemaVersion) throw ParseError("unsupported or missing schema_version");
    ObservationSpec spec;
    try {
        spec.hide_exposure = hidden_from(doc.value("hide_exposure", Json()));
        spec.hide_recovery = hidden_from(doc.value("hide_recovery", Json()));
        spec.recovery_window = doc.value("recovery_window", 7.0);
        for (const auto& row : doc.value("recovery_bounds", Json::array())) {
            spec.recovery_bounds[row.at(0).get<int>()] = {row.at(1).get<double>(), row.at(2).get<double>()};
        }
        if (doc.contains("latency")) {
            const Json& l = doc["latency"];
            if (l.contains("min")) spec.latency_min = l["min"].get<double>();
            if (l.contains("max")) spec.latency_max = l["max"].get<double>();
        }
        for (const auto& row : doc.value("latency_intervals", Json::array())) {
            spec.latency_intervals[row.at(0).get<int>()] = {row.at(1).get<double>(), row.at(2).get<double>()};
        }
    } catch (const nlohmann::json::exception& err) {
        throw ParseError(std::string("observed spec: ") + err.what());
    }
    return spec;
}

ObservationSpec read_observation_spec(const std::filesystem::path& path) {
    return parse_observation_spec(read_json(path));
}

Json parameters_to_json(const Parameters& p) {
    const ParameterLayout layout = ParameterLayout::of(p);
    const auto values = layout.flatten(p);
    Json out = Json::object();
    for (std::size_t k = 0; k < values.size(); ++k) out[layout.name(k)] = values[k];
    return out;
}

Parameters parameters_from_json(const Json& j) {
    std::size_t dim = 0;
    while (j.contains("b_S_" + std::to_string(dim))) ++dim;
    const ParameterLayout layout(dim, j.contains("xi"));
    std::vector<double> values(layout.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        const auto& name = layout.name(k);
        if (!j.contains(name)) throw ParseError("estimate '" + name + "' is missing");
        values[k] = j[name].is_null() ? std::numeric_limits<double>::quiet_NaN() : j[name].get<double>();
    }
    return layout.unflatten(values);
}

Json stats_to_json(const SufficientStats& st) {
    Json j;
    j["population"] = st.population;
    j["horizon"] = st.horizon;
    j["n_exposed"] = st.n_exposed;
    j["n_manifest"] = st.n_manifest;
    j["n_external"] = st.n_external;
    j["n_recovered"] = st.n_recovered;
    j["n_Is"] = st.n_Is;
    j["n_Ia"] = st.n_Ia;
    j["activations"] = st.activations;
    j["terminations"] = st.terminations;
    j["integral_E"] = st.integral_E;
    j["integral_I"] = st.integral_I;
    j["integral_disconnected"] = st.integral_disconnected;
    j["integral_connected"] = st.integral_connected;
    j["pressure_a"] = st.pressure_a;
    j["pressure_s"] = st.pressure_s;
    j["exposed_ids"] = st.exposed_ids;
    j["snapshot_a"] = st.snapshot_a;
    j["snapshot_s"] = st.snapshot_s;
    j["external_ids"] = st.external_ids;
    j["exposure_time"] = st.exposure_time;
    j["onset_time"] = st.onset_time;
    return j;
}

SufficientStats stats_from_json(const Json& j) {
    SufficientStats st;
    try {
        j.at("population").get_to(st.population);
        j.at("horizon").get_to(st.horizon);
        j.at("n_exposed").get_to(st.n_exposed);
        j.at("n_manifest").get_to(st.n_manifest);
        j.at("n_external").get_to(st.n_external);
        j.at("n_recovered").get_to(st.n_recovered);
        j.at("n_Is").get_to(st.n_Is);
        j.at("n_Ia").get_to(st.n_Ia);
        j.at("activations").get_to(st.activations);
        j.at("terminations").get_to(st.terminations);
        j.at("integral_E").get_to(st.integral_E);
        j.at("integral_I").get_to(st.integral_I);
        j.at("integral_disconnected").get_to(st.integral_disconnected);
        j.at("integral_connected").get_to(st.integral_connected);
        j.at("pressure_a").get_to(st.pressure_a);
        j.at("pressure_s").get_to(st.pressure_s);
        j.at("exposed_ids").get_to(st.exposed_ids);
        j.at("snapshot_a").get_to(st.snapshot_a);
        j.at("snapshot_s").get_to(st.snapshot_s);
        j.at("external_ids").get_to(st.external_ids);
        j.at("exposure_time").get_to(st.exposure_time);
        j.at("onset_time").get_to(st.onset_time);
    } catch (const nlohmann::json::exception& err) {
        throw ParseError(std::string("sufficient statistics: ") + err.what());
    }
    return st;
}

Json read_json(const std::filesystem::path& path) {
    auto in = open_in(path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& err) {
        throw ParseError(path.string() + ": " + err.what());
    }
}

void write_json(const Json& doc, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

void write_chains(const std::filesystem::path& dir, const ChainDump& dump) {
    std::filesystem::create_directories(dir);
    write_covariates(dump.covariates, dir / "covariates.csv");
    Json manifest;
    manifest["schema_version"] = kSchemaVersion;
    manifest["covariates"] = "covariates.csv";
    manifest["averaging"] = dump.mode == AveragingMode::AcrossRuns ? "across_runs" : "within_run";
    manifest["m"] = dump.m;
    Json files = Json::array();
    for (std::size_t r = 0; r < dump.chains.size(); ++r) {
        const auto& chain = dump.chains[r];
        Json doc;
        Json iterates = Json::array();
        for (const auto& p : chain.iterates) iterates.push_back(parameters_to_json(p));
        doc["iterates"] = iterates;
        Json samples = Json::array();
        for (const auto& s : chain.samples) samples.push_back(stats_to_json(s));
        doc["samples"] = samples;
        const std::string name = "run_" + std::to_string(r) + ".json";
        std::ofstream out(dir / name);
        out << doc.dump() << '\n';
        files.push_back(name);
    }
    manifest["runs"] = files;
    write_json(manifest, dir / "manifest.json");
}

ChainDump read_chains(const std::filesystem::path& dir) {
    const Json manifest = read_json(dir / "manifest.json");
    if (manifest.value("schema_version", 0) != kSchemaVersion) throw ParseError("unsupported chain dump schema_version");
    ChainDump dump;
    dump.covariates = read_covariates(dir / manifest.at("covariates").get<std::string>());
    dump.mode = manifest.value("averaging", std::string("across_runs")) == "within_run" ? AveragingMode::WithinRun
                                                                                       : AveragingMode::AcrossRuns;
    dump.m = manifest.value("m", 1);
    for (const auto& name : manifest.at("runs")) {
        const Json doc = read_json(dir / name.get<std::string>());
        ParameterChain chain;
        for (const auto& p : doc.at("iterates")) chain.iterates.push_back(parameters_from_json(p));
        for (const auto& s : doc.at("samples")) chain.samples.push_back(stats_from_json(s));
        dump.chains.push_back(std::move(chain));
    }
    return dump;
}

}  // namespace epinet::io
