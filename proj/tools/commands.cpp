#include <cmath>
#include <iostream>
#include <limits>

#include <CLI11.hpp>

#include "commands.hpp"

namespace epinet::cli {

namespace {

io::Json nullable(double x) { return std::isfinite(x) ? io::Json(x) : io::Json(nullptr); }

io::Json score_json(const Parameters& p, const std::vector<double>& g) {
    const ParameterLayout layout = ParameterLayout::of(p);
    io::Json out = io::Json::object();
    for (std::size_t k = 0; k < g.size(); ++k) out[layout.name(k)] = nullable(g[k]);
    return out;
}

io::Json se_json(const Parameters& p, const std::vector<double>& se) {
    const ParameterLayout layout = ParameterLayout::of(p);
    io::Json out = io::Json::object();
    for (std::size_t k = 0; k < se.size(); ++k) out[layout.name(k)] = nullable(se[k]);
    return out;
}

io::Json matrix_json(const Eigen::MatrixXd& m) {
    io::Json out = io::Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        io::Json row = io::Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(nullable(m(i, j)));
        out.push_back(row);
    }
    return out;
}

io::Json flags_json(const std::vector<std::string>& flags) {
    io::Json out = io::Json::array();
    for (const auto& f : flags) out.push_back(f);
    return out;
}

std::vector<SufficientStats> pooled_samples(std::span<const ParameterChain> chains) {
    std::vector<SufficientStats> out;
    for (const auto& c : chains) out.insert(out.end(), c.samples.begin(), c.samples.end());
    return out;
}

EventLog labelled(const EventLog& log, const std::optional<std::string>& labels) {
    return labels ? io::apply_external_labels(log, io::read_external_labels(*labels)) : log;
}

int fail(std::ostream& err, int code, const std::string& kind, const std::string& message, io::Json extra = {}) {
    io::Json d = extra.is_object() ? extra : io::Json::object();
    d["error"] = message;
    d["kind"] = kind;
    err << d.dump() << '\n';
    return code;
}

}  // namespace

SimulateOutcome simulate_with_retries(const io::SimulationSpec& spec, std::uint64_t seed, double min_attack_rate,
                                      int max_retries) {
    SimulateOutcome out;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        SimConfig config = spec.config;
        config.seed = attempt == 0 ? seed : derive_seed(seed, {static_cast<std::uint64_t>(attempt)});
        out.result = simulate(spec.params, config);
        out.seed_used = config.seed;
        out.attempts = attempt + 1;
        if (out.result.attack_rate() >= min_attack_rate) return out;
    }
    throw std::runtime_error("no simulation reached the minimum attack rate within the retry budget");
}

io::Json fit_complete_report(const EventLog& log, const Covariates& covariates, bool external) {
    const SufficientStats stats = sufficient_statistics(log, covariates);
    FitOptions options;
    options.external = external;
    const FitResult fit = fit_complete(stats, covariates, options);
    io::Json out;
    out["schema_version"] = io::kSchemaVersion;
    out["command"] = "fit-complete";
    out["estimates"] = io::parameters_to_json(fit.params);
    out["eta"] = nullable(fit.params.eta());
    out["score"] = score_json(fit.params, fit.score);
    double worst = 0.0;
    for (double g : fit.score) worst = std::max(worst, std::abs(g));
    out["max_abs_score"] = worst;
    out["iterations"] = fit.iterations;
    out["flags"] = flags_json(fit.flags);
    return out;
}

io::Json fit_stem_report(const EventLog& log, const Covariates& covariates, const ObservationSpec& spec,
                         const StemOptions& options) {
    const ObservedData observed = make_observed(log, covariates, spec);
    StemConfig config;
    config.runs = options.runs;
    config.total_iters = options.iters;
    config.burn_in = options.burn_in;
    config.window = options.window.value_or(std::min(20, options.iters - options.burn_in));
    config.seed = options.seed;
    config.init = options.random_init ? InitMode::Random : InitMode::Neutral;
    config.fit.external = options.external;
    config.validate();

    const auto chains = stem_runs(observed, config);
    const AveragingMode mode = config.runs > 1 ? AveragingMode::AcrossRuns : AveragingMode::WithinRun;
    const Parameters estimate = mode == AveragingMode::AcrossRuns
                                    ? average_estimates(chains, mode, config.runs, config.window)
                                    : average_estimates(chains, mode, config.window);
    const int m = mode == AveragingMode::AcrossRuns ? config.runs : config.window;

    io::Json out;
    out["schema_version"] = io::kSchemaVersion;
    out["command"] = "fit-stem";
    out["estimates"] = io::parameters_to_json(estimate);
    out["eta"] = nullable(estimate.eta());
    out["runs"] = config.runs;
    out["iters"] = config.total_iters;
    out["burn_in"] = config.burn_in;
    out["window"] = config.window;
    out["averaging"] = mode == AveragingMode::AcrossRuns ? "across_runs" : "within_run";

    ImputationCounters total;
    std::vector<std::string> flags;
    io::Json per_run = io::Json::array();
    for (const auto& c : chains) {
        total.merge(c.counters);
        for (const auto& f : c.flags) {
            if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.push_back(f);
        }
        per_run.push_back(io::parameters_to_json(average_estimates(std::span(&c, 1), AveragingMode::WithinRun, config.window)));
    }
    out["run_estimates"] = per_run;
    out["acceptance"] = {{"proposals", total.proposals},
                         {"accepted", total.accepted},
                         {"pooled_ratio", total.pooled_ratio()},
                         {"mean_probability", total.mean_acceptance()},
                         {"direct_draws", total.direct},
                         {"repairs", total.repairs}};

    const auto samples = pooled_samples(chains);
    try {
        const Information info = louis_information(estimate, samples, covariates);
        const StandardErrors se = asymptotic_se(info.matrix, m, mode);
        out["standard_errors"] = se_json(estimate, se.se);
        out["variance_multiplier"] = se.multiplier;
        if (!info.positive_definite) flags.push_back("information matrix is not positive definite");
    } catch (const EstimationError& err) {
        out["standard_errors"] = nullptr;
        flags.push_back(std::string("standard errors unavailable: ") + err.what());
    }
    out["flags"] = flags_json(flags);

    if (options.dump_chains) {
        io::ChainDump dump{chains, covariates, mode, m};
        io::write_chains(*options.dump_chains, dump);
    }
    return out;
}

io::Json variance_report(const io::ChainDump& dump, const Parameters& theta) {
    const auto samples = pooled_samples(dump.chains);
    const Information info = louis_information(theta, samples, dump.covariates);
    const StandardErrors se = asymptotic_se(info.matrix, dump.m, dump.mode);
    io::Json out;
    out["schema_version"] = io::kSchemaVersion;
    out["command"] = "variance";
    out["parameters"] = io::Json::array();
    const ParameterLayout layout = ParameterLayout::of(theta);
    for (const auto& n : layout.names()) out["parameters"].push_back(n);
    out["information"] = matrix_json(info.matrix);
    out["asymmetry"] = info.asymmetry;
    out["positive_definite"] = info.positive_definite;
    out["variance_multiplier"] = se.multiplier;
    out["covariance"] = matrix_json(se.covariance);
    out["standard_errors"] = se_json(theta, se.se);
    out["samples"] = samples.size();
    return out;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Epidemic-network simulation and inference"};
    app.require_subcommand(1);

    std::string config_path, events_out, covariates_out;
    std::uint64_t sim_seed = 0;
    double min_attack = 0.0;
    int max_retries = 100;
    auto* sim = app.add_subcommand("simulate", "Simulate an event log from a config file");
    sim->add_option("--config", config_path, "Config JSON")->required();
    sim->add_option("--seed", sim_seed, "Master seed")->required();
    sim->add_option("--out", events_out, "Event log output (JSON lines)")->required();
    sim->add_option("--covariates-out", covariates_out, "Covariate CSV output (default: <out>.covariates.csv)");
    sim->add_option("--min-attack-rate", min_attack, "Re-simulate until the attack rate reaches this value");
    sim->add_option("--max-retries", max_retries, "Retry budget for --min-attack-rate");

    std::string events_path, covariates_path, out_path;
    std::optional<std::string> labels_path;
    auto* fc = app.add_subcommand("fit-complete", "Complete-data maximum likelihood");
    fc->add_option("--events", events_path, "Event log")->required();
    fc->add_option("--covariates", covariates_path, "Covariate CSV")->required();
    fc->add_option("--external-labels", labels_path, "CSV id,label marking external cases");
    fc->add_option("--out", out_path, "Output JSON")->required();

    std::string spec_path;
    StemOptions so;
    std::optional<std::string> dump_dir;
    std::string init = "neutral";
    auto* fs = app.add_subcommand("fit-stem", "Stochastic EM with hidden exposure/recovery times");
    fs->add_option("--events", events_path, "Event log")->required();
    fs->add_option("--covariates", covariates_path, "Covariate CSV")->required();
    fs->add_option("--observed-spec", spec_path, "Observation spec JSON")->required();
    fs->add_option("--external-labels", labels_path, "CSV id,label marking external cases");
    fs->add_option("--runs", so.runs, "Independent runs");
    fs->add_option("--iters", so.iters, "Iterations per run");
    fs->add_option("--burn-in", so.burn_in, "Burn-in iterations");
    fs->add_option("--window", so.window, "Averaging window (default min(20, iters - burn-in))");
    fs->add_option("--seed", so.seed, "Master seed");
    fs->add_option("--init", init, "Starting values: neutral or random")->check(CLI::IsMember({"neutral", "random"}));
    fs->add_option("--dump-chains", dump_dir, "Directory for chains and augmented statistics");
    fs->add_option("--out", out_path, "Output JSON")->required();

    std::string chains_dir, at_path;
    auto* var = app.add_subcommand("variance", "Louis information and standard errors from dumped chains");
    var->add_option("--chains", chains_dir, "Directory written by fit-stem --dump-chains")->required();
    var->add_option("--at", at_path, "Estimate JSON (its 'estimates' object is used)")->required();
    var->add_option("--out", out_path, "Output JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return kUsage;
    }

    try {
        if (*sim) {
            const auto spec = io::read_config(config_path);
            const auto outcome = simulate_with_retries(spec, sim_seed, min_attack, max_retries);
            io::write_event_log(outcome.result.log, std::filesystem::path(events_out));
            const std::filesystem::path cov_out =
                covariates_out.empty() ? std::filesystem::path(events_out + ".covariates.csv") : std::filesystem::path(covariates_out);
            io::write_covariates(outcome.result.covariates, cov_out);
            io::Json summary{{"events", outcome.result.log.events.size()},
                             {"attack_rate", outcome.result.attack_rate()},
                             {"seed_used", outcome.seed_used},
                             {"attempts", outcome.attempts},
                             {"covariates", cov_out.string()}};
            out << summary.dump() << '\n';
        } else if (*fc) {
            const auto log = labelled(io::read_event_log(std::filesystem::path(events_path)), labels_path);
            const auto cov = io::read_covariates(std::filesystem::path(covariates_path));
            io::write_json(fit_complete_report(log, cov, labels_path.has_value()), out_path);
        } else if (*fs) {
            const auto log = labelled(io::read_event_log(std::filesystem::path(events_path)), labels_path);
            const auto cov = io::read_covariates(std::filesystem::path(covariates_path));
            const auto spec = io::read_observation_spec(spec_path);
            so.random_init = init == "random";
            so.external = labels_path.has_value();
            if (dump_dir) so.dump_chains = *dump_dir;
            io::write_json(fit_stem_report(log, cov, spec, so), out_path);
        } else if (*var) {
            const auto dump = io::read_chains(chains_dir);
            const auto at = io::read_json(at_path);
            if (!at.contains("estimates")) throw io::ParseError("estimate file has no 'estimates' object");
            io::write_json(variance_report(dump, io::parameters_from_json(at["estimates"])), out_path);
        }
    } catch (const StemError& e) {
        io::Json extra{{"iteration", e.iteration()}, {"individuals", e.individuals()}};
        return fail(err, kNumerical, "numerical", e.what(), extra);
    } catch (const EstimationError& e) {
        io::Json extra{{"last_iterate", e.last_iterate()}, {"residuals", e.residuals()}};
        return fail(err, kNumerical, "numerical", e.what(), extra);
    } catch (const SamplingError& e) {
        return fail(err, kNumerical, "numerical", e.what(), io::Json{{"individuals", e.individuals()}});
    } catch (const ValidationError& e) {
        io::Json extra = io::Json::object();
        if (e.event_index()) extra["event_index"] = *e.event_index();
        return fail(err, kValidation, "validation", e.what(), extra);
    } catch (const std::invalid_argument& e) {
        return fail(err, kValidation, "validation", e.what());
    } catch (const std::exception& e) {
        return fail(err, kNumerical, "numerical", e.what());
    }
    return kOk;
}

}  // namespace epinet::cli
