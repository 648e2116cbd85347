#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "epinet/observed.hpp"
#include "epinet/simulator.hpp"
#include "epinet/stem.hpp"
#include "epinet/types.hpp"

namespace epinet::io {

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::ordered_json;

/// Malformed input; `line` is 1-based when known.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::optional<std::size_t> line = std::nullopt)
        : ValidationError(line ? "line " + std::to_string(*line) + ": " + what : what), line_(line) {}
    std::optional<std::size_t> line() const { return line_; }

private:
    std::optional<std::size_t> line_;
};

/// Decimal form with 17 significant digits (bit-exact round trip).
std::string format_double(double x);

// Event logs: one JSON header line, then one JSON object per event.
void write_event_log(const EventLog& log, std::ostream& out);
void write_event_log(const EventLog& log, const std::filesystem::path& path);
EventLog read_event_log(std::istream& in);
EventLog read_event_log(const std::filesystem::path& path);

// Covariates: comma-separated, header row, first column "id" (0..N-1, each once).
void write_covariates(const Covariates& cov, std::ostream& out);
void write_covariates(const Covariates& cov, const std::filesystem::path& path);
Covariates read_covariates(std::istream& in);
Covariates read_covariates(const std::filesystem::path& path);

/// External-case labels: CSV "id,label" with label internal/external (or 0/1).
std::vector<int> read_external_labels(const std::filesystem::path& path);
/// Re-labels the listed manifestations as external onsets (dropping their exposure events).
EventLog apply_external_labels(const EventLog& log, const std::vector<int>& external_ids);

struct SimulationSpec {
    Parameters params;
    SimConfig config;
};

SimulationSpec parse_config(const Json& doc, const std::filesystem::path& base_dir = {});
SimulationSpec read_config(const std::filesystem::path& path);

ObservationSpec parse_observation_spec(const Json& doc);
ObservationSpec read_observation_spec(const std::filesystem::path& path);

Json parameters_to_json(const Parameters& p);
Parameters parameters_from_json(const Json& estimates);

Json stats_to_json(const SufficientStats& st);
SufficientStats stats_from_json(const Json& doc);

Json read_json(const std::filesystem::path& path);
void write_json(const Json& doc, const std::filesystem::path& path);

struct ChainDump {
    std::vector<ParameterChain> chains;
    Covariates covariates;
    AveragingMode mode = AveragingMode::AcrossRuns;
    int m = 1;
};

void write_chains(const std::filesystem::path& dir, const ChainDump& dump);
ChainDump read_chains(const std::filesystem::path& dir);

}  // namespace epinet::io
