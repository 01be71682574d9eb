#pragma once

#include "dfm/em.hpp"
#include "dfm/montecarlo.hpp"
#include "dfm/prior.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace dfm::cli {

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;

/// Command-line values that take precedence over the config file.
struct Overrides {
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

struct EstimateConfig {
    std::string data_path;
    std::string output_dir = ".";
    int r = 1;
    int p = 0;
    int q = 1;
    PriorSpec prior;
    int max_iter = 500;
    double tol = 1e-4;
    std::string init = "pca";
    std::uint64_t seed = 0;
};

struct SimulateConfig {
    std::string output_dir = ".";
    DgpConfig dgp;
    double fraction = 0.0;
    MissingPattern pattern = MissingPattern::uniform();
    std::uint64_t mask_seed = 0;
};

struct StudyRunConfig {
    std::string output_dir = ".";
    StudyConfig study;
};

// Parsers reject unknown keys and out-of-range values with InputError.
PriorSpec parse_prior(const nlohmann::json& j, PriorSpec base = {});
EstimateConfig parse_estimate(const nlohmann::json& j, const Overrides& ov = {});
SimulateConfig parse_simulate(const nlohmann::json& j, const Overrides& ov = {});
StudyRunConfig parse_study(const nlohmann::json& j, const Overrides& ov = {});

// Fully resolved configs; feeding one back reproduces the run.
nlohmann::json to_json(const PriorSpec& p);
nlohmann::json to_json(const EstimateConfig& c);
nlohmann::json to_json(const SimulateConfig& c);
nlohmann::json to_json(const StudyRunConfig& c);

int cmd_estimate(const EstimateConfig& cfg, std::ostream& log);
int cmd_simulate(const SimulateConfig& cfg, std::ostream& log);
int cmd_study(const StudyRunConfig& cfg, std::ostream& log);

/// Dispatch on the config's "command" key. Errors are reported to `log` and mapped to kExitError.
int run(const nlohmann::json& config, const Overrides& ov, std::ostream& log);

/// Entry point used by the dfm executable.
int main(int argc, char** argv);

// Per-replication resume file for cmd_study.
std::string format_records(const StudyConfig& cfg, const std::vector<ReplicationRecord>& records);
std::vector<ReplicationRecord> parse_records(const StudyConfig& cfg, std::istream& in);
std::string format_study_csv(const StudyConfig& cfg, const std::vector<CellSummary>& cells);

}  // namespace dfm::cli
