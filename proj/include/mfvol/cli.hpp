#pragma once

#include "mfvol/inference.hpp"
#include "mfvol/series.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mfvol::cli {

using Json = nlohmann::ordered_json;

inline const std::vector<std::string> kCommands = {"fit",      "smooth",   "filter-seq", "forecast",
                                                   "density",  "simulate", "diagnose"};

/// Everything needed to reproduce an artifact.  The output path is kept out
/// of the embedded copy so a replay can write somewhere else.
struct RunConfig {
    std::string command;
    std::optional<ModelKind> model;
    std::optional<std::string> input;
    std::optional<std::string> output;
    std::string format = "json";
    std::uint64_t seed = 0;
    std::optional<std::size_t> tau;
    std::size_t jobs = 1;

    // input columns
    std::optional<std::string> column;
    std::optional<std::string> date_column;
    bool prices = false;

    // parameter overrides
    std::optional<double> psi;
    std::optional<double> sigma_u;
    std::optional<double> sigma;
    std::optional<double> lambda;
    std::optional<double> R;

    // optimiser
    std::size_t restarts = 2;
    std::size_t max_iterations = 400;
    double size_tolerance = 1e-3;

    // command specific
    std::optional<std::size_t> length; ///< simulate: T
    bool latent = true;                ///< simulate: also write h
    std::size_t first = 1;             ///< filter-seq: first prefix length
    std::size_t horizon = 1;           ///< density: N
    std::size_t horizon_max = 250;     ///< forecast: N_max
    std::size_t grid_points = 257;
    double halfwidth_sd = 8.0;
    std::vector<double> q_values = {1.0, 2.0, 3.0, 4.0};
    std::size_t scale_count = 12;
    std::optional<std::size_t> max_lag;
    std::size_t fit_min_lag = 4;
    std::optional<std::size_t> fit_max_lag;
};

ModelKind parse_model(const std::string& name);

/// Throws std::invalid_argument on inconsistent settings.
void validate(const RunConfig& cfg);

Json to_json(const RunConfig& cfg);
/// Inverse of to_json; unknown keys are rejected.
RunConfig config_from_json(const Json& j);

/// Reads the embedded configuration of a JSON or CSV artifact.
RunConfig config_from_artifact(const std::string& path);

/// Runs one command and writes the artifact to cfg.output, or to `out` when
/// no output path is set.  Throws on failure.
void run(const RunConfig& cfg, std::ostream& out);

/// Full command-line entry point.  Returns the process exit status; failures
/// are reported on `err` as a JSON object.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace mfvol::cli
