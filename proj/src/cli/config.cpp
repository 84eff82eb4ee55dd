#include "mfvol/cli.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

namespace mfvol::cli {

namespace {

template <class T>
Json optional_json(const std::optional<T>& v)
{
    return v ? Json(*v) : Json(nullptr);
}

template <class T>
void read(const Json& j, const char* key, T& dst)
{
    if (j.contains(key))
        dst = j.at(key).get<T>();
}

template <class T>
void read(const Json& j, const char* key, std::optional<T>& dst)
{
    if (!j.contains(key))
        return;
    const Json& v = j.at(key);
    if (v.is_null())
        dst.reset();
    else
        dst = v.get<T>();
}

std::string model_name(ModelKind k)
{
    return k == ModelKind::sv ? "sv" : "mrw";
}

} // namespace

ModelKind parse_model(const std::string& s)
{
    if (s == "sv")
        return ModelKind::sv;
    if (s == "mrw")
        return ModelKind::mrw;
    throw std::invalid_argument("unknown model '" + s + "' (expected sv or mrw)");
}

void validate(const RunConfig& cfg)
{
    if (std::find(kCommands.begin(), kCommands.end(), cfg.command) == kCommands.end())
        throw std::invalid_argument("unknown command '" + cfg.command + "'");
    if (cfg.format != "json" && cfg.format != "csv")
        throw std::invalid_argument("format must be json or csv");
    if (cfg.jobs < 1)
        throw std::invalid_argument("jobs must be at least 1");
    if (cfg.tau && *cfg.tau < 1)
        throw std::invalid_argument("tau must be at least 1");
    if (cfg.command != "diagnose" && !cfg.model)
        throw std::invalid_argument(cfg.command + " needs --model");
    if (cfg.command == "simulate") {
        if (cfg.input)
            throw std::invalid_argument("simulate generates its own series and takes no --input");
        if (!cfg.length || *cfg.length < 1)
            throw std::invalid_argument("simulate needs --T >= 1");
    } else {
        if (!cfg.input)
            throw std::invalid_argument(cfg.command + " needs --input");
        if (cfg.length)
            throw std::invalid_argument("--T only applies to simulate");
        std::ifstream probe(*cfg.input);
        if (!probe)
            throw std::invalid_argument("input file '" + *cfg.input + "' does not exist");
    }
    if (cfg.horizon < 1 || cfg.horizon_max < 1)
        throw std::invalid_argument("horizon must be at least 1");
    if (cfg.first < 1)
        throw std::invalid_argument("first prefix length must be at least 1");
    if (cfg.grid_points < 3)
        throw std::invalid_argument("grid needs at least three points");
    if (!(cfg.halfwidth_sd > 0.0))
        throw std::invalid_argument("grid half-width must be positive");
    if (cfg.q_values.empty())
        throw std::invalid_argument("at least one moment order is required");
    if (cfg.model == ModelKind::sv && (cfg.lambda || cfg.R))
        throw std::invalid_argument("--lambda and --R apply to the mrw model only");
    if (cfg.model == ModelKind::mrw && (cfg.psi || cfg.sigma_u))
        throw std::invalid_argument("--psi and --sigma-u apply to the sv model only");
}

Json to_json(const RunConfig& cfg)
{
    Json j;
    j["command"] = cfg.command;
    j["model"] = cfg.model ? Json(model_name(*cfg.model)) : Json(nullptr);
    j["input"] = optional_json(cfg.input);
    j["format"] = cfg.format;
    j["seed"] = cfg.seed;
    j["tau"] = optional_json(cfg.tau);
    j["jobs"] = cfg.jobs;
    j["column"] = optional_json(cfg.column);
    j["date_column"] = optional_json(cfg.date_column);
    j["prices"] = cfg.prices;
    j["psi"] = optional_json(cfg.psi);
    j["sigma_u"] = optional_json(cfg.sigma_u);
    j["sigma"] = optional_json(cfg.sigma);
    j["lambda"] = optional_json(cfg.lambda);
    j["R"] = optional_json(cfg.R);
    j["restarts"] = cfg.restarts;
    j["max_iterations"] = cfg.max_iterations;
    j["size_tolerance"] = cfg.size_tolerance;
    j["T"] = optional_json(cfg.length);
    j["latent"] = cfg.latent;
    j["first"] = cfg.first;
    j["N"] = cfg.horizon;
    j["N_max"] = cfg.horizon_max;
    j["grid_points"] = cfg.grid_points;
    j["halfwidth_sd"] = cfg.halfwidth_sd;
    j["q"] = cfg.q_values;
    j["scale_count"] = cfg.scale_count;
    j["max_lag"] = optional_json(cfg.max_lag);
    j["fit_min_lag"] = cfg.fit_min_lag;
    j["fit_max_lag"] = optional_json(cfg.fit_max_lag);
    return j;
}

RunConfig config_from_json(const Json& j)
{
    if (!j.is_object())
        throw std::invalid_argument("configuration must be a JSON object");
    static const std::set<std::string> known = {
        "command", "model", "input", "format", "seed", "tau", "jobs", "column", "date_column",
        "prices", "psi", "sigma_u", "sigma", "lambda", "R", "restarts", "max_iterations",
        "size_tolerance", "T", "latent", "first", "N", "N_max", "grid_points", "halfwidth_sd",
        "q", "scale_count", "max_lag", "fit_min_lag", "fit_max_lag"};
    for (const auto& item : j.items())
        if (!known.count(item.key()))
            throw std::invalid_argument("unknown configuration key '" + item.key() + "'");

    RunConfig cfg;
    try {
        read(j, "command", cfg.command);
        std::optional<std::string> model;
        read(j, "model", model);
        if (model)
            cfg.model = parse_model(*model);
        read(j, "input", cfg.input);
        read(j, "format", cfg.format);
        read(j, "seed", cfg.seed);
        read(j, "tau", cfg.tau);
        read(j, "jobs", cfg.jobs);
        read(j, "column", cfg.column);
        read(j, "date_column", cfg.date_column);
        read(j, "prices", cfg.prices);
        read(j, "psi", cfg.psi);
        read(j, "sigma_u", cfg.sigma_u);
        read(j, "sigma", cfg.sigma);
        read(j, "lambda", cfg.lambda);
        read(j, "R", cfg.R);
        read(j, "restarts", cfg.restarts);
        read(j, "max_iterations", cfg.max_iterations);
        read(j, "size_tolerance", cfg.size_tolerance);
        read(j, "T", cfg.length);
        read(j, "latent", cfg.latent);
        read(j, "first", cfg.first);
        read(j, "N", cfg.horizon);
        read(j, "N_max", cfg.horizon_max);
        read(j, "grid_points", cfg.grid_points);
        read(j, "halfwidth_sd", cfg.halfwidth_sd);
        read(j, "q", cfg.q_values);
        read(j, "scale_count", cfg.scale_count);
        read(j, "max_lag", cfg.max_lag);
        read(j, "fit_min_lag", cfg.fit_min_lag);
        read(j, "fit_max_lag", cfg.fit_max_lag);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed configuration: ") + e.what());
    }
    return cfg;
}

RunConfig config_from_artifact(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open configuration file '" + path + "'");
    const int first = in.peek();
    if (first == '#') {
        std::string line;
        const std::string tag = "# meta: ";
        while (std::getline(in, line) && line.rfind('#', 0) == 0)
            if (line.rfind(tag, 0) == 0)
                return config_from_json(Json::parse(line.substr(tag.size())).at("config"));
        throw std::invalid_argument("'" + path + "' has no meta header");
    }
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("'" + path + "' is not valid JSON: " + e.what());
    }
    // Either a whole artifact or a bare configuration object.
    if (j.contains("meta"))
        return config_from_json(j.at("meta").at("config"));
    return config_from_json(j);
}

} // namespace mfvol::cli
