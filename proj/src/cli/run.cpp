#include "mfvol/cli.hpp"

#include "mfvol/diagnostics.hpp"
#include "mfvol/errors.hpp"
#include "mfvol/simulate.hpp"

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace mfvol::cli {

namespace {

struct Artifact {
    Json summary = Json::object();
    Json rows = Json::array();
    std::vector<std::string> warnings;
};

struct Input {
    ReturnSeries series;
    std::size_t skipped_rows = 0;
};

Input load_input(const RunConfig& cfg, std::ostream& log)
{
    const ColumnSpec columns{cfg.column, cfg.date_column};
    IngestResult r =
        ingest_prices(*cfg.input, columns, cfg.prices ? IngestMode::prices : IngestMode::returns);
    if (r.skipped_rows > 0)
        log << "mfvol: skipped " << r.skipped_rows << " rows with missing values\n";
    return {std::move(r.series), r.skipped_rows};
}

Json params_json(const ModelParams& p)
{
    Json j;
    if (const auto* s = std::get_if<SvParams>(&p)) {
        j["psi"] = s->psi;
        j["sigma_u"] = s->sigma_u;
        j["sigma"] = s->sigma;
    } else {
        const auto& m = std::get<MrwParams>(p);
        j["lambda"] = m.lambda;
        j["sigma"] = m.sigma;
        j["R"] = m.R;
        j["tau"] = m.tau;
    }
    return j;
}

bool has_overrides(const RunConfig& cfg)
{
    return cfg.psi || cfg.sigma_u || cfg.sigma || cfg.lambda || cfg.R;
}

bool complete_params(const RunConfig& cfg)
{
    if (*cfg.model == ModelKind::sv)
        return cfg.psi && cfg.sigma_u && cfg.sigma;
    return cfg.lambda && cfg.sigma && cfg.R;
}

ModelParams apply_overrides(ModelParams p, const RunConfig& cfg)
{
    if (auto* s = std::get_if<SvParams>(&p)) {
        s->psi = cfg.psi.value_or(s->psi);
        s->sigma_u = cfg.sigma_u.value_or(s->sigma_u);
        s->sigma = cfg.sigma.value_or(s->sigma);
    } else {
        auto& m = std::get<MrwParams>(p);
        m.lambda = cfg.lambda.value_or(m.lambda);
        m.sigma = cfg.sigma.value_or(m.sigma);
        m.R = cfg.R.value_or(m.R);
    }
    std::visit([](const auto& v) { v.validate(); }, p);
    return p;
}

std::size_t resolved_tau(const RunConfig& cfg, std::size_t T)
{
    return cfg.tau.value_or(default_truncation(T));
}

ModelParams given_params(const RunConfig& cfg, std::size_t T)
{
    ModelParams p = *cfg.model == ModelKind::sv ? ModelParams(SvParams{})
                                                : ModelParams(MrwParams{0.3, 1.0, 2.0, resolved_tau(cfg, T)});
    return apply_overrides(p, cfg);
}

FitOptions fit_options(const RunConfig& cfg, std::span<const double> x)
{
    FitOptions o;
    o.tau = resolved_tau(cfg, x.size());
    o.restarts = cfg.restarts;
    o.max_iterations = cfg.max_iterations;
    o.size_tolerance = cfg.size_tolerance;
    o.seed = cfg.seed;
    o.jobs = cfg.jobs;
    if (has_overrides(cfg))
        o.start = apply_overrides(initial_guess(*cfg.model, x, *o.tau), cfg);
    return o;
}

/// Parameters for the latent-state commands: taken as given when complete,
/// otherwise estimated first with any given values applied on top.
ModelParams resolve_params(const RunConfig& cfg, std::span<const double> x, Artifact& a)
{
    if (complete_params(cfg)) {
        a.summary["params_source"] = "given";
        return given_params(cfg, x.size());
    }
    FitOptions o = fit_options(cfg, x);
    const FitResult fit = fit_ml(*cfg.model, x, o);
    if (!fit.converged)
        a.warnings.push_back("parameter estimation did not converge");
    a.summary["params_source"] = has_overrides(cfg) ? "fitted_with_overrides" : "fitted";
    return apply_overrides(fit.params, cfg);
}

void add_label(Json& row, const ReturnSeries& s, std::size_t i)
{
    if (!s.labels.empty())
        row["label"] = s.labels[i];
}

Artifact run_fit(const RunConfig& cfg, const Input& in)
{
    const auto& x = in.series.values;
    const FitResult fit = fit_ml(*cfg.model, x, fit_options(cfg, x));
    Artifact a;
    a.summary["T"] = x.size();
    a.summary["params"] = params_json(fit.params);
    a.summary["log_likelihood"] = fit.log_likelihood;
    a.summary["converged"] = fit.converged;
    a.summary["boundary"] = fit.boundary;
    a.summary["evaluations"] = fit.evaluations;
    if (!fit.converged)
        a.warnings.push_back("optimizer did not converge; best iterate reported");
    for (const auto& b : fit.boundary)
        a.warnings.push_back("estimate of " + b + " is on the boundary of its range");
    for (const auto& e : fit.trace) {
        Json row;
        row["run"] = e.run;
        row["iteration"] = e.iteration;
        row["log_likelihood"] = e.log_likelihood;
        const Json params = params_json(e.params);
        for (const auto& kv : params.items())
            row[kv.key()] = kv.value();
        a.rows.push_back(std::move(row));
    }
    return a;
}

Artifact run_smooth(const RunConfig& cfg, const Input& in)
{
    Artifact a;
    const auto& x = in.series.values;
    const ModelParams p = resolve_params(cfg, x, a);
    const LatentEstimate h = smooth(LatentModel(p), x);
    a.summary["T"] = x.size();
    a.summary["params"] = params_json(p);
    for (std::size_t t = 0; t < h.values.size(); ++t) {
        Json row;
        row["t"] = t + 1;
        add_label(row, in.series, t);
        row["h"] = h.values[t];
        row["volatility"] = volatility_scale(h.values[t]);
        a.rows.push_back(std::move(row));
    }
    return a;
}

Artifact run_filter_seq(const RunConfig& cfg, const Input& in)
{
    Artifact a;
    const auto& x = in.series.values;
    if (cfg.first > x.size())
        throw std::invalid_argument("first prefix length exceeds the series length");
    const ModelParams p = resolve_params(cfg, x, a);
    const std::vector<double> h = filter_sequence(LatentModel(p), x, cfg.first);
    a.summary["T"] = x.size();
    a.summary["params"] = params_json(p);
    for (std::size_t i = 0; i < h.size(); ++i) {
        const std::size_t t = cfg.first + i;
        Json row;
        row["t"] = t;
        add_label(row, in.series, t - 1);
        row["h"] = h[i];
        row["volatility"] = volatility_scale(h[i]);
        a.rows.push_back(std::move(row));
    }
    return a;
}

Artifact run_forecast(const RunConfig& cfg, const Input& in)
{
    Artifact a;
    const auto& x = in.series.values;
    const ModelParams p = resolve_params(cfg, x, a);
    const LatentModel model(p);
    const LatentEstimate s = smooth(model, x);
    const auto curve = forecast_from_smoothed(model, s.values, cfg.horizon_max);
    a.summary["T"] = x.size();
    a.summary["params"] = params_json(p);
    a.summary["h_T"] = s.values.back();
    for (const auto& f : curve) {
        Json row;
        row["N"] = f.horizon;
        row["h"] = f.values.front();
        row["volatility"] = volatility_scale(f.values.front());
        row["variance"] = f.variance.value_or(0.0);
        a.rows.push_back(std::move(row));
    }
    return a;
}

Artifact run_density(const RunConfig& cfg, const Input& in)
{
    Artifact a;
    const auto& x = in.series.values;
    const ModelParams p = resolve_params(cfg, x, a);
    DensityOptions o;
    o.grid_points = cfg.grid_points;
    o.halfwidth_sd = cfg.halfwidth_sd;
    o.jobs = cfg.jobs;
    const DensityCurve d = conditional_return_density(LatentModel(p), x, cfg.horizon, {}, o);
    a.summary["T"] = x.size();
    a.summary["params"] = params_json(p);
    a.summary["N"] = d.horizon;
    a.summary["normalization"] = d.normalization;
    a.summary["raw_normalization"] = d.raw_normalization;
    a.summary["coarse_grid"] = d.coarse_grid;
    if (d.coarse_grid)
        a.warnings.push_back("coarse_grid: raw normalization deviates from 1 by more than 10%");
    for (std::size_t i = 0; i < d.grid.size(); ++i) {
        Json row;
        row["xi"] = d.grid[i];
        row["density"] = d.density[i];
        a.rows.push_back(std::move(row));
    }
    return a;
}

Artifact run_simulate(const RunConfig& cfg)
{
    if (!complete_params(cfg))
        throw std::invalid_argument(*cfg.model == ModelKind::sv
                                        ? "simulate needs --psi, --sigma-u and --sigma"
                                        : "simulate needs --lambda, --sigma and --R");
    const std::size_t T = *cfg.length;
    const ModelParams p = given_params(cfg, T);
    const SimulationOutput sim = simulate(p, T, cfg.seed);
    Artifact a;
    a.summary["T"] = T;
    a.summary["params"] = params_json(p);
    for (std::size_t t = 0; t < T; ++t) {
        Json row;
        row["t"] = t + 1;
        row["x"] = sim.x[t];
        if (cfg.latent)
            row["h"] = sim.h[t];
        a.rows.push_back(std::move(row));
    }
    return a;
}

Artifact run_diagnose(const RunConfig& cfg, const Input& in)
{
    const auto& x = in.series.values;
    const std::size_t T = x.size();
    if (T < 32)
        throw std::invalid_argument("diagnose needs at least 32 observations");
    const auto scales = log_spaced_scales(1, T / 8, cfg.scale_count);
    const ScalingEstimate z = structure_functions(x, cfg.q_values, scales);

    AcfOptions ao;
    ao.max_lag = cfg.max_lag.value_or(std::min<std::size_t>(100, (T - 1) / 4));
    ao.fit_min_lag = cfg.fit_min_lag;
    ao.fit_max_lag = cfg.fit_max_lag.value_or(ao.max_lag);
    const AbsReturnAcf acf = abs_return_acf(x, ao);

    Artifact a;
    a.summary["T"] = T;
    a.summary["scales"] = z.scales;
    Json aj;
    aj["slope"] = acf.slope;
    aj["intercept"] = acf.intercept;
    aj["r2"] = acf.r2;
    aj["fit_min_lag"] = acf.fit_min_lag;
    aj["fit_max_lag"] = acf.fit_max_lag;
    aj["reliable"] = acf.reliable;
    aj["autocorrelation"] = acf.autocorrelation;
    aj["moment"] = acf.moment;
    a.summary["abs_return_acf"] = std::move(aj);
    if (!acf.reliable)
        a.warnings.push_back("absolute-return ACF shows no dependence; slope is unreliable");
    for (std::size_t i = 0; i < z.q_values.size(); ++i) {
        Json row;
        row["q"] = z.q_values[i];
        row["zeta_hat"] = z.zeta_hat[i];
        row["std_error"] = z.std_error[i];
        row["r2"] = z.r2[i];
        a.rows.push_back(std::move(row));
    }
    return a;
}

std::string csv_field(const Json& v)
{
    if (v.is_null())
        return "";
    if (v.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        return buf;
    }
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos)
            return s;
        std::string q = "\"";
        for (char c : s)
            q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    }
    return v.dump();
}

void write_artifact(const RunConfig& cfg, const Artifact& a, std::ostream& os)
{
    Json meta;
    meta["config"] = to_json(cfg);
    meta["version"] = MFVOL_VERSION;
    meta["seed"] = cfg.seed;
    Json summary = a.summary;
    summary["warnings"] = a.warnings;

    if (cfg.format == "json") {
        Json doc;
        doc["meta"] = std::move(meta);
        doc["summary"] = std::move(summary);
        doc["data"] = a.rows;
        os << doc.dump(2) << '\n';
        return;
    }
    os << "# meta: " << meta.dump() << '\n';
    os << "# summary: " << summary.dump() << '\n';
    if (a.rows.empty())
        return;
    bool first = true;
    for (const auto& kv : a.rows.front().items()) {
        os << (first ? "" : ",") << kv.key();
        first = false;
    }
    os << '\n';
    for (const auto& row : a.rows) {
        first = true;
        for (const auto& kv : row.items()) {
            os << (first ? "" : ",") << csv_field(kv.value());
            first = false;
        }
        os << '\n';
    }
}

} // namespace

void run(const RunConfig& given, std::ostream& out)
{
    validate(given);
    RunConfig cfg = given;
    Artifact a;
    if (cfg.command == "simulate") {
        if (cfg.model == ModelKind::mrw)
            cfg.tau = resolved_tau(cfg, *cfg.length);
        a = run_simulate(cfg);
    } else {
        const Input in = load_input(cfg, std::cerr);
        if (cfg.model == ModelKind::mrw)
            cfg.tau = resolved_tau(cfg, in.series.values.size());
        if (cfg.command == "fit")
            a = run_fit(cfg, in);
        else if (cfg.command == "smooth")
            a = run_smooth(cfg, in);
        else if (cfg.command == "filter-seq")
            a = run_filter_seq(cfg, in);
        else if (cfg.command == "forecast")
            a = run_forecast(cfg, in);
        else if (cfg.command == "density")
            a = run_density(cfg, in);
        else
            a = run_diagnose(cfg, in);
        a.summary["skipped_rows"] = in.skipped_rows;
    }
    for (const auto& w : a.warnings)
        std::cerr << "mfvol: warning: " << w << '\n';

    if (!cfg.output) {
        write_artifact(cfg, a, out);
        out.flush();
        if (!out)
            throw std::runtime_error("failed to write output");
        return;
    }
    // Write next to the target and rename, so a failed run leaves no artifact.
    const std::filesystem::path target(*cfg.output);
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream f(tmp);
        if (!f)
            throw std::runtime_error("cannot open output file '" + target.string() + "'");
        write_artifact(cfg, a, f);
        f.close();
        if (!f)
            throw std::runtime_error("failed to write output file '" + target.string() + "'");
    }
    std::filesystem::rename(tmp, target);
}

namespace {

Json error_json(const std::string& type, const std::string& message)
{
    Json j;
    j["error"]["type"] = type;
    j["error"]["message"] = message;
    return j;
}

} // namespace

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Stochastic volatility and multifractal random walk inference"};
    app.fallthrough();
    app.require_subcommand(0, 1);

    RunConfig cfg;
    std::optional<std::string> model, replay;
    app.add_option("--model", model, "sv or mrw");
    app.add_option("--input", cfg.input, "CSV file with a header row");
    app.add_option("--output", cfg.output, "artifact path (default: stdout)");
    app.add_option("--format", cfg.format, "json or csv")->capture_default_str();
    app.add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    app.add_option("--tau", cfg.tau, "MRW truncation lag (default min(T-1, 100))");
    app.add_option("--jobs", cfg.jobs, "worker threads")->capture_default_str();
    app.add_option("--config", replay, "re-run the configuration embedded in an artifact");

    app.add_option("--column", cfg.column, "value column name");
    app.add_option("--date-column", cfg.date_column, "label column name");
    app.add_flag("--prices", cfg.prices, "input column holds prices, not log-returns");

    app.add_option("--psi", cfg.psi);
    app.add_option("--sigma-u", cfg.sigma_u);
    app.add_option("--sigma", cfg.sigma);
    app.add_option("--lambda", cfg.lambda);
    app.add_option("--R", cfg.R);

    app.add_option("--restarts", cfg.restarts)->capture_default_str();
    app.add_option("--max-iterations", cfg.max_iterations)->capture_default_str();
    app.add_option("--size-tolerance", cfg.size_tolerance)->capture_default_str();

    app.add_option("--T", cfg.length, "simulate: series length");
    bool no_latent = false;
    app.add_flag("--no-latent", no_latent, "simulate: omit the latent field");
    app.add_option("--first", cfg.first, "filter-seq: first prefix length")->capture_default_str();
    app.add_option("--N", cfg.horizon, "density: horizon")->capture_default_str();
    app.add_option("--N-max", cfg.horizon_max, "forecast: largest horizon")->capture_default_str();
    app.add_option("--grid-points", cfg.grid_points)->capture_default_str();
    app.add_option("--halfwidth", cfg.halfwidth_sd, "grid half-width in sample sd")
        ->capture_default_str();
    app.add_option("--q", cfg.q_values, "diagnose: moment orders")->delimiter(',');
    app.add_option("--scales", cfg.scale_count, "diagnose: number of scales")
        ->capture_default_str();
    app.add_option("--max-lag", cfg.max_lag, "diagnose: largest ACF lag");
    app.add_option("--fit-min-lag", cfg.fit_min_lag)->capture_default_str();
    app.add_option("--fit-max-lag", cfg.fit_max_lag);

    app.add_subcommand("fit", "maximum-likelihood estimation");
    app.add_subcommand("smooth", "smoothed latent field and volatility");
    app.add_subcommand("filter-seq", "filtered estimates over growing prefixes");
    app.add_subcommand("forecast", "latent forecasts for N = 1..N_max");
    app.add_subcommand("density", "conditional density of x_{T+N}");
    app.add_subcommand("simulate", "simulate returns from a model");
    app.add_subcommand("diagnose", "structure functions and absolute-return ACF");
    for (auto* sub : app.get_subcommands({}))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << error_json("usage", e.what()).dump() << '\n';
        return 2;
    }

    try {
        if (replay) {
            if (!app.get_subcommands().empty())
                throw std::invalid_argument("--config cannot be combined with a command");
            const std::optional<std::string> output = cfg.output;
            cfg = config_from_artifact(*replay);
            cfg.output = output;
        } else {
            if (app.get_subcommands().empty())
                throw std::invalid_argument("no command given (expected one of fit, smooth, "
                                            "filter-seq, forecast, density, simulate, diagnose)");
            cfg.command = app.get_subcommands().front()->get_name();
            if (model)
                cfg.model = parse_model(*model);
            cfg.latent = !no_latent;
        }
        run(cfg, out);
        return 0;
    } catch (const std::invalid_argument& e) {
        err << error_json("invalid_argument", e.what()).dump() << '\n';
        return 2;
    } catch (const NotPositiveDefinite& e) {
        err << error_json("not_positive_definite", e.what()).dump() << '\n';
    } catch (const ModeNotConverged& e) {
        err << error_json("mode_not_converged", e.what()).dump() << '\n';
    } catch (const SaddlePoint& e) {
        err << error_json("saddle_point", e.what()).dump() << '\n';
    } catch (const std::exception& e) {
        err << error_json("runtime_error", e.what()).dump() << '\n';
    }
    return 1;
}

} // namespace mfvol::cli
