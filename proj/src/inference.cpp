#include "mfvol/inference.hpp"

#include "mfvol/diagnostics.hpp"
#include "mfvol/errors.hpp"
#include "mfvol/optimizer.hpp"
#include "mfvol/random.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

namespace mfvol {

namespace {

double sample_sd(std::span<const double> x)
{
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x)
        ss += (v - mean) * (v - mean);
    return std::sqrt(ss / std::max(1.0, n - 1.0));
}

void check_returns(std::span<const double> x)
{
    if (x.empty())
        throw std::invalid_argument("empty return series");
    for (double v : x)
        if (!std::isfinite(v))
            throw std::invalid_argument("return series contains non-finite values");
}

// Unconstrained coordinates for the optimiser:
// SV  (atanh psi, log sigma_u, log sigma)
// MRW (logit(lambda / sqrt 2), log sigma, log(R - 1))
struct ParamCodec {
    ModelKind kind;
    std::size_t tau;

    std::vector<double> encode(const ModelParams& p) const
    {
        if (kind == ModelKind::sv) {
            const auto& s = std::get<SvParams>(p);
            return {std::atanh(s.psi), std::log(s.sigma_u), std::log(s.sigma)};
        }
        const auto& m = std::get<MrwParams>(p);
        const double r = m.lambda / std::numbers::sqrt2;
        return {std::log(r / (1.0 - r)), std::log(m.sigma), std::log(m.R - 1.0)};
    }

    ModelParams decode(std::span<const double> u) const
    {
        if (kind == ModelKind::sv)
            return SvParams{std::tanh(u[0]), std::exp(u[1]), std::exp(u[2])};
        return MrwParams{std::numbers::sqrt2 / (1.0 + std::exp(-u[0])), std::exp(u[1]),
                         1.0 + std::exp(u[2]), tau};
    }

    std::vector<double> steps() const
    {
        if (kind == ModelKind::sv)
            return {0.3, 0.3, 0.2};
        return {0.3, 0.2, 0.7};
    }
};

std::vector<std::string> boundary_flags(const ModelParams& p, std::size_t T)
{
    std::vector<std::string> out;
    if (const auto* s = std::get_if<SvParams>(&p)) {
        if (std::abs(s->psi) > 1.0 - 1e-4)
            out.emplace_back("psi");
        if (s->sigma_u < 1e-5)
            out.emplace_back("sigma_u");
    } else {
        const auto& m = std::get<MrwParams>(p);
        if (m.lambda < 1e-3 || m.lambda > std::numbers::sqrt2 - 1e-3)
            out.emplace_back("lambda");
        if (m.R < 1.01 || m.R > 1e4 * static_cast<double>(T))
            out.emplace_back("R");
    }
    return out;
}

// Negative Laplace log-likelihood with the previous mode as warm start.
class NegLogLikelihood {
public:
    NegLogLikelihood(const ParamCodec& codec, std::span<const double> x, const ModeOptions& mode)
        : codec_(codec), x_(x), mode_(mode)
    {
    }

    double operator()(std::span<const double> u)
    {
        ++evaluations_;
        try {
            const LatentModel model(codec_.decode(u));
            const LaplaceResult r = laplace_approximation(model, x_, warm_, mode_);
            warm_ = r.mode.h_star;
            return -r.log_likelihood;
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    }

    std::size_t evaluations() const noexcept { return evaluations_; }

private:
    const ParamCodec& codec_;
    std::span<const double> x_;
    ModeOptions mode_;
    std::vector<double> warm_;
    std::size_t evaluations_ = 0;
};

struct RunOutcome {
    NelderMeadResult nm;
    std::vector<FitTraceEntry> trace;
    std::size_t evaluations = 0;
};

RunOutcome run_simplex(const ParamCodec& codec, std::span<const double> x, const FitOptions& opts,
                       std::vector<double> start, std::size_t run)
{
    NegLogLikelihood objective(codec, x, opts.mode);
    NelderMeadOptions nm;
    nm.max_iterations = opts.max_iterations;
    nm.size_tolerance = opts.size_tolerance;
    nm.initial_step = codec.steps();
    RunOutcome out;
    out.nm = nelder_mead([&](std::span<const double> u) { return objective(u); }, start, nm,
                         [&](std::size_t it, std::span<const double> u, double f) {
                             out.trace.push_back({run, it, -f, codec.decode(u)});
                         });
    out.evaluations = objective.evaluations();
    return out;
}

std::vector<LatentEstimate> forecasts_at(const LatentModel& model,
                                         std::span<const double> smoothed,
                                         std::span<const std::size_t> horizons)
{
    const std::size_t T = smoothed.size();
    if (T == 0)
        throw std::invalid_argument("forecast: empty latent field");
    std::vector<LatentEstimate> out(horizons.size());
    if (horizons.empty())
        return out;
    const std::size_t max_n = *std::max_element(horizons.begin(), horizons.end());
    if (*std::min_element(horizons.begin(), horizons.end()) < 1)
        throw std::invalid_argument("forecast: horizon must be at least 1");

    if (model.kind() == LatentKind::ar1) {
        // h_{T+N} = psi h_{T+N-1}, starting from the filtered value.
        const double psi = model.ar_coefficient();
        const double su2 = model.innovation_variance(1);
        std::vector<double> value(max_n + 1), var(max_n + 1);
        value[0] = smoothed.back();
        var[0] = 0.0;
        double pk2 = 1.0;
        for (std::size_t n = 1; n <= max_n; ++n) {
            value[n] = psi * value[n - 1];
            var[n] = var[n - 1] + su2 * pk2;
            pk2 *= psi * psi;
        }
        for (std::size_t i = 0; i < horizons.size(); ++i)
            out[i] = LatentEstimate{{value[horizons[i]]}, EstimateKind::forecast, horizons[i],
                                    var[horizons[i]]};
        return out;
    }

    const auto fcs = forecast_coefficients(model.autocovariance(T + max_n - 1), T, horizons);
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < T; ++j)
            v += fcs[i].phi[j] * smoothed[T - 1 - j];
        out[i] = LatentEstimate{{v}, EstimateKind::forecast, horizons[i], fcs[i].variance};
    }
    return out;
}

std::vector<double> mode_or_throw(const LatentModel& model, std::span<const double> x,
                                  std::span<const double> init, const ModeOptions& opts)
{
    ModeResult r = find_mode(model, x, init, opts);
    if (!r.converged)
        throw ModeNotConverged("mode finding stopped with gradient norm " +
                               std::to_string(r.grad_norm));
    return std::move(r.h_star);
}

template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& body)
{
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::vector<std::future<void>> tasks;
    for (std::size_t w = 0; w < jobs; ++w)
        tasks.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < n; i += jobs)
                body(i);
        }));
    for (auto& t : tasks)
        t.get();
}

} // namespace

ModelParams initial_guess(ModelKind kind, std::span<const double> x, std::size_t tau)
{
    check_returns(x);
    const std::size_t T = x.size();
    double min_abs = std::numeric_limits<double>::infinity();
    for (double v : x)
        if (v != 0.0)
            min_abs = std::min(min_abs, std::abs(v));
    if (!std::isfinite(min_abs))
        throw std::invalid_argument("initial_guess: all returns are zero");

    std::vector<double> y(T);
    for (std::size_t t = 0; t < T; ++t)
        y[t] = std::log(x[t] != 0.0 ? std::abs(x[t]) : 0.5 * min_abs);
    const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(T);
    auto acov = [&](std::size_t s) {
        double c = 0.0;
        for (std::size_t t = 0; t + s < T; ++t)
            c += (y[t] - ybar) * (y[t + s] - ybar);
        return c / static_cast<double>(T);
    };
    const double sd = sample_sd(x);

    // Cov(log|x_t|, log|x_{t+s}|) = Cov(h_t, h_{t+s}) / 4 for s >= 1.
    if (kind == ModelKind::sv) {
        std::vector<double> lag, logc;
        for (std::size_t s = 1; s <= std::min<std::size_t>(20, T / 4); ++s) {
            const double c = acov(s);
            if (c > 0.0) {
                lag.push_back(static_cast<double>(s));
                logc.push_back(std::log(c));
            }
        }
        double psi = 0.9, var_h = 0.5;
        if (lag.size() >= 3) {
            const LinearFit f = linear_fit(lag, logc);
            psi = std::clamp(std::exp(f.slope), 0.5, 0.995);
            var_h = std::clamp(4.0 * std::exp(f.intercept), 0.05, 5.0);
        }
        const double sigma_u = std::sqrt(var_h * (1.0 - psi * psi));
        return SvParams{psi, sigma_u, sd * std::exp(-0.25 * var_h)};
    }

    std::vector<double> loglag, c;
    for (std::size_t s = 1; s <= std::min<std::size_t>(100, T / 4); ++s) {
        loglag.push_back(std::log(static_cast<double>(s + 1)));
        c.push_back(acov(s));
    }
    double lambda = 0.3, R = std::max(10.0, static_cast<double>(T) / 4.0);
    if (loglag.size() >= 3) {
        const LinearFit f = linear_fit(loglag, c);
        if (f.slope < 0.0) {
            lambda = std::sqrt(-4.0 * f.slope);
            R = std::exp(f.intercept / -f.slope);
        }
    }
    lambda = std::clamp(lambda, 0.05, 1.0);
    R = std::clamp(R, 10.0, 10.0 * static_cast<double>(T));
    return MrwParams{lambda, sd, R, tau};
}

FitResult fit_ml(ModelKind kind, std::span<const double> x, const FitOptions& opts)
{
    check_returns(x);
    if (x.size() < kMinFitLength)
        throw std::invalid_argument("fit_ml: at least " + std::to_string(kMinFitLength) +
                                    " observations are required");
    const std::size_t tau = opts.tau.value_or(default_truncation(x.size()));
    if (tau < 1)
        throw std::invalid_argument("fit_ml: tau must be at least 1");
    const ParamCodec codec{kind, tau};

    ModelParams start = opts.start ? *opts.start : initial_guess(kind, x, tau);
    if (auto* m = std::get_if<MrwParams>(&start))
        m->tau = tau;
    if ((kind == ModelKind::sv) != std::holds_alternative<SvParams>(start))
        throw std::invalid_argument("fit_ml: starting point is for the other model");
    std::visit([](const auto& p) { p.validate(); }, start);

    FitResult result;
    std::vector<RunOutcome> runs;
    runs.push_back(run_simplex(codec, x, opts, codec.encode(start), 0));

    // Restarts from perturbations of the first optimum; independent of each other.
    const std::vector<double> base = runs.front().nm.x;
    const std::vector<double> steps = codec.steps();
    std::vector<std::vector<double>> starts;
    RandomStream rng(opts.seed, 0x5EED);
    for (std::size_t r = 0; r < opts.restarts; ++r) {
        std::vector<double> u = base;
        for (std::size_t i = 0; i < u.size(); ++i)
            u[i] += steps[i] * rng.normal();
        starts.push_back(std::move(u));
    }
    std::vector<RunOutcome> extra(starts.size());
    parallel_for(starts.size(), opts.jobs,
                 [&](std::size_t r) { extra[r] = run_simplex(codec, x, opts, starts[r], r + 1); });
    for (auto& e : extra)
        runs.push_back(std::move(e));

    std::size_t best = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        if (runs[r].nm.value < runs[best].nm.value)
            best = r;
        result.evaluations += runs[r].evaluations;
        result.trace.insert(result.trace.end(), runs[r].trace.begin(), runs[r].trace.end());
    }

    result.params = codec.decode(runs[best].nm.x);
    result.converged = runs[best].nm.converged && runs[best].nm.value < 1e99;
    result.boundary = boundary_flags(result.params, x.size());
    try {
        result.log_likelihood = laplace_log_likelihood(LatentModel(result.params), x, opts.mode);
    } catch (const std::exception&) {
        result.log_likelihood = -std::numeric_limits<double>::infinity();
        result.converged = false;
    }
    return result;
}

double volatility_scale(double h) noexcept
{
    return std::exp(0.5 * h);
}

LatentEstimate smooth(const LatentModel& model, std::span<const double> x, const ModeOptions& opts)
{
    check_returns(x);
    return LatentEstimate{mode_or_throw(model, x, {}, opts), EstimateKind::smoothed, 0, {}};
}

LatentEstimate filter(const LatentModel& model, std::span<const double> x, const ModeOptions& opts)
{
    const LatentEstimate s = smooth(model, x, opts);
    return LatentEstimate{{s.values.back()}, EstimateKind::filtered, 0, {}};
}

std::vector<double> filter_sequence(const LatentModel& model, std::span<const double> x,
                                    std::size_t first_length, const ModeOptions& opts)
{
    check_returns(x);
    if (first_length < 1 || first_length > x.size())
        throw std::invalid_argument("filter_sequence: first prefix length out of range");
    std::vector<double> out;
    out.reserve(x.size() - first_length + 1);
    std::vector<double> h = mode_or_throw(model, x.first(first_length), {}, opts);
    out.push_back(h.back());
    for (std::size_t t = first_length + 1; t <= x.size(); ++t) {
        h.push_back(0.0);
        h.back() = model.conditional_mean(h, t - 1);
        h = mode_or_throw(model, x.first(t), h, opts);
        out.push_back(h.back());
    }
    return out;
}

std::vector<LatentEstimate> forecast_from_smoothed(const LatentModel& model,
                                                   std::span<const double> smoothed,
                                                   std::size_t max_horizon)
{
    if (max_horizon < 1)
        throw std::invalid_argument("forecast: horizon must be at least 1");
    std::vector<std::size_t> horizons(max_horizon);
    std::iota(horizons.begin(), horizons.end(), std::size_t{1});
    return forecasts_at(model, smoothed, horizons);
}

std::vector<LatentEstimate> forecast_curve(const LatentModel& model, std::span<const double> x,
                                           std::size_t max_horizon, const ModeOptions& opts)
{
    return forecast_from_smoothed(model, smooth(model, x, opts).values, max_horizon);
}

LatentEstimate forecast_latent(const LatentModel& model, std::span<const double> x, std::size_t N,
                               const ModeOptions& opts)
{
    if (N < 1)
        throw std::invalid_argument("forecast: horizon must be at least 1");
    const std::size_t h[] = {N};
    return forecasts_at(model, smooth(model, x, opts).values, h).front();
}

double trapezoid(std::span<const double> grid, std::span<const double> values)
{
    if (grid.size() != values.size())
        throw std::invalid_argument("trapezoid: length mismatch");
    double s = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        s += 0.5 * (grid[i] - grid[i - 1]) * (values[i] + values[i - 1]);
    return s;
}

std::vector<double> default_density_grid(std::span<const double> x, std::size_t points,
                                         double halfwidth_sd)
{
    check_returns(x);
    if (points < 3)
        throw std::invalid_argument("density grid: at least three points are required");
    if (!(halfwidth_sd > 0.0))
        throw std::invalid_argument("density grid: half-width must be positive");
    const double a = halfwidth_sd * sample_sd(x);
    if (!(a > 0.0))
        throw std::invalid_argument("density grid: returns have zero spread");
    std::vector<double> grid(points);
    const double denom = static_cast<double>(points - 1);
    for (std::size_t i = points / 2; i < points; ++i) {
        const double v = a * static_cast<double>(2 * i - (points - 1)) / denom;
        grid[i] = v;
        grid[points - 1 - i] = -v;
    }
    return grid;
}

DensityCurve conditional_return_density(const LatentModel& model, std::span<const double> x,
                                        std::size_t N, std::span<const double> grid,
                                        const DensityOptions& opts)
{
    check_returns(x);
    if (N < 1)
        throw std::invalid_argument("density: horizon must be at least 1");
    DensityCurve out;
    out.horizon = N;
    if (grid.empty())
        out.grid = default_density_grid(x, opts.grid_points, opts.halfwidth_sd);
    else
        out.grid.assign(grid.begin(), grid.end());
    if (out.grid.size() < 3)
        throw std::invalid_argument("density: grid needs at least three points");
    for (std::size_t i = 1; i < out.grid.size(); ++i)
        if (!(out.grid[i] > out.grid[i - 1]))
            throw std::invalid_argument("density: grid must be strictly increasing");

    const LaplaceResult base = laplace_approximation(model, x, {}, opts.mode);
    const FutureLaplace joint(model, x, N, opts.mode);
    // Every grid point starts from the same field so the result is even in xi.
    std::vector<double> init = base.mode.h_star;
    init.push_back(std::inner_product(joint.future().weights.begin(),
                                      joint.future().weights.end(), init.begin(), 0.0));

    std::vector<double> log_joint(out.grid.size());
    parallel_for(out.grid.size(), opts.jobs, [&](std::size_t i) {
        log_joint[i] = joint.evaluate(out.grid[i], init).log_likelihood;
    });

    std::vector<double> raw(out.grid.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = std::exp(log_joint[i] - base.log_likelihood);
    out.raw_normalization = trapezoid(out.grid, raw);
    const double peak = *std::max_element(log_joint.begin(), log_joint.end());
    out.density.resize(out.grid.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        out.density[i] = std::exp(log_joint[i] - peak);
    const double z = trapezoid(out.grid, out.density);
    for (double& d : out.density)
        d /= z;
    out.normalization = trapezoid(out.grid, out.density);
    out.coarse_grid = std::abs(out.raw_normalization - 1.0) > 0.1;
    return out;
}

} // namespace mfvol
