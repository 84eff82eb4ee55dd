#pragma once

#include "mfvol/laplace.hpp"
#include "mfvol/model.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mfvol {

enum class ModelKind { sv, mrw };

/// Series shorter than this are rejected by fit_ml.
inline constexpr std::size_t kMinFitLength = 20;

struct FitOptions {
    /// MRW truncation lag; default_truncation(T) when unset.
    std::optional<std::size_t> tau;
    /// Extra Nelder-Mead runs started from perturbations of the first optimum.
    std::size_t restarts = 2;
    std::size_t max_iterations = 400;
    /// Simplex size tolerance, in transformed coordinates.
    double size_tolerance = 1e-3;
    std::uint64_t seed = 0;
    /// Overrides the moment-based starting point.
    std::optional<ModelParams> start;
    std::size_t jobs = 1;
    ModeOptions mode;
};

struct FitTraceEntry {
    std::size_t run = 0;
    std::size_t iteration = 0;
    double log_likelihood = 0.0;
    ModelParams params;
};

struct FitResult {
    ModelParams params;
    double log_likelihood = 0.0;
    std::vector<FitTraceEntry> trace;
    bool converged = false;
    /// Names of parameters that ended up against the edge of their range.
    std::vector<std::string> boundary;
    std::size_t evaluations = 0;
};

/// Moment-based starting point from the log-absolute-return autocovariance.
ModelParams initial_guess(ModelKind kind, std::span<const double> x, std::size_t tau);

/// Maximum-likelihood fit of the Laplace-approximated likelihood.
FitResult fit_ml(ModelKind kind, std::span<const double> x, const FitOptions& opts = {});

enum class EstimateKind { smoothed, filtered, forecast };

struct LatentEstimate {
    std::vector<double> values;
    EstimateKind kind = EstimateKind::smoothed;
    std::size_t horizon = 0;
    std::optional<double> variance; ///< forecast variance of the latent value
};

/// e^{h/2}, the volatility scale matching a latent value.
double volatility_scale(double h) noexcept;

/// Components of the joint mode h*.
LatentEstimate smooth(const LatentModel& model, std::span<const double> x,
                      const ModeOptions& opts = {});

/// Last component of the joint mode.
LatentEstimate filter(const LatentModel& model, std::span<const double> x,
                      const ModeOptions& opts = {});

/// Filtered estimates for every prefix x_{1:t}, t = first_length..T, each mode
/// warm-started from the previous one.
std::vector<double> filter_sequence(const LatentModel& model, std::span<const double> x,
                                    std::size_t first_length, const ModeOptions& opts = {});

/**
 * Latent forecasts for horizons 1..max_horizon.
 *
 * AR(1): h_{T+N} = psi^N h_T with h_T the filtered value.  Stationary field:
 * the reversed smoothed field times the N-step regression coefficients.
 */
std::vector<LatentEstimate> forecast_curve(const LatentModel& model, std::span<const double> x,
                                           std::size_t max_horizon, const ModeOptions& opts = {});

/// Same from an already smoothed field.
std::vector<LatentEstimate> forecast_from_smoothed(const LatentModel& model,
                                                   std::span<const double> smoothed,
                                                   std::size_t max_horizon);

LatentEstimate forecast_latent(const LatentModel& model, std::span<const double> x, std::size_t N,
                               const ModeOptions& opts = {});

struct DensityOptions {
    std::size_t grid_points = 257;
    /// Half-width of the default grid in sample standard deviations.
    double halfwidth_sd = 8.0;
    std::size_t jobs = 1;
    ModeOptions mode;
};

struct DensityCurve {
    std::vector<double> grid;
    std::vector<double> density;
    /// Trapezoid integral of the returned density.
    double normalization = 0.0;
    /// Trapezoid integral of p(x, xi) / p(x) before renormalisation.
    double raw_normalization = 0.0;
    /// Raw normalisation off by more than 10%: grid too coarse or too narrow.
    bool coarse_grid = false;
    std::size_t horizon = 1;
};

/// Grid symmetric about zero (bitwise mirrored), halfwidth_sd sample standard
/// deviations wide.
std::vector<double> default_density_grid(std::span<const double> x, std::size_t points,
                                         double halfwidth_sd);

/// p(x_{T+N} | x_{1:T}) on a grid, one Laplace approximation per grid value.
DensityCurve conditional_return_density(const LatentModel& model, std::span<const double> x,
                                        std::size_t N, std::span<const double> grid = {},
                                        const DensityOptions& opts = {});

double trapezoid(std::span<const double> grid, std::span<const double> values);

} // namespace mfvol
