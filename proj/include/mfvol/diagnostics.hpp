#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfvol {

/// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double slope_std_error = 0.0;
};
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Up to `count` distinct integer scales, geometrically spaced in [lo, hi].
std::vector<std::size_t> log_spaced_scales(std::size_t lo, std::size_t hi, std::size_t count);

struct ScalingEstimate {
    std::vector<double> q_values;
    std::vector<double> zeta_hat;
    std::vector<double> std_error;  ///< regression standard error of each slope
    std::vector<double> r2;
    std::vector<std::size_t> scales; ///< fit range actually used
};

/**
 * Scaling exponents of the cumulative sum X of x from overlapping increments:
 * zeta(q) is the slope of log mean |X(t+s) - X(t)|^q against log s.
 * Scales must lie in [1, T/8]; at least four are required.
 */
ScalingEstimate structure_functions(std::span<const double> x, std::span<const double> q_values,
                                    std::span<const std::size_t> scales);

struct AcfOptions {
    std::size_t max_lag = 100;
    std::size_t fit_min_lag = 4;
    std::size_t fit_max_lag = 0; ///< 0 means max_lag
};

struct AbsReturnAcf {
    std::vector<double> autocorrelation; ///< centred ACF of |x_t|, lags 1..max_lag
    std::vector<double> moment;          ///< mean |x_t x_{t+s}|, lags 1..max_lag
    double slope = 0.0;                  ///< of log moment against log lag over the fit range
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t fit_min_lag = 0;
    std::size_t fit_max_lag = 0;
    /// False when no lag shows dependence beyond 3/sqrt(T) or the fit range is degenerate.
    bool reliable = true;
};

/// Requires max_lag < T/4.
AbsReturnAcf abs_return_acf(std::span<const double> x, const AcfOptions& opts);

/// Sample autocorrelation of v at lags 1..max_lag.
std::vector<double> sample_acf(std::span<const double> v, std::size_t max_lag);

} // namespace mfvol
