#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfvol {

/**
 * Autocovariance sequence gamma(0..K) of a stationary scalar process.
 *
 * Construction checks that gamma(0) > 0 (unless the whole sequence is zero)
 * and that |gamma(k)| <= gamma(0).  Positive semi-definiteness of the implied
 * Toeplitz matrix is only checked when a recursion runs over it.
 */
class Autocovariance {
public:
    Autocovariance() = default;
    explicit Autocovariance(std::vector<double> values);

    double operator[](std::size_t lag) const { return values_[lag]; }
    std::size_t size() const noexcept { return values_.size(); }
    std::size_t max_lag() const noexcept { return values_.empty() ? 0 : values_.size() - 1; }
    std::span<const double> values() const noexcept { return values_; }

    /// Lags [first, first + count).
    std::span<const double> lags(std::size_t first, std::size_t count) const;

private:
    std::vector<double> values_;
};

/**
 * Output of the Durbin-Levinson recursion.
 *
 * phi[k] holds the k regression coefficients of h_t on (h_{t-1}, ..., h_{t-k}),
 * nearest lag first; phi[0] is empty.  innovation_variances[k] is the
 * conditional variance of h_t given those k predecessors, so
 * innovation_variances[0] == gamma(0).
 */
struct ToeplitzSolution {
    std::vector<std::vector<double>> phi;
    std::vector<double> innovation_variances;
};

/**
 * Incremental Durbin-Levinson recursion with O(order) state.
 *
 * After k calls to advance(), phi() holds phi^{(k)} and innovation_variance()
 * is P_{k+1}.  advance() needs gamma lag k + 1 and throws NotPositiveDefinite
 * when the new innovation variance drops below the tolerance.
 */
class LevinsonRecursion {
public:
    explicit LevinsonRecursion(const Autocovariance& gamma);

    std::size_t order() const noexcept { return phi_.size(); }
    std::span<const double> phi() const noexcept { return phi_; }
    double innovation_variance() const noexcept { return p_; }

    void advance();

private:
    const Autocovariance& gamma_;
    std::size_t support_;
    std::vector<double> phi_;
    double p_;
};

/// Relative threshold (times gamma(0)) below which an innovation variance is
/// treated as loss of positive definiteness.
inline constexpr double kPositiveDefiniteTolerance = 1e-12;

/// gamma(k) = lambda^2 * max(log(R / (k + 1)), 0) for k = 0..max_lag.
Autocovariance mrw_autocov(double lambda, double R, std::size_t max_lag);

/// Single-lag form of mrw_autocov.
double mrw_autocov_at(double lambda, double R, std::size_t lag) noexcept;

/// All regression stages 0..t_max.  Needs gamma lags 0..t_max.
ToeplitzSolution durbin_levinson(const Autocovariance& gamma, std::size_t t_max);

/// Coefficients of stage t only, computed with O(t) memory.  The values are
/// bitwise identical to durbin_levinson(gamma, t).phi[t].
struct LevinsonStage {
    std::vector<double> phi;
    double innovation_variance = 0.0; // P_{t+1}
};
LevinsonStage durbin_levinson_last(const Autocovariance& gamma, std::size_t t);

/// Solves Gamma_T x = rhs with T = rhs.size() by the Levinson recursion.
std::vector<double> toeplitz_solve(const Autocovariance& gamma, std::span<const double> rhs);

/// Batched form: all right-hand sides share one pass of the recursion.
std::vector<std::vector<double>> toeplitz_solve(const Autocovariance& gamma,
                                                const std::vector<std::vector<double>>& rhs);

/// Explicit inverse of Gamma_T (row-major, T*T) by Trench's algorithm.
std::vector<double> toeplitz_inverse(const Autocovariance& gamma, std::size_t T);

/// N-step prediction of h_{T+N} from (h_T, ..., h_1).
struct ForecastCoefficients {
    std::vector<double> phi;  // phi[j] multiplies h_{T-j}
    double variance = 0.0;    // P_{T+N|T}
};

/// Solves Gamma_T phi = gamma(N..T+N-1).  For N == 1 this is the last
/// Durbin-Levinson stage.
ForecastCoefficients forecast_coefficients(const Autocovariance& gamma, std::size_t T,
                                           std::size_t N);

/// Same, for several horizons sharing a single recursion.
std::vector<ForecastCoefficients> forecast_coefficients(const Autocovariance& gamma,
                                                        std::size_t T,
                                                        std::span<const std::size_t> horizons);

} // namespace mfvol
