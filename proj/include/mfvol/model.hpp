#pragma once

#include "mfvol/band_matrix.hpp"
#include "mfvol/toeplitz.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace mfvol {

/// Basic stochastic volatility model: h_t = psi h_{t-1} + sigma_u u_t,
/// x_t | h_t ~ N(0, sigma^2 e^{h_t}).
struct SvParams {
    double psi = 0.0;
    double sigma_u = 1.0;
    double sigma = 1.0;

    void validate() const;
    /// sigma_u^2 / (1 - psi^2)
    double stationary_variance() const noexcept;
};

/// Discrete-time multifractal random walk with log-normal multipliers.
/// x_t | h_t ~ N(0, sigma^2 c e^{h_t}), Cov(h_t, h_s) = lambda^2 log+(R / (|t-s| + 1)),
/// and the latent conditionals are truncated after tau lags.
struct MrwParams {
    double lambda = 0.3;
    double sigma = 1.0;
    double R = 2.0;
    std::size_t tau = 1;

    void validate() const;
    double gamma0() const noexcept { return mrw_autocov_at(lambda, R, 0); }
    /// Normalisation making E[c e^{h_t}] = 1.
    double c() const noexcept;
};

using ModelParams = std::variant<SvParams, MrwParams>;

/// min(T - 1, 100), but never below 1.
std::size_t default_truncation(std::size_t T) noexcept;

enum class LatentKind { ar1, stationary };

/**
 * Gaussian latent log-volatility field together with the observation scale.
 *
 * Both models are represented the same way: for every t the conditional
 * h_t | (h_{t-1}, ..., h_{t-k}) ~ N(sum_j phi^{(k)}_j h_{t-j}, P_{k+1}) with
 * k = min(t - 1, order()).  For the AR(1) model the order is 1 and the
 * representation is exact; for a stationary field it is the truncated
 * Durbin-Levinson form.
 */
class LatentModel {
public:
    explicit LatentModel(const SvParams& p);
    explicit LatentModel(const MrwParams& p);
    explicit LatentModel(const ModelParams& p);

    /// Stationary field with an arbitrary autocovariance, truncated at tau lags.
    static LatentModel stationary(std::function<double(std::size_t)> autocov, std::size_t tau,
                                  double observation_scale);

    LatentKind kind() const noexcept { return kind_; }
    const std::optional<ModelParams>& params() const noexcept { return params_; }

    /// sigma^2 c, the observation variance at h = 0.
    double observation_scale() const noexcept { return obs_scale_; }

    std::size_t order() const noexcept { return variances_.size() - 1; }
    std::span<const double> coefficients(std::size_t k) const;
    double innovation_variance(std::size_t k) const;

    /// Conditional mean of h[t] (0-based) given its truncated past.
    double conditional_mean(std::span<const double> h, std::size_t t) const;

    double autocovariance_at(std::size_t lag) const { return autocov_(lag); }
    Autocovariance autocovariance(std::size_t max_lag) const;

    /// psi of the AR(1) model; throws for stationary fields.
    double ar_coefficient() const;

    /// Q with -log p(h) = h'Qh / 2 + const; bandwidth order().
    SymBandMatrix prior_precision(std::size_t T) const;

private:
    LatentModel() = default;
    void build_from_autocovariance(std::size_t tau);

    LatentKind kind_ = LatentKind::stationary;
    std::optional<ModelParams> params_;
    std::function<double(std::size_t)> autocov_;
    double psi_ = 0.0;
    double obs_scale_ = 1.0;
    std::vector<std::vector<double>> coefs_;
    std::vector<double> variances_;
};

/// log p(x | h)
double observation_log_density(const LatentModel& m, std::span<const double> x,
                               std::span<const double> h);
/// log p(h) under the (truncated) conditional factorisation.
double prior_log_density(const LatentModel& m, std::span<const double> h);
/// log p(x, h)
double joint_log_density(const LatentModel& m, std::span<const double> x,
                         std::span<const double> h);

/// d log p(x, h) / dh.
std::vector<double> gradient(const LatentModel& m, std::span<const double> x,
                             std::span<const double> h);

/// Omega = d^2 log p(x, h) / dh dh', bandwidth order().
SymBandMatrix hessian(const LatentModel& m, std::span<const double> x,
                      std::span<const double> h);

/// Per-point observation terms: g_i = -1/2 + x_i^2 e^{-h_i} / (2 s) and its
/// derivative -x_i^2 e^{-h_i} / (2 s), with s = sigma^2 c.
double observation_score(double x, double h, double scale) noexcept;
double observation_curvature(double x, double h, double scale) noexcept;

/// Truncated conditionals of an MRW latent field, one entry per t = 1..T.
struct LatentConditionals {
    std::vector<std::vector<double>> coefficients; // phi^{(min(t-1, tau))}
    std::vector<double> variances;                 // matching P
};
LatentConditionals latent_conditional(const MrwParams& p, std::size_t T);

} // namespace mfvol
