#pragma once

#include "mfvol/model.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace mfvol {

enum class ModeMethod {
    newton,            ///< banded Newton with line search, spectral-residual fallback
    spectral_residual  ///< derivative-free spectral residual iteration only
};

struct ModeOptions {
    ModeMethod method = ModeMethod::newton;
    std::size_t max_iterations = 200;
    /// Converged when ||grad||_2 <= tolerance_scale * sqrt(dimension).
    double tolerance_scale = 1e-8;
    std::size_t fallback_iterations = 20000;
};

struct ModeResult {
    std::vector<double> h_star;
    double grad_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    bool used_fallback = false;
};

/// h* = argmax_h log p(x, h).  Starts from init when given, otherwise h = 0.
ModeResult find_mode(const LatentModel& model, std::span<const double> x,
                     std::span<const double> init = {}, const ModeOptions& opts = {});

struct LaplaceResult {
    double log_likelihood = 0.0;
    double log_det = 0.0; ///< log det(-Omega) at the mode
    ModeResult mode;
};

/// (T/2) log 2 pi - 1/2 log|det Omega(x)| + log p(x, h*).
/// Throws ModeNotConverged or SaddlePoint.
LaplaceResult laplace_approximation(const LatentModel& model, std::span<const double> x,
                                    std::span<const double> init = {},
                                    const ModeOptions& opts = {});

double laplace_log_likelihood(const LatentModel& model, std::span<const double> x,
                              const ModeOptions& opts = {});

struct PosteriorPoint {
    double value = 0.0;    ///< component s of h*
    double variance = 0.0; ///< [(-Omega)^{-1}]_{ss}
};

/// Approximate posterior of h_s given all of x; s is 0-based.
PosteriorPoint posterior_mode_conditional(const LatentModel& model, std::span<const double> x,
                                          std::size_t s, const ModeOptions& opts = {});

/// Gaussian law of h_{T+N} given (h_1, ..., h_T): mean = weights . h.
struct FutureLatent {
    std::vector<double> weights; ///< weights[t] multiplies h_{t+1}
    double variance = 0.0;
    std::size_t horizon = 1;
};

/// AR(1): weights (0, ..., 0, psi^N), variance sigma_u^2 sum_{k<N} psi^{2k}.
/// Stationary field: the untruncated N-step regression on the full history.
FutureLatent future_latent(const LatentModel& model, std::size_t T, std::size_t N);

/**
 * Laplace approximation of log p(x, x_{T+N} = xi) over the augmented latent
 * vector (h_1, ..., h_T, h_{T+N}).
 *
 * The prior precision and the future regression are built once; evaluate()
 * is const and may be called concurrently.
 */
class FutureLaplace {
public:
    FutureLaplace(const LatentModel& model, std::span<const double> x, std::size_t N,
                  const ModeOptions& opts = {});

    /// init, when non-empty, has length T + 1.
    LaplaceResult evaluate(double xi, std::span<const double> init = {}) const;

    const FutureLatent& future() const noexcept { return future_; }
    std::size_t history_length() const noexcept { return x_.size(); }

private:
    LatentModel model_;
    std::vector<double> x_;
    FutureLatent future_;
    SymBandMatrix precision_;
    ModeOptions opts_;
};

} // namespace mfvol
