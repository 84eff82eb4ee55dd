#pragma once

#include "mfvol/model.hpp"
#include "mfvol/random.hpp"
#include "mfvol/toeplitz.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mfvol {

struct SimulationOutput {
    std::vector<double> x;
    std::vector<double> h;
    std::uint64_t seed = 0;
    ModelParams params;
};

/// Series up to this length are sampled through a dense Cholesky factor;
/// longer ones through the Durbin-Levinson innovations recursion.
inline constexpr std::size_t kDenseSamplingLimit = 1024;

/// Exact draw of a centred stationary Gaussian vector with covariance
/// gamma(|i - j|), i, j < T.  gamma must cover lags 0..T-1 (T for the
/// innovations path).
std::vector<double> sample_gaussian_field(const Autocovariance& gamma, std::size_t T,
                                          RandomStream& rng);

/// h ~ N(0, Gamma_T) untruncated, x_t = sigma sqrt(c e^{h_t}) eps_t.
SimulationOutput sample_mrw(const MrwParams& p, std::size_t T, std::uint64_t seed);

/// Stationary AR(1) start h_1 ~ N(0, sigma_u^2 / (1 - psi^2)).
SimulationOutput sample_sv(const SvParams& p, std::size_t T, std::uint64_t seed);

SimulationOutput simulate(const ModelParams& p, std::size_t T, std::uint64_t seed);

} // namespace mfvol
