#include "mfvol/simulate.hpp"

#include "mfvol/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace mfvol {

namespace {

// Stream ids: latent field and observation noise draw from separate streams.
constexpr std::uint64_t kLatentStream = 0;
constexpr std::uint64_t kNoiseStream = 1;

bool dense_cholesky(std::vector<double>& a, std::size_t n)
{
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k)
            d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0))
            return false;
        d = std::sqrt(d);
        a[j * n + j] = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k)
                s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / d;
        }
    }
    return true;
}

std::vector<double> sample_dense(const Autocovariance& gamma, std::size_t T, RandomStream& rng)
{
    std::vector<double> l;
    bool ok = false;
    for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
        l.assign(T * T, 0.0);
        for (std::size_t i = 0; i < T; ++i)
            for (std::size_t j = 0; j <= i; ++j)
                l[i * T + j] = gamma[i - j];
        if (attempt == 1)
            for (std::size_t i = 0; i < T; ++i)
                l[i * T + i] += kPositiveDefiniteTolerance * gamma[0];
        ok = dense_cholesky(l, T);
    }
    if (!ok)
        throw NotPositiveDefinite("sample_gaussian_field: covariance not positive definite");

    std::vector<double> z(T), h(T, 0.0);
    for (double& v : z)
        v = rng.normal();
    for (std::size_t i = 0; i < T; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k <= i; ++k)
            s += l[i * T + k] * z[k];
        h[i] = s;
    }
    return h;
}

std::vector<double> sample_innovations(const Autocovariance& gamma, std::size_t T,
                                       RandomStream& rng)
{
    std::vector<double> h(T);
    LevinsonRecursion rec(gamma);
    for (std::size_t t = 0; t < T; ++t) {
        const auto phi = rec.phi();
        double m = 0.0;
        for (std::size_t j = 0; j < phi.size(); ++j)
            m += phi[j] * h[t - 1 - j];
        h[t] = m + std::sqrt(rec.innovation_variance()) * rng.normal();
        if (t + 1 < T)
            rec.advance();
    }
    return h;
}

} // namespace

std::vector<double> sample_gaussian_field(const Autocovariance& gamma, std::size_t T,
                                          RandomStream& rng)
{
    if (T == 0)
        return {};
    if (gamma.size() < T)
        throw std::invalid_argument("sample_gaussian_field: autocovariance too short");
    if (T <= kDenseSamplingLimit)
        return sample_dense(gamma, T, rng);
    try {
        RandomStream copy = rng;
        auto h = sample_innovations(gamma, T, copy);
        rng = copy;
        return h;
    } catch (const NotPositiveDefinite&) {
        std::vector<double> g(gamma.values().begin(), gamma.values().end());
        g[0] += kPositiveDefiniteTolerance * g[0];
        const Autocovariance jittered(std::move(g));
        return sample_innovations(jittered, T, rng);
    }
}

SimulationOutput sample_mrw(const MrwParams& p, std::size_t T, std::uint64_t seed)
{
    p.validate();
    if (T < 1)
        throw std::invalid_argument("sample_mrw: T must be positive");
    SimulationOutput out;
    out.seed = seed;
    out.params = p;
    RandomStream latent(seed, kLatentStream);
    RandomStream noise(seed, kNoiseStream);
    out.h = sample_gaussian_field(mrw_autocov(p.lambda, p.R, T), T, latent);
    const double scale = p.sigma * std::sqrt(p.c());
    out.x.resize(T);
    for (std::size_t t = 0; t < T; ++t)
        out.x[t] = scale * std::exp(0.5 * out.h[t]) * noise.normal();
    return out;
}

SimulationOutput sample_sv(const SvParams& p, std::size_t T, std::uint64_t seed)
{
    p.validate();
    if (T < 1)
        throw std::invalid_argument("sample_sv: T must be positive");
    SimulationOutput out;
    out.seed = seed;
    out.params = p;
    RandomStream latent(seed, kLatentStream);
    RandomStream noise(seed, kNoiseStream);
    out.h.resize(T);
    out.h[0] = std::sqrt(p.stationary_variance()) * latent.normal();
    for (std::size_t t = 1; t < T; ++t)
        out.h[t] = p.psi * out.h[t - 1] + p.sigma_u * latent.normal();
    out.x.resize(T);
    for (std::size_t t = 0; t < T; ++t)
        out.x[t] = p.sigma * std::exp(0.5 * out.h[t]) * noise.normal();
    return out;
}

SimulationOutput simulate(const ModelParams& p, std::size_t T, std::uint64_t seed)
{
    if (const auto* sv = std::get_if<SvParams>(&p))
        return sample_sv(*sv, T, seed);
    return sample_mrw(std::get<MrwParams>(p), T, seed);
}

} // namespace mfvol
