#include "mfvol/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mfvol {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_lengths(std::span<const double> x, std::span<const double> h)
{
    if (x.size() != h.size())
        throw std::invalid_argument("returns and latent field differ in length (" +
                                    std::to_string(x.size()) + " vs " +
                                    std::to_string(h.size()) + ")");
}

} // namespace

void SvParams::validate() const
{
    if (!(std::abs(psi) < 1.0))
        throw std::invalid_argument("SV: |psi| must be < 1");
    if (!(sigma_u > 0.0) || !std::isfinite(sigma_u))
        throw std::invalid_argument("SV: sigma_u must be positive");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("SV: sigma must be positive");
}

double SvParams::stationary_variance() const noexcept
{
    return sigma_u * sigma_u / ((1.0 - psi) * (1.0 + psi));
}

void MrwParams::validate() const
{
    if (!(lambda > 0.0 && lambda < std::numbers::sqrt2))
        throw std::invalid_argument("MRW: lambda must lie in (0, sqrt 2)");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("MRW: sigma must be positive");
    if (!(R > 1.0) || !std::isfinite(R))
        throw std::invalid_argument("MRW: R must exceed 1");
    if (tau < 1)
        throw std::invalid_argument("MRW: truncation tau must be at least 1");
}

double MrwParams::c() const noexcept
{
    return std::exp(-0.5 * gamma0());
}

std::size_t default_truncation(std::size_t T) noexcept
{
    return std::max<std::size_t>(1, std::min<std::size_t>(T > 0 ? T - 1 : 0, 100));
}

LatentModel::LatentModel(const SvParams& p)
{
    p.validate();
    kind_ = LatentKind::ar1;
    params_ = p;
    psi_ = p.psi;
    obs_scale_ = p.sigma * p.sigma;
    const double var = p.stationary_variance();
    const double psi = p.psi;
    autocov_ = [var, psi](std::size_t lag) { return var * std::pow(psi, static_cast<double>(lag)); };
    coefs_ = {{}, {p.psi}};
    variances_ = {var, p.sigma_u * p.sigma_u};
}

LatentModel::LatentModel(const MrwParams& p)
{
    p.validate();
    kind_ = LatentKind::stationary;
    params_ = p;
    obs_scale_ = p.sigma * p.sigma * p.c();
    const double lambda = p.lambda, R = p.R;
    autocov_ = [lambda, R](std::size_t lag) { return mrw_autocov_at(lambda, R, lag); };
    build_from_autocovariance(p.tau);
}

LatentModel::LatentModel(const ModelParams& p)
    : LatentModel(std::visit([](const auto& v) { return LatentModel(v); }, p))
{
}

LatentModel LatentModel::stationary(std::function<double(std::size_t)> autocov, std::size_t tau,
                                    double observation_scale)
{
    if (!autocov)
        throw std::invalid_argument("stationary model: empty autocovariance");
    if (tau < 1)
        throw std::invalid_argument("stationary model: tau must be at least 1");
    if (!(observation_scale > 0.0))
        throw std::invalid_argument("stationary model: observation scale must be positive");
    LatentModel m;
    m.kind_ = LatentKind::stationary;
    m.autocov_ = std::move(autocov);
    m.obs_scale_ = observation_scale;
    m.build_from_autocovariance(tau);
    return m;
}

void LatentModel::build_from_autocovariance(std::size_t tau)
{
    ToeplitzSolution dl = durbin_levinson(autocovariance(tau), tau);
    coefs_ = std::move(dl.phi);
    variances_ = std::move(dl.innovation_variances);
}

std::span<const double> LatentModel::coefficients(std::size_t k) const
{
    return coefs_[std::min(k, order())];
}

double LatentModel::innovation_variance(std::size_t k) const
{
    return variances_[std::min(k, order())];
}

double LatentModel::conditional_mean(std::span<const double> h, std::size_t t) const
{
    const auto phi = coefficients(t);
    double m = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j)
        m += phi[j] * h[t - 1 - j];
    return m;
}

Autocovariance LatentModel::autocovariance(std::size_t max_lag) const
{
    std::vector<double> g(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k)
        g[k] = autocov_(k);
    return Autocovariance(std::move(g));
}

double LatentModel::ar_coefficient() const
{
    if (kind_ != LatentKind::ar1)
        throw std::logic_error("ar_coefficient: model is not AR(1)");
    return psi_;
}

SymBandMatrix LatentModel::prior_precision(std::size_t T) const
{
    SymBandMatrix q(T, order());
    for (std::size_t t = 0; t < T; ++t) {
        const auto phi = coefficients(t);
        const double w = 1.0 / innovation_variance(t);
        // l has 1 at t and -phi_j at t - j.
        q.at(t, t) += w;
        for (std::size_t a = 0; a < phi.size(); ++a) {
            const double la = -phi[a];
            q.at(t, t - 1 - a) += w * la;
            for (std::size_t b = 0; b <= a; ++b)
                q.at(t - 1 - a, t - 1 - b) += w * la * -phi[b];
        }
    }
    return q;
}

double observation_score(double x, double h, double scale) noexcept
{
    return -0.5 + x * x * std::exp(-h) / (2.0 * scale);
}

double observation_curvature(double x, double h, double scale) noexcept
{
    return -x * x * std::exp(-h) / (2.0 * scale);
}

double observation_log_density(const LatentModel& m, std::span<const double> x,
                               std::span<const double> h)
{
    check_lengths(x, h);
    const double s = m.observation_scale();
    const double log_norm = -0.5 * (kLog2Pi + std::log(s));
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += log_norm - 0.5 * h[i] - x[i] * x[i] * std::exp(-h[i]) / (2.0 * s);
    return acc;
}

double prior_log_density(const LatentModel& m, std::span<const double> h)
{
    double acc = 0.0;
    for (std::size_t t = 0; t < h.size(); ++t) {
        const double p = m.innovation_variance(t);
        const double e = h[t] - m.conditional_mean(h, t);
        acc += -0.5 * (kLog2Pi + std::log(p)) - e * e / (2.0 * p);
    }
    return acc;
}

double joint_log_density(const LatentModel& m, std::span<const double> x,
                         std::span<const double> h)
{
    return observation_log_density(m, x, h) + prior_log_density(m, h);
}

std::vector<double> gradient(const LatentModel& m, std::span<const double> x,
                             std::span<const double> h)
{
    check_lengths(x, h);
    const std::size_t T = h.size();
    const double s = m.observation_scale();
    std::vector<double> g(T);
    for (std::size_t i = 0; i < T; ++i)
        g[i] = observation_score(x[i], h[i], s);
    // Prior part, through the scaled innovations e_t / P_t.
    for (std::size_t t = 0; t < T; ++t) {
        const auto phi = m.coefficients(t);
        const double r = (h[t] - m.conditional_mean(h, t)) / m.innovation_variance(t);
        g[t] -= r;
        for (std::size_t j = 0; j < phi.size(); ++j)
            g[t - 1 - j] += phi[j] * r;
    }
    return g;
}

SymBandMatrix hessian(const LatentModel& m, std::span<const double> x, std::span<const double> h)
{
    check_lengths(x, h);
    SymBandMatrix omega = -m.prior_precision(h.size());
    std::vector<double> d(h.size());
    for (std::size_t i = 0; i < h.size(); ++i)
        d[i] = observation_curvature(x[i], h[i], m.observation_scale());
    omega.add_diagonal(d);
    return omega;
}

LatentConditionals latent_conditional(const MrwParams& p, std::size_t T)
{
    if (T < 1)
        throw std::invalid_argument("latent_conditional: T must be positive");
    const LatentModel m(p);
    LatentConditionals out;
    out.coefficients.reserve(T);
    out.variances.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        const auto phi = m.coefficients(t);
        out.coefficients.emplace_back(phi.begin(), phi.end());
        out.variances.push_back(m.innovation_variance(t));
    }
    return out;
}

} // namespace mfvol
