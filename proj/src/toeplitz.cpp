#include "mfvol/toeplitz.hpp"

#include "mfvol/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mfvol {

Autocovariance::Autocovariance(std::vector<double> values) : values_(std::move(values))
{
    if (values_.empty())
        throw std::invalid_argument("autocovariance: empty sequence");
    for (double v : values_)
        if (!std::isfinite(v))
            throw std::invalid_argument("autocovariance: non-finite value");
    const double g0 = values_[0];
    const bool all_zero =
        std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
    if (!all_zero && g0 <= 0.0)
        throw std::invalid_argument("autocovariance: gamma(0) must be positive");
    for (std::size_t k = 1; k < values_.size(); ++k)
        if (std::abs(values_[k]) > g0)
            throw std::invalid_argument("autocovariance: |gamma(" + std::to_string(k) +
                                        ")| exceeds gamma(0)");
}

std::span<const double> Autocovariance::lags(std::size_t first, std::size_t count) const
{
    if (first + count > values_.size())
        throw std::out_of_range("autocovariance: lag range exceeds stored lags");
    return std::span<const double>(values_).subspan(first, count);
}

double mrw_autocov_at(double lambda, double R, std::size_t lag) noexcept
{
    const double ratio = R / (static_cast<double>(lag) + 1.0);
    return ratio > 1.0 ? lambda * lambda * std::log(ratio) : 0.0;
}

Autocovariance mrw_autocov(double lambda, double R, std::size_t max_lag)
{
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("mrw_autocov: lambda must be positive");
    if (!(R > 1.0) || !std::isfinite(R))
        throw std::invalid_argument("mrw_autocov: R must exceed 1");
    std::vector<double> g(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k)
        g[k] = mrw_autocov_at(lambda, R, k);
    return Autocovariance(std::move(g));
}

namespace {

void require_lags(const Autocovariance& gamma, std::size_t max_lag, const char* who)
{
    if (gamma.size() == 0 || gamma.max_lag() < max_lag)
        throw std::invalid_argument(std::string(who) + ": autocovariance needs lags 0.." +
                                    std::to_string(max_lag));
}

[[noreturn]] void fail_not_pd(std::size_t stage, double p)
{
    throw NotPositiveDefinite("Toeplitz matrix not positive definite: innovation variance P_" +
                              std::to_string(stage) + " = " + std::to_string(p));
}

} // namespace

LevinsonRecursion::LevinsonRecursion(const Autocovariance& gamma) : gamma_(gamma)
{
    if (gamma.size() == 0)
        throw std::invalid_argument("durbin_levinson: empty autocovariance");
    p_ = gamma[0];
    if (!(p_ > 0.0))
        fail_not_pd(1, p_);
    // Trailing zero lags never contribute to the prediction-error numerator.
    support_ = gamma.max_lag();
    while (support_ > 0 && gamma[support_] == 0.0)
        --support_;
}

void LevinsonRecursion::advance()
{
    const std::size_t k = phi_.size();
    if (k + 1 > gamma_.max_lag())
        throw std::invalid_argument("durbin_levinson: autocovariance needs lag " +
                                    std::to_string(k + 1));
    std::vector<double>& phi = phi_;
    double num = gamma_[k + 1];
    // gamma(k + 1 - j) vanishes for k + 1 - j > support.
    const std::size_t jmin = k + 1 > support_ ? k + 1 - support_ : 1;
    for (std::size_t j = std::max<std::size_t>(jmin, 1); j <= k; ++j)
        num -= phi[j - 1] * gamma_[k + 1 - j];
    const double a = num / p_;
    for (std::size_t i = 0, j = k; i < j--; ++i) {
        const double lo = phi[i] - a * phi[j];
        const double hi = phi[j] - a * phi[i];
        phi[i] = lo;
        if (i != j)
            phi[j] = hi;
    }
    phi.push_back(a);
    p_ *= (1.0 - a) * (1.0 + a);
    if (!(p_ >= kPositiveDefiniteTolerance * gamma_[0]))
        fail_not_pd(k + 2, p_);
}

ToeplitzSolution durbin_levinson(const Autocovariance& gamma, std::size_t t_max)
{
    require_lags(gamma, t_max, "durbin_levinson");
    ToeplitzSolution out;
    out.phi.reserve(t_max + 1);
    out.innovation_variances.reserve(t_max + 1);

    LevinsonRecursion rec(gamma);
    for (std::size_t k = 0;; ++k) {
        out.phi.emplace_back(rec.phi().begin(), rec.phi().end());
        out.innovation_variances.push_back(rec.innovation_variance());
        if (k == t_max)
            break;
        rec.advance();
    }
    return out;
}

LevinsonStage durbin_levinson_last(const Autocovariance& gamma, std::size_t t)
{
    require_lags(gamma, t, "durbin_levinson");
    LevinsonRecursion rec(gamma);
    for (std::size_t k = 0; k < t; ++k)
        rec.advance();
    return LevinsonStage{std::vector<double>(rec.phi().begin(), rec.phi().end()),
                         rec.innovation_variance()};
}

std::vector<std::vector<double>> toeplitz_solve(const Autocovariance& gamma,
                                                const std::vector<std::vector<double>>& rhs)
{
    if (rhs.empty())
        return {};
    const std::size_t n = rhs.front().size();
    for (const auto& b : rhs)
        if (b.size() != n)
            throw std::invalid_argument("toeplitz_solve: right-hand sides differ in length");
    if (n == 0)
        return std::vector<std::vector<double>>(rhs.size());
    require_lags(gamma, n - 1, "toeplitz_solve");

    std::vector<std::vector<double>> x(rhs.size());
    for (auto& xi : x)
        xi.reserve(n);
    LevinsonRecursion rec(gamma);
    for (std::size_t k = 0; k < n; ++k) {
        const auto phi = rec.phi();
        const double p = rec.innovation_variance();
        // Extend each solution from Gamma_k to Gamma_{k+1}.
        for (std::size_t r = 0; r < rhs.size(); ++r) {
            auto& xr = x[r];
            double mu = rhs[r][k];
            for (std::size_t j = 1; j <= k; ++j)
                mu -= gamma[j] * xr[k - j];
            mu /= p;
            for (std::size_t i = 0; i < k; ++i)
                xr[i] -= mu * phi[k - 1 - i];
            xr.push_back(mu);
        }
        if (k + 1 < n)
            rec.advance();
    }
    return x;
}

std::vector<double> toeplitz_solve(const Autocovariance& gamma, std::span<const double> rhs)
{
    std::vector<std::vector<double>> b{std::vector<double>(rhs.begin(), rhs.end())};
    return std::move(toeplitz_solve(gamma, b).front());
}

std::vector<double> toeplitz_inverse(const Autocovariance& gamma, std::size_t T)
{
    if (T == 0)
        return {};
    require_lags(gamma, T - 1, "toeplitz_inverse");
    const double g0 = gamma[0];
    if (!(g0 > 0.0))
        fail_not_pd(1, g0);
    std::vector<double> B(T * T, 0.0);
    if (T == 1) {
        B[0] = 1.0 / g0;
        return B;
    }

    // Trench's recursion on the unit-diagonal matrix Gamma_T / gamma(0);
    // 1-based indices below follow the usual statement of the algorithm.
    const LevinsonStage stage = durbin_levinson_last(gamma, T - 1);
    const double scale = g0 / stage.innovation_variance;
    std::vector<double> nu(T); // nu[1..T-1]
    for (std::size_t i = 1; i < T; ++i)
        nu[i] = -scale * stage.phi[T - i - 1];

    auto at = [&](std::size_t i, std::size_t j) -> double& { return B[(i - 1) * T + (j - 1)]; };
    at(1, 1) = scale;
    for (std::size_t j = 2; j <= T; ++j)
        at(1, j) = nu[T + 1 - j];
    for (std::size_t i = 2; i <= (T + 1) / 2; ++i)
        for (std::size_t j = i; j <= T - i + 1; ++j)
            at(i, j) = at(i - 1, j - 1) +
                       (nu[T + 1 - j] * nu[T + 1 - i] - nu[i - 1] * nu[j - 1]) / scale;

    // Fill the rest from symmetry and persymmetry.
    for (std::size_t i = 1; i <= T; ++i) {
        for (std::size_t j = 1; j <= T; ++j) {
            std::size_t a = std::min(i, j), b = std::max(i, j);
            if (a + b > T + 1) {
                const std::size_t a2 = T + 1 - b, b2 = T + 1 - a;
                a = a2;
                b = b2;
            }
            if (a != i || b != j)
                at(i, j) = at(a, b);
        }
    }
    for (double& v : B)
        v /= g0;
    return B;
}

std::vector<ForecastCoefficients> forecast_coefficients(const Autocovariance& gamma,
                                                        std::size_t T,
                                                        std::span<const std::size_t> horizons)
{
    if (T == 0)
        throw std::invalid_argument("forecast_coefficients: history length must be positive");
    std::size_t max_n = 0;
    for (std::size_t n : horizons) {
        if (n == 0)
            throw std::invalid_argument("forecast_coefficients: horizon must be at least 1");
        max_n = std::max(max_n, n);
    }
    std::vector<ForecastCoefficients> out(horizons.size());
    if (horizons.empty())
        return out;
    require_lags(gamma, T + max_n - 1, "forecast_coefficients");

    std::vector<std::vector<double>> rhs;
    std::vector<std::size_t> slot;
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (horizons[i] == 1)
            continue;
        const auto g = gamma.lags(horizons[i], T);
        rhs.emplace_back(g.begin(), g.end());
        slot.push_back(i);
    }
    const auto solved = toeplitz_solve(gamma, rhs);
    for (std::size_t r = 0; r < solved.size(); ++r) {
        auto& fc = out[slot[r]];
        fc.phi = solved[r];
        fc.variance = gamma[0] - std::inner_product(rhs[r].begin(), rhs[r].end(),
                                                    fc.phi.begin(), 0.0);
    }
    if (std::find(horizons.begin(), horizons.end(), std::size_t{1}) != horizons.end()) {
        LevinsonStage one = durbin_levinson_last(gamma, T);
        for (std::size_t i = 0; i < horizons.size(); ++i)
            if (horizons[i] == 1)
                out[i] = ForecastCoefficients{one.phi, one.innovation_variance};
    }
    return out;
}

ForecastCoefficients forecast_coefficients(const Autocovariance& gamma, std::size_t T,
                                           std::size_t N)
{
    const std::size_t h[] = {N};
    return std::move(forecast_coefficients(gamma, T, h).front());
}

} // namespace mfvol
