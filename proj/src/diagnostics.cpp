#include "mfvol/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mfvol {

LinearFit linear_fit(std::span<const double> x, std::span<const double> y)
{
    const std::size_t n = x.size();
    if (n != y.size() || n < 2)
        throw std::invalid_argument("linear_fit: need at least two paired points");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0))
        throw std::invalid_argument("linear_fit: abscissae are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    const double sse = std::max(0.0, syy - f.slope * sxy);
    f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    f.slope_std_error = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
    return f;
}

std::vector<std::size_t> log_spaced_scales(std::size_t lo, std::size_t hi, std::size_t count)
{
    if (lo < 1 || hi < lo || count < 1)
        throw std::invalid_argument("log_spaced_scales: need 1 <= lo <= hi and count >= 1");
    std::vector<std::size_t> out;
    const double a = std::log(static_cast<double>(lo));
    const double b = std::log(static_cast<double>(hi));
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        const auto s = static_cast<std::size_t>(std::llround(std::exp(a + t * (b - a))));
        if (out.empty() || s != out.back())
            out.push_back(s);
    }
    return out;
}

ScalingEstimate structure_functions(std::span<const double> x, std::span<const double> q_values,
                                    std::span<const std::size_t> scales)
{
    const std::size_t T = x.size();
    if (scales.size() < 4)
        throw std::invalid_argument("structure_functions: at least four scales are required");
    for (std::size_t s : scales)
        if (s < 1 || 8 * s > T)
            throw std::invalid_argument("structure_functions: scales must lie in [1, T/8]");
    for (double q : q_values)
        if (!(q >= 0.0) || !std::isfinite(q))
            throw std::invalid_argument("structure_functions: moments must be non-negative");

    std::vector<double> X(T + 1, 0.0);
    for (std::size_t t = 0; t < T; ++t)
        X[t + 1] = X[t] + x[t];

    ScalingEstimate est;
    est.q_values.assign(q_values.begin(), q_values.end());
    est.scales.assign(scales.begin(), scales.end());

    std::vector<double> log_s(scales.size());
    for (std::size_t k = 0; k < scales.size(); ++k)
        log_s[k] = std::log(static_cast<double>(scales[k]));

    // log_m[q][k] = log mean |X(t+s_k) - X(t)|^q
    std::vector<std::vector<double>> log_m(q_values.size(), std::vector<double>(scales.size()));
    for (std::size_t k = 0; k < scales.size(); ++k) {
        const std::size_t s = scales[k];
        const std::size_t count = T + 1 - s;
        std::vector<double> sums(q_values.size(), 0.0);
        for (std::size_t t = 0; t < count; ++t) {
            const double a = std::abs(X[t + s] - X[t]);
            for (std::size_t iq = 0; iq < q_values.size(); ++iq)
                sums[iq] += q_values[iq] == 0.0 ? 1.0 : std::pow(a, q_values[iq]);
        }
        for (std::size_t iq = 0; iq < q_values.size(); ++iq)
            log_m[iq][k] = std::log(sums[iq] / static_cast<double>(count));
    }

    for (std::size_t iq = 0; iq < q_values.size(); ++iq) {
        if (q_values[iq] == 0.0) {
            est.zeta_hat.push_back(0.0);
            est.std_error.push_back(0.0);
            est.r2.push_back(1.0);
            continue;
        }
        for (double v : log_m[iq])
            if (!std::isfinite(v))
                throw std::invalid_argument("structure_functions: zero increments at some scale");
        const LinearFit f = linear_fit(log_s, log_m[iq]);
        est.zeta_hat.push_back(f.slope);
        est.std_error.push_back(f.slope_std_error);
        est.r2.push_back(f.r2);
    }
    return est;
}

std::vector<double> sample_acf(std::span<const double> v, std::size_t max_lag)
{
    const std::size_t n = v.size();
    if (max_lag >= n)
        throw std::invalid_argument("sample_acf: lag exceeds series length");
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double c0 = 0.0;
    for (double a : v)
        c0 += (a - mean) * (a - mean);
    std::vector<double> acf(max_lag, 0.0);
    if (!(c0 > 0.0))
        return acf;
    for (std::size_t s = 1; s <= max_lag; ++s) {
        double c = 0.0;
        for (std::size_t t = 0; t + s < n; ++t)
            c += (v[t] - mean) * (v[t + s] - mean);
        acf[s - 1] = c / c0;
    }
    return acf;
}

AbsReturnAcf abs_return_acf(std::span<const double> x, const AcfOptions& opts)
{
    const std::size_t T = x.size();
    if (opts.max_lag < 1 || 4 * opts.max_lag >= T)
        throw std::invalid_argument("abs_return_acf: need 1 <= max_lag < T/4");
    for (double v : x)
        if (!std::isfinite(v))
            throw std::invalid_argument("abs_return_acf: non-finite data");
    const std::size_t hi = opts.fit_max_lag == 0 ? opts.max_lag : opts.fit_max_lag;
    if (opts.fit_min_lag < 1 || hi > opts.max_lag || opts.fit_min_lag >= hi)
        throw std::invalid_argument("abs_return_acf: invalid fit range");

    std::vector<double> a(T);
    std::transform(x.begin(), x.end(), a.begin(), [](double v) { return std::abs(v); });

    AbsReturnAcf out;
    out.autocorrelation = sample_acf(a, opts.max_lag);
    out.moment.resize(opts.max_lag);
    for (std::size_t s = 1; s <= opts.max_lag; ++s) {
        double m = 0.0;
        for (std::size_t t = 0; t + s < T; ++t)
            m += a[t] * a[t + s];
        out.moment[s - 1] = m / static_cast<double>(T - s);
    }

    out.fit_min_lag = opts.fit_min_lag;
    out.fit_max_lag = hi;
    std::vector<double> lx, ly;
    for (std::size_t s = opts.fit_min_lag; s <= hi; ++s) {
        if (out.moment[s - 1] > 0.0) {
            lx.push_back(std::log(static_cast<double>(s)));
            ly.push_back(std::log(out.moment[s - 1]));
        }
    }
    const double band = 3.0 / std::sqrt(static_cast<double>(T));
    const bool dependent = std::any_of(out.autocorrelation.begin(), out.autocorrelation.end(),
                                       [band](double r) { return std::abs(r) > band; });
    out.reliable = dependent && lx.size() >= 3;
    if (lx.size() >= 2) {
        const LinearFit f = linear_fit(lx, ly);
        out.slope = f.slope;
        out.intercept = f.intercept;
        out.r2 = f.r2;
    } else {
        out.reliable = false;
    }
    return out;
}

} // namespace mfvol
