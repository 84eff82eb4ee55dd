#include "mfvol/laplace.hpp"

#include "mfvol/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mfvol {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double norm2(std::span<const double> v)
{
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

double dot(std::span<const double> a, std::span<const double> b)
{
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Objective h -> log p(x, h) with a banded negative Hessian.
class BandedObjective {
public:
    BandedObjective(const LatentModel& m, std::span<const double> x, const SymBandMatrix& q)
        : m_(m), x_(x), q_(q)
    {
    }

    std::size_t size() const { return x_.size(); }
    double value(std::span<const double> h) const { return joint_log_density(m_, x_, h); }
    std::vector<double> gradient(std::span<const double> h) const { return mfvol::gradient(m_, x_, h); }

    class Factor {
    public:
        explicit Factor(SymBandMatrix neg_hessian) : chol_(neg_hessian) {}
        double log_det() const { return chol_.log_det(); }
        std::vector<double> solve(std::span<const double> g) const { return chol_.solve(g); }

    private:
        BandCholesky chol_;
    };

    Factor factorize(std::span<const double> h) const
    {
        SymBandMatrix a = q_;
        std::vector<double> d(h.size());
        for (std::size_t i = 0; i < h.size(); ++i)
            d[i] = -observation_curvature(x_[i], h[i], m_.observation_scale());
        a.add_diagonal(d);
        return Factor(std::move(a));
    }

private:
    const LatentModel& m_;
    std::span<const double> x_;
    const SymBandMatrix& q_;
};

// Objective over (h_1..h_T, h_f) where h_f | h ~ N(w.h, V) is observed through xi.
// The negative Hessian is banded plus a rank-one term and one dense border.
class BorderedObjective {
public:
    BorderedObjective(const LatentModel& m, std::span<const double> x, const SymBandMatrix& q,
                      const FutureLatent& f, double xi)
        : m_(m), x_(x), q_(q), f_(f), xi_(xi)
    {
    }

    std::size_t size() const { return x_.size() + 1; }

    double value(std::span<const double> z) const
    {
        const auto h = z.first(x_.size());
        const double hf = z.back();
        const double e = hf - dot(f_.weights, h);
        const double s = m_.observation_scale();
        return joint_log_density(m_, x_, h) - 0.5 * (kLog2Pi + std::log(s)) - 0.5 * hf -
               xi_ * xi_ * std::exp(-hf) / (2.0 * s) - 0.5 * (kLog2Pi + std::log(f_.variance)) -
               e * e / (2.0 * f_.variance);
    }

    std::vector<double> gradient(std::span<const double> z) const
    {
        const auto h = z.first(x_.size());
        const double hf = z.back();
        const double r = (hf - dot(f_.weights, h)) / f_.variance;
        std::vector<double> g = mfvol::gradient(m_, x_, h);
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += f_.weights[i] * r;
        g.push_back(observation_score(xi_, hf, m_.observation_scale()) - r);
        return g;
    }

    class Factor {
    public:
        Factor(SymBandMatrix b, const FutureLatent& f, double kappa)
            : chol_(b), w_(f.weights)
        {
            const double V = f.variance;
            a_ = 1.0 / V + kappa;
            alpha_ = kappa / (a_ * V);
            beta_ = 1.0 / (a_ * V);
            inv_v_ = 1.0 / V;
            bw_ = chol_.solve(w_);
            denom_ = 1.0 + alpha_ * dot(w_, bw_);
        }

        double log_det() const { return std::log(a_) + chol_.log_det() + std::log(denom_); }

        std::vector<double> solve(std::span<const double> g) const
        {
            const std::size_t T = w_.size();
            const double gf = g[T];
            std::vector<double> r(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(T));
            for (std::size_t i = 0; i < T; ++i)
                r[i] += beta_ * gf * w_[i];
            std::vector<double> dh = chol_.solve(r);
            const double c = alpha_ * dot(w_, dh) / denom_;
            for (std::size_t i = 0; i < T; ++i)
                dh[i] -= c * bw_[i];
            const double df = (gf + inv_v_ * dot(w_, dh)) / a_;
            dh.push_back(df);
            return dh;
        }

    private:
        BandCholesky chol_;
        std::span<const double> w_;
        std::vector<double> bw_;
        double a_ = 0, alpha_ = 0, beta_ = 0, inv_v_ = 0, denom_ = 1;
    };

    Factor factorize(std::span<const double> z) const
    {
        const std::size_t T = x_.size();
        SymBandMatrix b = q_;
        std::vector<double> d(T);
        for (std::size_t i = 0; i < T; ++i)
            d[i] = -observation_curvature(x_[i], z[i], m_.observation_scale());
        b.add_diagonal(d);
        const double kappa = -observation_curvature(xi_, z[T], m_.observation_scale());
        return Factor(std::move(b), f_, kappa);
    }

private:
    const LatentModel& m_;
    std::span<const double> x_;
    const SymBandMatrix& q_;
    const FutureLatent& f_;
    double xi_;
};

template <class Objective>
bool spectral_residual(const Objective& obj, std::vector<double>& z, std::vector<double>& g,
                       double tol, std::size_t max_iter, std::size_t& iterations)
{
    // Residual F = -grad, merit ||F||^2, non-monotone line search over +-d.
    constexpr std::size_t kMemory = 10;
    constexpr double kGamma = 1e-4;
    constexpr double kSigmaMin = 1e-10, kSigmaMax = 1e10;
    const std::size_t n = z.size();

    auto merit_of = [](std::span<const double> v) {
        const double m = dot(v, v);
        return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
    };
    double merit = merit_of(g);
    const double merit0 = merit;
    std::deque<double> history{merit};
    double sigma = 1.0;
    std::vector<double> trial(n);

    for (std::size_t k = 0; k < max_iter; ++k) {
        if (std::sqrt(merit) <= tol)
            return true;
        ++iterations;
        const double eta = merit0 / ((1.0 + k) * (1.0 + k));
        const double bound = *std::max_element(history.begin(), history.end()) + eta;
        // d = -sigma F = sigma * grad
        double ap = 1.0, am = 1.0;
        std::vector<double> gnew;
        double mnew = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 60 && !accepted; ++ls) {
            for (std::size_t i = 0; i < n; ++i)
                trial[i] = z[i] + ap * sigma * g[i];
            gnew = obj.gradient(trial);
            mnew = merit_of(gnew);
            if (mnew <= bound - kGamma * ap * ap * merit) {
                accepted = true;
                break;
            }
            const double mp = mnew;
            for (std::size_t i = 0; i < n; ++i)
                trial[i] = z[i] - am * sigma * g[i];
            gnew = obj.gradient(trial);
            mnew = merit_of(gnew);
            if (mnew <= bound - kGamma * am * am * merit) {
                accepted = true;
                break;
            }
            const double mm = mnew;
            auto shrink = [merit](double a, double m) {
                const double q = a * a * merit / (m + (2.0 * a - 1.0) * merit);
                return std::isfinite(q) ? std::clamp(q, 0.1 * a, 0.5 * a) : 0.1 * a;
            };
            ap = shrink(ap, mp);
            am = shrink(am, mm);
        }
        if (!accepted)
            return false;

        double ss = 0.0, sy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double s = trial[i] - z[i];
            const double y = g[i] - gnew[i]; // F_new - F_old with F = -grad
            ss += s * s;
            sy += s * y;
        }
        sigma = ss / sy;
        if (!(std::abs(sigma) >= kSigmaMin && std::abs(sigma) <= kSigmaMax))
            sigma = 1.0;
        z = trial;
        g = std::move(gnew);
        merit = mnew;
        history.push_back(merit);
        if (history.size() > kMemory)
            history.pop_front();
    }
    return std::sqrt(merit) <= tol;
}

template <class Objective>
ModeResult maximize(const Objective& obj, std::span<const double> init, const ModeOptions& opts)
{
    const std::size_t n = obj.size();
    ModeResult res;
    if (init.empty()) {
        res.h_star.assign(n, 0.0);
    } else {
        if (init.size() != n)
            throw std::invalid_argument("find_mode: initial field has length " +
                                        std::to_string(init.size()) + ", expected " +
                                        std::to_string(n));
        res.h_star.assign(init.begin(), init.end());
    }
    for (double v : res.h_star)
        if (!std::isfinite(v))
            throw std::invalid_argument("find_mode: non-finite initial field");

    const double tol = opts.tolerance_scale * std::sqrt(static_cast<double>(n));
    std::vector<double>& z = res.h_star;
    std::vector<double> g = obj.gradient(z);
    double f = obj.value(z);
    if (!std::isfinite(f))
        throw std::invalid_argument("find_mode: objective not finite at the initial field");

    bool stalled = opts.method == ModeMethod::spectral_residual;
    while (!stalled && res.iterations < opts.max_iterations) {
        const double gn = norm2(g);
        if (gn <= tol)
            break;
        std::vector<double> d;
        try {
            d = obj.factorize(z).solve(g);
        } catch (const NotPositiveDefinite&) {
            stalled = true;
            break;
        }
        ++res.iterations;
        const double slope = dot(g, d);
        std::vector<double> trial(n);
        double step = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls, step *= 0.5) {
            for (std::size_t i = 0; i < n; ++i)
                trial[i] = z[i] + step * d[i];
            const double ft = obj.value(trial);
            if (!std::isfinite(ft))
                continue;
            if (ft >= f + 1e-4 * step * slope) {
                z.swap(trial);
                f = ft;
                accepted = true;
                break;
            }
            // At round-off level the objective cannot rank the points; judge by the gradient.
            if (std::abs(ft - f) <= 1e-13 * std::max(1.0, std::abs(f))) {
                auto gt = obj.gradient(trial);
                if (norm2(gt) < gn) {
                    z.swap(trial);
                    f = ft;
                    accepted = true;
                    break;
                }
            }
        }
        if (!accepted) {
            stalled = true;
            break;
        }
        g = obj.gradient(z);
    }

    res.grad_norm = norm2(g);
    res.converged = res.grad_norm <= tol;
    if (!res.converged) {
        std::vector<double> zs = z;
        std::vector<double> gs = g;
        std::size_t extra = 0;
        const bool ok = spectral_residual(obj, zs, gs, tol, opts.fallback_iterations, extra);
        res.iterations += extra;
        res.used_fallback = opts.method == ModeMethod::newton;
        const double gsn = norm2(gs);
        if (ok || gsn < res.grad_norm) {
            z = std::move(zs);
            res.grad_norm = gsn;
        }
        res.converged = res.grad_norm <= tol;
    }
    return res;
}

template <class Objective>
LaplaceResult laplace(const Objective& obj, std::span<const double> init, const ModeOptions& opts)
{
    LaplaceResult out;
    out.mode = maximize(obj, init, opts);
    if (!out.mode.converged)
        throw ModeNotConverged("mode finding stopped with gradient norm " +
                               std::to_string(out.mode.grad_norm) + " after " +
                               std::to_string(out.mode.iterations) + " iterations");
    try {
        out.log_det = obj.factorize(out.mode.h_star).log_det();
    } catch (const NotPositiveDefinite&) {
        throw SaddlePoint("negative Hessian at the stationary point is not positive definite");
    }
    const double n = static_cast<double>(obj.size());
    out.log_likelihood = 0.5 * n * kLog2Pi - 0.5 * out.log_det + obj.value(out.mode.h_star);
    return out;
}

void check_series(std::span<const double> x)
{
    if (x.empty())
        throw std::invalid_argument("empty return series");
    for (double v : x)
        if (!std::isfinite(v))
            throw std::invalid_argument("return series contains non-finite values");
}

} // namespace

ModeResult find_mode(const LatentModel& model, std::span<const double> x,
                     std::span<const double> init, const ModeOptions& opts)
{
    check_series(x);
    const SymBandMatrix q = model.prior_precision(x.size());
    return maximize(BandedObjective(model, x, q), init, opts);
}

LaplaceResult laplace_approximation(const LatentModel& model, std::span<const double> x,
                                    std::span<const double> init, const ModeOptions& opts)
{
    check_series(x);
    const SymBandMatrix q = model.prior_precision(x.size());
    return laplace(BandedObjective(model, x, q), init, opts);
}

double laplace_log_likelihood(const LatentModel& model, std::span<const double> x,
                              const ModeOptions& opts)
{
    return laplace_approximation(model, x, {}, opts).log_likelihood;
}

PosteriorPoint posterior_mode_conditional(const LatentModel& model, std::span<const double> x,
                                          std::size_t s, const ModeOptions& opts)
{
    check_series(x);
    if (s >= x.size())
        throw std::out_of_range("posterior_mode_conditional: index beyond series");
    const SymBandMatrix q = model.prior_precision(x.size());
    const BandedObjective obj(model, x, q);
    const ModeResult mode = maximize(obj, {}, opts);
    if (!mode.converged)
        throw ModeNotConverged("mode finding did not converge");
    std::vector<double> e(x.size(), 0.0);
    e[s] = 1.0;
    PosteriorPoint out;
    out.value = mode.h_star[s];
    try {
        out.variance = obj.factorize(mode.h_star).solve(e)[s];
    } catch (const NotPositiveDefinite&) {
        throw SaddlePoint("negative Hessian at the stationary point is not positive definite");
    }
    return out;
}

FutureLatent future_latent(const LatentModel& model, std::size_t T, std::size_t N)
{
    if (T == 0)
        throw std::invalid_argument("future_latent: empty history");
    if (N == 0)
        throw std::invalid_argument("future_latent: horizon must be at least 1");
    FutureLatent out;
    out.horizon = N;
    out.weights.assign(T, 0.0);
    if (model.kind() == LatentKind::ar1) {
        const double psi = model.ar_coefficient();
        const double su2 = model.innovation_variance(1);
        double pk = 1.0, var = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            var += su2 * pk * pk;
            pk *= psi;
        }
        out.weights[T - 1] = pk;
        out.variance = var;
    } else {
        const ForecastCoefficients fc =
            forecast_coefficients(model.autocovariance(T + N - 1), T, N);
        for (std::size_t j = 0; j < T; ++j)
            out.weights[T - 1 - j] = fc.phi[j];
        out.variance = fc.variance;
    }
    if (!(out.variance > 0.0))
        throw NotPositiveDefinite("future_latent: non-positive forecast variance");
    return out;
}

FutureLaplace::FutureLaplace(const LatentModel& model, std::span<const double> x, std::size_t N,
                             const ModeOptions& opts)
    : model_(model), x_(x.begin(), x.end()), opts_(opts)
{
    check_series(x);
    future_ = future_latent(model_, x_.size(), N);
    precision_ = model_.prior_precision(x_.size());
}

LaplaceResult FutureLaplace::evaluate(double xi, std::span<const double> init) const
{
    if (!std::isfinite(xi))
        throw std::invalid_argument("FutureLaplace: non-finite future return");
    return laplace(BorderedObjective(model_, x_, precision_, future_, xi), init, opts_);
}

} // namespace mfvol
