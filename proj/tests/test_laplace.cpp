#include <catch2/catch_amalgamated.hpp>

#include "mfvol/errors.hpp"
#include "mfvol/laplace.hpp"
#include "oracles.hpp"

#include <gsl/gsl_integration.h>

#include <cmath>
#include <numbers>

using namespace mfvol;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> random_returns(RandomStream& rng, std::size_t n, double scale)
{
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = scale * std::exp(0.5 * rng.normal()) * rng.normal();
    return v;
}

oracle::MatrixXd sv_cov(const SvParams& p, const std::vector<double>& times)
{
    const std::size_t n = times.size();
    oracle::MatrixXd c(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            c(i, j) = p.stationary_variance() * std::pow(p.psi, std::abs(times[i] - times[j]));
    return c;
}

oracle::MatrixXd mrw_cov(const MrwParams& p, const std::vector<std::size_t>& times)
{
    const std::size_t n = times.size();
    oracle::MatrixXd c(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            c(i, j) = mrw_autocov_at(p.lambda, p.R, times[i] > times[j] ? times[i] - times[j] : times[j] - times[i]);
    return c;
}

/// p(x) for T = 1: integral of N(h; 0, v) N(x; 0, s e^h) dh by Gauss-Hermite.
double gauss_hermite_marginal(double x, double v, double s, std::size_t nodes)
{
    struct Ctx {
        double x, v, s;
    } ctx{x, v, s};
    gsl_function f;
    f.function = [](double u, void* p) {
        const auto& c = *static_cast<Ctx*>(p);
        const double h = std::sqrt(2.0 * c.v) * u;
        const double var = c.s * std::exp(h);
        return std::exp(-0.5 * c.x * c.x / var) / std::sqrt(2.0 * std::numbers::pi * var) /
               std::sqrt(std::numbers::pi);
    };
    f.params = &ctx;
    gsl_integration_fixed_workspace* w =
        gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, nodes, 0.0, 1.0, 0.0, 0.0);
    double result = 0.0;
    gsl_integration_fixed(&f, &result, w);
    gsl_integration_fixed_free(w);
    return result;
}

} // namespace

TEST_CASE("mode and Laplace likelihood match the dense oracle (SV)", "[laplace]")
{
    RandomStream rng(21);
    const SvParams p{0.9, 0.4, 0.02};
    const LatentModel m(p);
    for (std::size_t T : {1u, 2u, 10u, 40u}) {
        const auto x = random_returns(rng, T, 0.02);
        std::vector<double> times(T);
        for (std::size_t t = 0; t < T; ++t)
            times[t] = static_cast<double>(t);
        const auto ref = oracle::dense_laplace(sv_cov(p, times), m.observation_scale(), oracle::vec(x));
        const LaplaceResult r = laplace_approximation(m, x);
        REQUIRE(r.mode.converged);
        REQUIRE((oracle::vec(r.mode.h_star) - ref.mode).norm() < 1e-8 * std::sqrt(double(T)));
        REQUIRE_THAT(r.log_likelihood, WithinAbs(ref.log_likelihood, 1e-8));
        REQUIRE_THAT(r.log_det, WithinRel(oracle::log_det_spd(ref.neg_hessian), 1e-10));
    }
}

TEST_CASE("untruncated MRW Laplace likelihood matches the dense oracle", "[laplace]")
{
    RandomStream rng(22);
    const std::size_t T = 35;
    const MrwParams p{0.45, 0.01, 60.0, T - 1};
    const auto x = random_returns(rng, T, 0.01);
    std::vector<std::size_t> times(T);
    for (std::size_t t = 0; t < T; ++t)
        times[t] = t;
    const LatentModel m(p);
    const auto ref = oracle::dense_laplace(mrw_cov(p, times), m.observation_scale(), oracle::vec(x));
    REQUIRE_THAT(laplace_log_likelihood(m, x), WithinAbs(ref.log_likelihood, 1e-8));
}

TEST_CASE("spectral residual iteration reaches the Newton mode", "[laplace]")
{
    RandomStream rng(23);
    const auto x = random_returns(rng, 80, 1.0);
    for (const LatentModel& m : {LatentModel(SvParams{0.95, 0.3, 1.0}),
                                 LatentModel(MrwParams{0.3, 1.0, 40.0, 10})}) {
        const ModeResult newton = find_mode(m, x);
        ModeOptions o;
        o.method = ModeMethod::spectral_residual;
        const ModeResult sr = find_mode(m, x, {}, o);
        REQUIRE(newton.converged);
        REQUIRE(sr.converged);
        REQUIRE_FALSE(newton.used_fallback);
        REQUIRE((oracle::vec(sr.h_star) - oracle::vec(newton.h_star)).norm() < 1e-6);
    }
}

TEST_CASE("warm start does not change the mode", "[laplace]")
{
    RandomStream rng(24);
    const auto x = random_returns(rng, 60, 1.0);
    const LatentModel m(MrwParams{0.35, 1.0, 30.0, 20});
    const ModeResult cold = find_mode(m, x);
    std::vector<double> init(60, 1.5);
    const ModeResult warm = find_mode(m, x, init);
    REQUIRE((oracle::vec(cold.h_star) - oracle::vec(warm.h_star)).norm() < 1e-7);
    REQUIRE_THROWS_AS(find_mode(m, x, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("mode finding failure is reported", "[laplace]")
{
    RandomStream rng(25);
    const auto x = random_returns(rng, 50, 5.0);
    ModeOptions o;
    o.max_iterations = 1;
    o.fallback_iterations = 1;
    const LatentModel m(SvParams{0.9, 0.3, 1e-3});
    REQUIRE_FALSE(find_mode(m, x, {}, o).converged);
    REQUIRE_THROWS_AS(laplace_approximation(m, x, {}, o), ModeNotConverged);
}

TEST_CASE("Laplace approximation for T = 1 against Gauss-Hermite", "[laplace]")
{
    for (double v : {0.25, 0.5, 1.0}) {
        // psi = 0 makes the stationary variance sigma_u^2.
        const SvParams p{0.0, std::sqrt(v), 1.0};
        const LatentModel m(p);
        for (double x : {0.05, 0.5, 1.0, 2.5}) {
            const std::vector<double> xs{x};
            const double exact = gauss_hermite_marginal(x, v, 1.0, 200);
            const double approx = std::exp(laplace_log_likelihood(m, xs));
            REQUIRE(std::abs(approx - exact) / exact <= 0.10);
        }
    }
}

TEST_CASE("posterior variance is the diagonal of the inverse negative Hessian", "[laplace]")
{
    RandomStream rng(26);
    const SvParams p{0.8, 0.5, 1.0};
    const LatentModel m(p);
    const auto x = random_returns(rng, 20, 1.0);
    std::vector<double> times(20);
    for (std::size_t t = 0; t < 20; ++t)
        times[t] = static_cast<double>(t);
    const auto ref = oracle::dense_laplace(sv_cov(p, times), 1.0, oracle::vec(x));
    const oracle::MatrixXd cov = ref.neg_hessian.inverse();
    for (std::size_t s : {0u, 7u, 19u}) {
        const PosteriorPoint pp = posterior_mode_conditional(m, x, s);
        REQUIRE_THAT(pp.value, WithinAbs(ref.mode(s), 1e-8));
        REQUIRE_THAT(pp.variance, WithinRel(cov(s, s), 1e-9));
    }
    REQUIRE_THROWS_AS(posterior_mode_conditional(m, x, 20), std::out_of_range);
}

TEST_CASE("future latent law", "[laplace]")
{
    const SvParams p{0.9, 0.3, 1.0};
    const FutureLatent f = future_latent(LatentModel(p), 10, 3);
    for (std::size_t t = 0; t < 9; ++t)
        REQUIRE(f.weights[t] == 0.0);
    REQUIRE_THAT(f.weights[9], WithinRel(0.729, 1e-14));
    REQUIRE_THAT(f.variance, WithinRel(0.09 * (1 + 0.81 + 0.6561), 1e-14));
}

TEST_CASE("augmented Laplace matches the dense joint oracle", "[laplace]")
{
    RandomStream rng(27);
    const std::size_t T = 25;
    SECTION("SV")
    {
        const SvParams p{0.92, 0.35, 1.0};
        const LatentModel m(p);
        const auto x = random_returns(rng, T, 1.0);
        for (std::size_t N : {1u, 4u}) {
            std::vector<double> times(T + 1);
            for (std::size_t t = 0; t < T; ++t)
                times[t] = static_cast<double>(t);
            times[T] = static_cast<double>(T - 1 + N);
            const FutureLaplace fl(m, x, N);
            for (double xi : {-2.0, 0.0, 0.3, 1.7}) {
                std::vector<double> xa = x;
                xa.push_back(xi);
                const auto ref = oracle::dense_laplace(sv_cov(p, times), 1.0, oracle::vec(xa));
                REQUIRE_THAT(fl.evaluate(xi).log_likelihood, WithinAbs(ref.log_likelihood, 1e-8));
            }
        }
    }
    SECTION("untruncated MRW")
    {
        const MrwParams p{0.4, 1.0, 20.0, T - 1};
        const LatentModel m(p);
        const auto x = random_returns(rng, T, 1.0);
        for (std::size_t N : {1u, 3u}) {
            std::vector<std::size_t> times(T + 1);
            for (std::size_t t = 0; t < T; ++t)
                times[t] = t;
            times[T] = T - 1 + N;
            const FutureLaplace fl(m, x, N);
            for (double xi : {-1.0, 0.0, 2.2}) {
                std::vector<double> xa = x;
                xa.push_back(xi);
                const auto ref = oracle::dense_laplace(mrw_cov(p, times), m.observation_scale(),
                                                       oracle::vec(xa));
                REQUIRE_THAT(fl.evaluate(xi).log_likelihood, WithinAbs(ref.log_likelihood, 1e-8));
            }
        }
    }
}
