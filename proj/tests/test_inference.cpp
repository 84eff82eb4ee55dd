#include <catch2/catch_amalgamated.hpp>

#include "mfvol/diagnostics.hpp"
#include "mfvol/errors.hpp"
#include "mfvol/inference.hpp"
#include "mfvol/simulate.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>

using namespace mfvol;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double correlation(const std::vector<double>& a, const std::vector<double>& b)
{
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i] / n;
        mb += b[i] / n;
    }
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

} // namespace

TEST_CASE("filter is the last smoothed component", "[inference]")
{
    const auto sim = sample_mrw(MrwParams{0.4, 0.01, 100.0, 30}, 300, 3);
    for (const LatentModel& m : {LatentModel(MrwParams{0.4, 0.01, 100.0, 30}),
                                 LatentModel(SvParams{0.95, 0.2, 0.01})}) {
        const LatentEstimate s = smooth(m, sim.x);
        const LatentEstimate f = filter(m, sim.x);
        REQUIRE(s.kind == EstimateKind::smoothed);
        REQUIRE(s.values.size() == 300);
        REQUIRE(f.kind == EstimateKind::filtered);
        REQUIRE(f.values.size() == 1);
        REQUIRE(f.values[0] == s.values.back());
    }
}

TEST_CASE("SV smoothing of a zero series", "[inference]")
{
    const std::size_t T = 200;
    const SvParams p{0.5, 0.4, 1.0};
    const std::vector<double> x(T, 0.0);
    const LatentEstimate s = smooth(LatentModel(p), x);
    // With x = 0 the mode solves Q h = -1/2, i.e. h = -Gamma 1 / 2.
    const oracle::MatrixXd cov = oracle::toeplitz(
        [&](std::size_t k) { return p.stationary_variance() * std::pow(p.psi, double(k)); }, T);
    const oracle::VectorXd ref = -0.5 * cov * oracle::VectorXd::Ones(T);
    for (std::size_t t = 0; t < T; ++t)
        REQUIRE_THAT(s.values[t], WithinAbs(ref(t), 1e-9));
    for (std::size_t t = 40; t < T - 40; ++t)
        REQUIRE_THAT(s.values[t], WithinAbs(s.values[T / 2], 1e-9));
}

TEST_CASE("single observation reduces to a scalar mode problem", "[inference]")
{
    const SvParams p{0.7, 0.5, 0.8};
    const double v = p.stationary_variance(), s = p.sigma * p.sigma;
    for (double x : {0.01, 0.4, 3.0}) {
        // Scalar Newton on -h^2/(2v) - h/2 - x^2 e^{-h}/(2s).
        double h = 0.0;
        for (int it = 0; it < 100; ++it) {
            const double g = -h / v - 0.5 + x * x * std::exp(-h) / (2 * s);
            const double H = -1.0 / v - x * x * std::exp(-h) / (2 * s);
            h -= g / H;
        }
        const std::vector<double> xs{x};
        REQUIRE_THAT(filter(LatentModel(p), xs).values[0], WithinAbs(h, 1e-10));
    }
}

TEST_CASE("SV forecasts decay geometrically", "[inference]")
{
    const SvParams p{0.98, 0.2, 0.01};
    const auto sim = sample_sv(p, 500, 11);
    const LatentModel m(p);
    const auto curve = forecast_curve(m, sim.x, 250);
    const double hT = filter(m, sim.x).values[0];
    REQUIRE(curve.size() == 250);
    double var = 0.0;
    for (std::size_t n = 1; n <= 250; ++n) {
        const auto& f = curve[n - 1];
        REQUIRE(f.kind == EstimateKind::forecast);
        REQUIRE(f.horizon == n);
        REQUIRE_THAT(f.values[0], WithinAbs(std::pow(p.psi, double(n)) * hT, 1e-12));
        if (n > 1) {
            REQUIRE(f.values[0] == p.psi * curve[n - 2].values[0]);
            REQUIRE(std::abs(f.values[0]) < std::abs(curve[n - 2].values[0]));
        }
        var += p.sigma_u * p.sigma_u * std::pow(p.psi, 2.0 * double(n - 1));
        REQUIRE_THAT(*f.variance, WithinRel(var, 1e-12));
    }
    REQUIRE(forecast_latent(m, sim.x, 17).values[0] == curve[16].values[0]);
}

TEST_CASE("stationary forecast with an AR(1) autocovariance reproduces psi^N", "[inference]")
{
    const SvParams p{0.9, 0.3, 1.0};
    const double v = p.stationary_variance();
    const LatentModel seam = LatentModel::stationary(
        [&](std::size_t k) { return v * std::pow(p.psi, static_cast<double>(k)); }, 3, 1.0);
    const auto sim = sample_sv(p, 150, 12);
    const LatentEstimate hs = smooth(seam, sim.x);
    const LatentEstimate ref = smooth(LatentModel(p), sim.x);
    for (std::size_t t = 0; t < 150; ++t)
        REQUIRE_THAT(hs.values[t], WithinAbs(ref.values[t], 1e-8));
    const auto curve = forecast_from_smoothed(seam, hs.values, 30);
    for (std::size_t n = 1; n <= 30; ++n) {
        REQUIRE_THAT(curve[n - 1].values[0],
                     WithinAbs(std::pow(p.psi, double(n)) * hs.values.back(), 1e-10));
        REQUIRE_THAT(*curve[n - 1].variance, WithinRel(v * (1 - std::pow(p.psi, 2.0 * double(n))), 1e-10));
    }
}

TEST_CASE("MRW one-step forecast is the Durbin-Levinson mean", "[inference]")
{
    const MrwParams p{0.33, 0.01, 512.0, 100};
    const auto sim = sample_mrw(p, 400, 13);
    const LatentModel m(p);
    const LatentEstimate h = smooth(m, sim.x);
    const LevinsonStage dl = durbin_levinson_last(mrw_autocov(p.lambda, p.R, 400), 400);
    double ref = 0.0;
    for (std::size_t j = 0; j < 400; ++j)
        ref += dl.phi[j] * h.values[399 - j];
    const LatentEstimate f = forecast_latent(m, sim.x, 1);
    REQUIRE_THAT(f.values[0], WithinAbs(ref, 1e-12));
    REQUIRE_THAT(*f.variance, WithinRel(dl.innovation_variance, 1e-12));
    REQUIRE_THROWS_AS(forecast_latent(m, sim.x, 0), std::invalid_argument);
}

TEST_CASE("sequential filtering matches per-prefix filtering", "[inference]")
{
    const MrwParams p{0.4, 0.01, 64.0, 20};
    const auto sim = sample_mrw(p, 80, 14);
    const LatentModel m(p);
    const auto seq = filter_sequence(m, sim.x, 60);
    REQUIRE(seq.size() == 21);
    for (std::size_t i = 0; i < seq.size(); i += 5) {
        const std::span<const double> prefix(sim.x.data(), 60 + i);
        REQUIRE_THAT(seq[i], WithinAbs(filter(m, prefix).values[0], 1e-7));
    }
    REQUIRE_THROWS_AS(filter_sequence(m, sim.x, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(filter_sequence(m, sim.x, 81), std::invalid_argument);
}

TEST_CASE("smoothed MRW field tracks the true field", "[inference]")
{
    const MrwParams p{0.5, 0.01, 512.0, 100};
    const auto sim = sample_mrw(p, 1024, 15);
    const LatentEstimate h = smooth(LatentModel(p), sim.x);
    REQUIRE(correlation(h.values, sim.h) > 0.5);
}

TEST_CASE("density grid and normalisation", "[inference][density]")
{
    const SvParams p{0.95, 0.25, 0.01};
    const auto sim = sample_sv(p, 300, 16);
    const DensityCurve d = conditional_return_density(LatentModel(p), sim.x, 1);
    REQUIRE(d.grid.size() == 257);
    for (std::size_t i = 0; i < d.grid.size(); ++i) {
        REQUIRE(d.grid[i] == -d.grid[d.grid.size() - 1 - i]);
        REQUIRE(d.density[i] >= 0.0);
        REQUIRE(d.density[i] == d.density[d.grid.size() - 1 - i]);
        if (i > 0)
            REQUIRE(d.grid[i] > d.grid[i - 1]);
    }
    REQUIRE_THAT(d.normalization, WithinAbs(1.0, 1e-2));
    REQUIRE_THAT(d.raw_normalization, WithinAbs(1.0, 0.1));
    REQUIRE_FALSE(d.coarse_grid);
    REQUIRE_THAT(trapezoid(d.grid, d.density), WithinAbs(1.0, 1e-12));

    DensityOptions narrow;
    narrow.grid_points = 5;
    narrow.halfwidth_sd = 0.3;
    REQUIRE(conditional_return_density(LatentModel(p), sim.x, 1, {}, narrow).coarse_grid);
    const std::vector<double> bad{0.0, 0.0, 1.0};
    REQUIRE_THROWS_AS(conditional_return_density(LatentModel(p), sim.x, 1, bad), std::invalid_argument);
}

TEST_CASE("density does not depend on the number of jobs", "[inference][density]")
{
    const MrwParams p{0.4, 0.01, 64.0, 30};
    const auto sim = sample_mrw(p, 150, 17);
    DensityOptions one, four;
    one.grid_points = four.grid_points = 65;
    four.jobs = 4;
    const auto a = conditional_return_density(LatentModel(p), sim.x, 3, {}, one);
    const auto b = conditional_return_density(LatentModel(p), sim.x, 3, {}, four);
    REQUIRE(a.density == b.density);
}

TEST_CASE("Gaussian limit of the conditional density", "[inference][density]")
{
    RandomStream rng(18);
    std::vector<double> x(200);
    for (double& v : x)
        v = 0.01 * rng.normal();
    for (const ModelParams& p : {ModelParams(SvParams{0.5, 1e-6, 0.01}),
                                 ModelParams(MrwParams{1e-4, 0.01, 64.0, 50})}) {
        const DensityCurve d = conditional_return_density(LatentModel(p), x, 1);
        double cdf = 0.0, ks = 0.0;
        for (std::size_t i = 0; i < d.grid.size(); ++i) {
            if (i > 0)
                cdf += 0.5 * (d.grid[i] - d.grid[i - 1]) * (d.density[i] + d.density[i - 1]);
            ks = std::max(ks, std::abs(cdf - normal_cdf(d.grid[i] / 0.01)));
        }
        REQUIRE(ks <= 1e-2);
    }
}

TEST_CASE("initial guess is admissible", "[inference][fit]")
{
    const auto sim = sample_mrw(MrwParams{0.33, 0.01, 512.0, 100}, 1000, 19);
    const auto mg = std::get<MrwParams>(initial_guess(ModelKind::mrw, sim.x, 100));
    REQUIRE_NOTHROW(mg.validate());
    REQUIRE(mg.tau == 100);
    REQUIRE_NOTHROW(std::get<SvParams>(initial_guess(ModelKind::sv, sim.x, 1)).validate());
    REQUIRE_THROWS_AS(initial_guess(ModelKind::sv, std::vector<double>(50, 0.0), 1),
                      std::invalid_argument);
}

TEST_CASE("fit rejects short series", "[inference][fit]")
{
    const std::vector<double> x(19, 0.01);
    REQUIRE_THROWS_AS(fit_ml(ModelKind::sv, x), std::invalid_argument);
}

TEST_CASE("fit reports the likelihood at its estimate and scales with the data", "[inference][fit]")
{
    const SvParams p{0.95, 0.3, 0.01};
    const auto sim = sample_sv(p, 600, 20);
    const FitResult a = fit_ml(ModelKind::sv, sim.x);
    REQUIRE(a.converged);
    REQUIRE(a.log_likelihood == laplace_log_likelihood(LatentModel(a.params), sim.x));
    REQUIRE_FALSE(a.trace.empty());
    REQUIRE(a.evaluations > 0);
    REQUIRE_NOTHROW(std::get<SvParams>(a.params).validate());

    std::vector<double> scaled = sim.x;
    for (double& v : scaled)
        v *= 10.0;
    const FitResult b = fit_ml(ModelKind::sv, scaled);
    const auto pa = std::get<SvParams>(a.params), pb = std::get<SvParams>(b.params);
    REQUIRE_THAT(pb.sigma, WithinRel(10.0 * pa.sigma, 1e-2));
    REQUIRE_THAT(pb.psi, WithinAbs(pa.psi, 1e-2));
    REQUIRE_THAT(pb.sigma_u, WithinRel(pa.sigma_u, 1e-2));
}

TEST_CASE("fit result does not depend on the number of jobs", "[inference][fit]")
{
    const auto sim = sample_mrw(MrwParams{0.4, 0.01, 64.0, 20}, 200, 21);
    FitOptions o;
    o.tau = 20;
    const FitResult a = fit_ml(ModelKind::mrw, sim.x, o);
    o.jobs = 3;
    const FitResult b = fit_ml(ModelKind::mrw, sim.x, o);
    REQUIRE(a.log_likelihood == b.log_likelihood);
    REQUIRE(std::get<MrwParams>(a.params).lambda == std::get<MrwParams>(b.params).lambda);
}
