#include <catch2/catch_amalgamated.hpp>

#include "mfvol/errors.hpp"
#include "mfvol/toeplitz.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace mfvol;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double rel_err(const oracle::VectorXd& a, const oracle::VectorXd& b)
{
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

} // namespace

TEST_CASE("autocovariance validation", "[toeplitz]")
{
    REQUIRE_THROWS_AS(Autocovariance(std::vector<double>{}), std::invalid_argument);
    REQUIRE_THROWS_AS(Autocovariance({-1.0, 0.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(Autocovariance({1.0, 1.5}), std::invalid_argument);
    REQUIRE_THROWS_AS(Autocovariance({1.0, NAN}), std::invalid_argument);
    REQUIRE_NOTHROW(Autocovariance({0.0, 0.0}));
    REQUIRE_THROWS_AS(mrw_autocov(0.0, 10.0, 5), std::invalid_argument);
    REQUIRE_THROWS_AS(mrw_autocov(0.3, 1.0, 5), std::invalid_argument);
}

TEST_CASE("mrw autocovariance vanishes beyond the decorrelation scale", "[toeplitz]")
{
    const Autocovariance g = mrw_autocov(0.5, 8.0, 20);
    REQUIRE_THAT(g[0], WithinRel(0.25 * std::log(8.0), 1e-15));
    REQUIRE_THAT(g[3], WithinRel(0.25 * std::log(2.0), 1e-15));
    for (std::size_t k = 7; k <= 20; ++k)
        REQUIRE(g[k] == 0.0);
}

TEST_CASE("Durbin-Levinson coefficients solve the Yule-Walker systems", "[toeplitz]")
{
    RandomStream rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t T = 2 + static_cast<std::size_t>(rng.uniform() * 60);
        const auto g = oracle::random_autocov(rng, T);
        const ToeplitzSolution s = durbin_levinson(Autocovariance(g), T);
        REQUIRE(s.phi.size() == T + 1);
        REQUIRE(s.phi[0].empty());
        REQUIRE_THAT(s.innovation_variances[0], WithinRel(g[0], 1e-15));
        for (std::size_t k = 1; k <= T; ++k) {
            const oracle::MatrixXd G = oracle::toeplitz(g, k);
            const oracle::VectorXd rhs = oracle::vec(std::vector<double>(g.begin() + 1, g.begin() + 1 + k));
            const oracle::VectorXd phi = G.partialPivLu().solve(rhs);
            REQUIRE(rel_err(oracle::vec(s.phi[k]), phi) < 1e-10);
            REQUIRE_THAT(s.innovation_variances[k], WithinRel(g[0] - rhs.dot(phi), 1e-10));
        }
    }
}

TEST_CASE("durbin_levinson_last matches the full recursion", "[toeplitz]")
{
    const Autocovariance g = mrw_autocov(0.4, 50.0, 80);
    const ToeplitzSolution s = durbin_levinson(g, 80);
    const LevinsonStage last = durbin_levinson_last(g, 80);
    REQUIRE(last.phi == s.phi[80]);
    REQUIRE(last.innovation_variance == s.innovation_variances[80]);
}

TEST_CASE("non positive definite autocovariance is rejected", "[toeplitz]")
{
    // gamma(1) = gamma(0) makes Gamma_2 singular.
    REQUIRE_THROWS_AS(durbin_levinson(Autocovariance({1.0, 1.0, 1.0}), 2), NotPositiveDefinite);
    // A valid-looking but indefinite sequence.
    REQUIRE_THROWS_AS(durbin_levinson(Autocovariance({1.0, 0.9, 0.0, -0.9}), 3),
                      NotPositiveDefinite);
    REQUIRE_THROWS_AS(durbin_levinson(Autocovariance({1.0, 0.5}), 3), std::invalid_argument);
}

TEST_CASE("Levinson solve matches dense LU", "[toeplitz]")
{
    RandomStream rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t T = 1 + static_cast<std::size_t>(rng.uniform() * 120);
        const auto g = oracle::random_autocov(rng, T);
        std::vector<std::vector<double>> rhs(3, std::vector<double>(T));
        for (auto& b : rhs)
            for (double& v : b)
                v = rng.normal();
        const auto batch = toeplitz_solve(Autocovariance(g), rhs);
        const oracle::MatrixXd G = oracle::toeplitz(g, T);
        for (std::size_t r = 0; r < rhs.size(); ++r) {
            const oracle::VectorXd ref = G.partialPivLu().solve(oracle::vec(rhs[r]));
            REQUIRE(rel_err(oracle::vec(batch[r]), ref) < 1e-9);
            const auto single = toeplitz_solve(Autocovariance(g), rhs[r]);
            REQUIRE(single == batch[r]);
        }
    }
}

TEST_CASE("Trench inverse matches dense inverse", "[toeplitz]")
{
    RandomStream rng(13);
    for (std::size_t T : {1u, 2u, 3u, 4u, 7u, 16u, 33u, 90u}) {
        const auto g = oracle::random_autocov(rng, T);
        const auto inv = toeplitz_inverse(Autocovariance(g), T);
        const oracle::MatrixXd ref = oracle::toeplitz(g, T).inverse();
        const oracle::MatrixXd got =
            Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>(inv.data(), T, T);
        REQUIRE((got - ref).norm() / ref.norm() < 1e-9);
    }
    const Autocovariance mrw = mrw_autocov(0.33, 64.0, 199);
    const auto inv = toeplitz_inverse(mrw, 200);
    const oracle::MatrixXd ref =
        oracle::toeplitz([&](std::size_t k) { return mrw[k]; }, 200).inverse();
    const oracle::MatrixXd got =
        Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>(inv.data(), 200, 200);
    REQUIRE((got - ref).norm() / ref.norm() < 1e-9);
}

TEST_CASE("forecast coefficients match the dense regression", "[toeplitz]")
{
    RandomStream rng(14);
    const std::size_t T = 40;
    const auto g = oracle::random_autocov(rng, T + 10);
    const Autocovariance gamma(g);
    const oracle::MatrixXd G = oracle::toeplitz(g, T);
    for (std::size_t N : {1u, 2u, 5u, 11u}) {
        const ForecastCoefficients fc = forecast_coefficients(gamma, T, N);
        // Covariance of (h_T, ..., h_1) with h_{T+N}.
        oracle::VectorXd c(T);
        for (std::size_t j = 0; j < T; ++j)
            c(j) = g[N + j];
        const oracle::VectorXd ref = G.partialPivLu().solve(c);
        REQUIRE(rel_err(oracle::vec(fc.phi), ref) < 1e-9);
        REQUIRE_THAT(fc.variance, WithinRel(g[0] - c.dot(ref), 1e-9));
    }
}

TEST_CASE("AR(1) autocovariance gives psi^N forecast weights", "[toeplitz]")
{
    const double psi = 0.8, var = 2.0;
    std::vector<double> g(60);
    for (std::size_t k = 0; k < g.size(); ++k)
        g[k] = var * std::pow(psi, static_cast<double>(k));
    const Autocovariance gamma(g);
    const std::size_t horizons[] = {1, 3, 7};
    const auto fcs = forecast_coefficients(gamma, 30, horizons);
    for (std::size_t i = 0; i < 3; ++i) {
        const double n = static_cast<double>(horizons[i]);
        REQUIRE_THAT(fcs[i].phi[0], WithinRel(std::pow(psi, n), 1e-12));
        for (std::size_t j = 1; j < 30; ++j)
            REQUIRE_THAT(fcs[i].phi[j], WithinAbs(0.0, 1e-12));
        REQUIRE_THAT(fcs[i].variance, WithinRel(var * (1.0 - std::pow(psi, 2.0 * n)), 1e-12));
    }
}
