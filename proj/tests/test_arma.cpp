#include <catch_amalgamated.hpp>

#include <random>

#include "cpitk/arma.hpp"
#include "cpitk/optimizer.hpp"
#include "oracles.hpp"

using namespace cpitk;
using Catch::Approx;

TEST_CASE("pacf <-> AR coefficients round trip", "[arma]") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.95, 0.95);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> r(static_cast<std::size_t>(1 + rep % 4));
        for (auto& v : r) v = u(rng);
        const auto phi = arma::pacf_to_ar(r);
        CHECK(arma::min_root_modulus_ar(phi) > 1.0);
        std::vector<double> back;
        REQUIRE(arma::ar_to_pacf(phi, back));
        for (std::size_t i = 0; i < r.size(); ++i) CHECK(back[i] == Approx(r[i]).margin(1e-10));
    }
    std::vector<double> tmp;
    CHECK_FALSE(arma::ar_to_pacf(std::vector<double>{1.2}, tmp));
    CHECK_FALSE(arma::ar_to_pacf(std::vector<double>{0.5, 0.6}, tmp));
}

TEST_CASE("root moduli", "[arma]") {
    CHECK(arma::min_root_modulus_ar(std::vector<double>{0.5}) == Approx(2.0));
    CHECK(arma::min_root_modulus_ma(std::vector<double>{-0.25}) == Approx(4.0));
    CHECK(std::isinf(arma::min_root_modulus_ar(std::vector<double>{})));
}

TEST_CASE("multiplicative expansion matches polynomial product", "[arma]") {
    const std::vector<double> ar{0.4, -0.2}, sar{0.3}, ma{0.5}, sma{-0.6, 0.1};
    const auto poly = arma::expand(ar, sar, ma, sma, 12);
    const auto ref = oracle::make_arma(ar, sar, ma, sma);
    REQUIRE(poly.ar.size() + 1 == ref.ar_full.size());
    for (std::size_t i = 0; i < poly.ar.size(); ++i) CHECK(poly.ar[i] == Approx(-ref.ar_full[i + 1]).margin(1e-15));
    REQUIRE(poly.ma.size() + 1 == ref.ma_full.size());
    for (std::size_t i = 0; i < poly.ma.size(); ++i) CHECK(poly.ma[i] == Approx(ref.ma_full[i + 1]).margin(1e-15));
}

TEST_CASE("psi weights match long division", "[arma]") {
    const auto poly = arma::expand(std::vector<double>{0.6}, std::vector<double>{0.2}, std::vector<double>{0.3},
                                   std::vector<double>{}, 12);
    const auto ref = oracle::make_arma({0.6}, {0.2}, {0.3}, {});
    const auto psi = arma::psi_weights(poly, 40);
    const auto psi_ref = oracle::long_division(ref.ma_full, ref.ar_full, 40);
    for (std::size_t j = 0; j < 40; ++j) CHECK(psi[j] == Approx(psi_ref[j]).margin(1e-13));
}

TEST_CASE("stationary initial covariance solves the Lyapunov equation", "[arma]") {
    const auto poly = arma::expand(std::vector<double>{0.5, 0.2}, std::vector<double>{0.4}, std::vector<double>{0.3},
                                   std::vector<double>{-0.5}, 12);
    const arma::KalmanFilter kf(poly);
    REQUIRE(kf.stationary());
    const auto& P = kf.initial_cov();
    const auto ref = oracle::make_arma({0.5, 0.2}, {0.4}, {0.3}, {-0.5});
    // P(0,0) is the process variance.
    const auto g = oracle::autocovariance(ref, 1.0, 2);
    CHECK(P(0, 0) == Approx(g[0]).epsilon(1e-9));
    const Eigen::MatrixXd TP = kf.transition(P);
    const Eigen::MatrixXd TPT = kf.transition(TP.transpose());
    const Eigen::Index r = kf.state_dim();
    Eigen::VectorXd R = Eigen::VectorXd::Zero(r);
    R(0) = 1.0;
    for (std::size_t j = 0; j < poly.ma.size(); ++j) R(static_cast<Eigen::Index>(j) + 1) = poly.ma[j];
    const Eigen::MatrixXd resid = TPT + R * R.transpose() - P;
    CHECK(resid.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("autocovariances match truncated psi-weight sums", "[arma]") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    for (int rep = 0; rep < 20; ++rep) {
        const std::vector<double> ar{u(rng)}, sar{0.5 * u(rng)}, ma{u(rng), 0.3 * u(rng)}, sma{u(rng)};
        const auto poly = arma::expand(ar, sar, ma, sma, 12);
        const auto g = arma::autocovariances(poly, 30);
        const auto ref = oracle::autocovariance(oracle::make_arma(ar, sar, ma, sma), 1.0, 30);
        for (std::size_t k = 0; k <= 30; ++k) CHECK(g[k] == Approx(ref[k]).epsilon(1e-9).margin(1e-12));
    }
}

TEST_CASE("non-stationary AR is flagged", "[arma]") {
    const arma::KalmanFilter kf(arma::ArmaPolynomials{{1.0}, {}});
    CHECK_FALSE(kf.stationary());
}

TEST_CASE("BFGS minimizes a quadratic and the Rosenbrock function", "[optimizer]") {
    const optim::Objective quad = [](const Eigen::VectorXd& x) {
        return (x(0) - 1.0) * (x(0) - 1.0) + 10.0 * (x(1) + 2.0) * (x(1) + 2.0);
    };
    const auto r = optim::minimize_bfgs(quad, Eigen::Vector2d(0.0, 0.0));
    CHECK(r.converged);
    CHECK(r.x(0) == Approx(1.0).margin(1e-5));
    CHECK(r.x(1) == Approx(-2.0).margin(1e-5));

    const optim::Objective rosen = [](const Eigen::VectorXd& x) {
        return 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2);
    };
    optim::BfgsOptions opt;
    opt.max_iterations = 500;
    const auto rr = optim::minimize_bfgs(rosen, Eigen::Vector2d(-1.2, 1.0), opt);
    CHECK(rr.x(0) == Approx(1.0).margin(1e-3));
    CHECK(rr.x(1) == Approx(1.0).margin(2e-3));

    const auto H = optim::numerical_hessian(quad, Eigen::Vector2d(1.0, -2.0), 1e-4);
    CHECK(H(0, 0) == Approx(2.0).epsilon(1e-5));
    CHECK(H(1, 1) == Approx(20.0).epsilon(1e-5));
    CHECK(H(0, 1) == Approx(0.0).margin(1e-4));
}
