#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpitk/calendar.hpp"
#include "cpitk/optimizer.hpp"
#include "cpitk/timeseries.hpp"

namespace cpitk::sarimax {

using calendar::RegressorColumn;

/// Regression with multiplicative seasonal ARIMA errors:
///   phi(B) Phi(B^s) (1-B)^d (1-B^s)^D (y_t - x_t' beta) = theta(B) Theta(B^s) (a_t + sum_j omega_j P_t^(j))
/// AR factors use 1 - sum c_i B^i, MA factors 1 + sum c_i B^i.
struct SarimaSpec {
    int p = 0;
    int d = 1;
    int q = 0;
    int P = 0;
    int D = 1;
    int Q = 0;
    int season = 12;
    /// SF and AO/LS/TC columns, differenced together with the series.
    std::vector<RegressorColumn> mean_regressors;
    /// IO pulses entering the disturbance.
    std::vector<RegressorColumn> innovation_pulses;

    [[nodiscard]] int arma_count() const noexcept { return p + q + P + Q; }
    [[nodiscard]] int differencing_order() const noexcept { return d + D * season; }
    /// "(p,d,q)x(P,D,Q)s"
    [[nodiscard]] std::string orders_string() const;
};

struct ArmaCoefficients {
    std::vector<double> ar;   // phi_1..phi_p
    std::vector<double> sar;  // Phi_1..Phi_P
    std::vector<double> ma;   // theta_1..theta_q
    std::vector<double> sma;  // Theta_1..Theta_Q

    [[nodiscard]] std::vector<double> flatten() const;
    [[nodiscard]] static ArmaCoefficients unflatten(const SarimaSpec& spec, const std::vector<double>& v);
};

struct ModelParams {
    ArmaCoefficients arma;
    std::vector<double> beta;  // one per mean regressor
    std::vector<double> io;    // one per innovation pulse
    double sigma2 = 1.0;
};

struct FitOptions {
    int max_restarts = 3;
    std::uint64_t seed = 20020101;
    optim::BfgsOptions bfgs{};
    /// Warm start for the ARMA coefficients.
    std::optional<ArmaCoefficients> start;
    bool compute_std_errors = true;
};

struct FittedModel {
    SarimaSpec spec;
    MonthlySeries series;  // training data
    ArmaCoefficients arma;
    std::vector<double> beta;
    std::vector<double> io;
    /// Regressors with an all-zero differenced column inside the sample get
    /// coefficient 0 and are flagged inactive.
    std::vector<bool> beta_active;
    std::vector<bool> io_active;
    double sigma = 0.0;   // MLE of sigma_a
    double loglik = 0.0;  // exact Gaussian log-likelihood of the differenced data
    std::vector<double> residuals;   // standardized innovations scaled by sigma, length n_effective
    std::vector<double> std_errors;  // ar, sar, ma, sma, beta, io
    int n_effective = 0;
    bool converged = false;
    int iterations = 0;
    int restarts = 0;

    [[nodiscard]] ModelParams params() const;
    /// ARMA coefficients + active regressor coefficients.
    [[nodiscard]] int parameter_count() const;
};

/// Gaussian MLE. Throws NumericalError on non-convergence after restarts,
/// ill-conditioned regressors or an inadmissible optimum; DataError when
/// the series is too short or has missing values.
[[nodiscard]] FittedModel fit(const MonthlySeries& series, const SarimaSpec& spec, const FitOptions& options = {});

/// Exact Gaussian log-likelihood of the differenced, regressor-adjusted series.
[[nodiscard]] double loglik(const MonthlySeries& series, const SarimaSpec& spec, const ModelParams& params);

/// Profile log-likelihood with beta, omega and sigma^2 concentrated out.
struct ProfileResult {
    double loglik = 0.0;
    double sigma2 = 0.0;
    std::vector<double> beta;
    std::vector<double> io;
};
[[nodiscard]] ProfileResult profile_loglik(const MonthlySeries& series, const SarimaSpec& spec,
                                           const ArmaCoefficients& arma);

/// One-step-ahead in-sample predictions of the undifferenced series for
/// months start+d+Ds .. end.
[[nodiscard]] std::vector<double> one_step_predictions(const MonthlySeries& series, const SarimaSpec& spec,
                                                       const ModelParams& params);

struct Forecast {
    std::vector<double> point;
    std::vector<double> se;
};

/// `future_regressors` holds one column per mean regressor (same order),
/// each covering the h months after the training sample.
[[nodiscard]] Forecast forecast(const FittedModel& model, int h, const std::vector<RegressorColumn>& future_regressors);

/// Future regressor values regenerated from their shapes and `table`.
[[nodiscard]] Forecast forecast(const FittedModel& model, int h, const calendar::LunarTable& table);

/// Regenerates every mean regressor of `spec` over `range`.
[[nodiscard]] std::vector<RegressorColumn> extend_regressors(const SarimaSpec& spec, MonthRange range,
                                                             const calendar::LunarTable& table);

/// Draws T months starting at `start`. Mean regressors and innovation pulses
/// must cover the output range.
[[nodiscard]] MonthlySeries simulate(const SarimaSpec& spec, const ModelParams& params, int T, std::uint64_t seed,
                                     YearMonth start = YearMonth{2002, 1});

/// Spec with every regressor restricted (or regenerated) to `range`.
[[nodiscard]] SarimaSpec restrict_regressors(const SarimaSpec& spec, MonthRange range,
                                             const calendar::LunarTable& table);

/// JSON document with spec, coefficients, sigma, log-likelihood, regressor
/// metadata and the training series.
[[nodiscard]] std::string to_json(const FittedModel& model);
[[nodiscard]] FittedModel from_json(const std::string& text);

}  // namespace cpitk::sarimax
