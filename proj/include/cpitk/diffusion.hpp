#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpitk/backtest.hpp"
#include "cpitk/calendar.hpp"
#include "cpitk/sarimax.hpp"
#include "cpitk/seasadj.hpp"
#include "cpitk/timeseries.hpp"

namespace cpitk::diffusion {

/// Principal components with the Stock-Watson normalization: loadings
/// Lambda = sqrt(n) V_r (so Lambda' Lambda / n = I) and factors
/// F = Z Lambda / n, hence Z ~ F Lambda'. Eigenvalues are those of the
/// uncentered second moment Z'Z / T. Each loading column is signed so its
/// largest-magnitude entry is positive.
struct FactorModel {
    Eigen::MatrixXd loadings;     // n x r
    Eigen::MatrixXd factors;      // T x r
    Eigen::VectorXd eigenvalues;  // all n, descending
    Eigen::VectorXd means;        // standardization used upstream (0 when none)
    Eigen::VectorXd sds;          // (1 when none)
    int r = 0;
    bool truncated = false;       // fewer than the requested factors were identified

    [[nodiscard]] Eigen::MatrixXd reconstruction() const { return factors * loadings.transpose(); }
    /// eigenvalue_j / sum of eigenvalues.
    [[nodiscard]] double variance_share(int j) const;
};

/// Factors of a complete T x n matrix. Throws DataError on missing cells or
/// r outside 1..min(T, n).
[[nodiscard]] FactorModel pca_factors(const Eigen::MatrixXd& z, int r);

struct EmOptions {
    double tolerance = 1e-6;  // relative change of the filled cells
    int max_iterations = 200;
};

struct EmResult {
    Eigen::MatrixXd completed;
    FactorModel model;
    int iterations = 0;
    bool converged = true;
    /// Frobenius norm of Z - F Lambda' on observed cells, per iteration.
    std::vector<double> observed_error;
};

/// Fills NaN cells by alternating r-factor PCA and reconstruction, starting
/// from zero. Observed cells are never modified.
[[nodiscard]] EmResult em_impute(const Eigen::MatrixXd& z, int r, const EmOptions& options = {});

struct Target {
    MonthlySeries y;   // 1200 ln(sa_t / sa_{t-1}), from start+1
    MonthlySeries yh;  // indexed by t+h: (1200/h) ln(sa_{t+h}/sa_t) - y_t
};

[[nodiscard]] Target make_target(const MonthlySeries& sa, int h);

/// sa_{t0+h} = exp(h yh / 1200) sa_{t0}^{h+1} / sa_{t0-1}^h, evaluated in logs.
[[nodiscard]] double sa_forecast(double sa_t0, double sa_t0_minus_1, double yh, int h);

struct CpiForecast {
    double sa = 0.0;
    double cpi = 0.0;
};

/// Additive: CPI = sa + S + H. Multiplicative: CPI = sa * S, with H = 0.
[[nodiscard]] CpiForecast reconstruct_cpi(double sa_t0, double sa_t0_minus_1, double yh, int h, double seasonal,
                                          double sf_effect, seasadj::Mode mode);

struct DiGrid {
    int max_k = 1;  // 1..5
    int max_p = 6;
    int max_m = 6;
    /// Candidates with fewer residual degrees of freedom are skipped.
    int min_dof = 10;
};

struct DiCandidate {
    int k = 0;
    int p = 0;
    int m = 0;
    double bic = 0.0;
};

struct DiTuning {
    int max_k = 1;
    int k = 0;
    int p = 0;
    int m = 0;
    int n_obs = 0;
    std::vector<DiCandidate> candidates;  // feasible ones, in (k, p, m) order
};

struct DiResult {
    double yh_hat = 0.0;
    DiTuning tuning;
    Eigen::VectorXd coefficients;  // alpha, gamma_0..p-1, then beta per lag j: factors 1..k
    double residual_sd = 0.0;      // sqrt(RSS / n)
    double r2 = 0.0;
};

/// Fits yh_{t+h} = alpha + sum_{j<p} gamma_j y_{t-j} + sum_{j<m} beta_j' f_{t-j}
/// for every (k, p, m) on a common sample of t <= t0 - h (rows usable by the
/// largest lags), selects by BIC with variance divisor n, and forecasts at t0.
/// `factors` row i is month factor_start + i.
[[nodiscard]] DiResult di_forecast(const MonthlySeries& y, const MonthlySeries& yh, const Eigen::MatrixXd& factors,
                                   YearMonth factor_start, YearMonth t0, int h, const DiGrid& grid);

/// Pipeline settings for DI forecasts of raw CPI.
struct DiConfig {
    DiGrid grid;
    EmOptions em;
    /// One per covariate column.
    std::vector<timeseries::TransformCode> transforms;
    seasadj::Mode mode = seasadj::Mode::Additive;
    /// S-ARIMAX with SF regressors used to estimate and remove the SF
    /// effect; nullopt skips SF handling.
    std::optional<sarimax::SarimaSpec> sf_spec;
    sarimax::SarimaSpec seasonal_spec = seasadj::default_seasonality_spec();
    calendar::LunarTable table;
    /// In multiplicative mode with an official adjusted series, S = CPI / saCPI.
    bool use_official_adjusted = true;
};

struct DiPrediction {
    double cpi = 0.0;
    double sa = 0.0;
    double seasonal = 0.0;
    double sf_effect = 0.0;
    DiResult di;
    FactorModel factors;
};

/// Seasonal adjustment, factor extraction, DI regression and reconstruction
/// for target month window.last + h, reading only months in `window`.
[[nodiscard]] DiPrediction di_predict(const backtest::DataAccessor& data, MonthRange window, int h,
                                      const DiConfig& config);

/// Factors of the transformed, standardized covariates over `window`
/// (rows start two months after window.first).
struct PanelFactors {
    YearMonth start;
    FactorModel model;
    std::vector<std::string> names;
};
[[nodiscard]] PanelFactors panel_factors(const Panel& covariates, const std::vector<timeseries::TransformCode>& codes,
                                         int r, const EmOptions& em = {});

/// Backtest engine running di_predict at every origin.
class DiForecaster final : public backtest::Forecaster {
public:
    explicit DiForecaster(DiConfig config);
    [[nodiscard]] std::string name() const override { return "di"; }
    [[nodiscard]] std::unique_ptr<backtest::TrainedModel> train(const backtest::DataAccessor& data,
                                                                MonthRange window) const override;

private:
    DiConfig config_;
};

/// `covariate,factor1..factorK` then `variance_share` and `cumulative_share` rows.
void write_loadings_csv(std::ostream& out, const std::vector<std::string>& names, const FactorModel& m);

}  // namespace cpitk::diffusion
