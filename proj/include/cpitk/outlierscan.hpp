#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cpitk/sarimax.hpp"

namespace cpitk::outlierscan {

enum class OutlierType { AO, IO, LS, TC };

[[nodiscard]] std::string type_name(OutlierType t);
[[nodiscard]] OutlierType type_from_name(const std::string& name);

struct OutlierFinding {
    YearMonth month;
    OutlierType type = OutlierType::AO;
    double omega = 0.0;
    double t_stat = 0.0;
};

struct DetectOptions {
    double critical = 3.5;
    double tc_delta = 0.8;
    /// Upper bound on findings per scan.
    int max_findings = 20;
};

/// Filtered-regression outlier test against a fitted model. Residuals come
/// from the pi-filter of the regressor-adjusted differenced series with zero
/// pre-sample values. Each month keeps its largest |t| type; the strongest
/// finding is removed from the residuals before the next pass, so one event
/// is not reported again at neighbouring months.
/// Findings are sorted by |t| descending (ties by month).
[[nodiscard]] std::vector<OutlierFinding> detect(const MonthlySeries& series, const sarimax::FittedModel& model,
                                                 const DetectOptions& options = {});

/// Test regressor of `type` at `month`, in the filtered residual domain.
[[nodiscard]] std::vector<double> filtered_regressor(const sarimax::FittedModel& model, OutlierType type,
                                                     YearMonth month, double tc_delta = 0.8);

/// Filtered residuals e_t used by detect (length n_effective).
[[nodiscard]] std::vector<double> filtered_residuals(const MonthlySeries& series, const sarimax::FittedModel& model);

/// Regressor column implementing a finding on `range`.
[[nodiscard]] calendar::RegressorColumn finding_column(const OutlierFinding& f, MonthRange range,
                                                       double tc_delta = 0.8);

struct IterativeResult {
    sarimax::FittedModel model;
    std::vector<OutlierFinding> findings;  // cumulative, in order of discovery
    int rounds = 0;
    bool round_limit_reached = false;
};

/// Alternates detect and refit, adding findings as AO/LS/TC mean regressors
/// or IO innovation pulses, until no new month is flagged or `max_rounds`.
[[nodiscard]] IterativeResult detect_iterative(const MonthlySeries& series, const sarimax::SarimaSpec& spec,
                                               const DetectOptions& options = {}, int max_rounds = 10,
                                               const sarimax::FitOptions& fit_options = {});

struct OutlierCensus {
    YearMonth start;
    std::vector<int> counts;  // per month: models with a finding at that month
    int models = 0;
    int total = 0;            // sum of counts
    double share_january = 0.0;
    double share_february = 0.0;
    double share_other = 0.0;
    std::vector<std::vector<OutlierFinding>> per_model;
};

/// Counts, per month, the models of `models` that flag that month.
[[nodiscard]] OutlierCensus census(const MonthlySeries& series, const std::vector<sarimax::FittedModel>& models,
                                   const DetectOptions& options = {}, int threads = 1);

/// `date,type,omega,t_stat`
void write_findings_csv(std::ostream& out, const std::vector<OutlierFinding>& findings);
/// `date,count`
void write_census_csv(std::ostream& out, const OutlierCensus& c);

}  // namespace cpitk::outlierscan
