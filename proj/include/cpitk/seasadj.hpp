#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cpitk/calendar.hpp"
#include "cpitk/sarimax.hpp"
#include "cpitk/timeseries.hpp"

namespace cpitk::seasadj {

enum class Mode { Additive, Multiplicative };

[[nodiscard]] std::string mode_name(Mode m);
[[nodiscard]] Mode mode_from_name(const std::string& name);

/// Additive:       Z - H = T + S + I,  adjusted = Z - H - S
/// Multiplicative: Z - H = T * S * I,  adjusted = (Z - H) / S
struct Decomposition {
    Mode mode = Mode::Additive;
    MonthlySeries raw;        // Z
    MonthlySeries sf_effect;  // H, zero when no SF model was used
    MonthlySeries trend;
    MonthlySeries seasonal;
    MonthlySeries irregular;
    MonthlySeries adjusted;
};

struct SfRemoval {
    MonthlySeries adjusted;  // Z - H
    MonthlySeries effect;    // H = sum_i beta_i H_i
};

/// Fitted SF effect over the series' range. Throws DataError when the
/// model has no SF regressors or the ranges differ.
[[nodiscard]] SfRemoval remove_sf(const MonthlySeries& series, const sarimax::FittedModel& model,
                                  const calendar::LunarTable& table);

/// Classical decomposition. The trend is the centered 2x12 moving average,
/// extended over the first and last six months by repeating the nearest
/// computable value. Seasonal factors are constant per calendar month: the
/// mean of the detrended values where the trend is computable, normalized to
/// sum 0 (additive) or mean 1 (multiplicative) over the twelve months.
/// Requires at least 36 months; multiplicative mode requires positive values.
[[nodiscard]] Decomposition decompose(const MonthlySeries& series, Mode mode);

/// Decomposes raw - sf_effect and reports adjusted = raw - sf_effect - S
/// (or divided by S).
[[nodiscard]] Decomposition decompose(const MonthlySeries& raw, const MonthlySeries& sf_effect, Mode mode);

/// S_t = raw_t / adjusted_t, for series with an official adjusted version.
[[nodiscard]] MonthlySeries seasonality_from_adjusted(const MonthlySeries& raw, const MonthlySeries& adjusted);

/// (0,0,1)x(0,1,1)_12 with no regressors.
[[nodiscard]] sarimax::SarimaSpec default_seasonality_spec();

/// h-step forecasts of S. With `log_scale` the model is fit to log S and the
/// forecasts are exponentiated. A seasonal factor sequence that is exactly
/// periodic is continued periodically, since its seasonal difference is zero
/// and no likelihood exists.
[[nodiscard]] std::vector<double> forecast_seasonality(const MonthlySeries& seasonal, const sarimax::SarimaSpec& spec,
                                                       int h, bool log_scale = false,
                                                       const sarimax::FitOptions& options = {});

/// `date,raw,sf_effect,trend,seasonal,irregular,adjusted`
void write_decomposition_csv(std::ostream& out, const Decomposition& d);

}  // namespace cpitk::seasadj
