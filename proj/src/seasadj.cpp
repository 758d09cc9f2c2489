#include "cpitk/seasadj.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include "cpitk/error.hpp"
#include "cpitk/io.hpp"

namespace cpitk::seasadj {

std::string mode_name(Mode m) { return m == Mode::Additive ? "additive" : "multiplicative"; }

Mode mode_from_name(const std::string& name) {
    if (name == "additive") return Mode::Additive;
    if (name == "multiplicative") return Mode::Multiplicative;
    throw DataError("unknown seasonal adjustment mode '" + name + "'");
}

SfRemoval remove_sf(const MonthlySeries& series, const sarimax::FittedModel& model, const calendar::LunarTable& table) {
    std::vector<double> h(series.size(), 0.0);
    bool any = false;
    for (std::size_t j = 0; j < model.spec.mean_regressors.size(); ++j) {
        const auto& c = model.spec.mean_regressors[j];
        if (!c.is_sf()) continue;
        any = true;
        const auto col = calendar::regenerate(c, series.range(), table);
        for (std::size_t t = 0; t < h.size(); ++t) h[t] += model.beta[j] * col.values[t];
    }
    if (!any) throw DataError("model has no SF regressors");
    std::vector<double> z(series.size());
    for (std::size_t t = 0; t < z.size(); ++t) z[t] = series[t] - h[t];
    return {MonthlySeries(series.start(), z), MonthlySeries(series.start(), h)};
}

namespace {

void check_input(const MonthlySeries& z, Mode mode) {
    if (z.size() < 36) throw DataError("decomposition needs at least 36 months");
    for (double v : z.values()) {
        if (!std::isfinite(v)) throw DataError("decomposition input has missing values");
        if (mode == Mode::Multiplicative && v <= 0.0) {
            throw DataError("multiplicative decomposition needs positive values");
        }
    }
}

}  // namespace

Decomposition decompose(const MonthlySeries& raw, const MonthlySeries& sf_effect, Mode mode) {
    if (raw.start() != sf_effect.start() || raw.size() != sf_effect.size()) {
        throw DataError("SF effect must cover the raw series");
    }
    const std::size_t n = raw.size();
    std::vector<double> z(n);
    for (std::size_t t = 0; t < n; ++t) z[t] = raw[t] - sf_effect[t];
    const MonthlySeries zs(raw.start(), z);
    check_input(zs, mode);
    const bool mult = mode == Mode::Multiplicative;

    // Centered 2x12 moving average on t = 6 .. n-7.
    std::vector<double> trend(n);
    for (std::size_t t = 6; t + 6 < n; ++t) {
        double s = 0.5 * (z[t - 6] + z[t + 6]);
        for (std::size_t k = t - 5; k <= t + 5; ++k) s += z[k];
        trend[t] = s / 12.0;
    }
    for (std::size_t t = 0; t < 6; ++t) trend[t] = trend[6];
    for (std::size_t t = n - 6; t < n; ++t) trend[t] = trend[n - 7];

    // Mean detrended value per calendar month over the computable span.
    std::array<double, 12> sum{};
    std::array<int, 12> cnt{};
    for (std::size_t t = 6; t + 6 < n; ++t) {
        const int m = raw.month_at(t).month - 1;
        sum[m] += mult ? z[t] / trend[t] : z[t] - trend[t];
        ++cnt[m];
    }
    std::array<double, 12> factor{};
    double mean = 0.0;
    for (int m = 0; m < 12; ++m) {
        factor[m] = sum[m] / cnt[m];
        mean += factor[m] / 12.0;
    }
    for (auto& f : factor) f = mult ? f / mean : f - mean;

    Decomposition d;
    d.mode = mode;
    d.raw = raw;
    d.sf_effect = sf_effect;
    std::vector<double> s(n), irr(n), adj(n);
    for (std::size_t t = 0; t < n; ++t) {
        s[t] = factor[static_cast<std::size_t>(raw.month_at(t).month - 1)];
        if (mult && !(s[t] > 0.0)) throw NumericalError("non-positive multiplicative seasonal factor");
        irr[t] = mult ? z[t] / (trend[t] * s[t]) : z[t] - trend[t] - s[t];
        adj[t] = mult ? z[t] / s[t] : z[t] - s[t];
    }
    d.trend = MonthlySeries(raw.start(), trend);
    d.seasonal = MonthlySeries(raw.start(), s);
    d.irregular = MonthlySeries(raw.start(), irr);
    d.adjusted = MonthlySeries(raw.start(), adj);
    return d;
}

Decomposition decompose(const MonthlySeries& series, Mode mode) {
    return decompose(series, MonthlySeries(series.start(), std::vector<double>(series.size(), 0.0)), mode);
}

MonthlySeries seasonality_from_adjusted(const MonthlySeries& raw, const MonthlySeries& adjusted) {
    const MonthRange r{std::max(raw.start(), adjusted.start()), std::min(raw.end(), adjusted.end())};
    if (r.last < r.first) throw DataError("raw and adjusted series do not overlap");
    std::vector<double> s;
    for (YearMonth m = r.first; m <= r.last; ++m) {
        const double a = adjusted.at(m);
        if (!(a > 0.0)) throw DataError("adjusted series must be positive");
        s.push_back(raw.at(m) / a);
    }
    return {r.first, s};
}

sarimax::SarimaSpec default_seasonality_spec() {
    sarimax::SarimaSpec s;
    s.d = 0;
    s.q = 1;
    s.D = 1;
    s.Q = 1;
    return s;
}

std::vector<double> forecast_seasonality(const MonthlySeries& seasonal, const sarimax::SarimaSpec& spec, int h,
                                         bool log_scale, const sarimax::FitOptions& options) {
    if (h < 1) throw DataError("forecast horizon must be >= 1");
    if (!spec.mean_regressors.empty() || !spec.innovation_pulses.empty()) {
        throw DataError("seasonality model takes no regressors");
    }
    std::vector<double> v(seasonal.values().begin(), seasonal.values().end());
    for (double& x : v) {
        if (!std::isfinite(x)) throw DataError("seasonal series has missing values");
        if (log_scale) {
            if (!(x > 0.0)) throw DataError("log seasonality needs positive factors");
            x = std::log(x);
        }
    }
    const int s = spec.season;
    if (v.size() < static_cast<std::size_t>(s)) throw DataError("seasonal series shorter than one period");

    double scale = 0.0;
    double diff = 0.0;
    for (std::size_t t = 0; t < v.size(); ++t) {
        scale = std::max(scale, std::abs(v[t]));
        if (t >= static_cast<std::size_t>(s)) diff = std::max(diff, std::abs(v[t] - v[t - static_cast<std::size_t>(s)]));
    }
    std::vector<double> out(static_cast<std::size_t>(h));
    if (diff <= 1e-12 * std::max(scale, 1.0)) {
        for (int k = 0; k < h; ++k) {
            out[static_cast<std::size_t>(k)] = v[v.size() - static_cast<std::size_t>(s) + static_cast<std::size_t>(k % s)];
        }
    } else {
        const auto m = sarimax::fit(MonthlySeries(seasonal.start(), v), spec, options);
        out = sarimax::forecast(m, h, std::vector<calendar::RegressorColumn>{}).point;
    }
    if (log_scale) {
        for (double& x : out) x = std::exp(x);
    }
    return out;
}

void write_decomposition_csv(std::ostream& out, const Decomposition& d) {
    out << "date,raw,sf_effect,trend,seasonal,irregular,adjusted\n";
    for (std::size_t t = 0; t < d.raw.size(); ++t) {
        out << d.raw.month_at(t).to_string() << ',' << io::format_double(d.raw[t]) << ','
            << io::format_double(d.sf_effect[t]) << ',' << io::format_double(d.trend[t]) << ','
            << io::format_double(d.seasonal[t]) << ',' << io::format_double(d.irregular[t]) << ','
            << io::format_double(d.adjusted[t]) << '\n';
    }
}

}  // namespace cpitk::seasadj
