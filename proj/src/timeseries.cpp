#include "cpitk/timeseries.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "cpitk/error.hpp"

namespace cpitk {

YearMonth::YearMonth(int y, int m) : year(y), month(m) {
    if (m < 1 || m > 12) {
        throw DataError("month out of range: " + std::to_string(m));
    }
}

YearMonth YearMonth::from_ordinal(int ordinal) {
    const int y = ordinal >= 0 ? ordinal / 12 : -((-ordinal + 11) / 12);
    return {y, ordinal - y * 12 + 1};
}

YearMonth YearMonth::parse(std::string_view text) {
    auto fail = [&] { return DataError("invalid month '" + std::string(text) + "', expected YYYY-MM"); };
    const auto dash = text.find('-');
    if (dash == std::string_view::npos || dash == 0 || dash + 1 >= text.size()) {
        throw fail();
    }
    int y = 0;
    int m = 0;
    const auto ys = text.substr(0, dash);
    auto ms = text.substr(dash + 1);
    // Tolerate a trailing day component (YYYY-MM-DD).
    if (const auto d2 = ms.find('-'); d2 != std::string_view::npos) {
        ms = ms.substr(0, d2);
    }
    if (std::from_chars(ys.data(), ys.data() + ys.size(), y).ec != std::errc{} ||
        std::from_chars(ms.data(), ms.data() + ms.size(), m).ec != std::errc{} || m < 1 || m > 12) {
        throw fail();
    }
    return {y, m};
}

std::string YearMonth::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
}

int YearMonth::days_in_month() const noexcept {
    static constexpr std::array<int, 12> days{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2) {
        const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
        return leap ? 29 : 28;
    }
    return days[static_cast<std::size_t>(month - 1)];
}

// ---------------------------------------------------------------------------

MonthlySeries::MonthlySeries(YearMonth start, std::vector<double> values)
    : start_(start), values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (std::isinf(values_[i])) {
            throw DataError("non-finite value at " + month_at(i).to_string());
        }
    }
}

double MonthlySeries::missing_value() noexcept { return std::numeric_limits<double>::quiet_NaN(); }

double MonthlySeries::at(YearMonth m) const {
    const auto i = index_of(m);
    if (!i) {
        throw DataError("month " + m.to_string() + " outside series " + start().to_string() + ".." +
                        end().to_string());
    }
    return values_[*i];
}

bool MonthlySeries::is_missing(std::size_t i) const { return std::isnan(values_[i]); }

bool MonthlySeries::has_missing() const {
    return std::any_of(values_.begin(), values_.end(), [](double v) { return std::isnan(v); });
}

std::size_t MonthlySeries::count_observed() const {
    return static_cast<std::size_t>(
        std::count_if(values_.begin(), values_.end(), [](double v) { return !std::isnan(v); }));
}

std::optional<std::size_t> MonthlySeries::index_of(YearMonth m) const {
    const int k = m - start_;
    if (k < 0 || k >= static_cast<int>(values_.size())) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(k);
}

MonthlySeries MonthlySeries::slice(YearMonth first, YearMonth last) const {
    const auto a = index_of(first);
    const auto b = index_of(last);
    if (!a || !b || *b < *a) {
        throw DataError("slice " + first.to_string() + ".." + last.to_string() + " outside series " +
                        start().to_string() + ".." + end().to_string());
    }
    return {first, std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(*a),
                                       values_.begin() + static_cast<std::ptrdiff_t>(*b) + 1)};
}

MonthlySeries Panel::column(std::size_t j) const {
    std::vector<double> v(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        v[static_cast<std::size_t>(i)] = data(i, static_cast<Eigen::Index>(j));
    }
    return {start, std::move(v)};
}

std::optional<std::size_t> Panel::find(std::string_view name) const {
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (names[j] == name) {
            return j;
        }
    }
    return std::nullopt;
}

Panel Panel::slice(YearMonth first, YearMonth last) const {
    const int a = first - start;
    const int b = last - start;
    if (a < 0 || b >= data.rows() || b < a) {
        throw DataError("panel slice " + first.to_string() + ".." + last.to_string() + " out of range");
    }
    return {first, names, data.middleRows(a, b - a + 1)};
}

namespace timeseries {

TransformCode transform_from_int(int code) {
    switch (code) {
        case 1: return TransformCode::Diff;
        case 2: return TransformCode::DiffLog;
        case 3: return TransformCode::Diff2Log;
        default: throw DataError("unknown transform code " + std::to_string(code));
    }
}

std::vector<double> differencing_polynomial(int d, int D, int season) {
    if (d < 0 || D < 0 || season < 1) {
        throw DataError("invalid differencing orders");
    }
    // Product polynomial with sign convention p(B) = sum_i p_i B^i, p_0 = 1.
    std::vector<double> poly{1.0};
    auto multiply = [&](int lag) {
        std::vector<double> out(poly.size() + static_cast<std::size_t>(lag), 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            out[i] += poly[i];
            out[i + static_cast<std::size_t>(lag)] -= poly[i];
        }
        poly = std::move(out);
    };
    for (int i = 0; i < d; ++i) multiply(1);
    for (int i = 0; i < D; ++i) multiply(season);
    // Return c with 1 - sum c_i B^i.
    std::vector<double> c(poly.size(), 0.0);
    for (std::size_t i = 1; i < poly.size(); ++i) c[i] = -poly[i];
    return c;
}

MonthlySeries difference(const MonthlySeries& s, int d, int D, int season) {
    const auto c = differencing_polynomial(d, D, season);
    const std::size_t order = c.size() - 1;
    if (s.size() <= order) {
        throw DataError("series of length " + std::to_string(s.size()) + " too short for differencing order " +
                        std::to_string(order));
    }
    if (s.has_missing()) {
        throw DataError("differencing encountered missing values");
    }
    std::vector<double> out(s.size() - order);
    for (std::size_t t = order; t < s.size(); ++t) {
        double v = s[t];
        for (std::size_t i = 1; i <= order; ++i) v -= c[i] * s[t - i];
        out[t - order] = v;
    }
    return {s.start() + static_cast<int>(order), std::move(out)};
}

std::vector<double> sample_acf(std::span<const double> x, int max_lag) {
    const auto n = x.size();
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double c0 = 0.0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    std::vector<double> acf(static_cast<std::size_t>(max_lag) + 1, 0.0);
    if (c0 <= 0.0) {
        acf[0] = 1.0;
        return acf;
    }
    for (int k = 0; k <= max_lag; ++k) {
        double ck = 0.0;
        for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t) {
            ck += (x[t] - mean) * (x[t - static_cast<std::size_t>(k)] - mean);
        }
        acf[static_cast<std::size_t>(k)] = ck / c0;
    }
    return acf;
}

std::vector<double> pacf_from_acf(std::span<const double> acf) {
    const std::size_t m = acf.size() - 1;
    std::vector<double> pacf(acf.size(), 0.0);
    pacf[0] = 1.0;
    if (m == 0) return pacf;
    std::vector<double> phi(m + 1, 0.0);
    std::vector<double> prev(m + 1, 0.0);
    double v = 1.0;
    for (std::size_t k = 1; k <= m; ++k) {
        double num = acf[k];
        for (std::size_t j = 1; j < k; ++j) num -= prev[j] * acf[k - j];
        const double r = v > 0.0 ? num / v : 0.0;
        phi[k] = r;
        for (std::size_t j = 1; j < k; ++j) phi[j] = prev[j] - r * prev[k - j];
        v *= (1.0 - r * r);
        pacf[k] = r;
        prev = phi;
    }
    return pacf;
}

Correlogram acf_pacf(const MonthlySeries& s, int max_lag) {
    if (s.has_missing()) throw DataError("acf_pacf: missing values");
    if (max_lag < 1 || static_cast<std::size_t>(max_lag) >= s.size()) {
        throw DataError("acf_pacf: max_lag " + std::to_string(max_lag) + " out of range for length " +
                        std::to_string(s.size()));
    }
    Correlogram out;
    out.acf = sample_acf(s.values(), max_lag);
    out.pacf = pacf_from_acf(out.acf);
    out.conf_band = 1.96 / std::sqrt(static_cast<double>(s.size()));
    return out;
}

int schwert_lag(std::size_t n) {
    return static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

namespace {

// Dickey-Fuller tau_tau quantiles (constant + trend), rows = sample sizes,
// columns = probabilities.
constexpr std::array<double, 6> kAdfSizes{25, 50, 100, 250, 500, 100000};
constexpr std::array<double, 8> kAdfProbs{0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99};
constexpr std::array<std::array<double, 8>, 6> kAdfQuantiles{{
    {-4.38, -3.95, -3.60, -3.24, -1.14, -0.80, -0.50, -0.15},
    {-4.15, -3.80, -3.50, -3.18, -1.19, -0.87, -0.58, -0.24},
    {-4.04, -3.73, -3.45, -3.15, -1.22, -0.90, -0.62, -0.28},
    {-3.99, -3.69, -3.43, -3.13, -1.23, -0.92, -0.64, -0.31},
    {-3.98, -3.68, -3.42, -3.13, -1.24, -0.93, -0.65, -0.32},
    {-3.96, -3.66, -3.41, -3.12, -1.25, -0.94, -0.66, -0.33},
}};

double interpolate_clamped(std::span<const double> xs, std::span<const double> ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const auto i = static_cast<std::size_t>(it - xs.begin());
    const double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return ys[i - 1] + w * (ys[i] - ys[i - 1]);
}

double adf_p_value(double stat, double n) {
    std::array<double, 8> q{};
    for (std::size_t j = 0; j < kAdfProbs.size(); ++j) {
        std::array<double, 6> col{};
        for (std::size_t i = 0; i < kAdfSizes.size(); ++i) col[i] = kAdfQuantiles[i][j];
        q[j] = interpolate_clamped(kAdfSizes, col, n);
    }
    return interpolate_clamped(q, kAdfProbs, stat);
}

}  // namespace

namespace {

struct AdfFit {
    double statistic = 0.0;
    double rss = 0.0;
    int rows = 0;
    int cols = 0;
};

// Regression of dy_t on (1, t, y_{t-1}, dy_{t-1..t-k}) for dy indices first..end.
AdfFit adf_regression(const MonthlySeries& s, const std::vector<double>& dy, int k, int first) {
    const int n_diff = static_cast<int>(dy.size());
    AdfFit f;
    f.rows = n_diff - first;
    f.cols = 3 + k;
    Eigen::MatrixXd X(f.rows, f.cols);
    Eigen::VectorXd y(f.rows);
    for (int r = 0; r < f.rows; ++r) {
        const int t = r + first;
        y(r) = dy[static_cast<std::size_t>(t)];
        X(r, 0) = 1.0;
        X(r, 1) = static_cast<double>(t + 1);
        X(r, 2) = s[static_cast<std::size_t>(t)];
        for (int j = 1; j <= k; ++j) X(r, 2 + j) = dy[static_cast<std::size_t>(t - j)];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < f.cols) throw NumericalError("adf_test: degenerate regression (constant series?)");
    const Eigen::VectorXd beta = qr.solve(y);
    f.rss = (y - X * beta).squaredNorm();
    const double s2 = f.rss / static_cast<double>(f.rows - f.cols);
    if (!(s2 > 1e-300)) throw NumericalError("adf_test: degenerate regression (zero residual variance)");
    const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
    f.statistic = beta(2) / std::sqrt(s2 * xtx_inv(2, 2));
    return f;
}

}  // namespace

AdfResult adf_test(const MonthlySeries& s, AdfLagPolicy policy) {
    if (s.has_missing()) throw DataError("adf_test: missing values");
    const int n_total = static_cast<int>(s.size());
    const int k_max = policy.fixed ? *policy.fixed : schwert_lag(s.size());
    if (k_max < 0) throw DataError("adf_test: negative lag order");
    const int n_diff = n_total - 1;
    if (n_diff - k_max < 3 + k_max + 5) {
        throw DataError("adf_test: series of length " + std::to_string(n_total) + " too short for " +
                        std::to_string(k_max) + " lags");
    }
    std::vector<double> dy(static_cast<std::size_t>(n_diff));
    for (int t = 0; t < n_diff; ++t) dy[static_cast<std::size_t>(t)] = s[static_cast<std::size_t>(t) + 1] - s[static_cast<std::size_t>(t)];

    int k = k_max;
    if (!policy.fixed) {
        // AIC over 0..k_max on the common sample that the largest order allows.
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j <= k_max; ++j) {
            const auto f = adf_regression(s, dy, j, k_max);
            const double aic = f.rows * std::log(f.rss / f.rows) + 2.0 * f.cols;
            if (aic < best) {
                best = aic;
                k = j;
            }
        }
    }
    const auto f = adf_regression(s, dy, k, k);
    AdfResult out;
    out.statistic = f.statistic;
    out.p_value = adf_p_value(out.statistic, static_cast<double>(n_diff));
    out.lags = k;
    out.n_obs = f.rows;
    return out;
}

MonthlySeries apply_transform(const MonthlySeries& s, TransformCode code) {
    const bool log = code != TransformCode::Diff;
    const int order = code == TransformCode::Diff2Log ? 2 : 1;
    if (s.size() <= static_cast<std::size_t>(order)) {
        throw DataError("apply_transform: series too short");
    }
    std::vector<double> z(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double v = s[i];
        if (std::isnan(v)) {
            z[i] = v;
        } else if (log) {
            if (v <= 0.0) {
                throw DataError("apply_transform: non-positive value " + std::to_string(v) + " at " +
                                s.month_at(i).to_string() + " under a log code");
            }
            z[i] = std::log(v);
        } else {
            z[i] = v;
        }
    }
    for (int pass = 0; pass < order; ++pass) {
        std::vector<double> next(z.size() - 1);
        for (std::size_t i = 1; i < z.size(); ++i) next[i - 1] = z[i] - z[i - 1];  // NaN propagates
        z = std::move(next);
    }
    return {s.start() + order, std::move(z)};
}

double sample_sd(std::span<const double> x) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : x) {
        if (!std::isnan(v)) {
            sum += v;
            ++n;
        }
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) {
        if (!std::isnan(v)) ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / static_cast<double>(n - 1));
}

Standardized standardize(const Eigen::MatrixXd& x) {
    Standardized out{x, Eigen::VectorXd(x.cols()), Eigen::VectorXd(x.cols())};
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double sum = 0.0;
        int n = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (!std::isnan(x(i, j))) {
                sum += x(i, j);
                ++n;
            }
        }
        if (n < 2) throw DataError("standardize: column " + std::to_string(j) + " has fewer than 2 observations");
        const double mean = sum / n;
        double ss = 0.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (!std::isnan(x(i, j))) ss += (x(i, j) - mean) * (x(i, j) - mean);
        }
        const double sd = std::sqrt(ss / (n - 1));
        if (!(sd > 0.0)) throw DataError("standardize: column " + std::to_string(j) + " has zero variance");
        out.means(j) = mean;
        out.sds(j) = sd;
        for (Eigen::Index i = 0; i < x.rows(); ++i) out.z(i, j) = (x(i, j) - mean) / sd;
    }
    return out;
}

Eigen::MatrixXd unstandardize(const Standardized& s) {
    Eigen::MatrixXd x = s.z;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        x.col(j) = (x.col(j).array() * s.sds(j) + s.means(j)).matrix();
    }
    return x;
}

}  // namespace timeseries
}  // namespace cpitk
