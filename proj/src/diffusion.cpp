#include "cpitk/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "cpitk/error.hpp"
#include "cpitk/io.hpp"

namespace cpitk::diffusion {

double FactorModel::variance_share(int j) const {
    const double total = eigenvalues.sum();
    return total > 0.0 ? eigenvalues(j) / total : 0.0;
}

FactorModel pca_factors(const Eigen::MatrixXd& z, int r) {
    const auto T = z.rows();
    const auto n = z.cols();
    if (T == 0 || n == 0) throw DataError("pca: empty matrix");
    if (!z.allFinite()) throw DataError("pca: matrix has missing cells");
    if (r < 1 || r > std::min(T, n)) throw DataError("pca: factor count out of range");

    const Eigen::MatrixXd m = z.transpose() * z / static_cast<double>(T);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw NumericalError("pca: eigendecomposition failed");
    const Eigen::VectorXd ev = es.eigenvalues().reverse();
    const Eigen::MatrixXd vec = es.eigenvectors().rowwise().reverse();

    FactorModel f;
    f.eigenvalues = ev.cwiseMax(0.0);
    const double top = std::max(f.eigenvalues(0), 0.0);
    int rank = 0;
    while (rank < n && f.eigenvalues(rank) > 1e-12 * top && top > 0.0) ++rank;
    if (rank == 0) throw DataError("pca: matrix is zero");
    if (rank < r) {
        r = rank;
        f.truncated = true;
    }
    f.r = r;
    f.loadings = std::sqrt(static_cast<double>(n)) * vec.leftCols(r);
    for (int j = 0; j < r; ++j) {
        Eigen::Index at = 0;
        f.loadings.col(j).cwiseAbs().maxCoeff(&at);
        if (f.loadings(at, j) < 0.0) f.loadings.col(j) *= -1.0;
    }
    f.factors = z * f.loadings / static_cast<double>(n);
    f.means = Eigen::VectorXd::Zero(n);
    f.sds = Eigen::VectorXd::Ones(n);
    return f;
}

EmResult em_impute(const Eigen::MatrixXd& z, int r, const EmOptions& options) {
    const auto T = z.rows();
    const auto n = z.cols();
    std::vector<std::pair<Eigen::Index, Eigen::Index>> missing;
    for (Eigen::Index j = 0; j < n; ++j) {
        int observed = 0;
        for (Eigen::Index i = 0; i < T; ++i) {
            if (std::isnan(z(i, j))) {
                missing.emplace_back(i, j);
            } else {
                ++observed;
            }
        }
        if (observed < 2) throw DataError("em: column " + std::to_string(j) + " has fewer than 2 observed cells");
    }

    EmResult out;
    out.completed = z;
    for (const auto& [i, j] : missing) out.completed(i, j) = 0.0;

    auto observed_error = [&](const Eigen::MatrixXd& recon) {
        double ss = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < T; ++i)
                if (!std::isnan(z(i, j))) ss += std::pow(z(i, j) - recon(i, j), 2);
        return std::sqrt(ss);
    };

    if (missing.empty()) {
        out.model = pca_factors(z, r);
        out.observed_error.push_back(observed_error(out.model.reconstruction()));
        return out;
    }

    out.converged = false;
    for (int it = 1; it <= options.max_iterations; ++it) {
        const auto model = pca_factors(out.completed, r);
        const Eigen::MatrixXd recon = model.reconstruction();
        out.observed_error.push_back(observed_error(recon));
        double change = 0.0;
        double norm = 0.0;
        for (const auto& [i, j] : missing) {
            change += std::pow(recon(i, j) - out.completed(i, j), 2);
            norm += recon(i, j) * recon(i, j);
            out.completed(i, j) = recon(i, j);
        }
        out.iterations = it;
        if (std::sqrt(change) <= options.tolerance * std::max(std::sqrt(norm), 1e-300)) {
            out.converged = true;
            break;
        }
    }
    out.model = pca_factors(out.completed, r);
    return out;
}

Target make_target(const MonthlySeries& sa, int h) {
    if (h < 1) throw DataError("target horizon must be >= 1");
    if (sa.size() <= static_cast<std::size_t>(h) + 1) throw DataError("series too short for the target horizon");
    std::vector<double> ls(sa.size());
    for (std::size_t t = 0; t < sa.size(); ++t) {
        if (!(sa[t] > 0.0)) throw DataError("adjusted CPI must be positive (" + sa.month_at(t).to_string() + ")");
        ls[t] = std::log(sa[t]);
    }
    std::vector<double> y(sa.size() - 1);
    for (std::size_t t = 1; t < sa.size(); ++t) y[t - 1] = 1200.0 * (ls[t] - ls[t - 1]);
    const auto hs = static_cast<std::size_t>(h);
    std::vector<double> yh(sa.size() - 1 - hs);
    for (std::size_t t = 1; t + hs < sa.size(); ++t) {
        yh[t - 1] = 1200.0 / h * (ls[t + hs] - ls[t]) - y[t - 1];
    }
    return {MonthlySeries(sa.start() + 1, y), MonthlySeries(sa.start() + 1 + h, yh)};
}

double sa_forecast(double sa_t0, double sa_t0_minus_1, double yh, int h) {
    if (!(sa_t0 > 0.0) || !(sa_t0_minus_1 > 0.0)) throw DataError("adjusted CPI must be positive");
    return std::exp(h * yh / 1200.0 + (h + 1) * std::log(sa_t0) - h * std::log(sa_t0_minus_1));
}

CpiForecast reconstruct_cpi(double sa_t0, double sa_t0_minus_1, double yh, int h, double seasonal, double sf_effect,
                            seasadj::Mode mode) {
    CpiForecast f;
    f.sa = sa_forecast(sa_t0, sa_t0_minus_1, yh, h);
    if (mode == seasadj::Mode::Additive) {
        f.cpi = f.sa + seasonal + sf_effect;
    } else {
        if (sf_effect != 0.0) throw DataError("multiplicative reconstruction takes no SF effect");
        if (!(seasonal > 0.0)) throw DataError("multiplicative seasonal factor must be positive");
        f.cpi = f.sa * seasonal;
    }
    return f;
}

DiResult di_forecast(const MonthlySeries& y, const MonthlySeries& yh, const Eigen::MatrixXd& factors,
                     YearMonth factor_start, YearMonth t0, int h, const DiGrid& grid) {
    if (grid.max_k < 1 || grid.max_k > 5) throw DataError("max_k must be in 1..5");
    if (grid.max_k > factors.cols()) throw DataError("fewer factors than max_k");
    if (grid.max_p < 1 || grid.max_m < 1) throw DataError("lag bounds must be >= 1");
    const YearMonth f_end = factor_start + (static_cast<int>(factors.rows()) - 1);
    if (!y.range().contains(t0) || t0 > f_end) throw DataError("DI inputs do not reach the forecast origin");

    const YearMonth lo = std::max({y.start() + (grid.max_p - 1), factor_start + (grid.max_m - 1), yh.start() - h});
    const YearMonth hi = t0 - h;
    const int n = hi - lo + 1;
    if (n < 1 || t0 - (grid.max_p - 1) < y.start() || t0 - (grid.max_m - 1) < factor_start) {
        throw DataError("insufficient DI training rows");
    }

    Eigen::VectorXd target(n);
    for (int i = 0; i < n; ++i) {
        target(i) = yh.at(lo + i + h);
        if (!std::isfinite(target(i)) || !std::isfinite(y.at(lo + i))) throw DataError("DI inputs have missing values");
    }
    const double mean = target.mean();
    const double tss = (target.array() - mean).square().sum();

    auto row = [&](YearMonth t, int k, int p, int m) {
        Eigen::RowVectorXd x(1 + p + k * m);
        x(0) = 1.0;
        int c = 1;
        for (int j = 0; j < p; ++j) x(c++) = y.at(t - j);
        for (int j = 0; j < m; ++j) {
            const int fr = (t - j) - factor_start;
            for (int a = 0; a < k; ++a) x(c++) = factors(fr, a);
        }
        return x;
    };

    DiResult best;
    best.tuning.max_k = grid.max_k;
    best.tuning.n_obs = n;
    double best_bic = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= grid.max_k; ++k) {
        for (int p = 1; p <= grid.max_p; ++p) {
            for (int m = 1; m <= grid.max_m; ++m) {
                const int np = 1 + p + k * m;
                if (n - np < grid.min_dof) continue;
                Eigen::MatrixXd x(n, np);
                for (int i = 0; i < n; ++i) x.row(i) = row(lo + i, k, p, m);
                const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
                if (qr.rank() < np) continue;
                const Eigen::VectorXd b = qr.solve(target);
                const double rss = (target - x * b).squaredNorm();
                const double bic = n * (std::log(2.0 * std::numbers::pi * rss / n) + 1.0) + std::log(n) * np;
                best.tuning.candidates.push_back({k, p, m, bic});
                if (bic < best_bic) {
                    best_bic = bic;
                    best.tuning.k = k;
                    best.tuning.p = p;
                    best.tuning.m = m;
                    best.coefficients = b;
                    best.residual_sd = std::sqrt(rss / n);
                    best.r2 = tss > 0.0 ? 1.0 - rss / tss : 0.0;
                }
            }
        }
    }
    if (best.tuning.candidates.empty()) throw DataError("insufficient DI training rows for any candidate");
    const Eigen::RowVectorXd x0 = row(t0, best.tuning.k, best.tuning.p, best.tuning.m);
    best.yh_hat = x0.dot(best.coefficients);
    return best;
}

PanelFactors panel_factors(const Panel& covariates, const std::vector<timeseries::TransformCode>& codes, int r,
                           const EmOptions& em) {
    const auto n = static_cast<std::size_t>(covariates.data.cols());
    if (codes.size() != n) throw DataError("one transform code per covariate is required");
    if (covariates.data.rows() < 4) throw DataError("covariate panel too short");
    PanelFactors out;
    out.start = covariates.start + 2;
    out.names = covariates.names;
    const auto rows = covariates.data.rows() - 2;
    Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        const auto t = timeseries::apply_transform(covariates.column(j), codes[j]);
        for (Eigen::Index i = 0; i < rows; ++i) x(i, static_cast<Eigen::Index>(j)) = t.at(out.start + static_cast<int>(i));
    }
    const auto st = timeseries::standardize(x);
    auto res = em_impute(st.z, r, em);
    out.model = std::move(res.model);
    out.model.means = st.means;
    out.model.sds = st.sds;
    return out;
}

DiPrediction di_predict(const backtest::DataAccessor& data, MonthRange window, int h, const DiConfig& config) {
    using seasadj::Mode;
    const YearMonth o = window.last;
    const auto raw = data.target(window.first, window.last);

    DiPrediction out;
    MonthlySeries sa;
    if (config.mode == Mode::Multiplicative && config.use_official_adjusted && data.has_adjusted()) {
        sa = data.adjusted(window.first, window.last);
        const auto s = seasadj::seasonality_from_adjusted(raw, sa);
        out.seasonal = seasadj::forecast_seasonality(s, config.seasonal_spec, h, true).back();
    } else {
        MonthlySeries effect(raw.start(), std::vector<double>(raw.size(), 0.0));
        if (config.sf_spec) {
            if (config.mode == Mode::Multiplicative) throw DataError("SF removal is only supported in additive mode");
            const auto spec = sarimax::restrict_regressors(*config.sf_spec, window, config.table);
            sarimax::FitOptions fo;
            fo.compute_std_errors = false;
            const auto m = sarimax::fit(raw, spec, fo);
            effect = seasadj::remove_sf(raw, m, config.table).effect;
            const auto future = sarimax::extend_regressors(m.spec, {o + 1, o + h}, config.table);
            for (std::size_t j = 0; j < future.size(); ++j) {
                if (future[j].is_sf()) out.sf_effect += m.beta[j] * future[j].values.back();
            }
        }
        const auto d = seasadj::decompose(raw, effect, config.mode);
        sa = d.adjusted;
        out.seasonal =
            seasadj::forecast_seasonality(d.seasonal, config.seasonal_spec, h, config.mode == Mode::Multiplicative)
                .back();
    }

    const auto target = make_target(sa, h);
    const auto pf = panel_factors(data.covariates(window.first, window.last), config.transforms, config.grid.max_k,
                                  config.em);
    if (pf.model.r < config.grid.max_k) throw NumericalError("covariate panel has fewer factors than max_k");
    out.di = di_forecast(target.y, target.yh, pf.model.factors, pf.start, o, h, config.grid);
    const auto rec = reconstruct_cpi(sa.at(o), sa.at(o - 1), out.di.yh_hat, h, out.seasonal, out.sf_effect, config.mode);
    out.sa = rec.sa;
    out.cpi = rec.cpi;
    out.factors = pf.model;
    return out;
}

namespace {

class DiTrained final : public backtest::TrainedModel {
public:
    explicit DiTrained(const DiConfig* config) : config_(config) {}

    // Everything is re-estimated at the forecast origin, so the refit
    // stride has no effect on this engine.
    std::vector<double> forecast(const backtest::DataAccessor& data, MonthRange window,
                                 const std::vector<int>& horizons) const override {
        std::vector<double> out;
        for (int h : horizons) out.push_back(di_predict(data, window, h, *config_).cpi);
        return out;
    }

private:
    const DiConfig* config_;
};

}  // namespace

DiForecaster::DiForecaster(DiConfig config) : config_(std::move(config)) {}

std::unique_ptr<backtest::TrainedModel> DiForecaster::train(const backtest::DataAccessor&, MonthRange) const {
    return std::make_unique<DiTrained>(&config_);
}

void write_loadings_csv(std::ostream& out, const std::vector<std::string>& names, const FactorModel& m) {
    if (static_cast<Eigen::Index>(names.size()) != m.loadings.rows()) throw DataError("loadings: name count mismatch");
    out << "covariate";
    for (int j = 0; j < m.r; ++j) out << ",factor" << j + 1;
    out << '\n';
    for (std::size_t i = 0; i < names.size(); ++i) {
        out << names[i];
        for (int j = 0; j < m.r; ++j) out << ',' << io::format_double(m.loadings(static_cast<Eigen::Index>(i), j));
        out << '\n';
    }
    out << "variance_share";
    for (int j = 0; j < m.r; ++j) out << ',' << io::format_double(m.variance_share(j));
    out << "\ncumulative_share";
    double c = 0.0;
    for (int j = 0; j < m.r; ++j) out << ',' << io::format_double(c += m.variance_share(j));
    out << '\n';
}

}  // namespace cpitk::diffusion
