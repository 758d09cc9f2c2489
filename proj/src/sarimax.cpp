#include "cpitk/sarimax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "cpitk/arma.hpp"
#include "cpitk/error.hpp"
#include "json.hpp"

namespace cpitk::sarimax {

using calendar::RegressorKind;

std::string SarimaSpec::orders_string() const {
    return "(" + std::to_string(p) + "," + std::to_string(d) + "," + std::to_string(q) + ")x(" + std::to_string(P) +
           "," + std::to_string(D) + "," + std::to_string(Q) + ")" + std::to_string(season);
}

std::vector<double> ArmaCoefficients::flatten() const {
    std::vector<double> v;
    v.insert(v.end(), ar.begin(), ar.end());
    v.insert(v.end(), sar.begin(), sar.end());
    v.insert(v.end(), ma.begin(), ma.end());
    v.insert(v.end(), sma.begin(), sma.end());
    return v;
}

ArmaCoefficients ArmaCoefficients::unflatten(const SarimaSpec& spec, const std::vector<double>& v) {
    if (static_cast<int>(v.size()) != spec.arma_count()) throw DataError("ARMA coefficient count mismatch");
    ArmaCoefficients c;
    auto it = v.begin();
    auto take = [&](int k) {
        std::vector<double> out(it, it + k);
        it += k;
        return out;
    };
    c.ar = take(spec.p);
    c.sar = take(spec.P);
    c.ma = take(spec.q);
    c.sma = take(spec.Q);
    return c;
}

ModelParams FittedModel::params() const { return {arma, beta, io, sigma * sigma}; }

int FittedModel::parameter_count() const {
    return spec.arma_count() + static_cast<int>(std::count(beta_active.begin(), beta_active.end(), true)) +
           static_cast<int>(std::count(io_active.begin(), io_active.end(), true));
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kActiveTolerance = 1e-12;
constexpr double kSpanTolerance = 1e-8;

bool admissible(const ArmaCoefficients& c) {
    std::vector<double> tmp;
    auto neg = [](const std::vector<double>& v) {
        std::vector<double> out(v);
        for (auto& x : out) x = -x;
        return out;
    };
    return arma::ar_to_pacf(c.ar, tmp) && arma::ar_to_pacf(c.sar, tmp) && arma::ar_to_pacf(neg(c.ma), tmp) &&
           arma::ar_to_pacf(neg(c.sma), tmp);
}

arma::ArmaPolynomials expand(const ArmaCoefficients& c, int season) {
    return arma::expand(c.ar, c.sar, c.ma, c.sma, season);
}

// Unconstrained <-> admissible coefficients via partial autocorrelations.
constexpr double kMaxRaw = 10.0;

std::vector<double> block_from_raw(const double* x, int k, bool ma) {
    std::vector<double> r(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) r[static_cast<std::size_t>(i)] = std::tanh(std::clamp(x[i], -kMaxRaw, kMaxRaw));
    auto c = arma::pacf_to_ar(r);
    if (ma) {
        for (auto& v : c) v = -v;
    }
    return c;
}

ArmaCoefficients from_raw(const SarimaSpec& s, const Eigen::VectorXd& x) {
    ArmaCoefficients c;
    const double* p = x.data();
    c.ar = block_from_raw(p, s.p, false);
    p += s.p;
    c.sar = block_from_raw(p, s.P, false);
    p += s.P;
    c.ma = block_from_raw(p, s.q, true);
    p += s.q;
    c.sma = block_from_raw(p, s.Q, true);
    return c;
}

Eigen::VectorXd to_raw(const SarimaSpec& s, const ArmaCoefficients& c) {
    Eigen::VectorXd x(s.arma_count());
    Eigen::Index k = 0;
    auto push = [&](const std::vector<double>& coef, bool ma) {
        std::vector<double> v(coef);
        if (ma) {
            for (auto& e : v) e = -e;
        }
        std::vector<double> r;
        if (!arma::ar_to_pacf(v, r)) throw DataError("starting coefficients are not admissible");
        for (double e : r) x(k++) = std::atanh(std::clamp(e, -0.999, 0.999));
    };
    push(c.ar, false);
    push(c.sar, false);
    push(c.ma, true);
    push(c.sma, true);
    return x;
}

void check_orders(const SarimaSpec& s) {
    if (s.p < 0 || s.d < 0 || s.q < 0 || s.P < 0 || s.D < 0 || s.Q < 0 || s.season < 1) {
        throw DataError("invalid model orders " + s.orders_string());
    }
}

void check_coefficient_sizes(const SarimaSpec& s, const ArmaCoefficients& c) {
    if (static_cast<int>(c.ar.size()) != s.p || static_cast<int>(c.sar.size()) != s.P ||
        static_cast<int>(c.ma.size()) != s.q || static_cast<int>(c.sma.size()) != s.Q) {
        throw DataError("ARMA coefficient dimensions do not match " + s.orders_string());
    }
}

std::vector<double> column_over(const RegressorColumn& col, const MonthlySeries& series) {
    std::vector<double> v(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) v[t] = col.at(series.month_at(t));
    return v;
}

std::vector<double> apply_difference(const std::vector<double>& x, const std::vector<double>& c) {
    const std::size_t order = c.size() - 1;
    std::vector<double> out(x.size() - order);
    for (std::size_t t = order; t < x.size(); ++t) {
        double v = x[t];
        for (std::size_t i = 1; i <= order; ++i) v -= c[i] * x[t - i];
        out[t - order] = v;
    }
    return out;
}

// Differenced data and regressors for one (series, spec) pair.
class Problem {
public:
    Problem(const MonthlySeries& series, const SarimaSpec& spec) : spec_(spec) {
        check_orders(spec);
        if (series.has_missing()) throw DataError("series contains missing values");
        diff_ = timeseries::differencing_polynomial(spec.d, spec.D, spec.season);
        order_ = static_cast<int>(diff_.size()) - 1;
        if (static_cast<int>(series.size()) <= order_ + 1) {
            throw DataError("series of length " + std::to_string(series.size()) + " too short for " +
                            spec.orders_string());
        }
        n_ = static_cast<int>(series.size()) - order_;
        const auto w = apply_difference({series.values().begin(), series.values().end()}, diff_);
        w_ = Eigen::Map<const Eigen::VectorXd>(w.data(), n_);

        xd_all_.resize(n_, static_cast<Eigen::Index>(spec.mean_regressors.size()));
        std::vector<Eigen::VectorXd> basis;
        for (std::size_t j = 0; j < spec.mean_regressors.size(); ++j) {
            const auto xd = apply_difference(column_over(spec.mean_regressors[j], series), diff_);
            const auto col = Eigen::Map<const Eigen::VectorXd>(xd.data(), n_);
            xd_all_.col(static_cast<Eigen::Index>(j)) = col;
            // A column with no support in the sample, or one spanned by the
            // columns kept before it, is left out (beta fixed at zero).
            Eigen::VectorXd resid = col;
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto& q : basis) resid -= q.dot(resid) * q;
            }
            const double scale = col.norm();
            const bool active = col.cwiseAbs().maxCoeff() > kActiveTolerance && resid.norm() > kSpanTolerance * scale;
            beta_active_.push_back(active);
            if (active) {
                beta_index_.push_back(static_cast<int>(j));
                basis.push_back(resid / resid.norm());
            }
        }
        for (std::size_t j = 0; j < spec.innovation_pulses.size(); ++j) {
            const auto& pulse = spec.innovation_pulses[j];
            if (pulse.kind != RegressorKind::IOPulse) throw DataError("innovation pulses must be IO columns");
            const int pos = (pulse.anchor - series.start()) - order_;
            io_pos_all_.push_back(pos);
            const bool active = pos >= 0 && pos < n_;
            io_active_.push_back(active);
            if (active) io_index_.push_back(static_cast<int>(j));
        }
        xd_.resize(n_, static_cast<Eigen::Index>(beta_index_.size()));
        for (std::size_t k = 0; k < beta_index_.size(); ++k) {
            xd_.col(static_cast<Eigen::Index>(k)) = xd_all_.col(beta_index_[k]);
        }
    }

    struct Eval {
        bool ok = false;
        double loglik = -std::numeric_limits<double>::infinity();
        double sigma2 = 0.0;
        Eigen::VectorXd coef;  // active beta then active io
        Eigen::VectorXd resid;
        Eigen::MatrixXd design;  // whitened regressors
        arma::KalmanFilter::Output filter;
        arma::ArmaPolynomials poly;
        bool rank_deficient = false;
    };

    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] int order() const noexcept { return order_; }
    [[nodiscard]] int k_beta() const noexcept { return static_cast<int>(beta_index_.size()); }
    [[nodiscard]] int k_io() const noexcept { return static_cast<int>(io_index_.size()); }
    [[nodiscard]] const std::vector<double>& diff() const noexcept { return diff_; }
    [[nodiscard]] const Eigen::VectorXd& w() const noexcept { return w_; }
    [[nodiscard]] const Eigen::MatrixXd& xd_all() const noexcept { return xd_all_; }
    [[nodiscard]] const std::vector<int>& beta_index() const noexcept { return beta_index_; }
    [[nodiscard]] const std::vector<int>& io_index() const noexcept { return io_index_; }
    [[nodiscard]] const std::vector<int>& io_pos_all() const noexcept { return io_pos_all_; }
    [[nodiscard]] const std::vector<bool>& beta_active() const noexcept { return beta_active_; }
    [[nodiscard]] const std::vector<bool>& io_active() const noexcept { return io_active_; }

    // IO effect in the differenced domain: psi-weights from the pulse position.
    [[nodiscard]] Eigen::VectorXd io_column(const std::vector<double>& psi, int pos, int length) const {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(length);
        for (int t = std::max(pos, 0); t < length; ++t) c(t) = psi[static_cast<std::size_t>(t - pos)];
        return c;
    }

    [[nodiscard]] Eval evaluate(const ArmaCoefficients& c) const {
        Eval e;
        e.poly = expand(c, spec_.season);
        const arma::KalmanFilter kf(e.poly);
        if (!kf.stationary()) return e;
        const int kb = k_beta();
        const int ki = k_io();
        Eigen::MatrixXd y(n_, 1 + kb + ki);
        y.col(0) = w_;
        if (kb > 0) y.middleCols(1, kb) = xd_;
        if (ki > 0) {
            const auto psi = arma::psi_weights(e.poly, static_cast<std::size_t>(n_));
            for (int k = 0; k < ki; ++k) {
                y.col(1 + kb + k) = io_column(psi, io_pos_all_[static_cast<std::size_t>(io_index_[static_cast<std::size_t>(k)])], n_);
            }
        }
        e.filter = kf.run(y);
        if (!std::isfinite(e.filter.sum_log_f)) return e;
        const Eigen::VectorXd yt = e.filter.standardized.col(0);
        const int k = kb + ki;
        if (k > 0) {
            e.design = e.filter.standardized.rightCols(k);
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(e.design);
            qr.setThreshold(1e-10);
            if (qr.rank() < k) {
                e.rank_deficient = true;
                return e;
            }
            e.coef = qr.solve(yt);
            e.resid = yt - e.design * e.coef;
        } else {
            e.coef.resize(0);
            e.resid = yt;
        }
        const double rss = e.resid.squaredNorm();
        e.sigma2 = rss / n_;
        if (!(e.sigma2 > 0.0) || !std::isfinite(e.sigma2)) return e;
        e.loglik = -0.5 * n_ * (kLog2Pi + std::log(e.sigma2) + 1.0) - 0.5 * e.filter.sum_log_f;
        e.ok = std::isfinite(e.loglik);
        return e;
    }

    // Residual series z = w - X beta - IO omega, all regressors (active or not).
    [[nodiscard]] Eigen::VectorXd adjusted(const ModelParams& params, const arma::ArmaPolynomials& poly) const {
        if (params.beta.size() != spec_.mean_regressors.size() || params.io.size() != spec_.innovation_pulses.size()) {
            throw DataError("regressor coefficient count mismatch");
        }
        Eigen::VectorXd z = w_;
        for (std::size_t j = 0; j < params.beta.size(); ++j) z -= params.beta[j] * xd_all_.col(static_cast<Eigen::Index>(j));
        if (!params.io.empty()) {
            const auto psi = arma::psi_weights(poly, static_cast<std::size_t>(n_));
            for (std::size_t j = 0; j < params.io.size(); ++j) {
                if (io_active_[j]) z -= params.io[j] * io_column(psi, io_pos_all_[j], n_);
            }
        }
        return z;
    }

private:
    SarimaSpec spec_;
    std::vector<double> diff_;
    int order_ = 0;
    int n_ = 0;
    Eigen::VectorXd w_;
    Eigen::MatrixXd xd_all_;
    Eigen::MatrixXd xd_;
    std::vector<int> beta_index_;
    std::vector<int> io_index_;
    std::vector<int> io_pos_all_;
    std::vector<bool> beta_active_;
    std::vector<bool> io_active_;
};

void scatter_coefficients(const Problem& prob, const Eigen::VectorXd& coef, std::size_t n_beta, std::size_t n_io,
                          std::vector<double>& beta, std::vector<double>& io) {
    beta.assign(n_beta, 0.0);
    io.assign(n_io, 0.0);
    Eigen::Index k = 0;
    for (int j : prob.beta_index()) beta[static_cast<std::size_t>(j)] = coef(k++);
    for (int j : prob.io_index()) io[static_cast<std::size_t>(j)] = coef(k++);
}

}  // namespace

ProfileResult profile_loglik(const MonthlySeries& series, const SarimaSpec& spec, const ArmaCoefficients& arma) {
    check_coefficient_sizes(spec, arma);
    if (!admissible(arma)) throw NumericalError("ARMA polynomial roots inside the unit circle");
    const Problem prob(series, spec);
    const auto e = prob.evaluate(arma);
    if (e.rank_deficient) throw NumericalError("ill-conditioned regressor matrix");
    if (!e.ok) throw NumericalError("likelihood evaluation failed");
    ProfileResult out;
    out.loglik = e.loglik;
    out.sigma2 = e.sigma2;
    scatter_coefficients(prob, e.coef, spec.mean_regressors.size(), spec.innovation_pulses.size(), out.beta, out.io);
    return out;
}

double loglik(const MonthlySeries& series, const SarimaSpec& spec, const ModelParams& params) {
    check_coefficient_sizes(spec, params.arma);
    if (!admissible(params.arma)) throw NumericalError("ARMA polynomial roots inside the unit circle");
    if (!(params.sigma2 > 0.0)) throw DataError("sigma2 must be positive");
    const Problem prob(series, spec);
    const auto poly = expand(params.arma, spec.season);
    const arma::KalmanFilter kf(poly);
    if (!kf.stationary()) throw NumericalError("ARMA polynomial roots inside the unit circle");
    const Eigen::VectorXd z = prob.adjusted(params, poly);
    const auto out = kf.run(z);
    const double n = prob.n();
    return -0.5 * n * (kLog2Pi + std::log(params.sigma2)) - 0.5 * out.sum_log_f -
           0.5 * out.standardized.col(0).squaredNorm() / params.sigma2;
}

std::vector<double> one_step_predictions(const MonthlySeries& series, const SarimaSpec& spec, const ModelParams& params) {
    check_coefficient_sizes(spec, params.arma);
    const Problem prob(series, spec);
    const auto poly = expand(params.arma, spec.season);
    const arma::KalmanFilter kf(poly);
    if (!kf.stationary()) throw NumericalError("ARMA polynomial roots inside the unit circle");
    const Eigen::VectorXd z = prob.adjusted(params, poly);
    const auto out = kf.run(z);
    const auto& c = prob.diff();
    const int order = prob.order();
    std::vector<double> pred(static_cast<std::size_t>(prob.n()));
    for (int t = 0; t < prob.n(); ++t) {
        const double w_hat = prob.w()(t) - out.standardized(t, 0) * std::sqrt(out.f(t));
        double y_hat = w_hat;
        const std::size_t tt = static_cast<std::size_t>(t + order);
        for (std::size_t i = 1; i < c.size(); ++i) y_hat += c[i] * series[tt - i];
        pred[static_cast<std::size_t>(t)] = y_hat;
    }
    return pred;
}

FittedModel fit(const MonthlySeries& series, const SarimaSpec& spec, const FitOptions& options) {
    const Problem prob(series, spec);
    const int n_arma = spec.arma_count();
    const int n_params = n_arma + prob.k_beta() + prob.k_io();
    if (prob.n() < n_params + 5) {
        throw DataError("effective sample of " + std::to_string(prob.n()) + " months too short for " +
                        std::to_string(n_params) + " parameters");
    }

    bool rank_problem = false;
    auto objective = [&](const Eigen::VectorXd& x) {
        const auto e = prob.evaluate(from_raw(spec, x));
        if (e.rank_deficient) rank_problem = true;
        return e.ok ? -e.loglik / prob.n() : std::numeric_limits<double>::infinity();
    };

    Eigen::VectorXd x0 = options.start ? to_raw(spec, *options.start) : Eigen::VectorXd::Zero(n_arma);
    if (!std::isfinite(objective(x0))) {
        if (rank_problem) throw NumericalError("ill-conditioned regressor matrix");
        x0.setZero();
        if (!std::isfinite(objective(x0))) throw NumericalError("likelihood undefined at the starting point");
    }

    auto best = optim::minimize_bfgs(objective, x0, options.bfgs);
    int restarts = 0;
    int iterations = best.iterations;
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    while (!best.converged && restarts < options.max_restarts) {
        ++restarts;
        Eigen::VectorXd xs = best.x;
        for (Eigen::Index i = 0; i < xs.size(); ++i) xs(i) = xs(i) * (1.0 + 0.3 * noise(rng)) + 0.05 * noise(rng);
        auto trial = optim::minimize_bfgs(objective, xs, options.bfgs);
        iterations += trial.iterations;
        if (trial.converged || trial.value < best.value) {
            const bool was_converged = best.converged;
            if (!was_converged || trial.value < best.value) best = std::move(trial);
        }
    }
    if (!best.converged) {
        throw NumericalError("optimizer did not converge for " + spec.orders_string() + " after " +
                             std::to_string(restarts) + " restarts");
    }

    FittedModel m;
    m.spec = spec;
    m.series = series;
    m.arma = from_raw(spec, best.x);
    const auto e = prob.evaluate(m.arma);
    if (!e.ok) {
        throw NumericalError(e.rank_deficient ? "ill-conditioned regressor matrix" : "likelihood failed at optimum");
    }
    const double min_root = std::min({arma::min_root_modulus_ar(m.arma.ar), arma::min_root_modulus_ar(m.arma.sar),
                                      arma::min_root_modulus_ma(m.arma.ma), arma::min_root_modulus_ma(m.arma.sma)});
    if (!(min_root > 1.0)) throw NumericalError("optimum violates stationarity/invertibility");

    scatter_coefficients(prob, e.coef, spec.mean_regressors.size(), spec.innovation_pulses.size(), m.beta, m.io);
    m.beta_active = prob.beta_active();
    m.io_active = prob.io_active();
    m.sigma = std::sqrt(e.sigma2);
    m.loglik = e.loglik;
    m.residuals.assign(e.resid.data(), e.resid.data() + e.resid.size());
    m.n_effective = prob.n();
    m.converged = best.converged;
    m.iterations = iterations;
    m.restarts = restarts;

    m.std_errors.assign(static_cast<std::size_t>(n_arma) + spec.mean_regressors.size() + spec.innovation_pulses.size(),
                        std::numeric_limits<double>::quiet_NaN());
    if (options.compute_std_errors) {
        if (n_arma > 0) {
            const auto flat = m.arma.flatten();
            const Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(flat.data(), n_arma);
            auto neg_ll = [&](const Eigen::VectorXd& c) {
                const auto coef = ArmaCoefficients::unflatten(spec, {c.data(), c.data() + c.size()});
                if (!admissible(coef)) return std::numeric_limits<double>::quiet_NaN();
                const auto ev = prob.evaluate(coef);
                return ev.ok ? -ev.loglik : std::numeric_limits<double>::quiet_NaN();
            };
            const Eigen::MatrixXd H = optim::numerical_hessian(neg_ll, theta, 1e-4);
            if (H.allFinite()) {
                Eigen::LLT<Eigen::MatrixXd> llt(H);
                if (llt.info() == Eigen::Success) {
                    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(n_arma, n_arma));
                    for (int i = 0; i < n_arma; ++i) m.std_errors[static_cast<std::size_t>(i)] = std::sqrt(cov(i, i));
                }
            }
        }
        if (e.design.cols() > 0) {
            const Eigen::MatrixXd xtx = e.design.transpose() * e.design;
            const Eigen::MatrixXd cov = e.sigma2 * xtx.inverse();
            Eigen::Index k = 0;
            for (int j : prob.beta_index()) {
                m.std_errors[static_cast<std::size_t>(n_arma + j)] = std::sqrt(cov(k, k));
                ++k;
            }
            for (int j : prob.io_index()) {
                m.std_errors[static_cast<std::size_t>(n_arma) + spec.mean_regressors.size() + static_cast<std::size_t>(j)] =
                    std::sqrt(cov(k, k));
                ++k;
            }
        }
    }
    return m;
}

std::vector<RegressorColumn> extend_regressors(const SarimaSpec& spec, MonthRange range,
                                               const calendar::LunarTable& table) {
    std::vector<RegressorColumn> out;
    out.reserve(spec.mean_regressors.size());
    for (const auto& r : spec.mean_regressors) out.push_back(calendar::regenerate(r, range, table));
    return out;
}

SarimaSpec restrict_regressors(const SarimaSpec& spec, MonthRange range, const calendar::LunarTable& table) {
    SarimaSpec out = spec;
    for (auto& r : out.mean_regressors) r = calendar::regenerate(r, range, table);
    for (auto& r : out.innovation_pulses) r = calendar::regenerate(r, range, table);
    return out;
}

Forecast forecast(const FittedModel& model, int h, const std::vector<RegressorColumn>& future_regressors) {
    if (h < 1) throw DataError("forecast horizon must be at least 1");
    const auto& spec = model.spec;
    if (future_regressors.size() != spec.mean_regressors.size()) {
        throw DataError("forecast needs one future column per mean regressor");
    }
    const Problem prob(model.series, spec);
    const auto e = prob.evaluate(model.arma);
    if (!e.ok) throw NumericalError("cannot evaluate fitted model");
    const arma::KalmanFilter kf(e.poly);

    const int n = prob.n();
    const int order = prob.order();
    const auto& c = prob.diff();
    const auto T = static_cast<int>(model.series.size());
    const YearMonth first_future = model.series.end() + 1;

    // Column order inside the filter: w, active beta, active io.
    const int kb = prob.k_beta();
    const int ki = prob.k_io();
    Eigen::VectorXd coef(kb + ki);
    for (int k = 0; k < kb; ++k) coef(k) = model.beta[static_cast<std::size_t>(prob.beta_index()[static_cast<std::size_t>(k)])];
    for (int k = 0; k < ki; ++k) coef(kb + k) = model.io[static_cast<std::size_t>(prob.io_index()[static_cast<std::size_t>(k)])];

    // Differenced future mean regressors (all, active or not).
    Eigen::MatrixXd xd_future = Eigen::MatrixXd::Zero(h, static_cast<Eigen::Index>(spec.mean_regressors.size()));
    for (std::size_t j = 0; j < spec.mean_regressors.size(); ++j) {
        std::vector<double> levels = column_over(spec.mean_regressors[j], model.series);
        for (int s = 0; s < h; ++s) levels.push_back(future_regressors[j].at(first_future + s));
        const auto xd = apply_difference(levels, c);
        for (int s = 0; s < h; ++s) xd_future(s, static_cast<Eigen::Index>(j)) = xd[static_cast<std::size_t>(n + s)];
    }
    const auto psi = arma::psi_weights(e.poly, static_cast<std::size_t>(n + h));

    std::vector<double> y(model.series.values().begin(), model.series.values().end());
    y.reserve(static_cast<std::size_t>(T + h));
    Eigen::MatrixXd state = e.filter.next_state;
    Forecast fc;
    for (int s = 0; s < h; ++s) {
        if (s > 0) state = kf.transition(state);
        double z_hat = state(0, 0);
        for (int k = 0; k < kb + ki; ++k) z_hat -= state(0, 1 + k) * coef(k);
        double w_hat = z_hat;
        for (std::size_t j = 0; j < spec.mean_regressors.size(); ++j) {
            w_hat += model.beta[j] * xd_future(s, static_cast<Eigen::Index>(j));
        }
        for (std::size_t j = 0; j < spec.innovation_pulses.size(); ++j) {
            const int pos = prob.io_pos_all()[j];
            if (model.io_active[j] && n + s >= pos) w_hat += model.io[j] * psi[static_cast<std::size_t>(n + s - pos)];
        }
        double y_hat = w_hat;
        const std::size_t tt = static_cast<std::size_t>(T + s);
        for (std::size_t i = 1; i < c.size(); ++i) y_hat += c[i] * y[tt - i];
        y.push_back(y_hat);
        fc.point.push_back(y_hat);
    }
    (void)order;

    // psi-weights of the integrated model for standard errors.
    std::vector<double> full_ar;
    {
        std::vector<double> diff_c(c.begin() + 1, c.end());
        auto ar_poly = e.poly.ar;
        // (1 - sum a B)(1 - sum c B) = 1 - sum g B
        std::vector<double> pa(ar_poly.size() + 1, 0.0), pc(diff_c.size() + 1, 0.0);
        pa[0] = pc[0] = 1.0;
        for (std::size_t i = 0; i < ar_poly.size(); ++i) pa[i + 1] = -ar_poly[i];
        for (std::size_t i = 0; i < diff_c.size(); ++i) pc[i + 1] = -diff_c[i];
        std::vector<double> prod(pa.size() + pc.size() - 1, 0.0);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            for (std::size_t j = 0; j < pc.size(); ++j) prod[i + j] += pa[i] * pc[j];
        }
        for (std::size_t i = 1; i < prod.size(); ++i) full_ar.push_back(-prod[i]);
    }
    const auto psi_star = arma::rational_weights(full_ar, e.poly.ma, static_cast<std::size_t>(h));
    double acc = 0.0;
    for (int s = 0; s < h; ++s) {
        acc += psi_star[static_cast<std::size_t>(s)] * psi_star[static_cast<std::size_t>(s)];
        fc.se.push_back(model.sigma * std::sqrt(acc));
    }
    return fc;
}

Forecast forecast(const FittedModel& model, int h, const calendar::LunarTable& table) {
    if (h < 1) throw DataError("forecast horizon must be at least 1");
    const MonthRange future{model.series.end() + 1, model.series.end() + h};
    return forecast(model, h, extend_regressors(model.spec, future, table));
}

MonthlySeries simulate(const SarimaSpec& spec, const ModelParams& params, int T, std::uint64_t seed, YearMonth start) {
    check_orders(spec);
    check_coefficient_sizes(spec, params.arma);
    if (!admissible(params.arma)) throw DataError("simulate: ARMA coefficients not admissible");
    if (T < 1) throw DataError("simulate: T must be positive");
    if (params.beta.size() != spec.mean_regressors.size() || params.io.size() != spec.innovation_pulses.size()) {
        throw DataError("simulate: regressor coefficient count mismatch");
    }
    const auto poly = expand(params.arma, spec.season);
    constexpr int burn = 1000;
    const int total = burn + T;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(params.sigma2));
    std::vector<double> e(static_cast<std::size_t>(total));
    for (auto& v : e) v = normal(rng);
    for (std::size_t j = 0; j < spec.innovation_pulses.size(); ++j) {
        const int pos = spec.innovation_pulses[j].anchor - start;
        if (pos >= 0 && pos < T) e[static_cast<std::size_t>(burn + pos)] += params.io[j];
    }
    std::vector<double> u(static_cast<std::size_t>(total), 0.0);
    for (int t = 0; t < total; ++t) {
        double v = e[static_cast<std::size_t>(t)];
        for (std::size_t i = 1; i <= poly.ar.size() && static_cast<int>(i) <= t; ++i) v += poly.ar[i - 1] * u[static_cast<std::size_t>(t) - i];
        for (std::size_t j = 1; j <= poly.ma.size() && static_cast<int>(j) <= t; ++j) v += poly.ma[j - 1] * e[static_cast<std::size_t>(t) - j];
        u[static_cast<std::size_t>(t)] = v;
    }
    const auto c = timeseries::differencing_polynomial(spec.d, spec.D, spec.season);
    std::vector<double> z(static_cast<std::size_t>(T), 0.0);
    for (int t = 0; t < T; ++t) {
        double v = u[static_cast<std::size_t>(burn + t)];
        for (std::size_t i = 1; i < c.size() && static_cast<int>(i) <= t; ++i) v += c[i] * z[static_cast<std::size_t>(t) - i];
        z[static_cast<std::size_t>(t)] = v;
    }
    for (std::size_t j = 0; j < spec.mean_regressors.size(); ++j) {
        for (int t = 0; t < T; ++t) z[static_cast<std::size_t>(t)] += params.beta[j] * spec.mean_regressors[j].at(start + t);
    }
    return {start, std::move(z)};
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json regressor_to_json(const RegressorColumn& r) {
    json j;
    j["kind"] = calendar::kind_name(r.kind);
    j["name"] = r.name();
    if (r.is_sf()) {
        j["window"] = {r.window.before, r.window.during, r.window.after};
    } else {
        j["anchor"] = r.anchor.to_string();
        if (r.kind == RegressorKind::TCDecay) j["delta"] = r.delta;
    }
    j["start"] = r.start.to_string();
    j["values"] = r.values;
    return j;
}

RegressorColumn regressor_from_json(const json& j) {
    RegressorColumn r;
    r.kind = calendar::kind_from_name(j.at("kind").get<std::string>());
    if (r.is_sf()) {
        const auto w = j.at("window");
        r.window = {w.at(0).get<int>(), w.at(1).get<int>(), w.at(2).get<int>()};
    } else {
        r.anchor = YearMonth::parse(j.at("anchor").get<std::string>());
        if (j.contains("delta")) r.delta = j.at("delta").get<double>();
    }
    r.start = YearMonth::parse(j.at("start").get<std::string>());
    r.values = j.at("values").get<std::vector<double>>();
    return r;
}

}  // namespace

std::string to_json(const FittedModel& m) {
    json j;
    j["format"] = "cpitk-sarimax-model/1";
    const auto& s = m.spec;
    j["orders"] = {{"p", s.p}, {"d", s.d}, {"q", s.q}, {"P", s.P}, {"D", s.D}, {"Q", s.Q}, {"season", s.season}};
    j["conventions"] = {{"ar", "1 - sum phi_i B^i"}, {"ma", "1 + sum theta_i B^i"}};
    j["coefficients"] = {{"ar", m.arma.ar}, {"sar", m.arma.sar}, {"ma", m.arma.ma}, {"sma", m.arma.sma}};
    const auto n_arma = static_cast<std::size_t>(s.arma_count());
    json se = json::array();
    for (double v : m.std_errors) se.push_back(number_or_null(v));
    j["std_errors"] = se;
    json regs = json::array();
    for (std::size_t k = 0; k < s.mean_regressors.size(); ++k) {
        json r = regressor_to_json(s.mean_regressors[k]);
        r["beta"] = m.beta[k];
        r["active"] = static_cast<bool>(m.beta_active[k]);
        r["std_error"] = number_or_null(n_arma + k < m.std_errors.size() ? m.std_errors[n_arma + k]
                                                                       : std::numeric_limits<double>::quiet_NaN());
        regs.push_back(std::move(r));
    }
    j["mean_regressors"] = regs;
    json pulses = json::array();
    for (std::size_t k = 0; k < s.innovation_pulses.size(); ++k) {
        json r = regressor_to_json(s.innovation_pulses[k]);
        r["omega"] = m.io[k];
        r["active"] = static_cast<bool>(m.io_active[k]);
        pulses.push_back(std::move(r));
    }
    j["innovation_pulses"] = pulses;
    j["sigma"] = m.sigma;
    j["loglik"] = m.loglik;
    j["n_effective"] = m.n_effective;
    j["converged"] = m.converged;
    j["iterations"] = m.iterations;
    j["restarts"] = m.restarts;
    j["residuals"] = m.residuals;
    j["series"] = {{"start", m.series.start().to_string()},
                   {"values", std::vector<double>(m.series.values().begin(), m.series.values().end())}};
    return j.dump(2);
}

FittedModel from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("model JSON: ") + e.what());
    }
    try {
        FittedModel m;
        const auto& o = j.at("orders");
        auto& s = m.spec;
        s.p = o.at("p");
        s.d = o.at("d");
        s.q = o.at("q");
        s.P = o.at("P");
        s.D = o.at("D");
        s.Q = o.at("Q");
        s.season = o.at("season");
        const auto& c = j.at("coefficients");
        m.arma.ar = c.at("ar").get<std::vector<double>>();
        m.arma.sar = c.at("sar").get<std::vector<double>>();
        m.arma.ma = c.at("ma").get<std::vector<double>>();
        m.arma.sma = c.at("sma").get<std::vector<double>>();
        for (const auto& v : j.at("std_errors")) m.std_errors.push_back(number_from(v));
        for (const auto& r : j.at("mean_regressors")) {
            s.mean_regressors.push_back(regressor_from_json(r));
            m.beta.push_back(r.at("beta").get<double>());
            m.beta_active.push_back(r.at("active").get<bool>());
        }
        for (const auto& r : j.at("innovation_pulses")) {
            s.innovation_pulses.push_back(regressor_from_json(r));
            m.io.push_back(r.at("omega").get<double>());
            m.io_active.push_back(r.at("active").get<bool>());
        }
        m.sigma = j.at("sigma");
        m.loglik = j.at("loglik");
        m.n_effective = j.at("n_effective");
        m.converged = j.at("converged");
        m.iterations = j.at("iterations");
        m.restarts = j.at("restarts");
        m.residuals = j.at("residuals").get<std::vector<double>>();
        const auto& ser = j.at("series");
        m.series = MonthlySeries(YearMonth::parse(ser.at("start").get<std::string>()),
                                 ser.at("values").get<std::vector<double>>());
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("model JSON: ") + e.what());
    }
}

}  // namespace cpitk::sarimax
