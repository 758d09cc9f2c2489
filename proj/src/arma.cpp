#include "cpitk/arma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace cpitk::arma {

namespace {

// (1 + sum a_i B^i)(1 + sum b_j B^{s j}) with explicit signs already folded in.
std::vector<double> multiply(std::span<const double> a, std::span<const double> b, int s) {
    std::vector<double> pa(a.size() + 1, 0.0);
    pa[0] = 1.0;
    std::copy(a.begin(), a.end(), pa.begin() + 1);
    std::vector<double> pb(b.size() * static_cast<std::size_t>(s) + 1, 0.0);
    pb[0] = 1.0;
    for (std::size_t j = 0; j < b.size(); ++j) pb[(j + 1) * static_cast<std::size_t>(s)] = b[j];
    std::vector<double> out(pa.size() + pb.size() - 1, 0.0);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i] == 0.0) continue;
        for (std::size_t j = 0; j < pb.size(); ++j) out[i + j] += pa[i] * pb[j];
    }
    return {out.begin() + 1, out.end()};
}

std::vector<double> negate(std::span<const double> c) {
    std::vector<double> out(c.begin(), c.end());
    for (auto& v : out) v = -v;
    return out;
}

void trim_trailing_zeros(std::vector<double>& c) {
    while (!c.empty() && c.back() == 0.0) c.pop_back();
}

}  // namespace

ArmaPolynomials expand(std::span<const double> ar, std::span<const double> sar, std::span<const double> ma,
                       std::span<const double> sma, int season) {
    ArmaPolynomials out;
    // AR: (1 - sum phi B)(1 - sum Phi B^s) = 1 - sum c B  -> multiply negated, negate back.
    out.ar = negate(multiply(negate(ar), negate(sar), season));
    out.ma = multiply(ma, sma, season);
    trim_trailing_zeros(out.ar);
    trim_trailing_zeros(out.ma);
    return out;
}

std::vector<double> pacf_to_ar(std::span<const double> pacf) {
    const std::size_t p = pacf.size();
    std::vector<double> phi(p, 0.0);
    std::vector<double> prev(p, 0.0);
    for (std::size_t k = 0; k < p; ++k) {
        const double r = pacf[k];
        phi[k] = r;
        for (std::size_t j = 0; j < k; ++j) phi[j] = prev[j] - r * prev[k - 1 - j];
        std::copy(phi.begin(), phi.begin() + static_cast<std::ptrdiff_t>(k) + 1, prev.begin());
    }
    return phi;
}

bool ar_to_pacf(std::span<const double> ar, std::vector<double>& pacf) {
    const std::size_t p = ar.size();
    std::vector<double> cur(ar.begin(), ar.end());
    pacf.assign(p, 0.0);
    for (std::size_t k = p; k-- > 0;) {
        const double r = cur[k];
        if (!(std::abs(r) < 1.0)) return false;
        pacf[k] = r;
        std::vector<double> next(k, 0.0);
        const double denom = 1.0 - r * r;
        for (std::size_t j = 0; j < k; ++j) next[j] = (cur[j] + r * cur[k - 1 - j]) / denom;
        cur = std::move(next);
    }
    return true;
}

double min_root_modulus_ar(std::span<const double> c) {
    std::vector<double> v(c.begin(), c.end());
    trim_trailing_zeros(v);
    if (v.empty()) return std::numeric_limits<double>::infinity();
    const auto n = static_cast<Eigen::Index>(v.size());
    // Companion matrix: eigenvalues are reciprocal roots.
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) comp(0, j) = v[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    const Eigen::VectorXcd ev = comp.eigenvalues();
    double max_abs = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) max_abs = std::max(max_abs, std::abs(ev(i)));
    return max_abs > 0.0 ? 1.0 / max_abs : std::numeric_limits<double>::infinity();
}

double min_root_modulus_ma(std::span<const double> c) { return min_root_modulus_ar(negate(c)); }

std::vector<double> rational_weights(std::span<const double> ar, std::span<const double> ma, std::size_t count) {
    std::vector<double> psi(count, 0.0);
    for (std::size_t j = 0; j < count; ++j) {
        double v = j == 0 ? 1.0 : (j <= ma.size() ? ma[j - 1] : 0.0);
        const std::size_t lim = std::min(j, ar.size());
        for (std::size_t i = 1; i <= lim; ++i) v += ar[i - 1] * psi[j - i];
        psi[j] = v;
    }
    return psi;
}

std::vector<double> psi_weights(const ArmaPolynomials& poly, std::size_t count) {
    return rational_weights(poly.ar, poly.ma, count);
}

std::vector<double> autocovariances(const ArmaPolynomials& poly, std::size_t max_lag) {
    const auto& phi = poly.ar;
    const std::size_t p = phi.size();
    const std::size_t q = poly.ma.size();
    const auto psi = psi_weights(poly, q + 1);
    auto theta = [&](std::size_t j) { return j == 0 ? 1.0 : poly.ma[j - 1]; };
    // rhs(k) = sum_{j=k}^q theta_j psi_{j-k}
    auto rhs = [&](std::size_t k) {
        double v = 0.0;
        for (std::size_t j = k; j <= q; ++j) v += theta(j) * psi[j - k];
        return v;
    };
    std::vector<double> g(std::max(max_lag, p) + 1, 0.0);
    // gamma(k) - sum_i phi_i gamma(|k-i|) = rhs(k) for k = 0..p, then the
    // same recursion forward.
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p + 1), static_cast<Eigen::Index>(p + 1));
    Eigen::VectorXd b(static_cast<Eigen::Index>(p + 1));
    for (std::size_t k = 0; k <= p; ++k) {
        for (std::size_t i = 1; i <= p; ++i) {
            const std::size_t lag = k >= i ? k - i : i - k;
            a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(lag)) -= phi[i - 1];
        }
        b(static_cast<Eigen::Index>(k)) = rhs(k);
    }
    const Eigen::VectorXd sol = a.partialPivLu().solve(b);
    for (std::size_t k = 0; k <= p; ++k) g[k] = sol(static_cast<Eigen::Index>(k));
    for (std::size_t k = p + 1; k < g.size(); ++k) {
        double v = rhs(k);
        for (std::size_t i = 1; i <= p; ++i) v += phi[i - 1] * g[k - i];
        g[k] = v;
    }
    g.resize(max_lag + 1);
    return g;
}

// ---------------------------------------------------------------------------

KalmanFilter::KalmanFilter(const ArmaPolynomials& poly) {
    r_ = static_cast<int>(std::max(poly.ar.size(), poly.ma.size() + 1));
    phi_ = Eigen::VectorXd::Zero(r_);
    for (std::size_t i = 0; i < poly.ar.size(); ++i) phi_(static_cast<Eigen::Index>(i)) = poly.ar[i];
    rvec_ = Eigen::VectorXd::Zero(r_);
    rvec_(0) = 1.0;
    for (std::size_t j = 0; j < poly.ma.size(); ++j) rvec_(static_cast<Eigen::Index>(j) + 1) = poly.ma[j];

    p0_ = Eigen::MatrixXd::Zero(r_, r_);
    std::vector<double> pacf;
    ok_ = ar_to_pacf(poly.ar, pacf);
    if (!ok_) return;

    // Stationary covariance P = T P T' + R R'. The first row follows from the
    // autocovariances: P(0,j) = sum_{k>=j} phi_k gamma(k-j+1) + R_k psi(k-j).
    // The rest fills upwards from the bottom-right corner with
    // P(i,j) = phi_i phi_j P00 + phi_i P(0,j+1) + phi_j P(i+1,0) + P(i+1,j+1) + R_i R_j.
    const auto gamma = autocovariances(poly, static_cast<std::size_t>(r_));
    const auto psi = psi_weights(poly, static_cast<std::size_t>(r_));
    for (int j = 0; j < r_; ++j) {
        double v = 0.0;
        for (int k = j; k < r_; ++k) {
            v += phi_(k) * gamma[static_cast<std::size_t>(k - j + 1)] + rvec_(k) * psi[static_cast<std::size_t>(k - j)];
        }
        p0_(0, j) = p0_(j, 0) = v;
    }
    auto first = [&](int j) { return j < r_ ? p0_(0, j) : 0.0; };
    for (int i = r_ - 1; i >= 1; --i) {
        for (int j = r_ - 1; j >= i; --j) {
            const double below = (i + 1 < r_ && j + 1 < r_) ? p0_(i + 1, j + 1) : 0.0;
            const double v = phi_(i) * phi_(j) * p0_(0, 0) + phi_(i) * first(j + 1) + phi_(j) * first(i + 1) + below +
                             rvec_(i) * rvec_(j);
            p0_(i, j) = p0_(j, i) = v;
        }
    }
    ok_ = p0_.allFinite() && p0_(0, 0) > 0.0;
}

Eigen::MatrixXd KalmanFilter::transition(const Eigen::MatrixXd& a) const {
    Eigen::MatrixXd out(a.rows(), a.cols());
    for (int i = 0; i < r_; ++i) {
        out.row(i) = phi_(i) * a.row(0);
        if (i + 1 < r_) out.row(i) += a.row(i + 1);
    }
    return out;
}

KalmanFilter::Output KalmanFilter::run(const Eigen::MatrixXd& y) const {
    // Chandrasekhar recursions: starting from the stationary covariance,
    // P_{t+1} - P_t = m_t w_t w_t' has rank one, so only the gain
    // g_t = T P_t e_1, F_t = P_t(0,0), w_t and m_t are propagated.
    //   F_{t+1} = F_t + m_t w0^2
    //   g_{t+1} = g_t + m_t w0 T w_t
    //   w_{t+1} = T w_t - (w0 / F_t) g_t
    //   m_{t+1} = m_t F_t / F_{t+1}
    const Eigen::Index n = y.rows();
    const Eigen::Index m = y.cols();
    Output out;
    out.standardized.resize(n, m);
    out.f.resize(n);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(r_, m);
    Eigen::VectorXd g = transition(p0_.col(0));
    Eigen::VectorXd w = g;
    Eigen::VectorXd tw(r_);
    Eigen::VectorXd v(m);
    const Eigen::Index last = r_ - 1;
    const double* phi = phi_.data();
    double f = p0_(0, 0);
    double mm = -1.0 / f;
    for (Eigen::Index t = 0; t < n; ++t) {
        if (!(f > 0.0) || !std::isfinite(f)) {
            out.sum_log_f = std::numeric_limits<double>::quiet_NaN();
            return out;
        }
        const double inv_sqrt_f = 1.0 / std::sqrt(f);
        out.f(t) = f;
        out.sum_log_f += std::log(f);
        // a <- T a + g v / F, column by column in place.
        for (Eigen::Index c = 0; c < m; ++c) {
            double* col = a.col(c).data();
            const double a0 = col[0];
            v(c) = y(t, c) - a0;
            out.standardized(t, c) = v(c) * inv_sqrt_f;
            const double gv = v(c) / f;
            for (Eigen::Index i = 0; i < last; ++i) col[i] = col[i + 1] + phi[i] * a0 + g(i) * gv;
            col[last] = phi[last] * a0 + g(last) * gv;
        }

        const double w0 = w(0);
        for (Eigen::Index i = 0; i < last; ++i) tw(i) = w(i + 1) + phi[i] * w0;
        tw(last) = phi[last] * w0;
        const double f_next = f + mm * w0 * w0;
        const double wf = w0 / f;
        const double mw = mm * w0;
        for (Eigen::Index i = 0; i <= last; ++i) {
            w(i) = tw(i) - wf * g(i);
            g(i) += mw * tw(i);
        }
        mm *= f / f_next;
        f = f_next;
    }
    out.next_state = std::move(a);
    return out;
}

}  // namespace cpitk::arma
