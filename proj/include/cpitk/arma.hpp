#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cpitk::arma {

/// Expanded stationary ARMA operator
///   x_t = sum_i ar[i-1] x_{t-i} + e_t + sum_j ma[j-1] e_{t-j}.
struct ArmaPolynomials {
    std::vector<double> ar;
    std::vector<double> ma;
};

/// Expands phi(B) Phi(B^s) and theta(B) Theta(B^s). AR factors follow
/// 1 - sum c_i B^i, MA factors 1 + sum c_i B^i.
[[nodiscard]] ArmaPolynomials expand(std::span<const double> ar, std::span<const double> sar,
                                     std::span<const double> ma, std::span<const double> sma, int season);

/// Maps partial autocorrelations in (-1,1) to AR coefficients of a stationary
/// 1 - sum phi_i B^i (Durbin-Levinson).
[[nodiscard]] std::vector<double> pacf_to_ar(std::span<const double> pacf);

/// Inverse of pacf_to_ar. Returns false when the polynomial is not stationary.
[[nodiscard]] bool ar_to_pacf(std::span<const double> ar, std::vector<double>& pacf);

/// Smallest root modulus of 1 - sum c_i z^i (infinity for an empty polynomial).
[[nodiscard]] double min_root_modulus_ar(std::span<const double> c);
/// Smallest root modulus of 1 + sum c_i z^i.
[[nodiscard]] double min_root_modulus_ma(std::span<const double> c);

/// psi-weights of ma(B)/ar(B) (psi_0 = 1), `count` terms.
[[nodiscard]] std::vector<double> psi_weights(const ArmaPolynomials& poly, std::size_t count);

/// Generic psi-weights of (1 + sum ma_j B^j) / (1 - sum ar_i B^i).
[[nodiscard]] std::vector<double> rational_weights(std::span<const double> ar, std::span<const double> ma,
                                                   std::size_t count);

/// Autocovariances gamma(0..max_lag) of a stationary ARMA with unit
/// innovation variance.
[[nodiscard]] std::vector<double> autocovariances(const ArmaPolynomials& poly, std::size_t max_lag);

/// Innovations-form Kalman filter for a zero-mean stationary ARMA observed
/// without noise, several columns sharing one gain sequence. Stationary
/// initial covariance.
class KalmanFilter {
public:
    explicit KalmanFilter(const ArmaPolynomials& poly);

    [[nodiscard]] int state_dim() const noexcept { return r_; }
    [[nodiscard]] bool stationary() const noexcept { return ok_; }

    struct Output {
        Eigen::MatrixXd standardized;   // v_t / sqrt(F_t), n x m
        Eigen::VectorXd f;              // F_t (unit innovation variance scale)
        double sum_log_f = 0.0;
        Eigen::MatrixXd next_state;     // a_{n+1|n}, r x m
    };

    [[nodiscard]] Output run(const Eigen::MatrixXd& y) const;

    /// Applies the transition matrix to a state block: T * a.
    [[nodiscard]] Eigen::MatrixXd transition(const Eigen::MatrixXd& a) const;

    [[nodiscard]] const Eigen::MatrixXd& initial_cov() const noexcept { return p0_; }

private:
    int r_ = 1;
    Eigen::VectorXd phi_;  // first column of T, padded to r
    Eigen::VectorXd rvec_; // (1, ma_1, ..., ma_{r-1})
    Eigen::MatrixXd p0_;
    bool ok_ = true;

};

}  // namespace cpitk::arma
