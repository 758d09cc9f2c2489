#include "cpitk/optimizer.hpp"

#include <cmath>
#include <limits>

namespace cpitk::optim {

namespace {

double safe(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

}  // namespace

Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double step, int* evaluations) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = step * std::max(1.0, std::abs(x(i)));
        xp(i) = x(i) + h;
        const double fp = safe(f(xp));
        xp(i) = x(i) - h;
        const double fm = safe(f(xp));
        xp(i) = x(i);
        if (std::isfinite(fp) && std::isfinite(fm)) {
            g(i) = (fp - fm) / (2.0 * h);
        } else {
            // One-sided fallback near the admissible boundary.
            const double f0 = safe(f(x));
            g(i) = std::isfinite(fp) ? (fp - f0) / h : std::isfinite(fm) ? (f0 - fm) / h : 0.0;
            if (evaluations) ++*evaluations;
        }
        if (evaluations) *evaluations += 2;
    }
    return g;
}

BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options) {
    const Eigen::Index n = x0.size();
    BfgsResult res;
    res.x = std::move(x0);
    res.value = safe(f(res.x));
    res.evaluations = 1;
    if (n == 0 || !std::isfinite(res.value)) {
        res.converged = n == 0 && std::isfinite(res.value);
        return res;
    }
    Eigen::VectorXd g = numerical_gradient(f, res.x, options.finite_difference_step, &res.evaluations);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    // Scale the initial inverse Hessian so the first step is of unit length.
    if (const double gn = g.norm(); gn > 0.0) H *= std::min(1.0, 1.0 / gn);

    for (int it = 0; it < options.max_iterations; ++it) {
        res.iterations = it + 1;
        res.gradient_norm = g.lpNorm<Eigen::Infinity>();
        if (res.gradient_norm < options.gradient_tolerance) {
            res.converged = true;
            return res;
        }
        Eigen::VectorXd dir = -H * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            H.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }
        // Backtracking Armijo search.
        double step = 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        Eigen::VectorXd x_new;
        bool found = false;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = res.x + step * dir;
            f_new = safe(f(x_new));
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope) {
                found = true;
                break;
            }
            step *= 0.5;
        }
        if (!found) {
            // No descent possible along the quasi-Newton direction: retry once with steepest descent.
            if (!H.isIdentity()) {
                H.setIdentity();
                continue;
            }
            res.converged = res.gradient_norm < 1e3 * options.gradient_tolerance;
            return res;
        }
        const double f_old = res.value;
        const Eigen::VectorXd s = x_new - res.x;
        res.x = std::move(x_new);
        res.value = f_new;
        const Eigen::VectorXd g_new = numerical_gradient(f, res.x, options.finite_difference_step, &res.evaluations);
        const Eigen::VectorXd y = g_new - g;
        g = g_new;
        if (std::abs(f_old - f_new) / std::max(1.0, std::abs(f_old)) < options.relative_tolerance) {
            res.gradient_norm = g.lpNorm<Eigen::Infinity>();
            res.converged = true;
            return res;
        }
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
        }
    }
    res.gradient_norm = g.lpNorm<Eigen::Infinity>();
    res.converged = res.gradient_norm < options.gradient_tolerance;
    return res;
}

Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double step) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd h(n);
    for (Eigen::Index i = 0; i < n; ++i) h(i) = step * std::max(1.0, std::abs(x(i)));
    const double f0 = f(x);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        xp(i) = x(i) + h(i);
        const double fp = f(xp);
        xp(i) = x(i) - h(i);
        const double fm = f(xp);
        xp(i) = x(i);
        H(i, i) = (fp - 2.0 * f0 + fm) / (h(i) * h(i));
        for (Eigen::Index j = 0; j < i; ++j) {
            double acc = 0.0;
            for (int si : {1, -1}) {
                for (int sj : {1, -1}) {
                    xp(i) = x(i) + si * h(i);
                    xp(j) = x(j) + sj * h(j);
                    acc += si * sj * f(xp);
                }
            }
            xp(i) = x(i);
            xp(j) = x(j);
            H(i, j) = H(j, i) = acc / (4.0 * h(i) * h(j));
        }
    }
    return H;
}

}  // namespace cpitk::optim
