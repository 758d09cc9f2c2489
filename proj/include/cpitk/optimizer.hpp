#pragma once

#include <functional>

#include <Eigen/Dense>

namespace cpitk::optim {

struct BfgsOptions {
    int max_iterations = 200;
    double gradient_tolerance = 1e-6;       // on the infinity norm of the gradient
    double relative_tolerance = 1e-10;      // on |f_k - f_{k+1}| / max(1, |f_k|)
    double finite_difference_step = 1e-5;
};

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Objective to minimise; may return +inf (or NaN) to signal an inadmissible point.
using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Central-difference gradient.
[[nodiscard]] Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double step,
                                                 int* evaluations = nullptr);

/// Quasi-Newton (BFGS) minimisation with backtracking line search.
[[nodiscard]] BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options = {});

/// Central-difference Hessian.
[[nodiscard]] Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double step);

}  // namespace cpitk::optim
