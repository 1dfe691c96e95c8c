#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace treegibbs {

struct PerronResult {
    double value = 0;              // spectral radius
    Eigen::VectorXd vector;        // nonnegative, sums to 1
    std::size_t iterations = 0;
};

/// Perron root of a nonnegative square matrix by power iteration on A + I,
/// all-ones start, stopped when successive Rayleigh quotients differ by < tol.
PerronResult perron_power(const Eigen::MatrixXd& a, double tol = 1e-13,
                          std::size_t max_iter = 2'000'000);

/// Positive vector with (I - A) u = 0 and c·u = 1, via a least-squares solve of the
/// stacked system. Returns the solution; the caller checks residuals and signs.
Eigen::VectorXd null_vector(const Eigen::MatrixXd& a, const Eigen::VectorXd& c);

struct LineFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
    std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope·x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Moduli of the eigenvalues of a real square matrix, sorted descending.
std::vector<double> eigen_moduli(const Eigen::MatrixXd& a);

}  // namespace treegibbs
