#include "treegibbs/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "treegibbs/errors.hpp"

namespace treegibbs {

PerronResult perron_power(const Eigen::MatrixXd& a, double tol, std::size_t max_iter) {
    const auto n = a.rows();
    if (n != a.cols()) throw InvalidArgument("perron_power needs a square matrix");
    PerronResult r;
    if (n == 0) return r;
    // Shifting by the identity makes the iteration converge on periodic matrices.
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n) / static_cast<double>(n);
    double prev = -1;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        Eigen::VectorXd y = a * x + x;
        const double s = y.sum();
        if (!(s > 0)) {
            r.value = 0;
            r.vector = x;
            r.iterations = it;
            return r;
        }
        const double rq = s / x.sum() - 1.0;
        x = y / s;
        if (std::abs(rq - prev) < tol * std::max(1.0, std::abs(rq))) {
            r.value = rq;
            r.vector = x;
            r.iterations = it;
            return r;
        }
        prev = rq;
    }
    throw NotConverged("power iteration did not converge");
}

Eigen::VectorXd null_vector(const Eigen::MatrixXd& a, const Eigen::VectorXd& c) {
    const auto n = a.rows();
    Eigen::MatrixXd m(n + 1, n);
    m.topRows(n) = Eigen::MatrixXd::Identity(n, n) - a;
    m.row(n) = c.transpose();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs(n) = 1.0;
    return m.colPivHouseholderQr().solve(rhs);
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    f.points = x.size();
    if (x.size() != y.size() || x.size() < 2) return f;
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    f.slope = sxx > 0 ? sxy / sxx : 0;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = y[i] - f.intercept - f.slope * x[i];
        sse += d * d;
    }
    f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
    return f;
}

std::vector<double> eigen_moduli(const Eigen::MatrixXd& a) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
    std::vector<double> out;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(std::abs(es.eigenvalues()(i)));
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

}  // namespace treegibbs
