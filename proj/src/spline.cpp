#include "ridecomfort/spline.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "ridecomfort/errors.hpp"

namespace ridecomfort {

struct SmoothingSpline1D::Factor {
    Eigen::SparseMatrix<double> q;  // n x (n-2)
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
};

SmoothingSpline1D::SmoothingSpline1D(std::size_t n, double h, double lambda)
    : n_(n), h_(h), lambda_(lambda) {
    if (n == 0) throw ConfigError("smoothing spline needs at least one node");
    if (!(h > 0.0)) throw ConfigError("smoothing spline spacing must be > 0");
    if (!(lambda >= 0.0)) throw ConfigError("smoothing parameter must be >= 0");
    if (n < 3) return;

    const auto m = static_cast<Eigen::Index>(n - 2);
    factor_ = std::make_unique<Factor>();

    std::vector<Eigen::Triplet<double>> qt;
    std::vector<Eigen::Triplet<double>> rt;
    for (Eigen::Index j = 0; j < m; ++j) {
        qt.emplace_back(j, j, 1.0 / h);
        qt.emplace_back(j + 1, j, -2.0 / h);
        qt.emplace_back(j + 2, j, 1.0 / h);
        rt.emplace_back(j, j, 2.0 * h / 3.0);
        if (j + 1 < m) {
            rt.emplace_back(j, j + 1, h / 6.0);
            rt.emplace_back(j + 1, j, h / 6.0);
        }
    }
    factor_->q.resize(static_cast<Eigen::Index>(n), m);
    factor_->q.setFromTriplets(qt.begin(), qt.end());
    Eigen::SparseMatrix<double> r(m, m);
    r.setFromTriplets(rt.begin(), rt.end());

    Eigen::SparseMatrix<double> system = r;
    if (lambda > 0.0) system += lambda * Eigen::SparseMatrix<double>(factor_->q.transpose() * factor_->q);
    factor_->solver.compute(system);
    if (factor_->solver.info() != Eigen::Success) throw NumericError("smoothing spline factorization failed");
}

SmoothingSpline1D::~SmoothingSpline1D() = default;
SmoothingSpline1D::SmoothingSpline1D(SmoothingSpline1D&&) noexcept = default;
SmoothingSpline1D& SmoothingSpline1D::operator=(SmoothingSpline1D&&) noexcept = default;

SplineNodes SmoothingSpline1D::fit(std::span<const double> y) const {
    if (y.size() != n_) throw DimensionError("smoothing spline: data length does not match grid");
    SplineNodes out;
    out.values.assign(y.begin(), y.end());
    out.second.assign(n_, 0.0);
    if (n_ < 3) return out;

    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n_));
    const Eigen::VectorXd rhs = factor_->q.transpose() * yv;
    const Eigen::VectorXd gamma = factor_->solver.solve(rhs);
    if (lambda_ > 0.0) {
        const Eigen::VectorXd g = yv - lambda_ * (factor_->q * gamma);
        for (std::size_t i = 0; i < n_; ++i) out.values[i] = g(static_cast<Eigen::Index>(i));
    }
    for (std::size_t i = 1; i + 1 < n_; ++i) out.second[i] = gamma(static_cast<Eigen::Index>(i - 1));
    return out;
}

}  // namespace ridecomfort
