#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace ridecomfort {

/// Node values and second derivatives of a natural cubic spline on a uniform grid.
struct SplineNodes {
    std::vector<double> values;
    std::vector<double> second;
};

/// Cubic smoothing spline on a uniform grid of n nodes with spacing h:
///
///   minimize  sum_i (y_i - g(x_i))^2 + lambda * integral g''(x)^2 dx
///
/// solved with the Reinsch band system (R + lambda Q'Q) gamma = Q'y,
/// g = y - lambda Q gamma. The banded factorization is computed once and
/// reused for every data vector smoothed on the same grid. lambda = 0
/// reduces to natural cubic spline interpolation.
class SmoothingSpline1D {
public:
    SmoothingSpline1D(std::size_t n, double h, double lambda);
    ~SmoothingSpline1D();
    SmoothingSpline1D(SmoothingSpline1D&&) noexcept;
    SmoothingSpline1D& operator=(SmoothingSpline1D&&) noexcept;

    std::size_t size() const noexcept { return n_; }
    double spacing() const noexcept { return h_; }
    double lambda() const noexcept { return lambda_; }

    SplineNodes fit(std::span<const double> y) const;

private:
    struct Factor;
    std::size_t n_;
    double h_;
    double lambda_;
    std::unique_ptr<Factor> factor_;
};

/// Cubic spline basis on one cell: f = a*y0 + b*y1 + c*m0 + d*m1.
struct CellWeights {
    double a, b, c, d;
};

/// Weights at local coordinate t in [0, 1] of a cell of width h.
inline CellWeights cell_weights(double t, double h) noexcept {
    const double A = 1.0 - t;
    const double B = t;
    const double h2 = h * h / 6.0;
    return {A, B, (A * A * A - A) * h2, (B * B * B - B) * h2};
}

}  // namespace ridecomfort
