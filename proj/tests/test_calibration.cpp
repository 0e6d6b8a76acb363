#include <doctest.h>

#include <cmath>
#include <random>

#include "ridecomfort/calibration.hpp"
#include "ridecomfort/errors.hpp"

using namespace ridecomfort;

namespace {

// r = L (p - p*), so ||r||^2 = (p - p*)^T Q (p - p*) with Q = L^T L.
ResidualFunction quadratic(std::vector<double> target) {
    return [target](std::span<const double> p) {
        const double d0 = p[0] - target[0], d1 = p[1] - target[1];
        return std::vector<double>{2.0 * d0 + 0.5 * d1, 0.7 * d1};
    };
}

double quad_value(const ResidualFunction& f, double x, double y) {
    const std::vector<double> p{x, y};
    const auto r = f(p);
    return r[0] * r[0] + r[1] * r[1];
}

CalibrationProblem small_problem(const VehicleParams& truth, double length = 150.0) {
    CalibrationProblem pr;
    pr.scenario.road = std::make_shared<const RoadSurface>(
        grid_from_profile(synth_profile(length, 0.05, RoughnessClass::C, 6), 2.5, 0.5, 0.004));
    pr.scenario.target_speed = SpeedProfile::constant(15.0);
    pr.base = truth;
    pr.reference = simulate(pr.scenario, truth, pr.geometry, pr.options).response;
    return pr;
}

}  // namespace

TEST_CASE("interior quadratic minimum") {
    const std::vector<double> target{0.3, -0.2};
    const std::vector<double> lo{-1, -1}, hi{1, 1};
    const LmResult r = levenberg_marquardt(quadratic(target), {0.9, 0.9}, lo, hi);
    CHECK(std::abs(r.p[0] - target[0]) < 1e-6);
    CHECK(std::abs(r.p[1] - target[1]) < 1e-6);
    CHECK(r.iterations.size() < 50);
    for (std::size_t i = 1; i < r.accepted_objectives.size(); ++i)
        CHECK(r.accepted_objectives[i] <= r.accepted_objectives[i - 1]);
}

TEST_CASE("minimum outside the box lands on the constrained optimum") {
    const std::vector<double> lo{0, 0}, hi{1, 1};
    for (const std::vector<double> target : {std::vector<double>{1.6, 0.3}, std::vector<double>{-0.4, 1.5},
                                             std::vector<double>{2.0, 2.0}}) {
        const auto f = quadratic(target);
        double best = 1e300, bx = 0, by = 0;
        for (int i = 0; i <= 100; ++i)
            for (int j = 0; j <= 100; ++j) {
                const double v = quad_value(f, i * 0.01, j * 0.01);
                if (v < best) best = v, bx = i * 0.01, by = j * 0.01;
            }
        const LmResult r = levenberg_marquardt(f, {0.5, 0.5}, lo, hi);
        CHECK(std::abs(r.p[0] - bx) <= 0.011);
        CHECK(std::abs(r.p[1] - by) <= 0.011);
        CHECK(r.objective <= best + 1e-9);
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(r.p[k] >= lo[k]);
            CHECK(r.p[k] <= hi[k]);
        }
    }
}

TEST_CASE("solver argument checks") {
    const std::vector<double> lo{0, 0}, hi{1, 1};
    CHECK_THROWS_AS(levenberg_marquardt(quadratic({0.5, 0.5}), {2.0, 0.5}, lo, hi), ConfigError);
    CHECK_THROWS_AS(levenberg_marquardt(quadratic({0.5, 0.5}), {0.5}, lo, hi), DimensionError);
}

TEST_CASE("failed evaluations are rejected steps") {
    const std::vector<double> lo{-1, -1}, hi{1, 1};
    const auto base = quadratic({0.2, 0.1});
    int calls = 0;
    const ResidualFunction flaky = [&](std::span<const double> p) {
        if (++calls % 3 == 0) throw NumericError("simulated divergence");
        return base(p);
    };
    const LmResult r = levenberg_marquardt(flaky, {0.8, -0.8}, lo, hi);
    CHECK(std::abs(r.p[0] - 0.2) < 1e-4);
    CHECK(std::abs(r.p[1] - 0.1) < 1e-4);

    const ResidualFunction broken = [&](std::span<const double> p) -> std::vector<double> {
        if (p[0] != 0.8) throw NumericError("always diverges");
        return base(p);
    };
    CHECK_THROWS_AS(levenberg_marquardt(broken, {0.8, -0.8}, lo, hi), OptimizationError);
}

TEST_CASE("finite-difference Jacobian") {
    const std::vector<double> p{0.5, 1.0}, hi{1.0, 1.0};
    const auto f = quadratic({0.0, 0.0});
    const auto r0 = f(p);
    const auto J = fd_jacobian(f, p, r0, hi);
    REQUIRE(J.size() == 2);
    CHECK(J[0][0] == doctest::Approx(2.0));
    CHECK(J[0][1] == doctest::Approx(0.0));
    CHECK(J[1][0] == doctest::Approx(0.5));  // backward difference at the upper bound
    CHECK(J[1][1] == doctest::Approx(0.7));
}

TEST_CASE("parameter mapping") {
    VehicleParams v;
    set_param(v, CalibParam::K_sf, 21000.0);
    set_param(v, CalibParam::K_Tr, 310000.0);
    set_param(v, CalibParam::mu_Tr, 1.2);
    CHECK(v.front.k_s == 21000.0);
    CHECK(v.rear.k_s != 21000.0);
    CHECK(v.front.k_t == 310000.0);
    CHECK(v.rear.k_t == 310000.0);
    CHECK(get_param(v, CalibParam::mu_Tr) == 1.2);
    CHECK(v.rear.mu_tire == 1.2);
    CHECK(calib_param_from_name("d_Tr") == CalibParam::d_Tr);
    BoxConstraints bad;
    bad.lower[0] = 50000.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("trace comparison") {
    VehicleParams truth;
    const CalibrationProblem pr = small_problem(truth, 80.0);
    const Residual self = compare_traces(pr.reference, pr.reference);
    CHECK(self.objective == 0.0);
    for (const auto& c : self.channels) CHECK(c.nrmse == 0.0);
    // az has range; vx is flat at constant speed and is skipped
    CHECK(std::find(self.skipped.begin(), self.skipped.end(), Channel::vx) != self.skipped.end());

    VehicleResponse noisy = pr.reference;
    const auto az = pr.reference.values(Channel::az);
    std::vector<double> n(az.begin(), az.end());
    std::mt19937_64 rng(1);
    const double sigma = 0.01;
    std::normal_distribution<double> g(0.0, sigma);
    for (double& x : n) x += g(rng);
    noisy.set(Channel::az, n);
    const Residual res = compare_traces(noisy, pr.reference);
    const double range = *std::max_element(az.begin(), az.end()) - *std::min_element(az.begin(), az.end());
    CHECK(res.nrmse(Channel::az) == doctest::Approx(sigma / range).epsilon(0.1));
}

TEST_CASE("missing reference channels are skipped") {
    const CalibrationProblem pr = small_problem(VehicleParams{}, 60.0);
    VehicleResponse partial(pr.reference.t0(), pr.reference.dt(), pr.reference.size());
    for (Channel c : {Channel::vx, Channel::ax, Channel::ay, Channel::az, Channel::s}) partial.set(c, {pr.reference.values(c).begin(), pr.reference.values(c).end()});
    const Residual r = compare_traces(pr.reference, partial);
    for (Channel c : {Channel::phi_rate, Channel::theta_rate, Channel::psi_rate})
        CHECK(std::find(r.skipped.begin(), r.skipped.end(), c) != r.skipped.end());
    VehicleResponse none(0.0, 0.01, 10);
    none.set(Channel::s, std::vector<double>(10, 0.0));
    CHECK_THROWS_AS(compare_traces(pr.reference, none), UnsupportedInputError);
}

TEST_CASE("tire stiffness recovery") {
    VehicleParams truth;
    set_param(truth, CalibParam::K_Tr, 300000.0);
    const CalibrationProblem pr = small_problem(truth);
    OptimizationChain chain{{{"K_Tr", {CalibParam::K_Tr}}}, 1};
    BoxConstraints box;
    VehicleParams start = truth;
    set_param(start, CalibParam::K_Tr, box.mid(CalibParam::K_Tr));
    const ChainResult r = run_chain(pr, chain, box, start);
    CHECK(r.complete);
    CHECK(get_param(r.final, CalibParam::K_Tr) == doctest::Approx(300000.0).epsilon(0.02));
    CHECK(r.after.objective <= r.before.objective);
}

TEST_CASE("chain at the truth does not move") {
    VehicleParams truth;
    const CalibrationProblem pr = small_problem(truth, 80.0);
    const ChainResult r = run_chain(pr, OptimizationChain::single_parameter(), {}, truth);
    CHECK(r.complete);
    CHECK_FALSE(r.stages.empty());
    for (CalibParam p : kCalibParams) CHECK(get_param(r.final, p) == get_param(truth, p));
    CHECK(r.after.objective == 0.0);
    const auto j = calibration_report_json(r);
    CHECK(j["complete"] == true);
    CHECK(j.contains("nrmse"));
}

TEST_CASE("chain validation") {
    OptimizationChain partial{{{"springs", {CalibParam::K_sf, CalibParam::K_sr}}}, 1};
    CHECK_NOTHROW(partial.validate());
    OptimizationChain twice{{{"springs", {CalibParam::K_sf, CalibParam::K_sf}}}, 1};
    CHECK_THROWS_AS(twice.validate(), ConfigError);
    OptimizationChain empty{{{"none", {}}}, 1};
    CHECK_THROWS_AS(empty.validate(), ConfigError);
    CHECK_NOTHROW(OptimizationChain::single_parameter().validate());
    OptimizationChain zero = OptimizationChain::single_parameter();
    zero.max_passes = 0;
    CHECK_THROWS_AS(zero.validate(), ConfigError);
}
