#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "ridecomfort/errors.hpp"
#include "ridecomfort/vehicle.hpp"

using namespace ridecomfort;

namespace {

std::shared_ptr<const RoadSurface> road_from(const Profile& p, double curvature = 0.0) {
    return std::make_shared<const RoadSurface>(grid_from_profile(p, 2.5, 0.5, curvature));
}

Profile flat_profile(double length, double step = 0.1) {
    return Profile{0.0, step, std::vector<double>(static_cast<std::size_t>(std::llround(length / step)) + 1, 0.0)};
}

Scenario scenario_on(std::shared_ptr<const RoadSurface> road, double v) {
    Scenario sc;
    sc.road = std::move(road);
    sc.target_speed = SpeedProfile::constant(v);
    return sc;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Sprung displacement over road input for one corner.
std::complex<double> quarter_car_gain(const QuarterCarParams& p, double omega) {
    using C = std::complex<double>;
    const C jw(0.0, omega);
    const C a11 = -p.m_s * omega * omega + p.c_s * jw + p.k_s;
    const C a12 = -(p.c_s * jw + p.k_s);
    const C a22 = -p.m_u * omega * omega + (p.c_s + p.d_t) * jw + p.k_s + p.k_t;
    const C rhs = p.d_t * jw + p.k_t;
    // [a11 a12; a12 a22] [zs; zu] = [0; rhs]
    return -a12 * rhs / (a11 * a22 - a12 * a12);
}

}  // namespace

TEST_CASE("flat straight road is an equilibrium") {
    const auto r = simulate(scenario_on(road_from(flat_profile(100.0)), 15.0), {}, {});
    const auto& resp = r.response;
    CHECK_FALSE(r.off_road_risk);
    CHECK(max_abs(resp.values(Channel::az)) < 1e-9);
    CHECK(max_abs(resp.values(Channel::ay)) == 0.0);
    CHECK(max_abs(resp.values(Channel::psi_rate)) == 0.0);
    CHECK(max_abs(resp.values(Channel::phi_rate)) < 1e-9);
    CHECK(max_abs(resp.values(Channel::theta_rate)) < 1e-9);
    CHECK(std::abs(resp.values(Channel::ax).back()) < 1e-6);
    CHECK(resp.values(Channel::s).back() >= 100.0);
    for (Channel c : kAllChannels) CHECK(resp.has(c));
}

TEST_CASE("speed tracking with deviation") {
    Scenario sc = scenario_on(road_from(flat_profile(200.0)), 10.0);
    sc.v_dev = 2.0;
    const auto r = simulate(sc, {}, {});
    CHECK(r.response.values(Channel::vx).back() == doctest::Approx(12.0).epsilon(1e-6));

    Scenario step = scenario_on(road_from(flat_profile(200.0)), 10.0);
    step.target_speed = SpeedProfile({{0.0, 10.0}, {50.0, 10.0}, {50.1, 20.0}});
    step.mu_rs = 0.5;
    const auto rs = simulate(step, {}, {});
    const auto ax = rs.response.values(Channel::ax);
    // limited to accel_limit * mu_rs * mu_tire
    CHECK(*std::max_element(ax.begin(), ax.end()) <= 2.0 + 1e-9);
    CHECK(*std::max_element(ax.begin(), ax.end()) == doctest::Approx(2.0));
}

TEST_CASE("constant curvature gives steady lateral response") {
    const double kappa = 0.01, v = 12.0;
    const auto r = simulate(scenario_on(road_from(flat_profile(150.0), kappa), v), {}, {});
    const auto ay = r.response.values(Channel::ay);
    const auto psi = r.response.values(Channel::psi_rate);
    CHECK(ay.back() == doctest::Approx(v * v * kappa));
    CHECK(psi.back() == doctest::Approx(v * kappa * 180.0 / std::numbers::pi));
    CHECK_FALSE(r.off_road_risk);
}

TEST_CASE("friction-limited cornering flags off-road risk") {
    Scenario sc = scenario_on(road_from(flat_profile(200.0), 0.05), 20.0);
    sc.mu_rs = 0.5;
    const auto r = simulate(sc, {}, {});
    CHECK(r.off_road_risk);
    CHECK(r.longest_saturation > kOffRoadDemandTime);
    const auto ay = r.response.values(Channel::ay);
    CHECK(*std::max_element(ay.begin(), ay.end()) <= 0.5 * kGravity + 1e-9);
}

TEST_CASE("sinusoidal road matches the quarter-car frequency response") {
    const double lambda = 2.7, Z = 0.005, v = 6.0;  // wavelength equals the wheelbase
    Profile p = flat_profile(240.0, 0.05);
    for (std::size_t i = 0; i < p.size(); ++i) p.z[i] = Z * std::sin(2.0 * std::numbers::pi * p.position(i) / lambda);
    const auto r = simulate(scenario_on(road_from(p), v), {}, {});
    const auto az = r.response.values(Channel::az);
    const auto s = r.response.values(Channel::s);
    double peak = 0.0;
    for (std::size_t i = 0; i < az.size(); ++i)
        if (s[i] > 120.0 && s[i] < 230.0) peak = std::max(peak, std::abs(az[i]));
    const double omega = 2.0 * std::numbers::pi * v / lambda;
    const double expected = omega * omega * Z * std::abs(quarter_car_gain(QuarterCarParams{}, omega));
    CHECK(peak == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("lateral offset moves the wheel tracks") {
    Profile p = flat_profile(60.0);
    RoadGrid g = grid_from_profile(p, 2.5, 0.5);
    for (std::size_t i = 0; i < g.n_stations(); ++i)
        for (std::size_t j = 0; j < g.n_offsets; ++j)
            g.at(i, j) = 0.01 * g.offset(j) * g.offset(j) * std::clamp((g.ref_line.stations[i] - 30.0) / 10.0, 0.0, 1.0);
    Scenario sc = scenario_on(std::make_shared<const RoadSurface>(g), 10.0);
    CHECK(max_abs(simulate(sc, {}, {}).response.values(Channel::phi_rate)) < 1e-6);
    sc.l_p = 1.0;
    CHECK(max_abs(simulate(sc, {}, {}).response.values(Channel::phi_rate)) > 0.1);
}

TEST_CASE("simulate preconditions") {
    Scenario sc = scenario_on(road_from(flat_profile(50.0)), 10.0);
    SimulationOptions opt;
    opt.dt = 0.01;
    CHECK_THROWS_AS(simulate(sc, {}, {}, opt), ConfigError);
    sc.l_p = 2.0;
    CHECK_THROWS_AS(simulate(sc, {}, {}), ConfigError);
    sc.l_p = 0.0;
    sc.mu_rs = 2.0;
    CHECK_THROWS_AS(simulate(sc, {}, {}), ConfigError);
    sc.mu_rs = 1.0;
    sc.v_dev = -10.0;
    CHECK_THROWS_AS(simulate(sc, {}, {}), ConfigError);
    QuarterCarParams bad;
    bad.k_s = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.mu_tire = 2.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(SpeedProfile({{0.0, 10.0}, {0.0, 12.0}}), ConfigError);
    CHECK_THROWS_AS(SpeedProfile({{0.0, 0.0}}), ConfigError);
}

TEST_CASE("speed profile interpolation") {
    const SpeedProfile sp({{0.0, 10.0}, {100.0, 20.0}});
    CHECK(sp.at(-5.0) == 10.0);
    CHECK(sp.at(50.0) == doctest::Approx(15.0));
    CHECK(sp.at(500.0) == 20.0);
    CHECK(sp.min_speed() == 10.0);
}

TEST_CASE("corner response statics and zero input") {
    const QuarterCarParams q;
    const auto zero = corner_response(flat_profile(50.0), SpeedProfile::constant(10.0), q, 1e-3);
    CHECK(max_abs(zero.z_s.values) == 0.0);
    CHECK(max_abs(zero.z_u.values) == 0.0);

    const double h = 0.02;
    Profile step = flat_profile(150.0, 0.1);
    for (std::size_t i = 0; i < step.size(); ++i)
        if (step.position(i) >= 5.0) step.z[i] = h;
    const auto r = corner_response(step, SpeedProfile::constant(10.0), q, 1e-3);
    // 10 s after the step
    const std::size_t k = static_cast<std::size_t>(std::llround(10.5 / 1e-3));
    REQUIRE(k < r.z_s.size());
    CHECK(std::abs(r.z_s.values[k] - h) < 1e-6 * h);
    CHECK(std::abs(r.z_s.values.back() - h) < 1e-6 * h);
}

TEST_CASE("corner response converges under step refinement") {
    Profile bump = flat_profile(40.0, 0.01);
    for (std::size_t i = 0; i < bump.size(); ++i) {
        const double s = bump.position(i);
        if (s > 5.0 && s < 5.5) bump.z[i] = 0.01 * std::pow(std::sin(std::numbers::pi * (s - 5.0) / 0.5), 2);
    }
    auto energy = [&](double dt) {
        const auto r = corner_response(bump, SpeedProfile::constant(10.0), QuarterCarParams{}, dt);
        double e = 0.0;
        for (double a : r.zddot_s.values) e += a * a * dt;
        return e;
    };
    const double coarse = energy(1e-3), fine = energy(1e-4);
    CHECK(coarse == doctest::Approx(fine).epsilon(0.005));
}
