#include <doctest.h>

#include <cmath>
#include <vector>

#include "ridecomfort/errors.hpp"
#include "ridecomfort/signals.hpp"

using namespace ridecomfort;

namespace {

VehicleResponse constant_speed_run(double v, double dt, std::size_t n, double value) {
    VehicleResponse r(0.0, dt, n);
    std::vector<double> s(n), vx(n, v), c(n, value);
    for (std::size_t i = 0; i < n; ++i) s[i] = v * dt * static_cast<double>(i);
    r.set(Channel::s, s);
    r.set(Channel::vx, vx);
    r.set(Channel::az, c);
    return r;
}

}  // namespace

TEST_CASE("rmse hand values") {
    const std::vector<double> a{1, 2, 3}, b{1, 2, 5};
    CHECK(rmse(a, a) == 0.0);
    CHECK(rmse(a, b) == doctest::Approx(std::sqrt(4.0 / 3.0)).epsilon(1e-12));
    std::vector<double> shifted{3, 4, 5};
    CHECK(rmse(shifted, a) == doctest::Approx(2.0));
    CHECK_THROWS_AS(rmse(std::vector<double>{1, 2}, a), DimensionError);
}

TEST_CASE("nrmse normalizes by reference range") {
    const std::vector<double> p{0, 0}, r{0, 2};
    CHECK(nrmse(p, r) == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
    std::vector<double> ref(11), pred(11);
    for (int i = 0; i <= 10; ++i) {
        ref[i] = i;
        pred[i] = i + 1.0;
    }
    CHECK(nrmse(pred, ref) == doctest::Approx(0.1));
    CHECK(nrmse(ref, ref) == 0.0);
    CHECK_THROWS_AS(nrmse(p, std::vector<double>{1, 1}), DegenerateInputError);
}

TEST_CASE("to_space on constant speed") {
    const auto run = constant_speed_run(10.0, 0.1, 50, 2.5);
    const SpaceSeries s = to_space(run, Channel::az, 1.0);
    CHECK(s.size() == 50);
    CHECK(s.ds == 1.0);
    for (double v : s.values) CHECK(v == doctest::Approx(2.5));

    const auto fine = to_space(run, Channel::vx, 0.1);
    for (double v : fine.values) CHECK(v == doctest::Approx(10.0));
}

TEST_CASE("to_space inverts uniformly accelerated motion") {
    const double a = 2.0, dt = 0.01;
    const std::size_t n = 501;
    VehicleResponse r(0.0, dt, n);
    std::vector<double> s(n), vx(n), ramp(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = dt * static_cast<double>(i);
        s[i] = 0.5 * a * t * t;
        vx[i] = a * t;
        ramp[i] = t;
    }
    r.set(Channel::s, s);
    r.set(Channel::vx, vx);
    r.set(Channel::ay, ramp);
    const SpaceSeries sp = to_space(r, Channel::ay, 0.5);
    // channel value equals t, and t(s) = sqrt(2 s / a)
    for (std::size_t k = 0; k < sp.size(); ++k)
        CHECK(sp.values[k] == doctest::Approx(std::sqrt(2.0 * sp.position(k) / a)).epsilon(1e-9));
}

TEST_CASE("to_space rejects a reversing vehicle") {
    VehicleResponse r(0.0, 0.1, 4);
    r.set(Channel::s, {0.0, 1.0, 0.5, 2.0});
    r.set(Channel::az, {0, 0, 0, 0});
    CHECK_THROWS_AS(to_space(r, Channel::az, 0.1), UnsupportedInputError);
}

TEST_CASE("aggregate") {
    SpaceSeries a{0.0, 1.0, {1, 1}}, b{0.0, 1.0, {3, 3}};
    std::vector<SpaceSeries> runs{a, b};
    const auto m = aggregate(runs, Aggregator::mean);
    CHECK(m.values == std::vector<double>{2, 2});
    CHECK(m.run_count == 2);

    std::vector<SpaceSeries> runs2{{0.0, 1.0, {1, -5}}, {0.0, 1.0, {2, 1}}};
    CHECK(aggregate(runs2, Aggregator::max_abs_envelope).values == std::vector<double>{2, -5});

    std::vector<SpaceSeries> one{{0.0, 0.5, {4, 5, 6}}};
    CHECK(aggregate(one).values == one[0].values);
    CHECK_THROWS_AS(aggregate(std::span<const SpaceSeries>{}), InsufficientDataError);
}

TEST_CASE("aggregate trims to common overlap") {
    std::vector<SpaceSeries> runs{{0.0, 1.0, {1, 2, 3, 4}}, {1.0, 1.0, {10, 20}}};
    const auto m = aggregate(runs);
    CHECK(m.s0 == 1.0);
    REQUIRE(m.size() == 2);
    CHECK(m.values[0] == doctest::Approx(6.0));
    CHECK(m.values[1] == doctest::Approx(11.5));
}

TEST_CASE("single-run to_space then aggregate keeps the grid") {
    const auto run = constant_speed_run(12.0, 0.05, 200, -1.0);
    const SpaceSeries s = to_space(run, Channel::az, 0.1);
    std::vector<SpaceSeries> v{s};
    const SpaceSeries g = aggregate(v);
    CHECK(g.s0 == s.s0);
    CHECK(g.size() == s.size());
}

TEST_CASE("sample_at interpolates and clamps") {
    SpaceSeries s{10.0, 2.0, {0, 4, 8}};
    CHECK(sample_at(s, 11.0) == doctest::Approx(2.0));
    CHECK(sample_at(s, 0.0) == 0.0);
    CHECK(sample_at(s, 99.0) == 8.0);
}

TEST_CASE("channel names round-trip") {
    for (Channel c : kAllChannels) CHECK(channel_from_name(channel_name(c)) == c);
    CHECK_FALSE(channel_from_name("nope").has_value());
}
