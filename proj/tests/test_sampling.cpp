#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "ridecomfort/errors.hpp"
#include "ridecomfort/sampling.hpp"

using namespace ridecomfort;

namespace {

std::shared_ptr<const RoadSurface> short_road(double length, double curvature = 0.0) {
    return std::make_shared<const RoadSurface>(
        grid_from_profile(synth_profile(length, 0.1, RoughnessClass::B, 1), 2.5, 0.5, curvature));
}

Scenario base_scenario(double length = 60.0) {
    Scenario s;
    s.road = short_road(length);
    s.target_speed = SpeedProfile::constant(12.0);
    return s;
}

}  // namespace

TEST_CASE("normal quantile") {
    CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK(inverse_normal_cdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-12));
    for (double p : {1e-6, 0.01, 0.3, 0.77, 0.999}) CHECK(normal_cdf(inverse_normal_cdf(p)) == doctest::Approx(p).epsilon(1e-12));
    CHECK_THROWS(inverse_normal_cdf(0.0));
    CHECK_THROWS(inverse_normal_cdf(1.0));
}

TEST_CASE("single uniform sample") {
    const std::vector<InputDistribution> d{InputDistribution::uniform(Variable::mu_rs, 0.0, 1.0)};
    const SamplePlan p = lhs(d, 1, 5);
    REQUIRE(p.matrix.size() == 1);
    CHECK(p.matrix[0] > 0.0);
    CHECK(p.matrix[0] < 1.0);
}

TEST_CASE("one sample per stratum") {
    const std::vector<InputDistribution> d{InputDistribution::uniform(Variable::mu_rs, 0.0, 1.0)};
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SamplePlan p = lhs(d, 4, seed);
        std::vector<int> hits(4, 0);
        for (double x : p.column(0)) ++hits[static_cast<std::size_t>(x * 4.0)];
        CHECK(hits == std::vector<int>{1, 1, 1, 1});
    }
    const auto defaults = default_distributions();
    const SamplePlan big = lhs(defaults, 500, 9);
    for (std::size_t j = 0; j < big.m(); ++j) {
        std::set<std::size_t> strata;
        for (double x : big.column(j)) strata.insert(static_cast<std::size_t>(defaults[j].cdf(x) * 500.0));
        CHECK(strata.size() == 500);
    }
}

TEST_CASE("gaussian column moments") {
    const std::vector<InputDistribution> d{InputDistribution::gaussian(Variable::v_dev, 0.0, 0.2)};
    const auto c = lhs(d, 1000, 17).column(0);
    const double mean = std::accumulate(c.begin(), c.end(), 0.0) / 1000.0;
    double var = 0.0;
    for (double x : c) var += (x - mean) * (x - mean);
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(std::sqrt(var / 999.0) - 0.2) < 0.02);
}

TEST_CASE("shifted speed deviation stays negative") {
    const std::vector<InputDistribution> d{InputDistribution::gaussian(Variable::v_dev, -5.0, 0.2)};
    for (double x : lhs(d, 1000, 3).column(0)) CHECK(x < -3.8);
}

TEST_CASE("plans are deterministic per seed") {
    const auto d = default_distributions();
    CHECK(lhs(d, 50, 4).matrix == lhs(d, 50, 4).matrix);
    CHECK(lhs(d, 50, 4).matrix != lhs(d, 50, 5).matrix);
    // columns come from independent substreams
    const std::vector<InputDistribution> first{d[0]};
    CHECK(lhs(first, 50, 4).column(0) == lhs(d, 50, 4).column(0));
}

TEST_CASE("distribution validation") {
    CHECK_THROWS_AS(InputDistribution::gaussian(Variable::v_dev, 0.0, 0.0).validate(), ConfigError);
    CHECK_THROWS_AS(InputDistribution::uniform(Variable::mu_rs, 1.0, 1.0).validate(), ConfigError);
    const std::vector<InputDistribution> dup{InputDistribution::uniform(Variable::mu_rs, 0.6, 1.0),
                                             InputDistribution::uniform(Variable::mu_rs, 0.5, 1.0)};
    CHECK_THROWS_AS(lhs(dup, 4, 1), ConfigError);
    CHECK_THROWS_AS(lhs(default_distributions(), 0, 1), ConfigError);
    const auto u = InputDistribution::uniform(Variable::mu_rs, 0.6, 1.0);
    CHECK(u.quantile(0.5) == doctest::Approx(0.8));
    CHECK(u.cdf(0.7) == doctest::Approx(0.25));
}

TEST_CASE("plan CSV and scenario rows") {
    const SamplePlan p = lhs(default_distributions(), 3, 2);
    std::ostringstream out;
    write_plan_csv(out, p);
    CHECK(out.str().rfind("row,v_dev,l_p,mu_rs\n", 0) == 0);
    const Scenario s = scenario_for_row(p, 1, base_scenario());
    CHECK(s.v_dev == p.at(1, 0));
    CHECK(s.l_p == p.at(1, 1));
    CHECK(s.mu_rs == p.at(1, 2));
}

TEST_CASE("single zero-deviation run equals a direct simulation") {
    const std::vector<InputDistribution> d{InputDistribution::uniform(Variable::v_dev, -1e-300, 1e-300)};
    const SamplePlan p = lhs(d, 1, 1);
    const Scenario base = base_scenario();
    const BatchResult b = run_batch(p, base, {}, {});
    REQUIRE(b.runs[0].has_value());
    const SimulationResult direct = simulate(base, {}, {});
    for (Channel c : kAllChannels) {
        const auto x = b.runs[0]->response.values(c), y = direct.response.values(c);
        CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
    }
}

TEST_CASE("batch runs are bit-identical across repeats and thread counts") {
    const SamplePlan p = lhs(default_distributions(), 6, 8);
    const Scenario base = base_scenario();
    BatchOptions one, many;
    one.jobs = 1;
    many.jobs = 4;
    const BatchResult a = run_batch(p, base, {}, {}, one);
    const BatchResult b = run_batch(p, base, {}, {}, many);
    REQUIRE(a.succeeded() == 6);
    for (std::size_t r = 0; r < 6; ++r)
        for (Channel c : kAllChannels) {
            const auto x = a.runs[r]->response.values(c), y = b.runs[r]->response.values(c);
            CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
        }
}

TEST_CASE("failed runs are reported, not fatal") {
    Scenario sharp = base_scenario();
    sharp.road = short_road(200.0, 0.08);
    sharp.target_speed = SpeedProfile::constant(18.0);
    const std::vector<InputDistribution> d{InputDistribution::uniform(Variable::mu_rs, 0.3, 1.0)};
    const SamplePlan p = lhs(d, 4, 1);
    const BatchResult b = run_batch(p, sharp, {}, {});
    CHECK(b.failures.size() == 4);
    CHECK(b.failures.front().reason.find("off-road") != std::string::npos);
    for (std::size_t i = 1; i < b.failures.size(); ++i) CHECK(b.failures[i].row > b.failures[i - 1].row);
    std::ostringstream out;
    write_failures_csv(out, b.failures);
    CHECK(out.str().rfind("row,reason\n", 0) == 0);
}
