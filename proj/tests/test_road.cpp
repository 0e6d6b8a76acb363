#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "ridecomfort/errors.hpp"
#include "ridecomfort/road.hpp"
#include "ridecomfort/trace_io.hpp"

using namespace ridecomfort;

namespace {

RoadGrid flat_grid(std::size_t stations, std::size_t offsets, double step = 1.0, double lat = 0.5) {
    std::vector<double> st(stations), hd(stations, 0.0), el(stations, 0.0);
    for (std::size_t i = 0; i < stations; ++i) st[i] = step * static_cast<double>(i);
    RoadGrid g;
    g.ref_line = make_reference_line(st, hd, el);
    g.station_step = step;
    g.offset_step = lat;
    g.n_offsets = offsets;
    g.offset_start = -lat * static_cast<double>(offsets - 1) / 2.0;
    g.elevations.assign(stations * offsets, 0.0);
    return g;
}

}  // namespace

TEST_CASE("load a flat 2x2 grid") {
    std::istringstream in(
        "station_step=1\noffset_start=-0.5\noffset_step=1\nn_offsets=2\n"
        "0 0 0 0.0 0.0\n1 0 0 0.0 0.0\n");
    const auto r = load_grid(in);
    CHECK(r.grid.n_stations() == 2);
    CHECK(r.grid.n_offsets == 2);
    for (double z : r.grid.elevations) CHECK(z == 0.0);
    CHECK(r.outliers_replaced == 0);
}

TEST_CASE("a spiked cell is replaced by the neighbourhood median") {
    std::ostringstream text;
    text << "station_step=1\noffset_start=-1\noffset_step=1\nn_offsets=3\n";
    for (int i = 0; i < 5; ++i) text << i << " 0 0 0 " << (i == 2 ? "9999" : "0") << " 0\n";
    std::istringstream in(text.str());
    const auto r = load_grid(in);
    CHECK(r.outliers_replaced == 1);
    CHECK(r.grid.at(2, 1) == 0.0);
}

TEST_CASE("grid parse errors carry line numbers") {
    std::istringstream ragged("station_step=1\noffset_start=0\noffset_step=1\nn_offsets=2\n0 0 0 1 1\n1 0 0 1\n");
    CHECK_THROWS_AS(load_grid(ragged), ParseError);
    std::istringstream backwards("station_step=1\noffset_start=0\noffset_step=1\nn_offsets=1\n1 0 0 0\n0 0 0 0\n");
    try {
        load_grid(backwards);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 6);
    }
    std::istringstream junk("station_step=1\noffset_start=0\noffset_step=1\nn_offsets=1\n0 0 0 abc\n");
    CHECK_THROWS_AS(load_grid(junk), ParseError);
}

TEST_CASE("grid save/load round trip") {
    RoadGrid g = flat_grid(20, 5, 0.5, 0.25);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 0.002);
    for (double& z : g.elevations) z = n(rng);
    std::stringstream ss;
    save_grid(ss, g);
    const auto back = load_grid(ss);
    CHECK(back.outliers_replaced == 0);
    CHECK(back.grid == g);
}

TEST_CASE("spline evaluation") {
    RoadGrid g = flat_grid(12, 5);
    RoadSurface flat(g);
    CHECK(flat.elevation_at(3.3, 0.2) == 0.0);

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    for (double& z : g.elevations) z = u(rng);
    RoadSurface bumpy(g);
    for (std::size_t i = 0; i < g.n_stations(); ++i)
        for (std::size_t j = 0; j < g.n_offsets; ++j)
            CHECK(bumpy.elevation_at(g.ref_line.stations[i], g.offset(j)) == doctest::Approx(g.at(i, j)).epsilon(1e-12));

    // plane z = s / 2 reproduced exactly between nodes
    RoadGrid plane = flat_grid(12, 5);
    for (std::size_t i = 0; i < plane.n_stations(); ++i)
        for (std::size_t j = 0; j < plane.n_offsets; ++j) plane.at(i, j) = 0.5 * plane.ref_line.stations[i];
    RoadSurface ps(plane);
    for (double s : {0.5, 3.5, 7.25, 10.5}) CHECK(std::abs(ps.elevation_at(s, 0.1) - 0.5 * s) < 1e-9);

    CHECK_THROWS_AS(bumpy.elevation_at(-1.0, 0.0), DomainError);
    CHECK_THROWS_AS(bumpy.elevation_at(2.0, 5.0), DomainError);
    CHECK(elevation_at(g, 2.0, 0.0, {}) == doctest::Approx(g.at(2, 2)));
}

TEST_CASE("spline surface is continuous") {
    RoadGrid g = flat_grid(30, 7);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 0.005);
    for (double& z : g.elevations) z = n(rng);
    RoadSurface surf(g, {0.1, 0.1, 0.0});
    std::uniform_real_distribution<double> us(0.0, 28.0), uv(-1.4, 1.4);
    for (int k = 0; k < 100; ++k) {
        const double s = us(rng), v = uv(rng);
        CHECK(std::abs(surf.elevation_at(s + 1e-6, v) - surf.elevation_at(s, v)) < 1e-3);
    }
}

TEST_CASE("smoothing reduces roughness") {
    RoadGrid g = flat_grid(40, 5);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 0.01);
    for (double& z : g.elevations) z = n(rng);
    RoadSurface raw(g), smooth(g, {10.0, 10.0, 0.0});
    double e_raw = 0.0, e_smooth = 0.0;
    for (double s = 0.0; s <= 39.0; s += 0.25) {
        e_raw += std::pow(raw.elevation_at(s, 0.0), 2);
        e_smooth += std::pow(smooth.elevation_at(s, 0.0), 2);
    }
    CHECK(e_smooth < 0.5 * e_raw);
    CHECK_THROWS_AS(SmoothingParams({-1.0, 0.0, 0.0}).validate(), ConfigError);
}

TEST_CASE("wheel track profiles") {
    RoadGrid g = flat_grid(21, 5);
    RoadSurface flat(g);
    for (double z : wheel_track_profile(flat, 0.5, 0.25).z) CHECK(z == 0.0);

    RoadGrid tilt = g;
    for (std::size_t i = 0; i < tilt.n_stations(); ++i)
        for (std::size_t j = 0; j < tilt.n_offsets; ++j) tilt.at(i, j) = 0.02 * tilt.offset(j);
    RoadSurface ts(tilt);
    for (double z : wheel_track_profile(ts, 0.8, 0.5).z) CHECK(z == doctest::Approx(0.016).epsilon(1e-9));

    RoadGrid ref = flat_grid(21, 3);
    std::vector<double> el(21);
    for (std::size_t i = 0; i < el.size(); ++i) el[i] = 0.3 * std::sin(0.4 * static_cast<double>(i));
    ref.ref_line = make_reference_line(ref.ref_line.stations, ref.ref_line.headings, el);
    const Profile p = wheel_track_profile(ref, 0.0, {}, 1.0);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p.z[i] - el[i]) < 1e-9);
}

TEST_CASE("reference line geometry") {
    std::vector<double> st{0, 1, 2, 3}, hd{0, 0.1, 0.2, 0.3}, el{0, 0.01, 0.02, 0.03};
    const ReferenceLine rl = make_reference_line(st, hd, el);
    CHECK(rl.curvature_at(1.5) == doctest::Approx(0.1));
    CHECK(rl.slope_percent[1] == doctest::Approx(1.0));
    CHECK(rl.curvature_gon_per_km() == doctest::Approx(0.3 * 200.0 / M_PI / 3.0 * 1000.0));
    CHECK_THROWS(make_reference_line({0, 1, 1}, {0, 0, 0}, {0, 0, 0}));
}

TEST_CASE("synthetic roughness profiles") {
    const Profile a = synth_profile(500.0, 0.1, RoughnessClass::A, 7);
    const Profile b = synth_profile(500.0, 0.1, RoughnessClass::B, 7);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.z[i] == doctest::Approx(2.0 * a.z[i]).epsilon(1e-12));

    double mean = 0.0;
    for (double z : a.z) mean += z;
    CHECK(std::abs(mean / static_cast<double>(a.size())) < 1e-12);

    const Profile again = synth_profile(500.0, 0.1, RoughnessClass::A, 7);
    CHECK(again.z == a.z);
    CHECK(synth_profile(500.0, 0.1, RoughnessClass::A, 8).z != a.z);
    CHECK_THROWS_AS(synth_profile(5.0, 1.0, RoughnessClass::A, 1), ConfigError);
}

TEST_CASE("synthetic profile matches its target PSD") {
    const double step = 0.1;
    const Profile p = synth_profile(10000.0, step, RoughnessClass::C, 21);
    const std::size_t n = p.size() - (p.size() % 2);
    std::vector<double> x(p.z.begin(), p.z.begin() + static_cast<std::ptrdiff_t>(n));
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> X;
    fft.fwd(X, x);
    const double L = step * static_cast<double>(n);
    const double phi0 = roughness_phi0(RoughnessClass::C);
    // one-sided periodogram averaged over octave bands
    for (double lo = 0.02; lo < 1.0; lo *= 2.0) {
        const double hi = std::min(2.0 * lo, 1.0);
        double measured = 0.0, target = 0.0;
        int count = 0;
        for (std::size_t k = 1; k < n / 2; ++k) {
            const double f = static_cast<double>(k) / L;
            if (f < lo || f >= hi) continue;
            measured += 2.0 * std::norm(X[k]) * step / static_cast<double>(n);
            target += phi0 * std::pow(f / kReferenceWaveNumber, -2.0);
            ++count;
        }
        REQUIRE(count > 0);
        const double ratio = measured / target;
        CHECK(ratio > 0.5);
        CHECK(ratio < 2.0);
    }
    CHECK(roughness_phi0(RoughnessClass::A) == doctest::Approx(1e-6));
    CHECK(roughness_phi0(RoughnessClass::E) == doctest::Approx(256e-6));
}

TEST_CASE("patch insertion") {
    Profile base = synth_profile(200.0, 0.1, RoughnessClass::A, 3);
    const Profile orig = base;
    insert_patch(base, 100.0, 20.0, RoughnessClass::E, 4, 1.0);
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double s = base.position(i);
        if (s < 99.0 || s > 121.0) CHECK(base.z[i] == orig.z[i]);
    }
    double var_in = 0.0, var_out = 0.0;
    int n_in = 0, n_out = 0;
    for (std::size_t i = 1; i < base.size(); ++i) {
        const double d = base.z[i] - base.z[i - 1];
        const double s = base.position(i);
        if (s > 101.0 && s < 119.0) var_in += d * d, ++n_in;
        else if (s < 90.0) var_out += d * d, ++n_out;
    }
    CHECK(var_in / n_in > 20.0 * var_out / n_out);
}

TEST_CASE("grid_from_profile is laterally uniform") {
    const Profile p = synth_profile(50.0, 0.5, RoughnessClass::B, 5);
    const RoadGrid g = grid_from_profile(p, 2.0, 0.5, 0.01);
    CHECK(g.n_offsets == 9);
    RoadSurface s(g);
    CHECK(s.curvature_at(10.0) == doctest::Approx(0.01));
    for (std::size_t i = 0; i < p.size(); i += 7)
        CHECK(s.elevation_at(p.position(i), 1.3) == doctest::Approx(p.z[i]).epsilon(1e-9));
}

TEST_CASE("roughness class names") {
    CHECK(roughness_class_from_name("C") == RoughnessClass::C);
    CHECK(roughness_class_name(RoughnessClass::E) == 'E');
    CHECK_FALSE(roughness_class_from_name("Z").has_value());
}

TEST_CASE("profile CSV round trip") {
    Profile p{0.0, 0.25, {0.0, 0.001, -0.002, 0.0005}};
    std::stringstream ss;
    write_profile_csv(ss, p);
    const Profile q = read_profile_csv(ss);
    CHECK(q.step == doctest::Approx(0.25));
    CHECK(q.z == p.z);
}
