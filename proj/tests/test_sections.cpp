#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ridecomfort/errors.hpp"
#include "ridecomfort/sections.hpp"

using namespace ridecomfort;

namespace {

ExceedanceSignal flags_over(double length, double ds, std::uint8_t value) {
    ExceedanceSignal e;
    e.ds = ds;
    e.flags.assign(static_cast<std::size_t>(std::llround(length / ds)) + 1, value);
    return e;
}

SimulationResult run_on(const Profile& p, double v) {
    Scenario sc;
    sc.road = std::make_shared<const RoadSurface>(grid_from_profile(p, 2.5, 0.5));
    sc.target_speed = SpeedProfile::constant(v);
    return simulate(sc, {}, {});
}

}  // namespace

TEST_CASE("window counts") {
    CHECK(make_windows(0.0, 3025.0, 5.0).count == 605);
    CHECK(make_windows(0.0, 1595.0, 5.0).count == 319);
    CHECK(make_windows(0.0, 2135.0, 5.0).count == 427);
    CHECK(make_windows(0.0, 12.0, 5.0).count == 2);
    CHECK(make_windows(0.0, 3.0 * 0.1 * 50.0, 5.0).count == 3);
    CHECK_THROWS_AS(make_windows(0.0, 4.0, 5.0), InsufficientDataError);
    const WindowGrid w = make_windows(10.0, 100.0, 5.0);
    CHECK(w.index_of(10.0) == 0);
    CHECK(w.index_of(14.99) == 0);
    CHECK(w.index_of(15.0) == 1);
    CHECK(w.index_of(9.0) == w.count);
    CHECK(w.index_of(111.0) == w.count);
}

TEST_CASE("complete-window rule") {
    const SectionReport all = find_critical(flags_over(100.0, 0.1, 1), 5.0);
    REQUIRE(all.rows.size() == 1);
    CHECK(all.total_windows == 20);
    CHECK(all.rows[0].critical == 20);
    CHECK(all.rows[0].r_c == doctest::Approx(100.0));

    ExceedanceSignal one = flags_over(100.0, 0.1, 0);
    one.flags[123] = 1;
    const SectionReport r = find_critical(one, 5.0);
    CHECK(r.rows[0].critical == 0);
    CHECK(r.rows[0].non_critical == 20);
    CHECK(find_critical(one, 5.0, Criticality::any).rows[0].critical == 1);

    ExceedanceSignal block = flags_over(100.0, 0.1, 0);
    for (std::size_t i = 100; i <= 200; ++i) block.flags[i] = 1;  // 10 m .. 20 m
    const auto w = critical_windows(block, make_windows(0.0, 100.0, 5.0));
    CHECK(w[2] == 1);
    CHECK(w[3] == 1);
    CHECK(w[1] == 0);
    CHECK(w[4] == 0);
}

TEST_CASE("critical_windows rejects coarse flags") {
    const ExceedanceSignal coarse = flags_over(100.0, 10.0, 1);
    CHECK_THROWS_AS(critical_windows(coarse, make_windows(0.0, 100.0, 5.0)), ConfigError);
}

TEST_CASE("row ratios add up") {
    const CategoryRow row = make_row("C_PT_z", std::vector<std::uint8_t>{1, 0, 0, 1, 1, 0, 0, 0});
    CHECK(row.critical == 3);
    CHECK(row.non_critical == 5);
    CHECK(row.r_c == doctest::Approx(37.5));
    CHECK(row.r_c + row.r_n == doctest::Approx(100.0));
}

TEST_CASE("IRI windows") {
    const WindowGrid w = make_windows(0.0, 100.0, 5.0);
    const SpeedProfile v80 = SpeedProfile::constant(80.0 / 3.6);
    {
        const std::vector<IriSample> s{{0.0, 1.0}, {100.0, 1.0}};
        const auto r = classify_windows_iri(interpolate_iri(s), v80, w);
        REQUIRE(r.report.rows.size() == 4);
        for (const auto& row : r.report.rows) CHECK(row.critical == 0);
        CHECK(r.windows[3].speed_kmh == doctest::Approx(80.0));
    }
    {
        const std::vector<IriSample> s{{0.0, 3.0}, {100.0, 3.0}};
        const auto r = classify_windows_iri(interpolate_iri(s), v80, w);
        for (const auto& win : r.windows) CHECK(win.quality == RideQuality::M);
        CHECK(r.report.rows[2].category == "M");
        CHECK(r.report.rows[2].critical == 20);
    }
    {
        const std::vector<IriSample> s{{0.0, 1.0}, {49.9, 1.0}, {50.0, 3.0}, {100.0, 3.0}};
        const auto r = classify_windows_iri(interpolate_iri(s), v80, w);
        CHECK(r.report.rows[2].critical == 10);
    }
}

TEST_CASE("ISO windows on a trace of zeros") {
    VehicleResponse z(0.0, 0.004, 5001);
    std::vector<double> s(5001), zero(5001, 0.0), vx(5001, 10.0);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.04 * static_cast<double>(i);
    z.set(Channel::s, s);
    z.set(Channel::vx, vx);
    for (Channel c : {Channel::ax, Channel::ay, Channel::az}) z.set(c, zero);
    const WindowGrid w = make_windows(0.0, 200.0, 5.0);
    const auto r = classify_windows_iso(std::vector<VehicleResponse>{z}, w);
    for (const auto& win : r.windows) {
        CHECK(win.label.label == ComfortLabel::NU);
        CHECK(win.label.perception == Perception::below);
    }
    for (const auto& row : r.report.rows) CHECK(row.critical == 0);
    CHECK(r.report.rows.size() == 4);
}

TEST_CASE("ISO windows on a smooth road stay not uncomfortable") {
    const Profile p = synth_profile(600.0, 0.1, RoughnessClass::A, 3);
    const SimulationResult run = run_on(p, 80.0 / 3.6);
    const WindowGrid w = make_windows(0.0, 600.0, 5.0);
    const auto a_v = window_vibration(run.response, w);
    // whole-trace value from the weighting primitives
    const auto& tr = run.response;
    const double x = weight_signal(tr.series(Channel::ax), builtin_weighting('d')).a_w_rms;
    const double y = weight_signal(tr.series(Channel::ay), builtin_weighting('d')).a_w_rms;
    const double zz = weight_signal(tr.series(Channel::az), builtin_weighting('k')).a_w_rms;
    CHECK(combine(x, y, zz).a_v < 0.315);
    for (double v : a_v) CHECK(v < 0.315);
    const auto r = classify_window_vibration(std::vector<std::vector<double>>{a_v}, w);
    for (const auto& row : r.report.rows) CHECK(row.critical == 0);
}

TEST_CASE("ISO windows locate a rough patch") {
    Profile p = synth_profile(400.0, 0.1, RoughnessClass::A, 3);
    insert_patch(p, 200.0, 20.0, RoughnessClass::E, 11);
    const double v = 15.0;
    const SimulationResult run = run_on(p, v);
    const WindowGrid w = make_windows(0.0, 400.0, 5.0);
    const auto r = classify_windows_iso(std::vector<VehicleResponse>{run.response}, w);
    bool inside = false;
    for (std::size_t k = 0; k < w.count; ++k) {
        const bool flagged = r.windows[k].label.label != ComfortLabel::NU;
        const bool overlaps = w.end(k) > 200.0 && w.start(k) < 220.0;
        if (overlaps) inside = inside || flagged;
        else if (w.end(k) <= 195.0 || w.start(k) >= 220.0 + 2.0 * v) CHECK_FALSE(flagged);
    }
    CHECK(inside);
}

TEST_CASE("ISO window averaging skips NaN") {
    const WindowGrid w = make_windows(0.0, 10.0, 5.0);
    const double nan = std::nan("");
    const std::vector<std::vector<double>> runs{{0.2, nan}, {0.6, 0.4}};
    const auto r = classify_window_vibration(runs, w);
    CHECK(r.windows[0].a_v == doctest::Approx(0.4));
    CHECK(r.windows[1].a_v == doctest::Approx(0.4));
    CHECK(r.windows[0].label.label == ComfortLabel::LU);
}

TEST_CASE("report writers") {
    SectionReport rep = find_critical(flags_over(20.0, 0.1, 1), 5.0);
    std::ostringstream csv;
    write_report_csv(csv, std::span(&rep, 1));
    const std::string text = csv.str();
    CHECK(text.rfind("method,category,C,R_c,N,R_n,total,l_cr\n", 0) == 0);
    CHECK(text.find("threshold,C_PT_z,4,100.00,0,0.00,4,5") != std::string::npos);
    CHECK(format_report_table(std::span(&rep, 1)).find("C_PT_z") != std::string::npos);
}
