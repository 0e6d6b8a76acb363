#include "ridecomfort/sections.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "ridecomfort/errors.hpp"

namespace ridecomfort {

namespace {

constexpr double kWindowEps = 1e-9;

SectionReport make_report(Method method, const WindowGrid& windows) {
    SectionReport r;
    r.method = method;
    r.window_length = windows.length;
    r.total_windows = windows.count;
    return r;
}

}  // namespace

std::string_view method_name(Method m) noexcept {
    switch (m) {
        case Method::threshold: return "threshold";
        case Method::iso2631: return "iso2631";
        case Method::iri: return "iri";
    }
    return "?";
}

std::string_view criticality_name(Criticality c) noexcept { return c == Criticality::all ? "all" : "any"; }

std::size_t WindowGrid::index_of(double s) const noexcept {
    const double u = (s - s0) / length + kWindowEps;
    if (u < 0.0) return count;
    const auto k = static_cast<std::size_t>(std::floor(u));
    return k < count ? k : count;
}

WindowGrid make_windows(double s0, double track_length, double l_cr) {
    if (!(l_cr > 0.0) || !std::isfinite(l_cr)) throw ConfigError("window length must be > 0");
    if (!(track_length >= 0.0)) throw ConfigError("track length must be >= 0");
    const double n = std::floor(track_length / l_cr + kWindowEps);
    if (n < 1.0)
        throw InsufficientDataError(fmt::format("track of {} m is shorter than one {} m window", track_length, l_cr));
    return {s0, l_cr, static_cast<std::size_t>(n)};
}

CategoryRow make_row(std::string category, std::span<const std::uint8_t> window_flags) {
    CategoryRow row;
    row.category = std::move(category);
    row.critical = static_cast<std::size_t>(std::count(window_flags.begin(), window_flags.end(), std::uint8_t{1}));
    row.non_critical = window_flags.size() - row.critical;
    if (!window_flags.empty()) {
        row.r_c = 100.0 * static_cast<double>(row.critical) / static_cast<double>(window_flags.size());
        row.r_n = 100.0 - row.r_c;
    }
    return row;
}

std::vector<std::uint8_t> critical_windows(const ExceedanceSignal& flag, const WindowGrid& windows,
                                           Criticality mode) {
    if (!(flag.ds > 0.0)) throw ConfigError("flag grid step must be > 0");
    if (flag.ds > windows.length) throw ConfigError("flag grid is coarser than the window length");
    std::vector<std::size_t> seen(windows.count, 0);
    std::vector<std::size_t> hits(windows.count, 0);
    for (std::size_t i = 0; i < flag.size(); ++i) {
        const std::size_t k = windows.index_of(flag.position(i));
        if (k == windows.count) continue;
        ++seen[k];
        hits[k] += flag.flags[i] ? 1 : 0;
    }
    std::vector<std::uint8_t> out(windows.count, 0);
    for (std::size_t k = 0; k < windows.count; ++k) {
        if (seen[k] == 0) continue;
        out[k] = mode == Criticality::all ? hits[k] == seen[k] : hits[k] > 0;
    }
    return out;
}

SectionReport find_critical(const ExceedanceSignal& flag, double l_cr, Criticality mode) {
    if (flag.size() == 0) throw InsufficientDataError("empty flag signal");
    const WindowGrid windows = make_windows(flag.s0, static_cast<double>(flag.size() - 1) * flag.ds, l_cr);
    return find_critical(std::span(&flag, 1), windows, mode);
}

SectionReport find_critical(std::span<const ExceedanceSignal> flags, const WindowGrid& windows, Criticality mode) {
    SectionReport report = make_report(Method::threshold, windows);
    for (const ExceedanceSignal& f : flags) report.rows.push_back(make_row(f.label(), critical_windows(f, windows, mode)));
    return report;
}

std::vector<double> window_vibration(const VehicleResponse& run, const WindowGrid& windows,
                                     const IsoWindowOptions& options) {
    run.validate();
    const std::size_t nw = windows.count;
    const std::array<std::pair<Channel, const FilterSpec*>, 3> axes = {
        std::pair{Channel::ax, &options.x}, std::pair{Channel::ay, &options.y}, std::pair{Channel::az, &options.z}};

    const auto s = run.values(Channel::s);
    std::array<std::vector<double>, 3> weighted;
    for (std::size_t a = 0; a < 3; ++a)
        if (run.has(axes[a].first)) weighted[a] = weight_signal(run.series(axes[a].first), *axes[a].second).a_w.values;

    std::array<std::vector<double>, 3> sq;
    for (auto& v : sq) v.assign(nw, 0.0);
    std::vector<std::size_t> count(nw, 0);
    for (std::size_t i = 0; i < run.size(); ++i) {
        const std::size_t w = windows.index_of(s[i]);
        if (w == nw) continue;
        ++count[w];
        for (std::size_t a = 0; a < 3; ++a)
            if (!weighted[a].empty()) sq[a][w] += weighted[a][i] * weighted[a][i];
    }

    std::vector<double> out(nw, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t w = 0; w < nw; ++w) {
        if (count[w] == 0) continue;
        const double n = static_cast<double>(count[w]);
        out[w] = combine(std::sqrt(sq[0][w] / n), std::sqrt(sq[1][w] / n), std::sqrt(sq[2][w] / n), options.k_x,
                         options.k_y, options.k_z)
                     .a_v;
    }
    return out;
}

IsoSectionResult classify_window_vibration(std::span<const std::vector<double>> per_run, const WindowGrid& windows,
                                           bool extended_bands) {
    if (per_run.empty()) throw InsufficientDataError("no runs to classify");
    const std::size_t nw = windows.count;
    IsoSectionResult out;
    out.windows.resize(nw);
    for (std::size_t w = 0; w < nw; ++w) {
        double sum = 0.0;
        std::size_t runs = 0;
        for (const auto& r : per_run) {
            if (r.size() != nw) throw DimensionError("per-run window values do not match the partition");
            if (std::isnan(r[w])) continue;
            sum += r[w];
            ++runs;
        }
        if (runs == 0)
            throw InsufficientDataError(fmt::format("no run covers the window starting at {} m", windows.start(w)));
        out.windows[w].start = windows.start(w);
        out.windows[w].a_v = sum / static_cast<double>(runs);
        out.windows[w].label = classify_iso(out.windows[w].a_v, extended_bands);
    }

    out.report = make_report(Method::iso2631, windows);
    for (const ComfortBand& band : comfort_bands(extended_bands)) {
        if (band.label == ComfortLabel::NU) continue;
        std::vector<std::uint8_t> flags(nw);
        for (std::size_t w = 0; w < nw; ++w) flags[w] = out.windows[w].label.label == band.label;
        out.report.rows.push_back(make_row(std::string(comfort_label_name(band.label)), flags));
    }
    return out;
}

IsoSectionResult classify_windows_iso(std::span<const VehicleResponse> runs, const WindowGrid& windows,
                                      const IsoWindowOptions& options) {
    std::vector<std::vector<double>> per_run;
    per_run.reserve(runs.size());
    for (const VehicleResponse& run : runs) per_run.push_back(window_vibration(run, windows, options));
    return classify_window_vibration(per_run, windows, options.extended_bands);
}

IriSectionResult classify_windows_iri(const SpaceSeries& iri_series, const SpeedProfile& speed,
                                      const WindowGrid& windows) {
    if (iri_series.size() == 0) throw InsufficientDataError("empty IRI series");
    if (speed.empty()) throw ConfigError("IRI classification needs a speed profile");
    const std::size_t nw = windows.count;
    std::vector<double> iri_sum(nw, 0.0), speed_sum(nw, 0.0);
    std::vector<std::size_t> count(nw, 0);
    for (std::size_t i = 0; i < iri_series.size(); ++i) {
        const double s = iri_series.position(i);
        const std::size_t w = windows.index_of(s);
        if (w == nw) continue;
        iri_sum[w] += iri_series.values[i];
        speed_sum[w] += speed.at(s);
        ++count[w];
    }

    IriSectionResult out;
    out.windows.resize(nw);
    for (std::size_t w = 0; w < nw; ++w) {
        IriWindow& win = out.windows[w];
        win.start = windows.start(w);
        if (count[w] > 0) {
            win.iri = iri_sum[w] / static_cast<double>(count[w]);
            win.speed_kmh = 3.6 * speed_sum[w] / static_cast<double>(count[w]);
        } else {
            const double mid = 0.5 * (windows.start(w) + windows.end(w));
            win.iri = sample_at(iri_series, mid);
            win.speed_kmh = 3.6 * speed.at(mid);
        }
        win.quality = classify_iri(win.iri, win.speed_kmh);
    }

    out.report = make_report(Method::iri, windows);
    for (RideQuality q : {RideQuality::G, RideQuality::F, RideQuality::M, RideQuality::P}) {
        std::vector<std::uint8_t> flags(nw);
        for (std::size_t w = 0; w < nw; ++w) flags[w] = out.windows[w].quality == q;
        out.report.rows.push_back(make_row(std::string(ride_quality_name(q)), flags));
    }
    return out;
}

void write_report_csv(std::ostream& out, std::span<const SectionReport> reports) {
    out << "method,category,C,R_c,N,R_n,total,l_cr\n";
    for (const SectionReport& r : reports)
        for (const CategoryRow& row : r.rows)
            out << fmt::format("{},{},{},{:.2f},{},{:.2f},{},{}\n", method_name(r.method), row.category, row.critical,
                               row.r_c, row.non_critical, row.r_n, r.total_windows, r.window_length);
}

std::string format_report_table(std::span<const SectionReport> reports) {
    std::string out;
    for (const SectionReport& r : reports) {
        out += fmt::format("{} (w/l_cr = {}, l_cr = {} m)\n", method_name(r.method), r.total_windows, r.window_length);
        out += fmt::format("  {:<10} {:>7} {:>8} {:>7} {:>8}\n", "category", "C", "R_c", "N", "R_n");
        for (const CategoryRow& row : r.rows)
            out += fmt::format("  {:<10} {:>7} {:>8.2f} {:>7} {:>8.2f}\n", row.category, row.critical, row.r_c,
                               row.non_critical, row.r_n);
        out += '\n';
    }
    return out;
}

}  // namespace ridecomfort
