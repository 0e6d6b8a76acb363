#include "ridecomfort/thresholds.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "ridecomfort/errors.hpp"

namespace ridecomfort {

std::string_view axis_name(Axis a) noexcept {
    switch (a) {
        case Axis::x: return "x";
        case Axis::y: return "y";
        case Axis::z: return "z";
    }
    return "?";
}

std::string_view style_name(DrivingStyle s) noexcept {
    switch (s) {
        case DrivingStyle::PT: return "PT";
        case DrivingStyle::ND: return "ND";
        case DrivingStyle::AG: return "AG";
    }
    return "?";
}

std::optional<Axis> axis_from_name(std::string_view name) noexcept {
    for (Axis a : {Axis::x, Axis::y, Axis::z})
        if (axis_name(a) == name) return a;
    return std::nullopt;
}

std::optional<DrivingStyle> style_from_name(std::string_view name) noexcept {
    for (DrivingStyle s : {DrivingStyle::PT, DrivingStyle::ND, DrivingStyle::AG})
        if (style_name(s) == name) return s;
    return std::nullopt;
}

void ThresholdBand::validate() const {
    if (!(lower < 0.0 && upper > 0.0) || !std::isfinite(lower) || !std::isfinite(upper))
        throw ConfigError(fmt::format("band {}-{} needs lower < 0 < upper, got ({}, {})", axis_name(axis),
                                      style_name(style), lower, upper));
}

BandTable default_threshold_bands() {
    using enum Axis;
    using enum DrivingStyle;
    return {
        {x, PT, -0.90, 0.90}, {x, ND, -2.00, 1.47}, {x, AG, -5.08, 3.07},
        {y, PT, -0.90, 0.90}, {y, ND, -4.00, 4.00}, {y, AG, -5.60, 5.60},
        {z, PT, -0.10, 0.10}, {z, ND, -0.10, 0.10}, {z, AG, -0.30, 0.30},
    };
}

BandTable load_threshold_bands(std::istream& in) {
    BandTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string a, s, lo, hi, extra;
        if (!(ls >> a)) continue;
        if (a.rfind("version=", 0) == 0) {
            if (a != "version=1") throw ParseError(lineno, fmt::format("unsupported table {}", a));
            continue;
        }
        if (!(ls >> s >> lo >> hi) || (ls >> extra)) throw ParseError(lineno, "expected `axis style lower upper`");
        const auto axis = axis_from_name(a);
        const auto style = style_from_name(s);
        if (!axis) throw ParseError(lineno, fmt::format("unknown axis '{}'", a));
        if (!style) throw ParseError(lineno, fmt::format("unknown driving style '{}'", s));
        ThresholdBand band{*axis, *style, 0.0, 0.0};
        for (auto [tok, dst] : {std::pair{&lo, &band.lower}, std::pair{&hi, &band.upper}}) {
            const auto [p, ec] = std::from_chars(tok->data(), tok->data() + tok->size(), *dst);
            if (ec != std::errc() || p != tok->data() + tok->size())
                throw ParseError(lineno, fmt::format("'{}' is not a number", *tok));
        }
        try {
            band.validate();
        } catch (const ConfigError& e) {
            throw ParseError(lineno, e.what());
        }
        for (const ThresholdBand& b : table)
            if (b.axis == band.axis && b.style == band.style)
                throw ParseError(lineno, fmt::format("duplicate band {}-{}", a, s));
        table.push_back(band);
    }
    if (table.size() != 9) throw ConfigError(fmt::format("band table needs 9 axis/style rows, found {}", table.size()));
    return table;
}

BandTable load_threshold_bands(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    return load_threshold_bands(in);
}

std::filesystem::path default_threshold_table_path() {
    return std::filesystem::path(RIDECOMFORT_DATA_DIR) / "comfort_thresholds.txt";
}

const ThresholdBand& find_band(const BandTable& table, Axis axis, DrivingStyle style) {
    for (const ThresholdBand& b : table)
        if (b.axis == axis && b.style == style) return b;
    throw ConfigError(fmt::format("no band for {}-{}", axis_name(axis), style_name(style)));
}

std::string ExceedanceSignal::label() const { return fmt::format("C_{}_{}", style_name(style), axis_name(axis)); }

ExceedanceSignal exceedance(const SpaceSeries& signal, const ThresholdBand& band) {
    band.validate();
    ExceedanceSignal out;
    out.s0 = signal.s0;
    out.ds = signal.ds;
    out.axis = band.axis;
    out.style = band.style;
    out.flags.reserve(signal.size());
    for (double v : signal.values) out.flags.push_back(v > band.upper || v < band.lower ? 1 : 0);
    return out;
}

}  // namespace ridecomfort
