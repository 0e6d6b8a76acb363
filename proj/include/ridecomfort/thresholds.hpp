#pragma once

// Per-axis acceleration comfort bands for three driving styles.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ridecomfort/signals.hpp"

namespace ridecomfort {

enum class Axis { x, y, z };
enum class DrivingStyle { PT, ND, AG };  // public transport, normal, aggressive

std::string_view axis_name(Axis a) noexcept;
std::string_view style_name(DrivingStyle s) noexcept;
std::optional<Axis> axis_from_name(std::string_view name) noexcept;
std::optional<DrivingStyle> style_from_name(std::string_view name) noexcept;

struct ThresholdBand {
    Axis axis = Axis::z;
    DrivingStyle style = DrivingStyle::PT;
    double lower = 0.0;  // m/s^2, < 0
    double upper = 0.0;  // m/s^2, > 0

    void validate() const;
};

using BandTable = std::vector<ThresholdBand>;

BandTable default_threshold_bands();

/// Lines `axis style lower upper`; optional `version=1`; '#' comments. Every
/// axis/style pair must appear exactly once.
BandTable load_threshold_bands(std::istream& in);
BandTable load_threshold_bands(const std::filesystem::path& path);
std::filesystem::path default_threshold_table_path();

const ThresholdBand& find_band(const BandTable& table, Axis axis, DrivingStyle style);

/// Per-position flag on the grid of the source signal.
struct ExceedanceSignal {
    double s0 = 0.0;
    double ds = 0.0;
    std::vector<std::uint8_t> flags;
    Axis axis = Axis::z;
    DrivingStyle style = DrivingStyle::PT;

    std::size_t size() const noexcept { return flags.size(); }
    double position(std::size_t i) const noexcept { return s0 + static_cast<double>(i) * ds; }
    std::string label() const;
};

/// True where the signal lies strictly outside (lower, upper).
ExceedanceSignal exceedance(const SpaceSeries& signal, const ThresholdBand& band);

}  // namespace ridecomfort
