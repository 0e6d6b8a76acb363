#pragma once

// Critical road sections: the track is cut into contiguous windows of length
// l_cr and each window is judged by one of the three comfort methods.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ridecomfort/iri.hpp"
#include "ridecomfort/iso2631.hpp"
#include "ridecomfort/signals.hpp"
#include "ridecomfort/thresholds.hpp"
#include "ridecomfort/vehicle.hpp"

namespace ridecomfort {

inline constexpr double kDefaultWindowLength = 5.0;  // m

enum class Method { threshold, iso2631, iri };

std::string_view method_name(Method m) noexcept;

/// ALL: every sample in the window must be flagged. ANY: one is enough.
enum class Criticality { all, any };

std::string_view criticality_name(Criticality c) noexcept;

struct WindowGrid {
    double s0 = 0.0;
    double length = kDefaultWindowLength;
    std::size_t count = 0;

    double start(std::size_t k) const noexcept { return s0 + static_cast<double>(k) * length; }
    double end(std::size_t k) const noexcept { return start(k + 1); }
    /// Window holding position s, or count when s is outside the partition.
    std::size_t index_of(double s) const noexcept;
};

/// floor(track_length / l_cr) windows from s0. Throws InsufficientDataError
/// when the track is shorter than one window.
WindowGrid make_windows(double s0, double track_length, double l_cr);

struct CategoryRow {
    std::string category;
    std::size_t critical = 0;
    std::size_t non_critical = 0;
    double r_c = 0.0;  // percent
    double r_n = 0.0;  // percent
};

struct SectionReport {
    Method method = Method::threshold;
    double window_length = kDefaultWindowLength;
    std::size_t total_windows = 0;
    std::vector<CategoryRow> rows;
};

CategoryRow make_row(std::string category, std::span<const std::uint8_t> window_flags);

/// Per-window criticality of a flag signal on the given partition.
std::vector<std::uint8_t> critical_windows(const ExceedanceSignal& flag, const WindowGrid& windows,
                                           Criticality mode = Criticality::all);

/// Windows laid from the start of the flag grid over its full extent.
SectionReport find_critical(const ExceedanceSignal& flag, double l_cr, Criticality mode = Criticality::all);
SectionReport find_critical(std::span<const ExceedanceSignal> flags, const WindowGrid& windows,
                            Criticality mode = Criticality::all);

struct IsoWindowOptions {
    FilterSpec x = builtin_weighting('d');
    FilterSpec y = builtin_weighting('d');
    FilterSpec z = builtin_weighting('k');
    double k_x = 1.0, k_y = 1.0, k_z = 1.0;
    bool extended_bands = false;
};

struct IsoWindow {
    double start = 0.0;
    double a_v = 0.0;  // mean over runs, m/s^2
    IsoClassification label;
};

struct IsoSectionResult {
    std::vector<IsoWindow> windows;
    SectionReport report;  // one row per label above NU, exact-label counts
};

/// Per-window a_v of one run: the run is weighted over its whole duration and
/// the weighted RMS of each window uses the samples positioned inside it.
/// Absent acceleration channels contribute zero; uncovered windows are NaN.
std::vector<double> window_vibration(const VehicleResponse& run, const WindowGrid& windows,
                                     const IsoWindowOptions& options = {});

/// Averages per-run window values (NaN entries skipped) and classifies.
IsoSectionResult classify_window_vibration(std::span<const std::vector<double>> per_run, const WindowGrid& windows,
                                           bool extended_bands = false);

IsoSectionResult classify_windows_iso(std::span<const VehicleResponse> runs, const WindowGrid& windows,
                                      const IsoWindowOptions& options = {});

struct IriWindow {
    double start = 0.0;
    double iri = 0.0;        // m/km
    double speed_kmh = 0.0;
    RideQuality quality = RideQuality::VG;
};

struct IriSectionResult {
    std::vector<IriWindow> windows;
    SectionReport report;  // rows G, F, M, P
};

/// Window mean of the interpolated IRI and of the target speed.
IriSectionResult classify_windows_iri(const SpaceSeries& iri_series, const SpeedProfile& speed,
                                      const WindowGrid& windows);

void write_report_csv(std::ostream& out, std::span<const SectionReport> reports);
/// Aligned text table, one block per method.
std::string format_report_table(std::span<const SectionReport> reports);

}  // namespace ridecomfort
