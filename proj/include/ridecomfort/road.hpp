#pragma once

// Road surface: reference line plus a regular elevation grid attached to it,
// smoothing-spline evaluation, and synthetic roughness generation.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "ridecomfort/spline.hpp"

namespace ridecomfort {

/// Longitudinal elevation profile sampled at a uniform step.
struct Profile {
    double s0 = 0.0;
    double step = 0.0;
    std::vector<double> z;

    std::size_t size() const noexcept { return z.size(); }
    double position(std::size_t i) const noexcept { return s0 + static_cast<double>(i) * step; }
    double length() const noexcept {
        return z.empty() ? 0.0 : static_cast<double>(z.size() - 1) * step;
    }
    /// Linear interpolation, clamped to the end samples.
    double at(double s) const noexcept;
};

/// Reference line along which the grid is laid out. Stations are arc length.
struct ReferenceLine {
    std::vector<double> stations;
    std::vector<double> headings;       // rad
    std::vector<double> x, y;           // m, integrated from headings
    std::vector<double> elevation;      // m
    std::vector<double> slope_percent;  // 100 * d(elevation)/ds
    std::vector<double> curvature;      // 1/m, d(heading)/ds

    std::size_t size() const noexcept { return stations.size(); }
    double length() const noexcept {
        return stations.empty() ? 0.0 : stations.back() - stations.front();
    }
    /// Curvature at s by linear interpolation (clamped).
    double curvature_at(double s) const noexcept;
    /// Accumulated absolute heading change per kilometre in gon/km.
    double curvature_gon_per_km() const noexcept;
};

/// Builds x, y, slope and curvature from stations, headings and elevation.
ReferenceLine make_reference_line(std::vector<double> stations, std::vector<double> headings,
                                  std::vector<double> elevation);

/// Regular grid of elevation deviations relative to the reference-line
/// elevation. Rows are stations, columns are lateral offsets (positive left).
struct RoadGrid {
    ReferenceLine ref_line;
    double station_step = 0.0;
    double offset_start = 0.0;
    double offset_step = 0.0;
    std::size_t n_offsets = 0;
    std::vector<double> elevations;  // row-major, stations x offsets

    std::size_t n_stations() const noexcept { return ref_line.size(); }
    double offset(std::size_t j) const noexcept {
        return offset_start + static_cast<double>(j) * offset_step;
    }
    double offset_end() const noexcept {
        return n_offsets == 0 ? offset_start : offset(n_offsets - 1);
    }
    double& at(std::size_t i, std::size_t j) { return elevations[i * n_offsets + j]; }
    double at(std::size_t i, std::size_t j) const { return elevations[i * n_offsets + j]; }

    /// Throws ConfigError on any violated invariant.
    void validate() const;

    friend bool operator==(const RoadGrid& a, const RoadGrid& b);
};

/// Penalty weights of the smoothing spline: along stations, across offsets,
/// and on the reference-line elevation. Zero means pure interpolation.
struct SmoothingParams {
    double lambda_x = 0.0;
    double lambda_y = 0.0;
    double lambda_z = 0.0;

    void validate() const;
};

inline constexpr double kMaxElevationDeviation = 10.0;  // m, relative to reference
inline constexpr double kOutlierSigmas = 5.0;
inline constexpr double kOutlierSigmaFloor = 0.005;  // m

struct GridLoadResult {
    RoadGrid grid;
    std::size_t outliers_replaced = 0;
};

/// Reads the plain-text grid format:
///
///   station_step=<m>
///   offset_start=<m>
///   offset_step=<m>
///   n_offsets=<int>
///   s heading elevation_ref z1 ... zn      (one line per station)
///
/// Blank lines and lines starting with '#' are ignored. Cells deviating from
/// their 3x3 neighbourhood median by more than 5 robust sigmas, or lying more
/// than 10 m off the reference elevation, are replaced by that median.
GridLoadResult load_grid(std::istream& in);
GridLoadResult load_grid(const std::filesystem::path& path);

void save_grid(std::ostream& out, const RoadGrid& grid);
void save_grid(const std::filesystem::path& path, const RoadGrid& grid);

/// Smoothed, interpolating evaluator over a grid. Construction fits the
/// tensor-product smoothing spline once; queries are O(1) and thread-safe.
class RoadSurface {
public:
    RoadSurface(RoadGrid grid, SmoothingParams params = {});

    const RoadGrid& grid() const noexcept { return grid_; }
    const SmoothingParams& params() const noexcept { return params_; }

    double s_begin() const noexcept { return grid_.ref_line.stations.front(); }
    double s_end() const noexcept { return grid_.ref_line.stations.back(); }

    /// Absolute elevation (reference + deviation) at (s, v). Throws DomainError
    /// outside the grid hull.
    double elevation_at(double s, double v) const;
    /// Same as elevation_at but clamps the query into the hull.
    double elevation_clamped(double s, double v) const noexcept;
    /// Reference-line curvature at s (1/m).
    double curvature_at(double s) const noexcept { return grid_.ref_line.curvature_at(s); }

private:
    double evaluate(double s, double v) const noexcept;

    RoadGrid grid_;
    SmoothingParams params_;
    SplineNodes ref_;             // smoothed reference elevation along s
    std::vector<double> z_;       // smoothed node values
    std::vector<double> z_ss_;    // d2/ds2
    std::vector<double> z_vv_;    // d2/dv2
    std::vector<double> z_ssvv_;  // d4/ds2dv2
};

/// One-shot query; fits the spline on every call. Prefer RoadSurface for many queries.
double elevation_at(const RoadGrid& grid, double s, double v, const SmoothingParams& params);

/// Elevation along the reference line at a fixed lateral offset, uniform step.
Profile wheel_track_profile(const RoadSurface& surface, double lateral_offset, double step);
Profile wheel_track_profile(const RoadGrid& grid, double lateral_offset,
                            const SmoothingParams& params, double step);

enum class RoughnessClass { A, B, C, D, E };

std::optional<RoughnessClass> roughness_class_from_name(std::string_view name) noexcept;
char roughness_class_name(RoughnessClass c) noexcept;

/// Phi0 at the reference wave number n0 = 0.1 cycles/m, in m^3.
double roughness_phi0(RoughnessClass c) noexcept;

inline constexpr double kReferenceWaveNumber = 0.1;  // cycles/m
inline constexpr double kMinWaveNumber = 0.01;       // cycles/m
inline constexpr double kMaxWaveNumber = 10.0;       // cycles/m

/// Zero-mean profile with PSD Phi(n) = Phi0 (n/n0)^-2 over [kMinWaveNumber,
/// min(kMaxWaveNumber, Nyquist)), built by random-phase spectral shaping.
/// Deterministic for a given seed; the phases do not depend on the class.
Profile synth_profile(double length, double step, RoughnessClass roughness, std::uint64_t seed);

/// Replaces [start, start + length) of `base` by a profile of another class,
/// with raised-cosine blends of `taper` metres at both ends of the patch.
void insert_patch(Profile& base, double start, double length, RoughnessClass roughness,
                  std::uint64_t seed, double taper = 1.0);

/// Single-lane grid carrying `profile` uniformly across all lateral offsets.
/// The reference line is flat with constant curvature.
RoadGrid grid_from_profile(const Profile& profile, double half_width, double lateral_step,
                           double curvature = 0.0);

}  // namespace ridecomfort
