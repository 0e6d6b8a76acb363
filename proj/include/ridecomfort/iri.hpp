#pragma once

// International Roughness Index from the golden-car quarter model and the
// speed-dependent ride-quality bands.

#include <array>
#include <complex>
#include <span>
#include <string_view>
#include <vector>

#include "ridecomfort/road.hpp"
#include "ridecomfort/signals.hpp"

namespace ridecomfort {

/// Quarter-car rates normalized by the sprung mass.
struct GoldenCarParams {
    double c = 6.00;    // c_s / m_s, 1/s
    double k1 = 653.0;  // k_t / m_s, 1/s^2
    double k2 = 63.3;   // k_s / m_s, 1/s^2
    double mu = 0.15;   // m_u / m_s
};

inline constexpr GoldenCarParams kGoldenCar{};

using StateMatrix = std::array<std::array<double, 4>, 4>;

/// x' = A x + B h with x = [z_s, z_s', z_u, z_u'] and B = [0, 0, 0, k1/mu].
StateMatrix iri_state_matrix(const GoldenCarParams& p) noexcept;
std::array<std::complex<double>, 4> iri_eigenvalues(const GoldenCarParams& p);
bool iri_model_stable(const GoldenCarParams& p);

inline constexpr double kMaxIriStep = 0.25;        // m
inline constexpr double kIriInitLength = 11.0;     // m
inline constexpr double kIriReferenceSpeed = 80.0 / 3.6;  // m/s

struct IriOptions {
    GoldenCarParams car = kGoldenCar;
    double init_length = kIriInitLength;
};

struct IriResult {
    double start = 0.0;           // m
    double iri = 0.0;             // m/km
    double segment_length = 0.0;  // m
    double speed = 0.0;           // m/s
    /// Running integral of |z_s' - z_u'| dt inside the segment at every profile sample, m.
    std::vector<double> accumulated;
};

/// Full segments of `segment_length` from the profile start; a trailing partial
/// segment is dropped. The integration runs over the whole profile from a
/// state matched to the mean slope of the first init_length metres.
std::vector<IriResult> compute_iri(const Profile& profile, double speed, double segment_length,
                                   const IriOptions& options = {});

enum class RideQuality { VG, G, F, M, P };

std::string_view ride_quality_name(RideQuality q) noexcept;

struct IriBands {
    double speed_kmh;
    std::array<double, 4> upper;  // inclusive upper bounds of VG, G, F, M
};

std::span<const IriBands> iri_band_table() noexcept;

/// Column with the nearest speed; ties go to the lower speed.
const IriBands& iri_bands_for(double speed_kmh);

RideQuality classify_iri(double iri, double speed_kmh);

struct IriSample {
    double station;  // m
    double iri;      // m/km
};

/// Linear interpolation of station samples onto a uniform grid from the first to the last station.
SpaceSeries interpolate_iri(std::span<const IriSample> samples, double ds = kDefaultSpatialStep);

}  // namespace ridecomfort
