#pragma once

// Whole-body vibration frequency weighting: analog weighting stages,
// bilinear discretization into second-order sections, weighted RMS,
// combined vibration value and comfort-band classification.

#include <array>
#include <complex>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ridecomfort/signals.hpp"

namespace ridecomfort {

/// Stage order: high pass, low pass, acceleration-velocity transition, upward step.
enum class Stage { h, l, t, s };

struct FilterSpec {
    char weighting_id = 'k';
    double f1 = 0.0, f2 = 0.0, f3 = 0.0, f4 = 0.0;  // Hz
    double q4 = 0.0;
    double f5 = 0.0, q5 = 0.0;
    double f6 = 0.0, q6 = 0.0;
    std::array<bool, 4> stage_enabled{};

    bool enabled(Stage s) const noexcept { return stage_enabled[static_cast<std::size_t>(s)]; }
    /// Highest corner frequency among the enabled stages (0 if none).
    double max_corner() const noexcept;
    void validate() const;

    static FilterSpec unity() noexcept { return FilterSpec{}; }
};

/// Built-in weighting parameters for ids c, d, e, j, k.
FilterSpec builtin_weighting(char id);

using WeightingTable = std::map<char, FilterSpec>;

/// Text table, one record per id: `id f1 f2 f3 f4 Q4 f5 Q5 f6 Q6`, with '-'
/// for parameters of a disabled stage. Optional `version=<n>` line; '#' comments.
WeightingTable load_weighting_table(std::istream& in);
WeightingTable load_weighting_table(const std::filesystem::path& path);
std::filesystem::path default_weighting_table_path();

/// Continuous-time frequency response of the enabled stage product at f (Hz).
std::complex<double> analog_response(const FilterSpec& spec, double f);

/// y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

class DigitalFilter {
public:
    DigitalFilter() = default;
    DigitalFilter(std::vector<Biquad> sections, double sample_rate)
        : sections_(std::move(sections)), sample_rate_(sample_rate) {}

    const std::vector<Biquad>& sections() const noexcept { return sections_; }
    double sample_rate() const noexcept { return sample_rate_; }

    std::complex<double> response(double f) const;
    /// Cascade of transposed direct-form II sections from a zero state.
    std::vector<double> apply(std::span<const double> x) const;

private:
    std::vector<Biquad> sections_;
    double sample_rate_ = 1.0;
};

/// One section per enabled stage via p = (2/T)(1 - z^-1)/(1 + z^-1). Requires
/// sample_rate >= 2 * every enabled corner; otherwise DesignError naming the stage.
DigitalFilter design_filter(const FilterSpec& spec, double sample_rate);

struct WeightedResult {
    TimeSeries a_w;
    double a_w_rms = 0.0;
    double duration = 0.0;  // s
};

inline constexpr double kMinWeightingDuration = 1.0;  // s

WeightedResult weight_signal(const TimeSeries& a, const FilterSpec& spec);

double rms(std::span<const double> x);

struct CombinedVibration {
    double a_v = 0.0;
    double k_x = 1.0, k_y = 1.0, k_z = 1.0;
};

CombinedVibration combine(double ax_rms, double ay_rms, double az_rms, double k_x = 1.0, double k_y = 1.0,
                          double k_z = 1.0);

/// In increasing severity.
enum class ComfortLabel { NU, LU, FU, U, VU, EU };

std::string_view comfort_label_name(ComfortLabel c) noexcept;

enum class Perception { below, transition, above };

std::string_view perception_name(Perception p) noexcept;

struct ComfortBand {
    ComfortLabel label;
    double lower;  // m/s^2
};

/// Lower band bounds. The extended table adds U from 0.8 m/s^2.
std::span<const ComfortBand> comfort_bands(bool extended = false) noexcept;

struct IsoClassification {
    ComfortLabel label = ComfortLabel::NU;
    Perception perception = Perception::below;
};

inline constexpr double kPerceptionLow = 0.01;   // m/s^2
inline constexpr double kPerceptionHigh = 0.02;  // m/s^2

/// Most severe band whose lower bound is <= a_v.
IsoClassification classify_iso(double a_v, bool extended = false);

}  // namespace ridecomfort
