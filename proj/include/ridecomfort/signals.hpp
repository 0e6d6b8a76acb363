#pragma once

// Trace containers and the time-to-space transform used by every classifier.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace ridecomfort {

/// Uniformly sampled signal. Units are carried by the owning channel.
struct TimeSeries {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    double time(std::size_t i) const noexcept { return t0 + static_cast<double>(i) * dt; }
    double duration() const noexcept { return static_cast<double>(values.size()) * dt; }

    /// Throws ConfigError unless dt > 0, values non-empty and finite.
    void validate() const;
};

/// Channels of a vehicle-dynamics trace. Rates are in deg/s, accelerations in m/s^2.
enum class Channel { vx, ax, ay, az, phi_rate, theta_rate, psi_rate, s };

inline constexpr std::array<Channel, 8> kAllChannels = {
    Channel::vx,       Channel::ax,         Channel::ay,       Channel::az,
    Channel::phi_rate, Channel::theta_rate, Channel::psi_rate, Channel::s};

/// The seven quantities compared during model validation (everything except s).
inline constexpr std::array<Channel, 7> kComparedChannels = {
    Channel::vx,       Channel::ax,         Channel::ay,      Channel::az,
    Channel::phi_rate, Channel::theta_rate, Channel::psi_rate};

std::string_view channel_name(Channel c) noexcept;
std::optional<Channel> channel_from_name(std::string_view name) noexcept;

/// Multichannel trace sharing one time base. Channels may be absent (partial
/// reference recordings); simulated traces carry all of them.
class VehicleResponse {
public:
    VehicleResponse() = default;
    VehicleResponse(double t0, double dt, std::size_t length);

    double t0() const noexcept { return t0_; }
    double dt() const noexcept { return dt_; }
    std::size_t size() const noexcept { return length_; }
    double time(std::size_t i) const noexcept { return t0_ + static_cast<double>(i) * dt_; }

    bool has(Channel c) const noexcept;
    std::span<const double> values(Channel c) const;
    TimeSeries series(Channel c) const;
    void set(Channel c, std::vector<double> values);

    /// Checks dt > 0, finite samples and a non-decreasing s channel.
    void validate() const;

private:
    double t0_ = 0.0;
    double dt_ = 0.0;
    std::size_t length_ = 0;
    std::array<std::optional<std::vector<double>>, kAllChannels.size()> channels_;
};

enum class Aggregator { mean, max_abs_envelope };

std::string_view aggregator_name(Aggregator a) noexcept;
std::optional<Aggregator> aggregator_from_name(std::string_view name) noexcept;

/// Signal indexed by arc-length position on a uniform grid.
struct SpaceSeries {
    double s0 = 0.0;
    double ds = 0.0;
    std::vector<double> values;
    Aggregator aggregator = Aggregator::mean;
    int run_count = 1;

    std::size_t size() const noexcept { return values.size(); }
    double position(std::size_t i) const noexcept { return s0 + static_cast<double>(i) * ds; }
    /// Distance covered by the grid, (size - 1) * ds.
    double length() const noexcept {
        return values.empty() ? 0.0 : static_cast<double>(values.size() - 1) * ds;
    }
};

inline constexpr double kDefaultSpatialStep = 0.1;

double rmse(std::span<const double> predicted, std::span<const double> reference);
double rmse(const TimeSeries& predicted, const TimeSeries& reference);

/// RMSE normalized by the range (max - min) of the reference.
double nrmse(std::span<const double> predicted, std::span<const double> reference);
double nrmse(const TimeSeries& predicted, const TimeSeries& reference);

/// Re-samples one channel on a uniform s grid covering [min s, max s]. The
/// s(t) mapping is inverted with a cubic Hermite segment when vx is present
/// (exact for piecewise-constant acceleration) and linearly otherwise.
SpaceSeries to_space(const VehicleResponse& run, Channel channel,
                     double ds = kDefaultSpatialStep);

/// Cuts every series to the overlap of all grids. Grids must share ds and be
/// aligned to a common lattice.
std::vector<SpaceSeries> trim_to_common(std::span<const SpaceSeries> runs);

/// Per-position reduction across runs after trimming to the common overlap.
/// max_abs_envelope keeps the sample of largest magnitude with its sign.
SpaceSeries aggregate(std::span<const SpaceSeries> runs, Aggregator aggregator = Aggregator::mean);

/// Linear interpolation of a space series at position s (clamped to the grid).
double sample_at(const SpaceSeries& series, double s);

}  // namespace ridecomfort
