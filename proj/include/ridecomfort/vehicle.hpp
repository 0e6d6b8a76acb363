#pragma once

// Lumped vehicle model: four quarter-car corners on the road surface, a
// speed-tracking longitudinal controller, planar cornering kinematics and
// roll/pitch body modes. Emits every channel of VehicleResponse.

#include <memory>
#include <utility>
#include <vector>

#include "ridecomfort/road.hpp"
#include "ridecomfort/signals.hpp"

namespace ridecomfort {

struct QuarterCarParams {
    double m_s = 400.0;      // sprung mass, kg
    double m_u = 40.0;       // unsprung mass, kg
    double k_s = 25000.0;    // suspension spring rate, N/m
    double c_s = 1800.0;     // suspension damping, Ns/m
    double k_t = 300000.0;   // tire radial stiffness, N/m
    double d_t = 5500.0;     // tire radial damping, Ns/m
    double mu_tire = 1.0;    // tire friction value

    void validate() const;
};

/// Front and rear corner parameters; left and right corners are symmetric.
struct VehicleParams {
    QuarterCarParams front;
    QuarterCarParams rear;

    static VehicleParams symmetric(const QuarterCarParams& p) { return {p, p}; }
    double effective_tire_friction() const noexcept { return 0.5 * (front.mu_tire + rear.mu_tire); }
    void validate() const;
};

struct VehicleGeometry {
    double wheelbase = 2.7;        // m
    double track_width = 1.6;      // m
    double cg_height = 0.55;       // m
    double roll_inertia = 500.0;   // kg m^2, sprung body about x
    double pitch_inertia = 2200.0; // kg m^2, sprung body about y

    void validate() const;
};

/// Piecewise-linear target speed (m/s) over arc length, held constant beyond the ends.
class SpeedProfile {
public:
    SpeedProfile() = default;
    explicit SpeedProfile(std::vector<std::pair<double, double>> points);
    static SpeedProfile constant(double speed) { return SpeedProfile({{0.0, speed}}); }

    double at(double s) const noexcept;
    double min_speed() const noexcept;
    bool empty() const noexcept { return points_.empty(); }
    const std::vector<std::pair<double, double>>& points() const noexcept { return points_; }

private:
    std::vector<std::pair<double, double>> points_;
};

struct Scenario {
    std::shared_ptr<const RoadSurface> road;
    SpeedProfile target_speed;
    double v_dev = 0.0;            // m/s, added to the target speed
    double l_p = 0.0;              // m, lateral offset from lane centre (positive left)
    double mu_rs = 1.0;            // road friction proxy
    double half_lane_width = 1.5;  // m, bound on |l_p|

    void validate() const;
};

struct SpeedController {
    double time_constant = 0.5;  // s
    double accel_limit = 4.0;    // m/s^2 at unit friction
};

struct SimulationOptions {
    double dt = 1e-3;
    SpeedController controller;
};

inline constexpr double kGravity = 9.81;
inline constexpr double kMaxStableStep = 0.005;     // s
inline constexpr double kOffRoadDemandTime = 1.0;   // s

struct SimulationResult {
    VehicleResponse response;
    /// Lateral demand exceeded the friction cap for more than one second.
    bool off_road_risk = false;
    double longest_saturation = 0.0;  // s
};

/// Drives the scenario from the start of the road to its end.
SimulationResult simulate(const Scenario& scenario, const VehicleParams& params,
                          const VehicleGeometry& geometry, const SimulationOptions& options = {});

/// States of one corner sampled at every integration step.
struct CornerResponse {
    TimeSeries s;        // position, m
    TimeSeries h;        // road input, m
    TimeSeries z_s;      // sprung displacement, m
    TimeSeries zdot_s;   // sprung velocity, m/s
    TimeSeries zddot_s;  // sprung acceleration, m/s^2
    TimeSeries z_u;      // unsprung displacement, m
    TimeSeries zdot_u;   // unsprung velocity, m/s
};

/// Single quarter car travelling over `profile` at speed(s), fixed-step RK4
/// on [z_s, z_s', z_u, z_u'] from a zero initial state.
CornerResponse corner_response(const Profile& profile, const SpeedProfile& speed,
                               const QuarterCarParams& params, double dt);

}  // namespace ridecomfort
