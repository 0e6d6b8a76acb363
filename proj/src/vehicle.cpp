#include "ridecomfort/vehicle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "ridecomfort/errors.hpp"

namespace ridecomfort {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr std::size_t kMaxSteps = 50'000'000;

// Tire damping acts on the road velocity; carrying q = m_u * z_u' - d_t * h
// instead of z_u' removes h' from the equations.
struct CornerState {
    double zs = 0.0;
    double vs = 0.0;
    double zu = 0.0;
    double q = 0.0;
};

double unsprung_velocity(const CornerState& x, double h, const QuarterCarParams& p) {
    return (x.q + p.d_t * h) / p.m_u;
}

double sprung_acceleration(const CornerState& x, double h, const QuarterCarParams& p) {
    const double vu = unsprung_velocity(x, h, p);
    return (-p.k_s * (x.zs - x.zu) - p.c_s * (x.vs - vu)) / p.m_s;
}

CornerState derivative(const CornerState& x, double h, const QuarterCarParams& p) {
    const double vu = unsprung_velocity(x, h, p);
    const double suspension = p.k_s * (x.zs - x.zu) + p.c_s * (x.vs - vu);
    return {x.vs, -suspension / p.m_s, vu, suspension - p.k_t * (x.zu - h) - p.d_t * vu};
}

CornerState axpy(const CornerState& x, double a, const CornerState& k) {
    return {x.zs + a * k.zs, x.vs + a * k.vs, x.zu + a * k.zu, x.q + a * k.q};
}

CornerState rk4(const CornerState& x, double h0, double hm, double h1, double dt, const QuarterCarParams& p) {
    const CornerState k1 = derivative(x, h0, p);
    const CornerState k2 = derivative(axpy(x, 0.5 * dt, k1), hm, p);
    const CornerState k3 = derivative(axpy(x, 0.5 * dt, k2), hm, p);
    const CornerState k4 = derivative(axpy(x, dt, k3), h1, p);
    return {x.zs + dt / 6.0 * (k1.zs + 2 * k2.zs + 2 * k3.zs + k4.zs),
            x.vs + dt / 6.0 * (k1.vs + 2 * k2.vs + 2 * k3.vs + k4.vs),
            x.zu + dt / 6.0 * (k1.zu + 2 * k2.zu + 2 * k3.zu + k4.zu),
            x.q + dt / 6.0 * (k1.q + 2 * k2.q + 2 * k3.q + k4.q)};
}

CornerState equilibrium(double h, const QuarterCarParams& p) { return {h, 0.0, h, -p.d_t * h}; }

bool finite(const CornerState& x) {
    return std::isfinite(x.zs) && std::isfinite(x.vs) && std::isfinite(x.zu) && std::isfinite(x.q);
}

// Linear second-order body mode: I th'' = torque - K th - C th'.
struct BodyMode {
    double inertia, stiffness, damping;

    std::array<double, 2> step(std::array<double, 2> x, double torque, double dt) const {
        auto f = [&](const std::array<double, 2>& y) {
            return std::array<double, 2>{y[1], (torque - stiffness * y[0] - damping * y[1]) / inertia};
        };
        const auto k1 = f(x);
        const auto k2 = f({x[0] + 0.5 * dt * k1[0], x[1] + 0.5 * dt * k1[1]});
        const auto k3 = f({x[0] + 0.5 * dt * k2[0], x[1] + 0.5 * dt * k2[1]});
        const auto k4 = f({x[0] + dt * k3[0], x[1] + dt * k3[1]});
        return {x[0] + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                x[1] + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
    }
};

void check_step(double dt) {
    if (!(dt > 0.0) || dt > kMaxStableStep)
        throw ConfigError(fmt::format("integration step {} s outside (0, {}] s", dt, kMaxStableStep));
}

}  // namespace

void QuarterCarParams::validate() const {
    if (!(m_s > 0 && m_u > 0 && k_s > 0 && c_s > 0 && k_t > 0))
        throw ConfigError("quarter-car masses and rates must be > 0");
    if (!(d_t >= 0.0)) throw ConfigError("tire damping must be >= 0");
    if (!(mu_tire > 0.0 && mu_tire <= 2.0)) throw ConfigError("tire friction must lie in (0, 2]");
}

void VehicleParams::validate() const {
    front.validate();
    rear.validate();
}

void VehicleGeometry::validate() const {
    if (!(wheelbase > 0 && track_width > 0 && cg_height > 0 && roll_inertia > 0 && pitch_inertia > 0))
        throw ConfigError("vehicle geometry values must be > 0");
}

SpeedProfile::SpeedProfile(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {
    if (points_.empty()) throw ConfigError("speed profile needs at least one point");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!(points_[i].second > 0.0)) throw ConfigError("target speed must be > 0 everywhere");
        if (i > 0 && !(points_[i].first > points_[i - 1].first))
            throw ConfigError("speed profile stations must increase");
    }
}

double SpeedProfile::at(double s) const noexcept {
    if (points_.empty()) return 0.0;
    if (s <= points_.front().first) return points_.front().second;
    if (s >= points_.back().first) return points_.back().second;
    const auto it = std::upper_bound(points_.begin(), points_.end(), s,
                                     [](double x, const auto& p) { return x < p.first; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    return a.second + (s - a.first) / (b.first - a.first) * (b.second - a.second);
}

double SpeedProfile::min_speed() const noexcept {
    double m = points_.empty() ? 0.0 : points_.front().second;
    for (const auto& p : points_) m = std::min(m, p.second);
    return m;
}

void Scenario::validate() const {
    if (!road) throw ConfigError("scenario has no road");
    if (target_speed.empty()) throw ConfigError("scenario has no target speed profile");
    if (!(target_speed.min_speed() > 0.0)) throw ConfigError("target speed must be > 0 everywhere");
    if (!(target_speed.min_speed() + v_dev > 0.0))
        throw ConfigError(fmt::format("speed deviation {} m/s makes the commanded speed non-positive", v_dev));
    if (!(half_lane_width > 0.0)) throw ConfigError("half lane width must be > 0");
    if (!(std::abs(l_p) <= half_lane_width))
        throw ConfigError(fmt::format("lateral offset {} m exceeds half lane width {} m", l_p, half_lane_width));
    if (!(mu_rs > 0.0 && mu_rs <= 1.5)) throw ConfigError("road friction proxy must lie in (0, 1.5]");
}

SimulationResult simulate(const Scenario& scenario, const VehicleParams& params, const VehicleGeometry& geometry,
                          const SimulationOptions& options) {
    scenario.validate();
    params.validate();
    geometry.validate();
    check_step(options.dt);

    const RoadSurface& road = *scenario.road;
    const double dt = options.dt;
    const double friction = scenario.mu_rs * params.effective_tire_friction();
    const double accel_limit = options.controller.accel_limit * friction;
    const double lateral_cap = friction * kGravity;
    const double tau = options.controller.time_constant;

    // Corner order: front-left, front-right, rear-left, rear-right.
    const double half_wb = 0.5 * geometry.wheelbase;
    const double half_tr = 0.5 * geometry.track_width;
    const std::array<double, 4> dx = {half_wb, half_wb, -half_wb, -half_wb};
    const std::array<double, 4> dy = {half_tr + scenario.l_p, -half_tr + scenario.l_p, half_tr + scenario.l_p,
                                      -half_tr + scenario.l_p};
    const std::array<const QuarterCarParams*, 4> qc = {&params.front, &params.front, &params.rear, &params.rear};

    const double body_mass = 2.0 * (params.front.m_s + params.rear.m_s);
    const double tr2 = geometry.track_width * geometry.track_width / 2.0;
    const double wb2 = geometry.wheelbase * geometry.wheelbase / 2.0;
    const BodyMode roll{geometry.roll_inertia, (params.front.k_s + params.rear.k_s) * tr2,
                        (params.front.c_s + params.rear.c_s) * tr2};
    const BodyMode pitch{geometry.pitch_inertia, (params.front.k_s + params.rear.k_s) * wb2,
                         (params.front.c_s + params.rear.c_s) * wb2};

    const double s_start = road.s_begin();
    const double s_end = road.s_end();

    double s = s_start;
    double v = scenario.target_speed.at(s) + scenario.v_dev;
    std::array<double, 4> h{};
    std::array<CornerState, 4> corner{};
    for (std::size_t c = 0; c < 4; ++c) {
        h[c] = road.elevation_clamped(s + dx[c], dy[c]);
        corner[c] = equilibrium(h[c], *qc[c]);
    }
    std::array<double, 2> roll_state{0.0, 0.0};
    std::array<double, 2> pitch_state{0.0, 0.0};

    std::vector<double> out_vx, out_ax, out_ay, out_az, out_phi, out_theta, out_psi, out_s;
    const auto expected = static_cast<std::size_t>((s_end - s_start) / std::max(v, 0.1) / dt) + 16;
    for (auto* vec : {&out_vx, &out_ax, &out_ay, &out_az, &out_phi, &out_theta, &out_psi, &out_s})
        vec->reserve(expected);

    double saturated_for = 0.0;
    double longest = 0.0;

    for (std::size_t n = 0;; ++n) {
        if (n >= kMaxSteps) throw NumericError("simulation exceeded the step budget");

        const double target = std::max(scenario.target_speed.at(s) + scenario.v_dev, 0.0);
        const double ax = std::clamp((target - v) / tau, -accel_limit, accel_limit);
        const double kappa = road.curvature_at(s);
        const double demand = v * v * kappa;
        const double ay = std::clamp(demand, -lateral_cap, lateral_cap);

        double az = 0.0;
        double left = 0.0, right = 0.0, front = 0.0, rear = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
            az += sprung_acceleration(corner[c], h[c], *qc[c]);
            (dy[c] > scenario.l_p ? left : right) += 0.5 * corner[c].vs;
            (dx[c] > 0 ? front : rear) += 0.5 * corner[c].vs;
        }
        az *= 0.25;
        const double phi_rate = (left - right) / geometry.track_width + roll_state[1];
        const double theta_rate = (rear - front) / geometry.wheelbase + pitch_state[1];

        out_vx.push_back(v);
        out_ax.push_back(ax);
        out_ay.push_back(ay);
        out_az.push_back(az);
        out_phi.push_back(phi_rate * kRadToDeg);
        out_theta.push_back(theta_rate * kRadToDeg);
        out_psi.push_back(v * kappa * kRadToDeg);
        out_s.push_back(s);

        if (std::abs(demand) > lateral_cap) {
            saturated_for += dt;
            longest = std::max(longest, saturated_for);
        } else {
            saturated_for = 0.0;
        }

        if (s >= s_end) break;

        // Constant acceleration over the step: s is quadratic, v linear.
        const double s_mid = s + 0.5 * v * dt + 0.125 * ax * dt * dt;
        const double s_next = s + v * dt + 0.5 * ax * dt * dt;
        for (std::size_t c = 0; c < 4; ++c) {
            const double hm = road.elevation_clamped(s_mid + dx[c], dy[c]);
            const double h1 = road.elevation_clamped(s_next + dx[c], dy[c]);
            corner[c] = rk4(corner[c], h[c], hm, h1, dt, *qc[c]);
            h[c] = h1;
            if (!finite(corner[c])) throw NumericError(fmt::format("corner integration diverged at t={} s", n * dt));
        }
        roll_state = roll.step(roll_state, body_mass * ay * geometry.cg_height, dt);
        pitch_state = pitch.step(pitch_state, -body_mass * ax * geometry.cg_height, dt);
        if (!std::isfinite(roll_state[0] + roll_state[1] + pitch_state[0] + pitch_state[1]))
            throw NumericError(fmt::format("body mode integration diverged at t={} s", n * dt));

        s = s_next;
        v = std::max(v + ax * dt, 0.0);
        if (!(v > 0.0)) throw NumericError("vehicle came to a standstill before the end of the road");
    }

    SimulationResult result;
    VehicleResponse& r = result.response;
    r = VehicleResponse(0.0, dt, out_s.size());
    r.set(Channel::vx, std::move(out_vx));
    r.set(Channel::ax, std::move(out_ax));
    r.set(Channel::ay, std::move(out_ay));
    r.set(Channel::az, std::move(out_az));
    r.set(Channel::phi_rate, std::move(out_phi));
    r.set(Channel::theta_rate, std::move(out_theta));
    r.set(Channel::psi_rate, std::move(out_psi));
    r.set(Channel::s, std::move(out_s));
    result.longest_saturation = longest;
    result.off_road_risk = longest > kOffRoadDemandTime;
    return result;
}

CornerResponse corner_response(const Profile& profile, const SpeedProfile& speed, const QuarterCarParams& params,
                               double dt) {
    params.validate();
    check_step(dt);
    if (profile.size() < 2 || !(profile.step > 0.0)) throw InsufficientDataError("corner_response: profile too short");
    if (speed.empty() || !(speed.min_speed() > 0.0)) throw ConfigError("corner_response: speed must be > 0");

    const double s_end = profile.position(profile.size() - 1);
    CornerResponse out;
    for (auto* ts : {&out.s, &out.h, &out.z_s, &out.zdot_s, &out.zddot_s, &out.z_u, &out.zdot_u}) {
        ts->t0 = 0.0;
        ts->dt = dt;
    }

    double s = profile.s0;
    double h = profile.at(s);
    CornerState x{};
    for (std::size_t n = 0;; ++n) {
        if (n >= kMaxSteps) throw NumericError("corner_response exceeded the step budget");
        out.s.values.push_back(s);
        out.h.values.push_back(h);
        out.z_s.values.push_back(x.zs);
        out.zdot_s.values.push_back(x.vs);
        out.zddot_s.values.push_back(sprung_acceleration(x, h, params));
        out.z_u.values.push_back(x.zu);
        out.zdot_u.values.push_back(unsprung_velocity(x, h, params));
        if (s >= s_end) break;

        // Position from ds/dt = speed(s) with the same RK4 stages.
        const double k1 = speed.at(s);
        const double k2 = speed.at(s + 0.5 * dt * k1);
        const double k3 = speed.at(s + 0.5 * dt * k2);
        const double k4 = speed.at(s + dt * k3);
        const double s_mid = s + 0.5 * dt * (0.5 * (k1 + k2));
        const double s_next = s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);

        const double h1 = profile.at(s_next);
        x = rk4(x, h, profile.at(s_mid), h1, dt, params);
        if (!finite(x)) throw NumericError(fmt::format("corner integration diverged at t={} s", n * dt));
        s = s_next;
        h = h1;
    }
    return out;
}

}  // namespace ridecomfort
