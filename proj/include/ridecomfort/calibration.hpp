#pragma once

// Box-constrained Levenberg-Marquardt calibration of vehicle parameters
// against reference traces, run as a chain of stages over parameter subsets.

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ridecomfort/signals.hpp"
#include "ridecomfort/vehicle.hpp"

namespace ridecomfort {

/// Calibratable quantities: front/rear spring rate, tire friction, tire
/// stiffness and tire damping (the last three shared by both axles).
enum class CalibParam { K_sf, K_sr, mu_Tr, K_Tr, d_Tr };

inline constexpr std::array<CalibParam, 5> kCalibParams = {CalibParam::K_sf, CalibParam::K_sr, CalibParam::mu_Tr,
                                                           CalibParam::K_Tr, CalibParam::d_Tr};

std::string_view calib_param_name(CalibParam p) noexcept;
std::optional<CalibParam> calib_param_from_name(std::string_view name) noexcept;

double get_param(const VehicleParams& v, CalibParam p) noexcept;
void set_param(VehicleParams& v, CalibParam p, double value) noexcept;

struct BoxConstraints {
    std::array<double, 5> lower = {15000.0, 15000.0, 0.7, 250000.0, 4000.0};
    std::array<double, 5> upper = {40000.0, 40000.0, 1.4, 400000.0, 7000.0};

    double lo(CalibParam p) const noexcept { return lower[static_cast<std::size_t>(p)]; }
    double hi(CalibParam p) const noexcept { return upper[static_cast<std::size_t>(p)]; }
    double mid(CalibParam p) const noexcept { return 0.5 * (lo(p) + hi(p)); }
    void validate() const;
};

// ---- generic solver ---------------------------------------------------------

using ResidualFunction = std::function<std::vector<double>(std::span<const double> p)>;

struct LmOptions {
    double tol = 1e-12;             // stop once the objective falls below
    std::size_t max_iter = 100;
    double rel_step = 1e-4;         // finite-difference step relative to |p|
    double abs_step = 1e-7;         // and its absolute floor
    double lambda0 = 1e-3;
    double lambda_max = 1e16;
    double min_step = 1e-10;        // on the normalized step norm
    std::size_t max_failures = 20;  // consecutive failed evaluations
    unsigned jobs = 1;              // parallel Jacobian columns
};

struct LmIteration {
    std::size_t iteration = 0;
    double objective = 0.0;  // at the trial point (infinite when it failed)
    double lambda = 0.0;
    bool accepted = false;
    std::vector<double> p;
};

struct LmResult {
    std::vector<double> p;
    double objective = 0.0;
    std::vector<double> accepted_objectives;  // starts with the initial objective
    std::vector<LmIteration> iterations;
    std::size_t evaluations = 0;
    std::string stop_reason;
};

/// Minimizes ||r(p)||^2 over lower <= p <= upper. Steps are taken in
/// coordinates normalized to the box; variables on a bound whose gradient
/// points outward are frozen; trial points are projected onto the box.
LmResult levenberg_marquardt(const ResidualFunction& residual, std::vector<double> p0, std::span<const double> lower,
                             std::span<const double> upper, const LmOptions& options = {});

/// Forward differences (backward at the upper bound), one column per parameter.
std::vector<std::vector<double>> fd_jacobian(const ResidualFunction& residual, std::span<const double> p,
                                             std::span<const double> r0, std::span<const double> upper,
                                             const LmOptions& options = {});

// ---- vehicle calibration ----------------------------------------------------

struct ChannelScore {
    Channel channel;
    double nrmse = 0.0;
};

struct Residual {
    std::vector<ChannelScore> channels;
    std::vector<Channel> skipped;  // absent from the reference or flat there
    std::vector<double> r;         // stacked, weighted and scaled so that ||r||^2 = objective
    double objective = 0.0;        // sum of weighted squared channel NRMSEs

    double nrmse(Channel c) const;
};

struct CalibrationProblem {
    Scenario scenario;
    VehicleGeometry geometry;
    SimulationOptions options;
    VehicleResponse reference;
    VehicleParams base;  // everything not calibrated (masses, suspension damping)
    std::array<double, kComparedChannels.size()> weights = {1, 1, 1, 1, 1, 1, 1};
};

/// Simulates with `params` and compares against the reference, the simulated
/// trace being linearly resampled at the reference times.
Residual evaluate_residual(const VehicleParams& params, const CalibrationProblem& problem);
Residual compare_traces(const VehicleResponse& simulated, const VehicleResponse& reference,
                        std::span<const double> weights = {});

struct ChainStage {
    std::string name;
    std::vector<CalibParam> free;
};

struct OptimizationChain {
    std::vector<ChainStage> stages;
    /// The stage sequence repeats until the objective drops below the solver
    /// tolerance, a pass stops improving, or this many passes ran.
    std::size_t max_passes = 1;

    void validate() const;
    /// One single-parameter stage per calibratable quantity, in declaration order.
    static OptimizationChain single_parameter(std::size_t max_passes = 1);
};

struct StageReport {
    std::string name;
    std::size_t pass = 0;
    std::vector<CalibParam> free;
    VehicleParams input;
    VehicleParams output;
    LmResult lm;
};

struct ChainResult {
    VehicleParams initial;
    VehicleParams final;
    std::vector<StageReport> stages;
    Residual before;
    Residual after;
    bool complete = true;
    std::string error;
};

/// p0 defaults to the box midpoint for every calibratable quantity, applied on
/// top of problem.base.
ChainResult run_chain(const CalibrationProblem& problem, const OptimizationChain& chain,
                      const BoxConstraints& box = {}, std::optional<VehicleParams> p0 = std::nullopt,
                      const LmOptions& options = {});

nlohmann::json calibration_report_json(const ChainResult& result);

}  // namespace ridecomfort
