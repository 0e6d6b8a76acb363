#pragma once

// Latin hypercube sampling of scenario inputs and the Monte Carlo batch runner.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ridecomfort/vehicle.hpp"

namespace ridecomfort {

enum class Variable { v_dev, l_p, mu_rs };

std::string_view variable_name(Variable v) noexcept;
std::optional<Variable> variable_from_name(std::string_view name) noexcept;

struct InputDistribution {
    enum class Kind { gaussian, uniform };

    Variable variable = Variable::v_dev;
    Kind kind = Kind::gaussian;
    double a = 0.0;  // mean, or lower bound
    double b = 1.0;  // standard deviation, or upper bound

    static InputDistribution gaussian(Variable v, double mean, double sigma) { return {v, Kind::gaussian, mean, sigma}; }
    static InputDistribution uniform(Variable v, double lo, double hi) { return {v, Kind::uniform, lo, hi}; }

    double cdf(double x) const;
    double quantile(double u) const;
    void validate() const;
};

/// v_dev ~ N(0, 0.2) m/s, l_p ~ N(0, 0.2) m, mu_rs ~ U(0.6, 1.0).
std::vector<InputDistribution> default_distributions();

/// Standard normal quantile (rational approximation, |error| ~ 1e-16).
double inverse_normal_cdf(double p);
double normal_cdf(double x);

/// n x m matrix, row-major; column j follows distributions[j].
struct SamplePlan {
    std::size_t n = 0;
    std::vector<InputDistribution> distributions;
    std::vector<double> matrix;
    std::uint64_t seed = 0;

    std::size_t m() const noexcept { return distributions.size(); }
    double at(std::size_t row, std::size_t col) const { return matrix[row * m() + col]; }
    std::vector<double> column(std::size_t col) const;
};

/// One draw per equal-probability stratum per column, strata shuffled
/// independently per column from per-column substreams of the seed.
SamplePlan lhs(std::span<const InputDistribution> distributions, std::size_t n, std::uint64_t seed);

void write_plan_csv(std::ostream& out, const SamplePlan& plan);

/// Copy of `base` with the plan row's variables applied.
Scenario scenario_for_row(const SamplePlan& plan, std::size_t row, const Scenario& base);

struct RunFailure {
    std::size_t row = 0;
    std::string reason;
};

struct BatchResult {
    std::vector<std::optional<SimulationResult>> runs;  // indexed by plan row
    std::vector<RunFailure> failures;                    // ascending row order

    std::size_t succeeded() const noexcept { return runs.size() - failures.size(); }
};

struct BatchOptions {
    SimulationOptions simulation;
    unsigned jobs = 0;  // 0: hardware concurrency
};

/// Called once per successful row, possibly from several threads at once.
using RunSink = std::function<void(std::size_t row, SimulationResult&& result)>;

/// Runs every plan row in parallel, handing results to `sink` and returning
/// the failures (simulation errors and off-road risk) sorted by row.
std::vector<RunFailure> for_each_run(const SamplePlan& plan, const Scenario& base, const VehicleParams& params,
                                     const VehicleGeometry& geometry, const BatchOptions& options,
                                     const RunSink& sink);

BatchResult run_batch(const SamplePlan& plan, const Scenario& base, const VehicleParams& params,
                      const VehicleGeometry& geometry, const BatchOptions& options = {});

void write_failures_csv(std::ostream& out, std::span<const RunFailure> failures);

}  // namespace ridecomfort
