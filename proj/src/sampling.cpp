#include "ridecomfort/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "ridecomfort/errors.hpp"

namespace ridecomfort {

namespace {

double poly(std::span<const double> c, double r) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * r + *it;
    return acc;
}

// Uniform in the open interval (0, 1) from 53 random bits.
double open_uniform(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::string_view variable_name(Variable v) noexcept {
    switch (v) {
        case Variable::v_dev: return "v_dev";
        case Variable::l_p: return "l_p";
        case Variable::mu_rs: return "mu_rs";
    }
    return "?";
}

std::optional<Variable> variable_from_name(std::string_view name) noexcept {
    for (Variable v : {Variable::v_dev, Variable::l_p, Variable::mu_rs})
        if (variable_name(v) == name) return v;
    return std::nullopt;
}

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError(fmt::format("normal quantile needs p in (0, 1), got {}", p));
    static constexpr double a[] = {3.387132872796366608,   133.14166789178437745, 1971.5909503065514427,
                                   13731.693765509461125,  45921.953931549871457, 67265.770927008700853,
                                   33430.575583588128105,  2509.0809287301226727};
    static constexpr double b[] = {1.0,                    42.313330701600911252, 687.1870074920579083,
                                   5394.1960214247511077,  21213.794301586595867, 39307.89580009271061,
                                   28729.085735721942674,  5226.495278852545925};
    static constexpr double c[] = {1.42343711074968357734,  4.6303378461565452959,   5.7694972214606914055,
                                   3.64784832476320460504,  1.27045825245236838258,  0.24178072517745061177,
                                   0.0227238449892691845833, 7.7454501427834140764e-4};
    static constexpr double d[] = {1.0,                     2.05319162663775882187,  1.6763848301838038494,
                                   0.68976733498510000455,  0.14810397642748007459,  0.0151986665636164571966,
                                   5.475938084995344946e-4, 1.05075007164441684324e-9};
    static constexpr double e[] = {6.6579046435011037772,    5.4637849111641143699,    1.7848265399172913358,
                                   0.29656057182850489123,   0.026532189526576123093,  0.0012426609473880784386,
                                   2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static constexpr double f[] = {1.0,                      0.59983220655588793769,   0.13692988092273580531,
                                   0.0148753612908506148525, 7.868691311456132591e-4,  1.8463183175100546818e-5,
                                   1.4215117583164458887e-7, 2.04426310338993978564e-15};

    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * poly(a, r) / poly(b, r);
    }
    double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = poly(c, r) / poly(d, r);
    } else {
        r -= 5.0;
        x = poly(e, r) / poly(f, r);
    }
    return q < 0.0 ? -x : x;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double InputDistribution::cdf(double x) const {
    if (kind == Kind::gaussian) return normal_cdf((x - a) / b);
    return std::clamp((x - a) / (b - a), 0.0, 1.0);
}

double InputDistribution::quantile(double u) const {
    if (kind == Kind::gaussian) return a + b * inverse_normal_cdf(u);
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError(fmt::format("quantile needs u in [0, 1], got {}", u));
    return a + u * (b - a);
}

void InputDistribution::validate() const {
    if (!std::isfinite(a) || !std::isfinite(b))
        throw ConfigError(fmt::format("{}: distribution parameters must be finite", variable_name(variable)));
    if (kind == Kind::gaussian && !(b > 0.0))
        throw ConfigError(fmt::format("{}: standard deviation must be > 0", variable_name(variable)));
    if (kind == Kind::uniform && !(a < b))
        throw ConfigError(fmt::format("{}: uniform bounds need a < b", variable_name(variable)));
}

std::vector<InputDistribution> default_distributions() {
    return {InputDistribution::gaussian(Variable::v_dev, 0.0, 0.2), InputDistribution::gaussian(Variable::l_p, 0.0, 0.2),
            InputDistribution::uniform(Variable::mu_rs, 0.6, 1.0)};
}

std::vector<double> SamplePlan::column(std::size_t col) const {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = at(i, col);
    return out;
}

SamplePlan lhs(std::span<const InputDistribution> distributions, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("sample count must be >= 1");
    for (const auto& d : distributions) d.validate();
    for (std::size_t j = 0; j < distributions.size(); ++j)
        for (std::size_t k = 0; k < j; ++k)
            if (distributions[j].variable == distributions[k].variable)
                throw ConfigError(fmt::format("variable {} sampled twice", variable_name(distributions[j].variable)));

    SamplePlan plan;
    plan.n = n;
    plan.distributions.assign(distributions.begin(), distributions.end());
    plan.seed = seed;
    plan.matrix.assign(n * plan.m(), 0.0);

    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < plan.m(); ++j) {
        std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(j)};
        std::mt19937_64 rng(sq);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (static_cast<double>(order[i]) + open_uniform(rng)) / static_cast<double>(n);
            plan.matrix[i * plan.m() + j] = plan.distributions[j].quantile(u);
        }
    }
    return plan;
}

void write_plan_csv(std::ostream& out, const SamplePlan& plan) {
    out << "row";
    for (const auto& d : plan.distributions) out << ',' << variable_name(d.variable);
    out << '\n';
    for (std::size_t i = 0; i < plan.n; ++i) {
        out << i;
        for (std::size_t j = 0; j < plan.m(); ++j) out << fmt::format(",{}", plan.at(i, j));
        out << '\n';
    }
}

Scenario scenario_for_row(const SamplePlan& plan, std::size_t row, const Scenario& base) {
    if (row >= plan.n) throw DimensionError(fmt::format("plan has no row {}", row));
    Scenario s = base;
    for (std::size_t j = 0; j < plan.m(); ++j) {
        const double v = plan.at(row, j);
        switch (plan.distributions[j].variable) {
            case Variable::v_dev: s.v_dev = v; break;
            case Variable::l_p: s.l_p = v; break;
            case Variable::mu_rs: s.mu_rs = v; break;
        }
    }
    return s;
}

std::vector<RunFailure> for_each_run(const SamplePlan& plan, const Scenario& base, const VehicleParams& params,
                                     const VehicleGeometry& geometry, const BatchOptions& options,
                                     const RunSink& sink) {
    std::vector<std::optional<std::string>> reasons(plan.n);
    std::atomic<std::size_t> next{0};
    std::mutex sink_error_mutex;
    std::exception_ptr sink_error;

    auto worker = [&] {
        for (;;) {
            const std::size_t row = next.fetch_add(1);
            if (row >= plan.n) return;
            SimulationResult result;
            try {
                result = simulate(scenario_for_row(plan, row, base), params, geometry, options.simulation);
            } catch (const Error& e) {
                reasons[row] = e.what();
                continue;
            }
            if (result.off_road_risk) {
                reasons[row] = fmt::format("off-road risk: lateral demand above the friction cap for {:.3f} s",
                                           result.longest_saturation);
                continue;
            }
            try {
                sink(row, std::move(result));
            } catch (...) {
                std::lock_guard lock(sink_error_mutex);
                if (!sink_error) sink_error = std::current_exception();
                next.store(plan.n);
                return;
            }
        }
    };

    unsigned jobs = options.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.jobs;
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(plan.n, 1)));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(jobs);
        for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    }
    if (sink_error) std::rethrow_exception(sink_error);

    std::vector<RunFailure> failures;
    for (std::size_t row = 0; row < plan.n; ++row)
        if (reasons[row]) failures.push_back({row, *reasons[row]});
    return failures;
}

BatchResult run_batch(const SamplePlan& plan, const Scenario& base, const VehicleParams& params,
                      const VehicleGeometry& geometry, const BatchOptions& options) {
    BatchResult out;
    out.runs.resize(plan.n);
    out.failures = for_each_run(plan, base, params, geometry, options,
                                [&](std::size_t row, SimulationResult&& r) { out.runs[row] = std::move(r); });
    return out;
}

void write_failures_csv(std::ostream& out, std::span<const RunFailure> failures) {
    out << "row,reason\n";
    for (const RunFailure& f : failures) {
        std::string reason = f.reason;
        std::replace(reason.begin(), reason.end(), '"', '\'');
        out << fmt::format("{},\"{}\"\n", f.row, reason);
    }
}

}  // namespace ridecomfort
