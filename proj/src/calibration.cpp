#include "ridecomfort/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "ridecomfort/errors.hpp"

namespace ridecomfort {

namespace {

double squared_norm(std::span<const double> r) {
    double acc = 0.0;
    for (double v : r) acc += v * v;
    return acc;
}

std::optional<std::vector<double>> try_eval(const ResidualFunction& f, std::span<const double> p) {
    try {
        std::vector<double> r = f(p);
        for (double v : r)
            if (!std::isfinite(v)) return std::nullopt;
        return r;
    } catch (const Error&) {
        return std::nullopt;
    }
}

double sample_linear(std::span<const double> v, double t0, double dt, double t) {
    const double u = std::clamp((t - t0) / dt, 0.0, static_cast<double>(v.size() - 1));
    // sample times that coincide up to round-off read the sample itself
    if (const double r = std::round(u); std::abs(u - r) < 1e-9) return v[static_cast<std::size_t>(r)];
    const auto i = std::min(static_cast<std::size_t>(u), v.size() - 1);
    if (i + 1 >= v.size()) return v.back();
    const double w = u - static_cast<double>(i);
    return v[i] + w * (v[i + 1] - v[i]);
}

nlohmann::json params_json(const VehicleParams& v) {
    nlohmann::json j = nlohmann::json::object();
    for (CalibParam p : kCalibParams) j[std::string(calib_param_name(p))] = get_param(v, p);
    return j;
}

}  // namespace

std::string_view calib_param_name(CalibParam p) noexcept {
    switch (p) {
        case CalibParam::K_sf: return "K_sf";
        case CalibParam::K_sr: return "K_sr";
        case CalibParam::mu_Tr: return "mu_Tr";
        case CalibParam::K_Tr: return "K_Tr";
        case CalibParam::d_Tr: return "d_Tr";
    }
    return "?";
}

std::optional<CalibParam> calib_param_from_name(std::string_view name) noexcept {
    for (CalibParam p : kCalibParams)
        if (calib_param_name(p) == name) return p;
    return std::nullopt;
}

double get_param(const VehicleParams& v, CalibParam p) noexcept {
    switch (p) {
        case CalibParam::K_sf: return v.front.k_s;
        case CalibParam::K_sr: return v.rear.k_s;
        case CalibParam::mu_Tr: return v.front.mu_tire;
        case CalibParam::K_Tr: return v.front.k_t;
        case CalibParam::d_Tr: return v.front.d_t;
    }
    return 0.0;
}

void set_param(VehicleParams& v, CalibParam p, double value) noexcept {
    switch (p) {
        case CalibParam::K_sf: v.front.k_s = value; break;
        case CalibParam::K_sr: v.rear.k_s = value; break;
        case CalibParam::mu_Tr: v.front.mu_tire = v.rear.mu_tire = value; break;
        case CalibParam::K_Tr: v.front.k_t = v.rear.k_t = value; break;
        case CalibParam::d_Tr: v.front.d_t = v.rear.d_t = value; break;
    }
}

void BoxConstraints::validate() const {
    for (CalibParam p : kCalibParams)
        if (!(lo(p) < hi(p)) || !std::isfinite(lo(p)) || !std::isfinite(hi(p)))
            throw ConfigError(fmt::format("bounds of {} need lower < upper", calib_param_name(p)));
}

std::vector<std::vector<double>> fd_jacobian(const ResidualFunction& residual, std::span<const double> p,
                                             std::span<const double> r0, std::span<const double> upper,
                                             const LmOptions& options) {
    const std::size_t m = p.size();
    std::vector<std::vector<double>> cols(m);
    std::vector<std::string> errors(m);

    auto column = [&](std::size_t j) {
        double h = std::max(options.rel_step * std::abs(p[j]), options.abs_step);
        if (p[j] + h > upper[j]) h = -h;
        for (int attempt = 0; attempt < 2; ++attempt, h = -h) {
            std::vector<double> q(p.begin(), p.end());
            q[j] += h;
            const auto r = try_eval(residual, q);
            if (!r) continue;
            if (r->size() != r0.size()) {
                errors[j] = "residual length changed between evaluations";
                return;
            }
            cols[j].resize(r0.size());
            for (std::size_t i = 0; i < r0.size(); ++i) cols[j][i] = ((*r)[i] - r0[i]) / h;
            return;
        }
        errors[j] = fmt::format("residual evaluation failed on both sides of parameter {}", j);
    };

    if (options.jobs > 1 && m > 1) {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < m; ++j) pool.emplace_back(column, j);
    } else {
        for (std::size_t j = 0; j < m; ++j) column(j);
    }
    for (const auto& e : errors)
        if (!e.empty()) throw OptimizationError("Jacobian: " + e);
    return cols;
}

LmResult levenberg_marquardt(const ResidualFunction& residual, std::vector<double> p0, std::span<const double> lower,
                             std::span<const double> upper, const LmOptions& options) {
    const std::size_t m = p0.size();
    if (m == 0) throw ConfigError("no parameters to optimize");
    if (lower.size() != m || upper.size() != m) throw DimensionError("bounds do not match the parameter vector");
    std::vector<double> scale(m);
    for (std::size_t j = 0; j < m; ++j) {
        if (!(lower[j] < upper[j])) throw ConfigError(fmt::format("parameter {} needs lower < upper", j));
        if (!(p0[j] >= lower[j] && p0[j] <= upper[j]))
            throw ConfigError(fmt::format("initial value {} of parameter {} lies outside [{}, {}]", p0[j], j,
                                          lower[j], upper[j]));
        scale[j] = upper[j] - lower[j];
    }

    LmResult out;
    out.p = std::move(p0);
    auto r0 = try_eval(residual, out.p);
    ++out.evaluations;
    if (!r0) throw OptimizationError("residual evaluation failed at the initial point");
    std::vector<double> r = std::move(*r0);
    out.objective = squared_norm(r);
    out.accepted_objectives.push_back(out.objective);

    double lambda = options.lambda0;
    std::size_t failures = 0;
    std::size_t trials = 0;
    bool need_jacobian = true;
    Eigen::MatrixXd jac;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;

    for (;;) {
        if (out.objective < options.tol) {
            out.stop_reason = "objective below tolerance";
            break;
        }
        if (trials >= options.max_iter) {
            out.stop_reason = "iteration limit";
            break;
        }
        if (need_jacobian) {
            const auto cols = fd_jacobian(residual, out.p, r, upper, options);
            out.evaluations += m;
            jac.resize(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(m));
            for (std::size_t j = 0; j < m; ++j)
                for (std::size_t i = 0; i < r.size(); ++i)
                    jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i] * scale[j];
            const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(r.size()));
            grad = jac.transpose() * rv;
            hess = jac.transpose() * jac;
            need_jacobian = false;
        }

        std::vector<double> x(m);
        for (std::size_t j = 0; j < m; ++j) x[j] = (out.p[j] - lower[j]) / scale[j];
        std::vector<Eigen::Index> free;
        for (std::size_t j = 0; j < m; ++j) {
            const double g = grad(static_cast<Eigen::Index>(j));
            const bool at_lower = out.p[j] <= lower[j] && g > 0.0;
            const bool at_upper = out.p[j] >= upper[j] && g < 0.0;
            if (!at_lower && !at_upper && g != 0.0) free.push_back(static_cast<Eigen::Index>(j));
        }
        if (free.empty()) {
            out.stop_reason = "stationary point on the box";
            break;
        }

        const auto nf = static_cast<Eigen::Index>(free.size());
        Eigen::MatrixXd a(nf, nf);
        Eigen::VectorXd b(nf);
        double max_diag = 0.0;
        for (Eigen::Index u = 0; u < nf; ++u) max_diag = std::max(max_diag, hess(free[u], free[u]));
        for (Eigen::Index u = 0; u < nf; ++u) {
            for (Eigen::Index v = 0; v < nf; ++v) a(u, v) = hess(free[u], free[v]);
            a(u, u) += lambda * std::max(hess(free[u], free[u]), 1e-12 * max_diag + 1e-300);
            b(u) = -grad(free[u]);
        }
        const Eigen::VectorXd delta = a.ldlt().solve(b);

        std::vector<double> trial = out.p;
        double step2 = 0.0;
        for (Eigen::Index u = 0; u < nf; ++u) {
            const auto j = static_cast<std::size_t>(free[u]);
            const double xn = std::clamp(x[j] + delta(u), 0.0, 1.0);
            step2 += (xn - x[j]) * (xn - x[j]);
            trial[j] = xn <= 0.0 ? lower[j] : xn >= 1.0 ? upper[j] : lower[j] + xn * scale[j];
        }
        if (!delta.allFinite() || std::sqrt(step2) < options.min_step) {
            out.stop_reason = "step below tolerance";
            break;
        }

        ++trials;
        auto rn = try_eval(residual, trial);
        ++out.evaluations;
        const double fn = rn ? squared_norm(*rn) : std::numeric_limits<double>::infinity();
        LmIteration it{trials, fn, lambda, false, trial};
        if (rn && fn < out.objective) {
            it.accepted = true;
            out.p = std::move(trial);
            r = std::move(*rn);
            out.objective = fn;
            out.accepted_objectives.push_back(fn);
            lambda = std::max(lambda * 0.1, 1e-12);
            failures = 0;
            need_jacobian = true;
        } else {
            lambda *= 10.0;
            if (!rn && ++failures > options.max_failures)
                throw OptimizationError(
                    fmt::format("residual evaluation failed at {} consecutive trial points", failures));
        }
        out.iterations.push_back(std::move(it));
        if (lambda > options.lambda_max) {
            out.stop_reason = "damping limit";
            break;
        }
    }
    return out;
}

double Residual::nrmse(Channel c) const {
    for (const ChannelScore& s : channels)
        if (s.channel == c) return s.nrmse;
    throw InsufficientDataError(fmt::format("channel {} was not compared", channel_name(c)));
}

Residual compare_traces(const VehicleResponse& simulated, const VehicleResponse& reference,
                        std::span<const double> weights) {
    if (!weights.empty() && weights.size() != kComparedChannels.size())
        throw DimensionError("one weight per compared channel expected");
    if (reference.size() == 0 || simulated.size() == 0) throw InsufficientDataError("empty trace");

    Residual out;
    const double n = static_cast<double>(reference.size());
    for (std::size_t c = 0; c < kComparedChannels.size(); ++c) {
        const Channel ch = kComparedChannels[c];
        const double w = weights.empty() ? 1.0 : weights[c];
        if (!reference.has(ch) || !simulated.has(ch) || w == 0.0) {
            out.skipped.push_back(ch);
            continue;
        }
        const auto ref = reference.values(ch);
        const auto [lo, hi] = std::minmax_element(ref.begin(), ref.end());
        const double range = *hi - *lo;
        if (!(range > 1e-12 * std::max(1.0, std::abs(*hi)))) {
            out.skipped.push_back(ch);
            continue;
        }
        const auto sim = simulated.values(ch);
        const double k = std::sqrt(w) / (range * std::sqrt(n));
        double sq = 0.0;
        for (std::size_t i = 0; i < reference.size(); ++i) {
            const double pred = sample_linear(sim, simulated.t0(), simulated.dt(), reference.time(i));
            const double d = pred - ref[i];
            sq += d * d;
            out.r.push_back(k * d);
        }
        const double e = std::sqrt(sq / n) / range;
        out.channels.push_back({ch, e});
        out.objective += w * e * e;
    }
    if (out.channels.empty()) throw UnsupportedInputError("reference and simulation share no usable channel");
    return out;
}

Residual evaluate_residual(const VehicleParams& params, const CalibrationProblem& problem) {
    const SimulationResult sim = simulate(problem.scenario, params, problem.geometry, problem.options);
    return compare_traces(sim.response, problem.reference, problem.weights);
}

void OptimizationChain::validate() const {
    if (stages.empty()) throw ConfigError("optimization chain has no stages");
    if (max_passes == 0) throw ConfigError("optimization chain needs at least one pass");
    for (const ChainStage& s : stages) {
        if (s.free.empty()) throw ConfigError(fmt::format("stage '{}' frees no parameter", s.name));
        for (std::size_t i = 0; i < s.free.size(); ++i)
            if (std::find(s.free.begin(), s.free.begin() + static_cast<std::ptrdiff_t>(i), s.free[i]) !=
                s.free.begin() + static_cast<std::ptrdiff_t>(i))
                throw ConfigError(fmt::format("stage '{}' lists {} twice", s.name, calib_param_name(s.free[i])));
    }
}

OptimizationChain OptimizationChain::single_parameter(std::size_t max_passes) {
    OptimizationChain c;
    c.max_passes = max_passes;
    for (CalibParam p : kCalibParams) c.stages.push_back({std::string(calib_param_name(p)), {p}});
    return c;
}

ChainResult run_chain(const CalibrationProblem& problem, const OptimizationChain& chain, const BoxConstraints& box,
                      std::optional<VehicleParams> p0, const LmOptions& options) {
    box.validate();
    chain.validate();
    VehicleParams p = problem.base;
    for (CalibParam q : kCalibParams) set_param(p, q, p0 ? get_param(*p0, q) : box.mid(q));
    for (CalibParam q : kCalibParams) {
        const double v = get_param(p, q);
        if (!(v >= box.lo(q) && v <= box.hi(q)))
            throw ConfigError(fmt::format("initial {} = {} lies outside [{}, {}]", calib_param_name(q), v, box.lo(q),
                                          box.hi(q)));
    }

    ChainResult out;
    out.initial = p;
    out.before = evaluate_residual(p, problem);
    double current = out.before.objective;

    for (std::size_t pass = 0; pass < chain.max_passes && out.complete; ++pass) {
        const double pass_start = current;
        for (const ChainStage& stage : chain.stages) {
            std::vector<double> x0, lo, hi;
            for (CalibParam q : stage.free) {
                x0.push_back(get_param(p, q));
                lo.push_back(box.lo(q));
                hi.push_back(box.hi(q));
            }
            const VehicleParams frozen = p;
            const ResidualFunction f = [&](std::span<const double> x) {
                VehicleParams trial = frozen;
                for (std::size_t i = 0; i < stage.free.size(); ++i) set_param(trial, stage.free[i], x[i]);
                return evaluate_residual(trial, problem).r;
            };
            StageReport rep{stage.name, pass, stage.free, p, p, {}};
            try {
                rep.lm = levenberg_marquardt(f, x0, lo, hi, options);
            } catch (const OptimizationError& e) {
                out.complete = false;
                out.error = fmt::format("stage '{}' (pass {}): {}", stage.name, pass + 1, e.what());
                break;
            }
            for (std::size_t i = 0; i < stage.free.size(); ++i) set_param(p, stage.free[i], rep.lm.p[i]);
            rep.output = p;
            current = rep.lm.objective;
            out.stages.push_back(std::move(rep));
            if (current < options.tol) break;
        }
        if (current < options.tol || !(current < pass_start)) break;
    }

    out.final = p;
    out.after = evaluate_residual(p, problem);
    return out;
}

nlohmann::json calibration_report_json(const ChainResult& result) {
    using nlohmann::json;
    json j;
    j["complete"] = result.complete;
    j["error"] = result.error;
    j["initial"] = params_json(result.initial);
    j["final"] = params_json(result.final);

    json stages = json::array();
    for (const StageReport& s : result.stages) {
        json free = json::array();
        for (CalibParam q : s.free) free.push_back(calib_param_name(q));
        json iters = json::array();
        for (const LmIteration& it : s.lm.iterations)
            iters.push_back({{"iteration", it.iteration},
                             {"objective", std::isfinite(it.objective) ? json(it.objective) : json(nullptr)},
                             {"lambda", it.lambda},
                             {"accepted", it.accepted},
                             {"p", it.p}});
        stages.push_back({{"name", s.name},
                          {"pass", s.pass + 1},
                          {"free", free},
                          {"input", params_json(s.input)},
                          {"output", params_json(s.output)},
                          {"objective_trace", s.lm.accepted_objectives},
                          {"iterations", iters},
                          {"evaluations", s.lm.evaluations},
                          {"stop_reason", s.lm.stop_reason}});
    }
    j["stages"] = stages;

    json ref = json::object(), opt = json::object(), change = json::object();
    for (const ChannelScore& c : result.before.channels) {
        const std::string name(channel_name(c.channel));
        ref[name] = c.nrmse;
        const double after = result.after.nrmse(c.channel);
        opt[name] = after;
        change[name] = c.nrmse > 0.0 ? json(100.0 * (c.nrmse - after) / c.nrmse) : json(nullptr);
    }
    j["nrmse"] = {{"ref", ref}, {"opt", opt}, {"improvement_percent", change}};
    j["objective"] = {{"ref", result.before.objective}, {"opt", result.after.objective}};
    json skipped = json::array();
    for (Channel c : result.before.skipped) skipped.push_back(channel_name(c));
    j["skipped_channels"] = skipped;
    return j;
}

}  // namespace ridecomfort
