#include "ridecomfort/signals.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ridecomfort/errors.hpp"

namespace ridecomfort {

namespace {

std::size_t index_of(Channel c) { return static_cast<std::size_t>(c); }

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Cubic Hermite position on one sample interval, u in [0, 1].
struct HermiteSegment {
    double p0, p1, m0, m1;  // m = slope * interval duration

    double value(double u) const {
        const double u2 = u * u;
        const double u3 = u2 * u;
        return (2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * p1 +
               (u3 - u2) * m1;
    }
    double slope(double u) const {
        const double u2 = u * u;
        return (6 * u2 - 6 * u) * p0 + (3 * u2 - 4 * u + 1) * m0 + (-6 * u2 + 6 * u) * p1 +
               (3 * u2 - 2 * u) * m1;
    }

    // Root of value(u) = target on [0, 1]; the endpoints bracket it.
    double invert(double target) const {
        double lo = 0.0;
        double hi = 1.0;
        double u = (p1 > p0) ? (target - p0) / (p1 - p0) : 0.5;
        u = std::clamp(u, 0.0, 1.0);
        for (int iter = 0; iter < 100; ++iter) {
            const double f = value(u) - target;
            if (f == 0.0) return u;
            if (f < 0.0)
                lo = u;
            else
                hi = u;
            const double d = slope(u);
            double next = (d > 0.0) ? u - f / d : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - u) < 1e-16) return next;
            u = next;
        }
        return u;
    }
};

}  // namespace

void TimeSeries::validate() const {
    if (!(dt > 0.0)) throw ConfigError("time series step dt must be > 0");
    if (values.empty()) throw ConfigError("time series is empty");
    if (!all_finite(values)) throw ConfigError("time series contains non-finite samples");
}

std::string_view channel_name(Channel c) noexcept {
    switch (c) {
        case Channel::vx: return "vx";
        case Channel::ax: return "ax";
        case Channel::ay: return "ay";
        case Channel::az: return "az";
        case Channel::phi_rate: return "phi_rate";
        case Channel::theta_rate: return "theta_rate";
        case Channel::psi_rate: return "psi_rate";
        case Channel::s: return "s";
    }
    return "?";
}

std::optional<Channel> channel_from_name(std::string_view name) noexcept {
    for (Channel c : kAllChannels)
        if (channel_name(c) == name) return c;
    return std::nullopt;
}

VehicleResponse::VehicleResponse(double t0, double dt, std::size_t length)
    : t0_(t0), dt_(dt), length_(length) {
    if (!(dt > 0.0)) throw ConfigError("vehicle response step dt must be > 0");
}

bool VehicleResponse::has(Channel c) const noexcept { return channels_[index_of(c)].has_value(); }

std::span<const double> VehicleResponse::values(Channel c) const {
    const auto& ch = channels_[index_of(c)];
    if (!ch) throw InsufficientDataError("channel '" + std::string(channel_name(c)) + "' is absent");
    return *ch;
}

TimeSeries VehicleResponse::series(Channel c) const {
    auto v = values(c);
    return TimeSeries{t0_, dt_, std::vector<double>(v.begin(), v.end())};
}

void VehicleResponse::set(Channel c, std::vector<double> values) {
    if (values.size() != length_)
        throw DimensionError("channel '" + std::string(channel_name(c)) + "' has " +
                             std::to_string(values.size()) + " samples, trace has " +
                             std::to_string(length_));
    channels_[index_of(c)] = std::move(values);
}

void VehicleResponse::validate() const {
    if (!(dt_ > 0.0)) throw ConfigError("vehicle response step dt must be > 0");
    if (length_ == 0) throw ConfigError("vehicle response is empty");
    for (Channel c : kAllChannels) {
        if (!has(c)) continue;
        if (!all_finite(values(c)))
            throw ConfigError("channel '" + std::string(channel_name(c)) + "' has non-finite samples");
    }
    if (has(Channel::s)) {
        auto s = values(Channel::s);
        for (std::size_t i = 1; i < s.size(); ++i)
            if (s[i] < s[i - 1])
                throw UnsupportedInputError("position s decreases at sample " + std::to_string(i) +
                                            " (reversing vehicle)");
    }
}

std::string_view aggregator_name(Aggregator a) noexcept {
    return a == Aggregator::mean ? "mean" : "max_abs_envelope";
}

std::optional<Aggregator> aggregator_from_name(std::string_view name) noexcept {
    if (name == "mean") return Aggregator::mean;
    if (name == "max_abs_envelope" || name == "max-abs-envelope") return Aggregator::max_abs_envelope;
    return std::nullopt;
}

double rmse(std::span<const double> predicted, std::span<const double> reference) {
    if (predicted.size() != reference.size())
        throw DimensionError("rmse: length mismatch (" + std::to_string(predicted.size()) + " vs " +
                             std::to_string(reference.size()) + ")");
    if (predicted.empty()) throw InsufficientDataError("rmse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - reference[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(predicted.size()));
}

double rmse(const TimeSeries& predicted, const TimeSeries& reference) {
    if (predicted.dt != reference.dt) throw DimensionError("rmse: step mismatch");
    return rmse(std::span<const double>(predicted.values), std::span<const double>(reference.values));
}

double nrmse(std::span<const double> predicted, std::span<const double> reference) {
    const double e = rmse(predicted, reference);
    const auto [lo, hi] = std::minmax_element(reference.begin(), reference.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) throw DegenerateInputError("nrmse: reference has zero range");
    return e / range;
}

double nrmse(const TimeSeries& predicted, const TimeSeries& reference) {
    if (predicted.dt != reference.dt) throw DimensionError("nrmse: step mismatch");
    return nrmse(std::span<const double>(predicted.values), std::span<const double>(reference.values));
}

SpaceSeries to_space(const VehicleResponse& run, Channel channel, double ds) {
    if (!(ds > 0.0)) throw ConfigError("to_space: ds must be > 0");
    const auto s = run.values(Channel::s);
    const auto x = run.values(channel);
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i] < s[i - 1])
            throw UnsupportedInputError("to_space: position decreases at sample " + std::to_string(i) +
                                        " (reversing vehicle)");
    const double s_min = s.front();
    const double s_max = s.back();
    if (s_max - s_min < 2.0 * ds)
        throw InsufficientDataError("to_space: run covers less than two spatial steps");

    const bool hermite = run.has(Channel::vx);
    const auto v = hermite ? run.values(Channel::vx) : std::span<const double>{};
    const double dt = run.dt();

    const auto count = static_cast<std::size_t>(std::floor((s_max - s_min) / ds + 1e-9)) + 1;
    SpaceSeries out;
    out.s0 = s_min;
    out.ds = ds;
    out.values.resize(count);

    std::size_t i = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double target = std::min(s_min + static_cast<double>(k) * ds, s_max);
        while (i + 1 < s.size() && s[i + 1] < target) ++i;
        if (i + 1 >= s.size()) {
            out.values[k] = x.back();
            continue;
        }
        const double a = s[i];
        const double b = s[i + 1];
        double u = 0.0;
        if (b > a) {
            if (hermite) {
                const HermiteSegment seg{a, b, v[i] * dt, v[i + 1] * dt};
                u = seg.invert(target);
            } else {
                u = (target - a) / (b - a);
            }
        }
        out.values[k] = x[i] + u * (x[i + 1] - x[i]);
    }
    return out;
}

std::vector<SpaceSeries> trim_to_common(std::span<const SpaceSeries> runs) {
    if (runs.empty()) throw InsufficientDataError("no runs to trim");
    const double ds = runs.front().ds;
    double start = runs.front().s0;
    double end = runs.front().s0 + runs.front().length();
    for (const auto& r : runs) {
        if (!(r.ds > 0.0) || r.values.empty()) throw InsufficientDataError("empty space series");
        if (std::abs(r.ds - ds) > 1e-12 * ds) throw DimensionError("space series have different steps");
        const double shift = (r.s0 - runs.front().s0) / ds;
        if (std::abs(shift - std::round(shift)) > 1e-6)
            throw DimensionError("space series grids are not aligned");
        start = std::max(start, r.s0);
        end = std::min(end, r.s0 + r.length());
    }
    if (end < start - 1e-9 * ds) throw InsufficientDataError("space series do not overlap");
    const auto count = static_cast<std::size_t>(std::floor((end - start) / ds + 1e-6)) + 1;

    std::vector<SpaceSeries> out;
    out.reserve(runs.size());
    for (const auto& r : runs) {
        const auto offset = static_cast<std::size_t>(std::llround((start - r.s0) / ds));
        SpaceSeries t = r;
        t.s0 = r.position(offset);
        t.values.assign(r.values.begin() + static_cast<std::ptrdiff_t>(offset),
                        r.values.begin() + static_cast<std::ptrdiff_t>(offset + count));
        out.push_back(std::move(t));
    }
    return out;
}

SpaceSeries aggregate(std::span<const SpaceSeries> runs, Aggregator aggregator) {
    if (runs.empty()) throw InsufficientDataError("aggregate: empty run list");
    const auto trimmed = trim_to_common(runs);

    SpaceSeries out;
    out.s0 = trimmed.front().s0;
    out.ds = trimmed.front().ds;
    out.aggregator = aggregator;
    out.run_count = 0;
    for (const auto& r : trimmed) out.run_count += r.run_count;

    const std::size_t n = trimmed.front().size();
    out.values.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        if (aggregator == Aggregator::mean) {
            double acc = 0.0;
            for (const auto& r : trimmed) acc += r.values[k];
            out.values[k] = acc / static_cast<double>(trimmed.size());
        } else {
            double best = trimmed.front().values[k];
            for (const auto& r : trimmed)
                if (std::abs(r.values[k]) > std::abs(best)) best = r.values[k];
            out.values[k] = best;
        }
    }
    return out;
}

double sample_at(const SpaceSeries& series, double s) {
    if (series.values.empty()) throw InsufficientDataError("sample_at: empty series");
    if (series.values.size() == 1) return series.values.front();
    const double u = (s - series.s0) / series.ds;
    if (u <= 0.0) return series.values.front();
    const double last = static_cast<double>(series.values.size() - 1);
    if (u >= last) return series.values.back();
    const auto i = static_cast<std::size_t>(u);
    const double f = u - static_cast<double>(i);
    return series.values[i] + f * (series.values[i + 1] - series.values[i]);
}

}  // namespace ridecomfort
