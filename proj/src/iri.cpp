#include "ridecomfort/iri.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "ridecomfort/errors.hpp"

namespace ridecomfort {

namespace {

using State = std::array<double, 4>;

State derivative(const StateMatrix& a, double b, const State& x, double h) {
    State d{};
    for (std::size_t i = 0; i < 4; ++i)
        d[i] = a[i][0] * x[0] + a[i][1] * x[1] + a[i][2] * x[2] + a[i][3] * x[3];
    d[3] += b * h;
    return d;
}

State add(const State& x, double s, const State& k) {
    return {x[0] + s * k[0], x[1] + s * k[1], x[2] + s * k[2], x[3] + s * k[3]};
}

constexpr IriBands kBands[] = {
    {120.0, {0.95, 1.49, 1.89, 2.70}}, {100.0, {1.14, 1.79, 2.27, 3.24}}, {80.0, {1.43, 2.24, 2.84, 4.05}},
    {70.0, {1.63, 2.57, 3.25, 4.63}},  {60.0, {1.90, 2.99, 3.79, 5.40}},  {50.0, {2.28, 3.59, 4.54, 6.25}},
    {40.0, {2.86, 4.49, 5.69, 8.08}},  {30.0, {3.80, 5.99, 7.59, 10.80}}, {20.0, {5.72, 8.99, 11.39, 16.16}},
    {10.0, {11.44, 17.99, 22.79, 32.32}},
};

}  // namespace

// Rows 1 and 3 select the velocities; rows 2 and 4 are the sprung and unsprung
// force balances divided by m_s (and by mu for the unsprung mass).
StateMatrix iri_state_matrix(const GoldenCarParams& p) noexcept {
    return {{{0.0, 1.0, 0.0, 0.0},
             {-p.k2, -p.c, p.k2, p.c},
             {0.0, 0.0, 0.0, 1.0},
             {p.k2 / p.mu, p.c / p.mu, -(p.k1 + p.k2) / p.mu, -p.c / p.mu}}};
}

std::array<std::complex<double>, 4> iri_eigenvalues(const GoldenCarParams& p) {
    const StateMatrix a = iri_state_matrix(p);
    Eigen::Matrix4d m;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) m(i, j) = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    const Eigen::EigenSolver<Eigen::Matrix4d> solver(m, false);
    if (solver.info() != Eigen::Success) throw NumericError("eigenvalue computation failed");
    std::array<std::complex<double>, 4> out;
    for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
    return out;
}

bool iri_model_stable(const GoldenCarParams& p) {
    if (!(p.c > 0 && p.k1 > 0 && p.k2 > 0 && p.mu > 0)) return false;
    const auto ev = iri_eigenvalues(p);
    return std::all_of(ev.begin(), ev.end(), [](const std::complex<double>& e) { return e.real() < 0.0; });
}

std::vector<IriResult> compute_iri(const Profile& profile, double speed, double segment_length,
                                   const IriOptions& options) {
    if (!(profile.step > 0.0)) throw ConfigError("profile step must be > 0");
    if (profile.step > kMaxIriStep)
        throw ConfigError(fmt::format("profile step {} m is coarser than the {} m IRI resolution limit", profile.step,
                                      kMaxIriStep));
    if (!(speed > 0.0) || !std::isfinite(speed)) throw ConfigError("IRI speed must be > 0");
    if (!(segment_length > 0.0)) throw ConfigError("IRI segment length must be > 0");
    if (!(options.init_length > 0.0)) throw ConfigError("IRI initialization length must be > 0");
    if (profile.size() < 2) throw InsufficientDataError("IRI needs at least two profile samples");
    for (double z : profile.z)
        if (!std::isfinite(z)) throw UnsupportedInputError("profile contains non-finite elevations");
    if (profile.length() + 1e-9 * segment_length < segment_length)
        throw InsufficientDataError(
            fmt::format("profile length {} m is shorter than one {} m segment", profile.length(), segment_length));
    if (!iri_model_stable(options.car)) throw NumericError("quarter-car parameters give an unstable model");

    const StateMatrix a = iri_state_matrix(options.car);
    const double b = options.car.k1 / options.car.mu;
    const double dt = profile.step / speed;
    const std::size_t n = profile.size();

    // Every segment spans the same number of samples: the step divides the
    // segment up to rounding.
    const auto per_segment = static_cast<std::size_t>(std::llround(segment_length / profile.step));
    if (per_segment == 0 || std::abs(static_cast<double>(per_segment) * profile.step - segment_length) >
                                1e-6 * segment_length)
        throw ConfigError(
            fmt::format("segment length {} m is not a multiple of the profile step {} m", segment_length, profile.step));
    const std::size_t segments = (n - 1) / per_segment;

    const double init = std::min(options.init_length, profile.length());
    const double slope = (profile.at(profile.s0 + init) - profile.z[0]) / init;
    State x{profile.z[0], speed * slope, profile.z[0], speed * slope};

    std::vector<IriResult> out(segments);
    for (std::size_t k = 0; k < segments; ++k) {
        out[k].start = profile.position(k * per_segment);
        out[k].segment_length = segment_length;
        out[k].speed = speed;
        out[k].accumulated.reserve(per_segment + 1);
        out[k].accumulated.push_back(0.0);
    }

    const std::size_t last = segments * per_segment;
    double rate = std::abs(x[1] - x[3]);
    double acc = 0.0;
    for (std::size_t i = 0; i < last; ++i) {
        const double h0 = profile.z[i];
        const double h1 = profile.z[i + 1];
        const double hm = 0.5 * (h0 + h1);
        const State k1 = derivative(a, b, x, h0);
        const State k2 = derivative(a, b, add(x, 0.5 * dt, k1), hm);
        const State k3 = derivative(a, b, add(x, 0.5 * dt, k2), hm);
        const State k4 = derivative(a, b, add(x, dt, k3), h1);
        for (std::size_t j = 0; j < 4; ++j) x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        if (!std::isfinite(x[0] + x[1] + x[2] + x[3])) throw NumericError("IRI integration diverged");

        const double next = std::abs(x[1] - x[3]);
        acc += 0.5 * (rate + next) * dt;
        rate = next;
        IriResult& seg = out[i / per_segment];
        seg.accumulated.push_back(acc);
        if ((i + 1) % per_segment == 0) {
            seg.iri = 1000.0 * acc / segment_length;
            acc = 0.0;
        }
    }
    return out;
}

std::string_view ride_quality_name(RideQuality q) noexcept {
    switch (q) {
        case RideQuality::VG: return "VG";
        case RideQuality::G: return "G";
        case RideQuality::F: return "F";
        case RideQuality::M: return "M";
        case RideQuality::P: return "P";
    }
    return "?";
}

std::span<const IriBands> iri_band_table() noexcept { return kBands; }

const IriBands& iri_bands_for(double speed_kmh) {
    if (!(speed_kmh > 0.0 && speed_kmh <= 130.0))
        throw DomainError(fmt::format("speed {} km/h outside (0, 130]", speed_kmh));
    const IriBands* best = &kBands[0];
    for (const IriBands& b : kBands) {
        const double d = std::abs(b.speed_kmh - speed_kmh);
        const double dbest = std::abs(best->speed_kmh - speed_kmh);
        if (d < dbest || (d == dbest && b.speed_kmh < best->speed_kmh)) best = &b;
    }
    return *best;
}

RideQuality classify_iri(double iri, double speed_kmh) {
    if (!(iri >= 0.0) || !std::isfinite(iri)) throw DomainError(fmt::format("IRI must be finite and >= 0, got {}", iri));
    const IriBands& bands = iri_bands_for(speed_kmh);
    for (std::size_t i = 0; i < bands.upper.size(); ++i)
        if (iri <= bands.upper[i]) return static_cast<RideQuality>(i);
    return RideQuality::P;
}

SpaceSeries interpolate_iri(std::span<const IriSample> samples, double ds) {
    if (samples.size() < 2) throw InsufficientDataError("IRI interpolation needs at least two samples");
    if (!(ds > 0.0)) throw ConfigError("spatial step must be > 0");
    for (std::size_t i = 1; i < samples.size(); ++i)
        if (!(samples[i].station > samples[i - 1].station))
            throw UnsupportedInputError("IRI sample stations must increase");
    const double s0 = samples.front().station;
    const double span = samples.back().station - s0;
    const auto count = static_cast<std::size_t>(std::floor(span / ds + 1e-9)) + 1;

    SpaceSeries out;
    out.s0 = s0;
    out.ds = ds;
    out.values.resize(count);
    std::size_t j = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double s = out.position(k);
        while (j + 2 < samples.size() && s > samples[j + 1].station) ++j;
        const IriSample& a = samples[j];
        const IriSample& b = samples[j + 1];
        const double u = std::clamp((s - a.station) / (b.station - a.station), 0.0, 1.0);
        out.values[k] = a.iri + u * (b.iri - a.iri);
    }
    // Land exactly on the last sample when the grid reaches it.
    if (std::abs(out.position(count - 1) - samples.back().station) < 1e-9 * std::max(1.0, span))
        out.values.back() = samples.back().iri;
    return out;
}

}  // namespace ridecomfort
