#include "ridecomfort/iso2631.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "ridecomfort/errors.hpp"

namespace ridecomfort {

namespace {

using cplx = std::complex<double>;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Analog biquad (b2 p^2 + b1 p + b0) / (a2 p^2 + a1 p + a0).
struct AnalogSection {
    double b2, b1, b0;
    double a2, a1, a0;

    cplx at(cplx p) const { return (b2 * p * p + b1 * p + b0) / (a2 * p * p + a1 * p + a0); }
};

AnalogSection analog_section(const FilterSpec& spec, Stage stage) {
    const double w1 = kTwoPi * spec.f1, w2 = kTwoPi * spec.f2, w3 = kTwoPi * spec.f3;
    const double w4 = kTwoPi * spec.f4, w5 = kTwoPi * spec.f5, w6 = kTwoPi * spec.f6;
    switch (stage) {
        case Stage::h: return {1.0, 0.0, 0.0, 1.0, std::numbers::sqrt2 * w1, w1 * w1};
        case Stage::l: return {0.0, 0.0, w2 * w2, 1.0, std::numbers::sqrt2 * w2, w2 * w2};
        case Stage::t: return {0.0, w4 * w4 / w3, w4 * w4, 1.0, w4 / spec.q4, w4 * w4};
        case Stage::s: return {1.0, w5 / spec.q5, w5 * w5, 1.0, w6 / spec.q6, w6 * w6};
    }
    return {0, 0, 1, 0, 0, 1};
}

constexpr std::array<Stage, 4> kStages = {Stage::h, Stage::l, Stage::t, Stage::s};

std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::h: return "high-pass";
        case Stage::l: return "low-pass";
        case Stage::t: return "transition";
        case Stage::s: return "upward-step";
    }
    return "?";
}

double stage_corner(const FilterSpec& spec, Stage s) {
    switch (s) {
        case Stage::h: return spec.f1;
        case Stage::l: return spec.f2;
        case Stage::t: return std::max(spec.f3, spec.f4);
        case Stage::s: return std::max(spec.f5, spec.f6);
    }
    return 0.0;
}

Biquad bilinear(const AnalogSection& a, double fs) {
    const double k = 2.0 * fs;
    const double k2 = k * k;
    const double d0 = a.a2 * k2 + a.a1 * k + a.a0;
    return {(a.b2 * k2 + a.b1 * k + a.b0) / d0, (2.0 * a.b0 - 2.0 * a.b2 * k2) / d0,
            (a.b2 * k2 - a.b1 * k + a.b0) / d0, (2.0 * a.a0 - 2.0 * a.a2 * k2) / d0,
            (a.a2 * k2 - a.a1 * k + a.a0) / d0};
}

FilterSpec make_spec(char id, std::array<std::optional<double>, 9> v) {
    FilterSpec s;
    s.weighting_id = id;
    auto get = [&](std::size_t i) { return v[i].value_or(0.0); };
    s.f1 = get(0);
    s.f2 = get(1);
    s.f3 = get(2);
    s.f4 = get(3);
    s.q4 = get(4);
    s.f5 = get(5);
    s.q5 = get(6);
    s.f6 = get(7);
    s.q6 = get(8);
    s.stage_enabled = {v[0].has_value(), v[1].has_value(), v[2].has_value() && v[3].has_value() && v[4].has_value(),
                       v[5].has_value() && v[6].has_value() && v[7].has_value() && v[8].has_value()};
    return s;
}

constexpr std::optional<double> off = std::nullopt;

}  // namespace

double FilterSpec::max_corner() const noexcept {
    double m = 0.0;
    for (Stage s : kStages)
        if (enabled(s)) m = std::max(m, stage_corner(*this, s));
    return m;
}

void FilterSpec::validate() const {
    auto positive = [&](double x, std::string_view what) {
        if (!(x > 0.0) || !std::isfinite(x))
            throw ConfigError(fmt::format("weighting '{}': {} must be > 0", weighting_id, what));
    };
    if (enabled(Stage::h)) positive(f1, "f1");
    if (enabled(Stage::l)) positive(f2, "f2");
    if (enabled(Stage::t)) {
        positive(f3, "f3");
        positive(f4, "f4");
        positive(q4, "Q4");
    }
    if (enabled(Stage::s)) {
        positive(f5, "f5");
        positive(q5, "Q5");
        positive(f6, "f6");
        positive(q6, "Q6");
    }
}

FilterSpec builtin_weighting(char id) {
    switch (id) {
        case 'k': return make_spec('k', {0.4, 100.0, 12.5, 12.5, 0.63, 2.37, 0.91, 3.35, 0.91});
        case 'd': return make_spec('d', {0.4, 100.0, 2.0, 2.0, 0.63, off, off, off, off});
        case 'c': return make_spec('c', {0.4, 100.0, 8.0, 8.0, 0.63, off, off, off, off});
        case 'e': return make_spec('e', {0.4, 100.0, 1.0, 1.0, 0.63, off, off, off, off});
        case 'j': return make_spec('j', {0.4, 100.0, off, off, off, 3.75, 0.91, 5.32, 0.91});
        default: throw ConfigError(fmt::format("unknown weighting '{}'", id));
    }
}

WeightingTable load_weighting_table(std::istream& in) {
    WeightingTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string id;
        if (!(ls >> id)) continue;
        if (id.rfind("version=", 0) == 0) {
            if (id != "version=1") throw ParseError(lineno, fmt::format("unsupported table {}", id));
            continue;
        }
        if (id.size() != 1) throw ParseError(lineno, fmt::format("bad weighting id '{}'", id));
        std::array<std::optional<double>, 9> v;
        std::string tok;
        std::size_t n = 0;
        while (ls >> tok) {
            if (n == v.size()) throw ParseError(lineno, "too many fields");
            if (tok != "-") {
                double x = 0.0;
                const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
                if (ec != std::errc() || p != tok.data() + tok.size())
                    throw ParseError(lineno, fmt::format("'{}' is not a number", tok));
                v[n] = x;
            }
            ++n;
        }
        if (n != v.size()) throw ParseError(lineno, fmt::format("expected 9 parameters, found {}", n));
        const bool t_any = v[2] || v[3] || v[4];
        const bool s_any = v[5] || v[6] || v[7] || v[8];
        FilterSpec spec = make_spec(id[0], v);
        if ((t_any && !spec.enabled(Stage::t)) || (s_any && !spec.enabled(Stage::s)))
            throw ParseError(lineno, "partially specified stage");
        try {
            spec.validate();
        } catch (const ConfigError& e) {
            throw ParseError(lineno, e.what());
        }
        if (!table.emplace(id[0], spec).second) throw ParseError(lineno, fmt::format("duplicate id '{}'", id));
    }
    return table;
}

WeightingTable load_weighting_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    return load_weighting_table(in);
}

std::filesystem::path default_weighting_table_path() {
    return std::filesystem::path(RIDECOMFORT_DATA_DIR) / "iso2631_weightings.txt";
}

std::complex<double> analog_response(const FilterSpec& spec, double f) {
    const cplx p(0.0, kTwoPi * f);
    cplx h(1.0, 0.0);
    for (Stage s : kStages)
        if (spec.enabled(s)) h *= analog_section(spec, s).at(p);
    return h;
}

std::complex<double> DigitalFilter::response(double f) const {
    const cplx z1 = std::polar(1.0, -kTwoPi * f / sample_rate_);
    const cplx z2 = z1 * z1;
    cplx h(1.0, 0.0);
    for (const Biquad& b : sections_) h *= (b.b0 + b.b1 * z1 + b.b2 * z2) / (1.0 + b.a1 * z1 + b.a2 * z2);
    return h;
}

std::vector<double> DigitalFilter::apply(std::span<const double> x) const {
    std::vector<double> y(x.begin(), x.end());
    for (const Biquad& b : sections_) {
        double s1 = 0.0, s2 = 0.0;
        for (double& v : y) {
            const double in = v;
            const double out = b.b0 * in + s1;
            s1 = b.b1 * in - b.a1 * out + s2;
            s2 = b.b2 * in - b.a2 * out;
            v = out;
        }
    }
    return y;
}

DigitalFilter design_filter(const FilterSpec& spec, double sample_rate) {
    spec.validate();
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw DesignError("sample rate must be > 0");
    std::vector<Biquad> sections;
    for (Stage s : kStages) {
        if (!spec.enabled(s)) continue;
        const double corner = stage_corner(spec, s);
        if (sample_rate < 2.0 * corner)
            throw DesignError(fmt::format("weighting '{}': {} stage corner {} Hz needs a sample rate >= {} Hz, got {}",
                                          spec.weighting_id, stage_name(s), corner, 2.0 * corner, sample_rate));
        sections.push_back(bilinear(analog_section(spec, s), sample_rate));
    }
    return DigitalFilter(std::move(sections), sample_rate);
}

double rms(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

WeightedResult weight_signal(const TimeSeries& a, const FilterSpec& spec) {
    a.validate();
    if (a.duration() < kMinWeightingDuration)
        throw InsufficientDataError(fmt::format("weighting needs >= {} s of signal, got {} s", kMinWeightingDuration,
                                                a.duration()));
    const DigitalFilter filter = design_filter(spec, 1.0 / a.dt);
    WeightedResult out;
    out.a_w = TimeSeries{a.t0, a.dt, filter.apply(a.values)};
    out.a_w_rms = rms(out.a_w.values);
    out.duration = a.duration();
    return out;
}

CombinedVibration combine(double ax_rms, double ay_rms, double az_rms, double k_x, double k_y, double k_z) {
    if (!(ax_rms >= 0.0 && ay_rms >= 0.0 && az_rms >= 0.0)) throw DomainError("weighted RMS values must be >= 0");
    if (!(k_x >= 0.0 && k_y >= 0.0 && k_z >= 0.0)) throw ConfigError("axis factors must be >= 0");
    const double x = k_x * ax_rms, y = k_y * ay_rms, z = k_z * az_rms;
    return {std::sqrt(x * x + y * y + z * z), k_x, k_y, k_z};
}

std::string_view comfort_label_name(ComfortLabel c) noexcept {
    switch (c) {
        case ComfortLabel::NU: return "NU";
        case ComfortLabel::LU: return "LU";
        case ComfortLabel::FU: return "FU";
        case ComfortLabel::U: return "U";
        case ComfortLabel::VU: return "VU";
        case ComfortLabel::EU: return "EU";
    }
    return "?";
}

std::string_view perception_name(Perception p) noexcept {
    switch (p) {
        case Perception::below: return "below";
        case Perception::transition: return "transition";
        case Perception::above: return "above";
    }
    return "?";
}

std::span<const ComfortBand> comfort_bands(bool extended) noexcept {
    static constexpr ComfortBand standard[] = {{ComfortLabel::NU, 0.0},
                                               {ComfortLabel::LU, 0.315},
                                               {ComfortLabel::FU, 0.5},
                                               {ComfortLabel::VU, 1.25},
                                               {ComfortLabel::EU, 2.0}};
    static constexpr ComfortBand with_u[] = {{ComfortLabel::NU, 0.0},  {ComfortLabel::LU, 0.315},
                                             {ComfortLabel::FU, 0.5},  {ComfortLabel::U, 0.8},
                                             {ComfortLabel::VU, 1.25}, {ComfortLabel::EU, 2.0}};
    if (extended) return with_u;
    return standard;
}

IsoClassification classify_iso(double a_v, bool extended) {
    if (!(a_v >= 0.0) || !std::isfinite(a_v)) throw DomainError(fmt::format("a_v must be finite and >= 0, got {}", a_v));
    IsoClassification out;
    for (const ComfortBand& b : comfort_bands(extended))
        if (b.lower <= a_v) out.label = b.label;
    out.perception = a_v < kPerceptionLow    ? Perception::below
                     : a_v > kPerceptionHigh ? Perception::above
                                             : Perception::transition;
    return out;
}

}  // namespace ridecomfort
