#include "ridecomfort/road.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <unsupported/Eigen/FFT>

#include "ridecomfort/errors.hpp"

namespace ridecomfort {

namespace {

double lerp_clamped(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (xs.empty()) return 0.0;
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const auto i = static_cast<std::size_t>(it - xs.begin()) - 1;
    const double f = (x - xs[i]) / (xs[i + 1] - xs[i]);
    return ys[i] + f * (ys[i + 1] - ys[i]);
}

std::vector<double> gradient(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    std::vector<double> g(n, 0.0);
    if (n < 2) return g;
    g.front() = (ys[1] - ys[0]) / (xs[1] - xs[0]);
    g.back() = (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) g[i] = (ys[i + 1] - ys[i - 1]) / (xs[i + 1] - xs[i - 1]);
    return g;
}

double wrap_angle(double a) {
    constexpr double pi = std::numbers::pi;
    while (a > pi) a -= 2 * pi;
    while (a <= -pi) a += 2 * pi;
    return a;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(std::string_view tok, std::size_t line, std::string_view what) {
    double v = 0.0;
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw ParseError(line, "non-numeric " + std::string(what) + " '" + std::string(tok) + "'");
    return v;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        if (i >= s.size()) break;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

double median(std::vector<double>& v) {
    const auto n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (n % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

// Replaces outlier cells by their 3x3 neighbourhood median. Returns the count.
std::size_t clean_outliers(RoadGrid& grid) {
    const std::size_t ns = grid.n_stations();
    const std::size_t nv = grid.n_offsets;
    std::vector<double> med(ns * nv);
    std::vector<double> resid(ns * nv);
    std::vector<double> window;
    window.reserve(9);
    for (std::size_t i = 0; i < ns; ++i) {
        for (std::size_t j = 0; j < nv; ++j) {
            window.clear();
            for (std::size_t a = (i == 0 ? 0 : i - 1); a <= std::min(ns - 1, i + 1); ++a)
                for (std::size_t b = (j == 0 ? 0 : j - 1); b <= std::min(nv - 1, j + 1); ++b)
                    window.push_back(grid.at(a, b));
            med[i * nv + j] = median(window);
            resid[i * nv + j] = grid.at(i, j) - med[i * nv + j];
        }
    }
    std::vector<double> tmp = resid;
    const double center = median(tmp);
    tmp.assign(resid.begin(), resid.end());
    for (auto& r : tmp) r = std::abs(r - center);
    const double sigma = std::max(1.4826 * median(tmp), kOutlierSigmaFloor);

    std::size_t replaced = 0;
    for (std::size_t k = 0; k < ns * nv; ++k) {
        const bool spike = std::abs(resid[k]) > kOutlierSigmas * sigma;
        const bool out_of_bounds = std::abs(grid.elevations[k]) > kMaxElevationDeviation;
        if (spike || out_of_bounds) {
            grid.elevations[k] = med[k];
            ++replaced;
        }
    }
    return replaced;
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

double Profile::at(double s) const noexcept {
    if (z.empty()) return 0.0;
    if (z.size() == 1) return z.front();
    const double u = (s - s0) / step;
    if (u <= 0.0) return z.front();
    const double last = static_cast<double>(z.size() - 1);
    if (u >= last) return z.back();
    const auto i = static_cast<std::size_t>(u);
    const double f = u - static_cast<double>(i);
    return z[i] + f * (z[i + 1] - z[i]);
}

double ReferenceLine::curvature_at(double s) const noexcept {
    return lerp_clamped(stations, curvature, s);
}

double ReferenceLine::curvature_gon_per_km() const noexcept {
    if (size() < 2 || length() <= 0.0) return 0.0;
    double turned = 0.0;
    for (std::size_t i = 1; i < headings.size(); ++i) turned += std::abs(wrap_angle(headings[i] - headings[i - 1]));
    return turned * (200.0 / std::numbers::pi) / (length() / 1000.0);
}

ReferenceLine make_reference_line(std::vector<double> stations, std::vector<double> headings,
                                  std::vector<double> elevation) {
    if (stations.size() != headings.size() || stations.size() != elevation.size())
        throw ConfigError("reference line arrays differ in length");
    for (std::size_t i = 1; i < stations.size(); ++i)
        if (!(stations[i] > stations[i - 1])) throw ConfigError("reference line stations must increase");

    ReferenceLine line;
    const std::size_t n = stations.size();
    line.x.assign(n, 0.0);
    line.y.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        const double ds = stations[i] - stations[i - 1];
        const double h = headings[i - 1] + 0.5 * wrap_angle(headings[i] - headings[i - 1]);
        line.x[i] = line.x[i - 1] + ds * std::cos(h);
        line.y[i] = line.y[i - 1] + ds * std::sin(h);
    }
    std::vector<double> unwrapped = headings;
    for (std::size_t i = 1; i < n; ++i)
        unwrapped[i] = unwrapped[i - 1] + wrap_angle(headings[i] - headings[i - 1]);
    line.curvature = gradient(stations, unwrapped);
    line.slope_percent = gradient(stations, elevation);
    for (auto& v : line.slope_percent) v *= 100.0;
    line.stations = std::move(stations);
    line.headings = std::move(headings);
    line.elevation = std::move(elevation);
    return line;
}

void RoadGrid::validate() const {
    if (!(station_step > 0.0)) throw ConfigError("grid station_step must be > 0");
    if (!(offset_step > 0.0)) throw ConfigError("grid offset_step must be > 0");
    if (n_offsets == 0) throw ConfigError("grid needs at least one lateral offset");
    if (n_stations() < 2) throw ConfigError("grid needs at least two stations");
    if (elevations.size() != n_stations() * n_offsets) throw ConfigError("grid elevation array is not dense");
    for (std::size_t i = 1; i < n_stations(); ++i) {
        const double d = ref_line.stations[i] - ref_line.stations[i - 1];
        if (std::abs(d - station_step) > 1e-6 * station_step)
            throw ConfigError("grid stations are not spaced by station_step");
    }
    for (double z : elevations)
        if (!std::isfinite(z) || std::abs(z) > kMaxElevationDeviation)
            throw ConfigError("grid elevation deviation outside +-10 m");
}

bool operator==(const RoadGrid& a, const RoadGrid& b) {
    return a.station_step == b.station_step && a.offset_start == b.offset_start &&
           a.offset_step == b.offset_step && a.n_offsets == b.n_offsets &&
           a.elevations == b.elevations && a.ref_line.stations == b.ref_line.stations &&
           a.ref_line.headings == b.ref_line.headings && a.ref_line.elevation == b.ref_line.elevation;
}

void SmoothingParams::validate() const {
    if (!(lambda_x >= 0.0) || !(lambda_y >= 0.0) || !(lambda_z >= 0.0))
        throw ConfigError("smoothing parameters must be >= 0");
}

GridLoadResult load_grid(std::istream& in) {
    std::optional<double> station_step, offset_start, offset_step;
    std::optional<std::size_t> n_offsets;
    std::vector<double> stations, headings, ref_elev, cells;
    std::size_t header_line = 0;

    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;

        if (const auto eq = line.find('='); eq != std::string_view::npos) {
            if (!stations.empty()) throw ParseError(line_no, "header after data rows");
            const auto key = trim(line.substr(0, eq));
            const auto val = trim(line.substr(eq + 1));
            if (key == "station_step") {
                station_step = parse_number(val, line_no, "station_step");
            } else if (key == "offset_start") {
                offset_start = parse_number(val, line_no, "offset_start");
            } else if (key == "offset_step") {
                offset_step = parse_number(val, line_no, "offset_step");
            } else if (key == "n_offsets") {
                const double n = parse_number(val, line_no, "n_offsets");
                if (n < 1 || n != std::floor(n)) throw ParseError(line_no, "n_offsets must be a positive integer");
                n_offsets = static_cast<std::size_t>(n);
            } else {
                throw ParseError(line_no, "unknown header '" + std::string(key) + "'");
            }
            header_line = line_no;
            continue;
        }

        if (!station_step || !offset_start || !offset_step || !n_offsets)
            throw ParseError(line_no, "data row before complete header "
                                      "(station_step, offset_start, offset_step, n_offsets)");
        if (!(*station_step > 0.0)) throw ParseError(header_line, "station_step must be > 0");
        if (!(*offset_step > 0.0)) throw ParseError(header_line, "offset_step must be > 0");

        const auto tokens = split_ws(line);
        if (tokens.size() != 3 + *n_offsets)
            throw ParseError(line_no, "ragged row: expected " + std::to_string(3 + *n_offsets) +
                                          " values, found " + std::to_string(tokens.size()));
        const double s = parse_number(tokens[0], line_no, "station");
        if (!stations.empty()) {
            if (!(s > stations.back())) throw ParseError(line_no, "non-monotone station");
            if (std::abs(s - stations.back() - *station_step) > 1e-6 * *station_step)
                throw ParseError(line_no, "station spacing differs from station_step");
        }
        stations.push_back(s);
        headings.push_back(parse_number(tokens[1], line_no, "heading"));
        ref_elev.push_back(parse_number(tokens[2], line_no, "reference elevation"));
        for (std::size_t k = 3; k < tokens.size(); ++k) cells.push_back(parse_number(tokens[k], line_no, "elevation"));
    }
    if (stations.size() < 2) throw ParseError(line_no, "grid needs at least two station rows");

    GridLoadResult result;
    RoadGrid& g = result.grid;
    g.station_step = *station_step;
    g.offset_start = *offset_start;
    g.offset_step = *offset_step;
    g.n_offsets = *n_offsets;
    g.ref_line = make_reference_line(std::move(stations), std::move(headings), std::move(ref_elev));
    g.elevations = std::move(cells);
    result.outliers_replaced = clean_outliers(g);
    for (double z : g.elevations)
        if (std::abs(z) > kMaxElevationDeviation)
            throw ParseError(line_no, "elevation deviation beyond +-10 m survives cleaning");
    return result;
}

GridLoadResult load_grid(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open grid file '" + path.string() + "'");
    return load_grid(in);
}

void save_grid(std::ostream& out, const RoadGrid& grid) {
    out << fmt::format("station_step={}\noffset_start={}\noffset_step={}\nn_offsets={}\n", grid.station_step,
                       grid.offset_start, grid.offset_step, grid.n_offsets);
    std::string row;
    for (std::size_t i = 0; i < grid.n_stations(); ++i) {
        row = fmt::format("{} {} {}", grid.ref_line.stations[i], grid.ref_line.headings[i],
                          grid.ref_line.elevation[i]);
        for (std::size_t j = 0; j < grid.n_offsets; ++j) row += fmt::format(" {}", grid.at(i, j));
        row += '\n';
        out << row;
    }
}

void save_grid(const std::filesystem::path& path, const RoadGrid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write grid file '" + path.string() + "'");
    save_grid(out, grid);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

RoadSurface::RoadSurface(RoadGrid grid, SmoothingParams params)
    : grid_(std::move(grid)), params_(params) {
    grid_.validate();
    params_.validate();

    const std::size_t ns = grid_.n_stations();
    const std::size_t nv = grid_.n_offsets;

    ref_ = SmoothingSpline1D(ns, grid_.station_step, params_.lambda_z).fit(grid_.ref_line.elevation);

    // Across offsets first, then along stations for both the values and the
    // lateral second derivatives.
    const SmoothingSpline1D across(nv, grid_.offset_step, params_.lambda_y);
    std::vector<double> gv(ns * nv), mv(ns * nv);
    std::vector<double> row(nv);
    for (std::size_t i = 0; i < ns; ++i) {
        for (std::size_t j = 0; j < nv; ++j) row[j] = grid_.at(i, j);
        const auto fit = across.fit(row);
        for (std::size_t j = 0; j < nv; ++j) {
            gv[i * nv + j] = fit.values[j];
            mv[i * nv + j] = fit.second[j];
        }
    }

    const SmoothingSpline1D along(ns, grid_.station_step, params_.lambda_x);
    z_.resize(ns * nv);
    z_ss_.resize(ns * nv);
    z_vv_.resize(ns * nv);
    z_ssvv_.resize(ns * nv);
    std::vector<double> col(ns);
    for (std::size_t j = 0; j < nv; ++j) {
        for (std::size_t i = 0; i < ns; ++i) col[i] = gv[i * nv + j];
        const auto a = along.fit(col);
        for (std::size_t i = 0; i < ns; ++i) col[i] = mv[i * nv + j];
        const auto b = along.fit(col);
        for (std::size_t i = 0; i < ns; ++i) {
            z_[i * nv + j] = a.values[i];
            z_ss_[i * nv + j] = a.second[i];
            z_vv_[i * nv + j] = b.values[i];
            z_ssvv_[i * nv + j] = b.second[i];
        }
    }
}

double RoadSurface::elevation_at(double s, double v) const {
    const double tol_s = 1e-9 * (1.0 + std::abs(s));
    const double tol_v = 1e-9 * (1.0 + std::abs(v));
    if (s < s_begin() - tol_s || s > s_end() + tol_s || v < grid_.offset_start - tol_v ||
        v > grid_.offset_end() + tol_v)
        throw DomainError(fmt::format("query (s={}, v={}) outside grid hull [{}, {}] x [{}, {}]", s, v, s_begin(),
                                      s_end(), grid_.offset_start, grid_.offset_end()));
    return evaluate(s, v);
}

double RoadSurface::elevation_clamped(double s, double v) const noexcept {
    return evaluate(std::clamp(s, s_begin(), s_end()), std::clamp(v, grid_.offset_start, grid_.offset_end()));
}

double RoadSurface::evaluate(double s, double v) const noexcept {
    const std::size_t ns = grid_.n_stations();
    const std::size_t nv = grid_.n_offsets;
    const double hs = grid_.station_step;

    const double us = std::clamp((s - s_begin()) / hs, 0.0, static_cast<double>(ns - 1));
    const std::size_t i = std::min(static_cast<std::size_t>(us), ns - 2);
    const CellWeights ws = cell_weights(us - static_cast<double>(i), hs);

    double result = ws.a * ref_.values[i] + ws.b * ref_.values[i + 1] + ws.c * ref_.second[i] +
                    ws.d * ref_.second[i + 1];

    auto at = [nv](const std::vector<double>& f, std::size_t a, std::size_t b) { return f[a * nv + b]; };

    if (nv == 1) {
        return result + ws.a * at(z_, i, 0) + ws.b * at(z_, i + 1, 0) + ws.c * at(z_ss_, i, 0) +
               ws.d * at(z_ss_, i + 1, 0);
    }

    const double hv = grid_.offset_step;
    const double uv = std::clamp((v - grid_.offset_start) / hv, 0.0, static_cast<double>(nv - 1));
    const std::size_t j = std::min(static_cast<std::size_t>(uv), nv - 2);
    const CellWeights wv = cell_weights(uv - static_cast<double>(j), hv);

    const double wsv[2] = {ws.a, ws.b};
    const double csv[2] = {ws.c, ws.d};
    const double wvv[2] = {wv.a, wv.b};
    const double cvv[2] = {wv.c, wv.d};
    for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) {
            result += wsv[a] * wvv[b] * at(z_, i + a, j + b) + wsv[a] * cvv[b] * at(z_vv_, i + a, j + b) +
                      csv[a] * wvv[b] * at(z_ss_, i + a, j + b) + csv[a] * cvv[b] * at(z_ssvv_, i + a, j + b);
        }
    }
    return result;
}

double elevation_at(const RoadGrid& grid, double s, double v, const SmoothingParams& params) {
    return RoadSurface(grid, params).elevation_at(s, v);
}

Profile wheel_track_profile(const RoadSurface& surface, double lateral_offset, double step) {
    if (!(step > 0.0)) throw ConfigError("profile step must be > 0");
    const auto& g = surface.grid();
    const double tol = 1e-9 * (1.0 + std::abs(lateral_offset));
    if (lateral_offset < g.offset_start - tol || lateral_offset > g.offset_end() + tol)
        throw DomainError(fmt::format("lateral offset {} outside grid [{}, {}]", lateral_offset, g.offset_start,
                                      g.offset_end()));
    Profile p;
    p.s0 = surface.s_begin();
    p.step = step;
    const auto n = static_cast<std::size_t>(std::floor((surface.s_end() - surface.s_begin()) / step + 1e-9)) + 1;
    p.z.resize(n);
    for (std::size_t k = 0; k < n; ++k) p.z[k] = surface.elevation_clamped(p.position(k), lateral_offset);
    return p;
}

Profile wheel_track_profile(const RoadGrid& grid, double lateral_offset, const SmoothingParams& params,
                            double step) {
    return wheel_track_profile(RoadSurface(grid, params), lateral_offset, step);
}

std::optional<RoughnessClass> roughness_class_from_name(std::string_view name) noexcept {
    if (name.size() != 1) return std::nullopt;
    switch (name.front()) {
        case 'A': case 'a': return RoughnessClass::A;
        case 'B': case 'b': return RoughnessClass::B;
        case 'C': case 'c': return RoughnessClass::C;
        case 'D': case 'd': return RoughnessClass::D;
        case 'E': case 'e': return RoughnessClass::E;
        default: return std::nullopt;
    }
}

char roughness_class_name(RoughnessClass c) noexcept { return static_cast<char>('A' + static_cast<int>(c)); }

double roughness_phi0(RoughnessClass c) noexcept {
    // A: 1e-6 m^3, each class four times the previous one.
    return 1e-6 * std::pow(4.0, static_cast<double>(static_cast<int>(c)));
}

Profile synth_profile(double length, double step, RoughnessClass roughness, std::uint64_t seed) {
    if (!(step > 0.0)) throw ConfigError("profile step must be > 0");
    if (!(length >= 10.0 * step)) throw ConfigError("profile length must be at least 10 steps");

    const auto n = static_cast<std::size_t>(std::floor(length / step + 1e-9)) + 1;
    std::size_t nfft = 1;
    while (nfft < n) nfft <<= 1;

    const double dn = 1.0 / (static_cast<double>(nfft) * step);
    const double nyquist = 0.5 / step;
    const double sqrt_phi0 = std::sqrt(roughness_phi0(roughness));

    std::mt19937_64 rng(seed);
    std::vector<std::complex<double>> spectrum(nfft, {0.0, 0.0});
    const double half_n = 0.5 * static_cast<double>(nfft);
    for (std::size_t k = 1; k < nfft / 2; ++k) {
        const double phase = 2.0 * std::numbers::pi * unit_uniform(rng);
        const double wn = static_cast<double>(k) * dn;
        if (wn < kMinWaveNumber || wn >= std::min(kMaxWaveNumber, nyquist)) continue;
        const double ratio = kReferenceWaveNumber / wn;
        const double amp = sqrt_phi0 * std::sqrt(2.0 * ratio * ratio * dn);
        spectrum[k] = std::polar(half_n * amp, phase);
        spectrum[nfft - k] = std::conj(spectrum[k]);
    }

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> signal;
    fft.inv(signal, spectrum);

    Profile p;
    p.s0 = 0.0;
    p.step = step;
    p.z.resize(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p.z[i] = signal[i].real();
        mean += p.z[i];
    }
    mean /= static_cast<double>(n);
    for (auto& z : p.z) z -= mean;
    return p;
}

void insert_patch(Profile& base, double start, double length, RoughnessClass roughness, std::uint64_t seed,
                  double taper) {
    if (!(length > 0.0)) throw ConfigError("patch length must be > 0");
    if (!(taper >= 0.0) || 2.0 * taper > length) throw ConfigError("patch taper must fit inside the patch");
    const Profile patch = synth_profile(std::max(base.length(), 10.0 * base.step), base.step, roughness, seed);
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double s = base.position(i) - start;
        if (s < 0.0 || s >= length) continue;
        double w = 1.0;
        if (taper > 0.0) {
            const double edge = std::min(s, length - s);
            if (edge < taper) w = 0.5 - 0.5 * std::cos(std::numbers::pi * edge / taper);
        }
        base.z[i] = (1.0 - w) * base.z[i] + w * patch.z[i];
    }
}

RoadGrid grid_from_profile(const Profile& profile, double half_width, double lateral_step, double curvature) {
    if (!(half_width > 0.0) || !(lateral_step > 0.0)) throw ConfigError("lateral grid extent must be > 0");
    RoadGrid g;
    g.station_step = profile.step;
    g.n_offsets = static_cast<std::size_t>(std::llround(2.0 * half_width / lateral_step)) + 1;
    g.offset_step = lateral_step;
    g.offset_start = -0.5 * lateral_step * static_cast<double>(g.n_offsets - 1);
    std::vector<double> stations(profile.size()), headings(profile.size()), elev(profile.size(), 0.0);
    for (std::size_t i = 0; i < profile.size(); ++i) {
        stations[i] = profile.position(i);
        headings[i] = curvature * (stations[i] - profile.s0);
    }
    g.ref_line = make_reference_line(std::move(stations), std::move(headings), std::move(elev));
    g.elevations.resize(profile.size() * g.n_offsets);
    for (std::size_t i = 0; i < profile.size(); ++i)
        for (std::size_t j = 0; j < g.n_offsets; ++j) g.at(i, j) = profile.z[i];
    return g;
}

}  // namespace ridecomfort
