#include "ridecomfort/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ridecomfort/errors.hpp"

namespace ridecomfort {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t comma = line.find(',', pos);
        out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::optional<double> to_double(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

bool skippable(std::string_view line) {
    line = trim(line);
    return line.empty() || line.front() == '#';
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    return in;
}

}  // namespace

VehicleResponse read_trace_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::optional<Channel>> columns;
    int t_col = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (skippable(line)) continue;
        const auto names = split(line);
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == "t") {
                if (t_col >= 0) throw ParseError(lineno, "duplicate column 't'");
                t_col = static_cast<int>(i);
                columns.emplace_back();
                continue;
            }
            const auto c = channel_from_name(names[i]);
            if (!c) throw ParseError(lineno, fmt::format("unknown column '{}'", names[i]));
            for (const auto& prev : columns)
                if (prev == c) throw ParseError(lineno, fmt::format("duplicate column '{}'", names[i]));
            columns.push_back(c);
        }
        break;
    }
    if (columns.empty()) throw ParseError(lineno, "missing header");
    if (t_col < 0) throw ParseError(lineno, "header lacks the time column 't'");

    std::vector<double> t;
    std::vector<std::vector<double>> data(columns.size());
    while (std::getline(in, line)) {
        ++lineno;
        if (skippable(line)) continue;
        const auto cells = split(line);
        if (cells.size() != columns.size())
            throw ParseError(lineno, fmt::format("expected {} fields, found {}", columns.size(), cells.size()));
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto v = to_double(cells[i]);
            if (!v) throw ParseError(lineno, fmt::format("'{}' is not a finite number", cells[i]));
            data[i].push_back(*v);
        }
        const double ti = data[static_cast<std::size_t>(t_col)].back();
        if (!t.empty() && !(ti > t.back())) throw ParseError(lineno, "time column must increase");
        t.push_back(ti);
    }
    if (t.size() < 2) throw InsufficientDataError("trace needs at least two samples");

    const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    for (std::size_t i = 1; i < t.size(); ++i)
        if (std::abs(t[i] - t[i - 1] - dt) > 1e-6 * dt)
            throw UnsupportedInputError(fmt::format("trace time step is not uniform near t={}", t[i]));

    VehicleResponse out(t.front(), dt, t.size());
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i]) out.set(*columns[i], std::move(data[i]));
    out.validate();
    return out;
}

VehicleResponse read_trace_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_trace_csv(in);
}

void write_trace_csv(std::ostream& out, const VehicleResponse& trace) {
    std::string header = "t";
    for (Channel c : kAllChannels)
        if (trace.has(c)) header += fmt::format(",{}", channel_name(c));
    out << header << '\n';
    std::string row;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        row = fmt::format("{}", trace.time(i));
        for (Channel c : kAllChannels)
            if (trace.has(c)) row += fmt::format(",{}", trace.values(c)[i]);
        out << row << '\n';
    }
}

void write_trace_csv(const std::filesystem::path& path, const VehicleResponse& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    write_trace_csv(out, trace);
    if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

Profile read_profile_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<double> s, z;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (skippable(line)) continue;
        const auto cells = split(line);
        const bool header = first && cells.size() == 2 && !to_double(cells[0]);
        first = false;
        if (header) continue;
        if (cells.size() != 2) throw ParseError(lineno, fmt::format("expected 2 fields, found {}", cells.size()));
        const auto a = to_double(cells[0]);
        const auto b = to_double(cells[1]);
        if (!a || !b) throw ParseError(lineno, "non-numeric field");
        if (!s.empty() && !(*a > s.back())) throw ParseError(lineno, "stations must increase");
        s.push_back(*a);
        z.push_back(*b);
    }
    if (s.size() < 2) throw InsufficientDataError("profile needs at least two samples");
    const double step = (s.back() - s.front()) / static_cast<double>(s.size() - 1);
    for (std::size_t i = 1; i < s.size(); ++i)
        if (std::abs(s[i] - s[i - 1] - step) > 1e-6 * step)
            throw UnsupportedInputError(fmt::format("profile spacing is not uniform near s={}", s[i]));
    return Profile{s.front(), step, std::move(z)};
}

Profile read_profile_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_profile_csv(in);
}

void write_profile_csv(std::ostream& out, const Profile& profile) {
    out << "s,z\n";
    for (std::size_t i = 0; i < profile.size(); ++i)
        out << fmt::format("{},{}\n", profile.position(i), profile.z[i]);
}

}  // namespace ridecomfort
