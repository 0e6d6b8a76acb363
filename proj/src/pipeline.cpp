#include "ridecomfort/pipeline.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "ridecomfort/errors.hpp"
#include "ridecomfort/trace_io.hpp"
#include "ridecomfort/version.hpp"

namespace ridecomfort {

using nlohmann::json;

namespace {

// Read-only view of a JSON object that knows its dotted path for messages.
class Node {
public:
    Node(const json* j, std::string path) : j_(j), path_(std::move(path)) {
        if (j_ && !j_->is_object()) throw ConfigError(fmt::format("{} must be an object", display()));
    }

    bool present() const noexcept { return j_ != nullptr; }
    bool has(std::string_view key) const { return j_ && j_->contains(std::string(key)); }
    std::string field(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

    void allow(std::initializer_list<std::string_view> keys) const {
        if (!j_) return;
        for (const auto& [k, v] : j_->items())
            if (std::find(keys.begin(), keys.end(), k) == keys.end())
                throw ConfigError(fmt::format("unknown config field '{}'", field(k)));
    }

    const json* raw(std::string_view key) const {
        if (!j_) return nullptr;
        const auto it = j_->find(std::string(key));
        return it == j_->end() ? nullptr : &*it;
    }

    Node child(std::string_view key) const { return Node(raw(key), field(key)); }

    double number(std::string_view key, double def) const {
        const json* v = raw(key);
        if (!v) return def;
        if (!v->is_number()) throw ConfigError(fmt::format("{} must be a number", field(key)));
        const double x = v->get<double>();
        if (!std::isfinite(x)) throw ConfigError(fmt::format("{} must be finite", field(key)));
        return x;
    }

    std::uint64_t integer(std::string_view key, std::uint64_t def) const {
        const json* v = raw(key);
        if (!v) return def;
        if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0))
            throw ConfigError(fmt::format("{} must be a non-negative integer", field(key)));
        return v->get<std::uint64_t>();
    }

    bool boolean(std::string_view key, bool def) const {
        const json* v = raw(key);
        if (!v) return def;
        if (!v->is_boolean()) throw ConfigError(fmt::format("{} must be true or false", field(key)));
        return v->get<bool>();
    }

    std::optional<std::string> string(std::string_view key) const {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) throw ConfigError(fmt::format("{} must be a string", field(key)));
        return v->get<std::string>();
    }

private:
    std::string display() const { return path_.empty() ? "config" : path_; }

    const json* j_;
    std::string path_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

RoughnessClass parse_class(const Node& n, std::string_view key, RoughnessClass def) {
    const auto s = n.string(key);
    if (!s) return def;
    const auto c = roughness_class_from_name(*s);
    if (!c) throw ConfigError(fmt::format("{} must be one of A..E, got '{}'", n.field(key), *s));
    return *c;
}

SpeedProfile parse_speed_profile(const json& v, const std::string& field) {
    if (v.is_number()) return SpeedProfile::constant(v.get<double>());
    if (!v.is_array()) throw ConfigError(fmt::format("{} must be a speed (m/s) or a list of [s, v] pairs", field));
    std::vector<std::pair<double, double>> pts;
    for (const json& p : v) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            throw ConfigError(fmt::format("{} entries must be [s, v] number pairs", field));
        pts.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    try {
        return SpeedProfile(std::move(pts));
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", field, e.what()));
    }
}

QuarterCarParams parse_corner(const Node& n) {
    n.allow({"m_s", "m_u", "k_s", "c_s", "k_t", "d_t", "mu_tire"});
    QuarterCarParams q;
    q.m_s = n.number("m_s", q.m_s);
    q.m_u = n.number("m_u", q.m_u);
    q.k_s = n.number("k_s", q.k_s);
    q.c_s = n.number("c_s", q.c_s);
    q.k_t = n.number("k_t", q.k_t);
    q.d_t = n.number("d_t", q.d_t);
    q.mu_tire = n.number("mu_tire", q.mu_tire);
    return q;
}

InputDistribution parse_distribution(const Node& n, Variable v) {
    n.allow({"kind", "mean", "sigma", "lower", "upper"});
    const std::string kind = n.string("kind").value_or("gaussian");
    InputDistribution d;
    if (kind == "gaussian") {
        d = InputDistribution::gaussian(v, n.number("mean", 0.0), n.number("sigma", 0.2));
    } else if (kind == "uniform") {
        if (!n.has("lower") || !n.has("upper"))
            throw ConfigError(fmt::format("{} needs lower and upper", n.field("kind")));
        d = InputDistribution::uniform(v, n.number("lower", 0.0), n.number("upper", 1.0));
    } else {
        throw ConfigError(fmt::format("{} must be gaussian or uniform", n.field("kind")));
    }
    try {
        d.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", n.field(""), e.what()));
    }
    return d;
}

FilterSpec weighting_for(char id, const std::optional<WeightingTable>& table, const std::string& field) {
    if (table) {
        const auto it = table->find(id);
        if (it == table->end()) throw ConfigError(fmt::format("{}: weighting '{}' not in the table", field, id));
        return it->second;
    }
    try {
        return builtin_weighting(id);
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", field, e.what()));
    }
}

}  // namespace

// ---- config -------------------------------------------------------------------

PipelineConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    c.raw = j;
    c.base_dir = base_dir;
    const Node root(&j, "");
    root.allow({"seed", "road", "smoothing", "scenario", "distributions", "batch", "vehicle", "analysis",
                "calibration", "output"});
    c.seed = root.integer("seed", 0);

    const Node road = root.child("road");
    road.allow({"file", "synthetic"});
    if (const auto f = road.string("file")) {
        c.road.file = resolve(base_dir, *f);
        if (!std::filesystem::exists(*c.road.file))
            throw ConfigError(fmt::format("road.file: '{}' does not exist", c.road.file->string()));
    }
    const Node syn = road.child("synthetic");
    syn.allow({"length", "step", "class", "curvature", "patches", "half_width", "lateral_step"});
    if (c.road.file && syn.present()) throw ConfigError("road.file and road.synthetic are mutually exclusive");
    c.road.length = syn.number("length", c.road.length);
    c.road.step = syn.number("step", c.road.step);
    c.road.roughness = parse_class(syn, "class", c.road.roughness);
    c.road.curvature = syn.number("curvature", c.road.curvature);
    c.road.half_width = syn.number("half_width", c.road.half_width);
    c.road.lateral_step = syn.number("lateral_step", c.road.lateral_step);
    if (const json* patches = syn.raw("patches")) {
        if (!patches->is_array()) throw ConfigError("road.synthetic.patches must be a list");
        for (std::size_t i = 0; i < patches->size(); ++i) {
            const Node p(&(*patches)[i], fmt::format("road.synthetic.patches[{}]", i));
            p.allow({"start", "length", "class", "taper"});
            if (!p.has("start")) throw ConfigError(fmt::format("{} is required", p.field("start")));
            PatchSpec ps;
            ps.start = p.number("start", 0.0);
            ps.length = p.number("length", ps.length);
            ps.roughness = parse_class(p, "class", ps.roughness);
            ps.taper = p.number("taper", ps.taper);
            c.road.patches.push_back(ps);
        }
    }

    const Node sm = root.child("smoothing");
    sm.allow({"lambda_x", "lambda_y", "lambda_z"});
    c.smoothing = {sm.number("lambda_x", 0.0), sm.number("lambda_y", 0.0), sm.number("lambda_z", 0.0)};
    c.smoothing.validate();

    const Node sc = root.child("scenario");
    sc.allow({"speed_profile", "half_lane_width", "v_dev", "l_p", "mu_rs"});
    if (const json* sp = sc.raw("speed_profile")) c.speed_profile = parse_speed_profile(*sp, "scenario.speed_profile");
    c.half_lane_width = sc.number("half_lane_width", c.half_lane_width);
    c.v_dev = sc.number("v_dev", c.v_dev);
    c.l_p = sc.number("l_p", c.l_p);
    c.mu_rs = sc.number("mu_rs", c.mu_rs);

    if (const json* d = root.raw("distributions")) {
        const Node dn(d, "distributions");
        dn.allow({"v_dev", "l_p", "mu_rs"});
        c.distributions.clear();
        for (Variable v : {Variable::v_dev, Variable::l_p, Variable::mu_rs})
            if (dn.has(variable_name(v))) c.distributions.push_back(parse_distribution(dn.child(variable_name(v)), v));
    }

    const Node batch = root.child("batch");
    batch.allow({"n", "dt"});
    c.n = batch.integer("n", c.n);
    if (c.n == 0) throw ConfigError("batch.n must be >= 1");
    c.simulation.dt = batch.number("dt", c.simulation.dt);

    const Node veh = root.child("vehicle");
    veh.allow({"front", "rear", "geometry", "controller"});
    c.vehicle = {parse_corner(veh.child("front")), parse_corner(veh.child("rear"))};
    const Node geo = veh.child("geometry");
    geo.allow({"wheelbase", "track_width", "cg_height", "roll_inertia", "pitch_inertia"});
    c.geometry.wheelbase = geo.number("wheelbase", c.geometry.wheelbase);
    c.geometry.track_width = geo.number("track_width", c.geometry.track_width);
    c.geometry.cg_height = geo.number("cg_height", c.geometry.cg_height);
    c.geometry.roll_inertia = geo.number("roll_inertia", c.geometry.roll_inertia);
    c.geometry.pitch_inertia = geo.number("pitch_inertia", c.geometry.pitch_inertia);
    const Node ctl = veh.child("controller");
    ctl.allow({"time_constant", "accel_limit"});
    c.simulation.controller.time_constant = ctl.number("time_constant", c.simulation.controller.time_constant);
    c.simulation.controller.accel_limit = ctl.number("accel_limit", c.simulation.controller.accel_limit);
    if (!(c.simulation.controller.time_constant > 0.0 && c.simulation.controller.accel_limit > 0.0))
        throw ConfigError("vehicle.controller values must be > 0");

    const Node an = root.child("analysis");
    an.allow({"l_cr", "ds", "methods", "aggregator", "criticality", "weighting", "k", "iri_speed_kmh", "iri_segment",
              "extended_iso_bands", "weighting_table", "threshold_table", "bands"});
    AnalysisOptions& a = c.analysis;
    a.l_cr = an.number("l_cr", a.l_cr);
    if (!(a.l_cr > 0.0)) throw ConfigError("analysis.l_cr must be > 0");
    a.ds = an.number("ds", a.ds);
    if (!(a.ds > 0.0) || a.ds > a.l_cr) throw ConfigError("analysis.ds must lie in (0, l_cr]");
    if (const json* m = an.raw("methods")) {
        if (!m->is_array() || m->empty()) throw ConfigError("analysis.methods must be a non-empty list");
        a.threshold = a.iso = a.iri = false;
        for (const json& e : *m) {
            const std::string s = e.is_string() ? e.get<std::string>() : std::string();
            if (s == "threshold") a.threshold = true;
            else if (s == "iso2631") a.iso = true;
            else if (s == "iri") a.iri = true;
            else throw ConfigError(fmt::format("analysis.methods: unknown method '{}'", e.dump()));
        }
    }
    if (const auto ag = an.string("aggregator")) {
        const auto v = aggregator_from_name(*ag);
        if (!v) throw ConfigError(fmt::format("analysis.aggregator: unknown aggregator '{}'", *ag));
        a.aggregator = *v;
    }
    if (const auto cr = an.string("criticality")) {
        if (*cr == "all") a.criticality = Criticality::all;
        else if (*cr == "any") a.criticality = Criticality::any;
        else throw ConfigError(fmt::format("analysis.criticality must be all or any, got '{}'", *cr));
    }
    std::optional<WeightingTable> wtable;
    for (const char* key : {"weighting_table", "threshold_table"})
        if (const auto t = an.string(key); t && !std::filesystem::exists(resolve(base_dir, *t)))
            throw ConfigError(fmt::format("analysis.{}: '{}' does not exist", key, resolve(base_dir, *t).string()));
    if (const auto wt = an.string("weighting_table")) wtable = load_weighting_table(resolve(base_dir, *wt));
    const Node wn = an.child("weighting");
    wn.allow({"x", "y", "z"});
    for (auto [axis, spec, def] : {std::tuple{"x", &a.iso_options.x, 'd'}, std::tuple{"y", &a.iso_options.y, 'd'},
                                   std::tuple{"z", &a.iso_options.z, 'k'}}) {
        const auto id = wn.string(axis);
        if (id && id->size() != 1) throw ConfigError(fmt::format("{} must be a single letter", wn.field(axis)));
        *spec = weighting_for(id ? (*id)[0] : def, wtable, wn.field(axis));
    }
    if (const json* k = an.raw("k")) {
        if (!k->is_array() || k->size() != 3 || !std::all_of(k->begin(), k->end(), [](const json& e) { return e.is_number(); }))
            throw ConfigError("analysis.k must be a list of three numbers");
        a.iso_options.k_x = (*k)[0].get<double>();
        a.iso_options.k_y = (*k)[1].get<double>();
        a.iso_options.k_z = (*k)[2].get<double>();
    }
    a.iso_options.extended_bands = an.boolean("extended_iso_bands", false);
    a.iri_speed_kmh = an.number("iri_speed_kmh", a.iri_speed_kmh);
    if (!(a.iri_speed_kmh > 0.0)) throw ConfigError("analysis.iri_speed_kmh must be > 0");
    a.iri_segment = an.number("iri_segment", a.iri_segment);
    if (!(a.iri_segment > 0.0)) throw ConfigError("analysis.iri_segment must be > 0");
    if (const auto tt = an.string("threshold_table")) a.bands = load_threshold_bands(resolve(base_dir, *tt));
    if (const json* bands = an.raw("bands")) {
        if (!bands->is_array()) throw ConfigError("analysis.bands must be a list");
        for (std::size_t i = 0; i < bands->size(); ++i) {
            const Node b(&(*bands)[i], fmt::format("analysis.bands[{}]", i));
            b.allow({"axis", "style", "lower", "upper"});
            const auto ax = axis_from_name(b.string("axis").value_or(""));
            const auto st = style_from_name(b.string("style").value_or(""));
            if (!ax || !st) throw ConfigError(fmt::format("analysis.bands[{}] needs axis x|y|z and style PT|ND|AG", i));
            for (ThresholdBand& tb : a.bands) {
                if (tb.axis != *ax || tb.style != *st) continue;
                tb.lower = b.number("lower", tb.lower);
                tb.upper = b.number("upper", tb.upper);
                tb.validate();
            }
        }
    }

    const Node cal = root.child("calibration");
    cal.allow({"reference", "bounds", "p0", "max_passes", "tol", "max_iter", "weights"});
    CalibrationSpec& cs = c.calibration;
    if (const auto r = cal.string("reference")) {
        cs.reference = resolve(base_dir, *r);
        if (!std::filesystem::exists(*cs.reference))
            throw ConfigError(fmt::format("calibration.reference: '{}' does not exist", cs.reference->string()));
    }
    const Node bounds = cal.child("bounds");
    bounds.allow({"K_sf", "K_sr", "mu_Tr", "K_Tr", "d_Tr"});
    for (CalibParam p : kCalibParams) {
        const json* b = bounds.raw(calib_param_name(p));
        if (!b) continue;
        if (!b->is_array() || b->size() != 2 || !(*b)[0].is_number() || !(*b)[1].is_number())
            throw ConfigError(fmt::format("{} must be [lower, upper]", bounds.field(calib_param_name(p))));
        cs.box.lower[static_cast<std::size_t>(p)] = (*b)[0].get<double>();
        cs.box.upper[static_cast<std::size_t>(p)] = (*b)[1].get<double>();
    }
    cs.box.validate();
    const Node p0 = cal.child("p0");
    p0.allow({"K_sf", "K_sr", "mu_Tr", "K_Tr", "d_Tr"});
    for (CalibParam p : kCalibParams)
        if (p0.has(calib_param_name(p))) cs.p0[p] = p0.number(calib_param_name(p), 0.0);
    cs.max_passes = cal.integer("max_passes", cs.max_passes);
    if (cs.max_passes == 0) throw ConfigError("calibration.max_passes must be >= 1");
    cs.lm.tol = cal.number("tol", cs.lm.tol);
    cs.lm.max_iter = cal.integer("max_iter", cs.lm.max_iter);
    const Node w = cal.child("weights");
    for (const auto& [k, v] : w.present() ? c.raw["calibration"]["weights"].items() : json::object().items()) {
        const auto ch = channel_from_name(k);
        const auto it = std::find(kComparedChannels.begin(), kComparedChannels.end(), ch.value_or(Channel::s));
        if (!ch || it == kComparedChannels.end())
            throw ConfigError(fmt::format("unknown config field 'calibration.weights.{}'", k));
        const double x = w.number(k, 1.0);
        if (!(x >= 0.0)) throw ConfigError(fmt::format("calibration.weights.{} must be >= 0", k));
        cs.weights[static_cast<std::size_t>(it - kComparedChannels.begin())] = x;
        (void)v;
    }

    const Node out = root.child("output");
    out.allow({"dir"});
    if (const auto d = out.string("dir")) c.out_dir = resolve(base_dir, *d);

    c.vehicle.validate();
    c.geometry.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open config '{}'", path.string()));
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return parse_config(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

void set_seed(PipelineConfig& config, std::uint64_t seed) {
    config.seed = seed;
    config.raw["seed"] = seed;
}

const SpeedProfile& PipelineConfig::require_speed_profile() const {
    if (!speed_profile) throw ConfigError("missing required field 'scenario.speed_profile'");
    return *speed_profile;
}

Scenario PipelineConfig::scenario(std::shared_ptr<const RoadSurface> road) const {
    Scenario s;
    s.road = std::move(road);
    s.target_speed = require_speed_profile();
    s.v_dev = v_dev;
    s.l_p = l_p;
    s.mu_rs = mu_rs;
    s.half_lane_width = half_lane_width;
    return s;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

std::string config_hash(const PipelineConfig& config) {
    json j = config.raw;
    j.erase("output");
    return hash_hex(fnv1a64(j.dump()));
}

// ---- bundle -------------------------------------------------------------------

BundleWriter::BundleWriter(std::filesystem::path dir, std::string command)
    : dir_(std::move(dir)), command_(std::move(command)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError(fmt::format("cannot create output directory '{}': {}", dir_.string(), ec.message()));
}

void BundleWriter::write(const std::string& name, std::string_view content) {
    std::lock_guard lock(mutex_);
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
    hashes_[name] = hash_hex(fnv1a64(content));
}

void BundleWriter::write_with(const std::string& name, const std::function<void(std::ostream&)>& fill) {
    std::ostringstream ss;
    fill(ss);
    write(name, ss.str());
}

void BundleWriter::finish(const PipelineConfig& config, bool complete, const json& extra) {
    json m;
    m["tool"] = "ridecomfort";
    m["version"] = kVersion;
    m["command"] = command_;
    m["config_hash"] = config_hash(config);
    m["config"] = [&] {
        json j = config.raw;
        j.erase("output");
        return j;
    }();
    m["seed"] = config.seed;
    m["complete"] = complete;
    m["libraries"] = {{"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
                      {"fmt", FMT_VERSION},
                      {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR,
                                                    NLOHMANN_JSON_VERSION_MINOR, NLOHMANN_JSON_VERSION_PATCH)}};
    json files = json::object();
    {
        std::lock_guard lock(mutex_);
        for (const auto& [k, v] : hashes_) files[k] = v;
    }
    m["files"] = files;
    for (const auto& [k, v] : extra.items()) m[k] = v;
    const std::string text = m.dump(2) + "\n";
    const auto path = dir_ / "manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    out << text;
    if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

// ---- road ---------------------------------------------------------------------

RoadGrid build_road_grid(const PipelineConfig& config) {
    if (config.road.file) {
        GridLoadResult r = load_grid(*config.road.file);
        return std::move(r.grid);
    }
    const RoadSpec& rs = config.road;
    Profile profile = synth_profile(rs.length, rs.step, rs.roughness, config.seed);
    for (std::size_t i = 0; i < rs.patches.size(); ++i) {
        const PatchSpec& p = rs.patches[i];
        insert_patch(profile, profile.s0 + p.start, p.length, p.roughness,
                     config.seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)), p.taper);
    }
    return grid_from_profile(profile, rs.half_width, rs.lateral_step, rs.curvature);
}

std::shared_ptr<const RoadSurface> build_road(const PipelineConfig& config) {
    return std::make_shared<const RoadSurface>(build_road_grid(config), config.smoothing);
}

// ---- analyze ------------------------------------------------------------------

std::vector<SectionReport> AnalyzeResult::reports() const {
    std::vector<SectionReport> out;
    if (threshold) out.push_back(*threshold);
    if (iso) out.push_back(iso->report);
    if (iri) out.push_back(iri->report);
    return out;
}

AnalyzeResult cmd_analyze(const PipelineConfig& config, BundleWriter& writer) {
    const AnalysisOptions& opt = config.analysis;
    const SpeedProfile& speed = config.require_speed_profile();
    const auto road = build_road(config);
    const double track = road->s_end() - road->s_begin();

    AnalyzeResult res;
    res.windows = make_windows(road->s_begin(), track, opt.l_cr);

    if (opt.threshold || opt.iso) {
        const Scenario base = config.scenario(road);
        res.plan = lhs(config.distributions, config.n, config.seed);
        writer.write_with("plan.csv", [&](std::ostream& o) { write_plan_csv(o, res.plan); });

        struct RowData {
            std::array<SpaceSeries, 3> space;
            std::vector<double> av;
        };
        std::vector<std::optional<RowData>> rows(res.plan.n);
        const std::array<Channel, 3> axes = {Channel::ax, Channel::ay, Channel::az};
        BatchOptions bo{config.simulation, config.jobs};
        res.failures = for_each_run(res.plan, base, config.vehicle, config.geometry, bo,
                                    [&](std::size_t row, SimulationResult&& r) {
                                        RowData d;
                                        if (opt.threshold)
                                            for (std::size_t a = 0; a < 3; ++a)
                                                d.space[a] = to_space(r.response, axes[a], opt.ds);
                                        if (opt.iso) d.av = window_vibration(r.response, res.windows, opt.iso_options);
                                        rows[row] = std::move(d);
                                    });
        writer.write_with("failures.csv", [&](std::ostream& o) { write_failures_csv(o, res.failures); });

        std::array<std::vector<SpaceSeries>, 3> space;
        std::vector<std::vector<double>> av;
        for (auto& r : rows) {
            if (!r) continue;
            ++res.runs_used;
            for (std::size_t a = 0; a < 3; ++a)
                if (opt.threshold) space[a].push_back(std::move(r->space[a]));
            if (opt.iso) av.push_back(std::move(r->av));
        }
        if (res.runs_used == 0)
            throw InsufficientDataError(fmt::format("all {} runs failed; see failures.csv", res.plan.n));

        if (opt.threshold) {
            for (std::size_t a = 0; a < 3; ++a) res.aggregated[a] = aggregate(space[a], opt.aggregator);
            for (Axis ax : {Axis::x, Axis::y, Axis::z})
                for (DrivingStyle st : {DrivingStyle::PT, DrivingStyle::ND, DrivingStyle::AG}) {
                    const ThresholdBand& band = find_band(opt.bands, ax, st);
                    res.exceedances.push_back(exceedance(res.aggregated[static_cast<std::size_t>(ax)], band));
                    res.threshold_windows.push_back(critical_windows(res.exceedances.back(), res.windows, opt.criticality));
                }
            res.threshold = find_critical(res.exceedances, res.windows, opt.criticality);
        }
        if (opt.iso) res.iso = classify_window_vibration(av, res.windows, opt.iso_options.extended_bands);
    }

    if (opt.iri) {
        const double v = opt.iri_speed_kmh / 3.6;
        const double half = 0.5 * config.geometry.track_width;
        const Profile left = wheel_track_profile(*road, half, opt.ds);
        const Profile right = wheel_track_profile(*road, -half, opt.ds);
        const auto seg_l = compute_iri(left, v, opt.iri_segment);
        const auto seg_r = compute_iri(right, v, opt.iri_segment);
        for (std::size_t k = 0; k < seg_l.size(); ++k)
            res.iri_samples.push_back(
                {seg_l[k].start + 0.5 * seg_l[k].segment_length, 0.5 * (seg_l[k].iri + seg_r[k].iri)});
        if (res.iri_samples.size() < 2)
            throw InsufficientDataError(fmt::format("track of {} m holds fewer than two {} m IRI segments", track,
                                                    opt.iri_segment));
        res.iri = classify_windows_iri(interpolate_iri(res.iri_samples, opt.ds), speed, res.windows);

        writer.write_with("iri_segments.csv", [&](std::ostream& o) {
            o << "start,end,iri_left,iri_right,iri\n";
            for (std::size_t k = 0; k < seg_l.size(); ++k)
                o << fmt::format("{},{},{},{},{}\n", seg_l[k].start, seg_l[k].start + seg_l[k].segment_length,
                                 seg_l[k].iri, seg_r[k].iri, res.iri_samples[k].iri);
        });
    }

    // Section reports and per-window detail.
    const std::vector<SectionReport> reports = res.reports();
    for (const SectionReport& r : reports)
        writer.write_with(fmt::format("sections_{}.csv", method_name(r.method)),
                          [&](std::ostream& o) { write_report_csv(o, std::span(&r, 1)); });
    writer.write_with("comparison.csv", [&](std::ostream& o) { write_report_csv(o, reports); });
    writer.write("comparison.txt", format_report_table(reports));

    if (res.threshold) {
        writer.write_with("windows_threshold.csv", [&](std::ostream& o) {
            o << "start,end";
            for (const auto& e : res.exceedances) o << ',' << e.label();
            o << '\n';
            for (std::size_t w = 0; w < res.windows.count; ++w) {
                o << fmt::format("{},{}", res.windows.start(w), res.windows.end(w));
                for (const auto& f : res.threshold_windows) o << ',' << int(f[w]);
                o << '\n';
            }
        });
        writer.write_with("plot_threshold.csv", [&](std::ostream& o) {
            o << "s,ax,ay,az\n";
            const auto& ax = res.aggregated[0];
            const std::size_t n = std::min({ax.size(), res.aggregated[1].size(), res.aggregated[2].size()});
            for (std::size_t i = 0; i < n; ++i)
                o << fmt::format("{},{},{},{}\n", ax.position(i), ax.values[i], res.aggregated[1].values[i],
                                 res.aggregated[2].values[i]);
        });
        writer.write_with("plot_threshold_bands.csv", [&](std::ostream& o) {
            o << "axis,style,lower,upper\n";
            for (const ThresholdBand& b : opt.bands)
                o << fmt::format("{},{},{},{}\n", axis_name(b.axis), style_name(b.style), b.lower, b.upper);
        });
    }
    if (res.iso) {
        writer.write_with("windows_iso2631.csv", [&](std::ostream& o) {
            o << "start,end,a_v,label,perception\n";
            for (std::size_t w = 0; w < res.windows.count; ++w) {
                const IsoWindow& iw = res.iso->windows[w];
                o << fmt::format("{},{},{},{},{}\n", res.windows.start(w), res.windows.end(w), iw.a_v,
                                 comfort_label_name(iw.label.label), perception_name(iw.label.perception));
            }
        });
        writer.write_with("plot_iso2631.csv", [&](std::ostream& o) {
            o << "s,a_v";
            for (const ComfortBand& b : comfort_bands(opt.iso_options.extended_bands))
                if (b.label != ComfortLabel::NU) o << ',' << comfort_label_name(b.label);
            o << '\n';
            for (std::size_t w = 0; w < res.windows.count; ++w) {
                o << fmt::format("{},{}", 0.5 * (res.windows.start(w) + res.windows.end(w)), res.iso->windows[w].a_v);
                for (const ComfortBand& b : comfort_bands(opt.iso_options.extended_bands))
                    if (b.label != ComfortLabel::NU) o << fmt::format(",{}", b.lower);
                o << '\n';
            }
        });
    }
    if (res.iri) {
        writer.write_with("windows_iri.csv", [&](std::ostream& o) {
            o << "start,end,iri,speed_kmh,quality\n";
            for (std::size_t w = 0; w < res.windows.count; ++w) {
                const IriWindow& iw = res.iri->windows[w];
                o << fmt::format("{},{},{},{},{}\n", res.windows.start(w), res.windows.end(w), iw.iri, iw.speed_kmh,
                                 ride_quality_name(iw.quality));
            }
        });
        writer.write_with("plot_iri.csv", [&](std::ostream& o) {
            o << "s,iri,speed_kmh,VG,G,F,M\n";
            for (std::size_t w = 0; w < res.windows.count; ++w) {
                const IriWindow& iw = res.iri->windows[w];
                const IriBands& b = iri_bands_for(std::clamp(iw.speed_kmh, 1e-9, 130.0));
                o << fmt::format("{},{},{},{},{},{},{}\n", 0.5 * (res.windows.start(w) + res.windows.end(w)), iw.iri,
                                 iw.speed_kmh, b.upper[0], b.upper[1], b.upper[2], b.upper[3]);
            }
        });
    }
    return res;
}

// ---- small commands -----------------------------------------------------------

void cmd_generate_road(const PipelineConfig& config, BundleWriter& writer) {
    if (config.road.file) throw ConfigError("generate-road needs road.synthetic, not road.file");
    const RoadGrid grid = build_road_grid(config);
    writer.write_with("road.grid", [&](std::ostream& o) { save_grid(o, grid); });
}

SamplePlan cmd_sample_plan(const PipelineConfig& config, BundleWriter& writer) {
    SamplePlan plan = lhs(config.distributions, config.n, config.seed);
    writer.write_with("plan.csv", [&](std::ostream& o) { write_plan_csv(o, plan); });
    return plan;
}

SimulationResult cmd_simulate(const PipelineConfig& config, BundleWriter& writer) {
    const Scenario sc = config.scenario(build_road(config));
    SimulationResult r = simulate(sc, config.vehicle, config.geometry, config.simulation);
    writer.write_with("trace.csv", [&](std::ostream& o) { write_trace_csv(o, r.response); });
    writer.write("simulation.json", json{{"samples", r.response.size()},
                                         {"dt", r.response.dt()},
                                         {"off_road_risk", r.off_road_risk},
                                         {"longest_saturation_s", r.longest_saturation}}
                                            .dump(2) +
                                        "\n");
    return r;
}

std::string format_calibration_table(const ChainResult& result) {
    std::string out = fmt::format("{:<8}", "");
    for (const ChannelScore& c : result.before.channels) out += fmt::format(" {:>11}", channel_name(c.channel));
    out += fmt::format(" {:>11}\n{:<8}", "objective", "Ref");
    for (const ChannelScore& c : result.before.channels) out += fmt::format(" {:>11.6f}", c.nrmse);
    out += fmt::format(" {:>11.4e}\n{:<8}", result.before.objective, "Opt");
    for (const ChannelScore& c : result.before.channels) out += fmt::format(" {:>11.6f}", result.after.nrmse(c.channel));
    out += fmt::format(" {:>11.4e}\n{:<8}", result.after.objective, "+/- %");
    for (const ChannelScore& c : result.before.channels) {
        const double after = result.after.nrmse(c.channel);
        out += c.nrmse > 0.0 ? fmt::format(" {:>11.4f}", 100.0 * (c.nrmse - after) / c.nrmse) : fmt::format(" {:>11}", "-");
    }
    out += '\n';
    if (!result.before.skipped.empty()) {
        out += "skipped:";
        for (Channel c : result.before.skipped) out += fmt::format(" {}", channel_name(c));
        out += '\n';
    }
    return out;
}

ChainResult cmd_calibrate(const PipelineConfig& config, const VehicleResponse& reference, BundleWriter& writer) {
    CalibrationProblem problem;
    problem.scenario = config.scenario(build_road(config));
    problem.geometry = config.geometry;
    problem.options = config.simulation;
    problem.reference = reference;
    problem.base = config.vehicle;
    problem.weights = config.calibration.weights;

    std::optional<VehicleParams> p0;
    if (!config.calibration.p0.empty()) {
        VehicleParams v = config.vehicle;
        for (CalibParam p : kCalibParams) set_param(v, p, config.calibration.box.mid(p));
        for (const auto& [p, x] : config.calibration.p0) set_param(v, p, x);
        p0 = v;
    }
    LmOptions lm = config.calibration.lm;
    lm.jobs = config.jobs;
    const ChainResult result = run_chain(problem, OptimizationChain::single_parameter(config.calibration.max_passes),
                                         config.calibration.box, p0, lm);
    writer.write("calibration.json", calibration_report_json(result).dump(2) + "\n");
    writer.write("calibration_table.txt", format_calibration_table(result));
    return result;
}

std::vector<IriResult> cmd_iri(const PipelineConfig& config, const std::optional<Profile>& profile,
                               double classify_speed_kmh, BundleWriter& writer) {
    const double v = config.analysis.iri_speed_kmh / 3.6;
    std::vector<IriResult> segs;
    if (profile) {
        segs = compute_iri(*profile, v, config.analysis.iri_segment);
    } else {
        const auto road = build_road(config);
        segs = compute_iri(wheel_track_profile(*road, 0.0, config.analysis.ds), v, config.analysis.iri_segment);
    }
    writer.write_with("iri.csv", [&](std::ostream& o) {
        o << "start,end,iri,speed_kmh,quality\n";
        for (const IriResult& r : segs)
            o << fmt::format("{},{},{},{},{}\n", r.start, r.start + r.segment_length, r.iri, classify_speed_kmh,
                             ride_quality_name(classify_iri(r.iri, classify_speed_kmh)));
    });
    return segs;
}

json cmd_iso(const PipelineConfig& config, const VehicleResponse& trace, BundleWriter& writer) {
    const IsoWindowOptions& o = config.analysis.iso_options;
    const std::array<std::tuple<Channel, const FilterSpec*, const char*>, 3> axes = {
        std::tuple{Channel::ax, &o.x, "x"}, std::tuple{Channel::ay, &o.y, "y"}, std::tuple{Channel::az, &o.z, "z"}};
    std::array<double, 3> rmsv{};
    std::array<std::optional<WeightedResult>, 3> weighted;
    json axes_json = json::object();
    for (std::size_t a = 0; a < 3; ++a) {
        const auto [ch, spec, name] = axes[a];
        if (!trace.has(ch)) {
            axes_json[name] = {{"weighting", std::string(1, spec->weighting_id)}, {"present", false}};
            continue;
        }
        weighted[a] = weight_signal(trace.series(ch), *spec);
        rmsv[a] = weighted[a]->a_w_rms;
        axes_json[name] = {{"weighting", std::string(1, spec->weighting_id)}, {"present", true}, {"rms", rmsv[a]}};
    }
    const CombinedVibration cv = combine(rmsv[0], rmsv[1], rmsv[2], o.k_x, o.k_y, o.k_z);
    const IsoClassification cls = classify_iso(cv.a_v, o.extended_bands);
    json summary = {{"axes", axes_json},
                    {"k", {cv.k_x, cv.k_y, cv.k_z}},
                    {"a_v", cv.a_v},
                    {"label", comfort_label_name(cls.label)},
                    {"perception", perception_name(cls.perception)},
                    {"duration_s", trace.size() * trace.dt()}};
    writer.write("iso.json", summary.dump(2) + "\n");
    writer.write_with("iso_weighted.csv", [&](std::ostream& os) {
        os << "t,aw_x,aw_y,aw_z\n";
        for (std::size_t i = 0; i < trace.size(); ++i) {
            os << fmt::format("{}", trace.time(i));
            for (const auto& w : weighted) os << fmt::format(",{}", w ? w->a_w.values[i] : 0.0);
            os << '\n';
        }
    });
    return summary;
}

SectionReport cmd_thresholds(const PipelineConfig& config, const VehicleResponse& trace, BundleWriter& writer) {
    const AnalysisOptions& opt = config.analysis;
    std::vector<ExceedanceSignal> flags;
    std::optional<WindowGrid> windows;
    for (auto [ch, ax] : {std::pair{Channel::ax, Axis::x}, std::pair{Channel::ay, Axis::y}, std::pair{Channel::az, Axis::z}}) {
        if (!trace.has(ch)) continue;
        const SpaceSeries s = to_space(trace, ch, opt.ds);
        if (!windows) windows = make_windows(s.s0, s.length(), opt.l_cr);
        for (DrivingStyle st : {DrivingStyle::PT, DrivingStyle::ND, DrivingStyle::AG})
            flags.push_back(exceedance(s, find_band(opt.bands, ax, st)));
    }
    if (!windows) throw InsufficientDataError("trace has no acceleration channel");
    const SectionReport report = find_critical(flags, *windows, opt.criticality);
    writer.write_with("thresholds.csv", [&](std::ostream& o) { write_report_csv(o, std::span(&report, 1)); });
    writer.write("thresholds.txt", format_report_table(std::span(&report, 1)));
    return report;
}

}  // namespace ridecomfort
