#include <CLI11.hpp>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "ridecomfort/errors.hpp"
#include "ridecomfort/pipeline.hpp"
#include "ridecomfort/trace_io.hpp"
#include "ridecomfort/version.hpp"

using namespace ridecomfort;
using nlohmann::json;

namespace {

const char* error_kind(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "parse error";
    if (dynamic_cast<const ConfigError*>(&e)) return "config error";
    if (dynamic_cast<const IoError*>(&e)) return "io error";
    if (dynamic_cast<const DimensionError*>(&e)) return "dimension error";
    if (dynamic_cast<const DegenerateInputError*>(&e)) return "degenerate input";
    if (dynamic_cast<const DomainError*>(&e)) return "domain error";
    if (dynamic_cast<const UnsupportedInputError*>(&e)) return "unsupported input";
    if (dynamic_cast<const InsufficientDataError*>(&e)) return "insufficient data";
    if (dynamic_cast<const NumericError*>(&e)) return "numeric error";
    if (dynamic_cast<const DesignError*>(&e)) return "design error";
    if (dynamic_cast<const OptimizationError*>(&e)) return "optimization error";
    return "error";
}

int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e)) return 2;
    if (dynamic_cast<const IoError*>(&e)) return 3;
    return 1;
}

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    unsigned jobs = 0;
    std::string methods;
};

PipelineConfig make_config(const Globals& g, const std::function<void(json&)>& patch = {}) {
    json raw = json::object();
    std::filesystem::path base = ".";
    if (!g.config.empty()) {
        std::ifstream in(g.config);
        if (!in) throw IoError(fmt::format("cannot open config '{}'", g.config));
        try {
            raw = json::parse(in, nullptr, true, true);
        } catch (const json::parse_error& e) {
            throw ConfigError(fmt::format("{}: {}", g.config, e.what()));
        }
        const auto parent = std::filesystem::path(g.config).parent_path();
        if (!parent.empty()) base = parent;
    }
    if (!raw.is_object()) throw ConfigError("config must be a JSON object");
    if (g.seed) raw["seed"] = *g.seed;
    if (!g.methods.empty()) {
        json list = json::array();
        std::size_t pos = 0;
        while (pos <= g.methods.size()) {
            const std::size_t comma = std::min(g.methods.find(',', pos), g.methods.size());
            list.push_back(g.methods.substr(pos, comma - pos));
            pos = comma + 1;
        }
        raw["analysis"]["methods"] = list;
    }
    if (patch) patch(raw);
    PipelineConfig c = parse_config(raw, base);
    if (!g.out.empty()) c.out_dir = g.out;
    c.jobs = g.jobs;
    return c;
}

// Runs one command inside a bundle; the manifest is written in every case
// once the output directory exists.
int run(const std::string& name, const Globals& g, const std::function<void(json&)>& patch,
        const std::function<json(const PipelineConfig&, BundleWriter&)>& body) {
    std::optional<PipelineConfig> config;
    std::unique_ptr<BundleWriter> writer;
    try {
        config = make_config(g, patch);
        writer = std::make_unique<BundleWriter>(config->out_dir, name);
        const json extra = body(*config, *writer);
        writer->finish(*config, true, extra);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << fmt::format("ridecomfort {}: {}: {}\n", name, error_kind(e), e.what());
        if (writer) {
            try {
                writer->finish(*config, false, json{{"error", {{"kind", error_kind(e)}, {"message", e.what()}}}});
            } catch (const std::exception& e2) {
                std::cerr << fmt::format("ridecomfort {}: cannot write manifest: {}\n", name, e2.what());
            }
        }
        return exit_code(e);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Road ride-comfort analysis toolkit"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    Globals g;
    std::uint64_t seed = 0;
    app.add_option("--config,-c", g.config, "JSON configuration file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
    app.add_option("--out,-o", g.out, "output directory (overrides output.dir)");
    app.add_option("--jobs,-j", g.jobs, "worker threads, 0 = hardware concurrency");

    auto* gen = app.add_subcommand("generate-road", "write a synthetic road grid");
    auto* analyze = app.add_subcommand("analyze", "run the batch and classify critical sections");
    analyze->add_option("--methods", g.methods, "comma list of threshold, iso2631, iri");
    auto* plan = app.add_subcommand("sample-plan", "write the Latin hypercube scenario plan");
    auto* simulate = app.add_subcommand("simulate", "simulate the configured scenario once");

    std::string reference;
    auto* calibrate = app.add_subcommand("calibrate", "fit vehicle parameters to a measured trace");
    calibrate->add_option("--reference,-r", reference, "reference trace CSV (overrides calibration.reference)");

    std::string profile;
    std::optional<double> speed, segment;
    auto* iri = app.add_subcommand("iri", "IRI of a longitudinal profile");
    iri->add_option("--profile,-p", profile, "profile CSV (s,z); default: configured road centre line");
    iri->add_option("--speed", speed, "speed in km/h used for classification");
    iri->add_option("--segment", segment, "segment length in m");

    std::string trace;
    auto* iso = app.add_subcommand("iso", "weighted RMS and comfort label of a trace");
    iso->add_option("--trace,-t", trace, "trace CSV")->required();
    auto* thr = app.add_subcommand("thresholds", "acceleration threshold sections of a trace");
    thr->add_option("--trace,-t", trace, "trace CSV")->required();

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) g.seed = seed;

    if (*gen)
        return run("generate-road", g, {}, [](const PipelineConfig& c, BundleWriter& w) {
            cmd_generate_road(c, w);
            return json::object();
        });
    if (*analyze)
        return run("analyze", g, {}, [](const PipelineConfig& c, BundleWriter& w) {
            const AnalyzeResult r = cmd_analyze(c, w);
            std::cout << format_report_table(r.reports());
            return json{{"runs", r.plan.n}, {"runs_used", r.runs_used}, {"failures", r.failures.size()}};
        });
    if (*plan)
        return run("sample-plan", g, {}, [](const PipelineConfig& c, BundleWriter& w) {
            cmd_sample_plan(c, w);
            return json::object();
        });
    if (*simulate)
        return run("simulate", g, {}, [](const PipelineConfig& c, BundleWriter& w) {
            const SimulationResult r = cmd_simulate(c, w);
            return json{{"off_road_risk", r.off_road_risk}};
        });
    if (*calibrate)
        return run("calibrate", g, {}, [&](const PipelineConfig& c, BundleWriter& w) {
            std::filesystem::path ref;
            if (!reference.empty()) ref = reference;
            else if (c.calibration.reference) ref = *c.calibration.reference;
            else throw ConfigError("missing required field 'calibration.reference' (or --reference)");
            const ChainResult r = cmd_calibrate(c, read_trace_csv(ref), w);
            std::cout << format_calibration_table(r);
            if (!r.complete) throw OptimizationError(r.error);
            return json::object();
        });
    if (*iri)
        return run(
            "iri", g,
            [&](json& raw) {
                if (segment) raw["analysis"]["iri_segment"] = *segment;
            },
            [&](const PipelineConfig& c, BundleWriter& w) {
                std::optional<Profile> p;
                if (!profile.empty()) p = read_profile_csv(std::filesystem::path(profile));
                const double v = speed.value_or(c.analysis.iri_speed_kmh);
                const auto segs = cmd_iri(c, p, v, w);
                for (const IriResult& r : segs)
                    std::cout << fmt::format("{:10.2f} {:10.2f} {:8.3f} {}\n", r.start, r.start + r.segment_length,
                                             r.iri, ride_quality_name(classify_iri(r.iri, v)));
                return json{{"segments", segs.size()}};
            });
    if (*iso)
        return run("iso", g, {}, [&](const PipelineConfig& c, BundleWriter& w) {
            const json s = cmd_iso(c, read_trace_csv(std::filesystem::path(trace)), w);
            std::cout << s.dump(2) << '\n';
            return json::object();
        });
    if (*thr)
        return run("thresholds", g, {}, [&](const PipelineConfig& c, BundleWriter& w) {
            const SectionReport r = cmd_thresholds(c, read_trace_csv(std::filesystem::path(trace)), w);
            std::cout << format_report_table(std::span(&r, 1));
            return json::object();
        });
    return 0;
}
