#pragma once

// Configuration and the end-to-end commands behind the command line tool.
// Every command writes through one BundleWriter, which finishes the output
// directory with a manifest.json (config hash, seed, versions, file hashes).

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ridecomfort/calibration.hpp"
#include "ridecomfort/iri.hpp"
#include "ridecomfort/iso2631.hpp"
#include "ridecomfort/road.hpp"
#include "ridecomfort/sampling.hpp"
#include "ridecomfort/sections.hpp"
#include "ridecomfort/thresholds.hpp"
#include "ridecomfort/vehicle.hpp"

namespace ridecomfort {

struct PatchSpec {
    double start = 0.0;   // m from the road start
    double length = 20.0;
    RoughnessClass roughness = RoughnessClass::E;
    double taper = 1.0;
};

struct RoadSpec {
    std::optional<std::filesystem::path> file;
    double length = 1000.0;
    double step = 0.1;
    RoughnessClass roughness = RoughnessClass::A;
    double curvature = 0.0;  // 1/m
    std::vector<PatchSpec> patches;
    double half_width = 2.5;
    double lateral_step = 0.5;
};

struct AnalysisOptions {
    double l_cr = kDefaultWindowLength;
    double ds = kDefaultSpatialStep;
    bool threshold = true;
    bool iso = true;
    bool iri = true;
    Aggregator aggregator = Aggregator::mean;
    Criticality criticality = Criticality::all;
    IsoWindowOptions iso_options;
    double iri_speed_kmh = 80.0;  // measurement speed of the IRI model
    double iri_segment = 50.0;    // m
    BandTable bands = default_threshold_bands();
};

struct CalibrationSpec {
    std::optional<std::filesystem::path> reference;
    BoxConstraints box;
    std::map<CalibParam, double> p0;  // missing entries start at the box midpoint
    std::size_t max_passes = 1;
    LmOptions lm;
    std::array<double, kComparedChannels.size()> weights = {1, 1, 1, 1, 1, 1, 1};
};

struct PipelineConfig {
    nlohmann::json raw = nlohmann::json::object();
    std::filesystem::path base_dir = ".";
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    unsigned jobs = 0;

    RoadSpec road;
    SmoothingParams smoothing;

    std::optional<SpeedProfile> speed_profile;
    double half_lane_width = 1.5;
    double v_dev = 0.0;
    double l_p = 0.0;
    double mu_rs = 1.0;

    std::vector<InputDistribution> distributions = default_distributions();
    std::size_t n = 20;
    SimulationOptions simulation;

    VehicleParams vehicle;
    VehicleGeometry geometry;

    AnalysisOptions analysis;
    CalibrationSpec calibration;

    /// Scenario on the given road; throws ConfigError naming
    /// scenario.speed_profile when it is missing.
    Scenario scenario(std::shared_ptr<const RoadSurface> road) const;
    const SpeedProfile& require_speed_profile() const;
};

/// Unknown keys and wrongly typed values raise ConfigError naming the field.
/// Relative paths resolve against base_dir.
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
PipelineConfig load_config(const std::filesystem::path& path);

/// Applies a new seed to both the parsed config and its raw JSON.
void set_seed(PipelineConfig& config, std::uint64_t seed);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hash_hex(std::uint64_t h);
/// Hash of the canonical JSON dump without the output section.
std::string config_hash(const PipelineConfig& config);

class BundleWriter {
public:
    BundleWriter(std::filesystem::path dir, std::string command);

    const std::filesystem::path& dir() const noexcept { return dir_; }
    void write(const std::string& name, std::string_view content);
    void write_with(const std::string& name, const std::function<void(std::ostream&)>& fill);
    /// Writes manifest.json; call once, also after a failure (complete = false).
    void finish(const PipelineConfig& config, bool complete, const nlohmann::json& extra = nlohmann::json::object());

private:
    std::mutex mutex_;
    std::filesystem::path dir_;
    std::string command_;
    std::map<std::string, std::string> hashes_;
};

std::shared_ptr<const RoadSurface> build_road(const PipelineConfig& config);
RoadGrid build_road_grid(const PipelineConfig& config);

struct AnalyzeResult {
    WindowGrid windows;
    SamplePlan plan;
    std::vector<RunFailure> failures;
    std::size_t runs_used = 0;

    std::array<SpaceSeries, 3> aggregated;  // a_x, a_y, a_z over s
    std::vector<ExceedanceSignal> exceedances;
    std::vector<std::vector<std::uint8_t>> threshold_windows;  // parallel to exceedances
    std::optional<SectionReport> threshold;
    std::optional<IsoSectionResult> iso;
    std::optional<IriSectionResult> iri;
    std::vector<IriSample> iri_samples;

    std::vector<SectionReport> reports() const;
};

AnalyzeResult cmd_analyze(const PipelineConfig& config, BundleWriter& writer);
void cmd_generate_road(const PipelineConfig& config, BundleWriter& writer);
SamplePlan cmd_sample_plan(const PipelineConfig& config, BundleWriter& writer);
SimulationResult cmd_simulate(const PipelineConfig& config, BundleWriter& writer);
ChainResult cmd_calibrate(const PipelineConfig& config, const VehicleResponse& reference, BundleWriter& writer);
std::vector<IriResult> cmd_iri(const PipelineConfig& config, const std::optional<Profile>& profile,
                               double classify_speed_kmh, BundleWriter& writer);
nlohmann::json cmd_iso(const PipelineConfig& config, const VehicleResponse& trace, BundleWriter& writer);
SectionReport cmd_thresholds(const PipelineConfig& config, const VehicleResponse& trace, BundleWriter& writer);

/// Ref/Opt NRMSE table with a percent-change row.
std::string format_calibration_table(const ChainResult& result);

}  // namespace ridecomfort
