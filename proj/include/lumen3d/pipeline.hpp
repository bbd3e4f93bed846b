#pragma once

#include "lumen3d/imagery.hpp"
#include "lumen3d/integrate.hpp"
#include "lumen3d/lightcal.hpp"
#include "lumen3d/psolve.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace lumen3d {

enum class SolverKind
{
    lambertian,
    robust
};

/// Crop rectangle in pixel coordinates (row/col of the top-left corner).
struct RegionRect
{
    int row = 0;
    int col = 0;
    int height = 0;
    int width = 0;
};

/// Batch job description. Relative paths resolve against the job file.
struct JobConfig
{
    std::filesystem::path base_dir;
    std::vector<std::filesystem::path> images; ///< order defines light order
    std::optional<Colorspace> colorspace;       ///< unset: per-file default
    std::optional<std::filesystem::path> mask;
    std::vector<SphereAnnotation> spheres;
    std::optional<std::filesystem::path> dome_manifest;
    SolverKind solver = SolverKind::lambertian;
    TrimFractions trim;
    std::optional<std::filesystem::path> region_mask;
    std::optional<RegionRect> region_rect;
    std::optional<double> pixel_pitch;
    std::filesystem::path output_dir;
    std::string asset_id;

    std::optional<Vec3> relight_light;
    double relight_intensity = 1.0;
    double sweep_elevation = 20.0;
    int sweep_count = 8;

    nlohmann::json raw; ///< parsed job document, hashed into run.json

    bool uses_dome() const { return dome_manifest.has_value(); }
};

JobConfig parse_job(const nlohmann::json& doc, const std::filesystem::path& base_dir);
JobConfig load_job(const std::filesystem::path& path);

/// Stable 64-bit FNV-1a hash of the canonical job JSON, as hex.
std::string config_hash(const nlohmann::json& doc);

struct RunOptions
{
    bool force = false;
    std::optional<Vec3> light;
    std::optional<double> intensity;
    std::optional<double> elevation;
    std::optional<int> count;
    std::ostream* log = nullptr; ///< warnings and progress; null = silent
};

/// Loads the ordered stack; in sphere mode the sphere disks are removed from
/// the mask so they never enter the surface solve.
ImageStack load_job_stack(const JobConfig& job);

/// Lights for solve/fit-ptm: lights.json from a previous calibrate run when
/// present, else the dome manifest, else sphere calibration.
LightSet resolve_lights(const JobConfig& job, const ImageStack& stack, const RunOptions& options);

void cmd_calibrate(const JobConfig& job, const RunOptions& options);
void cmd_solve(const JobConfig& job, const RunOptions& options);
void cmd_integrate(const JobConfig& job, const RunOptions& options);
void cmd_relight(const JobConfig& job, const RunOptions& options);
void cmd_sweep(const JobConfig& job, const RunOptions& options);
void cmd_fit_ptm(const JobConfig& job, const RunOptions& options);
void cmd_export_viewer(const JobConfig& job, const RunOptions& options);

/// Checks a viewer bundle against the manifest contract (schemas/
/// viewer_manifest.schema.json) and the presence of every mode's assets.
/// Returns human-readable problems; empty means valid.
std::vector<std::string> validate_viewer_bundle(const std::filesystem::path& dir);

std::string tool_version();

} // namespace lumen3d
