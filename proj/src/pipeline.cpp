#include "lumen3d/pipeline.hpp"

#include "lumen3d/errors.hpp"
#include "lumen3d/relight.hpp"
#include "lumen3d/rti.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#ifndef LUMEN3D_VERSION
#define LUMEN3D_VERSION "0.0.0"
#endif

namespace lumen3d {

namespace fs = std::filesystem;
using nlohmann::json;

std::string tool_version() { return LUMEN3D_VERSION; }

namespace {

const std::set<std::string> kJobKeys = {"images", "colorspace", "mask", "spheres", "dome_manifest",
                                        "solver", "trim", "region", "pixel_pitch", "output_dir",
                                        "asset_id", "relight", "sweep"};

fs::path resolve(const fs::path& base, const json& value, const std::string& key)
{
    if (!value.is_string())
        throw ConfigError("\"" + key + "\" must be a path string");
    const fs::path p = value.get<std::string>();
    return p.is_absolute() ? p : base / p;
}

double number(const json& value, const std::string& key)
{
    if (!value.is_number())
        throw ConfigError("\"" + key + "\" must be a number");
    return value.get<double>();
}

Vec3 vec3(const json& value, const std::string& key)
{
    if (!value.is_array() || value.size() != 3)
        throw ConfigError("\"" + key + "\" must be an array of three numbers");
    return {number(value[0], key), number(value[1], key), number(value[2], key)};
}

json readJson(const fs::path& path, const std::string& what)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + what + " '" + path.string() + "'");
    try
    {
        return json::parse(in);
    }
    catch (const json::exception& e)
    {
        throw ConfigError(what + " '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void writeJson(const fs::path& path, const json& doc)
{
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
}

void warn(const RunOptions& options, const std::string& message)
{
    if (options.log)
        *options.log << "warning: " << message << '\n';
}

/// Holds output_dir/.lumen3d.lock for the lifetime of a subcommand.
class OutputLock
{
  public:
    explicit OutputLock(const fs::path& dir) : path_(dir / ".lumen3d.lock")
    {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec || !fs::is_directory(dir))
            throw DataError("cannot create output directory '" + dir.string() + "'");
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f)
            throw ConfigError("output directory '" + dir.string() + "' is locked by another run (remove " +
                              path_.string() + " if stale)");
        std::fclose(f);
    }
    ~OutputLock()
    {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

  private:
    fs::path path_;
};

void refuseOverwrite(const JobConfig& job, const RunOptions& options, std::initializer_list<const char*> outputs)
{
    if (options.force)
        return;
    for (const char* name : outputs)
        if (fs::exists(job.output_dir / name))
            throw ConfigError("'" + (job.output_dir / name).string() + "' already exists; pass --force to overwrite");
}

/// Records one stage in run.json, keeping earlier stages.
void recordStage(const JobConfig& job, const std::string& stage, double seconds, json extra = json::object())
{
    const fs::path path = job.output_dir / "run.json";
    json run = json::object();
    if (fs::exists(path))
    {
        std::ifstream in(path);
        run = json::parse(in, nullptr, false);
        if (run.is_discarded() || !run.is_object())
            run = json::object();
    }
    run["tool"] = "lumen3d";
    run["tool_version"] = tool_version();
    run["config_hash"] = config_hash(job.raw);
    extra["wall_time_s"] = seconds;
    run["stages"][stage] = extra;
    writeJson(path, run);
}

class Stopwatch
{
  public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::size_t domeLedCount(const JobConfig& job, LightSet& lights)
{
    lights = load_dome_manifest(*job.dome_manifest);
    if (lights.size() != job.images.size())
        throw ConfigError("job lists " + std::to_string(job.images.size()) + " images but the dome manifest has " +
                          std::to_string(lights.size()) + " LEDs");
    return lights.size();
}

void requireLightSource(const JobConfig& job)
{
    if (!job.uses_dome() && job.spheres.empty())
        throw ConfigError("job needs either \"spheres\" or \"dome_manifest\" to obtain lights");
}

struct SolvedMaps
{
    NormalField normals;
    AlbedoMap albedo;
};

SolvedMaps loadSolvedMaps(const JobConfig& job)
{
    const fs::path normalsPath = job.output_dir / "normals.pfm";
    const fs::path albedoPath = job.output_dir / "albedo.pfm";
    if (!fs::exists(normalsPath) || !fs::exists(albedoPath))
        throw ConfigError("no solved maps in '" + job.output_dir.string() + "'; run `lumen3d solve` first");
    SolvedMaps maps;
    maps.normals = load_normals_pfm(normalsPath);
    maps.albedo.rho = read_pfm(albedoPath);
    if (maps.albedo.rho.width != maps.normals.width || maps.albedo.rho.height != maps.normals.height)
        throw DataError("albedo.pfm and normals.pfm dimensions differ");
    maps.albedo.valid = maps.normals.valid;
    return maps;
}

RasterImage albedoPreview(const AlbedoMap& albedo, double& exposure)
{
    const RasterImage* image = &albedo.rho;
    exposure = exposure_for(std::span<const RasterImage>(image, 1));
    return apply_exposure(albedo.rho, exposure);
}

Mask regionMask(const JobConfig& job, const NormalField& normals)
{
    if (job.region_mask)
    {
        Mask region = load_mask(*job.region_mask);
        if (region.width != normals.width || region.height != normals.height)
            throw DataError("region mask dimensions differ from the normal field");
        return region;
    }
    if (job.region_rect)
    {
        const RegionRect& r = *job.region_rect;
        if (r.row < 0 || r.col < 0 || r.height <= 0 || r.width <= 0 || r.row + r.height > normals.height ||
            r.col + r.width > normals.width)
            throw ConfigError("integration region rectangle lies outside the image");
        Mask region(normals.width, normals.height, false);
        for (int row = r.row; row < r.row + r.height; ++row)
            for (int col = r.col; col < r.col + r.width; ++col)
                region.set(static_cast<std::size_t>(row) * normals.width + col, true);
        return region;
    }
    return normals.valid;
}

json lightJson(const Vec3& d) { return json::array({d.x(), d.y(), d.z()}); }

} // namespace

std::string config_hash(const json& doc)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : doc.dump())
    {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char text[17];
    std::snprintf(text, sizeof text, "%016llx", static_cast<unsigned long long>(h));
    return text;
}

JobConfig parse_job(const json& doc, const fs::path& base_dir)
{
    if (!doc.is_object())
        throw ConfigError("job file must contain a JSON object");
    for (const auto& item : doc.items())
        if (!kJobKeys.count(item.key()))
            throw ConfigError("unknown job key \"" + item.key() + "\"");

    JobConfig job;
    job.base_dir = base_dir;
    job.raw = doc;

    if (!doc.contains("images") || !doc["images"].is_array() || doc["images"].empty())
        throw ConfigError("\"images\" must be a non-empty array of paths");
    for (const json& entry : doc["images"])
        job.images.push_back(resolve(base_dir, entry, "images"));

    if (doc.contains("colorspace"))
    {
        if (!doc["colorspace"].is_string())
            throw ConfigError("\"colorspace\" must be a string");
        job.colorspace = parse_colorspace(doc["colorspace"].get<std::string>());
    }
    if (doc.contains("mask"))
        job.mask = resolve(base_dir, doc["mask"], "mask");
    if (doc.contains("spheres"))
        job.spheres = spheres_from_json(doc["spheres"]);
    if (doc.contains("dome_manifest"))
        job.dome_manifest = resolve(base_dir, doc["dome_manifest"], "dome_manifest");
    if (doc.contains("spheres") && job.dome_manifest)
        throw ConfigError("job must give either \"spheres\" or \"dome_manifest\", not both");

    if (doc.contains("solver"))
    {
        const std::string solver = doc["solver"].is_string() ? doc["solver"].get<std::string>() : "";
        if (solver == "lambertian")
            job.solver = SolverKind::lambertian;
        else if (solver == "robust")
            job.solver = SolverKind::robust;
        else
            throw ConfigError("\"solver\" must be \"lambertian\" or \"robust\"");
    }
    if (doc.contains("trim"))
    {
        const json& t = doc["trim"];
        if (!t.is_array() || t.size() != 2)
            throw ConfigError("\"trim\" must be [low, high]");
        job.trim = {number(t[0], "trim"), number(t[1], "trim")};
        if (job.trim.low < 0.0 || job.trim.high < 0.0 || job.trim.low + job.trim.high >= 1.0)
            throw ConfigError("\"trim\" fractions must be non-negative and sum below 1");
    }

    if (doc.contains("region"))
    {
        const json& r = doc["region"];
        if (r.is_string())
            job.region_mask = resolve(base_dir, r, "region");
        else if (r.is_object() && r.contains("row") && r.contains("col") && r.contains("height") &&
                 r.contains("width"))
            job.region_rect = RegionRect{r["row"].get<int>(), r["col"].get<int>(), r["height"].get<int>(),
                                         r["width"].get<int>()};
        else
            throw ConfigError("\"region\" must be a mask path or {\"row\", \"col\", \"height\", \"width\"}");
    }
    if (doc.contains("pixel_pitch"))
    {
        job.pixel_pitch = number(doc["pixel_pitch"], "pixel_pitch");
        if (!(*job.pixel_pitch > 0.0))
            throw ConfigError("\"pixel_pitch\" must be positive");
    }

    if (!doc.contains("output_dir"))
        throw ConfigError("\"output_dir\" is required");
    job.output_dir = resolve(base_dir, doc["output_dir"], "output_dir");
    if (doc.contains("asset_id"))
    {
        if (!doc["asset_id"].is_string())
            throw ConfigError("\"asset_id\" must be a string");
        job.asset_id = doc["asset_id"].get<std::string>();
    }
    if (job.asset_id.empty())
        job.asset_id = job.output_dir.filename().string();

    if (doc.contains("relight"))
    {
        const json& r = doc["relight"];
        if (!r.is_object())
            throw ConfigError("\"relight\" must be an object");
        if (r.contains("light"))
            job.relight_light = vec3(r["light"], "relight.light");
        else if (r.contains("azimuth_deg") && r.contains("elevation_deg"))
            job.relight_light = direction_from_angles(number(r["azimuth_deg"], "relight.azimuth_deg"),
                                                      number(r["elevation_deg"], "relight.elevation_deg"));
        if (r.contains("intensity"))
            job.relight_intensity = number(r["intensity"], "relight.intensity");
    }
    if (doc.contains("sweep"))
    {
        const json& s = doc["sweep"];
        if (!s.is_object())
            throw ConfigError("\"sweep\" must be an object");
        if (s.contains("elevation_deg"))
            job.sweep_elevation = number(s["elevation_deg"], "sweep.elevation_deg");
        if (s.contains("count"))
        {
            if (!s["count"].is_number_integer())
                throw ConfigError("\"sweep.count\" must be an integer");
            job.sweep_count = s["count"].get<int>();
        }
    }
    return job;
}

JobConfig load_job(const fs::path& path)
{
    const json doc = readJson(path, "job file");
    return parse_job(doc, fs::absolute(path).parent_path());
}

ImageStack load_job_stack(const JobConfig& job)
{
    std::vector<RasterImage> images;
    images.reserve(job.images.size());
    for (const fs::path& path : job.images)
        images.push_back(load_image(path, job.colorspace.value_or(default_colorspace(path))));
    for (std::size_t j = 1; j < images.size(); ++j)
        if (!images[j].same_shape(images.front()))
            throw DataError("image " + std::to_string(j) + " ('" + job.images[j].string() +
                            "') does not match the dimensions of image 0");

    std::optional<Mask> mask;
    if (job.mask)
    {
        mask = load_mask(*job.mask);
        if (!images.empty() && (mask->width != images.front().width || mask->height != images.front().height))
            throw DataError("mask dimensions do not match the images");
    }
    ImageStack stack = make_stack(std::move(images), std::move(mask), job.asset_id);
    for (const SphereAnnotation& sphere : job.spheres)
        for (int r = 0; r < stack.height(); ++r)
            for (int c = 0; c < stack.width(); ++c)
                if (sphere.contains(r, c))
                    stack.mask.set(static_cast<std::size_t>(r) * stack.width() + c, false);
    return stack;
}

LightSet resolve_lights(const JobConfig& job, const ImageStack& stack, const RunOptions& options)
{
    const fs::path cached = job.output_dir / "lights.json";
    if (fs::exists(cached))
    {
        LightSet lights = lights_from_json(readJson(cached, "light file"));
        if (lights.size() != stack.size())
            throw ConfigError("lights.json has " + std::to_string(lights.size()) + " lights but the job lists " +
                              std::to_string(stack.size()) + " images");
        return lights;
    }
    requireLightSource(job);
    if (job.uses_dome())
    {
        LightSet lights;
        domeLedCount(job, lights);
        return lights;
    }
    Calibration calibration = calibrate_from_spheres(stack, job.spheres);
    for (const std::string& w : calibration.warnings)
        warn(options, w);
    return calibration.lights;
}

void cmd_calibrate(const JobConfig& job, const RunOptions& options)
{
    requireLightSource(job);
    OutputLock lock(job.output_dir);
    refuseOverwrite(job, options, {"lights.json", "calibration_report.json"});
    const Stopwatch clock;

    json report;
    LightSet lights;
    if (job.uses_dome())
    {
        domeLedCount(job, lights);
        report = {{"source", "dome_manifest"},
                  {"manifest", job.dome_manifest->string()},
                  {"dome_id", readJson(*job.dome_manifest, "dome manifest").value("dome_id", "")},
                  {"led_count", lights.size()}};
    }
    else
    {
        const ImageStack stack = load_job_stack(job);
        const Calibration calibration = calibrate_from_spheres(stack, job.spheres);
        lights = calibration.lights;
        json measurements = json::array();
        for (const SphereMeasurement& m : calibration.measurements)
        {
            json entry = {{"image", m.image}, {"sphere", m.sphere}};
            if (m.finish == SphereFinish::specular)
            {
                entry["finish"] = "specular";
                entry["direction"] = lightJson(m.direction);
                entry["residual_deg"] = m.residual_deg;
                entry["saturated"] = m.saturated;
            }
            else
            {
                entry["finish"] = "matte";
                entry["intensity"] = m.intensity;
            }
            measurements.push_back(entry);
        }
        report = {{"source", "spheres"},
                  {"measurements", measurements},
                  {"warnings", calibration.warnings},
                  {"direction_conditioning", direction_conditioning(lights)}};
        for (const std::string& w : calibration.warnings)
            warn(options, w);
    }
    writeJson(job.output_dir / "lights.json", lights_to_json(lights));
    writeJson(job.output_dir / "calibration_report.json", report);
    recordStage(job, "calibrate", clock.seconds(), {{"lights", lights.size()}});
}

void cmd_solve(const JobConfig& job, const RunOptions& options)
{
    OutputLock lock(job.output_dir);
    refuseOverwrite(job, options, {"normals.pfm", "normals_rgb.png", "albedo.pfm", "albedo.png"});
    const Stopwatch total;

    const ImageStack stack = load_job_stack(job);
    const double loadSeconds = total.seconds();
    const LightSet lights = resolve_lights(job, stack, options);

    const Stopwatch solveClock;
    const PhotometricResult result = job.solver == SolverKind::robust ? solve_robust(stack, lights, job.trim)
                                                                        : solve_lambertian(stack, lights);
    const double solveSeconds = solveClock.seconds();

    save_normals_pfm(result.normals, job.output_dir / "normals.pfm");
    save_map(encode_normals_rgb(result.normals), job.output_dir / "normals_rgb.png", MapFormat::png16);
    write_pfm(result.albedo.rho, job.output_dir / "albedo.pfm");
    double exposure = 1.0;
    save_map(albedoPreview(result.albedo, exposure), job.output_dir / "albedo.png", MapFormat::png16);
    save_mask(result.normals.valid, job.output_dir / "mask.png");

    json meta = {{"solver", job.solver == SolverKind::robust ? "robust" : "lambertian"},
                 {"images", stack.size()},
                 {"width", stack.width()},
                 {"height", stack.height()},
                 {"valid_pixels", result.normals.valid.count()},
                 {"invalid_pixels", result.invalid_pixels},
                 {"flipped_pixels", result.flipped_pixels},
                 {"albedo_preview_exposure", exposure},
                 {"timings_s", {{"load", loadSeconds}, {"solve", solveSeconds}}}};
    if (job.solver == SolverKind::robust)
        meta["trim"] = {job.trim.low, job.trim.high};
    writeJson(job.output_dir / "solve.json", meta);
    if (result.invalid_pixels > 0)
        warn(options, std::to_string(result.invalid_pixels) + " masked pixels could not be solved");
    recordStage(job, "solve", total.seconds(), meta);
}

void cmd_integrate(const JobConfig& job, const RunOptions& options)
{
    OutputLock lock(job.output_dir);
    refuseOverwrite(job, options, {"depth.pfm", "mesh.ply"});
    const Stopwatch clock;

    const SolvedMaps maps = loadSolvedMaps(job);
    const Mask region = regionMask(job, maps.normals);
    IntegrationResult result = integrate_normals(maps.normals, region);
    result.depth.pixel_pitch = job.pixel_pitch;
    for (const std::string& w : result.warnings)
        warn(options, w);

    save_depth_pfm(result.depth, job.output_dir / "depth.pfm");
    const MeshStats mesh = export_mesh(result.depth, maps.albedo, job.output_dir / "mesh.ply");
    const json meta = {{"components", result.components},
                       {"excluded_pixels", result.excluded_pixels},
                       {"iterations", result.iterations},
                       {"relative_residual", result.relative_residual},
                       {"vertices", mesh.vertices},
                       {"triangles", mesh.triangles},
                       {"pixel_pitch", job.pixel_pitch.value_or(1.0)},
                       {"warnings", result.warnings}};
    writeJson(job.output_dir / "integrate.json", meta);
    recordStage(job, "integrate", clock.seconds(), meta);
}

void cmd_relight(const JobConfig& job, const RunOptions& options)
{
    OutputLock lock(job.output_dir);
    refuseOverwrite(job, options, {"relight.png", "relight.pfm"});
    const Stopwatch clock;

    const std::optional<Vec3> light = options.light ? options.light : job.relight_light;
    if (!light)
        throw ConfigError("relight needs a light direction (--light or \"relight\" in the job)");
    if (std::abs(light->norm() - 1.0) > 1e-6)
        throw ConfigError("relight direction must be a unit vector");
    const double intensity = options.intensity.value_or(job.relight_intensity);

    const SolvedMaps maps = loadSolvedMaps(job);
    const RasterImage render = relight_lambertian(maps.normals, maps.albedo, *light, intensity);
    const double exposure = exposure_for(std::span<const RasterImage>(&render, 1));
    write_pfm(render, job.output_dir / "relight.pfm");
    save_map(apply_exposure(render, exposure), job.output_dir / "relight.png", MapFormat::png16);
    const json meta = {{"light", lightJson(*light)}, {"intensity", intensity}, {"exposure", exposure}};
    writeJson(job.output_dir / "relight.json", meta);
    recordStage(job, "relight", clock.seconds(), meta);
}

void cmd_sweep(const JobConfig& job, const RunOptions& options)
{
    OutputLock lock(job.output_dir);
    refuseOverwrite(job, options, {"sweep"});
    const Stopwatch clock;

    const double elevation = options.elevation.value_or(job.sweep_elevation);
    const int count = options.count.value_or(job.sweep_count);
    if (!(elevation > 0.0 && elevation <= 90.0) || count < 1)
        throw ConfigError("sweep needs 0 < elevation <= 90 and count >= 1");
    const SolvedMaps maps = loadSolvedMaps(job);
    const SweepIndex index = raking_sweep(maps.normals, maps.albedo, elevation, count, job.output_dir / "sweep");
    recordStage(job, "sweep", clock.seconds(),
                {{"elevation_deg", elevation}, {"count", count}, {"exposure", index.exposure}});
}

void cmd_fit_ptm(const JobConfig& job, const RunOptions& options)
{
    OutputLock lock(job.output_dir);
    refuseOverwrite(job, options, {"ptm"});
    const Stopwatch clock;

    const ImageStack stack = load_job_stack(job);
    const LightSet lights = resolve_lights(job, stack, options);
    const PtmModel model = fit_ptm(stack, lights);
    save_ptm_archive(model, job.output_dir / "ptm");

    std::vector<double> rmse;
    for (std::size_t p = 0; p < model.pixel_count(); ++p)
        if (model.valid[p])
            rmse.push_back(model.fit_rmse[p]);
    double median = 0.0;
    if (!rmse.empty())
    {
        std::nth_element(rmse.begin(), rmse.begin() + static_cast<std::ptrdiff_t>(rmse.size() / 2), rmse.end());
        median = rmse[rmse.size() / 2];
    }
    recordStage(job, "fit-ptm", clock.seconds(),
                {{"images", stack.size()}, {"valid_pixels", model.valid.count()}, {"median_fit_rmse", median}});
}

void cmd_export_viewer(const JobConfig& job, const RunOptions& options)
{
    OutputLock lock(job.output_dir);
    refuseOverwrite(job, options, {"viewer"});
    const Stopwatch clock;

    const SolvedMaps maps = loadSolvedMaps(job);
    const fs::path bundle = job.output_dir / "viewer";
    std::error_code ec;
    fs::remove_all(bundle, ec);
    fs::create_directories(bundle, ec);
    if (ec)
        throw DataError("cannot create viewer bundle '" + bundle.string() + "'");

    save_map(encode_normals_rgb(maps.normals), bundle / "normals_rgb.png", MapFormat::png16);
    double exposure = 1.0;
    save_map(albedoPreview(maps.albedo, exposure), bundle / "albedo.png", MapFormat::png16);

    json modes = json::array({"lambertian"});
    const fs::path ptm = job.output_dir / "ptm";
    if (fs::exists(ptm / "ptm.json"))
    {
        const PtmModel model = load_ptm_archive(ptm);
        if (model.width != maps.normals.width || model.height != maps.normals.height)
            throw DataError("PTM archive dimensions differ from the solved maps");
        fs::copy(ptm, bundle / "ptm", fs::copy_options::recursive, ec);
        if (ec)
            throw DataError("cannot copy PTM archive into the viewer bundle");
        modes.push_back("ptm");
    }

    const json manifest = {{"asset_id", job.asset_id},
                           {"width", maps.normals.width},
                           {"height", maps.normals.height},
                           {"modes", modes},
                           {"exposure", exposure}};
    writeJson(bundle / "manifest.json", manifest);

    const std::vector<std::string> problems = validate_viewer_bundle(bundle);
    if (!problems.empty())
        throw DataError("exported bundle failed validation: " + problems.front());
    recordStage(job, "export-viewer", clock.seconds(), {{"modes", modes}});
}

std::vector<std::string> validate_viewer_bundle(const fs::path& dir)
{
    std::vector<std::string> problems;
    std::ifstream in(dir / "manifest.json");
    if (!in)
        return {"manifest.json is missing"};
    const json manifest = json::parse(in, nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object())
        return {"manifest.json is not a JSON object"};

    const std::set<std::string> allowed = {"asset_id", "width", "height", "modes", "exposure"};
    for (const auto& item : manifest.items())
        if (!allowed.count(item.key()))
            problems.push_back("unexpected manifest key \"" + item.key() + "\"");
    for (const char* key : {"asset_id", "width", "height", "modes", "exposure"})
        if (!manifest.contains(key))
            problems.push_back(std::string("manifest lacks \"") + key + "\"");
    if (!problems.empty())
        return problems;

    if (!manifest["asset_id"].is_string() || manifest["asset_id"].get<std::string>().empty())
        problems.push_back("\"asset_id\" must be a non-empty string");
    if (!manifest["width"].is_number_integer() || manifest["width"].get<long>() < 1)
        problems.push_back("\"width\" must be a positive integer");
    if (!manifest["height"].is_number_integer() || manifest["height"].get<long>() < 1)
        problems.push_back("\"height\" must be a positive integer");
    if (!manifest["exposure"].is_number() || !(manifest["exposure"].get<double>() > 0.0))
        problems.push_back("\"exposure\" must be a positive number");

    std::set<std::string> modes;
    const json& modeList = manifest["modes"];
    if (!modeList.is_array() || modeList.empty())
        problems.push_back("\"modes\" must be a non-empty array");
    else
        for (const json& m : modeList)
        {
            if (!m.is_string() || (m != "lambertian" && m != "ptm"))
                problems.push_back("unknown mode " + m.dump());
            else if (!modes.insert(m.get<std::string>()).second)
                problems.push_back("duplicate mode " + m.dump());
        }
    if (!problems.empty())
        return problems;

    const int width = manifest["width"].get<int>();
    const int height = manifest["height"].get<int>();
    auto checkRaster = [&](const fs::path& path, int channels) {
        if (!fs::exists(path))
        {
            problems.push_back("missing " + path.filename().string());
            return;
        }
        try
        {
            const RasterImage image = load_image(path, Colorspace::linear);
            if (image.width != width || image.height != height || image.channels != channels)
                problems.push_back(path.filename().string() + " does not match the manifest dimensions");
        }
        catch (const Error& e)
        {
            problems.push_back(e.what());
        }
    };
    if (modes.count("lambertian"))
    {
        checkRaster(dir / "normals_rgb.png", 3);
        if (!fs::exists(dir / "albedo.png"))
            problems.push_back("missing albedo.png");
        else
        {
            const RasterImage albedo = load_image(dir / "albedo.png", Colorspace::linear);
            if (albedo.width != width || albedo.height != height)
                problems.push_back("albedo.png does not match the manifest dimensions");
        }
    }
    if (modes.count("ptm"))
    {
        try
        {
            const PtmModel model = load_ptm_archive(dir / "ptm");
            if (model.width != width || model.height != height)
                problems.push_back("PTM archive does not match the manifest dimensions");
        }
        catch (const Error& e)
        {
            problems.push_back(std::string("ptm mode: ") + e.what());
        }
    }
    return problems;
}

} // namespace lumen3d
