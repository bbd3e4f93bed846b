#include "lumen3d/relight.hpp"

#include "lumen3d/errors.hpp"
#include "lumen3d/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace lumen3d {

namespace fs = std::filesystem;

RasterImage relight_lambertian(const NormalField& normals, const AlbedoMap& albedo, const Vec3& light,
                               double intensity)
{
    if (albedo.rho.width != normals.width || albedo.rho.height != normals.height)
        throw DataError("normal field and albedo dimensions differ");
    if (!light.allFinite() || std::abs(light.norm() - 1.0) > 1e-6)
        throw DataError("relight direction must be a unit vector");
    if (!(intensity > 0.0) || !std::isfinite(intensity))
        throw DataError("relight intensity must be positive");

    const int channels = albedo.rho.channels;
    const bool albedoMasked = albedo.valid.pixel_count() == normals.pixel_count();
    RasterImage out(normals.width, normals.height, channels);
    parallel_for(normals.pixel_count(), [&](std::size_t p) {
        if (!normals.valid[p] || (albedoMasked && !albedo.valid[p]))
            return;
        const double shading = intensity * std::max(0.0, normals.normals[p].dot(light));
        for (int c = 0; c < channels; ++c)
            out.data[p * channels + c] = static_cast<float>(shading * albedo.rho.data[p * channels + c]);
    });
    return out;
}

ImageStack synthesize_stack(const NormalField& normals, const AlbedoMap& albedo, const LightSet& lights)
{
    if (lights.size() == 0)
        throw DataError("cannot synthesize a stack without lights");
    lights.validate();
    std::vector<RasterImage> images;
    images.reserve(lights.size());
    for (std::size_t j = 0; j < lights.size(); ++j)
        images.push_back(relight_lambertian(normals, albedo, lights.directions[j], lights.intensities[j]));
    return make_stack(std::move(images), normals.valid, "synthetic");
}

Vec3 direction_from_angles(double azimuth_deg, double elevation_deg)
{
    if (elevation_deg == 90.0)
        return Vec3::UnitZ();
    const double a = azimuth_deg * std::numbers::pi / 180.0;
    const double e = elevation_deg * std::numbers::pi / 180.0;
    return Vec3(std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e)).normalized();
}

std::string sweep_filename(double azimuth_deg)
{
    char name[64];
    const double whole = std::round(azimuth_deg);
    if (std::abs(azimuth_deg - whole) < 1e-9)
        std::snprintf(name, sizeof name, "rake_%03d.png", static_cast<int>(whole));
    else
        std::snprintf(name, sizeof name, "rake_%06.2f.png", azimuth_deg);
    return name;
}

double exposure_for(std::span<const RasterImage> images)
{
    float peak = 0.0f;
    for (const RasterImage& image : images)
        for (float v : image.data)
            peak = std::max(peak, v);
    return peak > 1.0f ? 1.0 / peak : 1.0;
}

RasterImage apply_exposure(const RasterImage& image, double exposure)
{
    RasterImage out = image;
    for (float& v : out.data)
        v = static_cast<float>(std::clamp(static_cast<double>(v) * exposure, 0.0, 1.0));
    return out;
}

SweepIndex render_sweep(const NormalField& normals, const AlbedoMap& albedo, double elevation_deg, int count)
{
    if (!(elevation_deg > 0.0 && elevation_deg <= 90.0))
        throw ConfigError("sweep elevation must lie in (0, 90] degrees");
    if (count < 1)
        throw ConfigError("sweep needs at least one frame");

    SweepIndex index;
    index.elevation_deg = elevation_deg;
    for (int i = 0; i < count; ++i)
    {
        SweepFrame frame;
        frame.azimuth_deg = 360.0 * i / count;
        frame.file = sweep_filename(frame.azimuth_deg);
        frame.image = relight_lambertian(normals, albedo, direction_from_angles(frame.azimuth_deg, elevation_deg), 1.0);
        index.frames.push_back(std::move(frame));
    }
    std::vector<RasterImage> images;
    for (const SweepFrame& f : index.frames)
        images.push_back(f.image);
    index.exposure = exposure_for(images);
    return index;
}

SweepIndex raking_sweep(const NormalField& normals, const AlbedoMap& albedo, double elevation_deg, int count,
                        const fs::path& out_dir)
{
    SweepIndex index = render_sweep(normals, albedo, elevation_deg, count);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw DataError("cannot create sweep directory '" + out_dir.string() + "'");

    nlohmann::json frames = nlohmann::json::array();
    for (const SweepFrame& frame : index.frames)
    {
        save_map(apply_exposure(frame.image, index.exposure), out_dir / frame.file, MapFormat::png16);
        frames.push_back({{"azimuth_deg", frame.azimuth_deg}, {"file", frame.file}});
    }
    const nlohmann::json doc = {
        {"elevation_deg", elevation_deg}, {"frames", frames}, {"exposure", index.exposure}};
    std::ofstream out(out_dir / "index.json");
    if (!out)
        throw DataError("cannot write sweep index in '" + out_dir.string() + "'");
    out << doc.dump(2) << '\n';
    return index;
}

double frame_contrast(const RasterImage& image, const Mask& valid)
{
    double sum = 0.0;
    double sumSq = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < image.pixel_count(); ++p)
    {
        if (!valid[p])
            continue;
        const double v = image.luminance(p);
        sum += v;
        sumSq += v * v;
        ++n;
    }
    if (n == 0)
        return 0.0;
    const double mean = sum / n;
    return std::sqrt(std::max(0.0, sumSq / n - mean * mean));
}

} // namespace lumen3d
