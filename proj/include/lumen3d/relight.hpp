#pragma once

#include "lumen3d/psolve.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lumen3d {

/// Local Lambertian shading, I = intensity * rho * max(0, n . light). No cast
/// shadows. `light` must already be unit length.
RasterImage relight_lambertian(const NormalField& normals, const AlbedoMap& albedo, const Vec3& light,
                               double intensity);

/// One rendered image per light; the stack mask is the normal validity mask.
ImageStack synthesize_stack(const NormalField& normals, const AlbedoMap& albedo, const LightSet& lights);

/// (cos e cos a, cos e sin a, sin e) with azimuth a and elevation e in degrees.
Vec3 direction_from_angles(double azimuth_deg, double elevation_deg);

struct SweepFrame
{
    double azimuth_deg = 0.0;
    std::string file;
    RasterImage image; ///< unit-intensity render, before exposure
};

struct SweepIndex
{
    double elevation_deg = 0.0;
    double exposure = 1.0;
    std::vector<SweepFrame> frames;
};

/// Renders `count` azimuths at a fixed elevation without writing anything.
SweepIndex render_sweep(const NormalField& normals, const AlbedoMap& albedo, double elevation_deg, int count);

/// render_sweep plus PNG16 frames `rake_<azimuth>.png` and index.json in out_dir.
SweepIndex raking_sweep(const NormalField& normals, const AlbedoMap& albedo, double elevation_deg, int count,
                        const std::filesystem::path& out_dir);

/// rake_000.png style names; fractional azimuths keep two decimals.
std::string sweep_filename(double azimuth_deg);

/// Exposure that maps the brightest value to 1 (1 when nothing exceeds 1).
double exposure_for(std::span<const RasterImage> images);
RasterImage apply_exposure(const RasterImage& image, double exposure);

/// Standard deviation of luminance over valid pixels.
double frame_contrast(const RasterImage& image, const Mask& valid);

} // namespace lumen3d
