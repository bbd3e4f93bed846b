#pragma once

// Test-only synthetic scenes and reference computations. Nothing here calls
// into the solvers it is used to check.

#include "lumen3d/imagery.hpp"
#include "lumen3d/lightcal.hpp"
#include "lumen3d/psolve.hpp"

#include <filesystem>
#include <random>
#include <vector>

namespace oracle {

using lumen3d::Vec3;

double angle_deg(const Vec3& a, const Vec3& b);

/// Supersampled orthographic render of a mirror sphere reflecting a Gaussian
/// area light (angular sigma `lobe_deg`) centred on `light`, over a dim
/// uniform environment. Values are scaled by `intensity`.
void render_mirror_sphere(lumen3d::RasterImage& image, double row, double col, double radius, const Vec3& light,
                          double intensity, double lobe_deg = 8.0, double environment = 0.02, int supersample = 4);

/// Pixel-centre Lambertian sphere: intensity * albedo * max(0, n . light).
void render_matte_sphere(lumen3d::RasterImage& image, double row, double col, double radius, const Vec3& light,
                         double intensity, double albedo);

/// Number of pixel centres on a matte sphere with n . light > gate.
std::size_t count_lit_pixels(double radius, const Vec3& light, double gate);

struct SurfaceMaps
{
    lumen3d::NormalField normals;
    lumen3d::AlbedoMap albedo;
};

/// Random smooth height field (sum of Gaussian bumps) with analytic normals
/// and smooth 3-channel albedo in [0.2, 0.9]. Tilt stays below ~max_tilt_deg.
SurfaceMaps smooth_surface(int width, int height, std::uint32_t seed, double max_tilt_deg = 30.0,
                           int channels = 3);

/// Flat normals (0,0,1) and constant albedo.
SurfaceMaps flat_surface(int width, int height, double albedo, int channels = 1);

/// Hemisphere of `radius` px centred at pixel (row, col); normals valid inside
/// the sphere silhouette. depth_at gives the analytic cap height.
lumen3d::NormalField hemisphere_normals(int width, int height, double row, double col, double radius);
double hemisphere_depth(double row, double col, double centre_row, double centre_col, double radius, int height);

/// Vertical V-groove running along the image columns: flat outside, walls
/// tilted by wall_deg inside |col - centre| < half_width.
SurfaceMaps v_groove(int width, int height, double half_width, double wall_deg);

/// Lights on a ring at `elevation_deg`, first azimuth `start_deg`.
lumen3d::LightSet ring_lights(int count, double elevation_deg, double start_deg = 0.0);

/// Spiral (Fibonacci) layout of `count` LEDs over the cap above min_elevation_deg.
lumen3d::LightSet dome_lights(int count, double min_elevation_deg);

nlohmann::json dome_manifest_json(const lumen3d::LightSet& lights, const std::string& id);

/// Per-pixel angle between two normal fields over pixels valid in both.
struct AngularStats
{
    double mean_deg = 0.0;
    double max_deg = 0.0;
    std::size_t count = 0;
};
AngularStats angular_error(const lumen3d::NormalField& estimate, const lumen3d::NormalField& truth);

/// Mean |a - b| / b over valid pixels and channels.
double mean_relative_error(const lumen3d::AlbedoMap& estimate, const lumen3d::AlbedoMap& truth);

/// Zeroes `fraction` of the observations of every pixel (random per pixel).
void inject_shadows(lumen3d::ImageStack& stack, double fraction, std::uint32_t seed);

double median(std::vector<double> values);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

} // namespace oracle
