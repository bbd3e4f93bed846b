#pragma once

#include "lumen3d/imagery.hpp"
#include "lumen3d/lightcal.hpp"

#include <filesystem>

namespace lumen3d {

/// Observations at or above this fraction of full scale are clipped and never
/// enter a photometric solve.
inline constexpr double kSaturationLevel = 0.995;

/// Per-pixel unit normals (camera frame, n_z >= 0 where valid).
struct NormalField
{
    int width = 0;
    int height = 0;
    std::vector<Vec3> normals;
    Mask valid;
    /// Pixels whose raw solution pointed away from the camera and had n_z reflected.
    Mask flipped;

    NormalField() = default;
    NormalField(int width, int height);

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Diffuse reflectance, 1 or 3 channels, relative linear units.
struct AlbedoMap
{
    RasterImage rho;
    Mask valid;
};

struct PhotometricResult
{
    NormalField normals;
    AlbedoMap albedo;
    std::size_t invalid_pixels = 0; ///< inside the stack mask but unsolvable
    std::size_t flipped_pixels = 0;
};

struct TrimFractions
{
    double low = 0.15;  ///< most negative residuals (shadow candidates)
    double high = 0.10; ///< most positive residuals (specular candidates)
};

/// Lambertian least squares on the luminance channel, then per-channel albedo
/// with the normal held fixed.
PhotometricResult solve_lambertian(const ImageStack& stack, const LightSet& lights);

/// Iteratively trimmed least squares (at most 5 re-solves). Needs k >= 6.
PhotometricResult solve_robust(const ImageStack& stack, const LightSet& lights, TrimFractions trim = {});

/// (n + 1) / 2 per component; invalid pixels are black.
RasterImage encode_normals_rgb(const NormalField& normals);

struct DecodedNormals
{
    NormalField field;
    std::size_t corrupt_pixels = 0; ///< decoded norm < 0.5 (black excluded)
};

DecodedNormals decode_normals_rgb(const RasterImage& image);

/// 3-channel PFM; invalid pixels are stored as (0,0,0).
void save_normals_pfm(const NormalField& normals, const std::filesystem::path& path);
NormalField load_normals_pfm(const std::filesystem::path& path);

} // namespace lumen3d
