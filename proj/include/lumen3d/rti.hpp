#pragma once

#include "lumen3d/psolve.hpp"

#include <array>
#include <filesystem>

namespace lumen3d {

/// Biquadratic basis (u^2, v^2, uv, u, v, 1) in the light's (x, y) components.
using PtmCoefficients = std::array<double, 6>;
PtmCoefficients ptm_basis(double u, double v);
double ptm_evaluate(const PtmCoefficients& a, double u, double v);

/// LRGB polynomial texture map: per-pixel luminance polynomial plus static
/// chroma normalized to unit mean.
struct PtmModel
{
    int width = 0;
    int height = 0;
    int channels = 3; ///< channels of the source stack (1 or 3)
    std::vector<PtmCoefficients> coefficients;
    std::vector<std::array<double, 3>> chroma;
    std::vector<double> fit_rmse;
    Mask valid;

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Observations darker than this (full scale) weigh 0.1 in the fit.
inline constexpr double kPtmShadowLevel = 0.02;

PtmModel fit_ptm(const ImageStack& stack, const LightSet& lights);

/// Luminance clamped at zero times chroma; light must point into z > 0.
RasterImage eval_ptm(const PtmModel& model, const Vec3& light);

struct PtmNormals
{
    NormalField normals;
    std::size_t rejected_pixels = 0; ///< saddle or maximum outside the unit disk
    double invalid_fraction = 0.0;   ///< rejected over valid model pixels
};

/// Normal from the light position that maximizes each pixel's polynomial.
PtmNormals ptm_to_normals(const PtmModel& model);

/// Archive directory: coefficients_012.pfm, coefficients_345.pfm,
/// chroma.pfm, fit_rmse.pfm, mask.png and ptm.json.
void save_ptm_archive(const PtmModel& model, const std::filesystem::path& dir);
PtmModel load_ptm_archive(const std::filesystem::path& dir);

} // namespace lumen3d
