#pragma once

#include "lumen3d/psolve.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lumen3d {

/// Relative depth (larger = closer to the camera), zero mean per connected
/// component of the integrated region.
struct DepthMap
{
    int width = 0;
    int height = 0;
    std::vector<double> depth;
    Mask valid;
    std::optional<double> pixel_pitch;

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

struct IntegrationOptions
{
    double tolerance = 1e-8;      ///< relative residual of the normal equations
    double min_normal_z = 0.05;   ///< grazing normals below this are excluded
};

struct IntegrationResult
{
    DepthMap depth;
    std::size_t components = 0;
    std::size_t excluded_pixels = 0; ///< in the region but invalid or grazing
    int iterations = 0;              ///< largest over components
    double relative_residual = 0.0;  ///< largest over components
    std::vector<std::string> warnings;
};

/// Least-squares Poisson integration of the normal field over `region` with
/// natural boundary conditions. Any region shape is allowed; each 4-connected
/// component is integrated on its own.
IntegrationResult integrate_normals(const NormalField& normals, const Mask& region,
                                    const IntegrationOptions& options = {});

struct MeshStats
{
    std::size_t vertices = 0;
    std::size_t triangles = 0;
};

/// ASCII PLY height field, one vertex per valid pixel, two triangles per fully
/// valid 2x2 quad split along the top-left/bottom-right diagonal.
MeshStats export_mesh(const DepthMap& depth, const AlbedoMap& albedo, const std::filesystem::path& path);

void save_depth_pfm(const DepthMap& depth, const std::filesystem::path& path);

} // namespace lumen3d
