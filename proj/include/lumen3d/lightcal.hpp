#pragma once

#include "lumen3d/imagery.hpp"

#include "json.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lumen3d {

/// Directional lights in the camera frame, pointing from the surface toward
/// the light, with relative linear intensities.
struct LightSet
{
    std::vector<Vec3> directions;
    std::vector<double> intensities;

    std::size_t size() const { return directions.size(); }

    /// Unit-norm directions (1e-6) and positive intensities.
    void validate() const;
    /// k x 3 matrix with rows intensity_j * direction_j.
    Eigen::MatrixXd scaled_matrix() const;
};

/// Smallest over largest singular value of the direction matrix.
double direction_conditioning(const LightSet& lights);
bool has_rank3(const LightSet& lights);
/// Throws DataError for coplanar or repeated light directions.
void require_rank3(const LightSet& lights);

enum class SphereFinish
{
    specular,
    matte
};

/// Operator-placed reference sphere: subpixel center (row, col), radius in pixels.
struct SphereAnnotation
{
    double row = 0.0;
    double col = 0.0;
    double radius = 0.0;
    SphereFinish finish = SphereFinish::specular;

    bool contains(double r, double c) const;
    /// Orthographic sphere normal under the pixel; requires contains(r, c).
    Vec3 normal_at(double r, double c) const;
    /// Throws DataError unless the disk lies inside a width x height image.
    void check_inside(int width, int height) const;
};

struct HighlightEstimate
{
    Vec3 direction = Vec3::UnitZ();
    double row = 0.0; ///< highlight centroid
    double col = 0.0;
    std::size_t highlight_pixels = 0;
    /// More than 20% of the disk is clipped; the estimate is still returned.
    bool saturated = false;
};

/// Mirror-reflection light direction from the highlight on a specular sphere.
HighlightEstimate estimate_direction_from_specular_sphere(const RasterImage& image, const SphereAnnotation& sphere);

/// Relative intensity from a matte sphere lit from a known direction.
double estimate_intensity_from_matte_sphere(const RasterImage& image, const SphereAnnotation& sphere,
                                            const Vec3& direction);

struct SphereMeasurement
{
    std::size_t image = 0;
    std::size_t sphere = 0;
    SphereFinish finish = SphereFinish::specular;
    Vec3 direction = Vec3::Zero(); ///< specular spheres only
    double intensity = 0.0;        ///< matte spheres only
    double residual_deg = 0.0;     ///< angle to the averaged direction
    bool saturated = false;
};

struct Calibration
{
    LightSet lights;
    std::vector<SphereMeasurement> measurements;
    std::vector<std::string> warnings;
};

Calibration calibrate_from_spheres(const ImageStack& stack, std::span<const SphereAnnotation> spheres);

/// Dome manifest JSON: {"dome_id": s, "leds": [{"dir": [x,y,z], "intensity": v}, ...]}.
LightSet parse_dome_manifest(const nlohmann::json& manifest);
LightSet load_dome_manifest(const std::filesystem::path& path);

/// {"lights": [{"dir": [...], "intensity": s}, ...]}
nlohmann::json lights_to_json(const LightSet& lights);
LightSet lights_from_json(const nlohmann::json& doc);

std::vector<SphereAnnotation> spheres_from_json(const nlohmann::json& doc);

} // namespace lumen3d
