#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lumen3d {

using Vec3 = Eigen::Vector3d;

// Camera frame: x to image right, y to image UP, z toward the viewer.
// Pixel (row, col) sits at (x, y) = (col, height - 1 - row). Most raster code
// assumes y points down; everything in this library uses y up.
inline double pixel_x(double col) { return col; }
inline double pixel_y(double row, int height) { return static_cast<double>(height - 1) - row; }

enum class Colorspace
{
    linear,
    srgb
};

enum class MapFormat
{
    png16,
    pfm
};

Colorspace parse_colorspace(const std::string& name);

/// Row-major float raster, row 0 at the top of the image.
struct RasterImage
{
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    RasterImage() = default;
    RasterImage(int width, int height, int channels, float fill = 0.0f);

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t index(int row, int col, int ch = 0) const
    {
        return (static_cast<std::size_t>(row) * width + col) * channels + ch;
    }
    float& at(int row, int col, int ch = 0) { return data[index(row, col, ch)]; }
    float at(int row, int col, int ch = 0) const { return data[index(row, col, ch)]; }

    /// Channel mean at a linear pixel index.
    double luminance(std::size_t pixel) const;
    /// Largest channel value at a linear pixel index.
    double channel_max(std::size_t pixel) const;

    bool same_shape(const RasterImage& other) const
    {
        return width == other.width && height == other.height && channels == other.channels;
    }
};

/// Per-pixel validity (nonzero = valid).
struct Mask
{
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> valid;

    Mask() = default;
    Mask(int width, int height, bool fill);

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    bool operator[](std::size_t pixel) const { return valid[pixel] != 0; }
    bool at(int row, int col) const { return valid[static_cast<std::size_t>(row) * width + col] != 0; }
    void set(std::size_t pixel, bool v) { valid[pixel] = v ? 1 : 0; }
    std::size_t count() const;
};

Mask intersect(const Mask& a, const Mask& b);

/// Co-registered images of one pose under k lights.
struct ImageStack
{
    std::vector<RasterImage> images;
    Mask mask;
    std::string pose_id;

    std::size_t size() const { return images.size(); }
    int width() const { return images.empty() ? 0 : images.front().width; }
    int height() const { return images.empty() ? 0 : images.front().height; }
    int channels() const { return images.empty() ? 0 : images.front().channels; }

    /// Checks shared dimensions, mask shape and the minimum image count.
    void validate(std::size_t min_images) const;
};

/// Builds a stack with a fully valid mask when none is given.
ImageStack make_stack(std::vector<RasterImage> images, std::optional<Mask> mask = std::nullopt,
                      std::string pose_id = {});

double srgb_to_linear(double encoded);

/// PNG (8/16-bit gray or RGB) or PFM. Codes are normalized to [0,1] and, for
/// srgb, passed through the sRGB transfer function.
RasterImage load_image(const std::filesystem::path& path, Colorspace colorspace);

/// Default ingestion colorspace: srgb for PNG, linear for PFM.
Colorspace default_colorspace(const std::filesystem::path& path);

void save_map(const RasterImage& map, const std::filesystem::path& path, MapFormat format);

/// Raw PFM access without the non-negativity check (normals, depth, PTM
/// coefficients are signed).
RasterImage read_pfm(const std::filesystem::path& path);
void write_pfm(const RasterImage& map, const std::filesystem::path& path);

/// 8-bit gray PNG, 0 = invalid, 255 = valid. Any nonzero code reads as valid.
Mask load_mask(const std::filesystem::path& path);
void save_mask(const Mask& mask, const std::filesystem::path& path);

} // namespace lumen3d
