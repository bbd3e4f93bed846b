#include "lumen3d/imagery.hpp"

#include "lumen3d/errors.hpp"
#include "png_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace lumen3d {

namespace fs = std::filesystem;

Colorspace parse_colorspace(const std::string& name)
{
    if (name == "linear")
        return Colorspace::linear;
    if (name == "srgb")
        return Colorspace::srgb;
    throw ConfigError("unknown colorspace '" + name + "' (expected linear or srgb)");
}

RasterImage::RasterImage(int w, int h, int c, float fill)
    : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill)
{
}

double RasterImage::luminance(std::size_t pixel) const
{
    const float* p = data.data() + pixel * channels;
    double sum = 0.0;
    for (int c = 0; c < channels; ++c)
        sum += p[c];
    return sum / channels;
}

double RasterImage::channel_max(std::size_t pixel) const
{
    const float* p = data.data() + pixel * channels;
    return *std::max_element(p, p + channels);
}

Mask::Mask(int w, int h, bool fill) : width(w), height(h), valid(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

std::size_t Mask::count() const
{
    return static_cast<std::size_t>(std::count_if(valid.begin(), valid.end(), [](std::uint8_t v) { return v != 0; }));
}

Mask intersect(const Mask& a, const Mask& b)
{
    if (a.width != b.width || a.height != b.height)
        throw DataError("mask dimensions differ");
    Mask out(a.width, a.height, false);
    for (std::size_t i = 0; i < out.valid.size(); ++i)
        out.valid[i] = (a.valid[i] && b.valid[i]) ? 1 : 0;
    return out;
}

void ImageStack::validate(std::size_t min_images) const
{
    if (images.size() < min_images)
        throw DataError("image stack has " + std::to_string(images.size()) + " images, at least " +
                        std::to_string(min_images) + " required");
    const RasterImage& first = images.front();
    for (std::size_t j = 1; j < images.size(); ++j)
        if (!images[j].same_shape(first))
            throw DataError("image " + std::to_string(j) + " does not match the dimensions of image 0");
    if (mask.width != first.width || mask.height != first.height)
        throw DataError("mask dimensions do not match the image stack");
}

ImageStack make_stack(std::vector<RasterImage> images, std::optional<Mask> mask, std::string pose_id)
{
    ImageStack stack;
    stack.pose_id = std::move(pose_id);
    if (mask)
        stack.mask = std::move(*mask);
    else if (!images.empty())
        stack.mask = Mask(images.front().width, images.front().height, true);
    stack.images = std::move(images);
    return stack;
}

double srgb_to_linear(double v)
{
    if (v <= 0.04045)
        return v / 12.92;
    return std::pow((v + 0.055) / 1.055, 2.4);
}

Colorspace default_colorspace(const fs::path& path)
{
    return detail::has_png_signature(path) ? Colorspace::srgb : Colorspace::linear;
}

namespace {

float byteswap(float v)
{
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    bits = ((bits & 0x000000ffu) << 24) | ((bits & 0x0000ff00u) << 8) | ((bits & 0x00ff0000u) >> 8) |
           ((bits & 0xff000000u) >> 24);
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

std::string readToken(std::istream& in)
{
    std::string token;
    in >> token;
    return token;
}

} // namespace

RasterImage read_pfm(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open image '" + path.string() + "'");

    const std::string magic = readToken(in);
    int channels = 0;
    if (magic == "PF")
        channels = 3;
    else if (magic == "Pf")
        channels = 1;
    else
        throw DataError("'" + path.string() + "' is not a PFM file");

    int width = 0;
    int height = 0;
    double scale = 0.0;
    in >> width >> height >> scale;
    if (!in || width <= 0 || height <= 0 || scale == 0.0)
        throw DataError("malformed PFM header in '" + path.string() + "'");
    in.get(); // single whitespace before the payload

    RasterImage image(width, height, channels);
    const std::size_t rowFloats = static_cast<std::size_t>(width) * channels;
    std::vector<float> row(rowFloats);
    const bool fileLittle = scale < 0.0;
    const bool swap = fileLittle != (std::endian::native == std::endian::little);
    // PFM stores the bottom row first.
    for (int r = height - 1; r >= 0; --r)
    {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(rowFloats * sizeof(float)));
        if (!in)
            throw DataError("truncated PFM payload in '" + path.string() + "'");
        for (std::size_t i = 0; i < rowFloats; ++i)
        {
            const float v = swap ? byteswap(row[i]) : row[i];
            if (std::isnan(v))
                throw DataError("NaN value in PFM '" + path.string() + "'");
            image.data[static_cast<std::size_t>(r) * rowFloats + i] = v;
        }
    }
    return image;
}

void write_pfm(const RasterImage& map, const fs::path& path)
{
    if (map.channels != 1 && map.channels != 3)
        throw DataError("PFM supports 1 or 3 channels, got " + std::to_string(map.channels));
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write '" + path.string() + "'");
    out << (map.channels == 3 ? "PF" : "Pf") << '\n' << map.width << ' ' << map.height << '\n' << "-1.0\n";
    const std::size_t rowFloats = static_cast<std::size_t>(map.width) * map.channels;
    std::vector<float> row(rowFloats);
    const bool swap = std::endian::native != std::endian::little;
    for (int r = map.height - 1; r >= 0; --r)
    {
        for (std::size_t i = 0; i < rowFloats; ++i)
        {
            const float v = map.data[static_cast<std::size_t>(r) * rowFloats + i];
            row[i] = swap ? byteswap(v) : v;
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(rowFloats * sizeof(float)));
    }
    if (!out)
        throw DataError("failed writing '" + path.string() + "'");
}

RasterImage load_image(const fs::path& path, Colorspace colorspace)
{
    if (!fs::exists(path))
        throw DataError("image '" + path.string() + "' does not exist");

    RasterImage image;
    if (detail::has_png_signature(path))
    {
        const detail::PngCodes png = detail::read_png(path);
        const double fullScale = png.bit_depth == 16 ? 65535.0 : 255.0;
        image = RasterImage(png.width, png.height, png.channels);
        for (std::size_t i = 0; i < png.codes.size(); ++i)
        {
            const double v = png.codes[i] / fullScale;
            image.data[i] = static_cast<float>(colorspace == Colorspace::srgb ? srgb_to_linear(v) : v);
        }
        return image;
    }

    image = read_pfm(path);
    for (float& v : image.data)
    {
        if (!std::isfinite(v) || v < 0.0f)
            throw DataError("PFM '" + path.string() + "' holds a non-finite or negative radiance value");
        if (colorspace == Colorspace::srgb)
            v = static_cast<float>(srgb_to_linear(v));
    }
    return image;
}

void save_map(const RasterImage& map, const fs::path& path, MapFormat format)
{
    if (map.data.size() != map.pixel_count() * map.channels)
        throw DataError("raster payload does not match its dimensions");
    if (format == MapFormat::pfm)
    {
        write_pfm(map, path);
        return;
    }

    std::vector<std::uint16_t> codes(map.data.size());
    for (std::size_t i = 0; i < map.data.size(); ++i)
    {
        const float v = map.data[i];
        if (!(v >= 0.0f && v <= 1.0f))
            throw DataError("value " + std::to_string(v) + " outside [0,1] cannot be stored as png16 ('" +
                            path.string() + "')");
        codes[i] = static_cast<std::uint16_t>(std::lround(static_cast<double>(v) * 65535.0));
    }
    detail::write_png(path, map.width, map.height, map.channels, 16, codes);
}

Mask load_mask(const fs::path& path)
{
    const detail::PngCodes png = detail::read_png(path);
    if (png.channels != 1)
        throw DataError("mask '" + path.string() + "' must be a single-channel PNG");
    Mask mask(png.width, png.height, false);
    for (std::size_t i = 0; i < png.codes.size(); ++i)
        mask.valid[i] = png.codes[i] != 0 ? 1 : 0;
    return mask;
}

void save_mask(const Mask& mask, const fs::path& path)
{
    std::vector<std::uint16_t> codes(mask.valid.size());
    for (std::size_t i = 0; i < codes.size(); ++i)
        codes[i] = mask.valid[i] ? 255 : 0;
    detail::write_png(path, mask.width, mask.height, 1, 8, codes);
}

} // namespace lumen3d
