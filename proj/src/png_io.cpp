#include "png_io.hpp"

#include "lumen3d/errors.hpp"

#include <png.h>

#include <array>
#include <cstdio>
#include <memory>
#include <string>

namespace lumen3d::detail {

namespace {

struct FileCloser
{
    void operator()(std::FILE* f) const
    {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void pngError(png_structp png, png_const_charp message)
{
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text)
        *text = message;
    png_longjmp(png, 1);
}

void pngWarning(png_structp, png_const_charp) {}

} // namespace

bool has_png_signature(const std::filesystem::path& path)
{
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file)
        return false;
    std::array<png_byte, 8> header{};
    if (std::fread(header.data(), 1, header.size(), file.get()) != header.size())
        return false;
    return png_sig_cmp(header.data(), 0, header.size()) == 0;
}

PngCodes read_png(const std::filesystem::path& path)
{
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file)
        throw DataError("cannot open image '" + path.string() + "'");
    if (!has_png_signature(path))
        throw DataError("'" + path.string() + "' is not a PNG file");

    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, pngError, pngWarning);
    if (!png)
        throw DataError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info)
    {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng initialisation failed");
    }

    PngCodes out;
    std::vector<png_byte> buffer;
    std::vector<png_bytep> rows;
    // Nothing with a non-trivial destructor may be created between setjmp
    // and the last libpng call.
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("cannot decode PNG '" + path.string() + "': " + message);
    }

    png_init_io(png, file.get());
    png_read_info(png, info);
    const int colorType = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.bit_depth = depth;

    bool supported = (depth == 8 || depth == 16);
    if (colorType == PNG_COLOR_TYPE_GRAY)
        out.channels = 1;
    else if (colorType == PNG_COLOR_TYPE_RGB)
        out.channels = 3;
    else
        supported = false;
    if (!supported)
    {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unsupported PNG layout in '" + path.string() + "' (color type " + std::to_string(colorType) +
                        ", bit depth " + std::to_string(depth) + "); expected 8/16-bit gray or RGB");
    }

    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    const std::size_t rowBytes = png_get_rowbytes(png, info);
    buffer.resize(rowBytes * out.height);
    rows.resize(out.height);
    for (int r = 0; r < out.height; ++r)
        rows[r] = buffer.data() + rowBytes * r;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t samples = static_cast<std::size_t>(out.width) * out.height * out.channels;
    out.codes.resize(samples);
    if (depth == 8)
    {
        for (int r = 0; r < out.height; ++r)
            for (std::size_t i = 0; i < static_cast<std::size_t>(out.width) * out.channels; ++i)
                out.codes[r * out.width * out.channels + i] = rows[r][i];
    }
    else
    {
        for (int r = 0; r < out.height; ++r)
            for (std::size_t i = 0; i < static_cast<std::size_t>(out.width) * out.channels; ++i)
                out.codes[r * out.width * out.channels + i] =
                    static_cast<std::uint16_t>((rows[r][2 * i] << 8) | rows[r][2 * i + 1]);
    }
    return out;
}

void write_png(const std::filesystem::path& path, int width, int height, int channels, int bit_depth,
               std::span<const std::uint16_t> codes)
{
    if (channels != 1 && channels != 3)
        throw DataError("PNG export supports 1 or 3 channels, got " + std::to_string(channels));

    const std::size_t bytesPerSample = bit_depth == 16 ? 2 : 1;
    const std::size_t rowBytes = static_cast<std::size_t>(width) * channels * bytesPerSample;
    std::vector<png_byte> buffer(rowBytes * height);
    for (std::size_t i = 0; i < codes.size(); ++i)
    {
        if (bit_depth == 16)
        {
            buffer[2 * i] = static_cast<png_byte>(codes[i] >> 8);
            buffer[2 * i + 1] = static_cast<png_byte>(codes[i] & 0xff);
        }
        else
        {
            buffer[i] = static_cast<png_byte>(codes[i]);
        }
    }
    std::vector<png_bytep> rows(height);
    for (int r = 0; r < height; ++r)
        rows[r] = buffer.data() + rowBytes * r;

    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file)
        throw DataError("cannot write '" + path.string() + "'");

    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, pngError, pngWarning);
    if (!png)
        throw DataError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info)
    {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_write_struct(&png, &info);
        throw DataError("cannot encode PNG '" + path.string() + "': " + message);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace lumen3d::detail
