#include "doctest.h"

#include "lumen3d/errors.hpp"
#include "lumen3d/imagery.hpp"
#include "oracles.hpp"
#include "png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>

using namespace lumen3d;
namespace fs = std::filesystem;

namespace {

fs::path write8(const fs::path& dir, const std::string& name, int w, int h, int channels, std::uint16_t code)
{
    const std::vector<std::uint16_t> codes(static_cast<std::size_t>(w) * h * channels, code);
    const fs::path path = dir / name;
    detail::write_png(path, w, h, channels, 8, codes);
    return path;
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void writeRgbaPng(const fs::path& path)
{
    std::FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    png_init_io(png, f);
    png_set_IHDR(png, info, 1, 1, 8, PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_byte row[4] = {1, 2, 3, 255};
    png_write_row(png, row);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
}

} // namespace

TEST_CASE("8-bit PNG normalization and sRGB linearization")
{
    const fs::path dir = oracle::scratch_dir("imagery_png8");

    const RasterImage white = load_image(write8(dir, "white.png", 4, 3, 1, 255), Colorspace::linear);
    CHECK(white.width == 4);
    CHECK(white.height == 3);
    CHECK(white.channels == 1);
    for (float v : white.data)
        CHECK(v == 1.0f);

    const fs::path black = write8(dir, "black.png", 2, 2, 3, 0);
    for (Colorspace cs : {Colorspace::linear, Colorspace::srgb})
        for (float v : load_image(black, cs).data)
            CHECK(v == 0.0f);

    // ((188/255 + 0.055) / 1.055)^2.4 = 0.50289
    const RasterImage mid = load_image(write8(dir, "mid.png", 1, 1, 1, 188), Colorspace::srgb);
    CHECK(std::abs(mid.data[0] - 0.5029) < 1e-3);

    CHECK(default_colorspace(black) == Colorspace::srgb);
}

TEST_CASE("linearization is monotone in the code value")
{
    double previous = -1.0;
    for (int code = 0; code <= 255; ++code)
    {
        const double v = srgb_to_linear(code / 255.0);
        CHECK(v >= previous);
        previous = v;
    }
    previous = -1.0;
    for (int code = 0; code <= 65535; code += 7)
    {
        const double v = srgb_to_linear(code / 65535.0);
        REQUIRE(v >= previous);
        previous = v;
    }
    CHECK(srgb_to_linear(1.0) == doctest::Approx(1.0));
}

TEST_CASE("png16 export quantizes by round(v * 65535)")
{
    const fs::path dir = oracle::scratch_dir("imagery_png16");
    RasterImage map(3, 1, 1);
    map.data = {1.0f, 0.25f, 0.0f};
    save_map(map, dir / "q.png", MapFormat::png16);
    const detail::PngCodes codes = detail::read_png(dir / "q.png");
    CHECK(codes.bit_depth == 16);
    CHECK(codes.codes[0] == 65535);
    CHECK(codes.codes[1] == 16384);
    CHECK(codes.codes[2] == 0);

    const RasterImage back = load_image(dir / "q.png", Colorspace::linear);
    for (std::size_t i = 0; i < map.data.size(); ++i)
        CHECK(std::abs(back.data[i] - map.data[i]) <= 0.5 / 65535.0 + 1e-9);

    map.data[0] = 1.01f;
    CHECK_THROWS_AS(save_map(map, dir / "bad.png", MapFormat::png16), DataError);
    map.data[0] = -0.01f;
    CHECK_THROWS_AS(save_map(map, dir / "bad.png", MapFormat::png16), DataError);
}

TEST_CASE("pfm round-trips finite rasters bit-exactly")
{
    const fs::path dir = oracle::scratch_dir("imagery_pfm");
    std::mt19937 rng(7);
    std::uniform_real_distribution<float> dist(0.0f, 50.0f);
    for (int channels : {1, 3})
    {
        RasterImage map(7, 5, channels);
        for (float& v : map.data)
            v = dist(rng);
        map.data[3] = std::numeric_limits<float>::denorm_min();
        const fs::path path = dir / ("map" + std::to_string(channels) + ".pfm");
        save_map(map, path, MapFormat::pfm);
        const RasterImage back = load_image(path, Colorspace::linear);
        REQUIRE(back.same_shape(map));
        CHECK(back.data == map.data);
    }

    // Signed payloads survive through the raw reader.
    RasterImage signedMap(2, 2, 1);
    signedMap.data = {-1.5f, 0.0f, 2.25f, -0.0f};
    write_pfm(signedMap, dir / "signed.pfm");
    CHECK(read_pfm(dir / "signed.pfm").data == signedMap.data);
    CHECK_THROWS_AS(load_image(dir / "signed.pfm", Colorspace::linear), DataError);
}

TEST_CASE("rows are stored top-first in memory regardless of the PFM bottom-up layout")
{
    const fs::path dir = oracle::scratch_dir("imagery_rows");
    RasterImage map(1, 2, 1);
    map.data = {1.0f, 2.0f}; // row 0 = 1
    write_pfm(map, dir / "r.pfm");
    const std::string bytes = slurp(dir / "r.pfm");
    float first = 0.0f;
    std::memcpy(&first, bytes.data() + bytes.size() - 8, 4);
    CHECK(first == 2.0f); // bottom row first on disk
    CHECK(read_pfm(dir / "r.pfm").at(0, 0) == 1.0f);
}

TEST_CASE("save -> load -> save is byte-identical at the second save")
{
    const fs::path dir = oracle::scratch_dir("imagery_idem");
    std::mt19937 rng(11);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    RasterImage map(9, 4, 3);
    for (float& v : map.data)
        v = dist(rng);

    for (MapFormat format : {MapFormat::png16, MapFormat::pfm})
    {
        const std::string ext = format == MapFormat::pfm ? ".pfm" : ".png";
        save_map(map, dir / ("a" + ext), format);
        const RasterImage once = load_image(dir / ("a" + ext), Colorspace::linear);
        save_map(once, dir / ("b" + ext), format);
        const RasterImage twice = load_image(dir / ("b" + ext), Colorspace::linear);
        save_map(twice, dir / ("c" + ext), format);
        CHECK(slurp(dir / ("b" + ext)) == slurp(dir / ("c" + ext)));
    }
}

TEST_CASE("decoding errors")
{
    const fs::path dir = oracle::scratch_dir("imagery_errors");
    CHECK_THROWS_AS(load_image(dir / "missing.png", Colorspace::linear), DataError);

    {
        std::ofstream junk(dir / "junk.pfm");
        junk << "not an image";
    }
    CHECK_THROWS_AS(load_image(dir / "junk.pfm", Colorspace::linear), DataError);

    {
        std::ofstream nan(dir / "nan.pfm", std::ios::binary);
        nan << "Pf\n1 1\n-1.0\n";
        const float v = std::numeric_limits<float>::quiet_NaN();
        nan.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    CHECK_THROWS_WITH_AS(load_image(dir / "nan.pfm", Colorspace::linear), doctest::Contains("NaN"), DataError);

    {
        std::ofstream shortFile(dir / "short.pfm", std::ios::binary);
        shortFile << "PF\n4 4\n-1.0\n1234";
    }
    CHECK_THROWS_AS(load_image(dir / "short.pfm", Colorspace::linear), DataError);

    writeRgbaPng(dir / "rgba.png");
    CHECK_THROWS_WITH_AS(load_image(dir / "rgba.png", Colorspace::linear), doctest::Contains("unsupported"),
                         DataError);

    CHECK_THROWS_AS(save_map(RasterImage(2, 2, 1), dir / "no_such_dir" / "x.pfm", MapFormat::pfm), DataError);
}

TEST_CASE("masks round-trip through 8-bit PNG")
{
    const fs::path dir = oracle::scratch_dir("imagery_mask");
    Mask mask(5, 3, false);
    mask.set(0, true);
    mask.set(7, true);
    mask.set(14, true);
    save_mask(mask, dir / "m.png");
    const detail::PngCodes codes = detail::read_png(dir / "m.png");
    CHECK(codes.bit_depth == 8);
    CHECK(codes.codes[0] == 255);
    CHECK(codes.codes[1] == 0);
    const Mask back = load_mask(dir / "m.png");
    CHECK(back.valid == mask.valid);
    CHECK(back.count() == 3);
}

TEST_CASE("stack validation")
{
    std::vector<RasterImage> images(3, RasterImage(4, 4, 1));
    ImageStack stack = make_stack(images);
    CHECK_NOTHROW(stack.validate(3));
    CHECK_THROWS_AS(stack.validate(4), DataError);
    stack.images[2] = RasterImage(4, 5, 1);
    CHECK_THROWS_AS(stack.validate(3), DataError);
    stack = make_stack(images, Mask(3, 4, true));
    CHECK_THROWS_AS(stack.validate(3), DataError);
}

TEST_CASE("camera frame puts y up")
{
    CHECK(pixel_y(0, 10) == 9.0);
    CHECK(pixel_y(9, 10) == 0.0);
    CHECK(pixel_x(3) == 3.0);
}
