#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lumen3d::detail {

struct PngCodes
{
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<std::uint16_t> codes; // row-major, interleaved
};

bool has_png_signature(const std::filesystem::path& path);
PngCodes read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, int width, int height, int channels, int bit_depth,
               std::span<const std::uint16_t> codes);

} // namespace lumen3d::detail
