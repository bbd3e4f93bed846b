#include "lumen3d/psolve.hpp"

#include "lumen3d/errors.hpp"
#include "lumen3d/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lumen3d {

NormalField::NormalField(int w, int h)
    : width(w), height(h), normals(static_cast<std::size_t>(w) * h, Vec3::Zero()), valid(w, h, false),
      flipped(w, h, false)
{
}

namespace {

constexpr double kMinMagnitude = 1e-6;
constexpr double kLocalRankTolerance = 1e-10;
constexpr int kMaxTrimIterations = 5;

struct PixelSolve
{
    bool ok = false;
    Vec3 m = Vec3::Zero();
};

/// Least squares for m over the observations listed in `used`.
PixelSolve solveSubset(const Eigen::MatrixXd& scaled, std::span<const double> luminance,
                       std::span<const int> used)
{
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    Vec3 b = Vec3::Zero();
    for (int j : used)
    {
        const Vec3 s = scaled.row(j).transpose();
        a.noalias() += s * s.transpose();
        b += s * luminance[j];
    }
    PixelSolve out;
    if (used.size() < 3)
        return out;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(a, Eigen::EigenvaluesOnly);
    const Vec3& ev = eig.eigenvalues();
    if (!(ev(2) > 0.0) || ev(0) <= kLocalRankTolerance * ev(2))
        return out;
    out.m = a.ldlt().solve(b);
    out.ok = out.m.allFinite();
    return out;
}

void checkInputs(const ImageStack& stack, const LightSet& lights, std::size_t minImages)
{
    stack.validate(minImages);
    lights.validate();
    if (lights.size() != stack.size())
        throw DataError("stack has " + std::to_string(stack.size()) + " images but the light set has " +
                        std::to_string(lights.size()) + " lights");
    require_rank3(lights);
}

/// Shared per-pixel driver; `solvePixel` fills `used` with the observations
/// that support the returned m.
template <typename SolvePixel>
PhotometricResult solveStack(const ImageStack& stack, const LightSet& lights, SolvePixel&& solvePixel)
{
    const int width = stack.width();
    const int height = stack.height();
    const int channels = stack.channels();
    const std::size_t k = stack.size();
    const Eigen::MatrixXd scaled = lights.scaled_matrix();

    PhotometricResult out;
    out.normals = NormalField(width, height);
    out.albedo.rho = RasterImage(width, height, channels);
    out.albedo.valid = Mask(width, height, false);

    std::vector<std::uint8_t> unsolved(out.normals.pixel_count(), 0);
    parallel_for(out.normals.pixel_count(), [&](std::size_t p) {
        if (!stack.mask[p])
            return;
        std::vector<double> luminance(k);
        std::vector<int> candidates;
        candidates.reserve(k);
        for (std::size_t j = 0; j < k; ++j)
        {
            const RasterImage& image = stack.images[j];
            luminance[j] = image.luminance(p);
            if (image.channel_max(p) < kSaturationLevel)
                candidates.push_back(static_cast<int>(j));
        }

        std::vector<int> used;
        const PixelSolve solved = solvePixel(scaled, luminance, candidates, used);
        const double magnitude = solved.m.norm();
        if (!solved.ok || magnitude < kMinMagnitude)
        {
            unsolved[p] = 1;
            return;
        }

        Vec3 n = solved.m / magnitude;
        if (n.z() < 0.0)
        {
            n.z() = -n.z();
            out.normals.flipped.set(p, true);
        }
        out.normals.normals[p] = n;
        out.normals.valid.set(p, true);
        out.albedo.valid.set(p, true);

        if (channels == 1)
        {
            out.albedo.rho.data[p] = static_cast<float>(magnitude);
            return;
        }
        double shadingSq = 0.0;
        std::vector<double> projected(channels, 0.0);
        for (int j : used)
        {
            const double s = scaled.row(j).dot(n);
            shadingSq += s * s;
            for (int c = 0; c < channels; ++c)
                projected[c] += s * stack.images[j].data[p * channels + c];
        }
        for (int c = 0; c < channels; ++c)
            out.albedo.rho.data[p * channels + c] =
                static_cast<float>(shadingSq > 0.0 ? std::max(0.0, projected[c] / shadingSq) : 0.0);
    });

    out.invalid_pixels = static_cast<std::size_t>(std::count(unsolved.begin(), unsolved.end(), 1));
    out.flipped_pixels = out.normals.flipped.count();
    return out;
}

std::size_t trimCount(double fraction, std::size_t n)
{
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

} // namespace

PhotometricResult solve_lambertian(const ImageStack& stack, const LightSet& lights)
{
    checkInputs(stack, lights, 3);
    return solveStack(stack, lights,
                      [](const Eigen::MatrixXd& scaled, std::span<const double> luminance,
                         const std::vector<int>& candidates, std::vector<int>& used) {
                          used = candidates;
                          return solveSubset(scaled, luminance, used);
                      });
}

PhotometricResult solve_robust(const ImageStack& stack, const LightSet& lights, TrimFractions trim)
{
    if (!(trim.low >= 0.0 && trim.high >= 0.0 && trim.low + trim.high < 1.0))
        throw DataError("trim fractions must be non-negative with low + high < 1");
    if (stack.size() < 6)
        throw DataError("robust solve needs at least 6 images, got " + std::to_string(stack.size()));
    checkInputs(stack, lights, 6);
    const std::size_t k = stack.size();
    if (k - trimCount(trim.low, k) - trimCount(trim.high, k) < 3)
        throw DataError("insufficient observations after trim");

    return solveStack(stack, lights,
                      [trim](const Eigen::MatrixXd& scaled, std::span<const double> luminance,
                             const std::vector<int>& candidates, std::vector<int>& used) {
                          const std::size_t n = candidates.size();
                          const std::size_t dropLow = trimCount(trim.low, n);
                          const std::size_t dropHigh = trimCount(trim.high, n);
                          if (n < dropLow + dropHigh + 3)
                              return PixelSolve{};

                          used = candidates;
                          PixelSolve solved = solveSubset(scaled, luminance, used);
                          std::vector<std::pair<double, int>> residuals(n);
                          for (int it = 0; it < kMaxTrimIterations && solved.ok; ++it)
                          {
                              for (std::size_t i = 0; i < n; ++i)
                              {
                                  const int j = candidates[i];
                                  residuals[i] = {luminance[j] - scaled.row(j).dot(solved.m), j};
                              }
                              std::sort(residuals.begin(), residuals.end());
                              std::vector<int> kept;
                              kept.reserve(n - dropLow - dropHigh);
                              for (std::size_t i = dropLow; i < n - dropHigh; ++i)
                                  kept.push_back(residuals[i].second);
                              std::sort(kept.begin(), kept.end());
                              if (kept == used)
                                  break;
                              used = std::move(kept);
                              solved = solveSubset(scaled, luminance, used);
                          }
                          return solved;
                      });
}

RasterImage encode_normals_rgb(const NormalField& normals)
{
    RasterImage out(normals.width, normals.height, 3);
    for (std::size_t p = 0; p < normals.pixel_count(); ++p)
    {
        if (!normals.valid[p])
            continue;
        for (int c = 0; c < 3; ++c)
            out.data[p * 3 + c] = static_cast<float>(std::clamp((normals.normals[p](c) + 1.0) * 0.5, 0.0, 1.0));
    }
    return out;
}

DecodedNormals decode_normals_rgb(const RasterImage& image)
{
    if (image.channels != 3)
        throw DataError("normal encoding must have 3 channels");
    DecodedNormals out;
    out.field = NormalField(image.width, image.height);
    for (std::size_t p = 0; p < image.pixel_count(); ++p)
    {
        const float* rgb = image.data.data() + p * 3;
        if (rgb[0] == 0.0f && rgb[1] == 0.0f && rgb[2] == 0.0f)
            continue;
        const Vec3 v(2.0 * rgb[0] - 1.0, 2.0 * rgb[1] - 1.0, 2.0 * rgb[2] - 1.0);
        const double norm = v.norm();
        if (norm < 0.5)
        {
            ++out.corrupt_pixels;
            continue;
        }
        out.field.normals[p] = v / norm;
        out.field.valid.set(p, true);
    }
    return out;
}

void save_normals_pfm(const NormalField& normals, const std::filesystem::path& path)
{
    RasterImage raster(normals.width, normals.height, 3);
    for (std::size_t p = 0; p < normals.pixel_count(); ++p)
        if (normals.valid[p])
            for (int c = 0; c < 3; ++c)
                raster.data[p * 3 + c] = static_cast<float>(normals.normals[p](c));
    write_pfm(raster, path);
}

NormalField load_normals_pfm(const std::filesystem::path& path)
{
    const RasterImage raster = read_pfm(path);
    if (raster.channels != 3)
        throw DataError("normal map '" + path.string() + "' must have 3 channels");
    NormalField field(raster.width, raster.height);
    for (std::size_t p = 0; p < field.pixel_count(); ++p)
    {
        const Vec3 v(raster.data[p * 3], raster.data[p * 3 + 1], raster.data[p * 3 + 2]);
        const double norm = v.norm();
        if (norm == 0.0)
            continue;
        field.normals[p] = v / norm;
        field.valid.set(p, true);
    }
    return field;
}

} // namespace lumen3d
