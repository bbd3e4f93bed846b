#include "lumen3d/rti.hpp"

#include "lumen3d/errors.hpp"
#include "lumen3d/parallel.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace lumen3d {

namespace fs = std::filesystem;

namespace {

constexpr double kShadowWeight = 0.1;
constexpr double kDesignRankTolerance = 1e-9;

} // namespace

PtmCoefficients ptm_basis(double u, double v) { return {u * u, v * v, u * v, u, v, 1.0}; }

double ptm_evaluate(const PtmCoefficients& a, double u, double v)
{
    return a[0] * u * u + a[1] * v * v + a[2] * u * v + a[3] * u + a[4] * v + a[5];
}

PtmModel fit_ptm(const ImageStack& stack, const LightSet& lights)
{
    stack.validate(6);
    lights.validate();
    if (lights.size() != stack.size())
        throw DataError("stack has " + std::to_string(stack.size()) + " images but the light set has " +
                        std::to_string(lights.size()) + " lights");

    const std::size_t k = stack.size();
    const auto rows = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd design(rows, 6);
    for (std::size_t j = 0; j < k; ++j)
    {
        const PtmCoefficients b = ptm_basis(lights.directions[j].x(), lights.directions[j].y());
        for (int i = 0; i < 6; ++i)
            design(static_cast<Eigen::Index>(j), i) = b[i];
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(design);
    const auto& sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(5) <= kDesignRankTolerance * sv(0))
        throw DataError("PTM design matrix is rank-deficient; light positions do not span the biquadratic basis");
    const Eigen::MatrixXd pseudoInverse = design.completeOrthogonalDecomposition().pseudoInverse();

    PtmModel model;
    model.width = stack.width();
    model.height = stack.height();
    model.channels = stack.channels();
    model.coefficients.assign(stack.images.front().pixel_count(), PtmCoefficients{});
    model.chroma.assign(model.coefficients.size(), {1.0, 1.0, 1.0});
    model.fit_rmse.assign(model.coefficients.size(), 0.0);
    model.valid = Mask(model.width, model.height, false);

    const int channels = model.channels;
    parallel_for(model.pixel_count(), [&](std::size_t p) {
        if (!stack.mask[p])
            return;
        Eigen::VectorXd target(rows);
        Eigen::VectorXd weight(rows);
        bool weighted = false;
        std::array<double, 3> ratioSum{0.0, 0.0, 0.0};
        std::size_t ratioCount = 0;
        for (std::size_t j = 0; j < k; ++j)
        {
            const RasterImage& image = stack.images[j];
            const double observed = image.luminance(p);
            const auto jj = static_cast<Eigen::Index>(j);
            target(jj) = observed / lights.intensities[j];
            weight(jj) = observed < kPtmShadowLevel ? kShadowWeight : 1.0;
            weighted = weighted || observed < kPtmShadowLevel;
            if (channels == 3 && observed > kPtmShadowLevel && image.channel_max(p) < kSaturationLevel)
            {
                for (int c = 0; c < 3; ++c)
                    ratioSum[c] += image.data[p * 3 + c] / observed;
                ++ratioCount;
            }
        }

        Eigen::VectorXd coeffs;
        if (weighted)
        {
            const Eigen::VectorXd sqrtW = weight.cwiseSqrt();
            const Eigen::MatrixXd a = sqrtW.asDiagonal() * design;
            coeffs = a.householderQr().solve(sqrtW.cwiseProduct(target));
        }
        else
        {
            coeffs = pseudoInverse * target;
        }
        if (!coeffs.allFinite())
            return;

        PtmCoefficients& out = model.coefficients[p];
        for (int i = 0; i < 6; ++i)
            out[i] = coeffs(i);
        const Eigen::VectorXd residual = design * coeffs - target;
        model.fit_rmse[p] = std::sqrt(residual.squaredNorm() / static_cast<double>(k));

        if (ratioCount > 0)
        {
            const double mean = (ratioSum[0] + ratioSum[1] + ratioSum[2]) / 3.0;
            if (mean > 0.0)
                for (int c = 0; c < 3; ++c)
                    model.chroma[p][c] = ratioSum[c] / mean;
        }
        model.valid.set(p, true);
    });
    return model;
}

RasterImage eval_ptm(const PtmModel& model, const Vec3& light)
{
    if (!light.allFinite() || std::abs(light.norm() - 1.0) > 1e-6)
        throw DataError("PTM light must be a unit vector");
    if (!(light.z() > 0.0))
        throw DataError("PTM light must lie in the upper hemisphere (z > 0)");

    const int channels = model.channels;
    RasterImage out(model.width, model.height, channels);
    parallel_for(model.pixel_count(), [&](std::size_t p) {
        if (!model.valid[p])
            return;
        const double luminance = std::max(0.0, ptm_evaluate(model.coefficients[p], light.x(), light.y()));
        if (channels == 1)
            out.data[p] = static_cast<float>(luminance);
        else
            for (int c = 0; c < channels; ++c)
                out.data[p * channels + c] = static_cast<float>(luminance * model.chroma[p][c]);
    });
    return out;
}

PtmNormals ptm_to_normals(const PtmModel& model)
{
    PtmNormals out;
    out.normals = NormalField(model.width, model.height);
    std::size_t candidates = 0;
    for (std::size_t p = 0; p < model.pixel_count(); ++p)
    {
        if (!model.valid[p])
            continue;
        ++candidates;
        const PtmCoefficients& a = model.coefficients[p];
        const double h00 = 2.0 * a[0];
        const double h11 = 2.0 * a[1];
        const double h01 = a[2];
        const double det = h00 * h11 - h01 * h01;
        if (!(h00 < 0.0 && det > 0.0))
        {
            ++out.rejected_pixels;
            continue;
        }
        const double u = (-a[3] * h11 + a[4] * h01) / det;
        const double v = (-a[4] * h00 + a[3] * h01) / det;
        const double r2 = u * u + v * v;
        if (!(r2 < 1.0))
        {
            ++out.rejected_pixels;
            continue;
        }
        out.normals.normals[p] = Vec3(u, v, std::sqrt(1.0 - r2));
        out.normals.valid.set(p, true);
    }
    out.invalid_fraction = candidates > 0 ? static_cast<double>(out.rejected_pixels) / candidates : 0.0;
    return out;
}

void save_ptm_archive(const PtmModel& model, const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw DataError("cannot create PTM archive directory '" + dir.string() + "'");

    RasterImage low(model.width, model.height, 3);
    RasterImage high(model.width, model.height, 3);
    RasterImage chroma(model.width, model.height, 3);
    RasterImage rmse(model.width, model.height, 1);
    for (std::size_t p = 0; p < model.pixel_count(); ++p)
    {
        if (!model.valid[p])
            continue;
        for (int c = 0; c < 3; ++c)
        {
            low.data[p * 3 + c] = static_cast<float>(model.coefficients[p][c]);
            high.data[p * 3 + c] = static_cast<float>(model.coefficients[p][c + 3]);
            chroma.data[p * 3 + c] = static_cast<float>(model.chroma[p][c]);
        }
        rmse.data[p] = static_cast<float>(model.fit_rmse[p]);
    }
    write_pfm(low, dir / "coefficients_012.pfm");
    write_pfm(high, dir / "coefficients_345.pfm");
    write_pfm(chroma, dir / "chroma.pfm");
    write_pfm(rmse, dir / "fit_rmse.pfm");
    save_mask(model.valid, dir / "mask.png");

    const nlohmann::json descriptor = {
        {"basis", "ptm6-lrgb"}, {"width", model.width}, {"height", model.height}, {"channels", model.channels}};
    std::ofstream out(dir / "ptm.json");
    if (!out)
        throw DataError("cannot write PTM descriptor in '" + dir.string() + "'");
    out << descriptor.dump(2) << '\n';
}

PtmModel load_ptm_archive(const fs::path& dir)
{
    std::ifstream in(dir / "ptm.json");
    if (!in)
        throw DataError("PTM archive '" + dir.string() + "' has no ptm.json");
    nlohmann::json descriptor;
    try
    {
        descriptor = nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw DataError("malformed ptm.json: " + std::string(e.what()));
    }
    if (descriptor.value("basis", "") != "ptm6-lrgb")
        throw DataError("unsupported PTM basis in '" + dir.string() + "'");

    PtmModel model;
    model.width = descriptor.at("width").get<int>();
    model.height = descriptor.at("height").get<int>();
    model.channels = descriptor.value("channels", 3);
    const RasterImage low = read_pfm(dir / "coefficients_012.pfm");
    const RasterImage high = read_pfm(dir / "coefficients_345.pfm");
    const RasterImage chroma = read_pfm(dir / "chroma.pfm");
    const RasterImage rmse = read_pfm(dir / "fit_rmse.pfm");
    model.valid = load_mask(dir / "mask.png");
    for (const RasterImage* r : {&low, &high, &chroma, &rmse})
        if (r->width != model.width || r->height != model.height)
            throw DataError("PTM archive rasters disagree with ptm.json dimensions");
    if (model.valid.width != model.width || model.valid.height != model.height)
        throw DataError("PTM archive mask disagrees with ptm.json dimensions");

    const std::size_t n = model.pixel_count();
    model.coefficients.resize(n);
    model.chroma.resize(n);
    model.fit_rmse.resize(n);
    for (std::size_t p = 0; p < n; ++p)
    {
        for (int c = 0; c < 3; ++c)
        {
            model.coefficients[p][c] = low.data[p * 3 + c];
            model.coefficients[p][c + 3] = high.data[p * 3 + c];
            model.chroma[p][c] = chroma.data[p * 3 + c];
        }
        model.fit_rmse[p] = rmse.data[p];
    }
    return model;
}

} // namespace lumen3d
