#include "doctest.h"

#include "lumen3d/errors.hpp"
#include "lumen3d/psolve.hpp"
#include "lumen3d/relight.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace lumen3d;

namespace {

LightSet identityLights()
{
    LightSet lights;
    lights.directions = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
    lights.intensities = {1.0, 1.0, 1.0};
    return lights;
}

ImageStack pixelStack(const std::vector<float>& values)
{
    std::vector<RasterImage> images;
    for (float v : values)
        images.push_back(RasterImage(1, 1, 1, v));
    return make_stack(std::move(images));
}

LightSet wellConditioned(int count)
{
    LightSet lights = oracle::ring_lights(count / 2, 45.0, 0.0);
    const LightSet inner = oracle::ring_lights(count - count / 2, 65.0, 30.0);
    lights.directions.insert(lights.directions.end(), inner.directions.begin(), inner.directions.end());
    lights.intensities.insert(lights.intensities.end(), inner.intensities.begin(), inner.intensities.end());
    return lights;
}

} // namespace

TEST_CASE("identity light matrix reads m directly")
{
    const PhotometricResult head = solve_lambertian(pixelStack({0.0f, 0.0f, 0.8f}), identityLights());
    REQUIRE(head.normals.valid[0]);
    CHECK((head.normals.normals[0] - Vec3::UnitZ()).norm() < 1e-7);
    CHECK(head.albedo.rho.data[0] == doctest::Approx(0.8).epsilon(1e-7));

    const PhotometricResult tilted = solve_lambertian(pixelStack({0.6f, 0.0f, 0.8f}), identityLights());
    CHECK((tilted.normals.normals[0] - Vec3(0.6, 0.0, 0.8)).norm() < 1e-7);
    CHECK(tilted.albedo.rho.data[0] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("scaling every image by c scales albedo by c and keeps normals")
{
    const oracle::SurfaceMaps truth = oracle::smooth_surface(32, 24, 5);
    const LightSet lights = wellConditioned(8);
    ImageStack stack = synthesize_stack(truth.normals, truth.albedo, lights);
    const PhotometricResult base = solve_lambertian(stack, lights);
    for (RasterImage& image : stack.images)
        for (float& v : image.data)
            v *= 0.5f;
    const PhotometricResult scaled = solve_lambertian(stack, lights);
    for (std::size_t p = 0; p < base.normals.pixel_count(); ++p)
    {
        CHECK((base.normals.normals[p] - scaled.normals.normals[p]).norm() < 1e-9);
        for (int c = 0; c < 3; ++c)
            CHECK(scaled.albedo.rho.data[p * 3 + c] == doctest::Approx(0.5 * base.albedo.rho.data[p * 3 + c]));
    }
}

TEST_CASE("lights x c with images / c keep normals; albedo follows I = phi rho n.l")
{
    const oracle::SurfaceMaps truth = oracle::smooth_surface(20, 20, 9);
    LightSet lights = wellConditioned(8);
    ImageStack stack = synthesize_stack(truth.normals, truth.albedo, lights);
    const PhotometricResult base = solve_lambertian(stack, lights);

    const double c = 4.0;
    for (double& phi : lights.intensities)
        phi *= c;
    for (RasterImage& image : stack.images)
        for (float& v : image.data)
            v = static_cast<float>(v / c);
    const PhotometricResult moved = solve_lambertian(stack, lights);
    for (std::size_t p = 0; p < base.normals.pixel_count(); ++p)
    {
        CHECK((base.normals.normals[p] - moved.normals.normals[p]).norm() < 1e-9);
        for (int ch = 0; ch < 3; ++ch)
        {
            const double expected = base.albedo.rho.data[p * 3 + ch] / (c * c);
            CHECK(std::abs(moved.albedo.rho.data[p * 3 + ch] - expected) <= 1e-9 * std::max(1.0, expected) + 1e-7 * expected);
        }
    }
}

TEST_CASE("round trip through the renderer")
{
    const oracle::SurfaceMaps truth = oracle::smooth_surface(64, 48, 21);
    const LightSet lights = wellConditioned(8);
    const ImageStack stack = synthesize_stack(truth.normals, truth.albedo, lights);
    const PhotometricResult solved = solve_lambertian(stack, lights);
    const oracle::AngularStats err = oracle::angular_error(solved.normals, truth.normals);
    CHECK(err.count == truth.normals.pixel_count());
    CHECK(err.mean_deg < 0.1);
    CHECK(err.max_deg < 1e-4);
    CHECK(oracle::mean_relative_error(solved.albedo, truth.albedo) < 1e-4);
    CHECK(solved.invalid_pixels == 0);
    CHECK(solved.flipped_pixels == 0);
}

TEST_CASE("permuting image/light pairs leaves the solution unchanged")
{
    const oracle::SurfaceMaps truth = oracle::smooth_surface(16, 16, 4);
    const LightSet lights = wellConditioned(10);
    ImageStack stack = synthesize_stack(truth.normals, truth.albedo, lights);
    // Noise makes the least-squares problem non-trivial.
    std::mt19937 rng(1);
    std::normal_distribution<float> noise(0.0f, 0.01f);
    for (RasterImage& image : stack.images)
        for (float& v : image.data)
            v = std::max(0.0f, v + noise(rng));
    const PhotometricResult base = solve_lambertian(stack, lights);

    std::vector<std::size_t> order(lights.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    ImageStack permuted = stack;
    LightSet permutedLights = lights;
    for (std::size_t i = 0; i < order.size(); ++i)
    {
        permuted.images[i] = stack.images[order[i]];
        permutedLights.directions[i] = lights.directions[order[i]];
        permutedLights.intensities[i] = lights.intensities[order[i]];
    }
    const PhotometricResult other = solve_lambertian(permuted, permutedLights);
    for (std::size_t p = 0; p < base.normals.pixel_count(); ++p)
    {
        CHECK((base.normals.normals[p] - other.normals.normals[p]).norm() < 1e-9);
        CHECK(base.albedo.rho.data[p * 3] == doctest::Approx(other.albedo.rho.data[p * 3]).epsilon(1e-6));
    }
}

TEST_CASE("outputs satisfy the unit-norm and hemisphere invariants under noise")
{
    const oracle::SurfaceMaps truth = oracle::smooth_surface(40, 30, 8, 60.0);
    const LightSet lights = wellConditioned(6);
    ImageStack stack = synthesize_stack(truth.normals, truth.albedo, lights);
    std::mt19937 rng(2);
    std::normal_distribution<float> noise(0.0f, 0.2f);
    for (RasterImage& image : stack.images)
        for (float& v : image.data)
            v = std::max(0.0f, v + noise(rng));
    for (const PhotometricResult& r : {solve_lambertian(stack, lights), solve_robust(stack, lights, {0.2, 0.0})})
        for (std::size_t p = 0; p < r.normals.pixel_count(); ++p)
        {
            if (!r.normals.valid[p])
                continue;
            CHECK(std::abs(r.normals.normals[p].norm() - 1.0) < 1e-6);
            CHECK(r.normals.normals[p].z() >= 0.0);
            for (int c = 0; c < 3; ++c)
                CHECK(r.albedo.rho.data[p * 3 + c] >= 0.0f);
        }
}

TEST_CASE("normals pointing away from the camera are reflected and flagged")
{
    LightSet lights = identityLights();
    lights.directions[2] = Vec3(1.0, 0.0, 1.0).normalized();
    // m = (0.6, 0.1, 0.3 sqrt2 - 0.6) has m_z < 0.
    const PhotometricResult r = solve_lambertian(pixelStack({0.6f, 0.1f, 0.3f}), lights);
    REQUIRE(r.normals.valid[0]);
    CHECK(r.normals.flipped[0]);
    CHECK(r.flipped_pixels == 1);
    const Vec3 m(0.6, 0.1, 0.3 * std::sqrt(2.0) - 0.6);
    const Vec3 expected = Vec3(m.x(), m.y(), -m.z()).normalized();
    CHECK((r.normals.normals[0] - expected).norm() < 1e-6);
}

TEST_CASE("saturated observations are dropped before solving")
{
    LightSet lights = identityLights();
    lights.directions.push_back(Vec3(1.0, 1.0, 1.0).normalized());
    lights.intensities.push_back(1.0);
    // Truth m = (0.6, 0, 0.8); the fourth observation is clipped.
    const PhotometricResult r = solve_lambertian(pixelStack({0.6f, 0.0f, 0.8f, 1.0f}), lights);
    CHECK((r.normals.normals[0] - Vec3(0.6, 0.0, 0.8)).norm() < 1e-7);

    // Too few unsaturated observations left: pixel invalid.
    const PhotometricResult clipped = solve_lambertian(pixelStack({0.6f, 1.0f, 0.8f, 1.0f}), lights);
    CHECK_FALSE(clipped.normals.valid[0]);
    CHECK(clipped.invalid_pixels == 1);
}

TEST_CASE("dark and masked pixels")
{
    ImageStack stack = make_stack({RasterImage(2, 1, 1), RasterImage(2, 1, 1), RasterImage(2, 1, 1)});
    stack.images[2].data = {0.0f, 0.5f};
    stack.mask.set(1, false);
    const PhotometricResult r = solve_lambertian(stack, identityLights());
    CHECK_FALSE(r.normals.valid[0]); // |m| = 0
    CHECK_FALSE(r.normals.valid[1]); // masked out
    CHECK(r.invalid_pixels == 1);
}

TEST_CASE("solver preconditions")
{
    const LightSet lights = identityLights();
    CHECK_THROWS_AS(solve_lambertian(pixelStack({0.1f, 0.2f}), lights), DataError);
    CHECK_THROWS_AS(solve_lambertian(pixelStack({0.1f, 0.2f, 0.3f, 0.4f}), lights), DataError);

    LightSet repeated = lights;
    repeated.directions = {Vec3::UnitZ(), Vec3::UnitZ(), Vec3::UnitZ()};
    CHECK_THROWS_WITH_AS(solve_lambertian(pixelStack({0.1f, 0.2f, 0.3f}), repeated), doctest::Contains("rank"),
                         DataError);

    ImageStack mismatched = pixelStack({0.1f, 0.2f, 0.3f});
    mismatched.images[1] = RasterImage(2, 1, 1);
    CHECK_THROWS_AS(solve_lambertian(mismatched, lights), DataError);
}

TEST_CASE("robust solve on clean data matches the plain solve")
{
    const oracle::SurfaceMaps truth = oracle::smooth_surface(32, 32, 13);
    const LightSet lights = oracle::dome_lights(20, 40.0);
    const ImageStack stack = synthesize_stack(truth.normals, truth.albedo, lights);
    const PhotometricResult plain = solve_lambertian(stack, lights);
    const PhotometricResult robust = solve_robust(stack, lights);
    const oracle::AngularStats diff = oracle::angular_error(robust.normals, plain.normals);
    CHECK(diff.count == truth.normals.pixel_count());
    CHECK(diff.max_deg < 1e-6 * 180.0 / 3.141592653589793);
}

TEST_CASE("robust solve rejects cast shadows")
{
    const oracle::SurfaceMaps truth = oracle::smooth_surface(48, 48, 17);
    const LightSet lights = oracle::dome_lights(20, 40.0);
    ImageStack stack = synthesize_stack(truth.normals, truth.albedo, lights);
    oracle::inject_shadows(stack, 0.15, 99);
    const double plain = oracle::angular_error(solve_lambertian(stack, lights).normals, truth.normals).mean_deg;
    const double robust = oracle::angular_error(solve_robust(stack, lights).normals, truth.normals).mean_deg;
    MESSAGE("plain " << plain << " deg, robust " << robust << " deg");
    CHECK(robust < 2.0);
    CHECK(robust < plain);
}

TEST_CASE("robust solve preconditions")
{
    const LightSet lights = oracle::dome_lights(4, 30.0);
    std::vector<RasterImage> images(4, RasterImage(2, 2, 1, 0.5f));
    CHECK_THROWS_WITH_AS(solve_robust(make_stack(images), lights), doctest::Contains("at least 6"), DataError);

    const LightSet six = oracle::dome_lights(6, 30.0);
    std::vector<RasterImage> sixImages(6, RasterImage(2, 2, 1, 0.5f));
    CHECK_THROWS_WITH_AS(solve_robust(make_stack(sixImages), six, {0.5, 0.45}),
                         doctest::Contains("insufficient observations after trim"), DataError);
    CHECK_THROWS_AS(solve_robust(make_stack(sixImages), six, {0.6, 0.5}), DataError);
}

TEST_CASE("RGB normal encoding")
{
    NormalField field(3, 1);
    field.normals = {Vec3::UnitZ(), Vec3::UnitX(), Vec3::Zero()};
    field.valid.set(0, true);
    field.valid.set(1, true);
    const RasterImage rgb = encode_normals_rgb(field);
    CHECK(rgb.at(0, 0, 0) == 0.5f);
    CHECK(rgb.at(0, 0, 1) == 0.5f);
    CHECK(rgb.at(0, 0, 2) == 1.0f);
    CHECK(rgb.at(0, 1, 0) == 1.0f);
    CHECK(rgb.at(0, 1, 1) == 0.5f);
    CHECK(rgb.at(0, 1, 2) == 0.5f);
    CHECK(rgb.at(0, 2, 0) == 0.0f);

    const DecodedNormals back = decode_normals_rgb(rgb);
    CHECK((back.field.normals[0] - Vec3::UnitZ()).norm() < 1e-7);
    CHECK(back.field.valid[1]);
    CHECK_FALSE(back.field.valid[2]);
    CHECK(back.corrupt_pixels == 0);

    RasterImage corrupt(1, 1, 3, 0.5f); // decodes to the zero vector
    const DecodedNormals bad = decode_normals_rgb(corrupt);
    CHECK_FALSE(bad.field.valid[0]);
    CHECK(bad.corrupt_pixels == 1);
    CHECK_THROWS_AS(decode_normals_rgb(RasterImage(1, 1, 1)), DataError);
}

TEST_CASE("normal encoding round-trips over a hemisphere grid")
{
    // Grid over the visible hemisphere.
    const int steps = 60;
    NormalField field(steps, steps);
    for (int i = 0; i < steps; ++i)
        for (int j = 0; j < steps; ++j)
        {
            const double theta = 89.0 * i / (steps - 1) * 3.141592653589793 / 180.0;
            const double phi = 360.0 * j / steps * 3.141592653589793 / 180.0;
            const std::size_t p = static_cast<std::size_t>(i) * steps + j;
            field.normals[p] = Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
            field.valid.set(p, true);
        }
    auto worstError = [&](const DecodedNormals& back) {
        double worst = 0.0;
        for (std::size_t p = 0; p < field.pixel_count(); ++p)
        {
            REQUIRE(back.field.valid[p]);
            worst = std::max(worst, (back.field.normals[p] - field.normals[p]).cwiseAbs().maxCoeff());
        }
        return worst;
    };
    CHECK(worstError(decode_normals_rgb(encode_normals_rgb(field))) <= 1.0 / 65535.0);

    // Through a png16 file: half a code in [0,1] is one code in [-1,1], and
    // renormalizing can stretch that by up to sqrt(3).
    const std::filesystem::path dir = oracle::scratch_dir("normals_rgb");
    save_map(encode_normals_rgb(field), dir / "n.png", MapFormat::png16);
    const double stored = worstError(decode_normals_rgb(load_image(dir / "n.png", Colorspace::linear)));
    MESSAGE("png16 worst component error " << stored * 65535.0 << " / 65535");
    CHECK(stored <= std::sqrt(3.0) / 65535.0);
}

TEST_CASE("encode is a fixed point after decode")
{
    std::mt19937 rng(5);
    std::normal_distribution<double> g;
    NormalField field(50, 1);
    for (std::size_t p = 0; p < 50; ++p)
    {
        Vec3 v(g(rng), g(rng), std::abs(g(rng)));
        field.normals[p] = v.normalized();
        field.valid.set(p, true);
    }
    const RasterImage once = encode_normals_rgb(field);
    const RasterImage twice = encode_normals_rgb(decode_normals_rgb(once).field);
    for (std::size_t i = 0; i < once.data.size(); ++i)
        CHECK(std::abs(once.data[i] - twice.data[i]) < 1e-6);
}

TEST_CASE("normal maps survive PFM storage")
{
    const oracle::SurfaceMaps truth = oracle::smooth_surface(8, 6, 3);
    NormalField field = truth.normals;
    field.valid.set(4, false);
    const std::filesystem::path dir = oracle::scratch_dir("normals_pfm");
    save_normals_pfm(field, dir / "n.pfm");
    const NormalField back = load_normals_pfm(dir / "n.pfm");
    CHECK_FALSE(back.valid[4]);
    CHECK(back.valid.count() == field.valid.count());
    CHECK(oracle::angular_error(back, field).max_deg < 1e-4);
}
