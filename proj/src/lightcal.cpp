#include "lumen3d/lightcal.hpp"

#include "lumen3d/errors.hpp"
#include "lumen3d/parallel.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>

namespace lumen3d {

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr double kRenormalizeTolerance = 1e-3;
constexpr double kRankTolerance = 1e-3;
constexpr double kHighlightPercentile = 0.995;
constexpr double kSaturationLevel = 0.995;
constexpr double kSaturatedDiskFraction = 0.20;
constexpr double kMatteIncidenceGate = 0.2;
constexpr std::size_t kMinMattePixels = 50;

double angleDeg(const Vec3& a, const Vec3& b)
{
    return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / std::numbers::pi;
}

} // namespace

void LightSet::validate() const
{
    if (directions.size() != intensities.size())
        throw DataError("light set has " + std::to_string(directions.size()) + " directions but " +
                        std::to_string(intensities.size()) + " intensities");
    for (std::size_t j = 0; j < directions.size(); ++j)
    {
        if (!directions[j].allFinite() || std::abs(directions[j].norm() - 1.0) > kUnitTolerance)
            throw DataError("light " + std::to_string(j) + " direction is not a unit vector");
        if (!std::isfinite(intensities[j]) || intensities[j] <= 0.0)
            throw DataError("light " + std::to_string(j) + " intensity must be positive");
    }
}

Eigen::MatrixXd LightSet::scaled_matrix() const
{
    Eigen::MatrixXd s(static_cast<Eigen::Index>(size()), 3);
    for (std::size_t j = 0; j < size(); ++j)
        s.row(static_cast<Eigen::Index>(j)) = intensities[j] * directions[j].transpose();
    return s;
}

double direction_conditioning(const LightSet& lights)
{
    if (lights.size() < 3)
        return 0.0;
    Eigen::MatrixXd d(static_cast<Eigen::Index>(lights.size()), 3);
    for (std::size_t j = 0; j < lights.size(); ++j)
        d.row(static_cast<Eigen::Index>(j)) = lights.directions[j].transpose();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
    const auto& sv = svd.singularValues();
    return sv(0) > 0.0 ? sv(2) / sv(0) : 0.0;
}

bool has_rank3(const LightSet& lights) { return direction_conditioning(lights) > kRankTolerance; }

void require_rank3(const LightSet& lights)
{
    if (!has_rank3(lights))
        throw DataError("light directions are rank-deficient (coplanar or repeated); photometric stereo needs "
                        "three non-coplanar lights");
}

bool SphereAnnotation::contains(double r, double c) const
{
    const double dr = r - row;
    const double dc = c - col;
    return dr * dr + dc * dc <= radius * radius;
}

Vec3 SphereAnnotation::normal_at(double r, double c) const
{
    const double nx = (c - col) / radius;
    const double ny = (row - r) / radius;
    return {nx, ny, std::sqrt(std::max(0.0, 1.0 - nx * nx - ny * ny))};
}

void SphereAnnotation::check_inside(int width, int height) const
{
    if (!(radius > 0.0))
        throw DataError("sphere radius must be positive");
    if (row - radius < -0.5 || col - radius < -0.5 || row + radius > height - 0.5 || col + radius > width - 0.5)
        throw DataError("sphere disk at (" + std::to_string(row) + ", " + std::to_string(col) + ") radius " +
                        std::to_string(radius) + " extends outside the image");
}

namespace {

template <typename Fn>
void forEachDiskPixel(const SphereAnnotation& sphere, int width, int height, Fn&& fn)
{
    const int r0 = std::max(0, static_cast<int>(std::floor(sphere.row - sphere.radius)));
    const int r1 = std::min(height - 1, static_cast<int>(std::ceil(sphere.row + sphere.radius)));
    const int c0 = std::max(0, static_cast<int>(std::floor(sphere.col - sphere.radius)));
    const int c1 = std::min(width - 1, static_cast<int>(std::ceil(sphere.col + sphere.radius)));
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c)
            if (sphere.contains(r, c))
                fn(r, c);
}

} // namespace

HighlightEstimate estimate_direction_from_specular_sphere(const RasterImage& image, const SphereAnnotation& sphere)
{
    sphere.check_inside(image.width, image.height);

    struct Sample
    {
        int row;
        int col;
        double value;
    };
    std::vector<Sample> samples;
    std::size_t clipped = 0;
    forEachDiskPixel(sphere, image.width, image.height, [&](int r, int c) {
        const std::size_t p = static_cast<std::size_t>(r) * image.width + c;
        samples.push_back({r, c, image.luminance(p)});
        if (image.channel_max(p) >= kSaturationLevel)
            ++clipped;
    });
    if (samples.empty())
        throw DataError("sphere disk contains no pixels");

    std::vector<double> values(samples.size());
    std::transform(samples.begin(), samples.end(), values.begin(), [](const Sample& s) { return s.value; });
    const std::size_t rank = static_cast<std::size_t>(std::ceil(kHighlightPercentile * values.size())) - 1;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank), values.end());
    const double threshold = values[rank];

    double weight = 0.0;
    double sumRow = 0.0;
    double sumCol = 0.0;
    HighlightEstimate out;
    for (const Sample& s : samples)
    {
        if (s.value >= threshold && s.value > 0.0)
        {
            weight += s.value;
            sumRow += s.value * s.row;
            sumCol += s.value * s.col;
            ++out.highlight_pixels;
        }
    }
    if (out.highlight_pixels == 0 || weight <= 0.0)
        throw DataError("no specular highlight found on sphere");

    out.row = sumRow / weight;
    out.col = sumCol / weight;
    if (!sphere.contains(out.row, out.col))
        throw DataError("highlight centroid lies outside the sphere disk");
    out.saturated = static_cast<double>(clipped) > kSaturatedDiskFraction * static_cast<double>(samples.size());

    const Vec3 n = sphere.normal_at(out.row, out.col);
    const Vec3 view = Vec3::UnitZ();
    out.direction = (2.0 * n.dot(view) * n - view).normalized();
    return out;
}

double estimate_intensity_from_matte_sphere(const RasterImage& image, const SphereAnnotation& sphere,
                                            const Vec3& direction)
{
    sphere.check_inside(image.width, image.height);
    double num = 0.0;
    double den = 0.0;
    std::size_t used = 0;
    forEachDiskPixel(sphere, image.width, image.height, [&](int r, int c) {
        const double shading = sphere.normal_at(r, c).dot(direction);
        const std::size_t p = static_cast<std::size_t>(r) * image.width + c;
        if (shading <= kMatteIncidenceGate || image.channel_max(p) >= kSaturationLevel)
            return;
        num += image.luminance(p) * shading;
        den += shading * shading;
        ++used;
    });
    if (used < kMinMattePixels)
        throw DataError("fewer than 50 usable pixels on the matte sphere (" + std::to_string(used) + ")");
    const double phi = num / den;
    if (!(phi > 0.0))
        throw DataError("matte sphere intensity estimate is not positive");
    return phi;
}

Calibration calibrate_from_spheres(const ImageStack& stack, std::span<const SphereAnnotation> spheres)
{
    stack.validate(3);
    const bool anySpecular = std::any_of(spheres.begin(), spheres.end(),
                                         [](const SphereAnnotation& s) { return s.finish == SphereFinish::specular; });
    if (!anySpecular)
        throw DataError("light calibration needs at least one specular sphere");
    for (const SphereAnnotation& s : spheres)
        s.check_inside(stack.width(), stack.height());
    const bool anyMatte = std::any_of(spheres.begin(), spheres.end(),
                                      [](const SphereAnnotation& s) { return s.finish == SphereFinish::matte; });

    const std::size_t k = stack.size();
    std::vector<Vec3> directions(k);
    std::vector<double> intensities(k, 1.0);
    std::vector<std::vector<SphereMeasurement>> perImage(k);
    std::vector<std::optional<std::string>> failures(k);

    parallel_for(k, [&](std::size_t j) {
        try
        {
            const RasterImage& image = stack.images[j];
            Vec3 sum = Vec3::Zero();
            for (std::size_t s = 0; s < spheres.size(); ++s)
            {
                if (spheres[s].finish != SphereFinish::specular)
                    continue;
                const HighlightEstimate h = estimate_direction_from_specular_sphere(image, spheres[s]);
                SphereMeasurement m;
                m.image = j;
                m.sphere = s;
                m.finish = SphereFinish::specular;
                m.direction = h.direction;
                m.saturated = h.saturated;
                perImage[j].push_back(m);
                sum += h.direction;
            }
            if (sum.norm() == 0.0)
                throw DataError("sphere directions cancel out");
            directions[j] = sum.normalized();

            double phiSum = 0.0;
            int phiCount = 0;
            for (std::size_t s = 0; s < spheres.size(); ++s)
            {
                if (spheres[s].finish != SphereFinish::matte)
                    continue;
                SphereMeasurement m;
                m.image = j;
                m.sphere = s;
                m.finish = SphereFinish::matte;
                m.intensity = estimate_intensity_from_matte_sphere(image, spheres[s], directions[j]);
                perImage[j].push_back(m);
                phiSum += m.intensity;
                ++phiCount;
            }
            if (phiCount > 0)
                intensities[j] = phiSum / phiCount;

            for (SphereMeasurement& m : perImage[j])
                if (m.finish == SphereFinish::specular)
                    m.residual_deg = angleDeg(m.direction, directions[j]);
        }
        catch (const Error& e)
        {
            failures[j] = e.what();
        }
    });

    for (std::size_t j = 0; j < k; ++j)
        if (failures[j])
            throw DataError("image " + std::to_string(j) + ": " + *failures[j]);

    Calibration out;
    out.lights.directions = std::move(directions);
    out.lights.intensities = std::move(intensities);
    for (auto& list : perImage)
        for (SphereMeasurement& m : list)
        {
            if (m.saturated)
                out.warnings.push_back("image " + std::to_string(m.image) + ", sphere " + std::to_string(m.sphere) +
                                       ": clipped region exceeds 20% of the disk");
            out.measurements.push_back(m);
        }
    if (!anyMatte)
        out.warnings.push_back("no matte sphere annotated; all light intensities set to 1.0");
    require_rank3(out.lights);
    return out;
}

namespace {

Vec3 parseDirection(const nlohmann::json& value, const std::string& where)
{
    if (!value.is_array() || value.size() != 3)
        throw ConfigError(where + ": \"dir\" must be an array of three numbers");
    Vec3 d;
    for (int i = 0; i < 3; ++i)
    {
        if (!value[i].is_number())
            throw ConfigError(where + ": \"dir\" must be an array of three numbers");
        d(i) = value[i].get<double>();
    }
    return d;
}

} // namespace

LightSet parse_dome_manifest(const nlohmann::json& manifest)
{
    if (!manifest.is_object() || !manifest.contains("dome_id") || !manifest["dome_id"].is_string() ||
        !manifest.contains("leds") || !manifest["leds"].is_array())
        throw ConfigError("dome manifest must be an object with a string \"dome_id\" and a \"leds\" array");
    const auto& leds = manifest["leds"];
    if (manifest.contains("led_count") &&
        (!manifest["led_count"].is_number_integer() || manifest["led_count"].get<std::size_t>() != leds.size()))
        throw ConfigError("dome manifest \"led_count\" does not match the number of LED entries");
    if (leds.empty())
        throw ConfigError("dome manifest lists no LEDs");

    LightSet lights;
    for (std::size_t i = 0; i < leds.size(); ++i)
    {
        const std::string where = "LED " + std::to_string(i);
        const auto& led = leds[i];
        if (!led.is_object() || !led.contains("dir") || !led.contains("intensity") || !led["intensity"].is_number())
            throw ConfigError(where + ": expected {\"dir\": [x,y,z], \"intensity\": number}");
        Vec3 d = parseDirection(led["dir"], where);
        const double norm = d.norm();
        if (std::abs(norm - 1.0) > kRenormalizeTolerance)
            throw DataError(where + ": direction norm " + std::to_string(norm) + " is not unit (tolerance 1e-3)");
        if (std::abs(norm - 1.0) > kUnitTolerance)
            d /= norm;
        if (d.z() <= 0.0)
            throw DataError(where + ": direction must lie in the upper hemisphere");
        const double intensity = led["intensity"].get<double>();
        if (!(intensity > 0.0))
            throw DataError(where + ": intensity must be positive");
        lights.directions.push_back(d);
        lights.intensities.push_back(intensity);
    }
    return lights;
}

LightSet load_dome_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open dome manifest '" + path.string() + "'");
    nlohmann::json doc;
    try
    {
        doc = nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError("dome manifest '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_dome_manifest(doc);
}

nlohmann::json lights_to_json(const LightSet& lights)
{
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t j = 0; j < lights.size(); ++j)
    {
        const Vec3& d = lights.directions[j];
        list.push_back({{"dir", {d.x(), d.y(), d.z()}}, {"intensity", lights.intensities[j]}});
    }
    return {{"lights", list}};
}

LightSet lights_from_json(const nlohmann::json& doc)
{
    if (!doc.is_object() || !doc.contains("lights") || !doc["lights"].is_array())
        throw ConfigError("light file must be an object with a \"lights\" array");
    LightSet lights;
    for (std::size_t i = 0; i < doc["lights"].size(); ++i)
    {
        const auto& entry = doc["lights"][i];
        const std::string where = "light " + std::to_string(i);
        if (!entry.is_object() || !entry.contains("dir") || !entry.contains("intensity") ||
            !entry["intensity"].is_number())
            throw ConfigError(where + ": expected {\"dir\": [x,y,z], \"intensity\": number}");
        lights.directions.push_back(parseDirection(entry["dir"], where));
        lights.intensities.push_back(entry["intensity"].get<double>());
    }
    lights.validate();
    return lights;
}

std::vector<SphereAnnotation> spheres_from_json(const nlohmann::json& doc)
{
    if (!doc.is_array())
        throw ConfigError("sphere annotations must be a JSON array");
    std::vector<SphereAnnotation> spheres;
    for (std::size_t i = 0; i < doc.size(); ++i)
    {
        const auto& s = doc[i];
        const std::string where = "sphere " + std::to_string(i);
        if (!s.is_object() || !s.contains("center") || !s["center"].is_array() || s["center"].size() != 2 ||
            !s["center"][0].is_number() || !s["center"][1].is_number() || !s.contains("radius") ||
            !s["radius"].is_number() || !s.contains("finish") || !s["finish"].is_string())
            throw ConfigError(where + ": expected {\"center\": [row, col], \"radius\": r, \"finish\": "
                                      "\"specular\"|\"matte\"}");
        SphereAnnotation a;
        a.row = s["center"][0].get<double>();
        a.col = s["center"][1].get<double>();
        a.radius = s["radius"].get<double>();
        const std::string finish = s["finish"].get<std::string>();
        if (finish == "specular")
            a.finish = SphereFinish::specular;
        else if (finish == "matte")
            a.finish = SphereFinish::matte;
        else
            throw ConfigError(where + ": unknown finish '" + finish + "'");
        if (!(a.radius > 0.0))
            throw ConfigError(where + ": radius must be positive");
        spheres.push_back(a);
    }
    return spheres;
}

} // namespace lumen3d
