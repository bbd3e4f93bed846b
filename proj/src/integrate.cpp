#include "lumen3d/integrate.hpp"

#include "lumen3d/errors.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <queue>

namespace lumen3d {

namespace {

/// 4-connected component labels, -1 outside the support.
std::vector<int> labelComponents(const Mask& support, std::size_t& count)
{
    const int w = support.width;
    const int h = support.height;
    std::vector<int> label(support.pixel_count(), -1);
    count = 0;
    std::queue<std::size_t> frontier;
    for (std::size_t seed = 0; seed < label.size(); ++seed)
    {
        if (!support[seed] || label[seed] >= 0)
            continue;
        const int id = static_cast<int>(count++);
        label[seed] = id;
        frontier.push(seed);
        while (!frontier.empty())
        {
            const std::size_t p = frontier.front();
            frontier.pop();
            const int r = static_cast<int>(p / w);
            const int c = static_cast<int>(p % w);
            const int dr[] = {-1, 1, 0, 0};
            const int dc[] = {0, 0, -1, 1};
            for (int i = 0; i < 4; ++i)
            {
                const int rr = r + dr[i];
                const int cc = c + dc[i];
                if (rr < 0 || rr >= h || cc < 0 || cc >= w)
                    continue;
                const std::size_t q = static_cast<std::size_t>(rr) * w + cc;
                if (support[q] && label[q] < 0)
                {
                    label[q] = id;
                    frontier.push(q);
                }
            }
        }
    }
    return label;
}

struct ComponentSolve
{
    int iterations = 0;
    double residual = 0.0;
    bool converged = true;
};

/// Solves one component. Unknowns are the component's pixels except the first,
/// whose depth is pinned to zero; the mean is removed afterwards.
ComponentSolve solveComponent(const std::vector<std::size_t>& pixels, const std::vector<int>& label, int id,
                              int width, const std::vector<double>& p, const std::vector<double>& q,
                              const IntegrationOptions& options, std::vector<double>& depth)
{
    ComponentSolve out;
    const std::size_t n = pixels.size();
    if (n == 1)
    {
        depth[pixels[0]] = 0.0;
        return out;
    }

    std::vector<int> unknown(label.size(), -1);
    for (std::size_t i = 1; i < n; ++i)
        unknown[pixels[i]] = static_cast<int>(i - 1);

    // Each edge between neighbours a -> b contributes (z_b - z_a - g)^2 with g
    // the averaged gradient along the edge.
    const auto m = static_cast<Eigen::Index>(n - 1);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(5 * (n - 1));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    auto addEdge = [&](std::size_t a, std::size_t b, double g) {
        const int ia = unknown[a];
        const int ib = unknown[b];
        if (ia >= 0)
        {
            triplets.emplace_back(ia, ia, 1.0);
            rhs(ia) -= g;
        }
        if (ib >= 0)
        {
            triplets.emplace_back(ib, ib, 1.0);
            rhs(ib) += g;
        }
        if (ia >= 0 && ib >= 0)
        {
            triplets.emplace_back(ia, ib, -1.0);
            triplets.emplace_back(ib, ia, -1.0);
        }
    };
    for (std::size_t a : pixels)
    {
        const std::size_t right = a + 1;
        if ((a % width) + 1 < static_cast<std::size_t>(width) && label[right] == id)
            addEdge(a, right, 0.5 * (p[a] + p[right])); // x grows with col
        if (a >= static_cast<std::size_t>(width))
        {
            const std::size_t up = a - width; // one row up is +1 in y
            if (label[up] == id)
                addEdge(a, up, 0.5 * (q[a] + q[up]));
        }
    }

    Eigen::SparseMatrix<double> laplacian(m, m);
    laplacian.setFromTriplets(triplets.begin(), triplets.end());

    Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
    const double rhsNorm = rhs.norm();
    if (rhsNorm > 0.0)
    {
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                 Eigen::IncompleteCholesky<double>>
            cg;
        cg.setTolerance(options.tolerance);
        cg.setMaxIterations(std::max(10, static_cast<int>(std::ceil(10.0 * std::sqrt(static_cast<double>(n))))));
        cg.compute(laplacian);
        if (cg.info() != Eigen::Success)
            throw DataError("integration preconditioner failed");
        z = cg.solve(rhs);
        out.iterations = static_cast<int>(cg.iterations());
        out.residual = (rhs - laplacian * z).norm() / rhsNorm;
        out.converged = out.residual <= options.tolerance;
    }

    depth[pixels[0]] = 0.0;
    for (std::size_t i = 1; i < n; ++i)
        depth[pixels[i]] = z(static_cast<Eigen::Index>(i - 1));
    double mean = 0.0;
    for (std::size_t px : pixels)
        mean += depth[px];
    mean /= static_cast<double>(n);
    for (std::size_t px : pixels)
        depth[px] -= mean;
    return out;
}

} // namespace

IntegrationResult integrate_normals(const NormalField& normals, const Mask& region, const IntegrationOptions& options)
{
    if (region.width != normals.width || region.height != normals.height)
        throw DataError("integration region does not match the normal field dimensions");

    const int width = normals.width;
    IntegrationResult out;
    Mask support(width, normals.height, false);
    std::vector<double> p(normals.pixel_count(), 0.0);
    std::vector<double> q(normals.pixel_count(), 0.0);
    for (std::size_t i = 0; i < normals.pixel_count(); ++i)
    {
        if (!region[i])
            continue;
        const Vec3& n = normals.normals[i];
        if (!normals.valid[i] || n.z() < options.min_normal_z)
        {
            ++out.excluded_pixels;
            continue;
        }
        support.set(i, true);
        p[i] = -n.x() / n.z();
        q[i] = -n.y() / n.z();
    }
    if (support.count() == 0)
        throw DataError("integration region is empty");
    if (out.excluded_pixels > 0)
        out.warnings.push_back(std::to_string(out.excluded_pixels) +
                               " region pixels excluded (invalid or grazing normals)");

    const std::vector<int> label = labelComponents(support, out.components);
    if (out.components > 1)
        out.warnings.push_back("region has " + std::to_string(out.components) +
                               " disconnected components; each is integrated independently with zero mean");

    std::vector<std::vector<std::size_t>> members(out.components);
    for (std::size_t i = 0; i < label.size(); ++i)
        if (label[i] >= 0)
            members[label[i]].push_back(i);

    out.depth.width = width;
    out.depth.height = normals.height;
    out.depth.depth.assign(normals.pixel_count(), 0.0);
    out.depth.valid = support;
    for (std::size_t id = 0; id < out.components; ++id)
    {
        const ComponentSolve s =
            solveComponent(members[id], label, static_cast<int>(id), width, p, q, options, out.depth.depth);
        out.iterations = std::max(out.iterations, s.iterations);
        out.relative_residual = std::max(out.relative_residual, s.residual);
        if (!s.converged)
            out.warnings.push_back("component " + std::to_string(id) + " stopped at relative residual " +
                                   std::to_string(s.residual) + " (iteration cap reached)");
    }
    return out;
}

MeshStats export_mesh(const DepthMap& depth, const AlbedoMap& albedo, const std::filesystem::path& path)
{
    if (albedo.rho.width != depth.width || albedo.rho.height != depth.height)
        throw DataError("depth and albedo dimensions differ");
    const bool albedoMasked = albedo.valid.pixel_count() == depth.pixel_count();
    const int w = depth.width;
    const int h = depth.height;
    const double pitch = depth.pixel_pitch.value_or(1.0);

    std::vector<long> vertexId(depth.pixel_count(), -1);
    MeshStats stats;
    for (std::size_t i = 0; i < depth.pixel_count(); ++i)
        if (depth.valid[i] && (!albedoMasked || albedo.valid[i]))
            vertexId[i] = static_cast<long>(stats.vertices++);
    if (stats.vertices == 0)
        throw DataError("depth map has no valid pixels to export");

    std::vector<std::array<long, 3>> faces;
    for (int r = 0; r + 1 < h; ++r)
        for (int c = 0; c + 1 < w; ++c)
        {
            const long tl = vertexId[static_cast<std::size_t>(r) * w + c];
            const long tr = vertexId[static_cast<std::size_t>(r) * w + c + 1];
            const long bl = vertexId[static_cast<std::size_t>(r + 1) * w + c];
            const long br = vertexId[static_cast<std::size_t>(r + 1) * w + c + 1];
            if (tl < 0 || tr < 0 || bl < 0 || br < 0)
                continue;
            // Counter-clockwise seen from +z.
            faces.push_back({tl, bl, br});
            faces.push_back({tl, br, tr});
        }
    stats.triangles = faces.size();

    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write mesh '" + path.string() + "'");
    out << "ply\nformat ascii 1.0\ncomment lumen3d height field\n"
        << "element vertex " << stats.vertices << "\nproperty float x\nproperty float y\nproperty float z\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        << "element face " << stats.triangles << "\nproperty list uchar int vertex_indices\nend_header\n";

    const int channels = albedo.rho.channels;
    char line[160];
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
        {
            const std::size_t i = static_cast<std::size_t>(r) * w + c;
            if (vertexId[i] < 0)
                continue;
            int rgb[3];
            for (int k = 0; k < 3; ++k)
            {
                const double v = albedo.rho.data[i * channels + (channels == 3 ? k : 0)];
                rgb[k] = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            }
            std::snprintf(line, sizeof line, "%.9g %.9g %.9g %d %d %d\n", pitch * pixel_x(c),
                          pitch * pixel_y(r, h), pitch * depth.depth[i], rgb[0], rgb[1], rgb[2]);
            out << line;
        }
    for (const auto& f : faces)
        out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    if (!out)
        throw DataError("failed writing mesh '" + path.string() + "'");
    return stats;
}

void save_depth_pfm(const DepthMap& depth, const std::filesystem::path& path)
{
    RasterImage raster(depth.width, depth.height, 1);
    for (std::size_t i = 0; i < depth.pixel_count(); ++i)
        if (depth.valid[i])
            raster.data[i] = static_cast<float>(depth.depth[i]);
    write_pfm(raster, path);
}

} // namespace lumen3d
