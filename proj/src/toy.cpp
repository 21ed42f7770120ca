#include "meshvae/toy.hpp"

#include "meshvae/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

namespace meshvae::toy {

namespace {

constexpr double pi = std::numbers::pi;

VertexId vid(std::size_t i) { return static_cast<VertexId>(i); }

// Quad strip between two rows of a periodic grid.
void tube_faces(std::vector<Face>& faces, std::size_t rows, std::size_t cols, bool wrap_rows)
{
    const std::size_t row_pairs = wrap_rows ? rows : rows - 1;
    for (std::size_t r = 0; r < row_pairs; ++r) {
        const std::size_t r1 = (r + 1) % rows;
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t c1 = (c + 1) % cols;
            const auto a = vid(r * cols + c), b = vid(r * cols + c1);
            const auto d = vid(r1 * cols + c), e = vid(r1 * cols + c1);
            faces.push_back({a, b, e});
            faces.push_back({a, e, d});
        }
    }
}

} // namespace

Mesh icosphere(unsigned subdivisions)
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh m;
    m.positions = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                   {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
               {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (auto& p : m.positions)
        p.normalize();
    for (unsigned s = 0; s < subdivisions; ++s) {
        std::map<std::pair<VertexId, VertexId>, VertexId> mid;
        auto midpoint = [&](VertexId a, VertexId b) {
            auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end())
                return it->second;
            const auto id = vid(m.positions.size());
            m.positions.push_back((m.positions[a] + m.positions[b]).normalized());
            mid.emplace(key, id);
            return id;
        };
        std::vector<Face> next;
        for (const auto& f : m.faces) {
            const auto ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.faces = std::move(next);
    }
    return m;
}

Mesh open_cylinder(std::size_t rings, std::size_t segments, double radius, double height)
{
    if (rings < 2 || segments < 3)
        throw InputError("cylinder needs at least 2 rings and 3 segments");
    Mesh m;
    for (std::size_t r = 0; r < rings; ++r) {
        const double z = -0.5 * height + height * static_cast<double>(r) / static_cast<double>(rings - 1);
        for (std::size_t s = 0; s < segments; ++s) {
            // stagger alternate rings for better-shaped triangles
            const double a = 2.0 * pi * (static_cast<double>(s) + 0.5 * static_cast<double>(r % 2)) /
                             static_cast<double>(segments);
            m.positions.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
        }
    }
    tube_faces(m.faces, rings, segments, false);
    return m;
}

Mesh torus(std::size_t major, std::size_t minor, double major_radius, double minor_radius)
{
    if (major < 3 || minor < 3)
        throw InputError("torus needs at least 3 segments each way");
    Mesh m;
    for (std::size_t i = 0; i < major; ++i) {
        const double u = 2.0 * pi * static_cast<double>(i) / static_cast<double>(major);
        for (std::size_t j = 0; j < minor; ++j) {
            const double v = 2.0 * pi * static_cast<double>(j) / static_cast<double>(minor);
            const double rho = major_radius + minor_radius * std::cos(v);
            m.positions.emplace_back(rho * std::cos(u), rho * std::sin(u), minor_radius * std::sin(v));
        }
    }
    tube_faces(m.faces, major, minor, true);
    return m;
}

Mesh graded_grid(std::size_t n, double ratio)
{
    if (n < 3)
        throw InputError("graded grid needs n >= 3");
    std::vector<double> coord(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        coord[i] = coord[i - 1] + std::pow(ratio, static_cast<double>(i - 1) / static_cast<double>(n - 2));
    Mesh m;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m.positions.emplace_back(coord[j], coord[i], 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = 0; j + 1 < n; ++j) {
            const auto a = vid(i * n + j), b = vid(i * n + j + 1), c = vid((i + 1) * n + j), d = vid((i + 1) * n + j + 1);
            m.faces.push_back({a, b, d});
            m.faces.push_back({a, d, c});
        }
    return m;
}

Mesh tetrahedron()
{
    Mesh m;
    m.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    m.faces = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    return m;
}

std::vector<Vec3> pose_tube(const Mesh& tube, const TubePose& pose)
{
    const Vec3 dir(std::cos(pose.bend_angle), std::sin(pose.bend_angle), 0.0);
    const Vec3 side(-dir.y(), dir.x(), 0.0);
    std::vector<Vec3> out;
    out.reserve(tube.positions.size());
    for (const auto& p0 : tube.positions) {
        double z = p0.z() * pose.stretch;
        const double tw = pose.twist * p0.z();
        Vec3 q(pose.bulge * (std::cos(tw) * p0.x() - std::sin(tw) * p0.y()),
               pose.bulge * (std::sin(tw) * p0.x() + std::cos(tw) * p0.y()), z);
        q.x() += pose.shear * z;
        if (std::abs(pose.curvature) > 1e-12) {
            const double u = q.dot(dir);
            const double w = q.dot(side);
            const double rad = 1.0 / pose.curvature;
            const double th = pose.curvature * z;
            q = side * w + dir * (rad - (rad - u) * std::cos(th)) + Vec3::UnitZ() * ((rad - u) * std::sin(th));
        }
        out.push_back(q);
    }
    return out;
}

Dataset bent_cylinders(std::size_t count, std::uint64_t seed)
{
    if (count == 0)
        throw InputError("dataset needs at least one shape");
    Dataset d;
    d.base = open_cylinder(20, 25);
    d.shapes.push_back(d.base);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 1; i < count; ++i) {
        TubePose p;
        p.curvature = 0.1 + 0.5 * u(rng);
        p.bend_angle = 2.0 * pi * u(rng);
        p.twist = 0.3 * (2.0 * u(rng) - 1.0);
        p.stretch = 0.85 + 0.3 * u(rng);
        p.bulge = 0.9 + 0.2 * u(rng);
        p.shear = 0.15 * (2.0 * u(rng) - 1.0);
        Mesh m = d.base;
        m.positions = pose_tube(d.base, p);
        d.shapes.push_back(std::move(m));
    }
    return d;
}

Dataset rotating_bar(std::size_t frames)
{
    if (frames == 0)
        throw InputError("need at least one frame");
    Dataset d;
    Mesh bar = open_cylinder(10, 8, 0.3, 3.0);
    for (auto& p : bar.positions) // lay along x
        p = Vec3(p.z(), p.y(), -p.x());
    d.base = bar;
    for (std::size_t f = 0; f < frames; ++f) {
        const double a = 2.0 * pi * static_cast<double>(f) / static_cast<double>(frames);
        const Eigen::Matrix3d r = Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
        Mesh m = bar;
        for (auto& p : m.positions)
            p = r * p;
        d.shapes.push_back(std::move(m));
    }
    return d;
}

Dataset two_class(std::size_t per_class, std::uint64_t seed)
{
    if (per_class == 0)
        throw InputError("need at least one shape per class");
    Dataset d;
    d.base = open_cylinder(12, 12, 0.5, 3.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < per_class; ++i)
        for (std::size_t cls = 0; cls < 2; ++cls) {
            TubePose p;
            const double amount = 0.3 + 0.7 * u(rng);
            if (cls == 0) {
                p.curvature = 0.6 * amount;
            } else {
                p.twist = 0.8 * amount;
                p.bulge = 1.0 + 0.3 * amount;
            }
            Mesh m = d.base;
            m.positions = pose_tube(d.base, p);
            d.shapes.push_back(std::move(m));
            d.labels.push_back(cls);
        }
    return d;
}

std::vector<std::string> write_dataset(const std::filesystem::path& dir, const Dataset& data)
{
    std::filesystem::create_directories(dir);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < data.shapes.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "shape_%03zu.obj", i);
        save_obj(dir / name, data.shapes[i]);
        names.emplace_back(name);
    }
    if (!data.labels.empty()) {
        std::ofstream out(dir / "labels.txt");
        for (std::size_t i = 0; i < names.size(); ++i)
            out << names[i] << '\t' << data.labels[i] << '\n';
        if (!out)
            throw InputError("cannot write " + (dir / "labels.txt").string());
    }
    return names;
}

} // namespace meshvae::toy
