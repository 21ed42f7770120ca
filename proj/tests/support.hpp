#pragma once

// Shared fixtures for the test binaries: seeded generators, random meshes,
// finite differences.

#include "meshvae/mesh.hpp"
#include "meshvae/sparse.hpp"
#include "meshvae/toy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>

namespace testing {

using meshvae::DenseMatrix;
using meshvae::Mat3;
using meshvae::Mesh;
using meshvae::Vec3;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_); }

    DenseMatrix matrix(Eigen::Index rows, Eigen::Index cols, double scale = 1.0)
    {
        DenseMatrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m.data()[i] = scale * uniform();
        return m;
    }
    Mat3 mat3(double scale = 1.0)
    {
        Mat3 m;
        for (int i = 0; i < 9; ++i)
            m.data()[i] = scale * uniform();
        return m;
    }
    Vec3 vec3(double scale = 1.0) { return {scale * uniform(), scale * uniform(), scale * uniform()}; }
    Mat3 rotation()
    {
        Eigen::Quaterniond q(normal(), normal(), normal(), normal());
        return q.normalized().toRotationMatrix();
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

/// Tube with every vertex jittered: a closed-ring, open-ended mesh.
inline Mesh jittered_tube(std::size_t rings, std::size_t segments, std::uint64_t seed, double jitter = 0.05)
{
    Mesh m = meshvae::toy::open_cylinder(rings, segments, 0.5, 1.5);
    Rng rng(seed);
    for (auto& p : m.positions)
        p += rng.vec3(jitter);
    return m;
}

/// Ring plus random chords, so always connected.
inline meshvae::Adjacency random_graph(Rng& rng, std::size_t n, double p)
{
    std::set<meshvae::Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        meshvae::VertexId a = static_cast<meshvae::VertexId>(i), b = static_cast<meshvae::VertexId>((i + 1) % n);
        edges.insert({std::min(a, b), std::max(a, b)});
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 2; j < n; ++j)
            if (rng.uniform(0, 1) < p)
                edges.insert({static_cast<meshvae::VertexId>(i), static_cast<meshvae::VertexId>(j)});
    meshvae::Adjacency adj;
    adj.edges.assign(edges.begin(), edges.end());
    adj.one_rings.resize(n);
    for (auto [a, b] : adj.edges) {
        adj.one_rings[a].push_back(b);
        adj.one_rings[b].push_back(a);
    }
    for (auto& r : adj.one_rings) {
        std::sort(r.begin(), r.end());
        adj.degrees.push_back(static_cast<std::uint32_t>(r.size()));
    }
    return adj;
}

/// Central difference of f along every entry of x; restores x.
inline DenseMatrix numeric_gradient(DenseMatrix& x, const std::function<double()>& f, double step = 1e-5)
{
    DenseMatrix g(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double keep = x.data()[i];
        x.data()[i] = keep + step;
        const double up = f();
        x.data()[i] = keep - step;
        const double down = f();
        x.data()[i] = keep;
        g.data()[i] = (up - down) / (2.0 * step);
    }
    return g;
}

/// Largest elementwise |a - n| / max(|a|, |n|, floor).
inline double max_relative_error(const DenseMatrix& analytic, const DenseMatrix& numeric, double floor = 1e-4)
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double a = analytic.data()[i], n = numeric.data()[i];
        worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}));
    }
    return worst;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("meshvae_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline bool bit_equal(const DenseMatrix& a, const DenseMatrix& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

} // namespace testing
