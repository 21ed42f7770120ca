#pragma once

#include "meshvae/sparse.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace meshvae {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VertexId = std::uint32_t;
using Face = std::array<VertexId, 3>;
using Edge = std::pair<VertexId, VertexId>; // first < second

/// Triangle mesh. Every shape of a dataset shares `faces`; only positions vary.
struct Mesh {
    std::vector<Vec3> positions;
    std::vector<Face> faces;

    std::size_t vertex_count() const { return positions.size(); }
    std::size_t face_count() const { return faces.size(); }

    bool operator==(const Mesh&) const = default;
};

/// Reads Wavefront OBJ `v` and `f` records. Texture/normal references after
/// slashes are dropped, negative indices resolve against the vertices read so
/// far, and non-triangular faces are rejected. Throws InputError.
Mesh parse_obj(std::istream& in);
Mesh read_obj(const std::filesystem::path& path);

/// Positions are printed with 17 significant digits so they round-trip.
void write_obj(std::ostream& out, const Mesh& mesh);
void save_obj(const std::filesystem::path& path, const Mesh& mesh);

/// Index range and degenerate-face checks. Throws InputError.
void validate_mesh(const Mesh& mesh);

struct ConnectivityReport {
    bool ok = true;
    std::optional<std::size_t> face; // first differing face, when counts agree
    std::string message;

    explicit operator bool() const { return ok; }
};

ConnectivityReport validate_same_connectivity(const Mesh& reference, const Mesh& other);

struct Adjacency {
    std::vector<Edge> edges;                     // sorted, unique
    std::vector<std::vector<VertexId>> one_rings; // each sorted ascending
    std::vector<std::uint32_t> degrees;

    std::size_t vertex_count() const { return one_rings.size(); }
    bool operator==(const Adjacency&) const = default;
};

/// Throws InputError naming the edge when an edge has more than two faces.
Adjacency build_adjacency(const Mesh& mesh);

/// I - D^{-1/2} A D^{-1/2} with unit edge weights. Throws InputError for an
/// isolated vertex; logs a warning for a disconnected graph.
SparseMatrix normalized_laplacian(const Adjacency& adj);

/// Largest eigenvalue by power iteration (200 iterations, relative residual
/// 1e-8). Returns the spectral bound 2 when the iteration does not converge
/// or the matrix annihilates the start vector.
double estimate_lambda_max(const SparseMatrix& laplacian);

double bounding_box_diagonal(std::span<const Vec3> positions);

} // namespace meshvae
