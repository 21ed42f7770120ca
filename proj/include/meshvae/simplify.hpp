#pragma once

// Edge-contraction simplification driven by the quadric error metric plus a
// penalty on the longest edge created around the new vertex, and the
// multi-level hierarchy built from it.

#include "meshvae/mesh.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace meshvae {

/// Symmetric 4x4 error quadric stored as its 10 upper-triangular coefficients
/// (row-major: aa ab ac ad bb bc bd cc cd dd).
struct Quadric {
    std::array<double, 10> coeffs{};

    static Quadric from_plane(double a, double b, double c, double d);

    Quadric& operator+=(const Quadric& other);
    friend Quadric operator+(Quadric lhs, const Quadric& rhs) { return lhs += rhs; }

    /// vᵀQv for v = (p, 1).
    double error(const Vec3& p) const;
    Eigen::Matrix4d matrix() const;

    bool operator==(const Quadric&) const = default;
};

/// Plane quadric of a triangle, or nullopt when the triangle has no area.
std::optional<Quadric> face_quadric(const Vec3& a, const Vec3& b, const Vec3& c);

/// Sum of the plane quadrics of the faces incident to `vertex`. Zero-area
/// faces contribute nothing and are reported through log::warn.
Quadric vertex_quadric(const Mesh& mesh, VertexId vertex);

struct Placement {
    Vec3 position;
    bool optimal = false; // false: picked among {v1, v2, midpoint}
};

/// Minimizer of the summed quadric. Falls back to the best of the midpoint
/// and the two endpoints when the 3x3 block is singular relative to its scale.
Placement optimal_position(const Quadric& q_sum, const Vec3& v1, const Vec3& v2);

struct ContractionStep {
    VertexId kept = 0;
    VertexId removed = 0;
    Vec3 position = Vec3::Zero();

    bool operator==(const ContractionStep&) const = default;
};

struct ContractionMap {
    std::size_t fine_count = 0;
    std::size_t coarse_count = 0;
    std::vector<VertexId> parent;        // fine vertex -> coarse vertex
    std::vector<Vec3> coarse_positions;
    std::vector<ContractionStep> log;    // in fine-level indices, in order

    bool operator==(const ContractionMap&) const = default;
};

/// Rebuilds the fine -> coarse assignment by replaying `log`. Survivors are
/// numbered by ascending fine index.
std::vector<VertexId> replay_contractions(std::size_t fine_count, std::span<const ContractionStep> log);

/// Mutable state of an in-progress simplification. Vertex ids stay those of
/// the input mesh; removed vertices become dead.
class CollapseState {
public:
    struct Candidate {
        Vec3 position;
        bool optimal = false;
        double error = 0.0;
    };

    CollapseState(const Mesh& mesh, double lambda);

    double lambda() const { return lambda_; }
    std::size_t live_vertex_count() const { return live_count_; }
    bool is_live(VertexId v) const { return live_[v] != 0; }
    const Vec3& position(VertexId v) const { return positions_[v]; }
    const Quadric& quadric(VertexId v) const { return quadrics_[v]; }
    const std::vector<VertexId>& neighbors(VertexId v) const { return neighbors_[v]; }

    std::vector<Face> live_faces() const;
    std::vector<Edge> live_edges() const;

    Candidate evaluate(Edge edge) const;

    /// Link condition, boundary pinching, and face-flip guards.
    bool is_legal(Edge edge, const Vec3& new_position) const;

    /// Error currently queued for a live edge.
    std::optional<double> cached_error(Edge edge) const;

    /// Contracts the cheapest legal edge; nullopt when none remains.
    std::optional<ContractionStep> step();

    const std::vector<ContractionStep>& log() const { return log_; }

    /// Compacted coarse mesh and the map from the input vertices.
    std::pair<Mesh, ContractionMap> extract() const;

private:
    struct Record {
        Vec3 position;
        bool optimal = false;
        double error = 0.0;
        std::uint64_t stamp = 0;
    };
    struct QueueEntry {
        double error;
        VertexId a;
        VertexId b;
        std::uint64_t stamp;
        bool operator>(const QueueEntry& o) const
        {
            if (error != o.error)
                return error > o.error;
            if (a != o.a)
                return a > o.a;
            return b > o.b;
        }
    };

    static std::uint64_t key(Edge e) { return (std::uint64_t{e.first} << 32) | e.second; }
    void refresh(Edge edge);
    void contract(Edge edge, const Record& record);
    std::size_t faces_on_edge(VertexId a, VertexId b) const;
    bool on_boundary(VertexId v) const;

    double lambda_;
    std::size_t fine_count_;
    std::size_t live_count_;
    std::vector<Vec3> positions_;
    std::vector<Quadric> quadrics_;
    std::vector<char> live_;
    std::vector<Face> faces_;
    std::vector<char> face_live_;
    std::vector<std::vector<std::uint32_t>> vertex_faces_;
    std::vector<std::vector<VertexId>> neighbors_;
    std::unordered_map<std::uint64_t, Record> records_;
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> queue_;
    std::uint64_t next_stamp_ = 0;
    std::vector<ContractionStep> log_;
};

/// Error of contracting `edge` to `new_position` in `state`: the summed
/// quadric error plus lambda times the longest edge from the new vertex to
/// the neighbors of both endpoints (other than each other).
double contraction_error(const CollapseState& state, Edge edge, const Vec3& new_position, double lambda);

struct SimplifyResult {
    Mesh mesh;
    ContractionMap map;
    bool stalled = false;
    std::string status; // "ok" or "stalled at V=k"
};

SimplifyResult simplify_to(const Mesh& mesh, std::size_t target_count, double lambda);

/// Vertex count of the next coarser level: ceil((V + 1) / 2).
constexpr std::size_t coarse_target(std::size_t vertex_count) { return (vertex_count + 2) / 2; }

struct HierarchyLevel {
    Mesh mesh;
    Adjacency adjacency;
};

struct Hierarchy {
    std::vector<HierarchyLevel> levels; // levels[0] is the input mesh
    std::vector<ContractionMap> maps;   // maps[k]: levels[k] -> levels[k+1]
    double lambda = 0.001;

    std::size_t depth() const { return maps.size(); }
};

/// Halves the vertex count `num_levels` times. Throws InputError if a level
/// stalls before reaching its target.
Hierarchy build_hierarchy(const Mesh& mesh, std::size_t num_levels, double lambda = 0.001);

using ContentHash = std::array<std::uint8_t, 32>;

/// SHA-256 over the level meshes and contraction maps.
ContentHash hierarchy_hash(const Hierarchy& hierarchy);
std::string to_hex(const ContentHash& hash);

// Binary contraction-map format ("MVAE-HIER").
void write_contraction_map(std::ostream& out, const ContractionMap& map);
ContractionMap read_contraction_map(std::istream& in);

/// Writes level_<k>.obj, map_<k>.bin and a small manifest into `dir`.
void save_hierarchy(const std::filesystem::path& dir, const Hierarchy& hierarchy);
Hierarchy load_hierarchy(const std::filesystem::path& dir);

} // namespace meshvae
