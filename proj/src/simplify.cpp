#include "meshvae/simplify.hpp"

#include "meshvae/error.hpp"
#include "meshvae/log.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <iterator>

namespace meshvae {

Quadric Quadric::from_plane(double a, double b, double c, double d)
{
    return Quadric{{a * a, a * b, a * c, a * d, b * b, b * c, b * d, c * c, c * d, d * d}};
}

Quadric& Quadric::operator+=(const Quadric& other)
{
    for (std::size_t k = 0; k < coeffs.size(); ++k)
        coeffs[k] += other.coeffs[k];
    return *this;
}

double Quadric::error(const Vec3& p) const
{
    const auto& q = coeffs;
    const double x = p.x(), y = p.y(), z = p.z();
    return q[0] * x * x + 2.0 * q[1] * x * y + 2.0 * q[2] * x * z + 2.0 * q[3] * x + q[4] * y * y +
           2.0 * q[5] * y * z + 2.0 * q[6] * y + q[7] * z * z + 2.0 * q[8] * z + q[9];
}

Eigen::Matrix4d Quadric::matrix() const
{
    const auto& q = coeffs;
    Eigen::Matrix4d m;
    m << q[0], q[1], q[2], q[3], //
        q[1], q[4], q[5], q[6],  //
        q[2], q[5], q[7], q[8],  //
        q[3], q[6], q[8], q[9];
    return m;
}

std::optional<Quadric> face_quadric(const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 n = (b - a).cross(c - a);
    const double len = n.norm();
    const double longest = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(), (c - b).squaredNorm()});
    if (!(len > 1e-14 * longest) || len == 0.0)
        return std::nullopt;
    const Vec3 unit = n / len;
    return Quadric::from_plane(unit.x(), unit.y(), unit.z(), -unit.dot(a));
}

Quadric vertex_quadric(const Mesh& mesh, VertexId vertex)
{
    Quadric q;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        if (face[0] != vertex && face[1] != vertex && face[2] != vertex)
            continue;
        const auto fq = face_quadric(mesh.positions[face[0]], mesh.positions[face[1]], mesh.positions[face[2]]);
        if (fq)
            q += *fq;
        else
            log::warn("face " + std::to_string(f) + " has zero area and contributes no quadric");
    }
    return q;
}

Placement optimal_position(const Quadric& q_sum, const Vec3& v1, const Vec3& v2)
{
    const auto& q = q_sum.coeffs;
    Mat3 a;
    a << q[0], q[1], q[2], q[1], q[4], q[5], q[2], q[5], q[7];
    const Vec3 rhs(-q[3], -q[6], -q[8]);
    const double scale = a.cwiseAbs().maxCoeff();
    if (scale > 0.0 && std::abs(a.determinant()) >= 1e-10 * scale * scale * scale)
        return {a.partialPivLu().solve(rhs), true};

    const Vec3 mid = 0.5 * (v1 + v2);
    Placement best{mid, false};
    double best_error = q_sum.error(mid);
    for (const Vec3* candidate : {&v1, &v2}) {
        const double e = q_sum.error(*candidate);
        if (e < best_error) {
            best_error = e;
            best.position = *candidate;
        }
    }
    return best;
}

std::vector<VertexId> replay_contractions(std::size_t fine_count, std::span<const ContractionStep> log)
{
    std::vector<VertexId> owner(fine_count);
    std::vector<char> live(fine_count, 1);
    for (std::size_t v = 0; v < fine_count; ++v)
        owner[v] = static_cast<VertexId>(v);
    for (const auto& s : log) {
        if (s.kept >= fine_count || s.removed >= fine_count || s.kept == s.removed || !live[s.kept] ||
            !live[s.removed])
            throw InputError("contraction log step (" + std::to_string(s.kept) + ", " + std::to_string(s.removed) +
                             ") is inconsistent");
        live[s.removed] = 0;
        owner[s.removed] = s.kept;
    }
    std::vector<VertexId> coarse_id(fine_count, 0);
    VertexId next = 0;
    for (std::size_t v = 0; v < fine_count; ++v)
        if (live[v])
            coarse_id[v] = next++;
    std::vector<VertexId> parent(fine_count);
    for (std::size_t v = 0; v < fine_count; ++v) {
        VertexId r = static_cast<VertexId>(v);
        while (owner[r] != r)
            r = owner[r];
        parent[v] = coarse_id[r];
    }
    return parent;
}

// --- CollapseState ---------------------------------------------------------

CollapseState::CollapseState(const Mesh& mesh, double lambda)
    : lambda_(lambda),
      fine_count_(mesh.vertex_count()),
      live_count_(mesh.vertex_count()),
      positions_(mesh.positions),
      quadrics_(mesh.vertex_count()),
      live_(mesh.vertex_count(), 1),
      faces_(mesh.faces),
      face_live_(mesh.faces.size(), 1),
      vertex_faces_(mesh.vertex_count())
{
    const Adjacency adj = build_adjacency(mesh);
    neighbors_ = adj.one_rings;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        const auto& face = faces_[f];
        for (auto v : face)
            vertex_faces_[v].push_back(static_cast<std::uint32_t>(f));
        const auto fq = face_quadric(positions_[face[0]], positions_[face[1]], positions_[face[2]]);
        if (!fq) {
            log::warn("face " + std::to_string(f) + " has zero area and contributes no quadric");
            continue;
        }
        for (auto v : face)
            quadrics_[v] += *fq;
    }
    for (const auto& e : adj.edges)
        refresh(e);
}

std::vector<Face> CollapseState::live_faces() const
{
    std::vector<Face> out;
    for (std::size_t f = 0; f < faces_.size(); ++f)
        if (face_live_[f])
            out.push_back(faces_[f]);
    return out;
}

std::vector<Edge> CollapseState::live_edges() const
{
    std::vector<Edge> out;
    for (std::size_t v = 0; v < neighbors_.size(); ++v)
        for (auto n : neighbors_[v])
            if (v < n)
                out.emplace_back(static_cast<VertexId>(v), n);
    return out;
}

CollapseState::Candidate CollapseState::evaluate(Edge edge) const
{
    const Quadric q = quadrics_[edge.first] + quadrics_[edge.second];
    const Placement p = optimal_position(q, positions_[edge.first], positions_[edge.second]);
    return {p.position, p.optimal, contraction_error(*this, edge, p.position, lambda_)};
}

std::optional<double> CollapseState::cached_error(Edge edge) const
{
    const auto it = records_.find(key(edge));
    if (it == records_.end())
        return std::nullopt;
    return it->second.error;
}

std::size_t CollapseState::faces_on_edge(VertexId a, VertexId b) const
{
    std::size_t count = 0;
    for (auto f : vertex_faces_[a]) {
        if (!face_live_[f])
            continue;
        const auto& face = faces_[f];
        count += face[0] == b || face[1] == b || face[2] == b;
    }
    return count;
}

bool CollapseState::on_boundary(VertexId v) const
{
    return std::any_of(neighbors_[v].begin(), neighbors_[v].end(),
                       [&](VertexId n) { return faces_on_edge(v, n) == 1; });
}

bool CollapseState::is_legal(Edge edge, const Vec3& new_position) const
{
    const auto [i, j] = edge;
    std::vector<VertexId> common;
    std::set_intersection(neighbors_[i].begin(), neighbors_[i].end(), neighbors_[j].begin(), neighbors_[j].end(),
                          std::back_inserter(common));
    if (common.size() > 2)
        return false;

    std::vector<VertexId> opposite;
    for (auto f : vertex_faces_[i]) {
        if (!face_live_[f])
            continue;
        const auto& face = faces_[f];
        if (face[0] != j && face[1] != j && face[2] != j)
            continue;
        for (auto v : face)
            if (v != i && v != j)
                opposite.push_back(v);
    }
    std::sort(opposite.begin(), opposite.end());
    if (common != opposite)
        return false;

    if (opposite.size() == 2 && on_boundary(i) && on_boundary(j))
        return false;

    for (const VertexId moved : {i, j}) {
        for (auto f : vertex_faces_[moved]) {
            if (!face_live_[f])
                continue;
            const auto& face = faces_[f];
            const bool has_i = face[0] == i || face[1] == i || face[2] == i;
            const bool has_j = face[0] == j || face[1] == j || face[2] == j;
            if (has_i && has_j)
                continue;
            std::array<Vec3, 3> before;
            std::array<Vec3, 3> after;
            for (std::size_t k = 0; k < 3; ++k) {
                before[k] = positions_[face[k]];
                after[k] = face[k] == moved ? new_position : before[k];
            }
            const Vec3 n_before = (before[1] - before[0]).cross(before[2] - before[0]);
            const Vec3 n_after = (after[1] - after[0]).cross(after[2] - after[0]);
            if (n_after.dot(n_before) < 0.0)
                return false;
            // A contraction must not collapse a surviving face to zero area.
            if (n_after.norm() <= 1e-10 * n_before.norm())
                return false;
        }
    }
    return true;
}

void CollapseState::refresh(Edge edge)
{
    const Candidate c = evaluate(edge);
    Record& r = records_[key(edge)];
    r.position = c.position;
    r.optimal = c.optimal;
    r.error = c.error;
    r.stamp = next_stamp_++;
    queue_.push({r.error, edge.first, edge.second, r.stamp});
}

void CollapseState::contract(Edge edge, const Record& record)
{
    const auto [kept, removed] = edge;
    log_.push_back({kept, removed, record.position});
    positions_[kept] = record.position;
    quadrics_[kept] += quadrics_[removed];
    live_[removed] = 0;
    --live_count_;

    for (auto f : vertex_faces_[removed]) {
        if (!face_live_[f])
            continue;
        auto& face = faces_[f];
        if (face[0] == kept || face[1] == kept || face[2] == kept) {
            face_live_[f] = 0;
            continue;
        }
        for (auto& v : face)
            if (v == removed)
                v = kept;
        vertex_faces_[kept].push_back(f);
    }
    vertex_faces_[removed].clear();

    const auto old_removed_ring = neighbors_[removed];
    for (auto m : old_removed_ring) {
        records_.erase(key(m < removed ? Edge{m, removed} : Edge{removed, m}));
        if (m == kept)
            continue;
        auto& ring = neighbors_[m];
        ring.erase(std::lower_bound(ring.begin(), ring.end(), removed));
        const auto pos = std::lower_bound(ring.begin(), ring.end(), kept);
        if (pos == ring.end() || *pos != kept)
            ring.insert(pos, kept);
    }
    std::vector<VertexId> merged;
    std::set_union(neighbors_[kept].begin(), neighbors_[kept].end(), old_removed_ring.begin(), old_removed_ring.end(),
                   std::back_inserter(merged));
    std::erase_if(merged, [&](VertexId v) { return v == kept || v == removed; });
    neighbors_[kept] = std::move(merged);
    neighbors_[removed].clear();

    // Drop dead faces from the incidence lists around the new vertex.
    auto prune = [&](VertexId v) {
        std::erase_if(vertex_faces_[v], [&](std::uint32_t f) { return !face_live_[f]; });
    };
    prune(kept);
    for (auto m : neighbors_[kept])
        prune(m);

    // Every edge touching the new vertex or its ring sees a changed
    // neighborhood (positions, rings, or legality).
    std::vector<std::uint64_t> dirty;
    auto touch = [&](VertexId u) {
        for (auto w : neighbors_[u])
            dirty.push_back(key(u < w ? Edge{u, w} : Edge{w, u}));
    };
    touch(kept);
    for (auto m : neighbors_[kept])
        touch(m);
    std::sort(dirty.begin(), dirty.end());
    dirty.erase(std::unique(dirty.begin(), dirty.end()), dirty.end());
    for (auto k : dirty)
        refresh({static_cast<VertexId>(k >> 32), static_cast<VertexId>(k & 0xffffffffu)});
}

std::optional<ContractionStep> CollapseState::step()
{
    while (!queue_.empty()) {
        const QueueEntry top = queue_.top();
        queue_.pop();
        const Edge edge{top.a, top.b};
        const auto it = records_.find(key(edge));
        if (it == records_.end() || it->second.stamp != top.stamp)
            continue;
        if (!is_legal(edge, it->second.position))
            continue; // re-queued when its neighborhood changes
        const Record record = it->second;
        contract(edge, record);
        return log_.back();
    }
    return std::nullopt;
}

std::pair<Mesh, ContractionMap> CollapseState::extract() const
{
    ContractionMap map;
    map.fine_count = fine_count_;
    map.coarse_count = live_count_;
    map.log = log_;
    map.parent = replay_contractions(fine_count_, log_);

    Mesh coarse;
    std::vector<VertexId> coarse_id(fine_count_, 0);
    for (std::size_t v = 0; v < fine_count_; ++v) {
        if (!live_[v])
            continue;
        coarse_id[v] = static_cast<VertexId>(coarse.positions.size());
        coarse.positions.push_back(positions_[v]);
    }
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        if (!face_live_[f])
            continue;
        const auto& face = faces_[f];
        coarse.faces.push_back({coarse_id[face[0]], coarse_id[face[1]], coarse_id[face[2]]});
    }
    map.coarse_positions = coarse.positions;
    return {std::move(coarse), std::move(map)};
}

double contraction_error(const CollapseState& state, Edge edge, const Vec3& new_position, double lambda)
{
    const auto [i, j] = edge;
    const double quadric_error = (state.quadric(i) + state.quadric(j)).error(new_position);
    double longest = 0.0;
    for (auto m : state.neighbors(i))
        if (m != j)
            longest = std::max(longest, (new_position - state.position(m)).norm());
    for (auto n : state.neighbors(j))
        if (n != i)
            longest = std::max(longest, (new_position - state.position(n)).norm());
    return quadric_error + lambda * longest;
}

SimplifyResult simplify_to(const Mesh& mesh, std::size_t target_count, double lambda)
{
    if (target_count < 1 || target_count >= mesh.vertex_count())
        throw InputError("simplification target " + std::to_string(target_count) + " must lie in [1, " +
                         std::to_string(mesh.vertex_count()) + ")");
    CollapseState state(mesh, lambda);
    SimplifyResult result;
    while (state.live_vertex_count() > target_count) {
        if (!state.step()) {
            result.stalled = true;
            break;
        }
    }
    auto [coarse, map] = state.extract();
    result.mesh = std::move(coarse);
    result.map = std::move(map);
    result.status = result.stalled ? "stalled at V=" + std::to_string(state.live_vertex_count()) : "ok";
    return result;
}

Hierarchy build_hierarchy(const Mesh& mesh, std::size_t num_levels, double lambda)
{
    if (num_levels < 1)
        throw InputError("hierarchy needs at least one coarsening level");
    Hierarchy h;
    h.lambda = lambda;
    h.levels.push_back({mesh, build_adjacency(mesh)});
    for (std::size_t k = 0; k < num_levels; ++k) {
        const Mesh& fine = h.levels.back().mesh;
        SimplifyResult r = simplify_to(fine, coarse_target(fine.vertex_count()), lambda);
        if (r.stalled)
            throw InputError("hierarchy level " + std::to_string(k + 1) + ": simplification " + r.status +
                             " (target " + std::to_string(coarse_target(fine.vertex_count())) + ")");
        Adjacency adj = build_adjacency(r.mesh);
        h.maps.push_back(std::move(r.map));
        h.levels.push_back({std::move(r.mesh), std::move(adj)});
    }
    return h;
}

} // namespace meshvae
