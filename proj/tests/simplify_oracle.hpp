#pragma once

// Brute-force references for the simplifier, shared by the unit tests and the
// acceptance run.

#include "meshvae/log.hpp"
#include "meshvae/simplify.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <set>
#include <vector>

namespace testing {

using meshvae::CollapseState;
using meshvae::ContractionStep;
using meshvae::Edge;
using meshvae::Mesh;
using meshvae::Vec3;
using meshvae::VertexId;

// Independent evaluator: neighbors from the live faces, quadrics re-summed
// from the input mesh over each merged cluster, 4x4 matrix form.
struct NaiveOracle {
    const Mesh& mesh;
    std::vector<Eigen::Matrix4d> base_quadrics;
    std::vector<std::vector<VertexId>> clusters;

    explicit NaiveOracle(const Mesh& m) : mesh(m)
    {
        meshvae::log::ScopedSink quiet([](const std::string&) {});
        for (VertexId v = 0; v < m.vertex_count(); ++v) {
            Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
            for (const auto& f : m.faces) {
                if (f[0] != v && f[1] != v && f[2] != v)
                    continue;
                const Vec3 a = m.positions[f[0]], b = m.positions[f[1]], c = m.positions[f[2]];
                Vec3 n = (b - a).cross(c - a);
                if (n.norm() == 0.0)
                    continue;
                n.normalize();
                Eigen::Vector4d p(n.x(), n.y(), n.z(), -n.dot(a));
                q += p * p.transpose();
            }
            base_quadrics.push_back(q);
            clusters.push_back({v});
        }
    }

    void apply(const ContractionStep& s)
    {
        auto& keep = clusters[s.kept];
        keep.insert(keep.end(), clusters[s.removed].begin(), clusters[s.removed].end());
        clusters[s.removed].clear();
    }

    std::set<VertexId> neighbors(const CollapseState& st, VertexId v) const
    {
        std::set<VertexId> out;
        for (const auto& f : st.live_faces())
            for (int k = 0; k < 3; ++k)
                if (f[k] == v) {
                    out.insert(f[(k + 1) % 3]);
                    out.insert(f[(k + 2) % 3]);
                }
        return out;
    }

    double error(const CollapseState& st, Edge e, const Vec3& p, double lambda) const
    {
        Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
        for (auto v : clusters[e.first])
            q += base_quadrics[v];
        for (auto v : clusters[e.second])
            q += base_quadrics[v];
        Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
        double longest = 0.0;
        for (auto m : neighbors(st, e.first))
            if (m != e.second)
                longest = std::max(longest, (p - st.position(m)).norm());
        for (auto n : neighbors(st, e.second))
            if (n != e.first)
                longest = std::max(longest, (p - st.position(n)).norm());
        return h.dot(q * h) + lambda * longest;
    }
};

inline std::vector<Edge> naive_live_edges(const CollapseState& st)
{
    std::set<Edge> edges;
    for (const auto& f : st.live_faces())
        for (int k = 0; k < 3; ++k) {
            VertexId a = f[k], b = f[(k + 1) % 3];
            edges.insert({std::min(a, b), std::max(a, b)});
        }
    return {edges.begin(), edges.end()};
}

inline double max_edge_length(const Mesh& m)
{
    double best = 0.0;
    for (const auto& f : m.faces)
        for (int k = 0; k < 3; ++k)
            best = std::max(best, (m.positions[f[k]] - m.positions[f[(k + 1) % 3]]).norm());
    return best;
}

} // namespace testing
