#include "simplify_oracle.hpp"
#include "support.hpp"

#include "meshvae/error.hpp"
#include "meshvae/log.hpp"
#include "meshvae/simplify.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace meshvae;
using testing::Rng;

using testing::max_edge_length;
using testing::naive_live_edges;
using testing::NaiveOracle;


TEST_CASE("plane quadric vanishes on its plane")
{
    Mesh grid = toy::graded_grid(5, 3.0);
    Quadric q = vertex_quadric(grid, 12);
    Rng rng(2);
    for (int k = 0; k < 20; ++k)
        CHECK(q.error(Vec3(rng.uniform(-10, 10), rng.uniform(-10, 10), 0.0)) == 0.0);
    CHECK(q.error(Vec3(0, 0, 2)) > 0.0);
}

TEST_CASE("cube corner quadric")
{
    Quadric q = Quadric::from_plane(1, 0, 0, 0) + Quadric::from_plane(0, 1, 0, 0) + Quadric::from_plane(0, 0, 1, 0);
    CHECK(q.error(Vec3(0.5, 0.5, 0.5)) == doctest::Approx(0.75).epsilon(1e-15));
    Eigen::Matrix4d m = q.matrix();
    CHECK(m == m.transpose());
}

TEST_CASE("zero-area faces contribute nothing and warn")
{
    Mesh m;
    m.positions = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 1, 0}};
    m.faces = {{0, 1, 2}, {0, 1, 3}};
    std::vector<std::string> warnings;
    log::ScopedSink sink([&](const std::string& w) { warnings.push_back(w); });
    Quadric q = vertex_quadric(m, 0);
    CHECK(warnings.size() == 1);
    CHECK(q == Quadric::from_plane(0, 0, 1, 0));
    CHECK_FALSE(face_quadric(m.positions[0], m.positions[1], m.positions[2]).has_value());
}

TEST_CASE("quadric error is non-negative for plane sums")
{
    Rng rng(4);
    for (int k = 0; k < 200; ++k) {
        Quadric q;
        for (int f = 0; f < 4; ++f)
            if (auto fq = face_quadric(rng.vec3(), rng.vec3(), rng.vec3()))
                q += *fq;
        CHECK(q.error(rng.vec3(5.0)) >= -1e-9);
    }
}

TEST_CASE("optimal_position cases")
{
    SUBCASE("parallel planes fall back to the midpoint")
    {
        Quadric q = Quadric::from_plane(0, 0, 1, 0) + Quadric::from_plane(0, 0, 1, -1);
        auto p = optimal_position(q, Vec3(0, 0, 0), Vec3(0, 0, 1));
        CHECK_FALSE(p.optimal);
        CHECK(p.position.z() == 0.5);
    }
    SUBCASE("three independent planes meet at a point")
    {
        Quadric q = Quadric::from_plane(1, 0, 0, -1) + Quadric::from_plane(0, 1, 0, -2) + Quadric::from_plane(0, 0, 1, -3);
        auto p = optimal_position(q, Vec3::Zero(), Vec3(5, 5, 5));
        CHECK(p.optimal);
        CHECK((p.position - Vec3(1, 2, 3)).norm() < 1e-12);
    }
    SUBCASE("zero quadric falls back to the midpoint")
    {
        auto p = optimal_position(Quadric{}, Vec3(0, 0, 0), Vec3(2, 0, 0));
        CHECK_FALSE(p.optimal);
        CHECK(p.position == Vec3(1, 0, 0));
    }
}

TEST_CASE("contraction_error on a planar patch")
{
    Mesh m;
    m.positions = {{0, 0, 0}, {0.5, 0, 0}, {0, 1, 0}, {0, -1.5, 0}, {2, 0, 0}};
    m.faces = {{0, 1, 2}, {0, 3, 1}, {1, 4, 2}};
    CollapseState st(m, 0.001);
    CHECK(contraction_error(st, {0, 1}, Vec3::Zero(), 0.001) == doctest::Approx(0.002).epsilon(1e-15));
    CHECK(contraction_error(st, {0, 1}, Vec3::Zero(), 0.0) == 0.0);
}

TEST_CASE("contraction_error matches the naive evaluator at every step")
{
    Mesh m = testing::jittered_tube(4, 5, 77, 0.08);
    REQUIRE(m.vertex_count() == 20);
    for (double lambda : {0.0, 0.001, 0.1}) {
        CollapseState st(m, lambda);
        NaiveOracle oracle(m);
        std::size_t checked = 0;
        while (st.live_vertex_count() > 3) {
            const auto edges = st.live_edges();
            CHECK(edges == naive_live_edges(st));
            for (auto e : edges) {
                auto cand = st.evaluate(e);
                const double naive = oracle.error(st, e, cand.position, lambda);
                CHECK(std::abs(cand.error - naive) <= 1e-12 * std::max(1.0, std::abs(naive)));
                CHECK(contraction_error(st, e, cand.position, lambda) == cand.error);
                if (auto cached = st.cached_error(e))
                    CHECK(*cached == cand.error);
                ++checked;
            }
            auto s = st.step();
            if (!s)
                break;
            oracle.apply(*s);
        }
        CHECK(checked > 100);
    }
}

TEST_CASE("greedy order matches a full re-sort oracle")
{
    std::vector<Mesh> meshes = {testing::jittered_tube(5, 6, 1), testing::jittered_tube(10, 10, 2),
                                toy::icosphere(1), toy::graded_grid(8, 10.0)};
    Rng rng(9);
    for (auto& p : meshes[2].positions)
        p += rng.vec3(0.02);
    for (const auto& m : meshes) {
        REQUIRE(m.vertex_count() <= 100);
        CollapseState st(m, 0.0);
        std::vector<double> accepted;
        while (st.live_vertex_count() > coarse_target(m.vertex_count())) {
            std::optional<std::tuple<double, VertexId, VertexId>> best;
            for (auto e : naive_live_edges(st)) {
                auto c = st.evaluate(e);
                if (!st.is_legal(e, c.position))
                    continue;
                std::tuple<double, VertexId, VertexId> key{c.error, e.first, e.second};
                if (!best || key < *best)
                    best = key;
            }
            auto s = st.step();
            REQUIRE(best.has_value() == s.has_value());
            if (!s)
                break;
            CHECK(s->kept == std::get<1>(*best));
            CHECK(s->removed == std::get<2>(*best));
            accepted.push_back(std::get<0>(*best));
        }
        for (std::size_t k = 1; k < accepted.size(); ++k)
            CHECK(accepted[k] >= accepted[k - 1] - 1e-9);
    }
}

TEST_CASE("with lambda > 0 on a flat graded grid the first contraction minimizes the longest new edge")
{
    Mesh grid = toy::graded_grid(9, 10.0);
    CollapseState st(grid, 0.001);
    double best = std::numeric_limits<double>::infinity();
    for (auto e : st.live_edges()) {
        const Vec3 mid = 0.5 * (st.position(e.first) + st.position(e.second));
        if (!st.is_legal(e, mid))
            continue;
        double longest = 0.0;
        for (auto n : st.neighbors(e.first))
            if (n != e.second)
                longest = std::max(longest, (mid - st.position(n)).norm());
        for (auto n : st.neighbors(e.second))
            if (n != e.first)
                longest = std::max(longest, (mid - st.position(n)).norm());
        best = std::min(best, longest);
    }
    auto s = st.step();
    REQUIRE(s.has_value());
    Vec3 p = s->position;
    double chosen = 0.0;
    for (auto n : st.neighbors(s->kept))
        chosen = std::max(chosen, (p - st.position(n)).norm());
    CHECK(chosen == doctest::Approx(best).epsilon(1e-14));
}

TEST_CASE("simplify_to on the icosphere")
{
    Mesh sphere = toy::icosphere(3);
    auto r = simplify_to(sphere, 322, 0.001);
    CHECK_FALSE(r.stalled);
    CHECK(r.status == "ok");
    CHECK(r.mesh.vertex_count() == 322);
    CHECK_NOTHROW(validate_mesh(r.mesh));
    auto adj = build_adjacency(r.mesh);
    // closed surface: every edge has two faces, Euler characteristic 2
    CHECK(static_cast<long>(r.mesh.vertex_count()) - static_cast<long>(adj.edges.size()) +
              static_cast<long>(r.mesh.face_count()) ==
          2);
    CHECK(r.map.coarse_count == 322);
    CHECK(r.map.fine_count == 642);
    CHECK(r.map.log.size() == 320);
    CHECK(replay_contractions(r.map.fine_count, r.map.log) == r.map.parent);
    CHECK_THROWS_AS(simplify_to(sphere, 642, 0.001), InputError);
    CHECK_THROWS_AS(simplify_to(sphere, 0, 0.001), InputError);
}

TEST_CASE("hierarchy sizes follow ceil((V+1)/2)")
{
    CHECK(coarse_target(6890) == 3446);
    CHECK(coarse_target(3573) == 1787);
    CHECK(coarse_target(642) == 322);
    CHECK(coarse_target(322) == 162);
    CHECK(coarse_target(4) == 3);

    auto h = build_hierarchy(toy::icosphere(3), 2);
    REQUIRE(h.levels.size() == 3);
    CHECK(h.levels[1].mesh.vertex_count() == 322);
    CHECK(h.levels[2].mesh.vertex_count() == 162);
    for (std::size_t k = 0; k < h.depth(); ++k) {
        CHECK(h.maps[k].coarse_count == h.levels[k + 1].mesh.vertex_count());
        CHECK(replay_contractions(h.maps[k].fine_count, h.maps[k].log) == h.maps[k].parent);
        std::set<VertexId> image(h.maps[k].parent.begin(), h.maps[k].parent.end());
        CHECK(image.size() == h.maps[k].coarse_count);
    }

    auto t = build_hierarchy(toy::tetrahedron(), 1);
    CHECK(t.levels[1].mesh.vertex_count() == 3);
}

TEST_CASE("hierarchy is deterministic and persists")
{
    Mesh m = testing::jittered_tube(8, 9, 5);
    auto a = build_hierarchy(m, 2);
    auto b = build_hierarchy(m, 2);
    CHECK(hierarchy_hash(a) == hierarchy_hash(b));
    CHECK(a.maps == b.maps);

    auto dir = testing::scratch_dir("hierarchy");
    save_hierarchy(dir, a);
    auto c = load_hierarchy(dir);
    CHECK(hierarchy_hash(c) == hierarchy_hash(a));
    CHECK(c.maps == a.maps);
    CHECK(c.levels.size() == a.levels.size());
    for (std::size_t k = 0; k < a.levels.size(); ++k)
        CHECK(c.levels[k].mesh == a.levels[k].mesh);

    auto moved = b;
    moved.levels[0].mesh.positions[0].x() += 1e-9;
    CHECK(hierarchy_hash(moved) != hierarchy_hash(a));
}

TEST_CASE("contraction map file format")
{
    auto h = build_hierarchy(testing::jittered_tube(5, 6, 3), 1);
    std::ostringstream out;
    write_contraction_map(out, h.maps[0]);
    const std::string bytes = out.str();
    CHECK(bytes.rfind("MVAE-HIER", 0) == 0);
    {
        std::istringstream in(bytes);
        auto m = read_contraction_map(in);
        CHECK(m.parent == h.maps[0].parent);
        CHECK(m.log == h.maps[0].log);
    }
    {
        std::istringstream in(bytes.substr(0, bytes.size() - 5));
        CHECK_THROWS_AS(read_contraction_map(in), InputError);
    }
    {
        std::string bad = bytes;
        bad[0] = 'X';
        std::istringstream in(bad);
        CHECK_THROWS_AS(read_contraction_map(in), InputError);
    }
}

TEST_CASE("replay rejects invalid logs")
{
    std::vector<ContractionStep> log = {{0, 1, Vec3::Zero()}, {2, 1, Vec3::Zero()}};
    CHECK_THROWS_AS(replay_contractions(3, log), InputError);
    std::vector<ContractionStep> chain = {{1, 2, Vec3::Zero()}, {0, 1, Vec3::Zero()}};
    CHECK(replay_contractions(4, chain) == std::vector<VertexId>{0, 0, 0, 1});
}

TEST_CASE("edge-length term keeps coarse edges short on a graded grid")
{
    Mesh grid = toy::graded_grid(12, 10.0);
    const double diag = bounding_box_diagonal(grid.positions);
    auto plain = simplify_to(grid, coarse_target(grid.vertex_count()), 0.0);
    auto penalized = simplify_to(grid, coarse_target(grid.vertex_count()), 0.001 * diag);
    REQUIRE_FALSE(plain.stalled);
    REQUIRE_FALSE(penalized.stalled);
    CHECK(max_edge_length(penalized.mesh) <= max_edge_length(plain.mesh));
}
