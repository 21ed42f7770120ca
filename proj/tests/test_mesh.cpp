#include "support.hpp"

#include "meshvae/error.hpp"
#include "meshvae/log.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include <numeric>
#include <sstream>

using namespace meshvae;
using testing::Rng;

namespace {

Mesh parse(const std::string& text)
{
    std::istringstream in(text);
    return parse_obj(in);
}

std::string write(const Mesh& m)
{
    std::ostringstream out;
    write_obj(out, m);
    return out.str();
}

Adjacency graph(std::size_t n, std::vector<Edge> edges)
{
    Adjacency adj;
    adj.one_rings.resize(n);
    std::sort(edges.begin(), edges.end());
    adj.edges = edges;
    for (auto [a, b] : edges) {
        adj.one_rings[a].push_back(b);
        adj.one_rings[b].push_back(a);
    }
    for (auto& r : adj.one_rings) {
        std::sort(r.begin(), r.end());
        adj.degrees.push_back(static_cast<std::uint32_t>(r.size()));
    }
    return adj;
}

Eigen::VectorXd dense_eigenvalues(const SparseMatrix& m)
{
    Eigen::MatrixXd d = m.to_dense();
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(d).eigenvalues();
}

} // namespace

TEST_CASE("parse_obj reads vertices and a triangle")
{
    Mesh m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
    CHECK(m.vertex_count() == 3);
    REQUIRE(m.face_count() == 1);
    CHECK(m.faces[0] == Face{0, 1, 2});
    CHECK(m.positions[1] == Vec3(1, 0, 0));
}

TEST_CASE("parse_obj strips texture and normal references")
{
    Mesh m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2/2/2 3/3/3\n");
    CHECK(m.faces[0] == Face{0, 1, 2});
    Mesh n = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1//1 2//1 3//1\n");
    CHECK(n.faces[0] == Face{0, 1, 2});
}

TEST_CASE("parse_obj resolves negative indices")
{
    Mesh m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n");
    CHECK(m.faces[0] == Face{0, 1, 2});
}

TEST_CASE("parse_obj rejects bad input")
{
    CHECK_THROWS_AS(parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n"), InputError);
    CHECK_THROWS_AS(parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n"), InputError);
    CHECK_THROWS_AS(parse("v 0 zero 0\n"), InputError);
    CHECK_THROWS_AS(parse("v 0 0\n"), InputError);
    CHECK_THROWS_AS(parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n"), InputError);
    CHECK_THROWS_AS(parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 1 2\n"), InputError);
}

TEST_CASE("write_obj layout and round trip")
{
    Mesh tri = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
    const std::string text = write(tri);
    CHECK(text.rfind("v ", 0) == 0);
    CHECK(text.find("f 1 2 3") != std::string::npos);
    CHECK(parse(text) == tri);

    Mesh sphere = toy::icosphere(3);
    REQUIRE(sphere.vertex_count() == 642);
    Rng rng(11);
    for (auto& p : sphere.positions)
        p += rng.vec3(1e-3); // non-representable decimals
    CHECK(parse(write(sphere)) == sphere);

    CHECK(parse(write(Mesh{})) == Mesh{});
}

TEST_CASE("validate_same_connectivity")
{
    Mesh a = toy::tetrahedron();
    Mesh b = a;
    for (auto& p : b.positions)
        p *= 3.0;
    CHECK(validate_same_connectivity(a, b).ok);

    Mesh c = a;
    c.faces[2] = {c.faces[2][0], c.faces[2][2], c.faces[2][1]};
    auto r = validate_same_connectivity(a, c);
    CHECK_FALSE(r.ok);
    REQUIRE(r.face.has_value());
    CHECK(*r.face == 2);

    Mesh d = a;
    d.positions.push_back(Vec3::Zero());
    auto rd = validate_same_connectivity(a, d);
    CHECK_FALSE(rd.ok);
    CHECK(rd.message.find("4") != std::string::npos);
    CHECK(rd.message.find("5") != std::string::npos);
}

TEST_CASE("build_adjacency examples")
{
    Mesh tri = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
    auto a = build_adjacency(tri);
    CHECK(a.edges.size() == 3);
    CHECK(a.degrees == std::vector<std::uint32_t>{2, 2, 2});

    Mesh two = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3\nf 2 4 3\n");
    auto b = build_adjacency(two);
    CHECK(b.edges.size() == 5);
    CHECK(b.degrees[1] == 3);
    CHECK(b.degrees[2] == 3);

    auto t = build_adjacency(toy::tetrahedron());
    CHECK(t.edges.size() == 6);
    CHECK(t.degrees == std::vector<std::uint32_t>{3, 3, 3, 3});
}

TEST_CASE("build_adjacency rejects a non-manifold edge")
{
    Mesh m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 -1 0\nv 0 0 1\nf 1 2 3\nf 1 2 4\nf 1 2 5\n");
    CHECK_THROWS_WITH_AS(build_adjacency(m), doctest::Contains("(0, 1)"), InputError);
}

TEST_CASE("adjacency is symmetric and invariant to face order")
{
    Mesh m = testing::jittered_tube(6, 7, 3);
    auto adj = build_adjacency(m);
    for (std::size_t i = 0; i < adj.vertex_count(); ++i) {
        CHECK(adj.degrees[i] == adj.one_rings[i].size());
        for (auto j : adj.one_rings[i]) {
            const auto& rj = adj.one_rings[j];
            CHECK(std::binary_search(rj.begin(), rj.end(), static_cast<VertexId>(i)));
        }
    }
    Rng rng(5);
    Mesh shuffled = m;
    std::shuffle(shuffled.faces.begin(), shuffled.faces.end(), rng.engine());
    CHECK(build_adjacency(shuffled) == adj);
}

TEST_CASE("normalized Laplacian of K3 and of a single edge")
{
    auto k3 = normalized_laplacian(graph(3, {{0, 1}, {0, 2}, {1, 2}}));
    CHECK(k3.coeff(0, 0) == 1.0);
    CHECK(k3.coeff(0, 1) == doctest::Approx(-0.5).epsilon(1e-15));
    auto ev = dense_eigenvalues(k3);
    CHECK(ev[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ev[1] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(ev[2] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(std::abs(estimate_lambda_max(k3) - 1.5) <= 1e-6);

    auto e = normalized_laplacian(graph(2, {{0, 1}}));
    CHECK(e.to_dense() == (DenseMatrix(2, 2) << 1, -1, -1, 1).finished());
    CHECK(std::abs(estimate_lambda_max(e) - 2.0) <= 1e-6);
}

TEST_CASE("normalized Laplacian null space and spectrum bounds")
{
    Mesh m = testing::jittered_tube(5, 6, 9);
    auto adj = build_adjacency(m);
    auto lap = normalized_laplacian(adj);

    // bit-exact symmetry
    CHECK(lap.transpose() == lap);

    DenseMatrix d(static_cast<Eigen::Index>(adj.vertex_count()), 1);
    for (std::size_t i = 0; i < adj.vertex_count(); ++i)
        d(static_cast<Eigen::Index>(i), 0) = std::sqrt(static_cast<double>(adj.degrees[i]));
    CHECK(multiply(lap, d).cwiseAbs().maxCoeff() < 1e-14);

    Rng rng(17);
    for (int k = 0; k < 100; ++k) {
        DenseMatrix x = rng.matrix(d.rows(), 1);
        const double rq = (x.transpose() * multiply(lap, x))(0, 0) / x.squaredNorm();
        CHECK(rq >= -1e-12);
        CHECK(rq <= 2.0 + 1e-9);
    }
    const double lmax = estimate_lambda_max(lap);
    CHECK(lmax <= 2.0 + 1e-6);
    CHECK(std::abs(lmax - dense_eigenvalues(lap).maxCoeff()) < 1e-6);
}

TEST_CASE("normalized Laplacian guards")
{
    CHECK_THROWS_WITH_AS(normalized_laplacian(graph(3, {{0, 1}})), doctest::Contains("2"), InputError);

    std::vector<std::string> warnings;
    log::ScopedSink sink([&](const std::string& w) { warnings.push_back(w); });
    auto lap = normalized_laplacian(graph(4, {{0, 1}, {2, 3}}));
    CHECK(lap.rows() == 4);
    CHECK(warnings.size() == 1);
}

TEST_CASE("lambda_max falls back to 2 on the zero matrix")
{
    auto zero = SparseMatrix::from_triplets(5, 5, {});
    CHECK(estimate_lambda_max(zero) == 2.0);
}

TEST_CASE("bounding box diagonal")
{
    std::vector<Vec3> p = {{0, 0, 0}, {1, 2, 2}, {0.5, 0.5, 0.5}};
    CHECK(bounding_box_diagonal(p) == doctest::Approx(3.0));
}
