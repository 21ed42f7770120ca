#include "support.hpp"

#include "meshvae/error.hpp"
#include "meshvae/features.hpp"
#include "meshvae/gconv.hpp"

#include <doctest.h>

using namespace meshvae;
using testing::Rng;

namespace {

SparseMatrix random_sparse(Rng& rng, std::size_t rows, std::size_t cols, std::size_t nnz)
{
    std::vector<Triplet> t;
    for (std::size_t k = 0; k < nnz; ++k)
        t.push_back({static_cast<std::uint32_t>(rng.index(rows)), static_cast<std::uint32_t>(rng.index(cols)),
                     rng.uniform()});
    return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

} // namespace

TEST_CASE("from_triplets sums duplicates and sorts columns")
{
    auto m = SparseMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 0, 3.0}, {1, 2, 4.0}});
    CHECK(m.nonzeros() == 3);
    CHECK(m.coeff(1, 2) == 5.0);
    CHECK(m.coeff(0, 0) == 0.0);
    auto cols = m.col_indices();
    CHECK(cols[1] == 0);
    CHECK(cols[2] == 2);
    CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), InputError);
}

TEST_CASE("duplicate sums of 1/n are exact")
{
    for (std::uint32_t n = 1; n < 49; ++n) {
        std::vector<Triplet> t(n, Triplet{0, 0, 1.0 / n});
        CHECK(SparseMatrix::from_triplets(1, 1, t).coeff(0, 0) == 1.0);
    }
}

TEST_CASE("sparse products match dense arithmetic")
{
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        auto a = random_sparse(rng, 13, 9, 30);
        auto b = random_sparse(rng, 9, 11, 25);
        DenseMatrix expect = a.to_dense() * b.to_dense();
        CHECK((multiply(a, b).to_dense() - expect).cwiseAbs().maxCoeff() < 1e-14);
        DenseMatrix x = rng.matrix(9, 4);
        CHECK((multiply(a, x) - a.to_dense() * x).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(a.transpose().to_dense() == DenseMatrix(a.to_dense().transpose()));
        auto c = random_sparse(rng, 13, 9, 20);
        CHECK((scaled_sum(2.0, a, -0.5, c).to_dense() - (2.0 * a.to_dense() - 0.5 * c.to_dense()))
                  .cwiseAbs()
                  .maxCoeff() < 1e-15);
    }
}

TEST_CASE("identity and triplet round trip")
{
    auto id = SparseMatrix::identity(4);
    CHECK(id.to_dense() == DenseMatrix::Identity(4, 4));
    Rng rng(8);
    auto a = random_sparse(rng, 6, 7, 15);
    CHECK(SparseMatrix::from_triplets(6, 7, a.triplets()) == a);
}

TEST_CASE("parallel spmm kernel is bit-identical to the serial reference")
{
    Rng rng(21);
    auto a = random_sparse(rng, 4000, 4000, 40000);
    DenseMatrix x = rng.matrix(4000, 9);
    DenseMatrix b = rng.matrix(4000, 9);
    DenseMatrix y1, y2;
    kernels::spmm_axpby(2.0, a, x, -1.0, &b, y1);
    kernels::serial::spmm_axpby(2.0, a, x, -1.0, &b, y2);
    CHECK(testing::bit_equal(y1, y2));
    CHECK((y1 - (2.0 * a.to_dense() * x - b)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("parallel Chebyshev basis and gradients match the serial reference")
{
    Mesh m = toy::torus(40, 30);
    auto adj = build_adjacency(m);
    auto lap = normalized_laplacian(adj);
    auto lt = scale_laplacian(lap, estimate_lambda_max(lap));
    Rng rng(4);
    DenseMatrix x = rng.matrix(static_cast<Eigen::Index>(m.vertex_count()), 9);
    auto p = cheb_apply(lt, x, 4);
    auto s = kernels::serial::cheb_apply(lt, x, 4);
    for (std::size_t h = 0; h < 4; ++h)
        CHECK(testing::bit_equal(p[h], s[h]));

    std::vector<Vec3> def;
    for (const auto& q : m.positions)
        def.push_back(Vec3(q.x() * 1.1, q.y() + 0.1 * q.x(), q.z() * 0.9));
    auto g1 = deformation_gradients(m, def, adj);
    auto g2 = kernels::serial::deformation_gradients(m, def, adj);
    REQUIRE(g1.gradients.size() == g2.gradients.size());
    for (std::size_t i = 0; i < g1.gradients.size(); ++i)
        CHECK(g1.gradients[i] == g2.gradients[i]);
    CHECK(g1.regularized == g2.regularized);
}
