#include "support.hpp"

#include "meshvae/error.hpp"
#include "meshvae/gconv.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include <numeric>
#include <set>

using namespace meshvae;
using testing::random_graph;
using testing::Rng;

namespace {

SparseMatrix k3_scaled()
{
    Adjacency adj;
    adj.edges = {{0, 1}, {0, 2}, {1, 2}};
    adj.one_rings = {{1, 2}, {0, 2}, {0, 1}};
    adj.degrees = {2, 2, 2};
    return scale_laplacian(normalized_laplacian(adj), 1.5);
}

double cheb(std::size_t h, double x)
{
    double t0 = 1, t1 = x;
    if (h == 0)
        return t0;
    for (std::size_t k = 1; k < h; ++k) {
        const double t2 = 2 * x * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    return t1;
}

} // namespace

TEST_CASE("scaled Laplacian of K3")
{
    auto lt = k3_scaled();
    CHECK(lt.coeff(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(lt.coeff(0, 1) == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
    Eigen::MatrixXd d = lt.to_dense();
    auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(d).eigenvalues();
    CHECK(ev[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(ev[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ev[2] == doctest::Approx(1.0).epsilon(1e-12));

    Adjacency e;
    e.edges = {{0, 1}};
    e.one_rings = {{1}, {0}};
    e.degrees = {1, 1};
    auto lap = normalized_laplacian(e);
    CHECK(scale_laplacian(lap, 2.0) == scaled_sum(1.0, lap, -1.0, SparseMatrix::identity(2)));
    CHECK_THROWS_AS(scale_laplacian(lap, 0.0), InputError);
    CHECK_THROWS_AS(scale_laplacian(lap, -1.0), InputError);
}

TEST_CASE("Chebyshev basis on K3")
{
    auto lt = k3_scaled();
    DenseMatrix e1 = (DenseMatrix(3, 1) << 1, 0, 0).finished();
    auto one = cheb_apply(lt, e1, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == e1);
    auto t = cheb_apply(lt, e1, 3);
    CHECK(t[1](0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(t[1](1, 0) == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));

    std::vector<DenseMatrix> theta = {DenseMatrix::Constant(1, 1, 1.0), DenseMatrix::Constant(1, 1, 1.0),
                                      DenseMatrix::Constant(1, 1, 0.0)};
    DenseMatrix y = gconv_forward(lt, theta, e1);
    CHECK(y(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(y(1, 0) == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
    CHECK(y(2, 0) == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("trivial filters")
{
    Rng rng(1);
    auto adj = random_graph(rng, 10, 0.3);
    auto lap = normalized_laplacian(adj);
    auto lt = scale_laplacian(lap, estimate_lambda_max(lap));
    DenseMatrix x = rng.matrix(10, 4);
    std::vector<DenseMatrix> id{DenseMatrix::Identity(4, 4)};
    CHECK(gconv_forward(lt, id, x) == x);
    std::vector<DenseMatrix> zero(3, DenseMatrix::Zero(4, 2));
    CHECK(gconv_forward(lt, zero, x).cwiseAbs().maxCoeff() == 0.0);
    std::vector<DenseMatrix> wrong{DenseMatrix::Zero(3, 2)};
    CHECK_THROWS_AS(gconv_forward(lt, wrong, x), InputError);
    CHECK_THROWS_AS(cheb_apply(lt, x, 0), InputError);
}

TEST_CASE("Chebyshev filtering equals the dense spectral filter")
{
    Rng rng(20);
    for (int trial = 0; trial < 20; ++trial) {
        auto adj = random_graph(rng, 10, 0.25);
        auto lap = normalized_laplacian(adj);
        const double lmax = estimate_lambda_max(lap);
        auto lt = scale_laplacian(lap, lmax);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(lap.to_dense()));
        const Eigen::MatrixXd u = eig.eigenvectors();
        const Eigen::VectorXd lam = eig.eigenvalues();

        const std::size_t order = 2 + static_cast<std::size_t>(trial % 4);
        std::vector<DenseMatrix> theta;
        for (std::size_t h = 0; h < order; ++h)
            theta.push_back(rng.matrix(3, 2));
        DenseMatrix x = rng.matrix(10, 3);
        DenseMatrix y = gconv_forward(lt, theta, x);

        Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(10, 2);
        for (std::size_t h = 0; h < order; ++h) {
            Eigen::VectorXd g(10);
            for (int k = 0; k < 10; ++k)
                g[k] = cheb(h, 2.0 * lam[k] / lmax - 1.0);
            expect += u * g.asDiagonal() * u.transpose() * Eigen::MatrixXd(x) * Eigen::MatrixXd(theta[h]);
        }
        CHECK((Eigen::MatrixXd(y) - expect).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("gconv is linear and permutation equivariant")
{
    Rng rng(3);
    auto adj = random_graph(rng, 12, 0.2);
    auto lap = normalized_laplacian(adj);
    auto lt = scale_laplacian(lap, estimate_lambda_max(lap));
    std::vector<DenseMatrix> th{rng.matrix(3, 3), rng.matrix(3, 3), rng.matrix(3, 3)};
    std::vector<DenseMatrix> th2{rng.matrix(3, 3), rng.matrix(3, 3), rng.matrix(3, 3)};
    DenseMatrix x = rng.matrix(12, 3), x2 = rng.matrix(12, 3);
    CHECK((gconv_forward(lt, th, 2 * x - x2) - (2 * gconv_forward(lt, th, x) - gconv_forward(lt, th, x2)))
              .cwiseAbs()
              .maxCoeff() < 1e-13);
    std::vector<DenseMatrix> mix;
    for (int h = 0; h < 3; ++h)
        mix.push_back(th[h] + 3 * th2[h]);
    CHECK((gconv_forward(lt, mix, x) - (gconv_forward(lt, th, x) + 3 * gconv_forward(lt, th2, x)))
              .cwiseAbs()
              .maxCoeff() < 1e-13);

    std::vector<VertexId> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    std::vector<Triplet> pt;
    for (const auto& t : lt.triplets())
        pt.push_back({perm[t.row], perm[t.col], t.value});
    auto plt = SparseMatrix::from_triplets(12, 12, pt);
    DenseMatrix px(12, 3);
    for (int i = 0; i < 12; ++i)
        px.row(perm[static_cast<std::size_t>(i)]) = x.row(i);
    DenseMatrix y = gconv_forward(lt, th, x), py = gconv_forward(plt, th, px);
    for (int i = 0; i < 12; ++i)
        CHECK((py.row(perm[static_cast<std::size_t>(i)]) - y.row(i)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("Chebyshev recurrence stays bounded")
{
    auto m = toy::icosphere(2);
    auto lap = normalized_laplacian(build_adjacency(m));
    auto lt = scale_laplacian(lap, estimate_lambda_max(lap));
    Rng rng(4);
    DenseMatrix x = rng.matrix(static_cast<Eigen::Index>(m.vertex_count()), 2);
    auto t = cheb_apply(lt, x, 10);
    for (const auto& th : t)
        CHECK(th.norm() <= x.norm() * (1 + 1e-6));
}

TEST_CASE("gconv gradients")
{
    Rng rng(5);
    auto adj = random_graph(rng, 8, 0.3);
    auto lap = normalized_laplacian(adj);
    auto lt = scale_laplacian(lap, estimate_lambda_max(lap));
    std::vector<DenseMatrix> th{rng.matrix(3, 2), rng.matrix(3, 2), rng.matrix(3, 2)};
    DenseMatrix x = rng.matrix(8, 3);
    DenseMatrix w = rng.matrix(8, 2);
    auto loss = [&] { return gconv_forward(lt, th, x).cwiseProduct(w).sum(); };

    std::vector<DenseMatrix> basis;
    gconv_forward(lt, th, x, &basis);
    auto g = gconv_backward(lt, th, basis, w);
    CHECK(testing::max_relative_error(g.input, testing::numeric_gradient(x, loss)) < 1e-6);
    for (std::size_t h = 0; h < 3; ++h)
        CHECK(testing::max_relative_error(g.theta[h], testing::numeric_gradient(th[h], loss)) < 1e-6);

    std::vector<DenseMatrix> th1{rng.matrix(3, 2)};
    std::vector<DenseMatrix> b1;
    gconv_forward(lt, th1, x, &b1);
    auto g1 = gconv_backward(lt, th1, b1, w);
    CHECK((g1.theta[0] - x.transpose() * w).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((g1.input - w * th1[0].transpose()).cwiseAbs().maxCoeff() < 1e-14);

    auto z = gconv_backward(lt, th, basis, DenseMatrix::Zero(8, 2));
    CHECK(z.input.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(gconv_backward(lt, th, basis, DenseMatrix::Zero(7, 2)), InputError);

    ChebLayer layer(std::make_shared<const SparseMatrix>(lt), th);
    CHECK(layer.forward(x) == gconv_forward(lt, th, x));
    CHECK(layer.backward(x, w).input == g.input);
}

TEST_CASE("activations")
{
    DenseMatrix zero = DenseMatrix::Zero(1, 1);
    CHECK(activate(Activation::tanh, zero)(0, 0) == 0.0);
    CHECK(activate(Activation::sigmoid, zero)(0, 0) == 0.5);
    DenseMatrix v = (DenseMatrix(1, 2) << -3.5, 2.0).finished();
    CHECK(activate(Activation::linear, v) == v);
    DenseMatrix up = (DenseMatrix(1, 1) << 0.7).finished();
    CHECK(activation_backward(Activation::tanh, activate(Activation::tanh, zero), up)(0, 0) == 0.7);

    Rng rng(6);
    for (auto kind : {Activation::tanh, Activation::sigmoid, Activation::linear}) {
        DenseMatrix x = rng.matrix(4, 3, 2.0);
        DenseMatrix w = rng.matrix(4, 3);
        auto loss = [&] { return activate(kind, x).cwiseProduct(w).sum(); };
        DenseMatrix analytic = activation_backward(kind, activate(kind, x), w);
        CHECK(testing::max_relative_error(analytic, testing::numeric_gradient(x, loss), 1e-6) < 1e-8);
    }
}
