// Serial reference kernels against their OpenMP counterparts.

#include "meshvae/features.hpp"
#include "meshvae/gconv.hpp"
#include "meshvae/simplify.hpp"
#include "meshvae/toy.hpp"
#include "meshvae/vae.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace meshvae;

struct Fixture {
    Mesh mesh;
    Adjacency adj;
    SparseMatrix lt;
    DenseMatrix x;

    explicit Fixture(std::size_t major)
    {
        mesh = toy::torus(major, 65);
        adj = build_adjacency(mesh);
        auto lap = normalized_laplacian(adj);
        lt = scale_laplacian(lap, estimate_lambda_max(lap));
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(-1, 1);
        x.resize(static_cast<Eigen::Index>(mesh.vertex_count()), 9);
        for (Eigen::Index i = 0; i < x.size(); ++i)
            x.data()[i] = u(rng);
    }
};

const Fixture& fixture()
{
    static const Fixture f(106); // 6890 vertices
    return f;
}

void BM_spmm_serial(benchmark::State& state)
{
    const auto& f = fixture();
    DenseMatrix y;
    for (auto _ : state) {
        kernels::serial::spmm_axpby(1.0, f.lt, f.x, 0.0, nullptr, y);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_spmm_serial);

void BM_spmm_parallel(benchmark::State& state)
{
    const auto& f = fixture();
    DenseMatrix y;
    for (auto _ : state) {
        kernels::spmm_axpby(1.0, f.lt, f.x, 0.0, nullptr, y);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_spmm_parallel);

void BM_cheb_serial(benchmark::State& state)
{
    const auto& f = fixture();
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::serial::cheb_apply(f.lt, f.x, 3));
}
BENCHMARK(BM_cheb_serial);

void BM_cheb_parallel(benchmark::State& state)
{
    const auto& f = fixture();
    for (auto _ : state)
        benchmark::DoNotOptimize(cheb_apply(f.lt, f.x, 3));
}
BENCHMARK(BM_cheb_parallel);

std::vector<Vec3> twisted(const Mesh& m)
{
    std::vector<Vec3> out;
    for (const auto& p : m.positions) {
        const double a = 0.2 * p.z();
        out.emplace_back(std::cos(a) * p.x() - std::sin(a) * p.y(), std::sin(a) * p.x() + std::cos(a) * p.y(),
                         1.1 * p.z());
    }
    return out;
}

void BM_gradients_serial(benchmark::State& state)
{
    const auto& f = fixture();
    const auto def = twisted(f.mesh);
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::serial::deformation_gradients(f.mesh, def, f.adj));
}
BENCHMARK(BM_gradients_serial);

void BM_gradients_parallel(benchmark::State& state)
{
    const auto& f = fixture();
    const auto def = twisted(f.mesh);
    for (auto _ : state)
        benchmark::DoNotOptimize(deformation_gradients(f.mesh, def, f.adj));
}
BENCHMARK(BM_gradients_parallel);

struct TrainFixture {
    Hierarchy hierarchy;
    std::vector<DenseMatrix> shapes;
    std::vector<Example> batch;
    std::vector<Eigen::VectorXd> noise;
    std::unique_ptr<VaeNetwork> net;

    TrainFixture()
    {
        auto data = toy::bent_cylinders(8, 3);
        hierarchy = build_hierarchy(data.base, 1);
        auto set = encode_features(data.base, data.shapes, hierarchy.levels[0].adjacency);
        shapes = std::move(set.shapes);
        ArchSpec arch;
        net = std::make_unique<VaeNetwork>(hierarchy, build_model(hierarchy, arch, 1));
        std::mt19937_64 rng(5);
        std::normal_distribution<double> n;
        for (const auto& s : shapes) {
            batch.push_back({&s, {}});
            Eigen::VectorXd e(static_cast<Eigen::Index>(arch.latent));
            for (Eigen::Index d = 0; d < e.size(); ++d)
                e[d] = n(rng);
            noise.push_back(std::move(e));
        }
    }
};

const TrainFixture& train_fixture()
{
    static const TrainFixture f;
    return f;
}

void BM_batch_gradient_serial(benchmark::State& state)
{
    const auto& f = train_fixture();
    VaeParams g;
    for (auto _ : state)
        benchmark::DoNotOptimize(f.net->loss_and_gradient_serial(f.batch, f.noise, 0.3, 1e-5, &g));
}
BENCHMARK(BM_batch_gradient_serial);

void BM_batch_gradient_parallel(benchmark::State& state)
{
    const auto& f = train_fixture();
    VaeParams g;
    for (auto _ : state)
        benchmark::DoNotOptimize(f.net->loss_and_gradient(f.batch, f.noise, 0.3, 1e-5, &g));
}
BENCHMARK(BM_batch_gradient_parallel);

} // namespace

BENCHMARK_MAIN();
