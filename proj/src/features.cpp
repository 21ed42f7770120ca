#include "meshvae/features.hpp"

#include "binary_io.hpp"
#include "meshvae/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

namespace meshvae {

namespace {

constexpr double min_cotangent_weight = 1e-6;

std::size_t edge_index(const Adjacency& adj, VertexId a, VertexId b)
{
    const Edge e = a < b ? Edge{a, b} : Edge{b, a};
    const auto it = std::lower_bound(adj.edges.begin(), adj.edges.end(), e);
    return static_cast<std::size_t>(it - adj.edges.begin());
}

struct EdgeGeometry {
    std::vector<double> weights;
    std::vector<char> boundary_vertex;
};

EdgeGeometry edge_geometry(const Mesh& mesh, const Adjacency& adj)
{
    EdgeGeometry g;
    g.weights.assign(adj.edges.size(), 0.0);
    std::vector<int> face_count(adj.edges.size(), 0);
    for (const auto& f : mesh.faces) {
        for (std::size_t k = 0; k < 3; ++k) {
            const VertexId a = f[k];
            const VertexId b = f[(k + 1) % 3];
            const VertexId o = f[(k + 2) % 3];
            const Vec3 u = mesh.positions[a] - mesh.positions[o];
            const Vec3 v = mesh.positions[b] - mesh.positions[o];
            const double cross = u.cross(v).norm();
            const double cot = cross > 0.0 ? u.dot(v) / cross : 0.0;
            const auto e = edge_index(adj, a, b);
            g.weights[e] += 0.5 * cot;
            ++face_count[e];
        }
    }
    g.boundary_vertex.assign(mesh.vertex_count(), 0);
    for (std::size_t e = 0; e < adj.edges.size(); ++e) {
        g.weights[e] = std::max(g.weights[e], min_cotangent_weight);
        if (face_count[e] == 1) {
            g.boundary_vertex[adj.edges[e].first] = 1;
            g.boundary_vertex[adj.edges[e].second] = 1;
        }
    }
    return g;
}

void check_deformed(const Mesh& base, std::span<const Vec3> deformed, const Adjacency& adj)
{
    if (deformed.size() != base.vertex_count() || adj.vertex_count() != base.vertex_count())
        throw InputError("deformed shape has " + std::to_string(deformed.size()) + " vertices, base has " +
                         std::to_string(base.vertex_count()));
}

// Returns true when the system had to be regularized.
bool vertex_gradient(VertexId i, const Mesh& base, std::span<const Vec3> deformed, const Adjacency& adj,
                     const EdgeGeometry& geom, Mat3& out)
{
    Mat3 a = Mat3::Zero();
    Mat3 b = Mat3::Zero();
    for (const auto j : adj.one_rings[i]) {
        const double c = geom.boundary_vertex[i] ? 1.0 : geom.weights[edge_index(adj, i, j)];
        const Vec3 e = base.positions[i] - base.positions[j];
        const Vec3 e_def = deformed[i] - deformed[j];
        a.noalias() += c * e * e.transpose();
        b.noalias() += c * e_def * e.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig;
    eig.computeDirect(a, Eigen::EigenvaluesOnly);
    const double largest = eig.eigenvalues().maxCoeff();
    bool regularized = false;
    if (!(eig.eigenvalues().minCoeff() > 1e-12 * largest)) {
        a += 1e-8 * std::max(a.trace(), std::numeric_limits<double>::min()) * Mat3::Identity();
        regularized = true;
    }
    // T A = B with A symmetric.
    out = a.ldlt().solve(b.transpose()).transpose();
    return regularized;
}

template <bool Parallel>
GradientResult gradients_impl(const Mesh& base, std::span<const Vec3> deformed, const Adjacency& adj)
{
    check_deformed(base, deformed, adj);
    const EdgeGeometry geom = edge_geometry(base, adj);
    const auto n = static_cast<std::ptrdiff_t>(base.vertex_count());
    for (std::ptrdiff_t v = 0; v < n; ++v)
        if (adj.one_rings[static_cast<std::size_t>(v)].empty())
            throw InputError("vertex " + std::to_string(v) + " has an empty one-ring");

    GradientResult result;
    result.gradients.resize(base.vertex_count());
    std::vector<char> flagged(base.vertex_count(), 0);
    if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t v = 0; v < n; ++v)
            flagged[static_cast<std::size_t>(v)] = vertex_gradient(
                static_cast<VertexId>(v), base, deformed, adj, geom, result.gradients[static_cast<std::size_t>(v)]);
    } else {
        for (std::ptrdiff_t v = 0; v < n; ++v)
            flagged[static_cast<std::size_t>(v)] = vertex_gradient(
                static_cast<VertexId>(v), base, deformed, adj, geom, result.gradients[static_cast<std::size_t>(v)]);
    }
    for (std::size_t v = 0; v < flagged.size(); ++v)
        if (flagged[v])
            result.regularized.push_back(static_cast<VertexId>(v));
    return result;
}

Mat3 skew(const Vec3& w)
{
    Mat3 k;
    k << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
    return k;
}

} // namespace

PolarFactors polar_decompose(const Mat3& t)
{
    const Eigen::JacobiSVD<Mat3> svd(t, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Mat3& u = svd.matrixU();
    const Mat3& w = svd.matrixV();
    Vec3 flip(1.0, 1.0, (u * w.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
    PolarFactors out;
    out.rotation = u * flip.asDiagonal() * w.transpose();
    const Mat3 s = w * (flip.cwiseProduct(svd.singularValues())).asDiagonal() * w.transpose();
    out.stretch = 0.5 * (s + s.transpose());
    return out;
}

Vec3 rotation_log(const Mat3& r)
{
    const Vec3 v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)); // 2 sinθ · axis
    const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    const double theta = std::atan2(0.5 * v.norm(), cos_theta);
    if (theta == 0.0)
        return Vec3::Zero();
    if (theta < std::numbers::pi - 1e-3)
        return (theta / v.norm()) * v;

    // Near π the antisymmetric part vanishes; read the axis off the
    // symmetric part cosθ·I + (1 - cosθ)·a aᵀ instead.
    const Mat3 sym = 0.5 * (r + r.transpose());
    Eigen::Index k = 0;
    sym.diagonal().maxCoeff(&k);
    Vec3 axis = sym.col(k);
    axis[k] -= cos_theta;
    axis.normalize();
    if (axis.dot(v) < 0.0)
        axis = -axis;
    return theta * axis;
}

Mat3 rotation_exp(const Vec3& w)
{
    const double theta = w.norm();
    const Mat3 k = skew(w);
    if (theta < 1e-8)
        return Mat3::Identity() + k + 0.5 * k * k;
    return Mat3::Identity() + (std::sin(theta) / theta) * k + ((1.0 - std::cos(theta)) / (theta * theta)) * k * k;
}

std::vector<double> cotangent_weights(const Mesh& mesh, const Adjacency& adj)
{
    return edge_geometry(mesh, adj).weights;
}

GradientResult deformation_gradients(const Mesh& base, std::span<const Vec3> deformed, const Adjacency& adj)
{
    return gradients_impl<true>(base, deformed, adj);
}

namespace kernels::serial {
GradientResult deformation_gradients(const Mesh& base, std::span<const Vec3> deformed, const Adjacency& adj)
{
    return gradients_impl<false>(base, deformed, adj);
}
} // namespace kernels::serial

DenseMatrix raw_features(std::span<const Mat3> gradients)
{
    DenseMatrix q(static_cast<Eigen::Index>(gradients.size()), static_cast<Eigen::Index>(feature_dim));
    for (std::size_t v = 0; v < gradients.size(); ++v) {
        const auto [r, s] = polar_decompose(gradients[v]);
        const Vec3 w = rotation_log(r);
        const auto i = static_cast<Eigen::Index>(v);
        q.row(i) << w.x(), w.y(), w.z(), s(0, 0), s(0, 1), s(0, 2), s(1, 1), s(1, 2), s(2, 2);
    }
    return q;
}

std::vector<Mat3> gradients_from_raw(const DenseMatrix& raw)
{
    if (raw.cols() != static_cast<Eigen::Index>(feature_dim))
        throw InputError("feature matrix must have 9 columns");
    std::vector<Mat3> out(static_cast<std::size_t>(raw.rows()));
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        const auto q = raw.row(i);
        Mat3 s;
        s << q(3), q(4), q(5), q(4), q(6), q(7), q(5), q(7), q(8);
        out[static_cast<std::size_t>(i)] = rotation_exp(Vec3(q(0), q(1), q(2))) * s;
    }
    return out;
}

ScaleParams ScaleParams::fit(std::span<const DenseMatrix> raw)
{
    if (raw.empty())
        throw InputError("cannot fit feature scaling to an empty dataset");
    ScaleParams p;
    for (std::size_t j = 0; j < feature_dim; ++j) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& m : raw) {
            lo = std::min(lo, m.col(static_cast<Eigen::Index>(j)).minCoeff());
            hi = std::max(hi, m.col(static_cast<Eigen::Index>(j)).maxCoeff());
        }
        if (hi - lo < 1e-12) {
            p.columns[j] = {1.0, -lo};
        } else {
            const double a = 1.9 / (hi - lo);
            p.columns[j] = {a, -0.95 - a * lo};
        }
    }
    return p;
}

DenseMatrix ScaleParams::apply(const DenseMatrix& raw) const
{
    // a·min + b and a·max + b can miss ±0.95 by an ulp; snap them so the
    // training extremes land exactly on the ends
    constexpr double end = 0.95, slack = 8 * std::numeric_limits<double>::epsilon();
    DenseMatrix out(raw.rows(), raw.cols());
    for (std::size_t j = 0; j < feature_dim; ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        out.col(c) = (columns[j].a * raw.col(c).array() + columns[j].b).matrix();
        for (auto& y : out.col(c))
            if (std::abs(std::abs(y) - end) <= slack)
                y = std::copysign(end, y);
    }
    return out;
}

DenseMatrix ScaleParams::invert(const DenseMatrix& scaled) const
{
    if (scaled.cols() != static_cast<Eigen::Index>(feature_dim))
        throw InputError("feature matrix must have 9 columns");
    DenseMatrix out(scaled.rows(), scaled.cols());
    for (std::size_t j = 0; j < feature_dim; ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        out.col(c) = ((scaled.col(c).array() - columns[j].b) / columns[j].a).matrix();
    }
    return out;
}

FeatureSet encode_features(const Mesh& base, std::span<const Mesh> shapes, const Adjacency& adj)
{
    if (shapes.empty())
        throw InputError("dataset is empty");
    std::vector<DenseMatrix> raw;
    raw.reserve(shapes.size());
    for (std::size_t s = 0; s < shapes.size(); ++s) {
        const auto report = validate_same_connectivity(base, shapes[s]);
        if (!report)
            throw InputError("shape " + std::to_string(s) + ": " + report.message);
        raw.push_back(raw_features(deformation_gradients(base, shapes[s].positions, adj).gradients));
    }

    FeatureSet fs;
    fs.scale = ScaleParams::fit(raw);
    // columns narrower than 1e-12 become exactly 0; apply() alone would leave
    // x - min, which can be a few ulps off
    std::array<bool, feature_dim> flat{};
    for (std::size_t j = 0; j < feature_dim; ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& m : raw) {
            lo = std::min(lo, m.col(c).minCoeff());
            hi = std::max(hi, m.col(c).maxCoeff());
        }
        flat[j] = hi - lo < 1e-12;
    }
    for (auto& m : raw) {
        m = fs.scale.apply(m);
        for (std::size_t j = 0; j < feature_dim; ++j)
            if (flat[j])
                m.col(static_cast<Eigen::Index>(j)).setZero();
    }
    fs.shapes = std::move(raw);
    return fs;
}

DenseMatrix encode_with_scale(const Mesh& base, const Mesh& shape, const Adjacency& adj, const ScaleParams& scale)
{
    const auto report = validate_same_connectivity(base, shape);
    if (!report)
        throw InputError(report.message);
    return scale.apply(raw_features(deformation_gradients(base, shape.positions, adj).gradients));
}

std::vector<Mat3> decode_features(const DenseMatrix& scaled, const ScaleParams& scale)
{
    return gradients_from_raw(scale.invert(scaled));
}

std::vector<Vec3> reconstruct_positions(const Mesh& base, std::span<const Mat3> gradients, const Adjacency& adj,
                                        const Anchor& anchor)
{
    const std::size_t n = base.vertex_count();
    if (gradients.size() != n)
        throw InputError("need one deformation gradient per vertex");
    if (anchor.vertex >= n)
        throw InputError("anchor vertex out of range");
    const auto weights = cotangent_weights(base, adj);

    // Unknowns: every vertex except the anchor.
    auto slot = [&](VertexId v) { return static_cast<Eigen::Index>(v < anchor.vertex ? v : v - 1); };
    const auto free_count = static_cast<Eigen::Index>(n - 1);
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(4 * adj.edges.size());
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(free_count, 3);
    for (std::size_t e = 0; e < adj.edges.size(); ++e) {
        const auto [i, j] = adj.edges[e];
        const double c = weights[e];
        const Vec3 target = 0.5 * (gradients[i] + gradients[j]) * (base.positions[i] - base.positions[j]);
        // c (p_i - p_j - target) contributes to rows i and j.
        if (i != anchor.vertex) {
            entries.emplace_back(slot(i), slot(i), c);
            rhs.row(slot(i)) += c * target.transpose();
            if (j != anchor.vertex)
                entries.emplace_back(slot(i), slot(j), -c);
            else
                rhs.row(slot(i)) += c * anchor.position.transpose();
        }
        if (j != anchor.vertex) {
            entries.emplace_back(slot(j), slot(j), c);
            rhs.row(slot(j)) -= c * target.transpose();
            if (i != anchor.vertex)
                entries.emplace_back(slot(j), slot(i), -c);
            else
                rhs.row(slot(j)) += c * anchor.position.transpose();
        }
    }
    Eigen::SparseMatrix<double> system(free_count, free_count);
    system.setFromTriplets(entries.begin(), entries.end());

    Eigen::MatrixXd solution;
    if (n < 5000) {
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(system);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError("reconstruction: factorization failed (is the mesh connected?)");
        solution = ldlt.solve(rhs);
    } else {
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg(system);
        cg.setTolerance(1e-10);
        cg.setMaxIterations(static_cast<Eigen::Index>(10 * n));
        solution = cg.solve(rhs);
        if (cg.info() != Eigen::Success)
            throw NumericalError("reconstruction: conjugate gradients stopped after " +
                                 std::to_string(cg.iterations()) + " iterations, relative residual " +
                                 std::to_string(cg.error()));
    }
    const double rhs_norm = rhs.norm();
    const double residual = (system * solution - rhs).norm();
    if (!std::isfinite(residual) || residual > 1e-8 * std::max(rhs_norm, 1.0))
        throw NumericalError("reconstruction: residual " + std::to_string(residual) + " for right-hand side norm " +
                             std::to_string(rhs_norm));

    std::vector<Vec3> out(n);
    for (std::size_t v = 0; v < n; ++v)
        out[v] = v == anchor.vertex ? anchor.position
                                    : Vec3(solution.row(slot(static_cast<VertexId>(v))).transpose());
    return out;
}

std::vector<Vec3> reconstruct_positions(const Mesh& base, std::span<const Mat3> gradients, const Adjacency& adj)
{
    if (base.vertex_count() == 0)
        return {};
    return reconstruct_positions(base, gradients, adj, Anchor{0, base.positions[0]});
}

double reconstruction_energy(const Mesh& base, std::span<const Mat3> gradients, const Adjacency& adj,
                             std::span<const Vec3> positions)
{
    const auto weights = cotangent_weights(base, adj);
    double energy = 0.0;
    for (std::size_t e = 0; e < adj.edges.size(); ++e) {
        const auto [i, j] = adj.edges[e];
        const Vec3 target = 0.5 * (gradients[i] + gradients[j]) * (base.positions[i] - base.positions[j]);
        energy += weights[e] * (positions[i] - positions[j] - target).squaredNorm();
    }
    return energy;
}

namespace {
constexpr std::string_view feature_magic = "MVAE-FEAT";
constexpr std::uint32_t feature_version = 1;
} // namespace

void write_feature_file(std::ostream& out, const FeatureSet& features)
{
    io::BinaryWriter w(out);
    w.magic(feature_magic);
    w.u32(feature_version);
    w.u32(static_cast<std::uint32_t>(features.vertex_count()));
    w.u32(static_cast<std::uint32_t>(feature_dim));
    w.u32(static_cast<std::uint32_t>(features.shapes.size()));
    for (const auto& c : features.scale.columns) {
        w.f64(c.a);
        w.f64(c.b);
    }
    for (const auto& m : features.shapes)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                w.f64(m(i, j));
}

FeatureSet read_feature_file(std::istream& in)
{
    io::BinaryReader r(in, "feature file");
    r.expect_magic(feature_magic);
    const auto version = r.u32();
    if (version != feature_version)
        throw InputError("feature file: unsupported version " + std::to_string(version));
    const auto v = r.u32();
    const auto c = r.u32();
    const auto count = r.u32();
    if (c != feature_dim)
        throw InputError("feature file: expected 9 channels, found " + std::to_string(c));
    FeatureSet fs;
    for (auto& col : fs.scale.columns) {
        col.a = r.f64();
        col.b = r.f64();
        if (col.a == 0.0 || !std::isfinite(col.a) || !std::isfinite(col.b))
            throw InputError("feature file: non-invertible scaling");
    }
    fs.shapes.reserve(count);
    for (std::uint32_t s = 0; s < count; ++s) {
        DenseMatrix m(v, static_cast<Eigen::Index>(feature_dim));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = r.f64();
        fs.shapes.push_back(std::move(m));
    }
    r.expect_end();
    return fs;
}

void save_features(const std::filesystem::path& path, const FeatureSet& features)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write '" + path.string() + "'");
    write_feature_file(out, features);
}

FeatureSet load_features(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open feature file '" + path.string() + "'");
    try {
        return read_feature_file(in);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

} // namespace meshvae
