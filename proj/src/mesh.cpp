#include "meshvae/mesh.hpp"

#include "meshvae/error.hpp"
#include "meshvae/log.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace meshvae {

namespace {

std::vector<std::string_view> split_ws(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
            ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r')
            ++j;
        if (j > i)
            out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_double(std::string_view token, std::size_t line_no)
{
    double v = 0.0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    if (!token.empty() && *first == '+')
        ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw InputError("obj line " + std::to_string(line_no) + ": malformed number '" + std::string(token) + "'");
    return v;
}

VertexId parse_index(std::string_view token, std::size_t vertex_count, std::size_t line_no)
{
    const auto slash = token.find('/');
    const auto head = token.substr(0, slash);
    long long idx = 0;
    const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
    if (ec != std::errc{} || ptr != head.data() + head.size() || idx == 0)
        throw InputError("obj line " + std::to_string(line_no) + ": malformed face index '" + std::string(token) +
                         "'");
    const long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(vertex_count) + idx;
    if (resolved < 0 || resolved >= static_cast<long long>(vertex_count))
        throw InputError("obj line " + std::to_string(line_no) + ": face index " + std::to_string(idx) +
                         " out of range (" + std::to_string(vertex_count) + " vertices)");
    return static_cast<VertexId>(resolved);
}

Edge make_edge(VertexId a, VertexId b) { return a < b ? Edge{a, b} : Edge{b, a}; }

} // namespace

Mesh parse_obj(std::istream& in)
{
    Mesh mesh;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tokens = split_ws(line);
        if (tokens.empty() || tokens[0].starts_with('#'))
            continue;
        if (tokens[0] == "v") {
            if (tokens.size() < 4)
                throw InputError("obj line " + std::to_string(line_no) + ": vertex needs three coordinates");
            mesh.positions.emplace_back(parse_double(tokens[1], line_no), parse_double(tokens[2], line_no),
                                        parse_double(tokens[3], line_no));
        } else if (tokens[0] == "f") {
            if (tokens.size() != 4)
                throw InputError("obj line " + std::to_string(line_no) + ": face has " +
                                 std::to_string(tokens.size() - 1) + " vertices, only triangles are supported");
            Face f{};
            for (int k = 0; k < 3; ++k)
                f[static_cast<std::size_t>(k)] = parse_index(tokens[static_cast<std::size_t>(k) + 1],
                                                             mesh.positions.size(), line_no);
            mesh.faces.push_back(f);
        }
    }
    validate_mesh(mesh);
    return mesh;
}

Mesh read_obj(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open mesh '" + path.string() + "'");
    try {
        return parse_obj(in);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_obj(std::ostream& out, const Mesh& mesh)
{
    const auto old_precision = out.precision(17);
    for (const auto& p : mesh.positions)
        out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    out.precision(old_precision);
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write mesh '" + path.string() + "'");
    write_obj(out, mesh);
}

void validate_mesh(const Mesh& mesh)
{
    const auto n = mesh.vertex_count();
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        const auto& f = mesh.faces[i];
        if (f[0] >= n || f[1] >= n || f[2] >= n)
            throw InputError("face " + std::to_string(i) + " references a vertex outside [0, " + std::to_string(n) +
                             ")");
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
            throw InputError("face " + std::to_string(i) + " repeats a vertex index");
    }
}

ConnectivityReport validate_same_connectivity(const Mesh& reference, const Mesh& other)
{
    ConnectivityReport report;
    if (reference.vertex_count() != other.vertex_count()) {
        report.ok = false;
        report.message = "vertex count " + std::to_string(other.vertex_count()) + " differs from reference " +
                         std::to_string(reference.vertex_count());
        return report;
    }
    if (reference.face_count() != other.face_count()) {
        report.ok = false;
        report.message = "face count " + std::to_string(other.face_count()) + " differs from reference " +
                         std::to_string(reference.face_count());
        return report;
    }
    for (std::size_t i = 0; i < reference.faces.size(); ++i) {
        if (reference.faces[i] != other.faces[i]) {
            const auto& a = reference.faces[i];
            const auto& b = other.faces[i];
            report.ok = false;
            report.face = i;
            std::ostringstream msg;
            msg << "face " << i << " is (" << b[0] << ", " << b[1] << ", " << b[2] << "), reference has (" << a[0]
                << ", " << a[1] << ", " << a[2] << ")";
            report.message = msg.str();
            return report;
        }
    }
    return report;
}

Adjacency build_adjacency(const Mesh& mesh)
{
    validate_mesh(mesh);
    std::vector<std::pair<Edge, std::uint32_t>> incidences;
    incidences.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces)
        for (int k = 0; k < 3; ++k)
            incidences.push_back({make_edge(f[static_cast<std::size_t>(k)], f[static_cast<std::size_t>((k + 1) % 3)]), 1});
    std::sort(incidences.begin(), incidences.end());

    Adjacency adj;
    adj.one_rings.resize(mesh.vertex_count());
    for (std::size_t i = 0; i < incidences.size();) {
        std::size_t j = i;
        while (j < incidences.size() && incidences[j].first == incidences[i].first)
            ++j;
        const auto e = incidences[i].first;
        if (j - i > 2)
            throw InputError("non-manifold edge (" + std::to_string(e.first) + ", " + std::to_string(e.second) +
                             ") shared by " + std::to_string(j - i) + " faces");
        adj.edges.push_back(e);
        adj.one_rings[e.first].push_back(e.second);
        adj.one_rings[e.second].push_back(e.first);
        i = j;
    }
    adj.degrees.resize(mesh.vertex_count());
    for (std::size_t v = 0; v < adj.one_rings.size(); ++v) {
        std::sort(adj.one_rings[v].begin(), adj.one_rings[v].end());
        adj.degrees[v] = static_cast<std::uint32_t>(adj.one_rings[v].size());
    }
    return adj;
}

SparseMatrix normalized_laplacian(const Adjacency& adj)
{
    const auto n = adj.vertex_count();
    for (std::size_t v = 0; v < n; ++v)
        if (adj.degrees[v] == 0)
            throw InputError("vertex " + std::to_string(v) + " is isolated; the normalized Laplacian is undefined");

    // Component count by union-find, only to warn.
    std::vector<std::size_t> root(n);
    std::iota(root.begin(), root.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (root[x] != x)
            x = root[x] = root[root[x]];
        return x;
    };
    for (const auto& [a, b] : adj.edges)
        root[find(a)] = find(b);
    std::size_t components = 0;
    for (std::size_t v = 0; v < n; ++v)
        components += find(v) == v;
    if (components > 1)
        log::warn("graph has " + std::to_string(components) + " connected components");

    std::vector<Triplet> t;
    t.reserve(n + 2 * adj.edges.size());
    for (std::size_t v = 0; v < n; ++v)
        t.push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(v), 1.0});
    for (const auto& [a, b] : adj.edges) {
        // The product is commutative, so both triplets are bit-identical.
        const double w = -1.0 / std::sqrt(static_cast<double>(adj.degrees[a]) * static_cast<double>(adj.degrees[b]));
        t.push_back({a, b, w});
        t.push_back({b, a, w});
    }
    return SparseMatrix::from_triplets(n, n, std::move(t));
}

double estimate_lambda_max(const SparseMatrix& laplacian)
{
    constexpr int max_iterations = 200;
    constexpr double tolerance = 1e-8;
    constexpr double bound = 2.0;

    const auto n = static_cast<Eigen::Index>(laplacian.rows());
    if (n == 0)
        return bound;
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    DenseMatrix v(n, 1);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i, 0) = dist(rng);
    v /= v.norm();

    // stop on the relative change of the Rayleigh quotient
    DenseMatrix w;
    double previous = 0.0;
    for (int it = 0; it < max_iterations; ++it) {
        kernels::spmm_axpby(1.0, laplacian, v, 0.0, nullptr, w);
        const double norm = w.norm();
        if (!(norm > 0.0))
            return bound;
        const double lambda = v.col(0).dot(w.col(0));
        if (it > 0 && std::abs(lambda - previous) <= tolerance * std::abs(lambda))
            return std::min(lambda, bound);
        previous = lambda;
        v = w / norm;
    }
    return bound;
}

double bounding_box_diagonal(std::span<const Vec3> positions)
{
    if (positions.empty())
        return 0.0;
    Vec3 lo = positions[0];
    Vec3 hi = positions[0];
    for (const auto& p : positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

} // namespace meshvae
