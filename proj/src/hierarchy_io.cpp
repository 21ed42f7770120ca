#include "meshvae/simplify.hpp"

#include "binary_io.hpp"
#include "meshvae/error.hpp"

#include <fstream>
#include <sstream>

namespace meshvae {

namespace {

constexpr std::string_view map_magic = "MVAE-HIER";
constexpr std::uint32_t map_version = 1;

std::filesystem::path level_path(const std::filesystem::path& dir, std::size_t k)
{
    return dir / ("level_" + std::to_string(k) + ".obj");
}

std::filesystem::path map_path(const std::filesystem::path& dir, std::size_t k)
{
    return dir / ("map_" + std::to_string(k) + ".bin");
}

} // namespace

void write_contraction_map(std::ostream& out, const ContractionMap& map)
{
    io::BinaryWriter w(out);
    w.magic(map_magic);
    w.u32(map_version);
    w.u32(static_cast<std::uint32_t>(map.fine_count));
    w.u32(static_cast<std::uint32_t>(map.coarse_count));
    for (auto p : map.parent)
        w.u32(p);
    for (const auto& s : map.log) {
        w.u32(s.kept);
        w.u32(s.removed);
        w.f64(s.position.x());
        w.f64(s.position.y());
        w.f64(s.position.z());
    }
}

ContractionMap read_contraction_map(std::istream& in)
{
    io::BinaryReader r(in, "contraction map");
    r.expect_magic(map_magic);
    const auto version = r.u32();
    if (version != map_version)
        throw InputError("contraction map: unsupported version " + std::to_string(version));
    ContractionMap map;
    map.fine_count = r.u32();
    map.coarse_count = r.u32();
    if (map.coarse_count > map.fine_count || (map.fine_count > 0 && map.coarse_count == 0))
        throw InputError("contraction map: coarse count exceeds fine count");
    map.parent.resize(map.fine_count);
    for (auto& p : map.parent) {
        p = r.u32();
        if (p >= map.coarse_count)
            throw InputError("contraction map: parent index out of range");
    }
    map.log.resize(map.fine_count - map.coarse_count);
    for (auto& s : map.log) {
        s.kept = r.u32();
        s.removed = r.u32();
        const double x = r.f64();
        const double y = r.f64();
        const double z = r.f64();
        s.position = Vec3(x, y, z);
    }
    r.expect_end();
    if (replay_contractions(map.fine_count, map.log) != map.parent)
        throw InputError("contraction map: parent array disagrees with the contraction log");
    return map;
}

ContentHash hierarchy_hash(const Hierarchy& hierarchy)
{
    std::ostringstream buf;
    io::BinaryWriter w(buf);
    w.magic("meshvae-hierarchy");
    w.u32(static_cast<std::uint32_t>(hierarchy.levels.size()));
    for (const auto& level : hierarchy.levels) {
        w.u32(static_cast<std::uint32_t>(level.mesh.vertex_count()));
        w.u32(static_cast<std::uint32_t>(level.mesh.face_count()));
        for (const auto& p : level.mesh.positions)
            for (int k = 0; k < 3; ++k)
                w.f64(p[k]);
        for (const auto& f : level.mesh.faces)
            for (auto v : f)
                w.u32(v);
    }
    for (const auto& map : hierarchy.maps)
        write_contraction_map(buf, map);
    io::Sha256 sha;
    sha.update(buf.str());
    return sha.finish();
}

std::string to_hex(const ContentHash& hash) { return io::to_hex(hash); }

void save_hierarchy(const std::filesystem::path& dir, const Hierarchy& hierarchy)
{
    std::filesystem::create_directories(dir);
    {
        std::ofstream manifest(dir / "levels.txt");
        if (!manifest)
            throw InputError("cannot write hierarchy manifest in '" + dir.string() + "'");
        manifest.precision(17);
        manifest << "meshvae-hierarchy 1\nlevels " << hierarchy.depth() << "\nlambda " << hierarchy.lambda << '\n';
    }
    for (std::size_t k = 0; k < hierarchy.levels.size(); ++k)
        save_obj(level_path(dir, k), hierarchy.levels[k].mesh);
    for (std::size_t k = 0; k < hierarchy.maps.size(); ++k) {
        std::ofstream out(map_path(dir, k), std::ios::binary);
        if (!out)
            throw InputError("cannot write '" + map_path(dir, k).string() + "'");
        write_contraction_map(out, hierarchy.maps[k]);
    }
}

Hierarchy load_hierarchy(const std::filesystem::path& dir)
{
    std::ifstream manifest(dir / "levels.txt");
    if (!manifest)
        throw InputError("no hierarchy in '" + dir.string() + "' (levels.txt missing)");
    std::string tag, key;
    int version = 0;
    std::size_t depth = 0;
    Hierarchy h;
    if (!(manifest >> tag >> version) || tag != "meshvae-hierarchy" || version != 1)
        throw InputError("hierarchy manifest has an unknown header");
    if (!(manifest >> key >> depth) || key != "levels")
        throw InputError("hierarchy manifest: missing level count");
    if (!(manifest >> key >> h.lambda) || key != "lambda")
        throw InputError("hierarchy manifest: missing lambda");

    for (std::size_t k = 0; k <= depth; ++k) {
        Mesh m = read_obj(level_path(dir, k));
        Adjacency adj = build_adjacency(m);
        h.levels.push_back({std::move(m), std::move(adj)});
    }
    for (std::size_t k = 0; k < depth; ++k) {
        std::ifstream in(map_path(dir, k), std::ios::binary);
        if (!in)
            throw InputError("cannot open '" + map_path(dir, k).string() + "'");
        ContractionMap map = read_contraction_map(in);
        if (map.fine_count != h.levels[k].mesh.vertex_count() ||
            map.coarse_count != h.levels[k + 1].mesh.vertex_count())
            throw InputError("contraction map " + std::to_string(k) + " does not match the level meshes");
        map.coarse_positions = h.levels[k + 1].mesh.positions;
        h.maps.push_back(std::move(map));
    }
    return h;
}

} // namespace meshvae
