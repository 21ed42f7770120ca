#include "meshvae/vae.hpp"

#include "binary_io.hpp"
#include "meshvae/error.hpp"

#include <fstream>

namespace meshvae {

namespace {

constexpr std::string_view checkpoint_magic = "MVAE-CKPT";
constexpr std::uint32_t checkpoint_version = 1;

} // namespace

void write_checkpoint(std::ostream& out, const VaeParams& params, const ContentHash& hierarchy)
{
    io::BinaryWriter w(out);
    w.magic(checkpoint_magic);
    w.u32(checkpoint_version);
    w.string(params.arch.layers);
    w.u32(static_cast<std::uint32_t>(params.arch.latent));
    w.u32(static_cast<std::uint32_t>(params.arch.order));
    w.bytes(hierarchy);
    w.u64(params.seed);
    const auto tensors = params.tensors();
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        w.u32(static_cast<std::uint32_t>(t.tensor->rows()));
        w.u32(static_cast<std::uint32_t>(t.tensor->cols()));
        for (Eigen::Index i = 0; i < t.tensor->size(); ++i)
            w.f64(t.tensor->data()[i]);
    }
}

Checkpoint read_checkpoint(std::istream& in)
{
    io::BinaryReader r(in, "checkpoint");
    r.expect_magic(checkpoint_magic);
    const auto version = r.u32();
    if (version != checkpoint_version)
        throw InputError("checkpoint: unsupported version " + std::to_string(version));

    Checkpoint ck;
    ArchSpec arch;
    arch.layers = r.string(4096);
    arch.latent = r.u32();
    arch.order = r.u32();
    r.bytes(ck.hierarchy);
    const auto seed = r.u64();

    const auto count = r.u32();
    if (count > (1u << 20))
        throw InputError("checkpoint: implausible tensor count " + std::to_string(count));
    std::vector<DenseMatrix> tensors;
    tensors.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto rows = r.u32();
        const auto cols = r.u32();
        if (static_cast<std::uint64_t>(rows) * cols > (std::uint64_t{1} << 32))
            throw InputError("checkpoint: tensor " + std::to_string(k) + " is implausibly large");
        DenseMatrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m.data()[i] = r.f64();
        tensors.push_back(std::move(m));
    }
    r.expect_end();

    // Width, condition size and pooled size follow from the first encoder
    // tensor and fc_mean.
    if (arch.layers.empty() || arch.order == 0 || tensors.empty())
        throw InputError("checkpoint: empty architecture");
    const std::size_t convs = static_cast<std::size_t>(std::count(arch.layers.begin(), arch.layers.end(), 'C'));
    if (tensors[0].rows() < static_cast<Eigen::Index>(feature_dim) || tensors[0].cols() == 0)
        throw InputError("checkpoint: malformed first encoder tensor");
    arch.width = static_cast<std::size_t>(tensors[0].cols());
    arch.condition_dim = static_cast<std::size_t>(tensors[0].rows()) - feature_dim;
    const std::size_t conv_tensors = convs * arch.order;
    if (tensors.size() != 2 * conv_tensors + 2 + (arch.condition_dim > 0 ? 1 : 0))
        throw InputError("checkpoint: " + std::to_string(tensors.size()) + " tensors do not fit architecture '" +
                         arch.layers + "'");
    const auto& fc = tensors[conv_tensors];
    if (fc.rows() % static_cast<Eigen::Index>(arch.width) != 0)
        throw InputError("checkpoint: fc_mean rows are not a multiple of the width");
    const auto vp = static_cast<std::size_t>(fc.rows()) / arch.width;

    // Expected shapes from a template model on a stand-in hierarchy.
    std::vector<std::size_t> sizes(arch.pool_count() + 1, vp);
    VaeParams p = init_params(arch, sizes, 0);
    auto slots = p.tensors();
    for (std::size_t k = 0; k < slots.size(); ++k) {
        if (slots[k].tensor->rows() != tensors[k].rows() || slots[k].tensor->cols() != tensors[k].cols())
            throw InputError("checkpoint: tensor " + slots[k].name + " has shape " +
                             std::to_string(tensors[k].rows()) + "x" + std::to_string(tensors[k].cols()) +
                             ", expected " + std::to_string(slots[k].tensor->rows()) + "x" +
                             std::to_string(slots[k].tensor->cols()));
        *slots[k].tensor = std::move(tensors[k]);
    }
    p.seed = seed;
    ck.params = std::move(p);
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const VaeParams& params, const ContentHash& hierarchy)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write " + path.string());
    write_checkpoint(out, params, hierarchy);
    out.flush();
    if (!out)
        throw InputError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::optional<ContentHash>& expected)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open checkpoint " + path.string());
    Checkpoint ck;
    try {
        ck = read_checkpoint(in);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    if (expected && *expected != ck.hierarchy)
        throw InputError(path.string() + ": checkpoint was trained on hierarchy " + to_hex(ck.hierarchy) +
                         ", current hierarchy is " + to_hex(*expected));
    return ck;
}

} // namespace meshvae
