#include "meshvae/pooling.hpp"

#include "meshvae/error.hpp"

#include <string>

namespace meshvae {

namespace {

void expect_rows(const DenseMatrix& m, std::size_t rows, const char* what)
{
    if (static_cast<std::size_t>(m.rows()) != rows)
        throw InputError(std::string(what) + ": got " + std::to_string(m.rows()) + " rows, expected " +
                         std::to_string(rows));
}

} // namespace

PoolOperator build_pool_operator(const ContractionMap& map)
{
    if (map.parent.size() != map.fine_count)
        throw InputError("contraction map parent array has the wrong length");
    PoolOperator op;
    op.fine_count = map.fine_count;
    op.coarse_count = map.coarse_count;
    op.cluster_members.resize(map.coarse_count);
    for (std::size_t f = 0; f < map.fine_count; ++f) {
        if (map.parent[f] >= map.coarse_count)
            throw InputError("fine vertex " + std::to_string(f) + " maps outside the coarse level");
        op.cluster_members[map.parent[f]].push_back(static_cast<VertexId>(f));
    }

    std::vector<Triplet> avg;
    std::vector<Triplet> sel;
    avg.reserve(map.fine_count);
    sel.reserve(map.fine_count);
    for (std::size_t c = 0; c < map.coarse_count; ++c) {
        const auto& members = op.cluster_members[c];
        if (members.empty())
            throw InputError("coarse vertex " + std::to_string(c) + " has no fine vertices");
        const double w = 1.0 / static_cast<double>(members.size());
        for (auto f : members) {
            avg.push_back({static_cast<std::uint32_t>(c), f, w});
            sel.push_back({f, static_cast<std::uint32_t>(c), 1.0});
        }
    }
    op.averaging = SparseMatrix::from_triplets(map.coarse_count, map.fine_count, std::move(avg));
    op.selection = SparseMatrix::from_triplets(map.fine_count, map.coarse_count, std::move(sel));
    op.averaging_transpose = op.averaging.transpose();
    op.selection_transpose = op.selection.transpose();
    return op;
}

DenseMatrix pool(const PoolOperator& op, const DenseMatrix& fine)
{
    expect_rows(fine, op.fine_count, "pool");
    return multiply(op.averaging, fine);
}

DenseMatrix depool(const PoolOperator& op, const DenseMatrix& coarse)
{
    expect_rows(coarse, op.coarse_count, "depool");
    return multiply(op.selection, coarse);
}

DenseMatrix pool_backward(const PoolOperator& op, const DenseMatrix& upstream)
{
    expect_rows(upstream, op.coarse_count, "pool gradient");
    return multiply(op.averaging_transpose, upstream);
}

DenseMatrix depool_backward(const PoolOperator& op, const DenseMatrix& upstream)
{
    expect_rows(upstream, op.fine_count, "depool gradient");
    return multiply(op.selection_transpose, upstream);
}

} // namespace meshvae
