#pragma once

// Average pooling over contraction clusters and its de-pooling inverse.

#include "meshvae/simplify.hpp"
#include "meshvae/sparse.hpp"

#include <vector>

namespace meshvae {

struct PoolOperator {
    std::size_t fine_count = 0;
    std::size_t coarse_count = 0;
    std::vector<std::vector<VertexId>> cluster_members; // per coarse vertex, ascending fine ids
    SparseMatrix averaging;           // P, coarse x fine, row-stochastic
    SparseMatrix selection;           // Dp, fine x coarse, one 1 per row
    SparseMatrix averaging_transpose; // Pᵀ
    SparseMatrix selection_transpose; // Dpᵀ
};

/// Clusters are the preimages of `map.parent`, so chained contractions pool
/// over every merged vertex. Throws InputError on an empty cluster.
PoolOperator build_pool_operator(const ContractionMap& map);

DenseMatrix pool(const PoolOperator& op, const DenseMatrix& fine);
DenseMatrix depool(const PoolOperator& op, const DenseMatrix& coarse);

// Gradients of the two linear maps: Pᵀ·g and Dpᵀ·g.
DenseMatrix pool_backward(const PoolOperator& op, const DenseMatrix& upstream);
DenseMatrix depool_backward(const PoolOperator& op, const DenseMatrix& upstream);

} // namespace meshvae
