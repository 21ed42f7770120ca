#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace meshvae {

/// Per-vertex feature matrices: one row per vertex, one column per channel.
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Triplet {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    double value = 0.0;
};

/// Immutable compressed-row sparse matrix. Column indices are sorted within
/// each row and every (row, col) is stored at most once.
class SparseMatrix {
public:
    SparseMatrix() = default;

    // Duplicate (row, col) entries are summed. Out-of-range indices throw InputError.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);
    static SparseMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nonzeros() const { return values_.size(); }

    std::span<const std::size_t> row_offsets() const { return offsets_; }
    std::span<const std::uint32_t> col_indices() const { return columns_; }
    std::span<const double> values() const { return values_; }

    /// Stored value at (row, col), or 0 when the entry is structurally absent.
    double coeff(std::size_t row, std::size_t col) const;

    SparseMatrix transpose() const;
    std::vector<Triplet> triplets() const;
    DenseMatrix to_dense() const;

    /// Bit-exact structural and value equality.
    bool operator==(const SparseMatrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<std::uint32_t> columns_;
    std::vector<double> values_;
};

/// Sparse product. Each output entry is accumulated with compensated
/// summation, so sums such as n copies of 1/n come out exactly 1 for the
/// cluster sizes pooling produces.
SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b);

/// a * x using the parallel kernel.
DenseMatrix multiply(const SparseMatrix& a, const DenseMatrix& x);

SparseMatrix scaled_sum(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b);

namespace kernels {

// y = alpha * a * x + beta * b. `b` may alias nothing else; y is resized.
// OpenMP over rows; output is bit-identical to the serial version.
void spmm_axpby(double alpha, const SparseMatrix& a, const DenseMatrix& x, double beta, const DenseMatrix* b,
                DenseMatrix& y);

namespace serial {
void spmm_axpby(double alpha, const SparseMatrix& a, const DenseMatrix& x, double beta, const DenseMatrix* b,
                DenseMatrix& y);
} // namespace serial

} // namespace kernels

} // namespace meshvae
