#include "meshvae/sparse.hpp"

#include "meshvae/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace meshvae {

namespace {

// Neumaier's variant of Kahan summation.
class CompensatedSum {
public:
    void add(double x)
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            carry_ += (sum_ - t) + x;
        else
            carry_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

inline void spmm_row(std::size_t row, double alpha, const SparseMatrix& a, const DenseMatrix& x, double beta,
                     const DenseMatrix* b, DenseMatrix& y)
{
    const auto offsets = a.row_offsets();
    const auto cols = a.col_indices();
    const auto vals = a.values();
    auto out = y.row(static_cast<Eigen::Index>(row));
    out.setZero();
    for (std::size_t k = offsets[row]; k < offsets[row + 1]; ++k)
        out.noalias() += vals[k] * x.row(cols[k]);
    if (alpha != 1.0)
        out *= alpha;
    if (b != nullptr)
        out.noalias() += beta * b->row(static_cast<Eigen::Index>(row));
}

void check_spmm_shapes(const SparseMatrix& a, const DenseMatrix& x, const DenseMatrix* b)
{
    if (static_cast<std::size_t>(x.rows()) != a.cols())
        throw InputError("sparse product: operand has " + std::to_string(x.rows()) + " rows, expected " +
                         std::to_string(a.cols()));
    if (b != nullptr && (static_cast<std::size_t>(b->rows()) != a.rows() || b->cols() != x.cols()))
        throw InputError("sparse product: addend shape mismatch");
}

} // namespace

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries)
{
    for (const auto& t : entries) {
        if (t.row >= rows || t.col >= cols)
            throw InputError("sparse entry (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                             ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Triplet& l, const Triplet& r) {
        return l.row != r.row ? l.row < r.row : l.col < r.col;
    });

    SparseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.offsets_.assign(rows + 1, 0);
    m.columns_.reserve(entries.size());
    m.values_.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size();) {
        std::size_t j = i;
        CompensatedSum sum;
        while (j < entries.size() && entries[j].row == entries[i].row && entries[j].col == entries[i].col)
            sum.add(entries[j++].value);
        m.columns_.push_back(entries[i].col);
        m.values_.push_back(j - i == 1 ? entries[i].value : sum.value());
        ++m.offsets_[entries[i].row + 1];
        i = j;
    }
    for (std::size_t r = 0; r < rows; ++r)
        m.offsets_[r + 1] += m.offsets_[r];
    return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n)
{
    std::vector<Triplet> t(n);
    for (std::size_t i = 0; i < n; ++i)
        t[i] = {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), 1.0};
    return from_triplets(n, n, std::move(t));
}

double SparseMatrix::coeff(std::size_t row, std::size_t col) const
{
    if (row >= rows_ || col >= cols_)
        return 0.0;
    const auto first = columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[row]);
    const auto last = columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[row + 1]);
    const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(col));
    if (it == last || *it != col)
        return 0.0;
    return values_[static_cast<std::size_t>(it - columns_.begin())];
}

std::vector<Triplet> SparseMatrix::triplets() const
{
    std::vector<Triplet> out;
    out.reserve(values_.size());
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k)
            out.push_back({static_cast<std::uint32_t>(r), columns_[k], values_[k]});
    return out;
}

SparseMatrix SparseMatrix::transpose() const
{
    auto t = triplets();
    for (auto& e : t)
        std::swap(e.row, e.col);
    return from_triplets(cols_, rows_, std::move(t));
}

DenseMatrix SparseMatrix::to_dense() const
{
    DenseMatrix d = DenseMatrix::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k)
            d(static_cast<Eigen::Index>(r), columns_[k]) = values_[k];
    return d;
}

SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b)
{
    if (a.cols() != b.rows())
        throw InputError("sparse product: inner dimensions differ");

    std::vector<Triplet> out;
    std::vector<CompensatedSum> acc(b.cols());
    std::vector<char> touched(b.cols(), 0);
    std::vector<std::uint32_t> pattern;
    const auto ao = a.row_offsets();
    const auto ac = a.col_indices();
    const auto av = a.values();
    const auto bo = b.row_offsets();
    const auto bc = b.col_indices();
    const auto bv = b.values();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        pattern.clear();
        for (std::size_t k = ao[r]; k < ao[r + 1]; ++k) {
            const std::size_t mid = ac[k];
            for (std::size_t l = bo[mid]; l < bo[mid + 1]; ++l) {
                const auto c = bc[l];
                if (!touched[c]) {
                    touched[c] = 1;
                    acc[c] = CompensatedSum{};
                    pattern.push_back(c);
                }
                acc[c].add(av[k] * bv[l]);
            }
        }
        std::sort(pattern.begin(), pattern.end());
        for (auto c : pattern) {
            out.push_back({static_cast<std::uint32_t>(r), c, acc[c].value()});
            touched[c] = 0;
        }
    }
    return SparseMatrix::from_triplets(a.rows(), b.cols(), std::move(out));
}

DenseMatrix multiply(const SparseMatrix& a, const DenseMatrix& x)
{
    DenseMatrix y;
    kernels::spmm_axpby(1.0, a, x, 0.0, nullptr, y);
    return y;
}

SparseMatrix scaled_sum(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw InputError("sparse sum: shape mismatch");
    auto ta = a.triplets();
    for (auto& t : ta)
        t.value *= alpha;
    for (auto t : b.triplets()) {
        t.value *= beta;
        ta.push_back(t);
    }
    return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(ta));
}

namespace kernels {

void spmm_axpby(double alpha, const SparseMatrix& a, const DenseMatrix& x, double beta, const DenseMatrix* b,
                DenseMatrix& y)
{
    check_spmm_shapes(a, x, b);
    y.resize(static_cast<Eigen::Index>(a.rows()), x.cols());
    const auto n = static_cast<std::ptrdiff_t>(a.rows());
    const bool big = a.nonzeros() * static_cast<std::size_t>(x.cols()) > 20000;
#pragma omp parallel for schedule(static) if (big)
    for (std::ptrdiff_t r = 0; r < n; ++r)
        spmm_row(static_cast<std::size_t>(r), alpha, a, x, beta, b, y);
}

namespace serial {

void spmm_axpby(double alpha, const SparseMatrix& a, const DenseMatrix& x, double beta, const DenseMatrix* b,
                DenseMatrix& y)
{
    check_spmm_shapes(a, x, b);
    y.resize(static_cast<Eigen::Index>(a.rows()), x.cols());
    for (std::size_t r = 0; r < a.rows(); ++r)
        spmm_row(r, alpha, a, x, beta, b, y);
}

} // namespace serial

} // namespace kernels

} // namespace meshvae
