#pragma once

// Chebyshev spectral graph convolution and the elementwise activations used
// by the auto-encoder.

#include "meshvae/sparse.hpp"

#include <memory>
#include <span>
#include <vector>

namespace meshvae {

/// (2 / lambda_max) L - I. Throws InputError unless lambda_max > 0.
SparseMatrix scale_laplacian(const SparseMatrix& laplacian, double lambda_max);

/// [T_0(L̃)X, ..., T_{order-1}(L̃)X] by the three-term recurrence.
std::vector<DenseMatrix> cheb_apply(const SparseMatrix& scaled_laplacian, const DenseMatrix& x, std::size_t order);

namespace kernels::serial {
std::vector<DenseMatrix> cheb_apply(const SparseMatrix& scaled_laplacian, const DenseMatrix& x, std::size_t order);
} // namespace kernels::serial

/// Σ_h T_h(L̃) X θ_h. No bias. When `basis` is non-null it receives the
/// Chebyshev basis of X for reuse in the backward pass.
DenseMatrix gconv_forward(const SparseMatrix& scaled_laplacian, std::span<const DenseMatrix> theta,
                          const DenseMatrix& x, std::vector<DenseMatrix>* basis = nullptr);

struct GconvGradients {
    DenseMatrix input;
    std::vector<DenseMatrix> theta;
};

/// Gradients given the forward basis of X. Uses the symmetry of L̃.
GconvGradients gconv_backward(const SparseMatrix& scaled_laplacian, std::span<const DenseMatrix> theta,
                              std::span<const DenseMatrix> basis, const DenseMatrix& upstream);

/// A convolution layer owning its coefficient stack.
class ChebLayer {
public:
    ChebLayer(std::shared_ptr<const SparseMatrix> scaled_laplacian, std::vector<DenseMatrix> theta);

    std::size_t order() const { return theta_.size(); }
    const std::vector<DenseMatrix>& theta() const { return theta_; }
    std::vector<DenseMatrix>& theta() { return theta_; }
    const SparseMatrix& scaled_laplacian() const { return *laplacian_; }

    DenseMatrix forward(const DenseMatrix& x) const;
    GconvGradients backward(const DenseMatrix& x, const DenseMatrix& upstream) const;

private:
    std::shared_ptr<const SparseMatrix> laplacian_;
    std::vector<DenseMatrix> theta_;
};

enum class Activation { tanh, sigmoid, linear };

DenseMatrix activate(Activation kind, const DenseMatrix& x);

/// Gradient through the activation, expressed with its output y.
DenseMatrix activation_backward(Activation kind, const DenseMatrix& y, const DenseMatrix& upstream);

} // namespace meshvae
