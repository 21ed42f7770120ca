#include "meshvae/gconv.hpp"

#include "meshvae/error.hpp"

#include <cmath>
#include <string>

namespace meshvae {

namespace {

using SpmmFn = void (*)(double, const SparseMatrix&, const DenseMatrix&, double, const DenseMatrix*, DenseMatrix&);

std::vector<DenseMatrix> cheb_basis(SpmmFn spmm, const SparseMatrix& lt, const DenseMatrix& x, std::size_t order)
{
    if (order == 0)
        throw InputError("Chebyshev order must be at least 1");
    if (lt.rows() != lt.cols() || static_cast<std::size_t>(x.rows()) != lt.rows())
        throw InputError("Chebyshev basis: operand has " + std::to_string(x.rows()) + " rows, graph has " +
                         std::to_string(lt.rows()) + " vertices");
    std::vector<DenseMatrix> t;
    t.reserve(order);
    t.push_back(x);
    if (order > 1) {
        DenseMatrix next;
        spmm(1.0, lt, x, 0.0, nullptr, next);
        t.push_back(std::move(next));
    }
    for (std::size_t h = 2; h < order; ++h) {
        DenseMatrix next;
        spmm(2.0, lt, t[h - 1], -1.0, &t[h - 2], next);
        t.push_back(std::move(next));
    }
    return t;
}

void check_theta(std::span<const DenseMatrix> theta, Eigen::Index in_channels)
{
    if (theta.empty())
        throw InputError("convolution has no coefficients");
    for (const auto& m : theta)
        if (m.rows() != in_channels || m.cols() != theta[0].cols())
            throw InputError("convolution expects " + std::to_string(theta[0].rows()) + " input channels, got " +
                             std::to_string(in_channels));
}

} // namespace

SparseMatrix scale_laplacian(const SparseMatrix& laplacian, double lambda_max)
{
    if (!(lambda_max > 0.0))
        throw InputError("lambda_max must be positive");
    return scaled_sum(2.0 / lambda_max, laplacian, -1.0, SparseMatrix::identity(laplacian.rows()));
}

std::vector<DenseMatrix> cheb_apply(const SparseMatrix& scaled_laplacian, const DenseMatrix& x, std::size_t order)
{
    return cheb_basis(&kernels::spmm_axpby, scaled_laplacian, x, order);
}

namespace kernels::serial {
std::vector<DenseMatrix> cheb_apply(const SparseMatrix& scaled_laplacian, const DenseMatrix& x, std::size_t order)
{
    return cheb_basis(&kernels::serial::spmm_axpby, scaled_laplacian, x, order);
}
} // namespace kernels::serial

DenseMatrix gconv_forward(const SparseMatrix& scaled_laplacian, std::span<const DenseMatrix> theta,
                          const DenseMatrix& x, std::vector<DenseMatrix>* basis)
{
    check_theta(theta, x.cols());
    auto t = cheb_apply(scaled_laplacian, x, theta.size());
    DenseMatrix y = t[0] * theta[0];
    for (std::size_t h = 1; h < theta.size(); ++h)
        y.noalias() += t[h] * theta[h];
    if (basis != nullptr)
        *basis = std::move(t);
    return y;
}

GconvGradients gconv_backward(const SparseMatrix& scaled_laplacian, std::span<const DenseMatrix> theta,
                              std::span<const DenseMatrix> basis, const DenseMatrix& upstream)
{
    if (basis.size() != theta.size())
        throw InputError("convolution backward: basis and coefficient counts differ");
    check_theta(theta, basis[0].cols());
    if (upstream.rows() != basis[0].rows() || upstream.cols() != theta[0].cols())
        throw InputError("convolution backward: upstream gradient has the wrong shape");

    GconvGradients g;
    g.theta.reserve(theta.size());
    for (std::size_t h = 0; h < theta.size(); ++h)
        g.theta.push_back(basis[h].transpose() * upstream);
    // T_h(L̃)ᵀ = T_h(L̃), so dX = Σ_h T_h(L̃) dY θ_hᵀ = Σ_h (T_h(L̃) dY) θ_hᵀ.
    const auto t = cheb_apply(scaled_laplacian, upstream, theta.size());
    g.input = t[0] * theta[0].transpose();
    for (std::size_t h = 1; h < theta.size(); ++h)
        g.input.noalias() += t[h] * theta[h].transpose();
    return g;
}

ChebLayer::ChebLayer(std::shared_ptr<const SparseMatrix> scaled_laplacian, std::vector<DenseMatrix> theta)
    : laplacian_(std::move(scaled_laplacian)), theta_(std::move(theta))
{
    if (!laplacian_)
        throw InputError("convolution layer needs a Laplacian");
    check_theta(theta_, theta_.empty() ? 0 : theta_[0].rows());
}

DenseMatrix ChebLayer::forward(const DenseMatrix& x) const { return gconv_forward(*laplacian_, theta_, x); }

GconvGradients ChebLayer::backward(const DenseMatrix& x, const DenseMatrix& upstream) const
{
    const auto basis = cheb_apply(*laplacian_, x, theta_.size());
    return gconv_backward(*laplacian_, theta_, basis, upstream);
}

DenseMatrix activate(Activation kind, const DenseMatrix& x)
{
    switch (kind) {
    case Activation::tanh:
        return x.array().tanh().matrix();
    case Activation::sigmoid:
        return (1.0 / (1.0 + (-x.array()).exp())).matrix();
    case Activation::linear:
        break;
    }
    return x;
}

DenseMatrix activation_backward(Activation kind, const DenseMatrix& y, const DenseMatrix& upstream)
{
    if (y.rows() != upstream.rows() || y.cols() != upstream.cols())
        throw InputError("activation backward: shape mismatch");
    switch (kind) {
    case Activation::tanh:
        return (upstream.array() * (1.0 - y.array().square())).matrix();
    case Activation::sigmoid:
        return (upstream.array() * y.array() * (1.0 - y.array())).matrix();
    case Activation::linear:
        break;
    }
    return upstream;
}

} // namespace meshvae
