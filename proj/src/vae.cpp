#include "meshvae/vae.hpp"

#include "meshvae/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace meshvae {

namespace {

constexpr double sigma_floor = 1e-6;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

DenseMatrix transposed(const DenseMatrix& m, Eigen::Index rows)
{
    DenseMatrix t = m.transpose();
    return t.leftCols(rows);
}

Eigen::Map<const Eigen::VectorXd> flat(const DenseMatrix& m) { return {m.data(), m.size()}; }

DenseMatrix unflat(const Eigen::VectorXd& v, Eigen::Index rows)
{
    const Eigen::Index cols = v.size() / rows;
    return Eigen::Map<const DenseMatrix>(v.data(), rows, cols);
}

std::vector<std::size_t> pooled_sizes(const ArchSpec& arch, std::span<const std::size_t> level_sizes)
{
    if (level_sizes.size() <= arch.pool_count())
        throw InputError("architecture '" + arch.layers + "' pools " + std::to_string(arch.pool_count()) +
                         " times but only " + std::to_string(level_sizes.size()) + " levels are available");
    return {level_sizes.begin(), level_sizes.begin() + static_cast<std::ptrdiff_t>(arch.pool_count() + 1)};
}

bool all_finite(const DenseMatrix& m) { return m.allFinite(); }

} // namespace

// ---------------------------------------------------------------------------
// ArchSpec

std::size_t ArchSpec::pool_count() const { return static_cast<std::size_t>(std::count(layers.begin(), layers.end(), 'P')); }

std::size_t ArchSpec::conv_count() const { return static_cast<std::size_t>(std::count(layers.begin(), layers.end(), 'C')); }

void ArchSpec::validate(std::size_t hierarchy_depth) const
{
    if (layers.empty())
        throw InputError("architecture string is empty");
    for (char c : layers)
        if (c != 'C' && c != 'P')
            throw InputError(std::string("architecture string has unknown layer '") + c + "'");
    if (layers.back() != 'C')
        throw InputError("architecture string must end with C");
    if (pool_count() > hierarchy_depth)
        throw InputError("architecture '" + layers + "' pools " + std::to_string(pool_count()) +
                         " times but the hierarchy has " + std::to_string(hierarchy_depth) + " coarser levels");
    if (width == 0 || latent == 0 || order == 0)
        throw InputError("width, latent and order must be positive");
}

// ---------------------------------------------------------------------------
// VaeParams

std::vector<VaeParams::NamedTensor> VaeParams::tensors()
{
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < encoder.size(); ++i)
        for (std::size_t h = 0; h < encoder[i].size(); ++h)
            out.push_back({"encoder[" + std::to_string(i) + "][" + std::to_string(h) + "]", &encoder[i][h]});
    out.push_back({"fc_mean", &fc_mean});
    out.push_back({"fc_dev", &fc_dev});
    if (arch.condition_dim > 0)
        out.push_back({"fc_condition", &fc_condition});
    for (std::size_t i = 0; i < decoder.size(); ++i)
        for (std::size_t h = 0; h < decoder[i].size(); ++h)
            out.push_back({"decoder[" + std::to_string(i) + "][" + std::to_string(h) + "]", &decoder[i][h]});
    return out;
}

std::vector<VaeParams::ConstNamedTensor> VaeParams::tensors() const
{
    std::vector<ConstNamedTensor> out;
    for (auto& t : const_cast<VaeParams*>(this)->tensors())
        out.push_back({std::move(t.name), t.tensor});
    return out;
}

VaeParams VaeParams::zeros_like() const
{
    VaeParams z = *this;
    for (auto& t : z.tensors())
        t.tensor->setZero();
    return z;
}

bool VaeParams::operator==(const VaeParams& other) const
{
    if (arch.layers != other.arch.layers || arch.width != other.arch.width || arch.latent != other.arch.latent ||
        arch.order != other.arch.order || arch.condition_dim != other.arch.condition_dim ||
        pooled_vertices != other.pooled_vertices || seed != other.seed)
        return false;
    auto a = tensors();
    auto b = other.tensors();
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = *a[i].tensor;
        const auto& y = *b[i].tensor;
        if (x.rows() != y.rows() || x.cols() != y.cols())
            return false;
        // bitwise, so -0.0 and NaN payloads count
        if (!std::equal(x.data(), x.data() + x.size(), y.data(),
                        [](double p, double q) { return std::memcmp(&p, &q, sizeof p) == 0; }))
            return false;
    }
    return true;
}

std::size_t count_parameters(const VaeParams& params)
{
    std::size_t n = 0;
    for (const auto& t : params.tensors())
        n += static_cast<std::size_t>(t.tensor->size());
    return n;
}

std::size_t count_parameters(const ArchSpec& arch, std::span<const std::size_t> level_sizes)
{
    arch.validate(level_sizes.size() - 1);
    auto sizes = pooled_sizes(arch, level_sizes);
    const std::size_t vp = sizes.back();
    const std::size_t in0 = feature_dim + arch.condition_dim;
    std::size_t n = 0;
    bool first = true;
    for (char c : arch.layers) {
        if (c != 'C')
            continue;
        const std::size_t in = first ? in0 : arch.width;
        const std::size_t out_dec = first ? feature_dim : arch.width;
        n += arch.order * in * arch.width;      // encoder
        n += arch.order * arch.width * out_dec; // decoder
        first = false;
    }
    n += 2 * vp * arch.width * arch.latent;
    n += arch.condition_dim * vp * arch.width;
    return n;
}

VaeParams init_params(const ArchSpec& arch, std::span<const std::size_t> level_sizes, std::uint64_t seed)
{
    if (level_sizes.empty())
        throw InputError("no hierarchy levels");
    arch.validate(level_sizes.size() - 1);
    auto sizes = pooled_sizes(arch, level_sizes);

    VaeParams p;
    p.arch = arch;
    p.seed = seed;
    p.pooled_vertices = sizes.back();

    std::mt19937_64 rng(seed);
    auto glorot = [&rng](Eigen::Index rows, Eigen::Index cols, double fan_in, double fan_out) {
        const double s = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-s, s);
        DenseMatrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m.data()[i] = u(rng);
        return m;
    };

    const auto h = static_cast<Eigen::Index>(arch.order);
    const auto w = static_cast<Eigen::Index>(arch.width);
    Eigen::Index in = static_cast<Eigen::Index>(feature_dim + arch.condition_dim);
    for (char c : arch.layers) {
        if (c != 'C')
            continue;
        std::vector<DenseMatrix> stack;
        for (Eigen::Index k = 0; k < h; ++k)
            stack.push_back(glorot(in, w, static_cast<double>(h * in), static_cast<double>(h * w)));
        p.encoder.push_back(std::move(stack));
        in = w;
    }

    const auto flat_size = static_cast<Eigen::Index>(p.pooled_vertices) * w;
    const auto latent = static_cast<Eigen::Index>(arch.latent);
    p.fc_mean = glorot(flat_size, latent, static_cast<double>(flat_size), static_cast<double>(latent));
    p.fc_dev = glorot(flat_size, latent, static_cast<double>(flat_size), static_cast<double>(latent));
    if (arch.condition_dim > 0) {
        const auto cd = static_cast<Eigen::Index>(arch.condition_dim);
        p.fc_condition = glorot(cd, flat_size, static_cast<double>(cd), static_cast<double>(flat_size));
    }

    for (std::size_t i = p.encoder.size(); i-- > 0;) {
        const Eigen::Index out = i == 0 ? static_cast<Eigen::Index>(feature_dim) : w;
        std::vector<DenseMatrix> stack;
        for (const auto& m : p.encoder[i])
            stack.push_back(transposed(m, out));
        p.decoder.push_back(std::move(stack));
    }
    return p;
}

VaeParams build_model(const Hierarchy& hierarchy, const ArchSpec& arch, std::uint64_t seed)
{
    std::vector<std::size_t> sizes;
    for (const auto& level : hierarchy.levels)
        sizes.push_back(level.mesh.vertex_count());
    return init_params(arch, sizes, seed);
}

// ---------------------------------------------------------------------------
// Latent helpers

Eigen::VectorXd reparameterize(const Eigen::VectorXd& mean, const Eigen::VectorXd& deviation,
                               const Eigen::VectorXd& noise)
{
    if (mean.size() != deviation.size() || mean.size() != noise.size())
        throw InputError("reparameterize: size mismatch");
    return mean + deviation.cwiseProduct(noise);
}

double kl_divergence(const Eigen::VectorXd& mean, const Eigen::VectorXd& deviation)
{
    double kl = 0.0;
    for (Eigen::Index d = 0; d < mean.size(); ++d) {
        const double s = deviation[d];
        const double ls = std::log(std::max(s, sigma_floor));
        kl += 0.5 * (mean[d] * mean[d] + s * s - 2.0 * ls - 1.0);
    }
    return kl;
}

std::vector<double> one_hot(std::size_t index, std::size_t classes)
{
    if (index >= classes)
        throw InputError("label " + std::to_string(index) + " out of range for " + std::to_string(classes) +
                         " classes");
    std::vector<double> v(classes, 0.0);
    v[index] = 1.0;
    return v;
}

// ---------------------------------------------------------------------------
// Network

struct VaeNetwork::Trace {
    std::vector<DenseMatrix> enc_out; // post-activation output of each encoder conv
    std::vector<std::vector<DenseMatrix>> enc_basis;
    Eigen::VectorXd flat;
    Eigen::VectorXd mean, dev, noise, z;
    DenseMatrix dec_in; // tanh of the decoder fc
    std::vector<DenseMatrix> dec_out;
    std::vector<std::vector<DenseMatrix>> dec_basis;
    DenseMatrix output;

    Eigen::VectorXd d_mean, d_dev_pre, d_hidden;
    std::vector<std::vector<DenseMatrix>> enc_grad, dec_grad;
    double recon = 0.0;
    double kl = 0.0;
};

VaeNetwork::VaeNetwork(const Hierarchy& hierarchy, VaeParams params) : params_(std::move(params))
{
    const auto& arch = params_.arch;
    arch.validate(hierarchy.depth());
    for (std::size_t k = 0; k <= arch.pool_count(); ++k) {
        const auto& level = hierarchy.levels.at(k);
        level_sizes_.push_back(level.mesh.vertex_count());
        auto lap = normalized_laplacian(level.adjacency);
        laplacians_.push_back(std::make_shared<const SparseMatrix>(scale_laplacian(lap, estimate_lambda_max(lap))));
        if (k < arch.pool_count())
            pools_.push_back(build_pool_operator(hierarchy.maps.at(k)));
    }
    if (params_.pooled_vertices != level_sizes_.back())
        throw InputError("parameters expect " + std::to_string(params_.pooled_vertices) +
                         " pooled vertices, hierarchy gives " + std::to_string(level_sizes_.back()));
    const auto flat_size = static_cast<Eigen::Index>(params_.pooled_vertices * arch.width);
    const auto latent = static_cast<Eigen::Index>(arch.latent);
    bool ok = params_.encoder.size() == arch.conv_count() && params_.decoder.size() == arch.conv_count() &&
              params_.fc_mean.rows() == flat_size && params_.fc_dev.rows() == flat_size &&
              params_.fc_mean.cols() == latent && params_.fc_dev.cols() == latent;
    if (arch.condition_dim > 0)
        ok = ok && params_.fc_condition.rows() == static_cast<Eigen::Index>(arch.condition_dim) &&
             params_.fc_condition.cols() == flat_size;
    if (!ok)
        throw InputError("parameter shapes do not match the architecture");
}

void VaeNetwork::check_input(const DenseMatrix& x, std::span<const double> condition) const
{
    if (static_cast<std::size_t>(x.rows()) != level_sizes_.front() ||
        x.cols() != static_cast<Eigen::Index>(feature_dim))
        throw InputError("features are " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                         ", expected " + std::to_string(level_sizes_.front()) + "x" + std::to_string(feature_dim));
    if (condition.size() != params_.arch.condition_dim)
        throw InputError("condition has " + std::to_string(condition.size()) + " entries, model expects " +
                         std::to_string(params_.arch.condition_dim));
}

DenseMatrix VaeNetwork::encoder_input(const DenseMatrix& x, std::span<const double> condition) const
{
    if (condition.empty())
        return x;
    DenseMatrix in(x.rows(), x.cols() + static_cast<Eigen::Index>(condition.size()));
    in.leftCols(x.cols()) = x;
    for (std::size_t c = 0; c < condition.size(); ++c)
        in.col(x.cols() + static_cast<Eigen::Index>(c)).setConstant(condition[c]);
    return in;
}

DenseMatrix VaeNetwork::run_encoder(DenseMatrix h, Trace* t) const
{
    const auto& arch = params_.arch;
    const std::size_t convs = arch.conv_count();
    if (t != nullptr) {
        t->enc_out.clear();
        t->enc_basis.assign(convs, {});
    }
    std::size_t level = 0, conv = 0;
    for (char c : arch.layers) {
        if (c == 'P') {
            h = pool(pools_[level], h);
            ++level;
            continue;
        }
        h = gconv_forward(*laplacians_[level], params_.encoder[conv], h, t ? &t->enc_basis[conv] : nullptr);
        if (conv + 1 < convs)
            h = activate(Activation::tanh, h); // last conv stays linear
        if (t != nullptr)
            t->enc_out.push_back(h);
        ++conv;
    }
    return h;
}

DenseMatrix VaeNetwork::run_decoder(const Eigen::VectorXd& z, std::span<const double> condition, Trace* t) const
{
    const auto& arch = params_.arch;
    Eigen::VectorXd hidden = params_.fc_mean * z;
    if (!condition.empty())
        hidden.noalias() +=
            params_.fc_condition.transpose() * Eigen::Map<const Eigen::VectorXd>(condition.data(), condition.size());
    DenseMatrix h = activate(Activation::tanh, unflat(hidden, static_cast<Eigen::Index>(level_sizes_.back())));
    if (t != nullptr) {
        t->dec_in = h;
        t->dec_out.clear();
        t->dec_basis.assign(arch.conv_count(), {});
    }
    std::size_t level = arch.pool_count(), conv = 0;
    for (auto it = arch.layers.rbegin(); it != arch.layers.rend(); ++it) {
        if (*it == 'P') {
            --level;
            h = depool(pools_[level], h);
            continue;
        }
        h = activate(Activation::tanh, gconv_forward(*laplacians_[level], params_.decoder[conv], h,
                                                     t ? &t->dec_basis[conv] : nullptr));
        if (t != nullptr)
            t->dec_out.push_back(h);
        ++conv;
    }
    return h;
}

void VaeNetwork::forward(const Example& ex, const Eigen::VectorXd& noise, Trace& t) const
{
    std::span<const double> cond(ex.condition);
    t.flat = flat(run_encoder(encoder_input(*ex.features, cond), &t));
    t.mean = params_.fc_mean.transpose() * t.flat;
    Eigen::VectorXd pre = params_.fc_dev.transpose() * t.flat;
    t.dev = pre.unaryExpr([](double v) { return sigmoid(v); });
    t.noise = noise;
    t.z = t.mean + t.dev.cwiseProduct(noise);
    t.output = run_decoder(t.z, cond, &t);
}

void VaeNetwork::backward(const Example& ex, Trace& t, double scale, double alpha) const
{
    const auto& arch = params_.arch;
    const std::size_t convs = arch.conv_count();

    DenseMatrix diff = t.output - *ex.features;
    t.recon = 0.5 * scale * diff.squaredNorm();
    t.kl = alpha * scale * kl_divergence(t.mean, t.dev);

    // decoder, walked backwards: the layer string in its original order
    DenseMatrix g = scale * diff;
    t.dec_grad.assign(convs, {});
    std::size_t level = 0, seen = 0;
    for (char c : arch.layers) {
        if (c == 'P') {
            g = depool_backward(pools_[level], g);
            ++level;
            continue;
        }
        const std::size_t j = convs - 1 - seen++;
        auto gr = gconv_backward(*laplacians_[level], params_.decoder[j], t.dec_basis[j],
                                 activation_backward(Activation::tanh, t.dec_out[j], g));
        t.dec_grad[j] = std::move(gr.theta);
        g = std::move(gr.input);
    }
    t.d_hidden = flat(activation_backward(Activation::tanh, t.dec_in, g));

    const double ka = alpha * scale;
    Eigen::VectorXd dz = params_.fc_mean.transpose() * t.d_hidden;
    t.d_mean = dz + ka * t.mean;
    t.d_dev_pre.resize(t.dev.size());
    for (Eigen::Index d = 0; d < t.dev.size(); ++d) {
        const double s = t.dev[d];
        const double dkl = s - (s >= sigma_floor ? 1.0 / s : 0.0);
        t.d_dev_pre[d] = (dz[d] * t.noise[d] + ka * dkl) * s * (1.0 - s);
    }

    Eigen::VectorXd df = params_.fc_mean * t.d_mean;
    df.noalias() += params_.fc_dev * t.d_dev_pre;
    g = unflat(df, static_cast<Eigen::Index>(level_sizes_.back()));
    t.enc_grad.assign(convs, {});
    level = arch.pool_count();
    std::size_t i = convs;
    for (auto it = arch.layers.rbegin(); it != arch.layers.rend(); ++it) {
        if (*it == 'P') {
            --level;
            g = pool_backward(pools_[level], g);
            continue;
        }
        --i;
        const auto act = i + 1 == convs ? Activation::linear : Activation::tanh;
        auto gr = gconv_backward(*laplacians_[level], params_.encoder[i], t.enc_basis[i],
                                 activation_backward(act, t.enc_out[i], g));
        t.enc_grad[i] = std::move(gr.theta);
        g = std::move(gr.input);
    }
}

LatentCode VaeNetwork::encode(const DenseMatrix& x, std::span<const double> condition) const
{
    check_input(x, condition);
    const Eigen::VectorXd f = flat(run_encoder(encoder_input(x, condition), nullptr));
    LatentCode code;
    code.mean = params_.fc_mean.transpose() * f;
    Eigen::VectorXd pre = params_.fc_dev.transpose() * f;
    code.deviation = pre.unaryExpr([](double v) { return sigmoid(v); });
    return code;
}

DenseMatrix VaeNetwork::decode(const Eigen::VectorXd& z, std::span<const double> condition) const
{
    const auto& arch = params_.arch;
    if (z.size() != static_cast<Eigen::Index>(arch.latent))
        throw InputError("latent code has " + std::to_string(z.size()) + " entries, model expects " +
                         std::to_string(arch.latent));
    if (condition.size() != arch.condition_dim)
        throw InputError("condition has " + std::to_string(condition.size()) + " entries, model expects " +
                         std::to_string(arch.condition_dim));
    return run_decoder(z, condition, nullptr);
}

LossBreakdown VaeNetwork::run_batch(std::span<const Example> batch, std::span<const Eigen::VectorXd> noise,
                                    double alpha, double l2, VaeParams* gradient, bool parallel) const
{
    if (batch.empty())
        throw InputError("empty batch");
    if (noise.size() != batch.size())
        throw InputError("need one noise vector per example");
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].features == nullptr)
            throw InputError("example " + std::to_string(i) + " has no features");
        check_input(*batch[i].features, batch[i].condition);
        if (noise[i].size() != static_cast<Eigen::Index>(params_.arch.latent))
            throw InputError("noise vector has wrong length");
    }

    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<Trace> traces(batch.size());
    const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        forward(batch[i], noise[i], traces[i]);
        backward(batch[i], traces[i], scale, alpha);
    }

    LossBreakdown loss;
    for (const auto& t : traces) {
        loss.reconstruction += t.recon;
        loss.kl += t.kl;
    }
    loss.l2 = l2_penalty(params_, l2);
    if (gradient == nullptr)
        return loss;

    VaeParams& grad = *gradient;
    grad = params_.zeros_like();
    for (const auto& t : traces) {
        for (std::size_t i = 0; i < grad.encoder.size(); ++i)
            for (std::size_t h = 0; h < grad.encoder[i].size(); ++h) {
                grad.encoder[i][h] += t.enc_grad[i][h];
                grad.decoder[i][h] += t.dec_grad[i][h];
            }
    }

    // Outer-product sums, parallel over rows; each row accumulates examples in order.
    const Eigen::Index rows = grad.fc_mean.rows();
#pragma omp parallel for schedule(static) if (parallel && rows > 256)
    for (Eigen::Index r = 0; r < rows; ++r) {
        auto gm = grad.fc_mean.row(r);
        auto gd = grad.fc_dev.row(r);
        for (const auto& t : traces) {
            gm += t.flat[r] * t.d_mean.transpose();
            gm += t.d_hidden[r] * t.z.transpose();
            gd += t.flat[r] * t.d_dev_pre.transpose();
        }
    }
    if (params_.arch.condition_dim > 0)
        for (std::size_t e = 0; e < batch.size(); ++e)
            for (std::size_t c = 0; c < batch[e].condition.size(); ++c)
                grad.fc_condition.row(static_cast<Eigen::Index>(c)) += batch[e].condition[c] * traces[e].d_hidden.transpose();
    return loss;
}

LossBreakdown VaeNetwork::loss_and_gradient(std::span<const Example> batch, std::span<const Eigen::VectorXd> noise,
                                            double alpha, double l2, VaeParams* gradient) const
{
    return run_batch(batch, noise, alpha, l2, gradient, true);
}

LossBreakdown VaeNetwork::loss_and_gradient_serial(std::span<const Example> batch,
                                                   std::span<const Eigen::VectorXd> noise, double alpha, double l2,
                                                   VaeParams* gradient) const
{
    return run_batch(batch, noise, alpha, l2, gradient, false);
}

// ---------------------------------------------------------------------------
// Optimizer

AdamState AdamState::for_params(const VaeParams& params)
{
    return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_update(std::span<double> w, std::span<const double> g, std::span<double> m, std::span<double> v,
                 std::uint64_t step, const TrainConfig& c)
{
    if (g.size() != w.size() || m.size() != w.size() || v.size() != w.size())
        throw InputError("adam_update: size mismatch");
    if (step == 0)
        throw InputError("adam_update: step counts from 1");
    const double t = static_cast<double>(step);
    const double c1 = 1.0 - std::pow(c.beta1, t);
    const double c2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        w[i] -= c.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + c.epsilon);
    }
}

void adam_step(VaeParams& params, const VaeParams& gradient, AdamState& state, const TrainConfig& config)
{
    auto w = params.tensors();
    auto g = gradient.tensors();
    auto m = state.first_moment.tensors();
    auto v = state.second_moment.tensors();
    if (g.size() != w.size() || m.size() != w.size() || v.size() != w.size())
        throw InputError("adam_step: parameter layouts differ");
    ++state.step;
    std::vector<double> buf;
    for (std::size_t k = 0; k < w.size(); ++k) {
        DenseMatrix& wt = *w[k].tensor;
        const DenseMatrix& gt = *g[k].tensor;
        if (gt.size() != wt.size() || m[k].tensor->size() != wt.size() || v[k].tensor->size() != wt.size())
            throw InputError("adam_step: tensor " + w[k].name + " has mismatched shape");
        const auto n = static_cast<std::size_t>(wt.size());
        buf.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            buf[i] = gt.data()[i] + 2.0 * config.l2 * wt.data()[i];
        adam_update({wt.data(), n}, buf, {m[k].tensor->data(), n}, {v[k].tensor->data(), n}, state.step, config);
    }
}

double l2_penalty(const VaeParams& params, double l2)
{
    if (l2 == 0.0)
        return 0.0;
    double s = 0.0;
    for (const auto& t : params.tensors())
        s += t.tensor->squaredNorm();
    return l2 * s;
}

// ---------------------------------------------------------------------------
// Training

namespace {

void check_finite(const VaeParams& params, const LossBreakdown& loss, const VaeParams& grad, std::size_t epoch)
{
    const std::string where = " at epoch " + std::to_string(epoch);
    for (const auto& t : params.tensors())
        if (!all_finite(*t.tensor))
            throw NumericalError("non-finite parameter tensor " + t.name + where);
    if (!std::isfinite(loss.reconstruction))
        throw NumericalError("non-finite reconstruction loss" + where);
    if (!std::isfinite(loss.kl))
        throw NumericalError("non-finite KL term" + where);
    if (!std::isfinite(loss.l2))
        throw NumericalError("non-finite L2 term" + where);
    for (const auto& t : grad.tensors())
        if (!all_finite(*t.tensor))
            throw NumericalError("non-finite gradient of " + t.name + where);
}

} // namespace

TrainResult train(const FeatureSet& dataset, const Hierarchy& hierarchy, const ArchSpec& arch,
                  const TrainConfig& config, std::span<const std::size_t> labels,
                  const std::function<void(const EpochRecord&)>& on_epoch)
{
    if (dataset.shapes.empty())
        throw InputError("training set is empty");
    if (!(config.alpha >= 0.0))
        throw InputError("alpha must be non-negative");
    if (!(config.learning_rate >= 0.0))
        throw InputError("learning rate must be non-negative");
    if (hierarchy.levels.empty() || dataset.vertex_count() != hierarchy.levels[0].mesh.vertex_count())
        throw InputError("features have " + std::to_string(dataset.vertex_count()) +
                         " vertices but the hierarchy's base mesh does not match");
    const std::size_t count = dataset.shapes.size();
    if (arch.condition_dim > 0 && labels.size() != count)
        throw InputError("conditional model needs one label per shape (" + std::to_string(labels.size()) + " for " +
                         std::to_string(count) + " shapes)");
    if (arch.condition_dim == 0 && !labels.empty())
        throw InputError("labels given for an unconditional model");

    VaeNetwork net(hierarchy, build_model(hierarchy, arch, config.seed));
    std::vector<Example> examples(count);
    for (std::size_t i = 0; i < count; ++i) {
        examples[i].features = &dataset.shapes[i];
        if (arch.condition_dim > 0)
            examples[i].condition = one_hot(labels[i], arch.condition_dim);
    }

    AdamState state = AdamState::for_params(net.params());
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t batch = config.batch_size == 0 ? count : std::min(config.batch_size, count);
    const auto latent = static_cast<Eigen::Index>(arch.latent);

    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    TrainResult result;
    VaeParams grad;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        if (batch < count)
            std::shuffle(order.begin(), order.end(), rng);
        EpochRecord rec;
        rec.epoch = epoch;
        for (std::size_t start = 0; start < count; start += batch) {
            const std::size_t stop = std::min(start + batch, count);
            std::vector<Example> bx;
            std::vector<Eigen::VectorXd> noise;
            for (std::size_t k = start; k < stop; ++k) {
                bx.push_back(examples[order[k]]);
                Eigen::VectorXd e(latent);
                for (Eigen::Index d = 0; d < latent; ++d)
                    e[d] = normal(rng);
                noise.push_back(std::move(e));
            }
            auto loss = net.loss_and_gradient(bx, noise, config.alpha, config.l2, &grad);
            check_finite(net.params(), loss, grad, epoch);
            const double w = static_cast<double>(stop - start) / static_cast<double>(count);
            rec.reconstruction += w * loss.reconstruction;
            rec.kl += w * loss.kl;
            rec.total += w * loss.total();
            adam_step(net.params(), grad, state, config);
        }
        result.log.push_back(rec);
        if (on_epoch)
            on_epoch(rec);
    }
    for (const auto& t : net.params().tensors())
        if (!all_finite(*t.tensor))
            throw NumericalError("non-finite parameter tensor " + t.name + " after training");
    result.params = net.params();
    return result;
}

} // namespace meshvae
