#include "pdh/netcore.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>

#include "pdh/binio.hpp"
#include "pdh/rng.hpp"

namespace pdh {

namespace {

constexpr char kNetMagic[] = "PDHNET1\n";

// Sigmoid outputs are clamped into the open unit interval so the relaxed code
// never touches 0 or 1 exactly, even when exp() saturates.
constexpr double kSigmoidLo = std::numeric_limits<double>::min();
constexpr double kSigmoidHi = 1.0 - std::numeric_limits<double>::epsilon() / 2;

std::atomic<std::uint64_t> g_next_uid{1};

double sigmoid(double z) {
    const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return std::clamp(s, kSigmoidLo, kSigmoidHi);
}

std::size_t pooled_extent(std::size_t n, std::size_t k, std::size_t s) { return (n - k) / s + 1; }

void check_window(const LayerSpec& l) {
    if (l.kernel == 0 || l.stride == 0) {
        throw DimensionError(to_string(l.kind) + " needs positive kernel and stride");
    }
    if (l.kernel > l.input.height || l.kernel > l.input.width) {
        throw DimensionError(to_string(l.kind) + " kernel " + std::to_string(l.kernel) +
                             " exceeds input " + l.input.str());
    }
}

void dense_forward(std::span<const double> w, std::size_t rows, std::span<const double> in,
                   std::span<double> out) {
    const std::size_t n = in.size();
    for (std::size_t o = 0; o < rows; ++o) {
        const double* wr = w.data() + o * (n + 1);
        double acc = wr[n];
        for (std::size_t i = 0; i < n; ++i) acc += wr[i] * in[i];
        out[o] = acc;
    }
}

void dense_backward(std::span<const double> w, std::size_t rows, std::span<const double> in,
                    std::span<const double> g, std::span<double> wg, std::span<double> in_grad) {
    const std::size_t n = in.size();
    for (std::size_t o = 0; o < rows; ++o) {
        const double go = g[o];
        if (go == 0.0) continue;
        double* gr = wg.data() + o * (n + 1);
        for (std::size_t i = 0; i < n; ++i) gr[i] += go * in[i];
        gr[n] += go;
    }
    if (in_grad.empty()) return;
    std::fill(in_grad.begin(), in_grad.end(), 0.0);
    for (std::size_t o = 0; o < rows; ++o) {
        const double go = g[o];
        if (go == 0.0) continue;
        const double* wr = w.data() + o * (n + 1);
        for (std::size_t i = 0; i < n; ++i) in_grad[i] += wr[i] * go;
    }
}

}  // namespace

std::string Shape3::str() const {
    return "(" + std::to_string(channels) + "," + std::to_string(height) + "," +
           std::to_string(width) + ")";
}

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::FullyConnected: return "fully-connected";
        case LayerKind::Relu: return "relu";
        case LayerKind::Conv2d: return "convolution-2d";
        case LayerKind::MaxPool2d: return "max-pool-2d";
        case LayerKind::SigmoidHashHead: return "sigmoid-hash-head";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// LayerSpec

LayerSpec LayerSpec::fully_connected(Shape3 in, std::size_t out) {
    return {LayerKind::FullyConnected, in, out, 0, 1};
}
LayerSpec LayerSpec::relu(Shape3 in) { return {LayerKind::Relu, in, 0, 0, 1}; }
LayerSpec LayerSpec::conv2d(Shape3 in, std::size_t out_channels, std::size_t kernel,
                            std::size_t stride) {
    return {LayerKind::Conv2d, in, out_channels, kernel, stride};
}
LayerSpec LayerSpec::max_pool(Shape3 in, std::size_t kernel, std::size_t stride) {
    return {LayerKind::MaxPool2d, in, 0, kernel, stride == 0 ? kernel : stride};
}
LayerSpec LayerSpec::hash_head(Shape3 in, std::size_t bits) {
    return {LayerKind::SigmoidHashHead, in, bits, 0, 1};
}

Shape3 LayerSpec::output() const {
    switch (kind) {
        case LayerKind::FullyConnected:
        case LayerKind::SigmoidHashHead: return {units, 1, 1};
        case LayerKind::Relu: return input;
        case LayerKind::Conv2d:
            check_window(*this);
            return {units, pooled_extent(input.height, kernel, stride),
                    pooled_extent(input.width, kernel, stride)};
        case LayerKind::MaxPool2d:
            check_window(*this);
            return {input.channels, pooled_extent(input.height, kernel, stride),
                    pooled_extent(input.width, kernel, stride)};
    }
    throw DimensionError("unknown layer kind");
}

bool LayerSpec::has_parameters() const noexcept {
    return kind == LayerKind::FullyConnected || kind == LayerKind::Conv2d ||
           kind == LayerKind::SigmoidHashHead;
}

std::size_t LayerSpec::fan_in() const {
    switch (kind) {
        case LayerKind::FullyConnected:
        case LayerKind::SigmoidHashHead: return input.volume();
        case LayerKind::Conv2d: return input.channels * kernel * kernel;
        default: return 0;
    }
}

std::size_t LayerSpec::fan_out() const {
    switch (kind) {
        case LayerKind::FullyConnected:
        case LayerKind::SigmoidHashHead: return units;
        case LayerKind::Conv2d: return units * kernel * kernel;
        default: return 0;
    }
}

std::vector<std::size_t> LayerSpec::parameter_shape() const {
    if (!has_parameters()) return {};
    return {units, fan_in() + 1};
}

std::size_t LayerSpec::parameter_count() const {
    return has_parameters() ? units * (fan_in() + 1) : 0;
}

std::vector<std::uint64_t> LayerSpec::dimensions() const {
    std::vector<std::uint64_t> d{input.channels, input.height, input.width};
    switch (kind) {
        case LayerKind::FullyConnected:
        case LayerKind::SigmoidHashHead: d.push_back(units); break;
        case LayerKind::Relu: break;
        case LayerKind::Conv2d: d.insert(d.end(), {units, kernel, stride}); break;
        case LayerKind::MaxPool2d: d.insert(d.end(), {kernel, stride}); break;
    }
    return d;
}

LayerSpec LayerSpec::from_dimensions(LayerKind kind, const std::vector<std::uint64_t>& d) {
    auto need = [&](std::size_t n) {
        if (d.size() != n) {
            throw DimensionError(to_string(kind) + " expects " + std::to_string(n) +
                                 " dimensions, got " + std::to_string(d.size()));
        }
    };
    auto shape = [&] { return Shape3{d[0], d[1], d[2]}; };
    switch (kind) {
        case LayerKind::FullyConnected: need(4); return fully_connected(shape(), d[3]);
        case LayerKind::SigmoidHashHead: need(4); return hash_head(shape(), d[3]);
        case LayerKind::Relu: need(3); return relu(shape());
        case LayerKind::Conv2d: need(6); return conv2d(shape(), d[3], d[4], d[5]);
        case LayerKind::MaxPool2d: need(5); return max_pool(shape(), d[3], d[4]);
    }
    throw DimensionError("unknown layer kind tag " + std::to_string(static_cast<int>(kind)));
}

// ---------------------------------------------------------------------------
// Architectures

ArchitectureBuilder& ArchitectureBuilder::conv(std::size_t out_channels, std::size_t kernel,
                                               std::size_t stride) {
    layers_.push_back(LayerSpec::conv2d(current_, out_channels, kernel, stride));
    current_ = layers_.back().output();
    return *this;
}
ArchitectureBuilder& ArchitectureBuilder::relu() {
    layers_.push_back(LayerSpec::relu(current_));
    return *this;
}
ArchitectureBuilder& ArchitectureBuilder::max_pool(std::size_t kernel, std::size_t stride) {
    layers_.push_back(LayerSpec::max_pool(current_, kernel, stride));
    current_ = layers_.back().output();
    return *this;
}
ArchitectureBuilder& ArchitectureBuilder::fully_connected(std::size_t out) {
    layers_.push_back(LayerSpec::fully_connected(current_, out));
    current_ = layers_.back().output();
    return *this;
}
std::vector<LayerSpec> ArchitectureBuilder::hash_head(std::size_t bits) {
    layers_.push_back(LayerSpec::hash_head(current_, bits));
    current_ = layers_.back().output();
    return layers_;
}

std::vector<LayerSpec> default_architecture(Shape3 input, std::size_t bits, std::size_t input_pool) {
    ArchitectureBuilder b(input);
    if (input_pool > 1) b.max_pool(input_pool);
    return b.conv(8, 3).relu().max_pool(2).conv(16, 3).relu().max_pool(2).fully_connected(64).relu()
        .hash_head(bits);
}

std::vector<LayerSpec> mlp_architecture(Shape3 input, std::size_t hidden, std::size_t bits,
                                        std::size_t input_pool) {
    ArchitectureBuilder b(input);
    if (input_pool > 1) b.max_pool(input_pool);
    return b.fully_connected(hidden).relu().hash_head(bits);
}

// ---------------------------------------------------------------------------
// HashNet

HashNet::HashNet(std::vector<LayerSpec> layers, std::uint64_t seed)
    : HashNet(std::move(layers), seed, true) {}

HashNet HashNet::zeros(std::vector<LayerSpec> layers) { return HashNet(std::move(layers), 0, false); }

HashNet::HashNet(std::vector<LayerSpec> layers, std::uint64_t seed, bool randomize)
    : layers_(std::move(layers)), seed_(seed), uid_(g_next_uid.fetch_add(1)) {
    if (layers_.empty()) throw DimensionError("network has no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& l = layers_[i];
        const bool is_head = l.kind == LayerKind::SigmoidHashHead;
        if (is_head != (i + 1 == layers_.size())) {
            throw DimensionError("layer " + std::to_string(i) + ": the sigmoid-hash-head must be the "
                                 "single final layer");
        }
        if (l.input.volume() == 0) {
            throw DimensionError("layer " + std::to_string(i) + " (" + to_string(l.kind) +
                                 ") has empty input " + l.input.str());
        }
        if (l.has_parameters() && l.units == 0) {
            throw DimensionError("layer " + std::to_string(i) + " (" + to_string(l.kind) +
                                 ") has zero output units");
        }
        const Shape3 out = l.output();
        if (i + 1 < layers_.size() && !(out == layers_[i + 1].input)) {
            throw DimensionError("layer " + std::to_string(i + 1) + " (" +
                                 to_string(layers_[i + 1].kind) + ") expects input " +
                                 layers_[i + 1].input.str() + " but layer " + std::to_string(i) +
                                 " produces " + out.str());
        }
    }

    Rng rng(seed);
    for (const LayerSpec& l : layers_) {
        if (!l.has_parameters()) {
            slots_.push_back(-1);
            continue;
        }
        slots_.push_back(static_cast<int>(params_.size()));
        Tensor p(l.parameter_shape());
        if (randomize) {
            const double bound = std::sqrt(6.0 / static_cast<double>(l.fan_in() + l.fan_out()));
            const std::size_t cols = l.fan_in() + 1;
            for (std::size_t r = 0; r < l.units; ++r) {
                for (std::size_t c = 0; c + 1 < cols; ++c) p.data[r * cols + c] = rng.uniform(-bound, bound);
            }
        }
        params_.push_back(std::move(p));
    }
}

std::size_t HashNet::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor& t : params_) n += t.size();
    return n;
}

std::optional<std::size_t> HashNet::parameter_slot(std::size_t layer) const {
    if (layer >= slots_.size() || slots_[layer] < 0) return std::nullopt;
    return static_cast<std::size_t>(slots_[layer]);
}

// ---------------------------------------------------------------------------
// Layer kernels

void layer_forward(const LayerSpec& l, std::span<const double> params, std::span<const double> in,
                   std::span<double> out, std::uint32_t* argmax) {
    switch (l.kind) {
        case LayerKind::FullyConnected: dense_forward(params, l.units, in, out); return;
        case LayerKind::SigmoidHashHead:
            dense_forward(params, l.units, in, out);
            for (double& v : out) v = sigmoid(v);
            return;
        case LayerKind::Relu:
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
            return;
        case LayerKind::Conv2d: {
            const Shape3 o = l.output();
            const std::size_t k = l.kernel, s = l.stride, ih = l.input.height, iw = l.input.width;
            const std::size_t cols = l.fan_in() + 1;
            for (std::size_t oc = 0; oc < o.channels; ++oc) {
                const double* w = params.data() + oc * cols;
                for (std::size_t y = 0; y < o.height; ++y) {
                    for (std::size_t x = 0; x < o.width; ++x) {
                        double acc = w[cols - 1];
                        for (std::size_t ic = 0; ic < l.input.channels; ++ic) {
                            const double* src = in.data() + (ic * ih + y * s) * iw + x * s;
                            const double* wk = w + ic * k * k;
                            for (std::size_t ky = 0; ky < k; ++ky) {
                                for (std::size_t kx = 0; kx < k; ++kx) acc += wk[ky * k + kx] * src[ky * iw + kx];
                            }
                        }
                        out[(oc * o.height + y) * o.width + x] = acc;
                    }
                }
            }
            return;
        }
        case LayerKind::MaxPool2d: {
            const Shape3 o = l.output();
            const std::size_t k = l.kernel, s = l.stride, ih = l.input.height, iw = l.input.width;
            for (std::size_t c = 0; c < o.channels; ++c) {
                for (std::size_t y = 0; y < o.height; ++y) {
                    for (std::size_t x = 0; x < o.width; ++x) {
                        std::size_t best = (c * ih + y * s) * iw + x * s;
                        for (std::size_t ky = 0; ky < k; ++ky) {
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const std::size_t idx = (c * ih + y * s + ky) * iw + x * s + kx;
                                if (in[idx] > in[best]) best = idx;
                            }
                        }
                        const std::size_t oi = (c * o.height + y) * o.width + x;
                        out[oi] = in[best];
                        if (argmax) argmax[oi] = static_cast<std::uint32_t>(best);
                    }
                }
            }
            return;
        }
    }
}

void layer_backward(const LayerSpec& l, std::span<const double> params, std::span<const double> in,
                    std::span<const double> out, std::span<const double> g,
                    const std::uint32_t* argmax, std::span<double> wg, std::span<double> in_grad) {
    switch (l.kind) {
        case LayerKind::FullyConnected: dense_backward(params, l.units, in, g, wg, in_grad); return;
        case LayerKind::SigmoidHashHead: {
            std::vector<double> dz(l.units);
            for (std::size_t o = 0; o < l.units; ++o) dz[o] = g[o] * out[o] * (1.0 - out[o]);
            dense_backward(params, l.units, in, dz, wg, in_grad);
            return;
        }
        case LayerKind::Relu:
            if (in_grad.empty()) return;
            for (std::size_t i = 0; i < in.size(); ++i) in_grad[i] = in[i] > 0.0 ? g[i] : 0.0;
            return;
        case LayerKind::Conv2d: {
            const Shape3 o = l.output();
            const std::size_t k = l.kernel, s = l.stride, ih = l.input.height, iw = l.input.width;
            const std::size_t cols = l.fan_in() + 1;
            if (!in_grad.empty()) std::fill(in_grad.begin(), in_grad.end(), 0.0);
            for (std::size_t oc = 0; oc < o.channels; ++oc) {
                const double* w = params.data() + oc * cols;
                double* gw = wg.data() + oc * cols;
                for (std::size_t y = 0; y < o.height; ++y) {
                    for (std::size_t x = 0; x < o.width; ++x) {
                        const double go = g[(oc * o.height + y) * o.width + x];
                        if (go == 0.0) continue;
                        gw[cols - 1] += go;
                        for (std::size_t ic = 0; ic < l.input.channels; ++ic) {
                            const std::size_t base = (ic * ih + y * s) * iw + x * s;
                            const double* src = in.data() + base;
                            double* gk = gw + ic * k * k;
                            for (std::size_t ky = 0; ky < k; ++ky) {
                                for (std::size_t kx = 0; kx < k; ++kx) gk[ky * k + kx] += go * src[ky * iw + kx];
                            }
                            if (in_grad.empty()) continue;
                            const double* wk = w + ic * k * k;
                            double* dst = in_grad.data() + base;
                            for (std::size_t ky = 0; ky < k; ++ky) {
                                for (std::size_t kx = 0; kx < k; ++kx) dst[ky * iw + kx] += go * wk[ky * k + kx];
                            }
                        }
                    }
                }
            }
            return;
        }
        case LayerKind::MaxPool2d:
            if (in_grad.empty()) return;
            std::fill(in_grad.begin(), in_grad.end(), 0.0);
            for (std::size_t i = 0; i < out.size(); ++i) in_grad[argmax[i]] += g[i];
            return;
    }
}

// ---------------------------------------------------------------------------
// Forward / backward over a batch

namespace {

std::size_t check_batch(const HashNet& net, const Tensor& batch) {
    const LayerSpec& first = net.layers().front();
    const Shape3 in = first.input;
    const bool flat_ok = batch.rank() == 2 && batch.shape[1] == in.volume();
    const bool image_ok = batch.rank() == 4 && batch.shape[1] == in.channels &&
                          batch.shape[2] == in.height && batch.shape[3] == in.width;
    if (!(flat_ok || image_ok) || batch.rows() == 0) {
        throw DimensionError("layer 0 (" + to_string(first.kind) + ") expects batch rows of shape " +
                             in.str() + ", got batch " + Tensor::shape_string(batch.shape));
    }
    return batch.rows();
}

}  // namespace

Tensor forward(const HashNet& net, const Tensor& batch) {
    const std::size_t n = check_batch(net, batch);
    const auto& layers = net.layers();
    const std::size_t q = net.hash_bits();
    std::size_t widest = 0;
    for (const LayerSpec& l : layers) widest = std::max({widest, l.input.volume(), l.output().volume()});

    Tensor out({n, q});
    const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < rows; ++b) {
        std::vector<double> cur(batch.row(b).begin(), batch.row(b).end());
        std::vector<double> next(widest);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto slot = net.parameter_slot(i);
            std::span<const double> p;
            if (slot) p = net.parameters()[*slot].data;
            const std::size_t ov = layers[i].output().volume();
            layer_forward(layers[i], p, {cur.data(), layers[i].input.volume()}, {next.data(), ov});
            cur.assign(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(ov));
        }
        std::copy(cur.begin(), cur.end(), out.row(b).begin());
    }
    return out;
}

ForwardTrace forward_train(const HashNet& net, const Tensor& batch) {
    const std::size_t n = check_batch(net, batch);
    const auto& layers = net.layers();
    ForwardTrace t;
    t.batch_ = n;
    t.net_uid_ = net.uid();
    t.generation_ = net.generation();
    t.activations_.resize(layers.size() + 1);
    t.pool_argmax_.resize(layers.size());
    t.activations_[0] = batch.data;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        const std::size_t iv = l.input.volume(), ov = l.output().volume();
        const auto slot = net.parameter_slot(i);
        std::span<const double> p;
        if (slot) p = net.parameters()[*slot].data;
        t.activations_[i + 1].resize(n * ov);
        if (l.kind == LayerKind::MaxPool2d) t.pool_argmax_[i].resize(n * ov);
        for (std::size_t b = 0; b < n; ++b) {
            std::uint32_t* am = l.kind == LayerKind::MaxPool2d ? t.pool_argmax_[i].data() + b * ov : nullptr;
            layer_forward(l, p, {t.activations_[i].data() + b * iv, iv},
                          {t.activations_[i + 1].data() + b * ov, ov}, am);
        }
    }
    t.output_ = Tensor({n, net.hash_bits()}, t.activations_.back());
    return t;
}

ParameterGradients backward(const HashNet& net, const ForwardTrace& trace, const Tensor& output_grad) {
    if (!trace.recorded()) throw StateError("backward called without a recorded forward pass");
    if (trace.net_uid_ != net.uid() || trace.generation_ != net.generation()) {
        throw StateError("backward called with a forward trace from different network parameters");
    }
    const std::size_t n = trace.batch_, q = net.hash_bits();
    if (output_grad.rank() != 2 || output_grad.shape[0] != n || output_grad.shape[1] != q) {
        throw DimensionError("output gradient must have shape (" + std::to_string(n) + "," +
                             std::to_string(q) + "), got " + Tensor::shape_string(output_grad.shape));
    }
    const auto& layers = net.layers();
    ParameterGradients grads;
    for (const Tensor& p : net.parameters()) grads.emplace_back(p.shape);

    std::vector<double> g, gin;
    for (std::size_t b = 0; b < n; ++b) {
        g.assign(output_grad.row(b).begin(), output_grad.row(b).end());
        for (std::size_t i = layers.size(); i-- > 0;) {
            const LayerSpec& l = layers[i];
            const std::size_t iv = l.input.volume(), ov = l.output().volume();
            const auto slot = net.parameter_slot(i);
            std::span<const double> p;
            std::span<double> pg;
            if (slot) {
                p = net.parameters()[*slot].data;
                pg = grads[*slot].data;
            }
            const std::uint32_t* am =
                l.kind == LayerKind::MaxPool2d ? trace.pool_argmax_[i].data() + b * ov : nullptr;
            gin.assign(i == 0 ? 0 : iv, 0.0);
            layer_backward(l, p, {trace.activations_[i].data() + b * iv, iv},
                           {trace.activations_[i + 1].data() + b * ov, ov}, g, am, pg, gin);
            g.swap(gin);
        }
    }
    return grads;
}

void sgd_update(std::span<double> params, std::span<const double> grads, double lr, double weight_decay) {
    if (params.size() != grads.size()) {
        throw DimensionError("gradient has " + std::to_string(grads.size()) + " values for " +
                             std::to_string(params.size()) + " parameters");
    }
    for (double g : grads) {
        if (!std::isfinite(g)) throw TrainingDivergence("non-finite gradient", -1);
    }
    bool finite = true;
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= lr * (grads[i] + weight_decay * params[i]);
        finite &= std::isfinite(params[i]);
    }
    if (!finite) throw TrainingDivergence("parameter overflow in update", -1);
}

void sgd_step(HashNet& net, const ParameterGradients& grads, double lr, double weight_decay) {
    const auto& params = net.parameters();
    if (grads.size() != params.size()) {
        throw DimensionError("expected " + std::to_string(params.size()) + " gradient tensors, got " +
                             std::to_string(grads.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape != params[i].shape) {
            throw DimensionError("gradient " + std::to_string(i) + " has shape " +
                                 Tensor::shape_string(grads[i].shape) + ", parameter has " +
                                 Tensor::shape_string(params[i].shape));
        }
        for (double g : grads[i].data) {
            if (!std::isfinite(g)) throw TrainingDivergence("non-finite gradient", -1);
        }
    }
    if (lr == 0.0) return;
    auto& mut = net.mutable_parameters();
    for (std::size_t i = 0; i < mut.size(); ++i) sgd_update(mut[i].data, grads[i].data, lr, weight_decay);
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const HashNet& net, std::ostream& out) {
    out.write(kNetMagic, sizeof(kNetMagic) - 1);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const LayerSpec& l = net.layers()[i];
        binio::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(l.kind));
        const auto dims = l.dimensions();
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
        for (std::uint64_t d : dims) binio::write_le<std::uint64_t>(out, d);
        const auto slot = net.parameter_slot(i);
        const std::size_t count = slot ? net.parameters()[*slot].size() : 0;
        binio::write_le<std::uint64_t>(out, count);
        if (slot) {
            for (double v : net.parameters()[*slot].data) binio::write_f64(out, v);
        }
    }
}

HashNet load_checkpoint(std::istream& in) {
    binio::Reader r(in);
    r.expect_magic({kNetMagic, sizeof(kNetMagic) - 1}, "network checkpoint");
    const auto count = r.read_le<std::uint32_t>("layer count");
    if (count == 0 || count > 4096) throw FormatError("implausible layer count", r.offset() - 4);

    std::vector<LayerSpec> layers;
    std::vector<std::vector<double>> values;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t at = r.offset();
        const auto tag = r.read_le<std::uint8_t>("layer kind");
        if (tag < 1 || tag > 5) throw FormatError("unknown layer kind tag " + std::to_string(tag), at);
        const auto ndims = r.read_le<std::uint32_t>("dimension count");
        if (ndims > 16) throw FormatError("implausible dimension count", r.offset() - 4);
        std::vector<std::uint64_t> dims(ndims);
        for (auto& d : dims) d = r.read_le<std::uint64_t>("layer dimension");
        LayerSpec spec = LayerSpec::from_dimensions(static_cast<LayerKind>(tag), dims);
        const std::size_t pat = r.offset();
        const auto nparams = r.read_le<std::uint64_t>("parameter count");
        if (nparams != spec.parameter_count()) {
            throw FormatError("layer " + std::to_string(i) + " stores " + std::to_string(nparams) +
                              " parameters, expected " + std::to_string(spec.parameter_count()), pat);
        }
        std::vector<double> v(nparams);
        for (double& x : v) x = r.read_f64("parameter values");
        layers.push_back(spec);
        values.push_back(std::move(v));
    }
    if (!r.at_eof()) throw FormatError("trailing bytes after checkpoint", r.offset());

    HashNet net = HashNet::zeros(layers);
    auto& params = net.mutable_parameters();
    std::size_t slot = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].has_parameters()) params[slot++].data = std::move(values[i]);
    }
    return net;
}

void save_checkpoint(const HashNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write checkpoint " + path);
    save_checkpoint(net, out);
    if (!out) throw IngestionError("failed writing checkpoint " + path);
}

HashNet load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open checkpoint " + path);
    return load_checkpoint(in);
}

}  // namespace pdh
