#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pdh/tensor.hpp"

namespace pdh {

// Per-sample activation geometry, channel-major. Flat vectors use (n, 1, 1).
struct Shape3 {
    std::size_t channels = 0;
    std::size_t height = 1;
    std::size_t width = 1;

    std::size_t volume() const noexcept { return channels * height * width; }
    friend bool operator==(const Shape3&, const Shape3&) = default;
    std::string str() const;
};

enum class LayerKind : std::uint8_t {
    FullyConnected = 1,
    Relu = 2,
    Conv2d = 3,
    MaxPool2d = 4,
    SigmoidHashHead = 5,
};

std::string to_string(LayerKind kind);

// One layer of a HashNet. `input` is the per-sample shape the layer consumes;
// `units` is the output width (fully-connected, hash head) or output channel
// count (convolution). Convolutions use valid padding.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    Shape3 input;
    std::size_t units = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;

    static LayerSpec fully_connected(Shape3 in, std::size_t out);
    static LayerSpec relu(Shape3 in);
    static LayerSpec conv2d(Shape3 in, std::size_t out_channels, std::size_t kernel,
                            std::size_t stride = 1);
    static LayerSpec max_pool(Shape3 in, std::size_t kernel, std::size_t stride = 0);
    static LayerSpec hash_head(Shape3 in, std::size_t bits);

    Shape3 output() const;
    bool has_parameters() const noexcept;
    // Parameters are stored as one (rows, fan_in + 1) tensor; the last column is the bias.
    std::vector<std::size_t> parameter_shape() const;
    std::size_t parameter_count() const;
    std::size_t fan_in() const;
    std::size_t fan_out() const;

    // Flat dimension list used by the checkpoint format.
    std::vector<std::uint64_t> dimensions() const;
    static LayerSpec from_dimensions(LayerKind kind, const std::vector<std::uint64_t>& dims);

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Builds a layer stack from an input shape by chaining output shapes.
class ArchitectureBuilder {
public:
    explicit ArchitectureBuilder(Shape3 input) : current_(input) {}

    ArchitectureBuilder& conv(std::size_t out_channels, std::size_t kernel, std::size_t stride = 1);
    ArchitectureBuilder& relu();
    ArchitectureBuilder& max_pool(std::size_t kernel, std::size_t stride = 0);
    ArchitectureBuilder& fully_connected(std::size_t out);
    std::vector<LayerSpec> hash_head(std::size_t bits);

    Shape3 current() const noexcept { return current_; }

private:
    Shape3 current_;
    std::vector<LayerSpec> layers_;
};

// conv(3->8, 3x3) -> relu -> maxpool 2x2 -> conv(8->16, 3x3) -> relu -> maxpool 2x2
// -> fc(64) -> relu -> hash head(bits). A leading max-pool of `input_pool` is
// inserted when input_pool > 1.
std::vector<LayerSpec> default_architecture(Shape3 input, std::size_t bits,
                                            std::size_t input_pool = 1);

// fc(hidden) -> relu -> hash head(bits), with the same optional leading pool.
std::vector<LayerSpec> mlp_architecture(Shape3 input, std::size_t hidden, std::size_t bits,
                                        std::size_t input_pool = 1);

class HashNet {
public:
    // Validates the stack and draws parameters uniformly in
    // +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
    HashNet(std::vector<LayerSpec> layers, std::uint64_t seed);

    // Same architecture with every parameter set to zero.
    static HashNet zeros(std::vector<LayerSpec> layers);

    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    Shape3 input_shape() const { return layers_.front().input; }
    std::size_t hash_bits() const { return layers_.back().units; }
    std::uint64_t seed() const noexcept { return seed_; }

    // One tensor per parameterized layer, in layer order.
    const std::vector<Tensor>& parameters() const noexcept { return params_; }
    std::vector<Tensor>& mutable_parameters() noexcept {
        ++generation_;
        return params_;
    }
    std::size_t parameter_count() const;

    // Index into parameters() for layer i, or nullopt for parameter-free layers.
    std::optional<std::size_t> parameter_slot(std::size_t layer) const;

    // Bumped on every parameter mutation; a trace is only valid for the
    // generation it was recorded at.
    std::uint64_t generation() const noexcept { return generation_; }
    std::uint64_t uid() const noexcept { return uid_; }

    friend bool operator==(const HashNet& a, const HashNet& b) {
        if (a.layers_ != b.layers_ || a.params_.size() != b.params_.size()) return false;
        for (std::size_t i = 0; i < a.params_.size(); ++i) {
            if (a.params_[i].shape != b.params_[i].shape || a.params_[i].data != b.params_[i].data)
                return false;
        }
        return true;
    }

private:
    HashNet(std::vector<LayerSpec> layers, std::uint64_t seed, bool randomize);

    std::vector<LayerSpec> layers_;
    std::vector<Tensor> params_;
    std::vector<int> slots_;
    std::uint64_t seed_ = 0;
    std::uint64_t generation_ = 0;
    std::uint64_t uid_ = 0;
};

// Activations recorded by forward_train for use by backward.
class ForwardTrace {
public:
    ForwardTrace() = default;

    bool recorded() const noexcept { return batch_ > 0; }
    std::size_t batch_size() const noexcept { return batch_; }
    const Tensor& output() const { return output_; }

private:
    std::size_t batch_ = 0;
    std::uint64_t net_uid_ = 0;
    std::uint64_t generation_ = 0;
    // activations_[i] is the input to layer i; the last entry is the network output.
    std::vector<std::vector<double>> activations_;
    std::vector<std::vector<std::uint32_t>> pool_argmax_;
    Tensor output_;

    friend ForwardTrace forward_train(const HashNet& net, const Tensor& batch);
    friend std::vector<Tensor> backward(const HashNet& net, const ForwardTrace& trace,
                                        const Tensor& output_grad);
};

using ParameterGradients = std::vector<Tensor>;

// Pure forward pass. Accepts batches shaped (B, C, H, W) or (B, C*H*W).
// Returns (B, bits) with every value strictly inside (0, 1).
Tensor forward(const HashNet& net, const Tensor& batch);

// Forward pass that keeps the activations needed by backward.
ForwardTrace forward_train(const HashNet& net, const Tensor& batch);

// Gradient of sum_b <output_grad_b, f(x_b)> with respect to every parameter.
ParameterGradients backward(const HashNet& net, const ForwardTrace& trace,
                            const Tensor& output_grad);

// p <- p - lr * (g + weight_decay * p), elementwise.
void sgd_update(std::span<double> params, std::span<const double> grads, double lr,
                double weight_decay);

void sgd_step(HashNet& net, const ParameterGradients& grads, double lr, double weight_decay);

// Single-layer kernels, exposed for testing. Inputs and outputs are per-sample
// flat vectors laid out channel-major.
void layer_forward(const LayerSpec& layer, std::span<const double> params,
                   std::span<const double> in, std::span<double> out,
                   std::uint32_t* argmax = nullptr);
void layer_backward(const LayerSpec& layer, std::span<const double> params,
                    std::span<const double> in, std::span<const double> out,
                    std::span<const double> out_grad, const std::uint32_t* argmax,
                    std::span<double> param_grad, std::span<double> in_grad);

// Checkpoint format: "PDHNET1\n", u32 layer count, then per layer a u8 kind
// tag, u32 dimension count, u64 dimensions, u64 parameter count, and the
// parameters as f64. All integers and reals little-endian. The seed is not
// stored; a loaded net reports seed 0.
void save_checkpoint(const HashNet& net, std::ostream& out);
HashNet load_checkpoint(std::istream& in);
void save_checkpoint(const HashNet& net, const std::string& path);
HashNet load_checkpoint(const std::string& path);

}  // namespace pdh
