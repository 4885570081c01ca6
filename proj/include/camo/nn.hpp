#pragma once

// Minimal convolutional network with manual backprop: stride-2 3x3 conv
// blocks, global average pooling and a linear head. Enough for the desk-scale
// detector, visual discriminator and parameter generator.

#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "camo/image.hpp"

namespace camo::nn {

/// Allocator handing out 64-byte aligned storage. Eigen's vector kernels peel
/// leading elements up to the first aligned address, so buffers at varying
/// alignment would sum in varying order and break run-to-run reproducibility.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept
    {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <typename U>
    friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept
    {
        return true;
    }
};

using FloatBuffer = std::vector<float, AlignedAllocator<float>>;

/// Dense N x C x H x W float tensor.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    FloatBuffer data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, float fill = 0.0f)
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill)
    {}

    std::size_t sample_size() const noexcept { return static_cast<std::size_t>(c) * h * w; }
    float* sample(int i) noexcept { return data.data() + i * sample_size(); }
    const float* sample(int i) const noexcept { return data.data() + i * sample_size(); }
    float& at(int i, int ch, int y, int x) noexcept
    {
        return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
    }
    float at(int i, int ch, int y, int x) const noexcept
    {
        return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
    }
};

/// Packs images (all the same size) into a planar batch, normalized to
/// roughly zero mean: (v - 0.5) / 0.25.
Tensor to_batch(std::span<const ImageF* const> images);
Tensor to_batch(const ImageF& image);
inline constexpr float kInputScale = 4.0f;

struct ParamRef {
    std::string name;
    FloatBuffer* value;
    FloatBuffer* grad;
};

struct NetSpec {
    int in_channels = 3;
    std::vector<int> channels{16, 32, 64, 64};
    int outputs = 1;
    float leak = 0.05f;
    /// 0: global average pooling. r > 0: per-location head outputs pooled by
    /// the soft minimum -log(mean(exp(-r z))) / r.
    float softmin = 0.0f;

    /// Architecture identifier embedded in checkpoints.
    std::string id() const;
    friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

NetSpec parse_net_id(const std::string& id);

class ConvNet {
public:
    ConvNet() = default;
    ConvNet(NetSpec spec, std::uint64_t init_seed);

    const NetSpec& spec() const noexcept { return spec_; }

    /// Returns N x outputs logits; caches everything backward() needs.
    Tensor forward(const Tensor& x);
    /// Backpropagates dL/dlogits (N x outputs, flattened in `grad`).
    /// Parameter gradients are accumulated; the input gradient is returned
    /// when `want_input_grad` is set (in normalized input units).
    Tensor backward(std::span<const float> dlogits, bool want_input_grad = false);

    void zero_grad();
    std::vector<ParamRef> params();
    std::size_t param_count() const;

    /// Activations of the last conv block from the latest forward pass, and
    /// their gradient from the latest backward pass.
    const Tensor& last_conv() const noexcept { return acts_.back(); }
    const Tensor& last_conv_grad() const noexcept { return last_conv_grad_; }
    /// Pooled penultimate features of the latest forward pass (N x C).
    const std::vector<float>& features() const noexcept { return pooled_; }

    std::vector<float> flat_params() const;
    void set_flat_params(std::span<const float> flat);
    std::uint64_t param_hash() const;

private:
    struct Conv {
        int in = 0, out = 0;
        FloatBuffer weight, bias, dweight, dbias;
    };

    NetSpec spec_;
    std::vector<Conv> convs_;
    FloatBuffer head_w_, head_b_, dhead_w_, dhead_b_;

    // Forward caches.
    Tensor input_;
    std::vector<Tensor> pre_;   // pre-activation per conv
    std::vector<Tensor> acts_;  // post-activation per conv
    std::vector<FloatBuffer> cols_;  // im2col per conv, all samples
    std::vector<float> pooled_;
    std::vector<float> loc_weights_;  // soft-min pooling weights, N x outputs x hw
    Tensor last_conv_grad_;
};

/// Numerically stable log(sigmoid(z)).
double log_sigmoid(double z) noexcept;
double sigmoid(double z) noexcept;

enum class OptimizerKind { sgd, rmsprop, adam };

/// Plain SGD, RMSProp (v = a v + (1 - a) g^2, step = lr g / (sqrt(v) + eps)),
/// or Adam with bias correction (beta1 0.9, beta2 = alpha).
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr, double alpha = 0.99, double eps = 1e-8);
    void step(std::span<const ParamRef> params);
    double lr() const noexcept { return lr_; }
    void set_lr(double lr) noexcept { lr_ = lr; }

private:
    OptimizerKind kind_;
    double lr_, alpha_, eps_;
    std::vector<std::vector<float>> sq_;
    std::vector<std::vector<float>> mom_;
    long steps_ = 0;
};

/// FNV-1a over raw float bytes.
std::uint64_t hash_floats(std::span<const float> values) noexcept;

}  // namespace camo::nn
