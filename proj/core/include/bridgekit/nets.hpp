#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bridgekit/autodiff.hpp"
#include "bridgekit/tensor.hpp"

namespace bridgekit {

enum class NetKind { Mlp, TinyUnet };

std::string_view net_kind_name(NetKind k) noexcept;
NetKind parse_net_kind(std::string_view name);

struct NetConfig {
    NetKind kind = NetKind::Mlp;
    int width = 64;          // mlp hidden width
    int depth = 3;           // mlp hidden layers
    int base_channels = 8;   // tiny_unet channels at full resolution
    int time_embed_dim = 256;

    void validate() const;
};

// Sinusoidal encoding: [sin(t w_0), cos(t w_0), sin(t w_1), ...] with
// w_k = 10000^{-2k/dim}.
std::vector<double> time_embedding(int t, int dim);

// Named parameter tensors in a fixed registration order.
class ParamSet {
  public:
    void add(std::string name, Tensor value);
    std::size_t size() const noexcept { return tensors_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    Tensor& at(std::size_t i) { return tensors_.at(i); }
    const Tensor& at(std::size_t i) const { return tensors_.at(i); }
    std::size_t index_of(std::string_view name) const;
    std::size_t scalar_count() const;

    friend bool operator==(const ParamSet&, const ParamSet&) = default;

  private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

// Gradient buffers aligned with a ParamSet.
using ParamGrads = std::vector<Tensor>;
ParamGrads zero_grads_like(const ParamSet& params);

template <class S>
std::vector<ad::Var> bind_params(ad::Graph<S>& g, const ParamSet& params, bool requires_grad);

BasicTensor<Dual> make_dual(const Tensor& value, const Tensor* tangent = nullptr);

// Recovery network G(x_t, t, y, x0_prev). Inputs are concatenated along the
// feature/channel axis; the time embedding is added at every stage; the head is tanh.
class GeneratorNet {
  public:
    GeneratorNet(const NetConfig& config, Shape sample_shape, std::uint64_t seed);

    const NetConfig& config() const noexcept { return config_; }
    const Shape& sample_shape() const noexcept { return sample_shape_; }
    ParamSet& params() noexcept { return params_; }
    const ParamSet& params() const noexcept { return params_; }

    template <class S>
    ad::Var build(ad::Graph<S>& g, const std::vector<ad::Var>& pv, ad::Var x_t, ad::Var y, ad::Var x0_prev,
                  std::span<const int> ts) const;

    TensorBatch forward(const TensorBatch& x_t, std::span<const int> ts, const TensorBatch& y,
                        const TensorBatch& x0_prev) const;

  private:
    NetConfig config_;
    Shape sample_shape_;
    ParamSet params_;
};

// Discriminator D(x_candidate, t, x_t) producing one logit per batch element.
class DiscriminatorNet {
  public:
    DiscriminatorNet(const NetConfig& config, Shape sample_shape, std::uint64_t seed);

    const NetConfig& config() const noexcept { return config_; }
    const Shape& sample_shape() const noexcept { return sample_shape_; }
    ParamSet& params() noexcept { return params_; }
    const ParamSet& params() const noexcept { return params_; }

    // Output node has shape (N, 1).
    template <class S>
    ad::Var build(ad::Graph<S>& g, const std::vector<ad::Var>& pv, ad::Var x_candidate, ad::Var x_t,
                  std::span<const int> ts) const;

    std::vector<double> forward(const TensorBatch& x_candidate, std::span<const int> ts,
                                const TensorBatch& x_t) const;

  private:
    NetConfig config_;
    Shape sample_shape_;
    ParamSet params_;
};

struct DiscriminatorGrads {
    std::vector<double> logits;
    ParamGrads params;        // d(sum_i w_i D_i)/d params
    TensorBatch candidate;    // d(sum_i w_i D_i)/d x_candidate
};

// Reverse pass through D with per-sample output weights.
DiscriminatorGrads discriminator_backward(const DiscriminatorNet& D, const TensorBatch& x_candidate,
                                          std::span<const int> ts, const TensorBatch& x_t,
                                          std::span<const double> weights);

struct PenaltyGrads {
    std::vector<double> logits;
    std::vector<double> grad_norm2;  // per-sample ||d D_i / d x_candidate||^2
    ParamGrads params;               // d/d params of mean_i grad_norm2
};

// Gradient penalty and its exact parameter gradient. The input gradient g is
// computed first; a second reverse pass over dual numbers seeded with tangent g
// on the candidate yields the mixed second derivative (d^2 D / d params d x) g.
PenaltyGrads gradient_penalty(const DiscriminatorNet& D, const TensorBatch& x_candidate, std::span<const int> ts,
                              const TensorBatch& x_t);

struct GeneratorGrads {
    TensorBatch output;
    ParamGrads params;
    TensorBatch x_t;  // input gradient (for verification)
};

// Recorded generator forward pass whose reverse pass is run later, once the
// output seed is known.
class GeneratorTape {
  public:
    GeneratorTape(const GeneratorNet& G, const TensorBatch& x_t, std::span<const int> ts, const TensorBatch& y,
                  const TensorBatch& x0_prev);
    const TensorBatch& output() const { return graph_->value(out_); }
    GeneratorGrads backward(const TensorBatch& out_seed);

  private:
    std::unique_ptr<ad::Graph<double>> graph_;
    std::vector<ad::Var> params_;
    ad::Var x_t_ = 0;
    ad::Var out_ = 0;
};

GeneratorGrads generator_backward(const GeneratorNet& G, const TensorBatch& x_t, std::span<const int> ts,
                                  const TensorBatch& y, const TensorBatch& x0_prev, const TensorBatch& out_seed);

}  // namespace bridgekit
