#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "bridgekit/dual.hpp"
#include "bridgekit/tensor.hpp"

namespace bridgekit::ad {

using Var = std::size_t;

// Minimal reverse-mode differentiation tape over dense tensors. Operations are
// recorded in execution order; backward() replays them in reverse. The scalar
// type is a template parameter so the same tape runs over Dual numbers, which
// turns every gradient into a gradient plus its directional derivative.
template <class S>
class Graph {
  public:
    using T = BasicTensor<S>;

    Var input(T value, bool requires_grad = false);

    const T& value(Var v) const { return nodes_.at(v).value; }
    // Gradient accumulated by the last backward(); zeros if none reached the node.
    T grad(Var v) const;
    bool requires_grad(Var v) const { return nodes_.at(v).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // y = x W^T + b for x (N, in), W (out, in), b (out).
    Var linear(Var x, Var w, Var b);
    // Cross-correlation with square kernels, zero padding; x (N, C, H, W), w (O, C, k, k), b (O).
    Var conv2d(Var x, Var w, Var b, int stride, int pad);
    Var add(Var a, Var b);
    // x (N, C) or (N, C, H, W) plus e (N, C) broadcast over spatial positions.
    Var add_channel(Var x, Var e);
    Var silu(Var x);
    Var leaky_relu(Var x, double slope);
    Var tanh(Var x);
    // Concatenate along axis 1; all other axes must agree.
    Var concat(const std::vector<Var>& parts);
    Var avgpool2(Var x);
    Var upsample2(Var x);
    Var reshape(Var x, Shape shape);

    void zero_grad();
    void backward(Var out, const T& seed);

  private:
    struct Node {
        T value;
        T grad;
        bool requires_grad = false;
        std::function<void(Graph&)> backward;
    };

    Var push(T value, bool requires_grad, std::function<void(Graph&)> backward);
    T& grad_ref(Var v);
    bool any_requires(std::initializer_list<Var> vs) const;

    std::vector<Node> nodes_;
};

extern template class Graph<double>;
extern template class Graph<Dual>;

}  // namespace bridgekit::ad
