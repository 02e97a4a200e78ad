#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sensordrop/error.hpp"
#include "sensordrop/layers.hpp"
#include "sensordrop/tensor.hpp"

namespace sensordrop {

// Activations of one forward pass: activations[0] is the input,
// activations[i + 1] the output of layer i.
struct ForwardCache {
  std::vector<Tensor> activations;
  bool valid() const { return !activations.empty(); }
};

struct Gradients {
  TensorList params;  // aligned with Network::parameters()
  Tensor input;
};

// Appends a ConvP block: a convolution followed by a max pool.
inline void append_convp(std::vector<Layer>& layers, std::size_t in_channels,
                         std::size_t out_channels, std::size_t kernel = 3,
                         std::size_t pool = 2) {
  layers.emplace_back(Conv2D(in_channels, out_channels, kernel));
  layers.emplace_back(MaxPool2D{pool});
}

// Sequential network. Parameters live inside the layers; the network also
// keeps the cache of its most recent forward() for the one-shot
// forward/backward API. A single instance must not be trained from two
// threads at once.
class Network {
 public:
  Network() : shapes_{Shape{}} {}

  Network(Shape input_shape, std::vector<Layer> layers)
      : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    Shape s = input_shape_;
    shapes_.push_back(s);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      try {
        s = std::visit([&](const auto& l) { return l.output_shape(s); },
                       layers_[i]);
      } catch (const ShapeError& e) {
        throw ShapeError(describe_layer(i) + ": " + e.what());
      }
      shapes_.push_back(s);
    }
  }

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return shapes_.back(); }
  const Shape& shape_after(std::size_t layer) const {
    return shapes_.at(layer + 1);
  }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  void init(Rng& rng) {
    for (auto& l : layers_) std::visit([&](auto& x) { x.init(rng); }, l);
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& l : layers_) {
      for (Tensor* t : std::visit([](auto& x) { return x.parameters(); }, l)) {
        out.push_back(t);
      }
    }
    return out;
  }

  std::vector<const Tensor*> parameters() const {
    std::vector<const Tensor*> out;
    for (const auto& l : layers_) {
      for (const Tensor* t :
           std::visit([](const auto& x) { return x.parameters(); }, l)) {
        out.push_back(t);
      }
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : parameters()) n += t->size();
    return n;
  }

  TensorList zero_grads() const {
    TensorList out;
    for (const Tensor* t : parameters()) out.emplace_back(t->shape());
    return out;
  }

  // Forward pass into a caller-owned cache. Lets one set of weights be run
  // on several inputs (shared sensor weights) before backpropagating each.
  Tensor forward(const Tensor& input, ForwardCache& cache) const {
    check_input(input);
    cache.activations.clear();
    cache.activations.reserve(layers_.size() + 1);
    cache.activations.push_back(input);
    for (const auto& l : layers_) {
      const Tensor& x = cache.activations.back();
      cache.activations.push_back(
          std::visit([&](const auto& layer) { return layer.forward(x); }, l));
    }
    return cache.activations.back();
  }

  // Forward pass that remembers its activations for backward(grad).
  Tensor forward(const Tensor& input) { return forward(input, cache_); }

  // Inference only; touches no cache.
  Tensor predict(const Tensor& input) const {
    check_input(input);
    Tensor x = input;
    for (const auto& l : layers_) {
      x = std::visit([&](const auto& layer) { return layer.forward(x); }, l);
    }
    return x;
  }

  Gradients backward(const ForwardCache& cache, const Tensor& grad_out) const {
    if (!cache.valid() || cache.activations.size() != layers_.size() + 1) {
      throw UsageError("backward called before forward");
    }
    if (grad_out.shape() != output_shape()) {
      throw ShapeError("backward: output gradient shape " +
                       to_string(grad_out.shape()) + " vs network output " +
                       to_string(output_shape()));
    }
    Gradients g;
    g.params = zero_grads();
    std::size_t p = g.params.size();
    Tensor upstream = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const std::size_t np = std::visit(
          [](const auto& x) { return x.parameters().size(); }, layers_[i]);
      p -= np;
      std::span<Tensor> slot(g.params.data() + p, np);
      upstream = std::visit(
          [&](const auto& layer) {
            return layer.backward(cache.activations[i],
                                  cache.activations[i + 1], upstream, slot);
          },
          layers_[i]);
    }
    g.input = std::move(upstream);
    return g;
  }

  Gradients backward(const Tensor& grad_out) const {
    return backward(cache_, grad_out);
  }

  std::string describe_layer(std::size_t i) const {
    return "layer " + std::to_string(i) + " (" +
           layer_kind_name(kind_of(layers_[i])) + ")";
  }

 private:
  void check_input(const Tensor& input) const {
    if (input.shape() != input_shape_) {
      const std::string where =
          layers_.empty() ? std::string("network input") : describe_layer(0);
      throw ShapeError(where + ": expected input " + to_string(input_shape_) +
                       ", got " + to_string(input.shape()));
    }
  }

  Shape input_shape_;
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;
  ForwardCache cache_;
};

}  // namespace sensordrop
