#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sensordrop/network.hpp"
#include "sensordrop/rng.hpp"

namespace sensordrop {

// Scalar loss of a network output. Returns the loss and writes
// dLoss/dOutput into `grad` when it is non-null.
using LossFn = std::function<double(const Tensor& output, Tensor* grad)>;

// L = sum_i c_i * y_i
inline LossFn linear_loss(Tensor coeffs) {
  return [c = std::move(coeffs)](const Tensor& y, Tensor* g) {
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += c[i] * y[i];
    if (g) *g = c.reshaped(y.shape());
    return l;
  };
}

// L = 1/2 * sum_i (y_i - t_i)^2
inline LossFn quadratic_loss(Tensor target) {
  return [t = std::move(target)](const Tensor& y, Tensor* g) {
    double l = 0.0;
    if (g) *g = Tensor(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - t[i];
      l += 0.5 * d * d;
      if (g) (*g)[i] = d;
    }
    return l;
  };
}

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every coordinate; otherwise a seeded random subset of this
  // many coordinates per parameter tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t sample_seed = 0;
  bool include_input = false;
  // Skip coordinates whose +/- step moves a ReLU input across zero or
  // changes a max-pool winner. Central differences straddling such a switch
  // do not estimate the derivative on either side.
  bool skip_kinks = false;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t worst_tensor = 0;  // parameter index; == count for the input
  std::size_t worst_index = 0;
  std::size_t kinks_skipped = 0;
};

// Which linear piece a forward pass ran on: the sign of every ReLU input and
// the first maximal position (the one backward routes to) of every pool window.
inline std::vector<std::uint32_t> branch_signature(const Network& net, const ForwardCache& cache) {
  std::vector<std::uint32_t> sig;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Tensor& in = cache.activations[l];
    if (kind_of(layers[l]) == LayerKind::ReLU) {
      for (double v : in.data()) sig.push_back(v > 0.0 ? 1u : 0u);
    } else if (const auto* pool = std::get_if<MaxPool2D>(&layers[l])) {
      const std::size_t w = pool->window;
      const Shape& os = cache.activations[l + 1].shape();
      for (std::size_t c = 0; c < os[0]; ++c) {
        for (std::size_t i = 0; i < os[1]; ++i) {
          for (std::size_t j = 0; j < os[2]; ++j) {
            std::uint32_t best = 0;
            double m = in.at(c, i * w, j * w);
            for (std::size_t a = 0; a < w; ++a) {
              for (std::size_t b = 0; b < w; ++b) {
                const double v = in.at(c, i * w + a, j * w + b);
                if (v > m) {
                  m = v;
                  best = static_cast<std::uint32_t>(a * w + b);
                }
              }
            }
            sig.push_back(best);
          }
        }
      }
    }
  }
  return sig;
}

inline double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// Compares backprop gradients against central finite differences.
// Parameters are restored bit-exactly afterwards.
inline GradCheckResult gradient_check(Network& net, const Tensor& input,
                                      const LossFn& loss,
                                      const GradCheckOptions& opt = {}) {
  GradCheckResult result;
  ForwardCache cache;
  Tensor out = net.forward(input, cache);
  Tensor gout;
  loss(out, &gout);
  const Gradients g = net.backward(cache, gout);
  std::vector<std::uint32_t> base_signature;
  if (opt.skip_kinks) base_signature = branch_signature(net, cache);

  Rng rng(opt.sample_seed);
  auto coords_for = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (opt.max_coords_per_tensor && n > opt.max_coords_per_tensor) {
      rng.shuffle(idx.begin(), idx.end());
      idx.resize(opt.max_coords_per_tensor);
    }
    return idx;
  };

  auto probe = [&](double& slot, double analytic, std::size_t tensor,
                   std::size_t index, const Tensor& x) {
    const double saved = slot;
    ForwardCache probe_cache;
    slot = saved + opt.step;
    const double lp = loss(net.forward(x, probe_cache), nullptr);
    const bool kink_p = opt.skip_kinks && branch_signature(net, probe_cache) != base_signature;
    slot = saved - opt.step;
    const double lm = loss(net.forward(x, probe_cache), nullptr);
    const bool kink_m = opt.skip_kinks && branch_signature(net, probe_cache) != base_signature;
    slot = saved;
    if (kink_p || kink_m) {
      ++result.kinks_skipped;
      return;
    }
    const double numeric = (lp - lm) / (2.0 * opt.step);
    const double err = relative_error(analytic, numeric);
    ++result.coordinates_checked;
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_tensor = tensor;
      result.worst_index = index;
    }
  };

  auto params = net.parameters();
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i : coords_for(params[t]->size())) {
      probe((*params[t])[i], g.params[t][i], t, i, input);
    }
  }
  if (opt.include_input) {
    Tensor x = input;
    for (std::size_t i : coords_for(x.size())) {
      probe(x[i], g.input[i], params.size(), i, x);
    }
  }
  return result;
}

}  // namespace sensordrop
