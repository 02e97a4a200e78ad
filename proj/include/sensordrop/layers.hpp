#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sensordrop/error.hpp"
#include "sensordrop/rng.hpp"
#include "sensordrop/tensor.hpp"

namespace sensordrop {

enum class LayerKind : std::uint8_t {
  Conv2D = 1,
  MaxPool2D = 2,
  Dense = 3,
  ReLU = 4,
  Sigmoid = 5,
  Softmax = 6,
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::Dense: return "Dense";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Sigmoid: return "Sigmoid";
    case LayerKind::Softmax: return "Softmax";
  }
  return "?";
}

namespace detail {

inline void glorot_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out,
                        Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
}

inline void require_rank3(const Shape& in, const char* layer) {
  if (in.size() != 3) {
    throw ShapeError(std::string(layer) + ": expected CxHxW input, got " +
                     to_string(in));
  }
}

}  // namespace detail

// 2-D convolution, stride 1, "same" zero padding, odd square kernel.
// Input CxHxW, output OxHxW.
struct Conv2D {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out]

  Conv2D() = default;
  Conv2D(std::size_t in, std::size_t out, std::size_t k)
      : in_channels(in), out_channels(out), kernel(k),
        weight({out, in, k, k}), bias({out}) {
    if (k % 2 == 0) throw ShapeError("Conv2D: kernel size must be odd");
  }

  static constexpr LayerKind kind = LayerKind::Conv2D;

  void init(Rng& rng) {
    detail::glorot_fill(weight, in_channels * kernel * kernel,
                        out_channels * kernel * kernel, rng);
    bias.fill(0.0);
  }

  Shape output_shape(const Shape& in) const {
    detail::require_rank3(in, "Conv2D");
    if (in[0] != in_channels) {
      throw ShapeError("Conv2D: expected " + std::to_string(in_channels) +
                       " input channels, got " + to_string(in));
    }
    return {out_channels, in[1], in[2]};
  }

  Tensor forward(const Tensor& in) const {
    const std::size_t H = in.dim(1), W = in.dim(2);
    const auto pad = static_cast<long>(kernel / 2);
    Tensor out({out_channels, H, W});
    const double* x = in.data().data();
    double* y = out.data().data();
    const double* w = weight.data().data();
    for (std::size_t oc = 0; oc < out_channels; ++oc) {
      double* yo = y + oc * H * W;
      std::fill(yo, yo + H * W, bias[oc]);
      for (std::size_t ic = 0; ic < in_channels; ++ic) {
        const double* xi = x + ic * H * W;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          const long dy = static_cast<long>(ky) - pad;
          const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
          const std::size_t y1 = dy > 0 ? H - static_cast<std::size_t>(dy) : H;
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const long dx = static_cast<long>(kx) - pad;
            const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
            const std::size_t x1 =
                dx > 0 ? W - static_cast<std::size_t>(dx) : W;
            const double wv =
                w[((oc * in_channels + ic) * kernel + ky) * kernel + kx];
            for (std::size_t r = y0; r < y1; ++r) {
              double* yr = yo + r * W;
              const double* xr = xi + (static_cast<long>(r) + dy) *
                                          static_cast<long>(W) + dx;
              for (std::size_t c = x0; c < x1; ++c) yr[c] += wv * xr[c];
            }
          }
        }
      }
    }
    return out;
  }

  Tensor backward(const Tensor& in, const Tensor& /*out*/, const Tensor& g,
                  std::span<Tensor> grads) const {
    const std::size_t H = in.dim(1), W = in.dim(2);
    const auto pad = static_cast<long>(kernel / 2);
    Tensor gin(in.shape());
    Tensor& gw = grads[0];
    Tensor& gb = grads[1];
    const double* x = in.data().data();
    const double* go = g.data().data();
    const double* w = weight.data().data();
    double* gx = gin.data().data();
    for (std::size_t oc = 0; oc < out_channels; ++oc) {
      const double* gor = go + oc * H * W;
      double s = 0.0;
      for (std::size_t i = 0; i < H * W; ++i) s += gor[i];
      gb[oc] += s;
      for (std::size_t ic = 0; ic < in_channels; ++ic) {
        const double* xi = x + ic * H * W;
        double* gxi = gx + ic * H * W;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          const long dy = static_cast<long>(ky) - pad;
          const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
          const std::size_t y1 = dy > 0 ? H - static_cast<std::size_t>(dy) : H;
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const long dx = static_cast<long>(kx) - pad;
            const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
            const std::size_t x1 =
                dx > 0 ? W - static_cast<std::size_t>(dx) : W;
            const std::size_t widx =
                ((oc * in_channels + ic) * kernel + ky) * kernel + kx;
            const double wv = w[widx];
            double acc = 0.0;
            for (std::size_t r = y0; r < y1; ++r) {
              const double* gr = gor + r * W;
              const long off =
                  (static_cast<long>(r) + dy) * static_cast<long>(W) + dx;
              const double* xr = xi + off;
              double* gxr = gxi + off;
              for (std::size_t c = x0; c < x1; ++c) {
                acc += gr[c] * xr[c];
                gxr[c] += wv * gr[c];
              }
            }
            gw[widx] += acc;
          }
        }
      }
    }
    return gin;
  }

  std::vector<Tensor*> parameters() { return {&weight, &bias}; }
  std::vector<const Tensor*> parameters() const { return {&weight, &bias}; }
};

// Non-overlapping max pooling (window == stride). Trailing rows/columns
// that do not fill a window are dropped.
struct MaxPool2D {
  std::size_t window = 2;

  static constexpr LayerKind kind = LayerKind::MaxPool2D;

  void init(Rng&) {}

  Shape output_shape(const Shape& in) const {
    detail::require_rank3(in, "MaxPool2D");
    if (window == 0 || in[1] < window || in[2] < window) {
      throw ShapeError("MaxPool2D: window " + std::to_string(window) +
                       " larger than input " + to_string(in));
    }
    return {in[0], in[1] / window, in[2] / window};
  }

  Tensor forward(const Tensor& in) const {
    const Shape os = output_shape(in.shape());
    Tensor out(os);
    for (std::size_t c = 0; c < os[0]; ++c) {
      for (std::size_t i = 0; i < os[1]; ++i) {
        for (std::size_t j = 0; j < os[2]; ++j) {
          double m = in.at(c, i * window, j * window);
          for (std::size_t a = 0; a < window; ++a) {
            for (std::size_t b = 0; b < window; ++b) {
              m = std::max(m, in.at(c, i * window + a, j * window + b));
            }
          }
          out.at(c, i, j) = m;
        }
      }
    }
    return out;
  }

  // Gradient is routed to the first maximal element in scan order.
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& g,
                  std::span<Tensor>) const {
    Tensor gin(in.shape());
    const Shape& os = out.shape();
    for (std::size_t c = 0; c < os[0]; ++c) {
      for (std::size_t i = 0; i < os[1]; ++i) {
        for (std::size_t j = 0; j < os[2]; ++j) {
          const double m = out.at(c, i, j);
          bool routed = false;
          for (std::size_t a = 0; a < window && !routed; ++a) {
            for (std::size_t b = 0; b < window && !routed; ++b) {
              if (in.at(c, i * window + a, j * window + b) == m) {
                gin.at(c, i * window + a, j * window + b) += g.at(c, i, j);
                routed = true;
              }
            }
          }
        }
      }
    }
    return gin;
  }

  std::vector<Tensor*> parameters() { return {}; }
  std::vector<const Tensor*> parameters() const { return {}; }
};

// Fully connected. Any input shape with `in_features` elements is read
// as a flat vector; output is 1-D of length `out_features`.
struct Dense {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  Dense() = default;
  Dense(std::size_t in, std::size_t out)
      : in_features(in), out_features(out), weight({out, in}), bias({out}) {}

  static constexpr LayerKind kind = LayerKind::Dense;

  void init(Rng& rng) {
    detail::glorot_fill(weight, in_features, out_features, rng);
    bias.fill(0.0);
  }

  Shape output_shape(const Shape& in) const {
    if (shape_size(in) != in_features) {
      throw ShapeError("Dense: expected " + std::to_string(in_features) +
                       " input features, got " + to_string(in));
    }
    return {out_features};
  }

  Tensor forward(const Tensor& in) const {
    Tensor out({out_features});
    const double* x = in.data().data();
    for (std::size_t o = 0; o < out_features; ++o) {
      const double* wr = weight.data().data() + o * in_features;
      double s = bias[o];
      for (std::size_t i = 0; i < in_features; ++i) s += wr[i] * x[i];
      out[o] = s;
    }
    return out;
  }

  Tensor backward(const Tensor& in, const Tensor& /*out*/, const Tensor& g,
                  std::span<Tensor> grads) const {
    Tensor gin(in.shape());
    const double* x = in.data().data();
    for (std::size_t o = 0; o < out_features; ++o) {
      const double go = g[o];
      grads[1][o] += go;
      if (go == 0.0) continue;
      const double* wr = weight.data().data() + o * in_features;
      double* gwr = grads[0].data().data() + o * in_features;
      for (std::size_t i = 0; i < in_features; ++i) {
        gwr[i] += go * x[i];
        gin[i] += go * wr[i];
      }
    }
    return gin;
  }

  std::vector<Tensor*> parameters() { return {&weight, &bias}; }
  std::vector<const Tensor*> parameters() const { return {&weight, &bias}; }
};

struct ReLU {
  static constexpr LayerKind kind = LayerKind::ReLU;
  void init(Rng&) {}
  Shape output_shape(const Shape& in) const { return in; }

  Tensor forward(const Tensor& in) const {
    Tensor out = in;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
  }

  Tensor backward(const Tensor& in, const Tensor&, const Tensor& g,
                  std::span<Tensor>) const {
    Tensor gin(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) {
      gin[i] = in[i] > 0.0 ? g[i] : 0.0;
    }
    return gin;
  }

  std::vector<Tensor*> parameters() { return {}; }
  std::vector<const Tensor*> parameters() const { return {}; }
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct Sigmoid {
  static constexpr LayerKind kind = LayerKind::Sigmoid;
  void init(Rng&) {}
  Shape output_shape(const Shape& in) const { return in; }

  Tensor forward(const Tensor& in) const {
    Tensor out = in;
    for (double& v : out.data()) v = sigmoid(v);
    return out;
  }

  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& g,
                  std::span<Tensor>) const {
    Tensor gin(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) {
      gin[i] = g[i] * out[i] * (1.0 - out[i]);
    }
    return gin;
  }

  std::vector<Tensor*> parameters() { return {}; }
  std::vector<const Tensor*> parameters() const { return {}; }
};

// Softmax over the last dimension (each row sums to one).
struct Softmax {
  static constexpr LayerKind kind = LayerKind::Softmax;
  void init(Rng&) {}
  Shape output_shape(const Shape& in) const { return in; }

  Tensor forward(const Tensor& in) const {
    Tensor out = in;
    const std::size_t cols = in.shape().back();
    for (std::size_t r = 0; r < in.size() / cols; ++r) {
      double* row = out.data().data() + r * cols;
      const double m = *std::max_element(row, row + cols);
      double s = 0.0;
      for (std::size_t i = 0; i < cols; ++i) {
        row[i] = std::exp(row[i] - m);
        s += row[i];
      }
      for (std::size_t i = 0; i < cols; ++i) row[i] /= s;
    }
    return out;
  }

  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& g,
                  std::span<Tensor>) const {
    Tensor gin(in.shape());
    const std::size_t cols = in.shape().back();
    for (std::size_t r = 0; r < in.size() / cols; ++r) {
      const std::size_t base = r * cols;
      double dot = 0.0;
      for (std::size_t i = 0; i < cols; ++i) dot += out[base + i] * g[base + i];
      for (std::size_t i = 0; i < cols; ++i) {
        gin[base + i] = out[base + i] * (g[base + i] - dot);
      }
    }
    return gin;
  }

  std::vector<Tensor*> parameters() { return {}; }
  std::vector<const Tensor*> parameters() const { return {}; }
};

using Layer = std::variant<Conv2D, MaxPool2D, Dense, ReLU, Sigmoid, Softmax>;

inline LayerKind kind_of(const Layer& layer) {
  return std::visit([](const auto& l) { return l.kind; }, layer);
}

}  // namespace sensordrop
