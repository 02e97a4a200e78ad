#pragma once

// Network checkpoint file, version 1. All integers little-endian.
//
//   magic      "SDNN"
//   u32        version (1)
//   u32        input rank R, then R x u32 input dims
//   u32        layer count L
//   L times:
//     u8       kind tag (1 Conv2D, 2 MaxPool2D, 3 Dense, 4 ReLU,
//              5 Sigmoid, 6 Softmax)
//     Conv2D:    u32 in_channels, u32 out_channels, u32 kernel,
//                f64[out*in*k*k] weight (row-major [out][in][k][k]),
//                f64[out] bias
//     MaxPool2D: u32 window
//     Dense:     u32 in_features, u32 out_features,
//                f64[out*in] weight (row-major [out][in]), f64[out] bias
//     others:    no payload
//
// f64 values are IEEE-754 binary64 bit patterns.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sensordrop/binary_io.hpp"
#include "sensordrop/network.hpp"

namespace sensordrop {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_network(std::ostream& os, const Network& net) {
  os.write("SDNN", 4);
  io::put_u32(os, kCheckpointVersion);
  io::put_u32(os, static_cast<std::uint32_t>(net.input_shape().size()));
  for (auto d : net.input_shape()) io::put_u32(os, static_cast<std::uint32_t>(d));
  io::put_u32(os, static_cast<std::uint32_t>(net.layers().size()));
  auto put_tensor = [&](const Tensor& t) {
    for (double v : t.data()) io::put_f64(os, v);
  };
  for (const auto& layer : net.layers()) {
    io::put_u8(os, static_cast<std::uint8_t>(kind_of(layer)));
    if (auto* c = std::get_if<Conv2D>(&layer)) {
      io::put_u32(os, static_cast<std::uint32_t>(c->in_channels));
      io::put_u32(os, static_cast<std::uint32_t>(c->out_channels));
      io::put_u32(os, static_cast<std::uint32_t>(c->kernel));
      put_tensor(c->weight);
      put_tensor(c->bias);
    } else if (auto* p = std::get_if<MaxPool2D>(&layer)) {
      io::put_u32(os, static_cast<std::uint32_t>(p->window));
    } else if (auto* d = std::get_if<Dense>(&layer)) {
      io::put_u32(os, static_cast<std::uint32_t>(d->in_features));
      io::put_u32(os, static_cast<std::uint32_t>(d->out_features));
      put_tensor(d->weight);
      put_tensor(d->bias);
    }
  }
}

inline Network read_network(std::istream& is, const std::string& what = "checkpoint") {
  io::Reader r(is, what);
  r.expect_magic("SDNN");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(version));
  }
  const auto rank = r.u32();
  if (rank == 0 || rank > 8) throw FormatError(what + ": bad input rank");
  Shape input;
  for (std::uint32_t i = 0; i < rank; ++i) input.push_back(r.u32());
  const auto count = r.u32();
  auto read_tensor = [&](Tensor& t) {
    for (double& v : t.data()) v = r.f64();
  };
  constexpr std::uint32_t kMaxDim = 1u << 16;
  auto dim = [&]() {
    const auto v = r.u32();
    if (v == 0 || v > kMaxDim) throw FormatError(what + ": bad layer dimension");
    return static_cast<std::size_t>(v);
  };
  std::vector<Layer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto tag = r.u8();
    switch (static_cast<LayerKind>(tag)) {
      case LayerKind::Conv2D: {
        const auto in = dim(), out = dim(), k = dim();
        Conv2D c(in, out, k);
        read_tensor(c.weight);
        read_tensor(c.bias);
        layers.emplace_back(std::move(c));
        break;
      }
      case LayerKind::MaxPool2D:
        layers.emplace_back(MaxPool2D{dim()});
        break;
      case LayerKind::Dense: {
        const auto in = dim(), out = dim();
        Dense d(in, out);
        read_tensor(d.weight);
        read_tensor(d.bias);
        layers.emplace_back(std::move(d));
        break;
      }
      case LayerKind::ReLU: layers.emplace_back(ReLU{}); break;
      case LayerKind::Sigmoid: layers.emplace_back(Sigmoid{}); break;
      case LayerKind::Softmax: layers.emplace_back(Softmax{}); break;
      default:
        throw FormatError(what + ": unknown layer tag " + std::to_string(tag));
    }
  }
  try {
    return Network(std::move(input), std::move(layers));
  } catch (const ShapeError& e) {
    throw FormatError(what + ": inconsistent layer shapes: " + e.what());
  }
}

inline void save_network(const std::filesystem::path& path, const Network& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_network(os, net);
  if (!os) throw IoError("write failed: " + path.string());
}

inline Network load_network(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  Network net = read_network(is, path.string());
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes after last layer");
  }
  return net;
}

}  // namespace sensordrop
