#pragma once

// Dataset file, version 1. All integers little-endian.
//
//   magic      "SDDS"
//   u32        version (1)
//   u32        N (sensors per scene)
//   u32        image height, u32 image width
//   u64        generator seed
//   u32        train count, u32 test count
//   train scenes, then test scenes, each:
//     u8       label (0 car, 1 bus, 2 person, 3 no-object)
//     u8[ceil(N/8)]  visibility bitmask, bit i of byte i/8 = sensor i
//     f32[N*H*W]     pixels, view-major then row-major, IEEE-754 binary32

#include <filesystem>
#include <fstream>
#include <optional>

#include "sensordrop/binary_io.hpp"
#include "sensordrop/scene.hpp"

namespace sensordrop {

inline constexpr std::uint32_t kDatasetVersion = 1;

inline void write_split(std::ostream& os, const DatasetSplit& d) {
  os.write("SDDS", 4);
  io::put_u32(os, kDatasetVersion);
  io::put_u32(os, static_cast<std::uint32_t>(d.num_sensors));
  io::put_u32(os, static_cast<std::uint32_t>(d.image_size));
  io::put_u32(os, static_cast<std::uint32_t>(d.image_size));
  io::put_u64(os, d.seed);
  io::put_u32(os, static_cast<std::uint32_t>(d.train.size()));
  io::put_u32(os, static_cast<std::uint32_t>(d.test.size()));
  const std::size_t mask_bytes = (d.num_sensors + 7) / 8;
  auto put_scene = [&](const Scene& s) {
    if (s.views.size() != d.num_sensors) {
      throw ContractViolation("write_split: scene has wrong sensor count");
    }
    io::put_u8(os, s.label);
    for (std::size_t b = 0; b < mask_bytes; ++b) {
      std::uint8_t byte = 0;
      for (std::size_t k = 0; k < 8 && 8 * b + k < d.num_sensors; ++k) {
        if (s.visibility[8 * b + k]) byte |= static_cast<std::uint8_t>(1u << k);
      }
      io::put_u8(os, byte);
    }
    for (const auto& v : s.views) {
      for (double px : v.data()) io::put_f32(os, static_cast<float>(px));
    }
  };
  for (const auto& s : d.train) put_scene(s);
  for (const auto& s : d.test) put_scene(s);
}

// Reads a whole split or throws; never returns a partial dataset.
inline DatasetSplit read_split(std::istream& is,
                               std::optional<std::size_t> expected_sensors = {},
                               const std::string& what = "dataset") {
  io::Reader r(is, what);
  r.expect_magic("SDDS");
  const auto version = r.u32();
  if (version != kDatasetVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(version));
  }
  DatasetSplit d;
  d.num_sensors = r.u32();
  const auto h = r.u32();
  const auto w = r.u32();
  if (d.num_sensors == 0 || d.num_sensors > 64) {
    throw FormatError(what + ": bad sensor count");
  }
  if (h != w || h == 0 || h > 4096) throw FormatError(what + ": bad image dims");
  d.image_size = h;
  if (expected_sensors && *expected_sensors != d.num_sensors) {
    throw FormatError(what + ": file has N=" + std::to_string(d.num_sensors) +
                      " sensors, expected N=" + std::to_string(*expected_sensors));
  }
  d.seed = r.u64();
  const auto n_train = r.u32();
  const auto n_test = r.u32();
  const std::size_t mask_bytes = (d.num_sensors + 7) / 8;
  auto get_scene = [&]() {
    Scene s;
    s.label = r.u8();
    if (s.label >= kNumClasses) throw FormatError(what + ": bad label");
    s.visibility.assign(d.num_sensors, false);
    for (std::size_t b = 0; b < mask_bytes; ++b) {
      const auto byte = r.u8();
      for (std::size_t k = 0; k < 8 && 8 * b + k < d.num_sensors; ++k) {
        s.visibility[8 * b + k] = (byte >> k) & 1u;
      }
    }
    s.views.reserve(d.num_sensors);
    for (std::size_t i = 0; i < d.num_sensors; ++i) {
      Tensor v({1, d.image_size, d.image_size});
      for (double& px : v.data()) px = static_cast<double>(r.f32());
      s.views.push_back(std::move(v));
    }
    return s;
  };
  for (std::uint32_t i = 0; i < n_train; ++i) d.train.push_back(get_scene());
  for (std::uint32_t i = 0; i < n_test; ++i) d.test.push_back(get_scene());
  if (!r.at_end()) throw FormatError(what + ": trailing bytes after last scene");
  return d;
}

inline void save_split(const std::filesystem::path& path, const DatasetSplit& d) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_split(os, d);
  if (!os) throw IoError("write failed: " + path.string());
}

inline DatasetSplit load_split(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_sensors = {}) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_split(is, expected_sensors, path.string());
}

}  // namespace sensordrop
