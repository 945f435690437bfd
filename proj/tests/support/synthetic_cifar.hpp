// SPDX-License-Identifier: Apache-2.0
#pragma once

// Writes miniature datasets in the standard CIFAR binary layout so loader
// and training tests run without the real downloads. Each class gets a
// fixed low-frequency color pattern plus pixel noise, which a small CNN can
// separate within a couple of epochs.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "ddc/rng.hpp"

namespace ddc::testsupport {

inline std::vector<std::uint8_t> make_image(int cls, std::mt19937_64& rng,
                                            std::uint64_t pattern_seed, double amplitude,
                                            double noise) {
  std::vector<std::uint8_t> img(3072);
  // class pattern: per channel, a 4x4 grid of plateau values
  std::mt19937_64 pattern_rng(mix_seed(pattern_seed, static_cast<std::uint64_t>(cls)));
  std::array<double, 48> plateau{};
  for (auto& p : plateau) p = 128.0 + amplitude * (uniform01(pattern_rng) - 0.5) * 2.0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        const double base = plateau[static_cast<size_t>(c * 16 + (y / 8) * 4 + (x / 8))];
        const double noisy = base + noise * normal01(rng);
        const double clamped = noisy < 0.0 ? 0.0 : (noisy > 255.0 ? 255.0 : noisy);
        img[static_cast<size_t>(c * 1024 + y * 32 + x)] = static_cast<std::uint8_t>(clamped);
      }
  return img;
}

/// CIFAR-10 layout: data_batch_{1..5}.bin + test_batch.bin, records of
/// 1 label byte + 3072 pixel bytes.
inline void write_synthetic_cifar10(const std::filesystem::path& root, int per_class_train,
                                    int per_class_test, std::uint64_t seed, int num_classes = 10,
                                    double amplitude = 90.0, double noise = 25.0) {
  namespace fs = std::filesystem;
  const fs::path dir = root / "cifar-10-batches-bin";
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);

  std::array<std::ofstream, 5> train_files;
  for (int i = 0; i < 5; ++i)
    train_files[static_cast<size_t>(i)].open(
        dir / ("data_batch_" + std::to_string(i + 1) + ".bin"), std::ios::binary);
  std::ofstream test_file(dir / "test_batch.bin", std::ios::binary);

  int train_counter = 0;
  for (int cls = 0; cls < num_classes; ++cls) {
    for (int i = 0; i < per_class_train; ++i) {
      auto img = make_image(cls, rng, seed, amplitude, noise);
      auto& out = train_files[static_cast<size_t>(train_counter++ % 5)];
      out.put(static_cast<char>(cls));
      out.write(reinterpret_cast<const char*>(img.data()), 3072);
    }
    for (int i = 0; i < per_class_test; ++i) {
      auto img = make_image(cls, rng, seed, amplitude, noise);
      test_file.put(static_cast<char>(cls));
      test_file.write(reinterpret_cast<const char*>(img.data()), 3072);
    }
  }
}

/// CIFAR-100 layout: train.bin / test.bin, records of coarse + fine label
/// bytes + 3072 pixel bytes.
inline void write_synthetic_cifar100(const std::filesystem::path& root, int per_class_train,
                                     int per_class_test, std::uint64_t seed,
                                     const std::vector<int>& fine_classes) {
  namespace fs = std::filesystem;
  const fs::path dir = root / "cifar-100-binary";
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);

  std::ofstream train_file(dir / "train.bin", std::ios::binary);
  std::ofstream test_file(dir / "test.bin", std::ios::binary);
  for (int cls : fine_classes) {
    for (int i = 0; i < per_class_train; ++i) {
      auto img = make_image(cls, rng, seed, 90.0, 25.0);
      train_file.put(static_cast<char>(cls / 5));  // placeholder coarse label
      train_file.put(static_cast<char>(cls));
      train_file.write(reinterpret_cast<const char*>(img.data()), 3072);
    }
    for (int i = 0; i < per_class_test; ++i) {
      auto img = make_image(cls, rng, seed, 90.0, 25.0);
      test_file.put(static_cast<char>(cls / 5));
      test_file.put(static_cast<char>(cls));
      test_file.write(reinterpret_cast<const char*>(img.data()), 3072);
    }
  }
}

}  // namespace ddc::testsupport
