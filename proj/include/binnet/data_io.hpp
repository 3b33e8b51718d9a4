#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "binnet/tensor.hpp"

namespace binnet {

/// Labeled image set. Images are [N x C x H x W]; pixels are raw bytes
/// (0..255) until normalize() maps them to [-1, +1].
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::string split;
  bool normalized = false;

  std::int64_t count() const { return images.ndim() == 4 ? images.dim(0) : 0; }
};

/// Parses the big-endian IDX pair (image magic 0x00000803, label magic
/// 0x00000801) into an [N x 1 x H x W] dataset.
Dataset load_mnist(const std::string& images_path,
                   const std::string& labels_path,
                   const std::string& split = "train");

/// Parses concatenated CIFAR-10 binary batches (3073-byte records: one
/// label byte, then 32x32 R, G and B planes) into [N x 3 x 32 x 32].
Dataset load_cifar10(const std::vector<std::string>& batch_paths,
                     const std::string& split = "train");

/// Maps raw byte pixels to [-1, +1] via x / 127.5 - 1. Normalizing an
/// already-normalized dataset is a state error.
Dataset normalize(Dataset ds);

/// Copies the given sample rows into a batch tensor and target list.
void gather_batch(const Dataset& ds, const std::int64_t* indices,
                  std::int64_t count, Tensor& images, std::vector<int>& labels);

// ---- writers (fixtures, generated datasets) --------------------------------

void write_idx_images(const std::string& path,
                      const std::vector<std::uint8_t>& pixels, std::int64_t n,
                      std::int64_t h, std::int64_t w);
void write_idx_labels(const std::string& path,
                      const std::vector<std::uint8_t>& labels);
void write_cifar_batch(const std::string& path,
                       const std::vector<std::uint8_t>& pixels,
                       const std::vector<std::uint8_t>& labels);

/// Deterministic class-structured stand-in datasets, written in the real
/// wire formats. Each class is a smooth random prototype; samples shift it,
/// rescale it, add pixel noise and occasionally carry a wrong label, so the
/// task is learnable but not trivially separable.
void write_synthetic_mnist(const std::string& dir, std::int64_t train_count,
                           std::int64_t test_count, std::uint64_t seed);
void write_synthetic_cifar10(const std::string& dir, std::int64_t train_count,
                             std::int64_t test_count, std::uint64_t seed);

/// Standard file names used by the CLI dataset presets.
struct MnistPaths {
  std::string train_images, train_labels, test_images, test_labels;
};
MnistPaths mnist_paths(const std::string& dir);
std::vector<std::string> cifar10_train_paths(const std::string& dir);
std::string cifar10_test_path(const std::string& dir);

}  // namespace binnet
