#include "binnet/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "binnet/common.hpp"
#include "binnet/rng.hpp"

namespace binnet {
namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()),
                           static_cast<std::streamsize>(size)))
    throw IoError("cannot read " + path);
  return bytes;
}

void write_file(const std::string& path, const std::uint8_t* bytes,
                std::size_t len) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes), static_cast<std::streamsize>(len));
  if (!out) throw IoError("short write to " + path);
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes,
                        std::size_t offset, const std::string& path) {
  if (offset + 4 > bytes.size())
    throw FormatError(path + ": truncated file at byte " +
                      std::to_string(bytes.size()) + ", expected a 32-bit " +
                      "field at byte " + std::to_string(offset));
  return (std::uint32_t(bytes[offset]) << 24) |
         (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) |
         std::uint32_t(bytes[offset + 3]);
}

void check_magic(const std::vector<std::uint8_t>& bytes,
                 const std::uint8_t expected[4], const std::string& path,
                 const char* what) {
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= bytes.size())
      throw FormatError(path + ": truncated " + what + " magic at byte " +
                        std::to_string(i));
    if (bytes[i] != expected[i]) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "%s: bad %s magic at byte %zu (0x%02x, expected 0x%02x)",
                    path.c_str(), what, i, bytes[i], expected[i]);
      throw FormatError(buf);
    }
  }
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

constexpr std::uint8_t kImageMagic[4] = {0x00, 0x00, 0x08, 0x03};
constexpr std::uint8_t kLabelMagic[4] = {0x00, 0x00, 0x08, 0x01};

}  // namespace

Dataset load_mnist(const std::string& images_path,
                   const std::string& labels_path, const std::string& split) {
  const auto img_bytes = read_file(images_path);
  check_magic(img_bytes, kImageMagic, images_path, "image");
  const std::int64_t n = read_be32(img_bytes, 4, images_path);
  const std::int64_t h = read_be32(img_bytes, 8, images_path);
  const std::int64_t w = read_be32(img_bytes, 12, images_path);
  if (n < 1 || h < 1 || w < 1)
    throw FormatError(images_path + ": non-positive extents in header");
  const std::size_t expected = 16 + static_cast<std::size_t>(n * h * w);
  if (img_bytes.size() != expected)
    throw FormatError(images_path + ": file holds " +
                      std::to_string(img_bytes.size()) + " bytes, header " +
                      "promises " + std::to_string(expected) +
                      " (mismatch from byte 16)");

  const auto lbl_bytes = read_file(labels_path);
  check_magic(lbl_bytes, kLabelMagic, labels_path, "label");
  const std::int64_t ln = read_be32(lbl_bytes, 4, labels_path);
  if (lbl_bytes.size() != 8 + static_cast<std::size_t>(ln))
    throw FormatError(labels_path + ": file holds " +
                      std::to_string(lbl_bytes.size()) + " bytes, header " +
                      "promises " + std::to_string(8 + ln));
  if (ln != n)
    throw FormatError(labels_path + ": " + std::to_string(ln) +
                      " labels for " + std::to_string(n) + " images");

  Dataset ds;
  ds.split = split;
  ds.images = Tensor({n, 1, h, w});
  float* dst = ds.images.data();
  const std::uint8_t* src = img_bytes.data() + 16;
  for (std::int64_t i = 0; i < n * h * w; ++i)
    dst[i] = static_cast<float>(src[i]);
  ds.labels.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const std::uint8_t v = lbl_bytes[static_cast<std::size_t>(8 + i)];
    if (v > 9)
      throw FormatError(labels_path + ": label " + std::to_string(int(v)) +
                        " out of range at byte " + std::to_string(8 + i));
    ds.labels[static_cast<std::size_t>(i)] = v;
  }
  return ds;
}

Dataset load_cifar10(const std::vector<std::string>& batch_paths,
                     const std::string& split) {
  constexpr std::int64_t kRecord = 3073;
  constexpr std::int64_t kPixels = 3072;
  if (batch_paths.empty()) throw DomainError("load_cifar10: no batch files");
  std::vector<std::vector<std::uint8_t>> batches;
  std::int64_t total = 0;
  for (const std::string& path : batch_paths) {
    auto bytes = read_file(path);
    if (bytes.empty() || bytes.size() % kRecord != 0)
      throw FormatError(path + ": file length " + std::to_string(bytes.size()) +
                        " is not a positive multiple of " +
                        std::to_string(kRecord));
    total += static_cast<std::int64_t>(bytes.size()) / kRecord;
    batches.push_back(std::move(bytes));
  }
  Dataset ds;
  ds.split = split;
  ds.images = Tensor({total, 3, 32, 32});
  ds.labels.resize(static_cast<std::size_t>(total));
  std::int64_t row = 0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& bytes = batches[b];
    const std::int64_t n = static_cast<std::int64_t>(bytes.size()) / kRecord;
    for (std::int64_t i = 0; i < n; ++i, ++row) {
      const std::uint8_t* rec = bytes.data() + i * kRecord;
      if (rec[0] > 9)
        throw FormatError(batch_paths[b] + ": label " +
                          std::to_string(int(rec[0])) + " out of range at " +
                          "byte " + std::to_string(i * kRecord));
      ds.labels[static_cast<std::size_t>(row)] = rec[0];
      float* dst = ds.images.data() + row * kPixels;
      for (std::int64_t p = 0; p < kPixels; ++p)
        dst[p] = static_cast<float>(rec[1 + p]);
    }
  }
  return ds;
}

Dataset normalize(Dataset ds) {
  if (ds.normalized)
    throw StateError("normalize: dataset '" + ds.split +
                     "' is already normalized");
  float* p = ds.images.data();
  for (std::int64_t i = 0; i < ds.images.numel(); ++i)
    p[i] = p[i] / 127.5f - 1.0f;
  ds.normalized = true;
  return ds;
}

void gather_batch(const Dataset& ds, const std::int64_t* indices,
                  std::int64_t count, Tensor& images,
                  std::vector<int>& labels) {
  const std::int64_t C = ds.images.dim(1), H = ds.images.dim(2),
                     W = ds.images.dim(3);
  const std::int64_t stride = C * H * W;
  if (images.ndim() != 4 || images.dim(0) != count ||
      images.numel() != count * stride)
    images = Tensor({count, C, H, W});
  labels.resize(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    const std::int64_t src = indices[i];
    std::memcpy(images.data() + i * stride, ds.images.data() + src * stride,
                static_cast<std::size_t>(stride) * sizeof(float));
    labels[static_cast<std::size_t>(i)] =
        ds.labels[static_cast<std::size_t>(src)];
  }
}

// ---- writers ----------------------------------------------------------------

void write_idx_images(const std::string& path,
                      const std::vector<std::uint8_t>& pixels, std::int64_t n,
                      std::int64_t h, std::int64_t w) {
  if (static_cast<std::int64_t>(pixels.size()) != n * h * w)
    throw DimensionError("write_idx_images: pixel count mismatch");
  std::vector<std::uint8_t> out;
  out.reserve(16 + pixels.size());
  out.insert(out.end(), kImageMagic, kImageMagic + 4);
  append_be32(out, static_cast<std::uint32_t>(n));
  append_be32(out, static_cast<std::uint32_t>(h));
  append_be32(out, static_cast<std::uint32_t>(w));
  out.insert(out.end(), pixels.begin(), pixels.end());
  write_file(path, out.data(), out.size());
}

void write_idx_labels(const std::string& path,
                      const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  out.insert(out.end(), kLabelMagic, kLabelMagic + 4);
  append_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  write_file(path, out.data(), out.size());
}

void write_cifar_batch(const std::string& path,
                       const std::vector<std::uint8_t>& pixels,
                       const std::vector<std::uint8_t>& labels) {
  constexpr std::size_t kPixels = 3072;
  if (pixels.size() != labels.size() * kPixels)
    throw DimensionError("write_cifar_batch: pixel count mismatch");
  std::vector<std::uint8_t> out;
  out.reserve(labels.size() * 3073);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.push_back(labels[i]);
    out.insert(out.end(), pixels.begin() + static_cast<std::ptrdiff_t>(i * kPixels),
               pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * kPixels));
  }
  write_file(path, out.data(), out.size());
}

// ---- synthetic datasets -----------------------------------------------------

namespace {

// Smooth random field: a coarse uniform grid upsampled bilinearly.
std::vector<float> smooth_prototype(Rng& rng, std::int64_t grid,
                                    std::int64_t size) {
  std::vector<float> coarse(static_cast<std::size_t>(grid * grid));
  for (float& v : coarse) v = rng.next_float();
  std::vector<float> out(static_cast<std::size_t>(size * size));
  const float step = static_cast<float>(grid - 1) / static_cast<float>(size - 1);
  for (std::int64_t y = 0; y < size; ++y) {
    const float fy = step * static_cast<float>(y);
    const std::int64_t y0 = std::min<std::int64_t>(grid - 2, static_cast<std::int64_t>(fy));
    const float ty = fy - static_cast<float>(y0);
    for (std::int64_t x = 0; x < size; ++x) {
      const float fx = step * static_cast<float>(x);
      const std::int64_t x0 = std::min<std::int64_t>(grid - 2, static_cast<std::int64_t>(fx));
      const float tx = fx - static_cast<float>(x0);
      const float a = coarse[static_cast<std::size_t>(y0 * grid + x0)];
      const float b = coarse[static_cast<std::size_t>(y0 * grid + x0 + 1)];
      const float c = coarse[static_cast<std::size_t>((y0 + 1) * grid + x0)];
      const float d = coarse[static_cast<std::size_t>((y0 + 1) * grid + x0 + 1)];
      out[static_cast<std::size_t>(y * size + x)] =
          (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
    }
  }
  return out;
}

std::uint8_t clamp_u8(float v) {
  if (v < 0.0f) return 0;
  if (v > 255.0f) return 255;
  return static_cast<std::uint8_t>(v + 0.5f);
}

struct SynthParams {
  std::int64_t size;
  std::int64_t channels;
  std::int64_t grid;
  int max_shift;
  float noise;
  float mislabel;
};

void generate_split(const SynthParams& p, std::int64_t count, Rng& rng,
                    const std::vector<std::vector<float>>& prototypes,
                    std::vector<std::uint8_t>& pixels,
                    std::vector<std::uint8_t>& labels) {
  const std::int64_t plane = p.size * p.size;
  pixels.resize(static_cast<std::size_t>(count * p.channels * plane));
  labels.resize(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    const int cls = static_cast<int>(rng.next_below(10));
    int reported = cls;
    if (rng.next_float() < p.mislabel)
      reported = static_cast<int>(rng.next_below(10));
    labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(reported);
    const int dy = static_cast<int>(rng.next_below(2 * p.max_shift + 1)) - p.max_shift;
    const int dx = static_cast<int>(rng.next_below(2 * p.max_shift + 1)) - p.max_shift;
    const float gain = 0.6f + 0.8f * rng.next_float();
    for (std::int64_t c = 0; c < p.channels; ++c) {
      const std::vector<float>& proto =
          prototypes[static_cast<std::size_t>(cls * p.channels + c)];
      std::uint8_t* dst =
          pixels.data() + (i * p.channels + c) * plane;
      for (std::int64_t y = 0; y < p.size; ++y) {
        for (std::int64_t x = 0; x < p.size; ++x) {
          const std::int64_t sy = y - dy, sx = x - dx;
          float v = 0.0f;
          if (sy >= 0 && sy < p.size && sx >= 0 && sx < p.size)
            v = proto[static_cast<std::size_t>(sy * p.size + sx)] * 220.0f;
          v = v * gain +
              p.noise * static_cast<float>(rng.next_normal());
          dst[y * p.size + x] = clamp_u8(v);
        }
      }
    }
  }
}

std::vector<std::vector<float>> make_prototypes(const SynthParams& p,
                                                Rng& rng) {
  std::vector<std::vector<float>> prototypes;
  prototypes.reserve(static_cast<std::size_t>(10 * p.channels));
  for (int cls = 0; cls < 10; ++cls)
    for (std::int64_t c = 0; c < p.channels; ++c)
      prototypes.push_back(smooth_prototype(rng, p.grid, p.size));
  return prototypes;
}

}  // namespace

void write_synthetic_mnist(const std::string& dir, std::int64_t train_count,
                           std::int64_t test_count, std::uint64_t seed) {
  const SynthParams p{28, 1, 7, 4, 52.0f, 0.01f};
  Rng rng = Rng::derive(seed, 0xDA7A);
  const auto prototypes = make_prototypes(p, rng);
  std::vector<std::uint8_t> pixels, labels;
  const MnistPaths paths = mnist_paths(dir);
  generate_split(p, train_count, rng, prototypes, pixels, labels);
  write_idx_images(paths.train_images, pixels, train_count, p.size, p.size);
  write_idx_labels(paths.train_labels, labels);
  generate_split(p, test_count, rng, prototypes, pixels, labels);
  write_idx_images(paths.test_images, pixels, test_count, p.size, p.size);
  write_idx_labels(paths.test_labels, labels);
}

void write_synthetic_cifar10(const std::string& dir, std::int64_t train_count,
                             std::int64_t test_count, std::uint64_t seed) {
  const SynthParams p{32, 3, 8, 5, 56.0f, 0.02f};
  Rng rng = Rng::derive(seed, 0xC1FA);
  const auto prototypes = make_prototypes(p, rng);
  std::vector<std::uint8_t> pixels, labels;
  const auto train_paths = cifar10_train_paths(dir);
  const std::int64_t per = (train_count + 4) / 5;
  std::int64_t written = 0;
  for (std::size_t b = 0; b < train_paths.size(); ++b) {
    const std::int64_t n =
        std::min<std::int64_t>(per, train_count - written);
    generate_split(p, n, rng, prototypes, pixels, labels);
    write_cifar_batch(train_paths[b], pixels, labels);
    written += n;
  }
  generate_split(p, test_count, rng, prototypes, pixels, labels);
  write_cifar_batch(cifar10_test_path(dir), pixels, labels);
}

MnistPaths mnist_paths(const std::string& dir) {
  return {dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte",
          dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte"};
}

std::vector<std::string> cifar10_train_paths(const std::string& dir) {
  std::vector<std::string> out;
  for (int i = 1; i <= 5; ++i)
    out.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
  return out;
}

std::string cifar10_test_path(const std::string& dir) {
  return dir + "/test_batch.bin";
}

}  // namespace binnet
