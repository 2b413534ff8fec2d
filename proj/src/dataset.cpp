#include "leafnav/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

#include "leafnav/io.hpp"
#include "leafnav/rng.hpp"

namespace leafnav {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803u;
constexpr std::uint32_t kLabelMagic = 0x00000801u;

std::uint32_t read_u32be(std::span<const std::uint8_t> buf, std::size_t off) {
  return (std::uint32_t(buf[off]) << 24) | (std::uint32_t(buf[off + 1]) << 16) |
         (std::uint32_t(buf[off + 2]) << 8) | std::uint32_t(buf[off + 3]);
}

void append_u32be(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.push_back(static_cast<std::uint8_t>(v >> 24));
  buf.push_back(static_cast<std::uint8_t>(v >> 16));
  buf.push_back(static_cast<std::uint8_t>(v >> 8));
  buf.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxImages load_idx_images(const std::filesystem::path& path) {
  const auto buf = read_file_bytes(path);
  if (buf.size() < 16) throw std::runtime_error("truncated IDX image file: " + path.string());
  const std::uint32_t magic = read_u32be(buf, 0);
  if (magic != kImageMagic)
    throw std::runtime_error("wrong magic for image file (got 0x" +
                             std::to_string(magic) + "): " + path.string());
  IdxImages out;
  out.count = read_u32be(buf, 4);
  out.rows = read_u32be(buf, 8);
  out.cols = read_u32be(buf, 12);
  const std::uint64_t per_image = std::uint64_t(out.rows) * out.cols;
  if (per_image != 0 &&
      std::uint64_t(out.count) > (std::numeric_limits<std::uint64_t>::max() - 16) / per_image)
    throw std::runtime_error("IDX image dimension overflow: " + path.string());
  const std::uint64_t body = std::uint64_t(out.count) * per_image;
  if (buf.size() < 16 + body)
    throw std::runtime_error("truncated IDX image file: " + path.string());
  out.pixels.assign(buf.begin() + 16, buf.begin() + 16 + static_cast<std::ptrdiff_t>(body));
  return out;
}

IdxLabels load_idx_labels(const std::filesystem::path& path) {
  const auto buf = read_file_bytes(path);
  if (buf.size() < 8) throw std::runtime_error("truncated IDX label file: " + path.string());
  const std::uint32_t magic = read_u32be(buf, 0);
  if (magic != kLabelMagic)
    throw std::runtime_error("wrong magic for label file (got 0x" +
                             std::to_string(magic) + "): " + path.string());
  const std::uint32_t count = read_u32be(buf, 4);
  if (buf.size() < 8 + std::uint64_t(count))
    throw std::runtime_error("truncated IDX label file: " + path.string());
  IdxLabels out;
  out.labels.assign(buf.begin() + 8, buf.begin() + 8 + static_cast<std::ptrdiff_t>(count));
  return out;
}

void save_idx_images(const IdxImages& images, const std::filesystem::path& path) {
  const std::size_t body = std::size_t(images.count) * images.rows * images.cols;
  if (images.pixels.size() != body)
    throw std::runtime_error("IDX image payload does not match header dimensions");
  std::vector<std::uint8_t> buf;
  buf.reserve(16 + body);
  append_u32be(buf, kImageMagic);
  append_u32be(buf, images.count);
  append_u32be(buf, images.rows);
  append_u32be(buf, images.cols);
  buf.insert(buf.end(), images.pixels.begin(), images.pixels.end());
  atomic_write_bytes(path, buf);
}

void save_idx_labels(const IdxLabels& labels, const std::filesystem::path& path) {
  std::vector<std::uint8_t> buf;
  buf.reserve(8 + labels.labels.size());
  append_u32be(buf, kLabelMagic);
  append_u32be(buf, static_cast<std::uint32_t>(labels.labels.size()));
  buf.insert(buf.end(), labels.labels.begin(), labels.labels.end());
  atomic_write_bytes(path, buf);
}

std::uint64_t Dataset::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* pix = reinterpret_cast<const std::uint8_t*>(pixels.data());
  h = fnv1a64_bytes({pix, pixels.size() * sizeof(double)}, h);
  const auto* lab = reinterpret_cast<const std::uint8_t*>(labels.data());
  h = fnv1a64_bytes({lab, labels.size() * sizeof(int)}, h);
  h = fnv1a64_bytes({reinterpret_cast<const std::uint8_t*>(&input_dim), sizeof(int)}, h);
  h = fnv1a64_bytes({reinterpret_cast<const std::uint8_t*>(&num_classes), sizeof(int)}, h);
  return h;
}

Dataset make_dataset(const IdxImages& images, const IdxLabels& labels, int num_classes) {
  if (num_classes < 1) throw std::runtime_error("make_dataset: class count must be >= 1");
  if (std::size_t(images.count) != labels.labels.size())
    throw std::runtime_error("make_dataset: image/label count mismatch (" +
                             std::to_string(images.count) + " vs " +
                             std::to_string(labels.labels.size()) + ")");
  Dataset out;
  out.input_dim = static_cast<int>(images.rows * images.cols);
  out.num_classes = num_classes;
  out.pixels.resize(images.pixels.size());
  for (std::size_t i = 0; i < images.pixels.size(); ++i)
    out.pixels[i] = images.pixels[i] / 255.0;
  out.labels.reserve(labels.labels.size());
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const int y = labels.labels[i];
    if (y >= num_classes)
      throw std::runtime_error("make_dataset: label " + std::to_string(y) +
                               " out of range [0," + std::to_string(num_classes) +
                               ") at index " + std::to_string(i));
    out.labels.push_back(y);
  }
  return out;
}

IdxImages dataset_to_idx_images(const Dataset& data, std::uint32_t rows, std::uint32_t cols) {
  if (std::size_t(rows) * cols != std::size_t(data.input_dim))
    throw std::runtime_error("dataset_to_idx_images: rows*cols != input_dim");
  IdxImages out;
  out.count = static_cast<std::uint32_t>(data.size());
  out.rows = rows;
  out.cols = cols;
  out.pixels.resize(data.pixels.size());
  for (std::size_t i = 0; i < data.pixels.size(); ++i) {
    const double v = std::clamp(data.pixels[i], 0.0, 1.0);
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

IdxLabels dataset_to_idx_labels(const Dataset& data) {
  IdxLabels out;
  out.labels.reserve(data.size());
  for (int y : data.labels) out.labels.push_back(static_cast<std::uint8_t>(y));
  return out;
}

Dataset synth_blobs(int num_classes, int per_class, int input_dim, double spread,
                    std::uint64_t seed) {
  if (num_classes < 1 || per_class < 1 || input_dim < 1)
    throw std::runtime_error("synth_blobs: class count, per_class and dimension must be >= 1");
  if (num_classes > input_dim)
    throw std::runtime_error("synth_blobs: more classes than input dimensions (" +
                             std::to_string(num_classes) + " > " + std::to_string(input_dim) + ")");
  if (spread < 0.0) throw std::runtime_error("synth_blobs: spread must be >= 0");

  Dataset out;
  out.input_dim = input_dim;
  out.num_classes = num_classes;
  out.pixels.reserve(std::size_t(num_classes) * per_class * input_dim);
  out.labels.reserve(std::size_t(num_classes) * per_class);

  Rng rng = Rng::stream(seed, "synth_blobs");
  for (int c = 0; c < num_classes; ++c) {
    for (int k = 0; k < per_class; ++k) {
      for (int j = 0; j < input_dim; ++j) {
        const double mean = (j == c) ? 0.8 : 0.5;
        const double v = mean + spread * rng.next_gaussian();
        out.pixels.push_back(std::clamp(v, 0.0, 1.0));
      }
      out.labels.push_back(c);
    }
  }
  return out;
}

}  // namespace leafnav
