#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace leafnav {

// Raw IDX payloads, bytes untouched. Validation against a class count
// happens in make_dataset, not here.
struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
};

struct IdxLabels {
  std::vector<std::uint8_t> labels;
};

// IDX: big-endian 32-bit magic (0x00000803 images / 0x00000801 labels),
// big-endian 32-bit dimension sizes, then unsigned bytes.
IdxImages load_idx_images(const std::filesystem::path& path);
IdxLabels load_idx_labels(const std::filesystem::path& path);
void save_idx_images(const IdxImages& images, const std::filesystem::path& path);
void save_idx_labels(const IdxLabels& labels, const std::filesystem::path& path);

struct Dataset {
  int input_dim = 0;
  int num_classes = 0;
  std::vector<double> pixels;  // size() * input_dim, components in [0,1]
  std::vector<int> labels;     // in [0, num_classes)

  std::size_t size() const { return labels.size(); }
  std::span<const double> image(std::size_t i) const {
    return {pixels.data() + i * static_cast<std::size_t>(input_dim),
            static_cast<std::size_t>(input_dim)};
  }
  std::uint64_t fingerprint() const;
};

// Scales pixel bytes by 1/255 into [0,1].
Dataset make_dataset(const IdxImages& images, const IdxLabels& labels, int num_classes);

// Quantizes components to bytes (round(v*255)); with round-trip error <= 1/255.
IdxImages dataset_to_idx_images(const Dataset& data, std::uint32_t rows, std::uint32_t cols);
IdxLabels dataset_to_idx_labels(const Dataset& data);

// Hermetic fixture: class i centered at 0.5 + 0.3*e_i, isotropic Gaussian
// noise of the given spread, clipped to [0,1]. Deterministic in the seed.
Dataset synth_blobs(int num_classes, int per_class, int input_dim, double spread,
                    std::uint64_t seed);

}  // namespace leafnav
