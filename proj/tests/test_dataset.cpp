#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <vector>

#include "leafnav/dataset.hpp"
#include "leafnav/io.hpp"
#include "leafnav/rng.hpp"

using namespace leafnav;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "leafnav_dataset_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

void append_u32be(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.push_back(v >> 24);
  buf.push_back(v >> 16);
  buf.push_back(v >> 8);
  buf.push_back(v);
}

fs::path write_bytes(const std::string& name, const std::vector<std::uint8_t>& bytes) {
  fs::path p = temp_dir() / name;
  atomic_write_bytes(p, bytes);
  return p;
}

}  // namespace

TEST_CASE("idx images: empty count with 28x28 header") {
  std::vector<std::uint8_t> bytes;
  append_u32be(bytes, 0x00000803u);
  append_u32be(bytes, 0);
  append_u32be(bytes, 28);
  append_u32be(bytes, 28);
  const IdxImages imgs = load_idx_images(write_bytes("empty.idx", bytes));
  CHECK(imgs.count == 0);
  CHECK(imgs.rows * imgs.cols == 784);
  CHECK(imgs.pixels.empty());
}

TEST_CASE("idx images: label magic rejected") {
  std::vector<std::uint8_t> bytes;
  append_u32be(bytes, 0x00000801u);
  append_u32be(bytes, 0);
  append_u32be(bytes, 28);
  append_u32be(bytes, 28);
  CHECK_THROWS_WITH_AS(load_idx_images(write_bytes("labelmagic.idx", bytes)),
                       doctest::Contains("wrong magic for image file"), std::runtime_error);
}

TEST_CASE("idx images: truncated body") {
  std::vector<std::uint8_t> bytes;
  append_u32be(bytes, 0x00000803u);
  append_u32be(bytes, 2);
  append_u32be(bytes, 2);
  append_u32be(bytes, 2);
  bytes.insert(bytes.end(), {1, 2, 3});  // needs 8 pixel bytes
  CHECK_THROWS_WITH_AS(load_idx_images(write_bytes("short.idx", bytes)),
                       doctest::Contains("truncated"), std::runtime_error);
}

TEST_CASE("idx images: dimension overflow is its own error") {
  std::vector<std::uint8_t> bytes;
  append_u32be(bytes, 0x00000803u);
  append_u32be(bytes, 0xFFFFFFFFu);
  append_u32be(bytes, 0xFFFFFFFFu);
  append_u32be(bytes, 0xFFFFFFFFu);
  CHECK_THROWS_WITH_AS(load_idx_images(write_bytes("overflow.idx", bytes)),
                       doctest::Contains("overflow"), std::runtime_error);
}

TEST_CASE("idx labels: load and boundary validation") {
  std::vector<std::uint8_t> bytes;
  append_u32be(bytes, 0x00000801u);
  append_u32be(bytes, 3);
  bytes.insert(bytes.end(), {0, 7, 12});
  const IdxLabels labels = load_idx_labels(write_bytes("labels.idx", bytes));
  REQUIRE(labels.labels.size() == 3);
  CHECK(labels.labels[2] == 12);  // accepted here...

  std::vector<std::uint8_t> img_bytes;
  append_u32be(img_bytes, 0x00000803u);
  append_u32be(img_bytes, 3);
  append_u32be(img_bytes, 1);
  append_u32be(img_bytes, 2);
  img_bytes.insert(img_bytes.end(), {0, 255, 10, 20, 30, 40});
  const IdxImages imgs = load_idx_images(write_bytes("threeimgs.idx", img_bytes));
  // ...but rejected at Dataset construction when C = 10
  CHECK_THROWS_WITH_AS(make_dataset(imgs, labels, 10), doctest::Contains("out of range"),
                       std::runtime_error);
}

TEST_CASE("idx labels: empty count") {
  std::vector<std::uint8_t> bytes;
  append_u32be(bytes, 0x00000801u);
  append_u32be(bytes, 0);
  CHECK(load_idx_labels(write_bytes("nolabels.idx", bytes)).labels.empty());
}

TEST_CASE("make_dataset scales bytes into [0,1]") {
  IdxImages imgs;
  imgs.count = 2;
  imgs.rows = 1;
  imgs.cols = 2;
  imgs.pixels = {255, 0, 128, 64};
  IdxLabels labels;
  labels.labels = {1, 0};
  const Dataset data = make_dataset(imgs, labels, 2);
  CHECK(data.pixels[0] == 1.0);
  CHECK(data.pixels[1] == 0.0);
  CHECK(data.pixels[2] == doctest::Approx(128.0 / 255.0));
  CHECK(data.input_dim == 2);
  CHECK(data.size() == 2);

  labels.labels = {1, 0, 1};
  CHECK_THROWS_WITH_AS(make_dataset(imgs, labels, 2), doctest::Contains("count mismatch"),
                       std::runtime_error);
}

TEST_CASE("synth_blobs rejects C > n and negative spread") {
  CHECK_THROWS_AS(synth_blobs(3, 10, 2, 0.1, 0), std::runtime_error);
  CHECK_THROWS_AS(synth_blobs(2, 10, 4, -0.1, 0), std::runtime_error);
}

TEST_CASE("synth_blobs with zero spread sits exactly on the class means") {
  const Dataset data = synth_blobs(2, 1, 4, 0.0, 7);
  REQUIRE(data.size() == 2);
  CHECK(data.image(0)[0] == 0.8);
  CHECK(data.image(0)[1] == 0.5);
  CHECK(data.image(0)[2] == 0.5);
  CHECK(data.image(1)[0] == 0.5);
  CHECK(data.image(1)[1] == 0.8);
  CHECK(data.labels[0] == 0);
  CHECK(data.labels[1] == 1);
}

TEST_CASE("synth_blobs is bit-deterministic in the seed") {
  const Dataset a = synth_blobs(3, 100, 8, 0.05, 1);
  const Dataset b = synth_blobs(3, 100, 8, 0.05, 1);
  const Dataset c = synth_blobs(3, 100, 8, 0.05, 2);
  CHECK(a.size() == 300);
  CHECK(a.pixels == b.pixels);
  CHECK(a.labels == b.labels);
  CHECK(a.pixels != c.pixels);
  for (double v : a.pixels) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("IDX round trip: images within quantization, labels exact") {
  Rng rng(99);
  Dataset data;
  data.input_dim = 6;
  data.num_classes = 4;
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 6; ++j) data.pixels.push_back(rng.next_double());
    data.labels.push_back(static_cast<int>(rng.next_below(4)));
  }
  const fs::path img_path = temp_dir() / "roundtrip_img.idx";
  const fs::path lab_path = temp_dir() / "roundtrip_lab.idx";
  save_idx_images(dataset_to_idx_images(data, 2, 3), img_path);
  save_idx_labels(dataset_to_idx_labels(data), lab_path);

  const Dataset back = make_dataset(load_idx_images(img_path), load_idx_labels(lab_path), 4);
  REQUIRE(back.size() == data.size());
  CHECK(back.labels == data.labels);
  for (std::size_t i = 0; i < data.pixels.size(); ++i)
    CHECK(std::abs(back.pixels[i] - data.pixels[i]) <= 1.0 / 255.0);
}

TEST_CASE("official MNIST test files when provided") {
  const char* dir = std::getenv("LEAFNAV_MNIST_DIR");
  if (!dir || !*dir) return;  // hermetic by default
  const IdxImages imgs = load_idx_images(fs::path(dir) / "t10k-images-idx3-ubyte");
  const IdxLabels labels = load_idx_labels(fs::path(dir) / "t10k-labels-idx1-ubyte");
  CHECK(imgs.count == 10000);
  CHECK(imgs.rows * imgs.cols == 784);
  CHECK(labels.labels.size() == 10000);
  for (auto y : labels.labels) CHECK(y < 10);
}
