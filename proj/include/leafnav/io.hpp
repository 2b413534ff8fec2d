#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace leafnav {

std::uint32_t crc32(std::span<const std::uint8_t> data, std::uint32_t seed = 0);
std::uint64_t fnv1a64_bytes(std::span<const std::uint8_t> data,
                            std::uint64_t seed = 0xcbf29ce484222325ULL);

// Little-endian scalar append/read for the binary formats (checkpoint,
// path sidecar, IDX uses big-endian and has its own helpers).
void append_u32le(std::vector<std::uint8_t>& buf, std::uint32_t v);
void append_u64le(std::vector<std::uint8_t>& buf, std::uint64_t v);
void append_f64le(std::vector<std::uint8_t>& buf, double v);
std::uint32_t read_u32le(std::span<const std::uint8_t> buf, std::size_t off);
std::uint64_t read_u64le(std::span<const std::uint8_t> buf, std::size_t off);
double read_f64le(std::span<const std::uint8_t> buf, std::size_t off);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// Writes to <path>.tmp then renames, so readers never see a partial file.
void atomic_write_bytes(const std::filesystem::path& path,
                        std::span<const std::uint8_t> data);
void atomic_write_text(const std::filesystem::path& path, const std::string& text);

// Shortest round-trippable decimal form (%.17g); keeps CSV output
// byte-deterministic on one machine.
std::string format_double(double v);

void write_pgm(const std::filesystem::path& path, int width, int height,
               std::span<const std::uint8_t> pixels);

std::uint64_t file_digest(const std::filesystem::path& path);

}  // namespace leafnav
