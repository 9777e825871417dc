#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "drrho/matrix.hpp"

namespace drrho::io {

/// Container layout, all integers little-endian:
///
///   "DRRHO1"            6 bytes magic
///   version             u16
///   kind                u16
///   array count         u32
///   per array: rows u64, cols u64
///   per array: rows*cols f64, row-major
///
/// A JSON manifest is written next to the file at `<path>.json`. It repeats
/// the array shapes and carries the FNV-1a 64 checksum of the binary file.
inline constexpr char kMagic[6] = {'D', 'R', 'R', 'H', 'O', '1'};
inline constexpr std::uint16_t kVersion = 1;

enum class Kind : std::uint16_t {
  dataset = 1,
  embedding_cache = 2,
  model = 3,
  trainer_checkpoint = 4,
};

struct Container {
  Kind kind = Kind::dataset;
  std::vector<Matrix> arrays;
  nlohmann::json manifest;
};

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::string to_hex(std::uint64_t v);

std::filesystem::path manifest_path(const std::filesystem::path& path);

/// Writes the binary file and its manifest. `manifest` is extended with
/// version, kind, shapes and checksum before it is written.
void write_container(const std::filesystem::path& path, const Container& c);

/// Reads and validates a container. Throws FormatError, VersionError,
/// TruncatedError or ChecksumError.
Container read_container(const std::filesystem::path& path, Kind expected);

/// Serialize a container to bytes (no manifest).
std::vector<unsigned char> encode(const Container& c);

}  // namespace drrho::io
