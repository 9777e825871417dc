#include "drrho/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "drrho/error.hpp"

namespace drrho::io {
namespace {

constexpr std::size_t kFixedHeader = 6 + 2 + 2 + 4;

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<unsigned char>(u >> (8 * b)));
}

template <typename T>
T get_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) v |= static_cast<T>(static_cast<T>(p[b]) << (8 * b));
  return v;
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

std::filesystem::path manifest_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

std::vector<unsigned char> encode(const Container& c) {
  std::vector<unsigned char> out;
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint16_t>(out, kVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(c.kind));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.arrays.size()));
  for (const auto& m : c.arrays) {
    put_le<std::uint64_t>(out, m.rows());
    put_le<std::uint64_t>(out, m.cols());
  }
  for (const auto& m : c.arrays)
    for (double v : m.flat()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const auto bytes = encode(c);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("write failed for " + path.string());
  }
  nlohmann::json manifest = c.manifest;
  manifest["format"] = "DRRHO1";
  manifest["version"] = kVersion;
  manifest["kind"] = static_cast<int>(c.kind);
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& m : c.arrays) shapes.push_back({m.rows(), m.cols()});
  manifest["shapes"] = shapes;
  manifest["checksum"] = to_hex(fnv1a64(bytes));
  std::ofstream mout(manifest_path(path), std::ios::trunc);
  if (!mout) throw ConfigError("cannot write " + manifest_path(path).string());
  mout << manifest.dump(2) << '\n';
}

Container read_container(const std::filesystem::path& path, Kind expected) {
  const auto bytes = read_all(path);
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError(path.string() + ": missing DRRHO1 magic");
  if (bytes.size() < kFixedHeader) throw TruncatedError(path.string() + ": truncated header");
  const auto version = get_le<std::uint16_t>(bytes.data() + 6);
  if (version != kVersion)
    throw VersionError(path.string() + ": unsupported version " + std::to_string(version));
  Container c;
  c.kind = static_cast<Kind>(get_le<std::uint16_t>(bytes.data() + 8));
  if (c.kind != expected)
    throw FormatError(path.string() + ": unexpected container kind " +
                      std::to_string(static_cast<int>(c.kind)));
  const auto count = get_le<std::uint32_t>(bytes.data() + 10);
  std::size_t offset = kFixedHeader;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
  if (bytes.size() < offset + 16ULL * count) throw TruncatedError(path.string() + ": truncated header");
  std::uint64_t payload = 0;
  for (std::uint32_t a = 0; a < count; ++a, offset += 16) {
    const auto rows = get_le<std::uint64_t>(bytes.data() + offset);
    const auto cols = get_le<std::uint64_t>(bytes.data() + offset + 8);
    shapes.emplace_back(rows, cols);
    payload += rows * cols;
  }
  if (bytes.size() < offset + 8 * payload) throw TruncatedError(path.string() + ": truncated payload");
  if (bytes.size() > offset + 8 * payload) throw FormatError(path.string() + ": trailing bytes");

  std::ifstream min(manifest_path(path));
  if (!min) throw FormatError("missing manifest " + manifest_path(path).string());
  try {
    c.manifest = nlohmann::json::parse(min);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("unreadable manifest: " + std::string(e.what()));
  }
  if (!c.manifest.contains("checksum") || !c.manifest["checksum"].is_string())
    throw FormatError("manifest has no checksum");
  if (c.manifest["checksum"].get<std::string>() != to_hex(fnv1a64(bytes)))
    throw ChecksumError(path.string() + ": checksum mismatch");
  if (c.manifest.value("version", -1) != kVersion)
    throw VersionError("manifest version disagrees with file");

  for (const auto& [rows, cols] : shapes) {
    Matrix m(rows, cols);
    for (double& v : m.flat()) {
      v = std::bit_cast<double>(get_le<std::uint64_t>(bytes.data() + offset));
      offset += 8;
    }
    c.arrays.push_back(std::move(m));
  }
  return c;
}

}  // namespace drrho::io
