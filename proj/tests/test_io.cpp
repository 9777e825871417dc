#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "drrho/error.hpp"
#include "drrho/io.hpp"

using namespace drrho;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path = fs::temp_directory_path() / "drrho_test_io";
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<unsigned char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

io::Container sample() {
  io::Container c;
  c.kind = io::Kind::model;
  Matrix a(2, 3);
  for (std::size_t k = 0; k < 6; ++k) a.data()[k] = 0.1 * static_cast<double>(k) - 0.25;
  c.arrays = {a, Matrix(1, 1, -std::numeric_limits<double>::infinity())};
  c.manifest = {{"note", "x"}};
  return c;
}

}  // namespace

TEST_CASE("fnv1a64 known values") {
  CHECK(io::fnv1a64({}) == 0xcbf29ce484222325ULL);
  const unsigned char a[] = {'a'};
  CHECK(io::fnv1a64(a) == 0xaf63dc4c8601ec8cULL);
  CHECK(io::to_hex(0xabcULL) == "0000000000000abc");
}

TEST_CASE("header layout is little-endian with magic and version") {
  const auto bytes = io::encode(sample());
  REQUIRE(bytes.size() == 6 + 2 + 2 + 4 + 2 * 16 + 7 * 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 6) == "DRRHO1");
  CHECK(bytes[6] == 1);
  CHECK(bytes[7] == 0);
  CHECK(bytes[8] == 3);
  CHECK(bytes[10] == 2);
}

TEST_CASE("container round trip and error kinds") {
  TempDir t;
  const auto p = t.path / "c.bin";
  const auto c = sample();
  io::write_container(p, c);
  CHECK(fs::exists(io::manifest_path(p)));
  const auto back = io::read_container(p, io::Kind::model);
  CHECK(back.arrays == c.arrays);
  CHECK(back.manifest["note"] == "x");

  const auto good = read_bytes(p);

  SUBCASE("wrong kind") { CHECK_THROWS_AS(io::read_container(p, io::Kind::dataset), FormatError); }
  SUBCASE("bad magic") {
    auto b = good;
    b[0] = 'X';
    write_bytes(p, b);
    CHECK_THROWS_AS(io::read_container(p, io::Kind::model), FormatError);
  }
  SUBCASE("version") {
    auto b = good;
    b[6] = 9;
    write_bytes(p, b);
    CHECK_THROWS_AS(io::read_container(p, io::Kind::model), VersionError);
  }
  SUBCASE("payload corruption") {
    auto b = good;
    b[b.size() - 20] ^= 0x01;
    write_bytes(p, b);
    CHECK_THROWS_AS(io::read_container(p, io::Kind::model), ChecksumError);
  }
  SUBCASE("truncation") {
    auto b = good;
    b.resize(b.size() - 3);
    write_bytes(p, b);
    CHECK_THROWS_AS(io::read_container(p, io::Kind::model), TruncatedError);
    b.resize(9);
    write_bytes(p, b);
    CHECK_THROWS_AS(io::read_container(p, io::Kind::model), TruncatedError);
  }
  SUBCASE("trailing bytes") {
    auto b = good;
    b.push_back(0);
    write_bytes(p, b);
    CHECK_THROWS_AS(io::read_container(p, io::Kind::model), FormatError);
  }
  SUBCASE("missing manifest") {
    fs::remove(io::manifest_path(p));
    CHECK_THROWS_AS(io::read_container(p, io::Kind::model), FormatError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(io::read_container(t.path / "nope", io::Kind::model), LoadError); }
}
