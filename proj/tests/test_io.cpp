#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "capvst/io.hpp"
#include "capvst/synthetic.hpp"
#include "helpers.hpp"

using namespace capvst;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "capvst_test_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

std::uint32_t read_u32(const std::vector<unsigned char>& b, std::size_t at) {
  return std::uint32_t(b[at]) | std::uint32_t(b[at + 1]) << 8 | std::uint32_t(b[at + 2]) << 16 |
         std::uint32_t(b[at + 3]) << 24;
}

NetworkWeights small_weights(std::uint64_t seed) {
  ArchitecturePlan p = default_plan();
  p.scale_blocks = {1, 2, 1};
  return init_weights(p, RngSeed{seed}, InitMode::kRandom);
}

}  // namespace

TEST_CASE("PPM round trip is exact on 8-bit levels") {
  Tensor img(3, 5, 7);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = float((i * 37) % 256) / 255.0f;
  const auto path = scratch("rgb.ppm").string();
  write_image(path, img);
  const Tensor back = read_image(path);
  REQUIRE(back.channels() == 3);
  CHECK(back.height() == 5);
  CHECK(back.width() == 7);
  CHECK(max_abs_diff(back, img) <= 1e-7f);
  const auto bytes = read_file(path);
  CHECK(bytes[0] == 'P');
  CHECK(bytes[1] == '6');
}

TEST_CASE("write_image clamps and rounds") {
  Tensor img(1, 1, 4, std::vector<float>{-0.5f, 1.7f, 0.5f, 0.1f});
  const auto path = scratch("gray.pgm").string();
  write_image(path, img);
  const Tensor back = read_image(path);
  CHECK(back.channels() == 1);
  CHECK(back(0, 0, 0) == 0.0f);
  CHECK(back(0, 0, 1) == 1.0f);
  CHECK(back(0, 0, 2) == doctest::Approx(128.0 / 255.0));
  CHECK(back(0, 0, 3) == doctest::Approx(26.0 / 255.0));
}

TEST_CASE("header comments are skipped") {
  const auto path = scratch("comment.pgm");
  write_text(path, std::string("P5\n# made by hand\n2 1\n# depth\n255\n") + char(10) + char(200));
  const Tensor t = read_image(path.string());
  CHECK(t(0, 0, 0) == doctest::Approx(10.0 / 255.0));
  CHECK(t(0, 0, 1) == doctest::Approx(200.0 / 255.0));
}

TEST_CASE("malformed images are rejected") {
  CHECK_THROWS_AS(read_image(scratch("missing.ppm").string()), IoError);
  const auto bad_magic = scratch("magic.ppm");
  write_text(bad_magic, "P3\n1 1\n255\n0 0 0\n");
  CHECK_THROWS_AS(read_image(bad_magic.string()), IoError);
  const auto truncated = scratch("short.ppm");
  write_text(truncated, "P6\n4 4\n255\nabc");
  CHECK_THROWS_AS(read_image(truncated.string()), IoError);
  const auto deep = scratch("deep.pgm");
  write_text(deep, "P5\n1 1\n65535\nab");
  CHECK_THROWS_AS(read_image(deep.string()), IoError);
}

TEST_CASE("mask round trip keeps raw labels") {
  RegionMask m(2, 3, {0, 1, 2, 255, 7, 7});
  const auto path = scratch("mask.pgm").string();
  write_mask(path, m);
  const RegionMask back = read_mask(path);
  CHECK(back.height == 2);
  CHECK(back.width == 3);
  CHECK(back.labels == m.labels);
  CHECK_THROWS_AS(write_mask(path, RegionMask(1, 1, {300})), Error);
}

TEST_CASE("flow round trip with and without a valid mask") {
  FlowField f(3, 4);
  for (std::size_t i = 0; i < f.u.size(); ++i) {
    f.u[i] = 0.25f * float(i) - 1.0f;
    f.v[i] = -0.5f * float(i);
  }
  const auto flo = scratch("f.flo").string();
  write_flow(flo, f);
  const auto bytes = read_file(flo);
  float tag;
  std::memcpy(&tag, bytes.data(), 4);
  CHECK(tag == 202021.25f);
  FlowField back = read_flow(flo);
  CHECK(back.u == f.u);
  CHECK(back.v == f.v);
  for (auto v : back.valid) CHECK(v == 1);

  RegionMask valid(3, 4, {255, 0, 255, 255, 0, 0, 255, 255, 255, 255, 255, 0});
  const auto vpath = scratch("valid.pgm").string();
  write_mask(vpath, valid);
  back = read_flow(flo, vpath);
  for (std::size_t i = 0; i < 12; ++i) CHECK(back.valid[i] == (valid.labels[i] == 255 ? 1 : 0));

  write_mask(vpath, RegionMask(3, 3, std::vector<int>(9, 255)));
  CHECK_THROWS_AS(read_flow(flo, vpath), Error);
  const auto bad = scratch("bad.flo");
  write_text(bad, "PIEH");
  CHECK_THROWS_AS(read_flow(bad.string()), IoError);
}

TEST_CASE("weights survive a bitwise round trip") {
  const NetworkWeights w = small_weights(3);
  const auto bytes = encode_weights(w);
  CHECK(std::memcmp(bytes.data(), "CAPW", 4) == 0);
  CHECK(read_u32(bytes, 4) == kWeightFileVersion);
  const NetworkWeights back = decode_weights(bytes);
  REQUIRE(back.blocks.size() == w.blocks.size());
  for (std::size_t b = 0; b < w.blocks.size(); ++b) {
    for (std::size_t k = 0; k < w.blocks[b].convs.size(); ++k) {
      CHECK(back.blocks[b].convs[k].weight == w.blocks[b].convs[k].weight);
      CHECK(back.blocks[b].convs[k].bias == w.blocks[b].convs[k].bias);
    }
  }
  CHECK(encode_weights(back) == bytes);
  CHECK(back.parameter_count() == w.parameter_count());

  const auto path = scratch("w.capw").string();
  save_weights(path, w);
  CHECK(read_file(path) == bytes);
  CHECK(encode_weights(load_weights(path)) == bytes);
}

TEST_CASE("payload size matches the parameter count") {
  const NetworkWeights w = small_weights(4);
  const auto bytes = encode_weights(w);
  const std::size_t header = read_u32(bytes, 8);
  CHECK(bytes.size() == 12 + header + 4 * w.parameter_count());
}

TEST_CASE("corrupted weight files are rejected") {
  const auto good = encode_weights(small_weights(5));
  const std::size_t header = read_u32(good, 8);

  auto truncated = good;
  truncated.resize(good.size() - 4);
  CHECK_THROWS_AS(decode_weights(truncated), IoError);

  auto padded = good;
  padded.push_back(0);
  CHECK_THROWS_AS(decode_weights(padded), IoError);

  auto magic = good;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_weights(magic), IoError);

  auto version = good;
  version[4] = 9;
  CHECK_THROWS_AS(decode_weights(version), IoError);

  auto json = good;
  json[12] = '[';
  CHECK_THROWS_AS(decode_weights(json), IoError);

  auto nan = good;
  const float q = std::nanf("");
  std::memcpy(nan.data() + 12 + header, &q, 4);
  CHECK_THROWS_AS(decode_weights(nan), IoError);

  CHECK_THROWS_AS(decode_weights({}), IoError);
  CHECK_THROWS_AS(load_weights(scratch("absent.capw").string()), IoError);
}

TEST_CASE("a tampered manifest is rejected") {
  const auto good = encode_weights(small_weights(6));
  const std::size_t header = read_u32(good, 8);
  std::string text(good.begin() + 12, good.begin() + 12 + std::ptrdiff_t(header));
  const auto at = text.find("block0.conv0.weight");
  REQUIRE(at != std::string::npos);
  text.replace(at, 6, "blockX");
  std::vector<unsigned char> bad(good.begin(), good.begin() + 12);
  bad.insert(bad.end(), text.begin(), text.end());
  bad.insert(bad.end(), good.begin() + 12 + std::ptrdiff_t(header), good.end());
  CHECK_THROWS_AS(decode_weights(bad), IoError);
}
