#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "getnet/errors.hpp"
#include "getnet/hsicube.hpp"
#include "getnet/random.hpp"
#include "scratch.hpp"

using namespace getnet;
using testing_support::ScratchDir;
using testing_support::write_bytes;
using testing_support::write_text;

namespace {

std::string header(std::size_t samples, std::size_t lines, std::size_t bands, const std::string& interleave,
                   int data_type = 4, int byte_order = 0) {
  return "ENVI\nsamples = " + std::to_string(samples) + "\nlines = " + std::to_string(lines) +
         "\nbands = " + std::to_string(bands) + "\nheader offset = 0\nfile type = ENVI Standard\ndata type = " +
         std::to_string(data_type) + "\ninterleave = " + interleave + "\nbyte order = " + std::to_string(byte_order) +
         "\n";
}

std::vector<unsigned char> float_bytes(const std::vector<float>& values, bool big_endian = false) {
  std::vector<unsigned char> out;
  for (float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int j = 0; j < 4; ++j) {
      const int shift = big_endian ? 8 * (3 - j) : 8 * j;
      out.push_back(static_cast<unsigned char>(bits >> shift));
    }
  }
  return out;
}

HyperCube random_cube(std::size_t h, std::size_t w, std::size_t b, std::uint64_t seed) {
  Rng rng(seed);
  HyperCube c(h, w, b);
  for (float& v : c.data) v = static_cast<float>(uniform(rng, -2.0, 2.0));
  return c;
}

bool same_bits(const HyperCube& a, const HyperCube& b) {
  return a.height == b.height && a.width == b.width && a.bands == b.bands &&
         a.data.size() == b.data.size() &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0 &&
         a.wavelengths == b.wavelengths;
}

}  // namespace

TEST(ReadEnvi, BsqLayoutIdentity) {
  ScratchDir dir;
  std::vector<float> words(12);
  for (std::size_t i = 0; i < words.size(); ++i) words[i] = static_cast<float>(i);
  write_text(dir / "c.hdr", header(2, 2, 3, "bsq"));
  write_bytes(dir / "c.img", float_bytes(words));
  const HyperCube c = read_envi(dir / "c.hdr");
  ASSERT_EQ(c.height, 2u);
  ASSERT_EQ(c.width, 2u);
  ASSERT_EQ(c.bands, 3u);
  // band 2, row 1, col 0 -> word 2*4 + 1*2 + 0
  EXPECT_EQ(c.at(1, 0, 2), 10.0f);
  for (std::size_t k = 0; k < 12; ++k) EXPECT_EQ(c.data[k], words[k]);
}

TEST(ReadEnvi, BipAndBilCanonicalise) {
  ScratchDir dir;
  const HyperCube ref = random_cube(3, 4, 5, 7);
  std::vector<float> bip, bil;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t k = 0; k < 5; ++k) bip.push_back(ref.at(r, c, k));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t k = 0; k < 5; ++k)
      for (std::size_t c = 0; c < 4; ++c) bil.push_back(ref.at(r, c, k));
  write_text(dir / "p.hdr", header(4, 3, 5, "bip"));
  write_bytes(dir / "p.img", float_bytes(bip));
  write_bytes(dir / "l.img", float_bytes(bil, true));
  write_text(dir / "l.hdr", header(4, 3, 5, "bil", 4, 1));
  EXPECT_TRUE(same_bits(read_envi(dir / "p.hdr"), ref));
  EXPECT_TRUE(same_bits(read_envi(dir / "l.hdr"), ref));
}

TEST(ReadEnvi, IntegerTypesConvertWithoutScaling) {
  ScratchDir dir;
  write_text(dir / "u.hdr", header(2, 1, 1, "bsq", 12));
  write_bytes(dir / "u.img", {0x10, 0x27, 0xff, 0xff});  // 10000, 65535
  const HyperCube u = read_envi(dir / "u.hdr");
  EXPECT_EQ(u.data[0], 10000.0f);
  EXPECT_EQ(u.data[1], 65535.0f);

  write_text(dir / "s.hdr", header(2, 1, 1, "bsq", 2, 1));
  write_bytes(dir / "s.img", {0xff, 0xfe, 0x00, 0x05});  // big-endian -2, 5
  const HyperCube s = read_envi(dir / "s.hdr");
  EXPECT_EQ(s.data[0], -2.0f);
  EXPECT_EQ(s.data[1], 5.0f);
}

TEST(ReadEnvi, Errors) {
  ScratchDir dir;
  write_text(dir / "a.hdr", "ENVI\nsamples = 2\nlines = 2\ninterleave = bsq\ndata type = 4\nbyte order = 0\n");
  write_bytes(dir / "a.img", float_bytes(std::vector<float>(4)));
  try {
    read_envi(dir / "a.hdr");
    FAIL() << "missing field accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bands"), std::string::npos);
  }

  write_text(dir / "b.hdr", header(2, 2, 1, "bsq"));
  write_bytes(dir / "b.img", float_bytes(std::vector<float>(3)));
  try {
    read_envi(dir / "b.hdr");
    FAIL() << "short raw file accepted";
  } catch (const SizeError& e) {
    EXPECT_EQ(e.expected(), 16u);
    EXPECT_EQ(e.actual(), 12u);
  }

  write_text(dir / "c.hdr", header(2, 1, 1, "bsq"));
  write_bytes(dir / "c.img", float_bytes({1.0f, std::numeric_limits<float>::quiet_NaN()}));
  try {
    read_envi(dir / "c.hdr");
    FAIL() << "NaN accepted";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
  }

  write_text(dir / "d.hdr", header(1, 1, 1, "bsq", 5));
  write_bytes(dir / "d.img", std::vector<unsigned char>(8));
  EXPECT_THROW(read_envi(dir / "d.hdr"), FormatError);
}

TEST(WriteEnvi, SingleValueBytes) {
  ScratchDir dir;
  HyperCube c(1, 1, 1);
  c.data[0] = 0.5f;
  write_envi(c, dir / "one");
  EXPECT_EQ(testing_support::read_bytes(dir / "one.img"), (std::vector<unsigned char>{0x00, 0x00, 0x00, 0x3f}));
}

TEST(WriteEnvi, RoundTripIsBitIdentical) {
  ScratchDir dir;
  HyperCube c = random_cube(5, 7, 3, 11);
  c.wavelengths = {450.5, 550.25, 650.125};
  write_envi(c, dir / "rt.hdr");
  const HyperCube back = read_envi(dir / "rt.hdr");
  EXPECT_TRUE(same_bits(c, back));
  // one more cycle is a fixed point
  write_envi(back, dir / "rt2");
  EXPECT_TRUE(same_bits(back, read_envi(dir / "rt2.hdr")));
}

TEST(WriteEnvi, RejectsInvalidCube) {
  ScratchDir dir;
  HyperCube c(2, 2, 2);
  c.data.pop_back();
  EXPECT_THROW(write_envi(c, dir / "bad"), ShapeError);
}

TEST(Map, ReadThresholdAndRoundTrip) {
  ScratchDir dir;
  write_text(dir / "m.pgm", std::string("P5\n2 1\n255\n") + char(255) + char(0));
  const BinaryMap m = read_map(dir / "m.pgm");
  EXPECT_EQ(m.labels, (std::vector<std::uint8_t>{1, 0}));

  write_text(dir / "t.pgm", std::string("P5\n# comment\n2 1\n255\n") + char(127) + char(128));
  EXPECT_EQ(read_map(dir / "t.pgm").labels, (std::vector<std::uint8_t>{0, 1}));

  BinaryMap map(3, 4);
  for (std::size_t i = 0; i < map.labels.size(); ++i) map.labels[i] = (i * 7) % 3 == 0;
  write_map(map, dir / "rt.pgm");
  const BinaryMap back = read_map(dir / "rt.pgm", std::pair<std::size_t, std::size_t>{3, 4});
  EXPECT_EQ(back.labels, map.labels);
  EXPECT_THROW(read_map(dir / "rt.pgm", std::pair<std::size_t, std::size_t>{4, 3}), ShapeError);

  write_text(dir / "p2.pgm", "P2\n1 1\n255\n0\n");
  EXPECT_THROW(read_map(dir / "p2.pgm"), FormatError);
}

TEST(NormalizePair, JointScaling) {
  CubePair pair{HyperCube(1, 2, 1), HyperCube(1, 2, 1)};
  pair.time1.data = {4000.0f, -1000.0f};
  pair.time2.data = {2000.0f, 500.0f};
  const CubePair n = normalize_pair(pair);
  EXPECT_EQ(n.time1.data, (std::vector<float>{1.0f, -0.25f}));
  EXPECT_EQ(n.time2.data, (std::vector<float>{0.5f, 0.125f}));
  EXPECT_FLOAT_EQ(n.time1.data[0] / n.time2.data[1], pair.time1.data[0] / pair.time2.data[1]);

  CubePair zero{HyperCube(2, 2, 2), HyperCube(2, 2, 2)};
  EXPECT_EQ(normalize_pair(zero).time1.data, zero.time1.data);
}

TEST(NormalizePair, Idempotent) {
  CubePair pair{random_cube(4, 4, 3, 1), random_cube(4, 4, 3, 2)};
  for (float& v : pair.time2.data) v *= 1000.0f;
  const CubePair once = normalize_pair(pair);
  const CubePair twice = normalize_pair(once);
  EXPECT_TRUE(same_bits(once.time1, twice.time1));
  EXPECT_TRUE(same_bits(once.time2, twice.time2));
}

TEST(NormalizePair, RejectsMismatchedPair) {
  CubePair pair{HyperCube(2, 2, 2), HyperCube(2, 2, 3)};
  EXPECT_THROW(normalize_pair(pair), ShapeError);
}

TEST(SelectBands, IdentitySubsetAndOrdering) {
  HyperCube c = random_cube(2, 3, 3, 5);
  c.wavelengths = {400, 500, 600};
  const std::vector<std::size_t> all{0, 1, 2};
  EXPECT_TRUE(same_bits(select_bands(c, all), c));

  const std::vector<std::size_t> keep{0, 2};
  const HyperCube s = select_bands(c, keep);
  ASSERT_EQ(s.bands, 2u);
  EXPECT_EQ(s.wavelengths, (std::vector<double>{400, 600}));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t col = 0; col < 3; ++col) {
      EXPECT_EQ(s.at(r, col, 0), c.at(r, col, 0));
      EXPECT_EQ(s.at(r, col, 1), c.at(r, col, 2));
    }

  const std::vector<std::size_t> reversed{2, 1};
  EXPECT_THROW(select_bands(c, reversed), ConfigError);
  const std::vector<std::size_t> out_of_range{0, 3};
  EXPECT_THROW(select_bands(c, out_of_range), ConfigError);
}

TEST(SelectBands, Composition) {
  const HyperCube c = random_cube(3, 3, 8, 9);
  const std::vector<std::size_t> a{1, 2, 4, 6, 7};
  const std::vector<std::size_t> b{0, 2, 4};
  std::vector<std::size_t> ab;
  for (std::size_t i : b) ab.push_back(a[i]);
  EXPECT_TRUE(same_bits(select_bands(select_bands(c, a), b), select_bands(c, ab)));
}
