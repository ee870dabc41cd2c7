#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "alignkit/io.hpp"
#include "test_util.hpp"

using namespace alignkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("alignkit_io_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Vten, HeaderBytes) {
  std::ostringstream os;
  write_vten(os, Tensor({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6}));
  const std::string s = os.str();
  ASSERT_EQ(s.size(), 4u + 2u + 2u * 4u + 6u * 4u);
  EXPECT_EQ(s.substr(0, 4), "VTEN");
  EXPECT_EQ(static_cast<unsigned char>(s[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(s[5]), 2);
  EXPECT_EQ(static_cast<unsigned char>(s[6]), 2);
  EXPECT_EQ(static_cast<unsigned char>(s[7]), 0);
  EXPECT_EQ(static_cast<unsigned char>(s[10]), 3);
  float first = 0.0f;
  std::memcpy(&first, s.data() + 14, 4);
  EXPECT_EQ(first, 1.0f);
}

TEST(Vten, RoundTripIsBitExact) {
  std::mt19937 gen(1);
  for (const Shape& dims : {Shape{5}, Shape{3, 7, 9}, Shape{2, 3, 4, 5}}) {
    Tensor t = testutil::random_tensor(dims, gen);
    t[0] = -0.0f;
    t[1] = 1e-38f;
    std::stringstream ss;
    write_vten(ss, t);
    const Tensor back = read_vten(ss);
    EXPECT_EQ(back.dims(), t.dims());
    EXPECT_EQ(std::memcmp(back.raw(), t.raw(), t.size() * sizeof(float)), 0);
  }
  const fs::path p = scratch("file.vten");
  const Tensor t = testutil::random_tensor({3, 4, 4}, gen);
  save_vten(p, t);
  EXPECT_TRUE(load_vten(p) == t);
  fs::remove(p);
}

TEST(Vten, RejectsBadInput) {
  std::stringstream bad_magic("VTEX\x01\x01\x01\x00\x00\x00");
  EXPECT_THROW(read_vten(bad_magic), IoError);
  std::ostringstream os;
  write_vten(os, Tensor({4, 4}, 0.5f));
  std::string s = os.str();
  std::stringstream truncated(s.substr(0, s.size() - 3));
  EXPECT_THROW(read_vten(truncated), IoError);
  std::string v2 = s;
  v2[4] = 2;
  std::stringstream wrong_version(v2);
  EXPECT_THROW(read_vten(wrong_version), IoError);
  std::string zero = s;
  zero[6] = zero[7] = zero[8] = zero[9] = 0;
  std::stringstream zero_extent(zero);
  EXPECT_THROW(read_vten(zero_extent), IoError);
  std::stringstream empty;
  EXPECT_THROW(read_vten(empty), IoError);
  EXPECT_THROW(load_vten(scratch("missing.vten")), IoError);
}

TEST(Image, QuantizedRoundTripIsExact) {
  std::mt19937 gen(2);
  const Tensor rgb = quantize_8bit(testutil::random_tensor({3, 5, 7}, gen));
  const Tensor grey = quantize_8bit(testutil::random_tensor({1, 6, 4}, gen));
  const fs::path a = scratch("a.ppm"), b = scratch("b.pgm");
  save_image(a, rgb);
  save_image(b, grey);
  EXPECT_TRUE(load_image(a) == rgb);
  EXPECT_TRUE(load_image(b) == grey);
  std::ifstream is(a, std::ios::binary);
  std::string magic(2, '\0');
  is.read(magic.data(), 2);
  EXPECT_EQ(magic, "P6");
  fs::remove(a);
  fs::remove(b);
}

TEST(Image, ClampsAndRounds) {
  const Tensor t({1, 1, 4}, std::vector<float>{-0.5f, 1.5f, 0.5f, 0.1f});
  const Tensor q = quantize_8bit(t);
  EXPECT_EQ(q[0], 0.0f);
  EXPECT_EQ(q[1], 1.0f);
  EXPECT_EQ(q[2], 128.0f / 255.0f);
  EXPECT_EQ(q[3], 26.0f / 255.0f);
  const fs::path p = scratch("c.pgm");
  save_image(p, t);
  EXPECT_TRUE(load_image(p) == q);
  fs::remove(p);
}

TEST(Image, Errors) {
  EXPECT_THROW(save_image(scratch("x.ppm"), Tensor({2, 4, 4})), ShapeError);
  const fs::path p = scratch("junk.ppm");
  std::ofstream(p) << "P3\n2 2\n255\n";
  EXPECT_THROW(load_image(p), IoError);
  std::ofstream(p, std::ios::binary) << "P6\n4 4\n255\n" << std::string(10, 'x');
  EXPECT_THROW(load_image(p), IoError);
  fs::remove(p);
}

TEST(Archive, RoundTrip) {
  std::mt19937 gen(3);
  TensorArchive ar;
  ar.put("conv.weight", testutil::random_tensor({4, 3, 3, 3}, gen));
  ar.put("conv.bias", testutil::random_tensor({4}, gen));
  ar.put("meta", Tensor({8}, 2.0f));
  const fs::path dir = scratch("archive");
  ar.save(dir);
  EXPECT_TRUE(fs::exists(dir / "index.json"));
  EXPECT_TRUE(fs::exists(dir / "tensors.vten"));
  const TensorArchive back = TensorArchive::load(dir);
  EXPECT_EQ(back.size(), 3u);
  for (const auto& [name, t] : ar.entries()) EXPECT_TRUE(back.get(name) == t) << name;
  EXPECT_THROW(back.get("nope"), CorruptDataset);
  fs::remove_all(dir);
}

TEST(Archive, CorruptionIsDetected) {
  TensorArchive ar;
  ar.put("a", Tensor({2, 2}, 1.0f));
  const fs::path dir = scratch("corrupt");
  ar.save(dir);
  fs::resize_file(dir / "tensors.vten", 10);
  EXPECT_THROW(TensorArchive::load(dir), CorruptDataset);
  ar.save(dir);
  std::ofstream(dir / "index.json") << "[]garbage";
  EXPECT_THROW(TensorArchive::load(dir), CorruptDataset);
  fs::remove(dir / "index.json");
  EXPECT_THROW(TensorArchive::load(dir), CorruptDataset);
  fs::remove_all(dir);
}
