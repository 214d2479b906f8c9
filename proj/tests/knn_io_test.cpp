#include <gtest/gtest.h>

#include <cstring>

#include "support.hpp"
#include "typr/errors.hpp"
#include "typr/image.hpp"
#include "typr/knn.hpp"

using namespace typr;

namespace {

KnnIndex fixture() {
  KnnIndex::Matrix m(3, 3);
  m << 1, 0, 0.6f,  //
      0, 1, 0.8f,   //
      0, 0, 0;
  return build_index({1, 2, 3}, m, "ref-image");
}

template <typename T>
T read_le(const std::vector<std::uint8_t>& b, std::size_t at) {
  T v{};
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(b[at + i]) << (8 * i));
  return v;
}

std::size_t offset_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "no FormatError";
  return 0;
}

}  // namespace

TEST(Store, LayoutIsLittleEndianPerSpecifiedHeader) {
  const auto bytes = serialize_index(fixture());
  ASSERT_GE(bytes.size(), 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "TYPF");
  EXPECT_EQ(read_le<std::uint16_t>(bytes, 4), 1u);
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 6), 3u);
  EXPECT_EQ(read_le<std::uint64_t>(bytes, 10), 3u);
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 18), 9u);
  EXPECT_EQ(std::string(bytes.begin() + 22, bytes.begin() + 31), "ref-image");
  const std::size_t header = 31;
  EXPECT_EQ(bytes.size(), header + 3 * (8 + 3 * 4));
  EXPECT_EQ(read_le<std::uint64_t>(bytes, header), 1u);
  const std::uint32_t bits = read_le<std::uint32_t>(bytes, header + 2 * 20 + 8);
  float f;
  std::memcpy(&f, &bits, 4);
  EXPECT_EQ(f, 0.6f);
}

TEST(Store, RoundTripIsBitExact) {
  typr::testing::TempDir dir("store");
  const KnnIndex original = fixture();
  save_index(original, dir / "a.typf");
  const KnnIndex loaded = load_index(dir / "a.typf");
  EXPECT_TRUE(loaded == original);
  EXPECT_EQ(serialize_index(loaded), serialize_index(original));
}

TEST(Store, RandomRoundTrip) {
  std::mt19937_64 rng(3);
  KnnIndex::Matrix m(64, 500);
  std::vector<std::uint64_t> ids;
  for (int i = 0; i < 500; ++i) {
    m.col(i) = typr::testing::random_unit(rng, 64);
    ids.push_back(rng());
  }
  const KnnIndex original = build_index(ids, m, "ünïcode model");
  EXPECT_TRUE(deserialize_index(serialize_index(original)) == original);
}

TEST(Store, EmptyFileIsBadMagic) {
  typr::testing::TempDir dir("store");
  write_file(dir / "empty.typf", {});
  try {
    load_index(dir / "empty.typf");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos) << e.what();
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(Store, WrongMagicAndVersion) {
  auto bytes = serialize_index(fixture());
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(offset_of([&] { deserialize_index(bad); }), 0u);
  bad = bytes;
  bad[4] = 2;
  EXPECT_EQ(offset_of([&] { deserialize_index(bad); }), 4u);
}

TEST(Store, TruncationAnywhereIsRejectedWithOffset) {
  const auto bytes = serialize_index(fixture());
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    const std::vector<std::uint8_t> head(bytes.begin(), bytes.begin() + static_cast<long>(cut));
    const std::size_t at = offset_of([&] { deserialize_index(head); });
    EXPECT_LE(at, cut) << "cut at " << cut;
  }
  // Mid-record: the error points at the start of the incomplete record.
  const std::vector<std::uint8_t> mid(bytes.begin(), bytes.begin() + 31 + 20 + 10);
  EXPECT_EQ(offset_of([&] { deserialize_index(mid); }), 31u + 20u);
}

TEST(Store, TrailingBytesAndBadContentRejected) {
  auto bytes = serialize_index(fixture());
  bytes.push_back(0);
  EXPECT_THROW(deserialize_index(bytes), FormatError);
  auto dup = serialize_index(fixture());
  dup[31 + 20] = 1;  // second record's id becomes 1
  EXPECT_THROW(deserialize_index(dup), Error);
}

TEST(Store, MissingFileFails) { EXPECT_THROW(load_index("/nonexistent/x.typf"), Error); }
