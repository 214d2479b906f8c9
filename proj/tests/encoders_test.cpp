#include <gtest/gtest.h>

#include <map>

#include <Eigen/SVD>

#include "support.hpp"
#include "typr/encoders.hpp"
#include "typr/errors.hpp"
#include "typr/fusion.hpp"
#include "typr/typograph.hpp"

using namespace typr;

namespace {

// Published SplitMix64 outputs for seed 0.
TEST(Rng, SplitMix64KnownSequence) {
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(rng.next(), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(rng.next(), 0x06c45d188009454fULL);
}

// Floating-point luma per pixel, averaged per cell; an independent check on
// the encoder's integer pooling.
Eigen::VectorXd naive_pool(const Image& img, int grid) {
  Eigen::VectorXd out(grid * grid + 1);
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx) {
      const int y0 = gy * img.height() / grid, y1 = std::max(y0 + 1, (gy + 1) * img.height() / grid);
      const int x0 = gx * img.width() / grid, x1 = std::max(x0 + 1, (gx + 1) * img.width() / grid);
      double sum = 0;
      int n = 0;
      for (int y = y0; y < std::min(y1, img.height()); ++y)
        for (int x = x0; x < std::min(x1, img.width()); ++x, ++n) {
          const Rgb p = img.pixel(x, y);
          sum += (0.299 * p.r + 0.587 * p.g + 0.114 * p.b) / 255.0;
        }
      out[gy * grid + gx] = sum / n;
    }
  out[grid * grid] = 1.0;
  return out;
}

Image gradient(int w, int h) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.set_pixel(x, y, {static_cast<std::uint8_t>(x * 255 / w), static_cast<std::uint8_t>(y * 255 / h), 77});
  return img;
}

}  // namespace

TEST(ReferenceImage, PoolingMatchesNaiveOracle) {
  const ReferenceImageEncoder enc(EncoderHandle::reference_image());
  for (auto [w, h] : {std::pair{224, 224}, {37, 19}, {5, 3}, {1, 1}}) {
    const Image img = gradient(w, h);
    EXPECT_LT((enc.pooled(img) - naive_pool(img, 16)).cwiseAbs().maxCoeff(), 1e-12) << w << "x" << h;
  }
}

TEST(ReferenceImage, ProjectionIsSeededUniformRowMajor) {
  const auto handle = EncoderHandle::reference_image("m", 8, 42);
  const ReferenceImageEncoder enc(handle);
  ASSERT_EQ(enc.projection().rows(), 16 * 16 + 1);
  ASSERT_EQ(enc.projection().cols(), 8);
  SplitMix64 rng(42);
  EXPECT_EQ(enc.projection()(0, 0), -1.0 + 2.0 * rng.uniform01());
  EXPECT_EQ(enc.projection()(0, 1), -1.0 + 2.0 * rng.uniform01());
  EXPECT_LE(enc.projection().cwiseAbs().maxCoeff(), 1.0);
}

TEST(ReferenceImage, EmbeddingIsNormalizedProjection) {
  const auto handle = EncoderHandle::reference_image();
  const ReferenceImageEncoder enc(handle);
  const Image img = gradient(64, 48);
  const Eigen::VectorXd expected = (enc.projection().transpose() * naive_pool(img, 16)).normalized();
  const Embedding e = enc.embed(img);
  EXPECT_EQ(e.dim(), 256);
  EXPECT_EQ(e.modality, Modality::Image);
  EXPECT_NEAR(e.vector.cast<double>().norm(), 1.0, 1e-5);
  EXPECT_LT((e.vector.cast<double>() - expected).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ReferenceImage, BlackImageIsNormalizedBiasRow) {
  const auto handle = EncoderHandle::reference_image();
  const ReferenceImageEncoder enc(handle);
  const Image black(224, 224, {0, 0, 0});
  EXPECT_EQ(enc.pooled(black).head(256), Eigen::VectorXd::Zero(256));
  const Embedding e = enc.embed(black);
  const Eigen::VectorXd bias_row = enc.projection().row(256).transpose().normalized();
  EXPECT_LT((e.vector.cast<double>() - bias_row).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(e.vector.cast<double>().norm(), 1.0, 1e-6);
}

TEST(ReferenceImage, DeterministicAndSeedSensitive) {
  const Image img = gradient(100, 80);
  const auto a = embed_image_reference(EncoderHandle::reference_image(), img);
  const auto b = embed_image_reference(EncoderHandle::reference_image(), img);
  const auto c = embed_image_reference(EncoderHandle::reference_image("ref-image", 256, 1), img);
  EXPECT_EQ(a.vector, b.vector);
  EXPECT_NE(a.vector, c.vector);
}

TEST(ReferenceImage, OnePixelChangeStaysWithinPooledBound) {
  const auto handle = EncoderHandle::reference_image();
  const ReferenceImageEncoder enc(handle);
  const Image base(224, 224);
  const Eigen::VectorXd x = enc.projection().transpose() * enc.pooled(base);
  // A full-swing change of one pixel moves one 14x14 cell mean by at most
  // 1/196; the projected change is bounded by the top singular value.
  const double sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(enc.projection()).singularValues()(0);
  const double d = sigma * (1.0 / 196.0);
  const double bound = std::sqrt(1.0 - (d / x.norm()) * (d / x.norm()));
  ASSERT_GE(bound, 0.999);
  const Embedding e0 = enc.embed(base);
  for (auto [px, py] : {std::pair{0, 0}, {100, 117}, {223, 223}, {13, 200}}) {
    Image changed = base;
    changed.set_pixel(px, py, {0, 0, 0});
    const double c = cosine(e0, enc.embed(changed));
    EXPECT_GE(c, bound - 1e-9);
    EXPECT_LT(c, 1.0);
  }
}

TEST(ReferenceImage, RenderedTextChangesEmbeddingIffNonEmpty) {
  const auto handle = EncoderHandle::reference_image();
  const Image img = gradient(224, 224);
  const Embedding raw = embed_image_reference(handle, img);
  const auto& font = typr::testing::shipped_font();
  EXPECT_EQ(embed_image_reference(handle, render_text(img, "", RenderSpec{}, font).image).vector, raw.vector);
  for (std::string title : {"NIKE DUNK", "a", "Samba OG", "Tote"})
    EXPECT_NE(embed_image_reference(handle, render_text(img, title, RenderSpec{}, font).image).vector, raw.vector)
        << title;
}

TEST(ReferenceImage, RejectsEmptyImageAndWrongHandle) {
  EXPECT_THROW(embed_image_reference(EncoderHandle::reference_image(), Image{}), InvalidInput);
  EXPECT_THROW(embed_image_reference(EncoderHandle::reference_text(), Image(4, 4)), InvalidInput);
}

TEST(ReferenceText, RepeatedTrigramCountsTwice) {
  const ReferenceTextEncoder enc(EncoderHandle::reference_text());
  const Eigen::VectorXd counts = enc.counts("aaaa");
  // Trigrams of "^aaaa$": ^aa, aaa, aaa, aa$.
  std::map<std::size_t, double> expected;
  for (std::string t : {"^aa", "aaa", "aaa", "aa$"}) expected[enc.bucket_of(t)] += 1.0;
  EXPECT_GE(counts[static_cast<Eigen::Index>(enc.bucket_of("aaa"))], 2.0);
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    const auto it = expected.find(static_cast<std::size_t>(i));
    EXPECT_EQ(counts[i], it == expected.end() ? 0.0 : it->second) << i;
  }
  EXPECT_EQ(counts.sum(), 4.0);
  EXPECT_NEAR(enc.embed("aaaa").vector.cast<double>().norm(), 1.0, 1e-6);
}

TEST(ReferenceText, CaseInsensitiveAndDeterministic) {
  const auto h = EncoderHandle::reference_text();
  EXPECT_EQ(embed_text_reference(h, "NIKE Dunk").vector, embed_text_reference(h, "nike dunk").vector);
  EXPECT_EQ(embed_text_reference(h, "x").modality, Modality::Text);
}

TEST(ReferenceText, SharedTrigramsRankHigher) {
  const auto h = EncoderHandle::reference_text();
  const auto a = embed_text_reference(h, "nike dunk");
  EXPECT_GT(cosine(a, embed_text_reference(h, "nike dunk low")), cosine(a, embed_text_reference(h, "gucci bag")));
}

TEST(ReferenceText, EmptyTextUsesReservedBucket) {
  const ReferenceTextEncoder enc(EncoderHandle::reference_text());
  const Embedding e = enc.embed("");
  EXPECT_FLOAT_EQ(e.vector[static_cast<Eigen::Index>(enc.empty_bucket())], 1.0f);
  EXPECT_FLOAT_EQ(e.vector.cwiseAbs().sum(), 1.0f);
}

TEST(EncoderHandle, FingerprintDistinguishesConfigurations) {
  EXPECT_NE(EncoderHandle::reference_image().fingerprint(),
            EncoderHandle::reference_image("ref-image", 256, 1).fingerprint());
  EXPECT_NE(EncoderHandle::reference_image().fingerprint(), EncoderHandle::reference_text().fingerprint());
  EXPECT_EQ(EncoderHandle::reference_text().fingerprint(), EncoderHandle::reference_text().fingerprint());
}

TEST(BatchEncoders, MatchSingleCalls) {
  const auto ih = EncoderHandle::reference_image();
  const auto th = EncoderHandle::reference_text();
  const Image a = gradient(30, 30), b(20, 10);
  const std::vector<const Image*> images{&a, &b};
  const auto out = make_image_encoder(ih)->embed_images(images);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].vector, embed_image_reference(ih, b).vector);
  const std::vector<std::string> texts{"one", "two"};
  const auto tout = make_text_encoder(th)->embed_texts(texts);
  EXPECT_EQ(tout[0].vector, embed_text_reference(th, "one").vector);
}
