#include <gtest/gtest.h>

#include <filesystem>

#include "fixtures.hpp"
#include "pcarect/bundle.hpp"
#include "pcarect/error.hpp"

namespace pcarect {
namespace {

class BundleTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    vpca_ = new Model(testing::small_model(Reduction::kVpca, true, 2));
    auto cfg = testing::small_config(Reduction::kPca, false);
    pca_ = new Model(train_model(cfg, testing::small_dataset(2), nullptr, nullptr, 1));
    probe_ = new EventStream(testing::small_dataset(9, 200'000)[1].stream);
  }
  static void TearDownTestSuite() {
    delete vpca_;
    delete pca_;
    delete probe_;
  }
  static Model* vpca_;
  static Model* pca_;
  static EventStream* probe_;
};
Model* BundleTest::vpca_ = nullptr;
Model* BundleTest::pca_ = nullptr;
EventStream* BundleTest::probe_ = nullptr;

void expect_same_outputs(const Model& a, const Model& b, const EventStream& s) {
  const auto x = run_stream(a, s);
  const auto y = run_stream(b, s);
  ASSERT_EQ(x.size(), y.size());
  ASSERT_GT(x.size(), 0u);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].classification.label, y[i].classification.label);
    EXPECT_EQ(x[i].classification.scores, y[i].classification.scores);
    EXPECT_EQ(x[i].position, y[i].position);
  }
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + std::size_t(i)] = std::uint8_t(v >> (8 * i));
}

TEST_F(BundleTest, BinaryRoundTrip) {
  for (const Model* m : {vpca_, pca_}) {
    const auto bytes = save_bundle(*m);
    ASSERT_GE(bytes.size(), 16u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "PCARECTB");
    EXPECT_EQ(bytes[8], kBundleVersion);
    const Model back = load_bundle(bytes);
    EXPECT_EQ(save_bundle(back), bytes);
    EXPECT_EQ(back.config, m->config);
    EXPECT_EQ(back.dictionary.centroids, m->dictionary.centroids);
    EXPECT_EQ(back.svm.weights, m->svm.weights);
    EXPECT_EQ(back.packed, m->packed);
    EXPECT_TRUE(structurally_equal(back.tree, m->tree));
    expect_same_outputs(*m, back, *probe_);
  }
}

TEST_F(BundleTest, ModeContract) {
  const Model back = load_bundle(save_bundle(*vpca_));
  ASSERT_NE(back.dictionary.transform.projection(), nullptr);
  EXPECT_EQ(back.dictionary.transform.pca_model(), nullptr);
  EXPECT_EQ(*back.dictionary.transform.projection(), *vpca_->dictionary.transform.projection());
  const Model p = load_bundle(save_bundle(*pca_));
  ASSERT_NE(p.dictionary.transform.pca_model(), nullptr);
  EXPECT_EQ(p.dictionary.transform.pca_model()->components, pca_->dictionary.transform.pca_model()->components);
}

TEST_F(BundleTest, TextRoundTrip) {
  for (const Model* m : {vpca_, pca_}) {
    const auto text = export_text_bundle(*m);
    EXPECT_EQ(text.rfind("# pcarect bundle v1\n", 0), 0u);
    const Model back = import_text_bundle(text);
    EXPECT_EQ(save_bundle(back), save_bundle(*m));
    EXPECT_EQ(export_text_bundle(back), text);
  }
}

TEST_F(BundleTest, HardwareProfileSurvives) {
  Model m = *pca_;
  ASSERT_TRUE(m.packed);
  set_profile(m, Profile::kHardware);
  const Model back = load_bundle(save_bundle(m));
  EXPECT_EQ(back.config.profile, Profile::kHardware);
  expect_same_outputs(m, back, *probe_);
}

TEST_F(BundleTest, FilesInBothForms) {
  const auto dir = std::filesystem::temp_directory_path() / "pcarect_bundle_test";
  std::filesystem::create_directories(dir);
  save_bundle_file(dir / "m.bin", *vpca_);
  write_text_file(dir / "m.txt", export_text_bundle(*vpca_));
  EXPECT_EQ(save_bundle(load_bundle_file(dir / "m.bin")), save_bundle(*vpca_));
  EXPECT_EQ(save_bundle(load_bundle_file(dir / "m.txt")), save_bundle(*vpca_));
  try {
    load_bundle_file(dir / "missing.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("missing.bin"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_F(BundleTest, UnknownSectionsAreSkipped) {
  auto bytes = save_bundle(*vpca_);
  std::uint32_t count = 0;
  for (int i = 0; i < 4; ++i) count |= std::uint32_t(bytes[12 + std::size_t(i)]) << (8 * i);
  put_u32(bytes, 12, count + 1);
  const std::string tag = "XTRA";
  bytes.insert(bytes.end(), tag.begin(), tag.end());
  for (int i = 0; i < 8; ++i) bytes.push_back(i == 0 ? 3 : 0);
  bytes.insert(bytes.end(), {1, 2, 3});
  EXPECT_EQ(save_bundle(load_bundle(bytes)), save_bundle(*vpca_));
}

TEST_F(BundleTest, CorruptInputIsRejected) {
  const auto good = save_bundle(*vpca_);
  auto bad = good;
  bad[0] = 'X';
  EXPECT_THROW(load_bundle(bad), Error);
  bad = good;
  put_u32(bad, 8, 99);
  EXPECT_THROW(load_bundle(bad), Error);
  for (std::size_t cut : {std::size_t{4}, std::size_t{14}, good.size() / 2, good.size() - 1}) {
    EXPECT_THROW(load_bundle(std::span(good).first(cut)), Error) << cut;
  }
  EXPECT_THROW(import_text_bundle("# pcarect bundle v1\n[CONF]\nnonsense\n"), Error);
  EXPECT_THROW(import_text_bundle("hello"), Error);
  // Flip every byte of a payload region; loading either fails cleanly or yields a consistent model.
  for (std::size_t i = 16; i < good.size(); i += 97) {
    bad = good;
    bad[i] ^= 0xFF;
    try {
      const Model m = load_bundle(bad);
      (void)m;
    } catch (const Error&) {
    }
  }
}

}  // namespace
}  // namespace pcarect
