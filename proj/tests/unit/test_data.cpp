#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "adgan/data/attr_file.hpp"
#include "adgan/data/dataset.hpp"
#include "adgan/data/image_io.hpp"
#include "adgan/data/synthetic.hpp"

using namespace adgan;
namespace fs = std::filesystem;

namespace {

const std::string kData = ADGAN_TEST_DATA;

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("adgan_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::size_t parse_error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_attr_stream(in);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(AttrFile, SingleRowFixtureAlternates) {
  const auto t = parse_attr_file(kData + "/attr_single.txt");
  EXPECT_EQ(t.count, 1u);
  ASSERT_EQ(t.columns.size(), 40u);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].filename, "000001.jpg");
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(t.rows[0].values[i], i % 2 == 0 ? 1 : 0);
}

TEST(AttrFile, ValueMapping) {
  std::istringstream in("1\nA B\nx.jpg -1 1\n");
  const auto t = parse_attr_stream(in);
  EXPECT_EQ(t.rows[0].values, (std::vector<std::uint8_t>{0, 1}));
}

TEST(AttrFile, ErrorsNameTheLine) {
  EXPECT_EQ(parse_error_line("2\nA B\nx.jpg 1 -1\ny.jpg 1 0\n"), 4u);
  EXPECT_EQ(parse_error_line("1\nA B\nx.jpg 1 -1 1\n"), 3u);
  EXPECT_EQ(parse_error_line("3\nA B\nx.jpg 1 -1\ny.jpg 1 1\n"), 4u);
  EXPECT_EQ(parse_error_line("many\nA B\n"), 1u);
  EXPECT_THROW(parse_attr_file("/nonexistent/list_attr.txt"), IoError);
}

TEST(AttrFile, RoundTripReproducesValues) {
  const auto t = parse_attr_file(kData + "/attr_fixture.txt");
  std::stringstream buf;
  write_attr_stream(buf, t);
  const auto back = parse_attr_stream(buf);
  ASSERT_EQ(back.rows.size(), t.rows.size());
  EXPECT_EQ(back.columns, t.columns);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].filename, t.rows[i].filename);
    EXPECT_EQ(back.rows[i].values, t.rows[i].values);
  }
}

TEST(Split, CelebaCountsAndBoundaries) {
  const auto full = make_split(202599);
  EXPECT_EQ(full.train.size(), 182000u);
  EXPECT_EQ(full.test.size(), 20599u);
  EXPECT_EQ(full.test.front(), 182000u);
  EXPECT_EQ(make_split(182001).test.size(), 1u);
  EXPECT_THROW(make_split(1000), ContractError);
  const auto a = make_split(12, 10), b = make_split(12, 10);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::set<std::size_t> train(a.train.begin(), a.train.end());
  for (auto i : a.test) EXPECT_FALSE(train.contains(i));
  EXPECT_EQ(a.train.size() + a.test.size(), 12u);
}

TEST(LoadImage, EndpointsAndGray) {
  const auto dir = temp_dir("load");
  cv::imwrite((dir / "white.png").string(), cv::Mat(10, 10, CV_8UC3, cv::Scalar(255, 255, 255)));
  cv::imwrite((dir / "black.png").string(), cv::Mat(10, 10, CV_8UC3, cv::Scalar(0, 0, 0)));
  cv::imwrite((dir / "gray.png").string(), cv::Mat(10, 10, CV_8UC3, cv::Scalar(128, 128, 128)));
  const auto white = load_image((dir / "white.png").string(), 10);
  const auto black = load_image((dir / "black.png").string(), 10);
  const auto gray = load_image((dir / "gray.png").string(), 4);
  for (float v : white.data()) EXPECT_EQ(v, 1.0f);
  for (float v : black.data()) EXPECT_EQ(v, -1.0f);
  for (float v : gray.data()) EXPECT_NEAR(v, 2.0 * 128 / 255 - 1, 1e-6);
}

TEST(LoadImage, CelebaFrameShapeAndCenterCrop) {
  const auto dir = temp_dir("frame");
  cv::Mat frame(218, 178, CV_8UC3, cv::Scalar(0, 0, 0));
  frame(cv::Rect(0, 20, 178, 178)).setTo(cv::Scalar(0, 0, 255));  // red square region
  cv::imwrite((dir / "frame.jpg").string(), frame, {cv::IMWRITE_JPEG_QUALITY, 100});
  const auto img = load_image((dir / "frame.jpg").string(), 64);
  EXPECT_EQ(img.shape(), (Shape{3, 64, 64}));
  EXPECT_GT(img.data()[32 * 64 + 32], 0.9f);    // red channel, centre
  EXPECT_LT(img.data()[4096 + 32 * 64 + 32], -0.9f);  // green channel
}

TEST(LoadImage, UndecodableFileIsIoErrorWithPath) {
  const auto dir = temp_dir("bad");
  std::ofstream(dir / "bad.png") << "not an image";
  try {
    load_image((dir / "bad.png").string(), 8);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.png"), std::string::npos);
  }
}

TEST(Synthetic, ConstructiveDefinition) {
  const auto schema = synthetic::schema(3);
  const std::size_t s = 32;
  const auto img = synthetic::render(1, 0, AttributeVector(schema, {1, 0, 0}), s);
  auto px = [&](std::size_t ch, std::size_t r, std::size_t c) { return img.data()[ch * s * s + r * s + c]; };
  const auto sq = synthetic::region(1, s), bar = synthetic::region(2, s);
  EXPECT_EQ(px(0, 0, 0), synthetic::kBrightBackground);
  EXPECT_EQ(px(0, sq.r0 + 1, sq.c0 + 1), synthetic::kBrightBackground);
  EXPECT_EQ(px(2, bar.r0, s / 2), synthetic::kBrightBackground);

  const auto on = synthetic::render(1, 0, AttributeVector(schema, {0, 1, 1}), s);
  auto px2 = [&](std::size_t ch, std::size_t r, std::size_t c) { return on.data()[ch * s * s + r * s + c]; };
  EXPECT_EQ(px2(0, 0, s - 1), synthetic::kDarkBackground);
  EXPECT_EQ(px2(0, sq.r0 + 1, sq.c0 + 1), synthetic::kColors[1][0]);
  EXPECT_EQ(px2(2, bar.r0, 1), synthetic::kColors[2][2]);
  for (float v : on.data()) EXPECT_TRUE(v >= -1.0f && v <= 1.0f);
}

TEST(Synthetic, Deterministic) {
  const auto schema = synthetic::schema(3);
  const AttributeVector a(schema, {0, 1, 0});
  const auto x = synthetic::render(5, 17, a, 32), y = synthetic::render(5, 17, a, 32);
  EXPECT_TRUE(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
  const auto e1 = gen_synthetic(5, 3, 32, 9), e2 = gen_synthetic(5, 3, 32, 9);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(e1[i].attrs, e2[i].attrs);
    EXPECT_TRUE(std::equal(e1[i].image.data().begin(), e1[i].image.data().end(), e2[i].image.data().begin()));
  }
  EXPECT_THROW(gen_synthetic(1, 9, 32, 1), ContractError);
  EXPECT_THROW(gen_synthetic(1, 3, 8, 1), ContractError);
}

TEST(Synthetic, AttributeFrequenciesAtSeed7) {
  const auto ex = gen_synthetic(1000, 8, 16, 7);
  for (std::size_t k = 0; k < 8; ++k) {
    double ones = 0;
    for (const auto& e : ex) ones += e.attrs[k];
    EXPECT_GE(ones / 1000, 0.44) << k;
    EXPECT_LE(ones / 1000, 0.56) << k;
  }
  for (const auto& e : ex) EXPECT_TRUE(e.attrs.is_binary());
}

TEST(Synthetic, LinearProbeReadsEveryAttribute) {
  // ridge regression on raw pixels, solved in the dual (samples < pixels)
  const std::size_t n_train = 1000, n_test = 500, size = 32, d = 3 * size * size;
  const auto train = gen_synthetic(n_train, 8, size, 21);
  const auto test = gen_synthetic(n_test, 8, size, 21, n_train);
  Eigen::MatrixXd X(n_train, d + 1), Xt(n_test, d + 1);
  for (std::size_t i = 0; i < n_train; ++i) {
    for (std::size_t j = 0; j < d; ++j) X(i, j) = train[i].image.data()[j];
    X(i, d) = 1.0;
  }
  for (std::size_t i = 0; i < n_test; ++i) {
    for (std::size_t j = 0; j < d; ++j) Xt(i, j) = test[i].image.data()[j];
    Xt(i, d) = 1.0;
  }
  const Eigen::MatrixXd gram = X * X.transpose() + 1e-2 * Eigen::MatrixXd::Identity(n_train, n_train);
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  for (std::size_t k = 0; k < 8; ++k) {
    Eigen::VectorXd y(n_train);
    for (std::size_t i = 0; i < n_train; ++i) y(i) = train[i].attrs[k] * 2.0 - 1.0;
    const Eigen::VectorXd w = X.transpose() * llt.solve(y);
    const Eigen::VectorXd pred = Xt * w;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n_test; ++i) correct += (pred(i) > 0) == (test[i].attrs[k] == 1.0);
    EXPECT_GE(static_cast<double>(correct) / n_test, 0.99) << "attribute " << k;
  }
}

TEST(Batcher, SizesAndPartition) {
  const auto schema = synthetic::schema(1);
  const auto ds = Dataset::in_memory(gen_synthetic(10, 1, 16, 1), schema);
  Batcher b(ds, 4, 3);
  ASSERT_EQ(b.batches_per_epoch(), 3u);
  std::vector<std::size_t> sizes, seen;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto idx = b.indices_at(s);
    sizes.push_back(idx.size());
    seen.insert(seen.end(), idx.begin(), idx.end());
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 2}));
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(seen[i], i);
  const auto batch = b.batch_at(0);
  EXPECT_EQ(batch.images.shape(), (Shape{4, 3, 16, 16}));
  EXPECT_EQ(batch.attrs.size(), 4u);
}

TEST(Batcher, SameSeedSameOrder) {
  const auto schema = synthetic::schema(2);
  const auto ds = Dataset::in_memory(gen_synthetic(25, 2, 16, 1), schema);
  Batcher a(ds, 4, 11), b(ds, 4, 11), c(ds, 4, 12);
  bool differs = false;
  for (std::uint64_t s = 0; s < 20; ++s) {
    EXPECT_EQ(a.indices_at(s), b.indices_at(s));
    differs = differs || a.indices_at(s) != c.indices_at(s);
  }
  EXPECT_TRUE(differs);
  EXPECT_NE(a.epoch_order(0), a.epoch_order(1));
}

TEST(Dataset, FromTableReadsImagesAndSchemaColumns) {
  const auto dir = temp_dir("table");
  AttrTable table;
  table.count = 2;
  table.columns = {"Male", "Young"};
  table.rows = {{"a.png", {1, 0}}, {"b.png", {0, 1}}};
  cv::imwrite((dir / "a.png").string(), cv::Mat(8, 8, CV_8UC3, cv::Scalar(255, 255, 255)));
  cv::imwrite((dir / "b.png").string(), cv::Mat(8, 8, CV_8UC3, cv::Scalar(0, 0, 0)));
  auto schema = std::make_shared<const AttributeSchema>(AttributeSchema{{"young", "gender"}, {"Young", "Male"}});
  const auto ds = Dataset::from_table(std::make_shared<const AttrTable>(table), {0, 1}, dir.string(), schema, 8);
  const auto e = ds.get(0);
  EXPECT_EQ(e.attrs[0], 0.0);
  EXPECT_EQ(e.attrs[1], 1.0);
  EXPECT_EQ(e.image.data()[0], 1.0f);
  EXPECT_EQ(ds.get(1).image.data()[0], -1.0f);
  EXPECT_THROW(ds.get(2), ContractError);
}
