#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

const std::string kCli = ADGAN_CLI;
const fs::path kRoot = fs::temp_directory_path() / "adgan_test_cli";

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args) {
  fs::create_directories(kRoot);
  const auto out = kRoot / "stdout.txt", err = kRoot / "stderr.txt";
  const int status = std::system((kCli + " " + args + " >" + out.string() + " 2>" + err.string()).c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const std::string kTiny =
    " --set image_size=16 --set encoder_channels=8,16 --set disc_channels=8,16 --set disc_hidden=32"
    " --set batch_size=8 --set log_interval=5";

// synthetic dataset in CelebA layout, generated once
const fs::path& synth_dir() {
  static const fs::path dir = [] {
    const auto d = kRoot / "synth";
    fs::remove_all(d);
    const auto r = run("synthgen --out " + d.string() + " --count 100 --attrs 3 --size 32 --seed 7");
    EXPECT_EQ(r.code, 0) << r.err;
    return d;
  }();
  return dir;
}

std::string celeba_args(const std::string& attributes = "all") {
  return " --dataset celeba --data-dir " + synth_dir().string() + " --set attributes=" + attributes +
         " --set train_count=80" + kTiny;
}

// a 10-step generator checkpoint trained on synth_dir
const fs::path& trained() {
  static const fs::path ck = [] {
    const auto out = kRoot / "run";
    fs::remove_all(out);
    const auto r = run("train" + celeba_args() + " --steps 10 --out-dir " + out.string());
    EXPECT_EQ(r.code, 0) << r.err;
    return out / "final.adgn";
  }();
  return ck;
}

}  // namespace

TEST(Cli, SynthgenLayoutAndDeterminism) {
  const auto& d = synth_dir();
  std::size_t pngs = 0;
  for (const auto& e : fs::directory_iterator(d / "img_align_celeba")) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, 100u);
  const auto attrs = slurp(d / "list_attr_celeba.txt");
  EXPECT_EQ(count_lines(attrs), 102u);
  EXPECT_TRUE(attrs.starts_with("100\n"));
  const auto again = kRoot / "synth_again";
  fs::remove_all(again);
  ASSERT_EQ(run("synthgen --out " + again.string() + " --count 100 --attrs 3 --size 32 --seed 7").code, 0);
  EXPECT_EQ(slurp(again / "list_attr_celeba.txt"), attrs);
  EXPECT_EQ(slurp(again / "img_align_celeba" / "000042.png"), slurp(d / "img_align_celeba" / "000042.png"));
}

TEST(Cli, TrainWithMissingDataNamesThePath) {
  const auto r = run("train --dataset celeba --data-dir /nonexistent/faces --steps 1");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("/nonexistent/faces"), std::string::npos) << r.err;
}

TEST(Cli, TrainSmokeRun) {
  const auto& ck = trained();
  EXPECT_TRUE(fs::exists(ck));
  const auto log = slurp(ck.parent_path() / "losses.csv");
  EXPECT_EQ(count_lines(log), 3u);  // header, step 5, step 10
  EXPECT_TRUE(log.starts_with("step,d1_gan,"));
}

TEST(Cli, TrainRejectsUnknownKey) {
  const auto r = run("train --set learning_rate=1 --steps 1 --out-dir " + (kRoot / "bad").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("learning_rate"), std::string::npos);
}

TEST(Cli, EditAllWritesGrid) {
  const auto in = kRoot / "four";
  fs::remove_all(in);
  fs::create_directories(in);
  for (const char* n : {"000001.png", "000002.png", "000003.png", "000004.png"}) {
    fs::copy_file(synth_dir() / "img_align_celeba" / n, in / n);
  }
  const auto out = kRoot / "grid.png";
  const auto r = run("edit --checkpoint " + trained().string() + " --input " + in.string() + " --all --attr-file " +
                     (synth_dir() / "list_attr_celeba.txt").string() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const cv::Mat img = cv::imread(out.string());
  // 4 rows of 16 px, 3 + 2 columns, 2 px separators
  EXPECT_EQ(img.rows, 4 * 16 + 3 * 2);
  EXPECT_EQ(img.cols, 5 * 16 + 4 * 2);
  EXPECT_NE(r.out.find("4 rows x 5 columns"), std::string::npos);
}

TEST(Cli, EditFlipNamesOutputByAttribute) {
  const auto out = kRoot / "flip";
  fs::remove_all(out);
  const auto input = synth_dir() / "img_align_celeba" / "000005.png";
  auto r = run("edit --checkpoint " + trained().string() + " --input " + input.string() +
               " --flip square --attrs 1,0,1 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "000005_square.png"));
  // columns resolve to the same attribute
  r = run("edit --checkpoint " + trained().string() + " --input " + input.string() +
          " --flip Bar --attrs 1,0,1 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "000005_bar.png"));
  r = run("edit --checkpoint " + trained().string() + " --input " + input.string() +
          " --flip freckles --attrs 1,0,1 --out " + out.string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("square"), std::string::npos);
}

TEST(Cli, EditSoftChecksLength) {
  const auto out = kRoot / "soft";
  const auto input = synth_dir() / "img_align_celeba" / "000006.png";
  auto r = run("edit --checkpoint " + trained().string() + " --input " + input.string() + " --soft 0.5,0.5 --out " +
               out.string());
  EXPECT_NE(r.code, 0);
  r = run("edit --checkpoint " + trained().string() + " --input " + input.string() +
          " --soft 0.5,0.25,1 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "000006_soft.png"));
  r = run("edit --checkpoint " + trained().string() + " --input " + input.string() + " --soft 0.5,0.25,1 --all" +
          " --out " + out.string());
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, EvalWritesCsvAndChecksSchema) {
  const auto clf = kRoot / "clf.adgn";
  auto r = run("train-classifier" + celeba_args() + " --classifier-steps 20 --out " + clf.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("held-out accuracy"), std::string::npos);
  const auto csv = kRoot / "eval.csv";
  r = run("eval --checkpoint " + trained().string() + " --classifier " + clf.string() + " --data " +
          synth_dir().string() + " --out " + csv.string());
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(slurp(csv));
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_EQ(header, "bright_background_flip_rate,square_flip_rate,bar_flip_rate,recon_l1,identity_l1");
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 4);

  const auto other = kRoot / "clf2.adgn";
  ASSERT_EQ(run("train-classifier" + celeba_args("Square,Bar") + " --classifier-steps 2 --out " + other.string()).code,
            0);
  r = run("eval --checkpoint " + trained().string() + " --classifier " + other.string() + " --data " +
          synth_dir().string() + " --out " + csv.string());
  EXPECT_EQ(r.code, 6);
  EXPECT_NE(r.err.find("schemas differ"), std::string::npos);
}

TEST(Cli, GradcheckPassesAndListsEachCheckOnce) {
  const auto r = run("gradcheck --micro-config");
  EXPECT_EQ(r.code, 0) << r.out;
  std::istringstream in(r.out);
  std::string line;
  std::set<std::string> names;
  std::size_t checks = 0;
  while (std::getline(in, line)) {
    if (!line.starts_with("ok") && !line.starts_with("FAIL")) continue;
    ++checks;
    std::istringstream ls(line);
    std::string status, name;
    ls >> status >> name;
    names.insert(name);
  }
  EXPECT_EQ(checks, names.size());
  for (const char* op : {"conv2d", "conv_transpose2d", "instance_norm", "bce_with_logits", "L_Disc1", "L_Gen2"}) {
    EXPECT_TRUE(names.contains(op)) << op;
  }
}

TEST(Cli, GradcheckImpossibleToleranceFails) {
  const auto r = run("gradcheck --tolerance 1e-12");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, SchemaListing) {
  auto r = run("schema");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(count_lines(r.out), 13u);
  EXPECT_NE(r.out.find("gender\tMale"), std::string::npos);
  r = run("schema --checkpoint " + trained().string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "0\tbright_background\tBright_Background\n1\tsquare\tSquare\n2\tbar\tBar\n");
}

TEST(Cli, CorruptCheckpointIsFormatError) {
  const auto bad = kRoot / "bad.adgn";
  std::ofstream(bad) << "ADGX garbage";
  const auto r = run("schema --checkpoint " + bad.string());
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.err.find("offset 0"), std::string::npos);
}
