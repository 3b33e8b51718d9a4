// End-to-end checks of the command-line tools (subprocess driven).
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

RunResult run(const std::string& cmd) {
  std::array<char, 4096> buf;
  std::string output;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  EXPECT_NE(pipe, nullptr) << cmd;
  while (fgets(buf.data(), buf.size(), pipe)) output += buf.data();
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, output};
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string v;
  while (std::getline(ss, v, ',')) f.push_back(v);
  return f;
}

// Non-timing columns of metrics.csv: epoch, train_acc, val_acc.
std::vector<std::string> stable_fields(const std::string& csv_text) {
  std::vector<std::string> out;
  for (const auto& line : split_lines(csv_text)) {
    const auto f = split_csv(line);
    if (f.size() == 5 && f[0] != "epoch") {
      out.push_back(f[0]);
      out.push_back(f[3]);
      out.push_back(f[4]);
    }
  }
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(fs::temp_directory_path() /
                         ("binnet_cli_" + std::to_string(::getpid())));
    fs::create_directories(*root_ / "mnist");
    fs::create_directories(*root_ / "cifar");
    auto r = run(std::string(BINNET_DATAGEN) +
                 " --dataset mnist --out " + (*root_ / "mnist").string() +
                 " --train 600 --test 200 --seed 5");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    r = run(std::string(BINNET_DATAGEN) + " --dataset cifar10 --out " +
            (*root_ / "cifar").string() + " --train 100 --test 40 --seed 5");
    ASSERT_EQ(r.exit_code, 0) << r.output;
  }

  static void TearDownTestSuite() {
    fs::remove_all(*root_);
    delete root_;
    root_ = nullptr;
  }

  static std::string mnist_dir() { return (*root_ / "mnist").string(); }
  static std::string cifar_dir() { return (*root_ / "cifar").string(); }
  static fs::path out(const std::string& name) { return *root_ / name; }

  static fs::path* root_;
};

fs::path* CliTest::root_ = nullptr;

const char* kCli = BINNET_CLI;

std::string train_cmd(const std::string& data_dir, const std::string& out_dir,
                      const std::string& extra) {
  return std::string(kCli) + " train --dataset mnist --data-dir " + data_dir +
         " --out " + out_dir + " --train-limit 320 --val-limit 120 " + extra;
}

}  // namespace

TEST_F(CliTest, ZeroEpochsWritesHeaderOnlyMetrics) {
  const auto dir = out("zero");
  const auto r = run(train_cmd(mnist_dir(), dir.string(), "--epochs 0 --seed 1"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(read_text(dir / "metrics.csv"),
            "epoch,learn_time_s,infer_time_per_image_s,train_acc,val_acc\n");
  EXPECT_TRUE(fs::exists(dir / "final.bnnc"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST_F(CliTest, IdenticalSeedsGiveIdenticalMetrics) {
  const auto a = out("det_a"), b = out("det_b");
  auto r = run(train_cmd(mnist_dir(), a.string(),
                         "--regularizer det --epochs 2 --seed 7"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  r = run(train_cmd(mnist_dir(), b.string(),
                    "--regularizer det --epochs 2 --seed 7"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto fa = stable_fields(read_text(a / "metrics.csv"));
  const auto fb = stable_fields(read_text(b / "metrics.csv"));
  ASSERT_FALSE(fa.empty());
  EXPECT_EQ(fa, fb);
}

TEST_F(CliTest, EvalReproducesFinalMetricsRow) {
  const auto dir = out("eval_src");
  auto r = run(train_cmd(mnist_dir(), dir.string(),
                         "--regularizer det --epochs 1 --seed 3"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto rows = split_lines(read_text(dir / "metrics.csv"));
  ASSERT_EQ(rows.size(), 2u);
  const std::string final_val_acc = split_csv(rows[1])[4];

  const auto e = run(std::string(kCli) + " eval --ckpt " +
                     (dir / "final.bnnc").string() +
                     " --dataset mnist --data-dir " + mnist_dir() +
                     " --val-limit 120");
  ASSERT_EQ(e.exit_code, 0) << e.output;
  EXPECT_NE(e.output.find("accuracy=" + final_val_acc), std::string::npos)
      << "eval printed: " << e.output << " csv row: " << rows[1];
}

TEST_F(CliTest, CompareReportsBothModes) {
  const auto dir = out("cmp");
  auto r = run(train_cmd(mnist_dir(), dir.string(),
                         "--regularizer det --epochs 1 --seed 4"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto e = run(std::string(kCli) + " eval --ckpt " +
                     (dir / "final.bnnc").string() +
                     " --dataset mnist --data-dir " + mnist_dir() +
                     " --val-limit 120 --compare");
  ASSERT_EQ(e.exit_code, 0) << e.output;
  EXPECT_NE(e.output.find("binary:"), std::string::npos);
  EXPECT_NE(e.output.find("fp:"), std::string::npos);
  EXPECT_NE(e.output.find("delta:"), std::string::npos);
}

TEST_F(CliTest, WrongDatasetCheckpointNamesShapeConflict) {
  const auto dir = out("shape_src");
  auto r = run(train_cmd(mnist_dir(), dir.string(), "--epochs 0 --seed 2"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto e = run(std::string(kCli) + " eval --ckpt " +
                     (dir / "final.bnnc").string() +
                     " --dataset cifar10 --data-dir " + cifar_dir());
  EXPECT_EQ(e.exit_code, 1);
  EXPECT_NE(e.output.find("3x32x32"), std::string::npos) << e.output;
  EXPECT_NE(e.output.find("1x28x28"), std::string::npos) << e.output;
}

TEST_F(CliTest, MissingDatasetPathExitsOne) {
  const auto r = run(std::string(kCli) + " train --dataset mnist --data-dir " +
                     out("missing").string() + " --out " +
                     out("missing_out").string() + " --epochs 1");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("error"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run(std::string(kCli) + " train --out x").exit_code, 1);
  EXPECT_EQ(run(std::string(kCli) + " nonsense").exit_code, 1);
  EXPECT_EQ(run(std::string(kCli)).exit_code, 1);
}

TEST_F(CliTest, BenchRejectsLowRepsAndUnknownKernels) {
  const auto r =
      run(std::string(kCli) + " bench --kernel fp_dense --size 64 --reps 10");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("30"), std::string::npos);

  const auto u = run(std::string(kCli) + " bench --kernel warp_drive");
  EXPECT_EQ(u.exit_code, 1);
  EXPECT_NE(u.output.find("fp_dense, bin_dense, fp_conv, bin_conv"),
            std::string::npos)
      << u.output;
}

TEST_F(CliTest, BenchCsvSchemaGolden) {
  const auto csv = out("bench.csv");
  const auto r = run(std::string(kCli) +
                     " bench --kernel fp_dense --size 128 --reps 30 --csv " +
                     csv.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto lines = split_lines(read_text(csv));
  ASSERT_GE(lines.size(), 2u);
  EXPECT_EQ(lines[0], "kernel,size,reps,median_ns,p10_ns,p90_ns,checksum");
  EXPECT_EQ(split_csv(lines[1])[0], "fp_dense");
  EXPECT_EQ(split_csv(lines[1])[2], "30");
}

TEST_F(CliTest, BenchPrintsSpeedupWhenBothKernelsRequested) {
  const auto r = run(std::string(kCli) +
                     " bench --kernel fp_dense --kernel bin_dense --size 128 "
                     "--reps 30");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("speedup bin_dense vs fp_dense"), std::string::npos);
}

TEST_F(CliTest, ResumeReproducesUninterruptedMetrics) {
  const auto full = out("resume_full"), part = out("resume_part"),
             cont = out("resume_cont");
  auto r = run(train_cmd(mnist_dir(), full.string(),
                         "--regularizer stoch --epochs 3 --seed 11"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  r = run(train_cmd(mnist_dir(), part.string(),
                    "--regularizer stoch --epochs 2 --seed 11"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  r = run(train_cmd(mnist_dir(), cont.string(),
                    "--epochs 3 --resume " + (part / "final.bnnc").string()));
  ASSERT_EQ(r.exit_code, 0) << r.output;

  const auto full_fields = stable_fields(read_text(full / "metrics.csv"));
  const auto cont_fields = stable_fields(read_text(cont / "metrics.csv"));
  ASSERT_EQ(full_fields.size(), 9u);  // 3 epochs x 3 stable fields
  ASSERT_EQ(cont_fields.size(), 3u);
  EXPECT_EQ(cont_fields[0], full_fields[6]);
  EXPECT_EQ(cont_fields[1], full_fields[7]);
  EXPECT_EQ(cont_fields[2], full_fields[8]);

  // Resumed final checkpoint matches the uninterrupted one byte for byte.
  const auto a = read_text(full / "final.bnnc");
  const auto b = read_text(cont / "final.bnnc");
  EXPECT_EQ(a, b);
}
