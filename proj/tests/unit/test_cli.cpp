#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "hmatch/cli.hpp"

using namespace hmatch;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "hmatch");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("hmatch_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

void write(const fs::path& p, const std::string& bytes) {
  io::OutputBatch b;
  b.add(p, bytes);
  b.commit();
}

io::Image image(std::vector<std::uint8_t> rgb) { return io::Image{2, 2, std::move(rgb)}; }

// Pixel 3 of A is (64,128,192); in B its channels are rotated to (128,192,64).
const std::vector<std::uint8_t> kPixelsA{64, 64, 192, 255, 255, 0, 64, 0, 255, 64, 128, 192};
const std::vector<std::uint8_t> kPixelsB{64, 64, 192, 255, 255, 0, 64, 0, 255, 128, 192, 64};

}  // namespace

TEST(CliGen, ShapesAndLabels) {
  auto dir = fresh_dir("gen");
  auto r = run({"--seed", "7", "--out", dir.string(), "gen", "--d", "3", "--n", "4", "--r", "0.5",
                "--kind", "gaussian_outliers"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto x = io::read_matrix_csv(dir / "X.csv");
  auto y = io::read_matrix_csv(dir / "Y.csv");
  EXPECT_EQ(x.rows(), 3u);
  EXPECT_EQ(x.cols(), 4u);
  EXPECT_EQ(y.rows(), 3u);
  EXPECT_EQ(y.cols(), 4u);
  EXPECT_EQ(io::parse_labels(slurp(dir / "labels.csv")).size(), 2u);
  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["scenario"]["seed"], 7);
  EXPECT_EQ(manifest["scenario"]["kind"], "gaussian_outliers");
  EXPECT_EQ(manifest["tool"], "hmatch");
}

TEST(CliGen, Deterministic) {
  auto a = fresh_dir("gen_a"), b = fresh_dir("gen_b");
  for (const auto& dir : {a, b}) {
    ASSERT_EQ(run({"--seed", "11", "--out", dir.string(), "gen", "--d", "5", "--n", "20", "--r", "0.6",
                   "--kind", "permuted_inliers", "--sigma2", "0.1"})
                  .code,
              0);
  }
  for (const char* f : {"X.csv", "Y.csv", "labels.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(CliGen, LabelCountAcrossGrid) {
  auto dir = fresh_dir("gen_grid");
  for (int n : {4, 10, 25}) {
    for (double r : {0.2, 0.4, 0.6, 0.8}) {
      const double rn = r * n;
      if (std::abs(rn - std::round(rn)) > 1e-9 || rn < 1 || rn > n - 2) continue;
      auto rr = run({"--out", dir.string(), "gen", "--d", "2", "--n", std::to_string(n), "--r",
                     std::to_string(r), "--kind", "permuted_inliers"});
      ASSERT_EQ(rr.code, 0) << rr.err;
      EXPECT_EQ(io::parse_labels(slurp(dir / "labels.csv")).size(), static_cast<std::size_t>(std::lround(rn)));
    }
  }
}

TEST(CliGen, InvalidSpecIsRuntimeError) {
  auto dir = fresh_dir("gen_bad");
  auto r = run({"--out", dir.string(), "gen", "--d", "2", "--n", "10", "--r", "0.33"});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(dir / "X.csv"));
  EXPECT_EQ(run({"gen", "--d", "2", "--n", "10", "--r", "0.5", "--kind", "uniform"}).code, 2);
  EXPECT_EQ(run({"gen", "--n", "10", "--r", "0.5"}).code, 2);
}

class CliPipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fresh_dir("pipeline");
    ASSERT_EQ(run({"--seed", "3", "--out", dir.string(), "gen", "--d", "200", "--n", "200", "--r", "0.8"}).code, 0);
    truth = io::parse_labels(slurp(dir / "labels.csv"));
  }
  CliRun run_match(const std::string& sub, std::vector<std::string> flags) {
    std::vector<std::string> args{"--out", (dir / sub).string(), "match", (dir / "X.csv").string(),
                                  (dir / "Y.csv").string()};
    args.insert(args.end(), flags.begin(), flags.end());
    return run(args);
  }
  fs::path dir;
  std::vector<std::size_t> truth;
};

TEST_F(CliPipeline, RowSumKmeansRecoversLabels) {
  auto r = run_match("rs", {"--method", "rowsum", "--kmeans"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto p = io::parse_partition(slurp(dir / "rs" / "partition.csv"));
  EXPECT_EQ(p.inliers(), truth);
  auto e = run({"eval", (dir / "rs" / "partition.csv").string(), (dir / "labels.csv").string()});
  EXPECT_EQ(e.code, 0);
  EXPECT_EQ(e.out, "0.000000,0.000000,0.000000\n");
  auto diag = nlohmann::json::parse(slurp(dir / "rs" / "diagnostics.json"));
  EXPECT_EQ(diag["method"], "rowsum");
  EXPECT_EQ(diag["inliers"], 160);
  auto manifest = nlohmann::json::parse(slurp(dir / "rs" / "manifest.json"));
  EXPECT_EQ(manifest["config"]["two_means"], true);
  EXPECT_EQ(manifest["config"]["preprocess"], "cn");
  EXPECT_FALSE(manifest.contains("wall_ms"));
}

TEST_F(CliPipeline, EigenvectorThresholdRecoversLabels) {
  auto r = run_match("eig", {"--method", "eig", "--threshold", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::parse_partition(slurp(dir / "eig" / "partition.csv")).inliers(), truth);
}

TEST_F(CliPipeline, CliEqualsLibrary) {
  auto x = io::read_matrix_csv(dir / "X.csv");
  auto y = io::read_matrix_csv(dir / "Y.csv");
  struct Case { std::vector<std::string> flags; MatchConfig cfg; std::size_t splits; };
  auto cfg = [](MatchMethod m, std::optional<double> t, std::optional<double> r, PreprocessMode mode) {
    MatchConfig c;
    c.method = m;
    c.threshold = t;
    c.inlier_fraction = r;
    c.preprocess = mode;
    return c;
  };
  std::vector<Case> cases{
      {{"--method", "eig", "--kmeans"}, cfg(MatchMethod::eigenvector, {}, {}, PreprocessMode::center_normalize), 1},
      {{"--method", "eig", "--threshold", "0.7", "--preprocess", "none"},
       cfg(MatchMethod::eigenvector, 0.7, {}, PreprocessMode::none), 1},
      {{"--method", "rowsum", "--expected-r", "0.8", "--preprocess", "none"},
       cfg(MatchMethod::row_sum, {}, 0.8, PreprocessMode::none), 1},
      {{"--method", "rowsum", "--splits", "4"}, cfg(MatchMethod::row_sum, {}, {}, PreprocessMode::center_normalize), 4},
  };
  for (std::size_t k = 0; k < cases.size(); ++k) {
    auto r = run_match("case" + std::to_string(k), cases[k].flags);
    ASSERT_EQ(r.code, 0) << r.err;
    auto got = io::parse_partition(slurp(dir / ("case" + std::to_string(k)) / "partition.csv"));
    auto expected = cases[k].splits == 1 ? match_points(x, y, cases[k].cfg).partition
                                         : parallel_match(x, y, cases[k].splits, cases[k].cfg).partition;
    EXPECT_EQ(got, expected) << "case " << k;
    auto e = run({"eval", (dir / ("case" + std::to_string(k)) / "partition.csv").string(),
                  (dir / "labels.csv").string()});
    EXPECT_EQ(e.out, cli::format_error_line(error_rates(truth, expected)) + "\n");
  }
}

TEST_F(CliPipeline, FlagConflictsAreUsageErrors) {
  EXPECT_EQ(run_match("c1", {"--threshold", "0.5", "--kmeans"}).code, 2);
  EXPECT_EQ(run_match("c2", {"--expected-r", "0.5", "--kmeans"}).code, 2);
  EXPECT_EQ(run_match("c3", {"--threshold", "0.5", "--expected-r", "0.5"}).code, 2);
  EXPECT_EQ(run_match("c4", {"--method", "lloyd"}).code, 2);
  EXPECT_EQ(run_match("c5", {"--threshold", "-1"}).code, 2);
  EXPECT_EQ(run_match("c6", {"--preprocess", "zscore"}).code, 2);
  for (const char* sub : {"c1", "c2", "c3", "c4", "c5", "c6"}) EXPECT_FALSE(fs::exists(dir / sub / "partition.csv"));
}

TEST_F(CliPipeline, DataErrorsLeaveNoOutput) {
  auto other = fresh_dir("pipeline_other");
  ASSERT_EQ(run({"--out", other.string(), "gen", "--d", "200", "--n", "100", "--r", "0.5"}).code, 0);
  auto r = run({"--out", (dir / "bad").string(), "match", (dir / "X.csv").string(), (other / "Y.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(dir / "bad"));
  write(dir / "broken.csv", "1,2\n3\n");
  EXPECT_EQ(run({"--out", (dir / "bad").string(), "match", (dir / "broken.csv").string(),
                 (dir / "broken.csv").string()}).code,
            1);
  EXPECT_EQ(run({"--out", (dir / "bad").string(), "match", (dir / "missing.csv").string(),
                 (dir / "X.csv").string()}).code,
            1);
  EXPECT_EQ(run_match("bad", {"--splits", "101"}).code, 1);
  EXPECT_FALSE(fs::exists(dir / "bad"));
}

TEST(CliEval, HandExample) {
  auto dir = fresh_dir("eval");
  write(dir / "p.csv", "0,G\n1,G\n2,B\n3,B\n4,B\n");
  write(dir / "l.csv", "0\n1\n2\n");
  auto r = run({"eval", (dir / "p.csv").string(), (dir / "l.csv").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0.333333,0.000000,0.200000\n");
}

TEST(CliEval, IndexMismatch) {
  auto dir = fresh_dir("eval_bad");
  write(dir / "p.csv", "0,G\n1,B\n");
  write(dir / "l.csv", "0\n5\n");
  EXPECT_EQ(run({"eval", (dir / "p.csv").string(), (dir / "l.csv").string()}).code, 1);
  write(dir / "l.csv", "0\n1\n");
  EXPECT_EQ(run({"eval", (dir / "p.csv").string(), (dir / "l.csv").string()}).code, 1);
}

TEST(CliImgdiff, PermutedPixelIsHighlighted) {
  auto dir = fresh_dir("img");
  write(dir / "a.ppm", io::format_ppm(image(kPixelsA)));
  write(dir / "b.ppm", io::format_ppm(image(kPixelsB)));
  for (const char* method : {"rowsum", "eig"}) {
    auto out = dir / method;
    auto r = run({"--out", out.string(), "imgdiff", (dir / "a.ppm").string(), (dir / "b.ppm").string(),
                  "--method", method});
    ASSERT_EQ(r.code, 0) << r.err;
    auto mask = io::read_ppm(out / "mask.ppm");
    ASSERT_EQ(mask.pixels(), 4u);
    for (std::size_t p = 0; p < 4; ++p) {
      const bool yellow = mask.rgb[3 * p] == 255 && mask.rgb[3 * p + 1] == 255 && mask.rgb[3 * p + 2] == 0;
      EXPECT_EQ(yellow, p == 3) << method << " pixel " << p;
    }
    // Unchanged pixels are grey copies of A: round(0.299 R + 0.587 G + 0.114 B).
    EXPECT_EQ(mask.rgb[0], 79);
    EXPECT_EQ(mask.rgb[3], 226);
  }
}

TEST(CliImgdiff, IdenticalImagesGiveEmptyMask) {
  auto dir = fresh_dir("img_same");
  write(dir / "a.ppm", io::format_ppm(image(kPixelsA)));
  auto r = run({"--out", dir.string(), "imgdiff", (dir / "a.ppm").string(), (dir / "a.ppm").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto mask = io::read_ppm(dir / "mask.ppm");
  for (std::size_t p = 0; p < 4; ++p) EXPECT_EQ(mask.rgb[3 * p], mask.rgb[3 * p + 2]);
  auto diag = nlohmann::json::parse(slurp(dir / "diagnostics.json"));
  EXPECT_EQ(diag["identical"], true);
  EXPECT_EQ(diag["changed"], 0);
}

TEST(CliImgdiff, Errors) {
  auto dir = fresh_dir("img_bad");
  write(dir / "a.ppm", io::format_ppm(image(kPixelsA)));
  write(dir / "b.ppm", io::format_ppm(image(kPixelsB)));
  write(dir / "wide.ppm", io::format_ppm(io::Image{4, 1, kPixelsA}));
  write(dir / "junk.ppm", "P6 2 2 255\nxx");
  auto out = (dir / "out").string();
  EXPECT_EQ(run({"--out", out, "imgdiff", (dir / "a.ppm").string(), (dir / "wide.ppm").string()}).code, 1);
  EXPECT_EQ(run({"--out", out, "imgdiff", (dir / "a.ppm").string(), (dir / "junk.ppm").string()}).code, 1);
  EXPECT_EQ(run({"--out", out, "imgdiff", (dir / "a.ppm").string(), (dir / "b.ppm").string(), "--max-pixels", "3"}).code, 1);
  EXPECT_FALSE(fs::exists(dir / "out"));
  EXPECT_EQ(run({"--out", out, "imgdiff", (dir / "a.ppm").string(), (dir / "b.ppm").string(), "--sample", "3",
                 "--max-pixels", "3"}).code,
            0);
}

TEST(CliBench, SmallSweeps) {
  auto dir = fresh_dir("bench");
  auto r = run({"--seed", "1", "--threads", "2", "--out", dir.string(), "bench", "--trials", "2",
                "--split-trials", "1", "--r-n", "40", "--r-grid", "0.6,0.8", "--sigma-n", "40",
                "--sigma-grid", "0,0.5", "--split-n", "40", "--split-d", "5", "--split-grid", "1,2"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto r_csv = slurp(dir / "r_sweep.csv");
  EXPECT_EQ(std::count(r_csv.begin(), r_csv.end(), '\n'), 1 + 2 * 5);
  auto s_csv = slurp(dir / "sigma2_sweep.csv");
  EXPECT_EQ(std::count(s_csv.begin(), s_csv.end(), '\n'), 1 + 2 * 5);
  auto p_csv = slurp(dir / "splits_sweep.csv");
  EXPECT_EQ(std::count(p_csv.begin(), p_csv.end(), '\n'), 1 + 2 * 2);
  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["sweeps"]["r_sweep"]["grid"].size(), 2u);
  EXPECT_EQ(manifest["outputs"].size(), 4u);
  EXPECT_EQ(run({"bench", "--sweep", "everything"}).code, 2);
}

TEST(CliProcess, ExitCodesFromBinary) {
  const std::string bin = HMATCH_CLI_PATH;
  auto code = [](const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  EXPECT_EQ(code(bin + " --help"), 0);
  EXPECT_EQ(code(bin), 2);
  EXPECT_EQ(code(bin + " frobnicate"), 2);
  EXPECT_EQ(code(bin + " eval /nonexistent/p.csv /nonexistent/l.csv"), 1);
}
