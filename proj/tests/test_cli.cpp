#include <gtest/gtest.h>
#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bfstvsr/cli.hpp"

using namespace bfstvsr;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bfstvsr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

void write_png16(const fs::path& path, int w, int h) {
  FILE* f = std::fopen(path.string().c_str(), "wb");
  ASSERT_NE(f, nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 6, 0x80);
  for (int y = 0; y < h; ++y) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

FeatureGrid<float> pattern(int h, int w, float phase) {
  FeatureGrid<float> f(3, h, w);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) f(c, y, x) = 0.5f + 0.3f * std::sin(0.7f * x + 0.4f * y + phase + c);
    }
  }
  return f;
}

class CliTest : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("bfstvsr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write_config(const std::string& name, const std::string& text) {
    const auto p = dir / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string tiny_config_json(int iterations) {
    return R"({"model": {"channels": 4, "mapper_hidden": [8, 8], "decoder_hidden": 8},
               "data": {"patch": 6, "targets": 1},
               "train": {"iterations": )" +
           std::to_string(iterations) + R"(, "batch": 1, "scale_min": 2, "scale_max": 2, "validate_every": 2}})";
  }

  fs::path trained_checkpoint() {
    const auto cfg = write_config("cfg.json", tiny_config_json(2));
    const auto r = cli({"train", "--config", cfg.string(), "--out", (dir / "run").string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return dir / "run" / "checkpoint.bin";
  }
};

}  // namespace

TEST(CliParsing, TimesAndSize) {
  EXPECT_EQ(parse_times("0,0.5,1"), (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_THROW(parse_times("0.5,1.5"), UsageError);
  EXPECT_THROW(parse_times("abc"), UsageError);
  EXPECT_THROW(parse_times(""), UsageError);
  EXPECT_EQ(parse_size("32x16"), std::make_pair(32, 16));
  EXPECT_THROW(parse_size("32"), UsageError);
  EXPECT_EQ(frame_name("out", 7, "png"), "out_0007.png");
}

TEST(CliUsage, UnknownCommandOrFlagExitsTwo) {
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"verify", "--bogus"}).code, 2);
  EXPECT_EQ(cli({"--threads", "0", "verify", "--suite", "metrics"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
}

TEST(CliVerify, SingleSuitePasses) {
  const auto r = cli({"--threads", "2", "verify", "--suite", "bspline"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  EXPECT_EQ(r.out.find("fourier"), std::string::npos);
}

TEST(CliVerify, UnknownSuiteExitsTwo) {
  const auto r = cli({"verify", "--suite", "nope"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown suite"), std::string::npos);
}

TEST(CliVerify, MutantExitsOneAndNamesAssertion) {
  const auto r = cli({"verify", "--suite", "bspline", "--corrupt-bspline"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("assertion failed: bspline/"), std::string::npos) << r.err;
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, TrainMissingConfigExitsTwo) {
  EXPECT_EQ(cli({"train", "--config", (dir / "missing.json").string(), "--out", dir.string()}).code, 2);
  EXPECT_EQ(cli({"train", "--out", dir.string()}).code, 2);
}

TEST_F(CliTest, TrainInvalidConfigReportsPointer) {
  const auto cfg = write_config("bad.json", R"({"train": {"batch": "two"}})");
  const auto r = cli({"train", "--config", cfg.string(), "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/train/batch"), std::string::npos) << r.err;
}

TEST_F(CliTest, TrainWritesCheckpointAndLossCsv) {
  const auto cfg = write_config("cfg.json", tiny_config_json(3));
  const auto r = cli({"train", "--config", cfg.string(), "--out", (dir / "run").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::is_regular_file(dir / "run" / "checkpoint.bin"));
  const auto rows = lines(slurp(dir / "run" / "loss.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "iteration,lr,loss,psnr_val");
  for (int i = 0; i < 3; ++i) EXPECT_EQ(rows[i + 1].substr(0, 2), std::to_string(i) + ",");
  int validated = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) validated += rows[i].back() != ',';
  EXPECT_GE(validated, 1);
  for (const auto& e : fs::directory_iterator(dir / "run")) EXPECT_NE(e.path().extension(), ".tmp");
}

TEST_F(CliTest, TrainResumeContinuesIterationCounter) {
  const auto short_cfg = write_config("short.json", tiny_config_json(2));
  const auto long_cfg = write_config("long.json", tiny_config_json(4));
  ASSERT_EQ(cli({"train", "--config", short_cfg.string(), "--out", (dir / "a").string()}).code, 0);
  const auto r = cli({"train", "--config", long_cfg.string(), "--out", (dir / "a").string(), "--resume"});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(cli({"train", "--config", long_cfg.string(), "--out", (dir / "b").string()}).code, 0);
  EXPECT_EQ(slurp(dir / "a" / "loss.csv"), slurp(dir / "b" / "loss.csv"));
  EXPECT_EQ(slurp(dir / "a" / "checkpoint.bin"), slurp(dir / "b" / "checkpoint.bin"));
  EXPECT_EQ(cli({"train", "--config", long_cfg.string(), "--out", (dir / "c").string(), "--resume"}).code, 2);
}

TEST_F(CliTest, InterpolateWritesFramesAndMetrics) {
  const auto ckpt = trained_checkpoint();
  write_png(dir / "f0.png", pattern(6, 6, 0.0f));
  write_png(dir / "f1.png", pattern(6, 6, 0.5f));
  fs::create_directories(dir / "gt");
  write_png(dir / "gt" / "gt_0000.png", pattern(12, 12, 0.1f));
  write_png(dir / "gt" / "gt_0001.png", pattern(12, 12, 0.4f));
  const auto out = dir / "out";
  const auto r = cli({"interpolate", "--ckpt", ckpt.string(), "--frame0", (dir / "f0.png").string(), "--frame1",
                      (dir / "f1.png").string(), "--scale", "2", "--times", "0.25,0.75", "--out", out.string(),
                      "--gt-dir", (dir / "gt").string(), "--dump-float"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto a = read_png(out / "out_0000.png");
  EXPECT_EQ(a.height(), 12);
  EXPECT_EQ(a.width(), 12);
  EXPECT_TRUE(fs::is_regular_file(out / "out_0001.png"));
  EXPECT_FALSE(fs::exists(out / "out_0002.png"));
  EXPECT_EQ(fs::file_size(out / "out_0000.f32"), 3u * 12 * 12 * 4);
  const auto rows = lines(slurp(out / "metrics.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "frame_index,t,psnr,ssim");
  EXPECT_EQ(rows[1].substr(0, 7), "0,0.25,");
  EXPECT_EQ(rows[2].substr(0, 7), "1,0.75,");
}

TEST_F(CliTest, InterpolateSingleTimeWritesOneFile) {
  const auto ckpt = trained_checkpoint();
  write_png(dir / "f0.png", pattern(5, 7, 0.0f));
  write_png(dir / "f1.png", pattern(5, 7, 0.3f));
  const auto r = cli({"interpolate", "--ckpt", ckpt.string(), "--frame0", (dir / "f0.png").string(), "--frame1",
                      (dir / "f1.png").string(), "--scale", "1", "--times", "0.5", "--out", (dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::is_regular_file(dir / "o" / "out_0000.png"));
  EXPECT_FALSE(fs::exists(dir / "o" / "out_0001.png"));
  EXPECT_FALSE(fs::exists(dir / "o" / "metrics.csv"));
}

TEST_F(CliTest, InterpolateUsageErrors) {
  const auto ckpt = trained_checkpoint();
  write_png(dir / "a.png", pattern(6, 6, 0.0f));
  write_png(dir / "b.png", pattern(6, 8, 0.0f));
  write_png16(dir / "deep.png", 6, 6);
  const auto run = [&](const std::string& f1, const std::string& times) {
    return cli({"interpolate", "--ckpt", ckpt.string(), "--frame0", (dir / "a.png").string(), "--frame1",
                (dir / f1).string(), "--scale", "2", "--times", times, "--out", (dir / "o").string()});
  };
  const auto mismatch = run("b.png", "0.5");
  EXPECT_EQ(mismatch.code, 2);
  EXPECT_NE(mismatch.err.find("sizes differ"), std::string::npos);
  const auto deep = run("deep.png", "0.5");
  EXPECT_EQ(deep.code, 2);
  EXPECT_NE(deep.err.find("format error"), std::string::npos) << deep.err;
  EXPECT_EQ(run("a.png", "1.5").code, 2);
  EXPECT_EQ(run("a.png", "x").code, 2);
  EXPECT_EQ(run("missing.png", "0.5").code, 2);
}

TEST(PngIo, RoundTripAndSixteenBitRejected) {
  const auto dir = fs::temp_directory_path() / "bfstvsr_png_io";
  fs::create_directories(dir);
  FeatureGrid<float> f(3, 2, 3);
  for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = static_cast<float>(i) / 17.0f;
  write_png(dir / "rt.png", f);
  const auto g = read_png(dir / "rt.png");
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(g.data()[i], to_u8(f.data()[i]) / 255.0f);
  write_png16(dir / "deep.png", 4, 4);
  EXPECT_THROW(read_png(dir / "deep.png"), ImageFormatError);
  std::ofstream(dir / "junk.png") << "not a png";
  EXPECT_THROW(read_png(dir / "junk.png"), ImageFormatError);
  fs::remove_all(dir);
}

TEST(CliBench, CsvHasPhaseRowsForBothPaths) {
  const auto path = fs::temp_directory_path() / "bfstvsr_bench.csv";
  const auto r = cli({"bench", "--size", "8x8", "--timesteps", "2", "--repeat", "1", "--out", path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(path));
  ASSERT_EQ(rows.size(), 1 + bench_phases().size() * 2);
  EXPECT_EQ(rows[0], "path,phase,median_ms");
  EXPECT_EQ(cli({"bench", "--size", "8by8"}).code, 2);
  fs::remove(path);
}
