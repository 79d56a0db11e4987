#pragma once

// Command-line surface: verify, train, interpolate, bench.
// Exit codes: 0 success, 1 check/acceptance failure, 2 usage or config error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bfstvsr/bench.hpp"
#include "bfstvsr/checkpoint.hpp"
#include "bfstvsr/config.hpp"
#include "bfstvsr/metrics.hpp"
#include "bfstvsr/png_io.hpp"
#include "bfstvsr/trainer.hpp"
#include "bfstvsr/verify.hpp"

namespace bfstvsr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses "0.25,0.5" into times in [0, 1].
inline std::vector<double> parse_times(const std::string& text) {
  std::vector<double> times;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double t = 0.0;
    try {
      t = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError("--times: '" + item + "' is not a number");
    }
    if (used != item.size() || !std::isfinite(t)) throw UsageError("--times: '" + item + "' is not a number");
    if (t < 0.0 || t > 1.0) throw UsageError("--times: " + item + " lies outside [0, 1]");
    times.push_back(t);
  }
  if (times.empty() || (!text.empty() && text.back() == ',')) throw UsageError("--times: empty entry");
  return times;
}

/// Parses "HxW".
inline std::pair<int, int> parse_size(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument("no x");
    std::size_t a = 0;
    std::size_t b = 0;
    const int h = std::stoi(text.substr(0, x), &a);
    const int w = std::stoi(text.substr(x + 1), &b);
    if (a != x || b != text.size() - x - 1 || h < 1 || w < 1) throw std::invalid_argument("bad");
    return {h, w};
  } catch (const std::exception&) {
    throw UsageError("--size: expected HxW with positive integers, got '" + text + "'");
  }
}

inline std::string frame_name(const char* prefix, std::size_t index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.%s", prefix, index, ext);
  return buf;
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, text);
}

namespace cli_detail {

struct Common {
  int threads = 1;
};

inline int cmd_verify(const std::string& suite, bool corrupt, int seeds, std::ostream& out, std::ostream& err) {
  const auto& names = verify_suite_names();
  if (!suite.empty() && std::find(names.begin(), names.end(), suite) == names.end()) {
    err << "verify: unknown suite '" << suite << "' (known:";
    for (const auto& n : names) err << ' ' << n;
    err << ")\n";
    return kExitUsage;
  }
  VerifyOptions opt;
  opt.corrupt_bspline = corrupt;
  opt.gradcheck_seeds = seeds;
  int failures = 0;
  int total = 0;
  for (const auto& name : names) {
    if (!suite.empty() && name != suite) continue;
    for (const auto& r : run_verify_suite(name, opt)) {
      ++total;
      if (!r.passed) ++failures;
      out << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(10) << r.suite << ' ' << std::setw(36)
          << r.name << ' ' << r.detail << '\n';
      if (!r.passed) err << "assertion failed: " << r.suite << '/' << r.name << '\n';
    }
  }
  out << (total - failures) << '/' << total << " checks passed\n";
  return failures == 0 ? kExitOk : kExitFailure;
}

inline std::vector<std::string> read_loss_rows(const std::filesystem::path& path, std::int64_t before) {
  std::vector<std::string> rows;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) return rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    if (std::stoll(line.substr(0, comma)) < before) rows.push_back(line);
  }
  return rows;
}

inline int cmd_train(const std::string& config_path, std::string out_dir, bool resume, std::int64_t save_every,
                     int threads, std::ostream& out, std::ostream& err) {
  if (!std::filesystem::is_regular_file(config_path)) {
    err << "train: config file '" << config_path << "' does not exist\n";
    return kExitUsage;
  }
  RunConfig rc;
  try {
    rc = load_run_config(config_path);
  } catch (const ConfigError& e) {
    err << "train: invalid config at " << e.pointer << ": " << e.what() << '\n';
    return kExitUsage;
  }
  if (out_dir.empty()) out_dir = rc.out;
  if (out_dir.empty()) {
    err << "train: no output directory (set --out or \"out\" in the config)\n";
    return kExitUsage;
  }
  const std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    err << "train: cannot create output directory '" << out_dir << "'\n";
    return kExitUsage;
  }
  const auto ckpt = dir / "checkpoint.bin";
  const auto csv = dir / "loss.csv";
  if (resume && !std::filesystem::is_regular_file(ckpt)) {
    err << "train: --resume given but '" << ckpt.string() << "' does not exist\n";
    return kExitUsage;
  }

  Trainer trainer(rc.train);
  trainer.model().set_threads(threads);
  std::vector<std::string> rows;
  if (resume) {
    try {
      trainer.resume(ckpt);
    } catch (const CheckpointError& e) {
      err << "train: cannot resume: " << e.what() << '\n';
      return kExitUsage;
    }
    rows = read_loss_rows(csv, trainer.iteration());
  }
  const auto flush = [&] {
    trainer.save(ckpt);
    std::string text = loss_csv_header() + "\n";
    for (const auto& r : rows) text += r + "\n";
    write_text_atomic(csv, text);
  };
  try {
    while (!trainer.done()) {
      const auto row = trainer.step();
      rows.push_back(format_loss_row(row));
      if (row.psnr_val) {
        out << "iteration " << row.iteration << " lr " << row.lr << " loss " << row.loss << " psnr_val "
            << *row.psnr_val << '\n';
      }
      if (save_every > 0 && trainer.iteration() % save_every == 0) flush();
    }
  } catch (const TrainingDiverged& e) {
    flush();
    err << "train: " << e.what() << '\n';
    return kExitFailure;
  }
  flush();
  out << "wrote " << ckpt.string() << " and " << csv.string() << '\n';
  return kExitOk;
}

struct InterpolateArgs {
  std::string ckpt;
  std::string frame0;
  std::string frame1;
  double scale = 2.0;
  std::string times;
  std::string out_dir = ".";
  std::string gt_dir;
  bool dump_float = false;
};

inline int cmd_interpolate(const InterpolateArgs& a, int threads, std::ostream& out, std::ostream& err) {
  std::vector<double> times;
  try {
    times = parse_times(a.times);
    check_scale(a.scale);
  } catch (const UsageError& e) {
    err << "interpolate: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "interpolate: " << e.what() << '\n';
    return kExitUsage;
  }
  for (const auto* p : {&a.ckpt, &a.frame0, &a.frame1}) {
    if (!std::filesystem::is_regular_file(*p)) {
      err << "interpolate: '" << *p << "' does not exist\n";
      return kExitUsage;
    }
  }
  if (!a.gt_dir.empty() && !std::filesystem::is_directory(a.gt_dir)) {
    err << "interpolate: --gt-dir '" << a.gt_dir << "' is not a directory\n";
    return kExitUsage;
  }
  FeatureGrid<float> f0;
  FeatureGrid<float> f1;
  try {
    f0 = read_png(a.frame0);
    f1 = read_png(a.frame1);
  } catch (const ImageFormatError& e) {
    err << "interpolate: format error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (!f0.same_shape(f1)) {
    err << "interpolate: frame sizes differ (" << f0.height() << "x" << f0.width() << " vs " << f1.height() << "x"
        << f1.width() << ")\n";
    return kExitUsage;
  }
  std::vector<FeatureGrid<float>> gts;
  if (!a.gt_dir.empty()) {
    for (std::size_t i = 0; i < times.size(); ++i) {
      const auto path = std::filesystem::path(a.gt_dir) / frame_name("gt", i, "png");
      try {
        gts.push_back(read_png(path));
      } catch (const std::exception& e) {
        err << "interpolate: ground truth: " << e.what() << '\n';
        return kExitUsage;
      }
      const int hh = scaled_extent(f0.height(), a.scale);
      const int ww = scaled_extent(f0.width(), a.scale);
      if (gts.back().height() != hh || gts.back().width() != ww) {
        err << "interpolate: '" << path.string() << "' is not " << hh << "x" << ww << '\n';
        return kExitUsage;
      }
    }
  }
  Model<float> model = [&] {
    try {
      return load_model(a.ckpt);
    } catch (const CheckpointError& e) {
      throw UsageError(std::string("cannot load checkpoint: ") + e.what());
    }
  }();
  model.set_threads(threads);
  std::error_code ec;
  std::filesystem::create_directories(a.out_dir, ec);
  if (ec || !std::filesystem::is_directory(a.out_dir)) {
    err << "interpolate: cannot create '" << a.out_dir << "'\n";
    return kExitUsage;
  }
  const auto frames = model.interpolate_sequence(f0, f1, times, a.scale);
  std::ostringstream metrics;
  metrics << "frame_index,t,psnr,ssim\n" << std::setprecision(10);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto dir = std::filesystem::path(a.out_dir);
    write_png(dir / frame_name("out", i, "png"), frames[i]);
    if (a.dump_float) write_float_dump(dir / frame_name("out", i, "f32"), frames[i]);
    if (!gts.empty()) {
      // Score what was written: the 8-bit quantized frame.
      FeatureGrid<double> q(3, frames[i].height(), frames[i].width());
      for (std::size_t k = 0; k < q.size(); ++k) q.data()[k] = to_u8(frames[i].data()[k]) / 255.0;
      const bool fits = q.height() >= 11 && q.width() >= 11;
      metrics << i << ',' << times[i] << ',' << y_psnr(q, gts[i]) << ',';
      if (fits) metrics << y_ssim(q, gts[i]);
      else metrics << "nan";
      metrics << '\n';
    }
  }
  if (!gts.empty()) write_text_atomic(std::filesystem::path(a.out_dir) / "metrics.csv", metrics.str());
  out << "wrote " << frames.size() << " frame(s) to " << a.out_dir << '\n';
  return kExitOk;
}

struct BenchArgs {
  std::string size = "32x32";
  int timesteps = 16;
  int repeat = 5;
  double scale = 2.0;
  std::string ckpt;
  std::string out;
};

inline int cmd_bench(const BenchArgs& a, int threads, std::ostream& out, std::ostream& err) {
  BenchConfig cfg;
  try {
    std::tie(cfg.height, cfg.width) = parse_size(a.size);
    check_scale(a.scale);
  } catch (const std::exception& e) {
    err << "bench: " << e.what() << '\n';
    return kExitUsage;
  }
  if (a.timesteps < 1 || a.repeat < 1) {
    err << "bench: --timesteps and --repeat must be >= 1\n";
    return kExitUsage;
  }
  cfg.timesteps = a.timesteps;
  cfg.repeat = a.repeat;
  cfg.scale = a.scale;
  if (!a.ckpt.empty() && !std::filesystem::is_regular_file(a.ckpt)) {
    err << "bench: '" << a.ckpt << "' does not exist\n";
    return kExitUsage;
  }
  Model<float> model = a.ckpt.empty() ? Model<float>(ModelConfig::desk()) : load_model(a.ckpt);
  model.set_threads(threads);
  const auto r = run_bench(model, cfg);
  std::ostringstream csv;
  write_bench_csv(csv, r);
  if (a.out.empty()) out << csv.str();
  else write_text_atomic(a.out, csv.str());
  return kExitOk;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Continuous space-time video super-resolution with B-spline and Fourier mappers"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker threads for per-pixel loops")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "run the property suites");
  std::string suite;
  bool corrupt = false;
  int seeds = 20;
  verify->add_option("--suite", suite, "run only this suite");
  verify->add_flag("--corrupt-bspline", corrupt, "mutation fixture: perturb the cubic B-spline");
  verify->add_option("--gradcheck-seeds", seeds, "random seeds per gradient check")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "train a model");
  std::string config_path;
  std::string train_out;
  bool resume = false;
  std::int64_t save_every = 100;
  train->add_option("--config", config_path, "JSON run configuration")->required();
  train->add_option("--out", train_out, "output directory (overrides the config)");
  train->add_flag("--resume", resume, "continue from <out>/checkpoint.bin");
  train->add_option("--save-every", save_every, "checkpoint interval in iterations (0: only at the end)");

  auto* interp = app.add_subcommand("interpolate", "render intermediate frames");
  cli_detail::InterpolateArgs ia;
  interp->add_option("--ckpt", ia.ckpt)->required();
  interp->add_option("--frame0", ia.frame0)->required();
  interp->add_option("--frame1", ia.frame1)->required();
  interp->add_option("--scale", ia.scale)->required();
  interp->add_option("--times", ia.times, "comma-separated times in [0, 1]")->required();
  interp->add_option("--out", ia.out_dir, "output directory");
  interp->add_option("--gt-dir", ia.gt_dir, "directory with gt_%04d.png for metrics.csv");
  interp->add_flag("--dump-float", ia.dump_float, "also write raw float32 planes");

  auto* bench = app.add_subcommand("bench", "time the reuse and naive inference paths");
  cli_detail::BenchArgs ba;
  bench->add_option("--size", ba.size, "HxW of the low-resolution input");
  bench->add_option("--timesteps", ba.timesteps);
  bench->add_option("--repeat", ba.repeat);
  bench->add_option("--scale", ba.scale);
  bench->add_option("--ckpt", ba.ckpt, "checkpoint (default: freshly initialised desk model)");
  bench->add_option("--out", ba.out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*verify) return cli_detail::cmd_verify(suite, corrupt, seeds, out, err);
    if (*train) return cli_detail::cmd_train(config_path, train_out, resume, save_every, threads, out, err);
    if (*interp) return cli_detail::cmd_interpolate(ia, threads, out, err);
    if (*bench) return cli_detail::cmd_bench(ba, threads, out, err);
  } catch (const UsageError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace bfstvsr
