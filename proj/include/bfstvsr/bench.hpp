#pragma once

// Reuse vs naive inference timing. The reuse path encodes and predicts the
// spline/Fourier representations once for K timesteps; the naive path redoes
// both for every timestep.

#include <algorithm>
#include <chrono>
#include <ostream>
#include <string>
#include <vector>

#include "bfstvsr/pipeline.hpp"
#include "bfstvsr/rng.hpp"

namespace bfstvsr {

struct BenchConfig {
  int height = 32;
  int width = 32;
  int timesteps = 16;
  int repeat = 5;
  double scale = 2.0;
  std::uint64_t seed = 1;
};

inline const std::vector<std::string>& bench_phases() {
  static const std::vector<std::string> phases{"encode", "rep_predict", "per_t", "total"};
  return phases;
}

struct BenchRow {
  std::string path;
  std::string phase;
  double median_ms = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;

  double median(const std::string& path, const std::string& phase) const {
    for (const auto& r : rows) {
      if (r.path == path && r.phase == phase) return r.median_ms;
    }
    throw std::out_of_range("bench: no row " + path + "/" + phase);
  }
  double reuse_ratio() const { return median("reuse", "total") / median("naive", "total"); }
};

inline void write_bench_csv(std::ostream& os, const BenchResult& r) {
  os << "path,phase,median_ms\n";
  for (const auto& row : r.rows) os << row.path << ',' << row.phase << ',' << row.median_ms << '\n';
}

namespace bench_detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <class T>
FeatureGrid<T> random_frame(Rng& rng, int h, int w) {
  FeatureGrid<T> f(3, h, w);
  for (auto& v : f.data()) v = static_cast<T>(rng.uniform(0.0, 1.0));
  return f;
}

}  // namespace bench_detail

template <class T>
BenchResult run_bench(const Model<T>& model, const BenchConfig& cfg) {
  if (cfg.height < 1 || cfg.width < 1) throw std::invalid_argument("bench: size must be positive");
  if (cfg.timesteps < 1) throw std::invalid_argument("bench: timesteps must be >= 1");
  if (cfg.repeat < 1) throw std::invalid_argument("bench: repeat must be >= 1");
  using namespace bench_detail;
  Rng rng(cfg.seed);
  const auto f0 = random_frame<T>(rng, cfg.height, cfg.width);
  const auto f1 = random_frame<T>(rng, cfg.height, cfg.width);
  std::vector<double> times(cfg.timesteps);
  for (int k = 0; k < cfg.timesteps; ++k) times[k] = (k + 1.0) / (cfg.timesteps + 1.0);

  // [path][phase] samples
  std::vector<std::vector<std::vector<double>>> samples(2, std::vector<std::vector<double>>(4));
  for (int rep = 0; rep < cfg.repeat; ++rep) {
    {
      const auto t0 = Clock::now();
      auto latents = model.encode(f0, f1);
      const double enc = ms_since(t0);
      const auto t1 = Clock::now();
      const auto p = model.prepare_latents(std::move(latents), cfg.scale);
      const double pre = ms_since(t1);
      const auto t2 = Clock::now();
      for (double t : times) {
        const auto out = model.render(p, t);
        (void)out;
      }
      const double per_t = ms_since(t2);
      samples[0][0].push_back(enc);
      samples[0][1].push_back(pre);
      samples[0][2].push_back(per_t);
      samples[0][3].push_back(enc + pre + per_t);
    }
    {
      double enc = 0.0;
      double pre = 0.0;
      double per_t = 0.0;
      for (double t : times) {
        const auto t0 = Clock::now();
        auto latents = model.encode(f0, f1);
        enc += ms_since(t0);
        const auto t1 = Clock::now();
        const auto p = model.prepare_latents(std::move(latents), cfg.scale);
        pre += ms_since(t1);
        const auto t2 = Clock::now();
        const auto out = model.render(p, t);
        (void)out;
        per_t += ms_since(t2);
      }
      samples[1][0].push_back(enc);
      samples[1][1].push_back(pre);
      samples[1][2].push_back(per_t);
      samples[1][3].push_back(enc + pre + per_t);
    }
  }
  BenchResult r;
  const char* paths[2] = {"reuse", "naive"};
  for (int path = 0; path < 2; ++path) {
    for (std::size_t ph = 0; ph < bench_phases().size(); ++ph) {
      r.rows.push_back(BenchRow{paths[path], bench_phases()[ph], median(samples[path][ph])});
    }
  }
  return r;
}

}  // namespace bfstvsr
